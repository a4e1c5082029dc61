#include "maeguard/harness/artifacts.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "maeguard/harness/config.hpp"
#include "maeguard/models/serialize.hpp"

namespace maeguard::harness {

namespace fs = std::filesystem;

RunDir RunDir::create(const fs::path& output_dir) {
  fs::create_directories(output_dir);
  for (int n = 1; n < 100000; ++n) {
    std::ostringstream name;
    name << "run-" << std::setw(4) << std::setfill('0') << n;
    const auto dir = output_dir / name.str();
    if (fs::create_directory(dir)) return RunDir(dir);
  }
  throw ArtifactError("no free run directory under " + output_dir.string());
}

fs::path RunDir::claim(const std::string& rel) const {
  const auto p = path(rel);
  if (fs::exists(p)) throw ArtifactError("artifact " + p.string() + " already exists; start a new run");
  fs::create_directories(p.parent_path());
  return p;
}

void RunDir::write_text(const std::string& rel, const std::string& content) const {
  std::ofstream out(claim(rel), std::ios::binary);
  out << content;
  if (!out) throw ArtifactError("failed to write " + path(rel).string());
}

std::string RunDir::read_text(const std::string& rel) const {
  std::ifstream in(path(rel), std::ios::binary);
  if (!in) throw ArtifactError("missing artifact " + path(rel).string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> RunDir::artifacts() const {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root_)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root_).generic_string();
    if (rel == "checksums.sha256" || rel.rfind("logs/", 0) == 0) continue;
    out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::map<std::string, std::string> RunDir::write_checksums() const {
  std::map<std::string, std::string> sums;
  std::string text;
  for (const auto& rel : artifacts()) {
    sums[rel] = sha256_hex(path(rel));
    text += sums[rel] + "  " + rel + "\n";
  }
  std::ofstream(path("checksums.sha256"), std::ios::binary) << text;
  return sums;
}

std::string sha256_hex(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ArtifactError("cannot hash " + file.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{md[i]};
  return hex.str();
}

namespace {

constexpr char kAdvMagic[8] = {'M', 'A', 'E', 'G', 'A', 'D', 'V', '\0'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const fs::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ArtifactError(path.string() + ": truncated");
  return v;
}

}  // namespace

void write_adv_set(const fs::path& path, const std::vector<attacks::AdvExample>& set,
                   const attacks::AttackSpec& spec, const models::PatchGrid& grid) {
  nlohmann::json h{{"spec", spec}, {"grid", grid}};
  h["examples"] = nlohmann::json::array();
  for (const auto& e : set) {
    if (e.clean.size() != grid.image_size() || e.adv.size() != grid.image_size())
      throw ArtifactError("write_adv_set: example size does not match the grid");
    h["examples"].push_back({{"image_id", e.image_id}, {"label", e.label}, {"prediction", e.prediction},
                             {"success", e.success}, {"linf", e.linf}, {"l2", e.l2}});
  }
  const std::string header = h.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out.write(kAdvMagic, sizeof kAdvMagic);
  put<std::uint32_t>(out, kAdvFormatVersion);
  put<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& e : set) {
    out.write(reinterpret_cast<const char*>(e.clean.data()), static_cast<std::streamsize>(e.clean.size() * 8));
    out.write(reinterpret_cast<const char*>(e.adv.data()), static_cast<std::streamsize>(e.adv.size() * 8));
  }
}

AdvSetFile read_adv_set(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing adversarial set " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kAdvMagic, 8) != 0)
    throw ArtifactError(path.string() + ": not an adversarial set file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kAdvFormatVersion)
    throw ArtifactError(path.string() + ": unsupported version " + std::to_string(version));
  const auto len = get<std::uint64_t>(in, path);
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len))) throw ArtifactError(path.string() + ": truncated");
  AdvSetFile file;
  try {
    const auto h = nlohmann::json::parse(header);
    file.spec = h.at("spec").get<attacks::AttackSpec>();
    const auto grid = h.at("grid").get<models::PatchGrid>();
    const std::size_t dim = grid.image_size();
    for (const auto& m : h.at("examples")) {
      attacks::AdvExample e;
      e.image_id = m.at("image_id");
      e.label = m.at("label");
      e.prediction = m.at("prediction");
      e.success = m.at("success");
      e.linf = m.at("linf");
      e.l2 = m.at("l2");
      e.clean.resize(dim);
      e.adv.resize(dim);
      if (!in.read(reinterpret_cast<char*>(e.clean.data()), static_cast<std::streamsize>(dim * 8)) ||
          !in.read(reinterpret_cast<char*>(e.adv.data()), static_cast<std::streamsize>(dim * 8)))
        throw ArtifactError(path.string() + ": truncated payload");
      file.examples.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(path.string() + ": bad header: " + e.what());
  }
  return file;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size()) throw ArtifactError("csv: row width does not match the header");
  rows_.push_back(cells);
  return *this;
}

std::string CsvWriter::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += "\n";
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ArtifactError("csv: no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> CsvTable::numbers(const std::string& name) const {
  const auto c = column(name);
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(std::stod(r.at(c)));
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw ArtifactError("csv: ragged row");
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace maeguard::harness

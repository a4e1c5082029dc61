#include "maeguard/models/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "maeguard/models/serialize.hpp"

namespace maeguard::models {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'M', 'A', 'E', 'G', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw CheckpointError(path.string() + ": truncated header");
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::string& kind,
                      const nlohmann::json& config, const ParamList& params,
                      const nlohmann::json& extra) {
  nlohmann::json header;
  header["kind"] = kind;
  header["config"] = config;
  header["extra"] = extra;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& p : params) {
    header["tensors"].push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}});
    offset += p.tensor.numel();
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params) {
    out.write(reinterpret_cast<const char*>(p.tensor.values().data()),
              static_cast<std::streamsize>(p.tensor.numel() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  const auto len = get<std::uint64_t>(in, path);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw CheckpointError(path.string() + ": truncated header");
  }
  Checkpoint ckpt;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.config = header.at("config");
    ckpt.extra = header.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": malformed header: " + e.what());
  }
  std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t available = payload.size() / sizeof(double);
  for (const auto& t : header.at("tensors")) {
    StoredTensor st;
    st.shape = t.at("shape").get<ad::Shape>();
    const auto offset = t.at("offset").get<std::size_t>();
    const auto n = ad::numel(st.shape);
    if (offset + n > available) {
      throw CheckpointError(path.string() + ": payload truncated at tensor " +
                            t.at("name").get<std::string>());
    }
    st.values.resize(n);
    std::memcpy(st.values.data(), payload.data() + offset * sizeof(double), n * sizeof(double));
    ckpt.tensors.emplace(t.at("name").get<std::string>(), std::move(st));
  }
  return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, const ParamList& params) {
  for (const auto& p : params) {
    auto it = ckpt.tensors.find(p.name);
    if (it == ckpt.tensors.end()) throw CheckpointError("checkpoint lacks tensor " + p.name);
    if (it->second.shape != p.tensor.shape()) {
      throw CheckpointError("checkpoint tensor " + p.name + " has shape " +
                            ad::to_string(it->second.shape) + ", model expects " +
                            ad::to_string(p.tensor.shape()));
    }
    Tensor t = p.tensor;
    std::copy(it->second.values.begin(), it->second.values.end(), t.mutable_values().begin());
  }
}

void save_classifier(const std::filesystem::path& path, const ClassifierModel& model) {
  write_checkpoint(path, "classifier", nlohmann::json(model.config()), model.parameters());
}

ClassifierModel load_classifier(const std::filesystem::path& path) {
  auto ckpt = read_checkpoint(path);
  if (ckpt.kind != "classifier") {
    throw CheckpointError(path.string() + ": holds a '" + ckpt.kind + "' model, not a classifier");
  }
  ClassifierModel model(ckpt.config.get<ClassifierConfig>());
  restore_parameters(ckpt, model.parameters());
  return model;
}

void save_mae(const std::filesystem::path& path, const MaeModel& model) {
  write_checkpoint(path, "mae", nlohmann::json(model.config()), model.parameters());
}

MaeModel load_mae(const std::filesystem::path& path) {
  auto ckpt = read_checkpoint(path);
  if (ckpt.kind != "mae") {
    throw CheckpointError(path.string() + ": holds a '" + ckpt.kind + "' model, not an MAE");
  }
  MaeModel model(ckpt.config.get<MaeConfig>());
  restore_parameters(ckpt, model.parameters());
  return model;
}

}  // namespace maeguard::models

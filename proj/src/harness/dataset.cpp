#include "maeguard/harness/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <vector>

#include "json.hpp"
#include "maeguard/models/rng.hpp"

namespace maeguard::harness {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Idx {
  std::vector<std::uint32_t> dims;
  std::vector<unsigned char> data;
};

Idx parse_idx(const fs::path& path) {
  auto bytes = read_bytes(path);
  const std::string name = path.string();
  if (bytes.empty()) throw DatasetError(name + ": empty file");
  if (bytes.size() < 4) throw DatasetError(name + ": truncated IDX header");
  if (bytes[0] != 0 || bytes[1] != 0) throw DatasetError(name + ": bad IDX magic");
  if (bytes[2] != 0x08) throw DatasetError(name + ": only unsigned-byte IDX data is supported");
  const std::size_t rank = bytes[3];
  if (rank < 1 || rank > 4) throw DatasetError(name + ": unsupported IDX rank " + std::to_string(rank));
  if (bytes.size() < 4 + 4 * rank) throw DatasetError(name + ": truncated IDX header");
  Idx idx;
  std::size_t count = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    const unsigned char* p = bytes.data() + 4 + 4 * d;
    const std::uint32_t v = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                            (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
    idx.dims.push_back(v);
    count *= v;
  }
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() - header != count) {
    throw DatasetError(name + ": header promises " + std::to_string(count) + " bytes of data, file has " +
                       std::to_string(bytes.size() - header));
  }
  idx.data.assign(bytes.begin() + static_cast<long>(header), bytes.end());
  return idx;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

unsigned char to_byte(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

models::ImageSet read_idx(const fs::path& images, const fs::path& labels) {
  const auto im = parse_idx(images);
  const auto lb = parse_idx(labels);
  if (im.dims.size() != 3 && im.dims.size() != 4)
    throw DatasetError(images.string() + ": image file must have rank 3 or 4");
  if (lb.dims.size() != 1) throw DatasetError(labels.string() + ": label file must have rank 1");
  if (im.dims[0] != lb.dims[0]) {
    throw DatasetError("image/label count mismatch: " + std::to_string(im.dims[0]) + " images, " +
                       std::to_string(lb.dims[0]) + " labels");
  }
  models::ImageSet set{im.dims[1], im.dims[2], im.dims.size() == 4 ? im.dims[3] : 1u, {}, {}};
  set.pixels.reserve(im.data.size());
  for (auto b : im.data) set.pixels.push_back(b / 255.0);
  for (auto b : lb.data) set.labels.push_back(b);
  return set;
}

void write_idx(const models::ImageSet& set, const fs::path& images, const fs::path& labels) {
  std::ofstream im(images, std::ios::binary), lb(labels, std::ios::binary);
  if (!im || !lb) throw DatasetError("cannot write IDX files next to " + images.string());
  const bool rgb = set.channels != 1;
  im.write("\0\0\x08", 3);
  im.put(static_cast<char>(rgb ? 4 : 3));
  put_u32(im, static_cast<std::uint32_t>(set.size()));
  put_u32(im, static_cast<std::uint32_t>(set.height));
  put_u32(im, static_cast<std::uint32_t>(set.width));
  if (rgb) put_u32(im, static_cast<std::uint32_t>(set.channels));
  for (double v : set.pixels) im.put(static_cast<char>(to_byte(v)));
  lb.write("\0\0\x08\x01", 4);
  put_u32(lb, static_cast<std::uint32_t>(set.labels.size()));
  for (int l : set.labels) lb.put(static_cast<char>(l));
}

models::ImageSet read_manifest(const fs::path& manifest) {
  nlohmann::json j;
  {
    std::ifstream in(manifest);
    if (!in) throw DatasetError("cannot open " + manifest.string());
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(manifest.string() + ": " + e.what());
    }
  }
  try {
    if (j.at("version").get<int>() != 1) throw DatasetError(manifest.string() + ": unsupported manifest version");
    models::ImageSet set{j.at("height").get<std::size_t>(), j.at("width").get<std::size_t>(),
                         j.at("channels").get<std::size_t>(), {}, {}};
    if (set.image_size() == 0) throw DatasetError(manifest.string() + ": zero image size");
    const auto dir = manifest.parent_path();
    for (const auto& e : j.at("images")) {
      const auto file = dir / e.at("file").get<std::string>();
      const auto bytes = read_bytes(file);
      if (bytes.size() != set.image_size()) {
        throw DatasetError(file.string() + ": expected " + std::to_string(set.image_size()) + " bytes, found " +
                           std::to_string(bytes.size()));
      }
      for (auto b : bytes) set.pixels.push_back(b / 255.0);
      set.labels.push_back(e.at("label").get<int>());
    }
    if (set.labels.empty()) throw DatasetError(manifest.string() + ": no images listed");
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(manifest.string() + ": " + e.what());
  }
}

void write_manifest(const models::ImageSet& set, const fs::path& manifest) {
  nlohmann::json j{{"version", 1}, {"height", set.height}, {"width", set.width}, {"channels", set.channels}};
  j["images"] = nlohmann::json::array();
  const auto dir = manifest.parent_path();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string name = "img" + std::to_string(i) + ".raw";
    std::ofstream out(dir / name, std::ios::binary);
    for (double v : set.image(i)) out.put(static_cast<char>(to_byte(v)));
    j["images"].push_back({{"file", name}, {"label", set.labels.at(i)}});
  }
  std::ofstream(manifest) << j.dump(2) << "\n";
}

models::ImageSet ingest_dataset(const std::string& format, const fs::path& images, const fs::path& labels) {
  if (format == "idx") return read_idx(images, labels);
  if (format == "manifest") return read_manifest(images);
  throw DatasetError("unknown dataset format '" + format + "' (expected idx or manifest)");
}

Splits split_dataset(const models::ImageSet& set, std::size_t train, std::size_t calibration,
                     std::size_t test, std::uint64_t seed) {
  if (train + calibration + test > set.size()) {
    throw DatasetError("split sizes " + std::to_string(train) + "+" + std::to_string(calibration) + "+" +
                       std::to_string(test) + " exceed the dataset size " + std::to_string(set.size()));
  }
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  auto rng = models::stream(seed, 0x5b17);
  std::shuffle(order.begin(), order.end(), rng);
  auto slice = [&](std::size_t first, std::size_t n) {
    return set.subset(std::span<const std::size_t>(order.data() + first, n));
  };
  return {slice(0, train), slice(train, calibration), slice(train + calibration, test)};
}

}  // namespace maeguard::harness

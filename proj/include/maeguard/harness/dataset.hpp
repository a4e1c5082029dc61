#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "maeguard/models/data.hpp"

namespace maeguard::harness {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// IDX files: big-endian magic 0x0000080D (D = rank), D big-endian uint32 dims,
// then unsigned bytes. Images are rank 3 (N,H,W) or rank 4 (N,H,W,C);
// labels are rank 1. Pixels are divided by 255.
models::ImageSet read_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
void write_idx(const models::ImageSet& set, const std::filesystem::path& images,
               const std::filesystem::path& labels);

// Manifest (JSON):
//   {"version": 1, "height": H, "width": W, "channels": C,
//    "images": [{"file": "img0.raw", "label": 3}, ...]}
// Each file holds H*W*C raw bytes; paths are relative to the manifest.
models::ImageSet read_manifest(const std::filesystem::path& manifest);
void write_manifest(const models::ImageSet& set, const std::filesystem::path& manifest);

// format: "idx" (labels required) or "manifest".
models::ImageSet ingest_dataset(const std::string& format, const std::filesystem::path& images,
                                const std::filesystem::path& labels = {});

struct Splits {
  models::ImageSet train;
  models::ImageSet calibration;
  models::ImageSet test;
};

// Seeded permutation, then consecutive train / calibration / test slices.
Splits split_dataset(const models::ImageSet& set, std::size_t train, std::size_t calibration,
                     std::size_t test, std::uint64_t seed);

}  // namespace maeguard::harness

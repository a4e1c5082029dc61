#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "maeguard/attacks/attacks.hpp"
#include "maeguard/models/patch.hpp"

namespace maeguard::harness {

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A run directory whose files are written once. Relative paths name artifacts.
class RunDir {
 public:
  explicit RunDir(std::filesystem::path root) : root_(std::move(root)) {}

  // Creates <output_dir>/run-NNNN with the first unused N.
  static RunDir create(const std::filesystem::path& output_dir);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path(const std::string& rel) const { return root_ / rel; }
  bool has(const std::string& rel) const { return std::filesystem::exists(path(rel)); }
  // Creates parent directories; throws if the artifact already exists.
  std::filesystem::path claim(const std::string& rel) const;
  void write_text(const std::string& rel, const std::string& content) const;
  std::string read_text(const std::string& rel) const;

  // Every regular file below the root except the checksum file and logs/.
  std::vector<std::string> artifacts() const;
  // Writes checksums.sha256 ("<hex>  <relpath>" per line, sorted by path).
  std::map<std::string, std::string> write_checksums() const;

 private:
  std::filesystem::path root_;
};

std::string sha256_hex(const std::filesystem::path& file);

// Adversarial record file:
//   "MAEGADV\0", uint32 version = 1, uint64 header length, JSON header
//   {spec, grid, examples: [{image_id, label, prediction, success, linf, l2}]},
//   then float64 clean and adv pixels per example in header order.
inline constexpr std::uint32_t kAdvFormatVersion = 1;
void write_adv_set(const std::filesystem::path& path, const std::vector<attacks::AdvExample>& set,
                   const attacks::AttackSpec& spec, const models::PatchGrid& grid);
struct AdvSetFile {
  attacks::AttackSpec spec;
  std::vector<attacks::AdvExample> examples;
};
AdvSetFile read_adv_set(const std::filesystem::path& path);

// Minimal CSV with a fixed header; numbers use shortest round-trip formatting.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}
  CsvWriter& row(const std::vector<std::string>& cells);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};
std::string fmt(double v);
std::string fmt(std::size_t v);
std::string fmt(int v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t column(const std::string& name) const;
  std::vector<double> numbers(const std::string& name) const;
};
CsvTable parse_csv(const std::string& text);

}  // namespace maeguard::harness

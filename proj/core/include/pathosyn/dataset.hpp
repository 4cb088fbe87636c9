#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pathosyn/toyworld.hpp"

namespace pathosyn {

inline constexpr int kDatasetFormatVersion = 1;

enum class Split { train, val, test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Subject-level split, a pure function of (seed, sorted id list): val and
/// test each receive round(n * ratio) subjects, train the rest.
[[nodiscard]] std::map<std::string, Split> assign_splits(std::vector<std::string> ids,
                                                         std::uint64_t seed, SplitRatios ratios = {});

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  int resolution = 0;
  std::uint64_t split_seed = 0;
  std::vector<std::string> subjects;
  std::map<std::string, Split> splits;
  /// file name -> lowercase hex SHA-256
  std::map<std::string, std::string> checksums;

  [[nodiscard]] std::vector<std::string> ids_in(Split s) const;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SubjectRecord> records;

  [[nodiscard]] const SubjectRecord& subject(const std::string& id) const;
  [[nodiscard]] std::vector<const SubjectRecord*> split(Split s) const;
};

/// Writes <dir>/manifest.json plus per subject <id>.x.f32, <id>.truthsub.f32,
/// <id>.truthdev.f32, <id>.xph.f32 (little-endian float32, row-major) and
/// <id>.m.u8 (one byte per site).
DatasetManifest write_dataset(const std::vector<SubjectRecord>& records,
                              const std::filesystem::path& dir, std::uint64_t split_seed,
                              SplitRatios ratios = {});

/// Reads and verifies every checksum. Throws DataError naming the offending file.
[[nodiscard]] Dataset read_dataset(const std::filesystem::path& dir);
[[nodiscard]] DatasetManifest read_manifest(const std::filesystem::path& dir);

/// Raw little-endian array I/O shared with the synthesis outputs.
void write_f32(const std::filesystem::path& path, std::span<const float> values);
[[nodiscard]] std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected);
void write_u8(const std::filesystem::path& path, std::span<const std::uint8_t> values);
[[nodiscard]] std::vector<std::uint8_t> read_u8(const std::filesystem::path& path, std::size_t expected);

}  // namespace pathosyn

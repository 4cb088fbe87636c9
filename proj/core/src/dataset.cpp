#include "pathosyn/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "pathosyn/hashing.hpp"

namespace pathosyn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

std::map<std::string, Split> assign_splits(std::vector<std::string> ids, std::uint64_t seed,
                                           SplitRatios ratios) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw InvalidArgument("assign_splits: ratios must be nonnegative and sum to 1");
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw InvalidArgument("assign_splits: duplicate subject id");
  }
  RngStream rng(RngKey(seed).fold("splits"));
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  const auto n = static_cast<double>(ids.size());
  const auto n_val = static_cast<std::size_t>(std::lround(n * ratios.val));
  const auto n_test = std::min(ids.size() - n_val, static_cast<std::size_t>(std::lround(n * ratios.test)));
  std::map<std::string, Split> out;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    out[ids[k]] = k < n_val ? Split::val : (k < n_val + n_test ? Split::test : Split::train);
  }
  return out;
}

std::vector<std::string> DatasetManifest::ids_in(Split s) const {
  std::vector<std::string> out;
  for (const auto& id : subjects) {
    auto it = splits.find(id);
    if (it != splits.end() && it->second == s) out.push_back(id);
  }
  return out;
}

const SubjectRecord& Dataset::subject(const std::string& id) const {
  for (const auto& r : records) {
    if (r.id == id) return r;
  }
  throw DataError("unknown subject '" + id + "'");
}

std::vector<const SubjectRecord*> Dataset::split(Split s) const {
  std::vector<const SubjectRecord*> out;
  for (const auto& r : records) {
    if (manifest.splits.at(r.id) == s) out.push_back(&r);
  }
  return out;
}

void write_f32(const fs::path& path, std::span<const float> values) {
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t k = 0; k < values.size(); ++k) {
    auto bits = std::bit_cast<std::uint32_t>(values[k]);
    for (int b = 0; b < 4; ++b) bytes[k * 4 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<float> read_f32(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != expected * 4) {
    throw DataError("corrupt file " + path.string() + ": expected " + std::to_string(expected * 4) +
                    " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<float> out(expected);
  for (std::size_t k = 0; k < expected; ++k) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[k * 4 + static_cast<std::size_t>(b)]) << (8 * b);
    out[k] = std::bit_cast<float>(bits);
  }
  return out;
}

void write_u8(const fs::path& path, std::span<const std::uint8_t> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<std::uint8_t> read_u8(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != expected) {
    throw DataError("corrupt file " + path.string() + ": expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(bytes.size()));
  }
  return bytes;
}

namespace {

struct SubjectFiles {
  std::string x, truth_sub, truth_dev, x_ph, mask;
};

SubjectFiles files_for(const std::string& id) {
  return {id + ".x.f32", id + ".truthsub.f32", id + ".truthdev.f32", id + ".xph.f32", id + ".m.u8"};
}

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format_version"] = m.format_version;
  j["resolution"] = m.resolution;
  j["split_seed"] = m.split_seed;
  j["subjects"] = m.subjects;
  json splits = json::object();
  for (const auto& [id, s] : m.splits) splits[id] = to_string(s);
  j["splits"] = splits;
  j["checksums"] = m.checksums;
  return j;
}

}  // namespace

DatasetManifest write_dataset(const std::vector<SubjectRecord>& records, const fs::path& dir,
                              std::uint64_t split_seed, SplitRatios ratios) {
  fs::create_directories(dir);
  DatasetManifest manifest;
  manifest.split_seed = split_seed;
  manifest.resolution = records.empty() ? 0 : records.front().x.height();
  for (const auto& r : records) {
    if (r.x.height() != manifest.resolution || r.x.width() != manifest.resolution) {
      throw InvalidArgument("write_dataset: subjects must share one square resolution");
    }
    manifest.subjects.push_back(r.id);
  }
  manifest.splits = assign_splits(manifest.subjects, split_seed, ratios);
  for (const auto& r : records) {
    const SubjectFiles f = files_for(r.id);
    write_f32(dir / f.x, r.x.values());
    write_f32(dir / f.truth_sub, r.truth_sub.values());
    write_f32(dir / f.truth_dev, r.truth_dev.values());
    write_f32(dir / f.x_ph, r.x_ph.values());
    write_u8(dir / f.mask, r.mask.bits());
    for (const std::string& name : {f.x, f.truth_sub, f.truth_dev, f.x_ph, f.mask}) {
      manifest.checksums[name] = sha256_file(dir / name);
    }
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  return manifest;
}

DatasetManifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DataError("missing file " + path.string());
  json j;
  try {
    j = json::parse(in);
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion) {
      throw DataError("unsupported dataset format_version " + std::to_string(m.format_version));
    }
    m.resolution = j.at("resolution").get<int>();
    m.split_seed = j.at("split_seed").get<std::uint64_t>();
    m.subjects = j.at("subjects").get<std::vector<std::string>>();
    for (const auto& [id, s] : j.at("splits").items()) m.splits[id] = parse_split(s.get<std::string>());
    m.checksums = j.at("checksums").get<std::map<std::string, std::string>>();
    for (const auto& id : m.subjects) {
      if (!m.splits.contains(id)) throw DataError("manifest: subject " + id + " has no split");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError("corrupt manifest " + path.string() + ": " + e.what());
  }
}

Dataset read_dataset(const fs::path& dir) {
  Dataset ds;
  ds.manifest = read_manifest(dir);
  const int n = ds.manifest.resolution;
  const Shape shape{n, n};
  for (const auto& id : ds.manifest.subjects) {
    const SubjectFiles f = files_for(id);
    for (const std::string& name : {f.x, f.truth_sub, f.truth_dev, f.x_ph, f.mask}) {
      const fs::path p = dir / name;
      if (!fs::exists(p)) throw DataError("subject " + id + ": missing file " + p.string());
      auto it = ds.manifest.checksums.find(name);
      if (it == ds.manifest.checksums.end()) throw DataError("manifest has no checksum for " + name);
      if (sha256_file(p) != it->second) {
        throw DataError("subject " + id + ": checksum mismatch for " + p.string());
      }
    }
    SubjectRecord r;
    r.id = id;
    r.x = ImageGrid<float>(shape, read_f32(dir / f.x, shape.size()));
    r.truth_sub = ImageGrid<float>(shape, read_f32(dir / f.truth_sub, shape.size()));
    r.truth_dev = DeviationField<float>(shape, read_f32(dir / f.truth_dev, shape.size()));
    r.x_ph = ImageGrid<float>(shape, read_f32(dir / f.x_ph, shape.size()));
    try {
      r.mask = LesionMask(shape, read_u8(dir / f.mask, shape.size()));
    } catch (const InvalidArgument& e) {
      throw DataError("subject " + id + ": corrupt mask: " + e.what());
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace pathosyn

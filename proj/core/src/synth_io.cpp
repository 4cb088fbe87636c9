#include "pathosyn/synth_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "pathosyn/dataset.hpp"
#include "pathosyn/errors.hpp"
#include "pathosyn/hashing.hpp"
#include "pathosyn/image_io.hpp"

namespace pathosyn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* kManifest = "synth_manifest.json";

std::string sample_stem(const std::string& id, int k) { return id + ".s" + std::to_string(k); }

json read_manifest_json(const fs::path& dir) {
  std::ifstream in(dir / kManifest);
  if (!in) throw DataError("synthesis directory " + dir.string() + " has no " + kManifest);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed " + (dir / kManifest).string() + ": " + e.what());
  }
}

}  // namespace

void write_synth_samples(const fs::path& dir, std::span<const SynthSample> samples, const json& provenance,
                         bool previews) {
  fs::create_directories(dir);
  json manifest = fs::exists(dir / kManifest) ? read_manifest_json(dir)
                                              : json{{"format_version", kSynthFormatVersion},
                                                     {"entries", json::array()},
                                                     {"runs", json::array()}};
  if (manifest.at("format_version").get<int>() != kSynthFormatVersion) {
    throw DataError("synthesis directory " + dir.string() + " uses an unsupported format_version");
  }
  auto& entries = manifest.at("entries");
  for (const SynthSample& s : samples) {
    if (s.x_hat.shape() != s.r_hat.shape() || s.x_hat.shape() != s.x_sub.shape() || s.x_hat.shape() != s.blend.shape()) {
      throw ShapeMismatch("write_synth_samples: fields of " + s.subject + " disagree in shape");
    }
    const std::string stem = sample_stem(s.subject, s.sample);
    write_f32(dir / (s.subject + ".xsub.f32"), s.x_sub.values());
    write_f32(dir / (s.subject + ".blend.f32"), s.blend.values());
    write_f32(dir / (stem + ".xhat.f32"), s.x_hat.values());
    write_f32(dir / (stem + ".rhat.f32"), s.r_hat.values());
    if (previews) {
      write_png_preview(dir / (s.subject + ".xsub.png"), s.x_sub);
      write_png_preview(dir / (stem + ".xhat.png"), s.x_hat);
      write_png_preview(dir / (stem + ".rhat.png"), retag<tags::Image>(s.r_hat), -1.0f, 1.0f);
    }
    json entry = {{"subject", s.subject},
                  {"sample", s.sample},
                  {"height", s.x_hat.height()},
                  {"width", s.x_hat.width()},
                  {"xhat_sha256", sha256_file(dir / (stem + ".xhat.f32"))},
                  {"rhat_sha256", sha256_file(dir / (stem + ".rhat.f32"))}};
    const auto same = std::find_if(entries.begin(), entries.end(), [&](const json& e) {
      return e.at("subject") == s.subject && e.at("sample") == s.sample;
    });
    if (same != entries.end()) {
      *same = std::move(entry);
    } else {
      entries.push_back(std::move(entry));
    }
  }
  std::sort(entries.begin(), entries.end(), [](const json& a, const json& b) {
    return std::make_pair(a.at("subject").get<std::string>(), a.at("sample").get<int>()) <
           std::make_pair(b.at("subject").get<std::string>(), b.at("sample").get<int>());
  });
  manifest.at("runs").push_back(provenance);
  std::ofstream out(dir / kManifest, std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError("cannot write " + (dir / kManifest).string());
}

std::vector<SynthSample> read_synth_dir(const fs::path& dir) {
  const json manifest = read_manifest_json(dir);
  std::vector<SynthSample> out;
  try {
    if (manifest.at("format_version").get<int>() != kSynthFormatVersion) {
      throw DataError("synthesis directory " + dir.string() + " uses an unsupported format_version");
    }
    for (const auto& e : manifest.at("entries")) {
      SynthSample s;
      s.subject = e.at("subject").get<std::string>();
      s.sample = e.at("sample").get<int>();
      const Shape shape{e.at("height").get<int>(), e.at("width").get<int>()};
      const std::string stem = sample_stem(s.subject, s.sample);
      for (const auto& [file, key] : {std::pair{stem + ".xhat.f32", "xhat_sha256"}, std::pair{stem + ".rhat.f32", "rhat_sha256"}}) {
        if (!fs::exists(dir / file)) throw DataError("synthesis file missing: " + (dir / file).string());
        if (sha256_file(dir / file) != e.at(key).get<std::string>()) {
          throw DataError("checksum mismatch: " + (dir / file).string());
        }
      }
      s.x_hat = ImageGrid<float>(shape, read_f32(dir / (stem + ".xhat.f32"), shape.size()));
      s.r_hat = DeviationField<float>(shape, read_f32(dir / (stem + ".rhat.f32"), shape.size()));
      s.x_sub = ImageGrid<float>(shape, read_f32(dir / (s.subject + ".xsub.f32"), shape.size()));
      s.blend = BlendMap<float>(shape, read_f32(dir / (s.subject + ".blend.f32"), shape.size()));
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed " + (dir / kManifest).string() + ": " + e.what());
  }
  if (out.empty()) throw DataError("synthesis directory " + dir.string() + " contains no samples");
  return out;
}

}  // namespace pathosyn

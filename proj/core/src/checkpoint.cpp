#include "pathosyn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <nlohmann/json.hpp>

#include "pathosyn/errors.hpp"
#include "pathosyn/hashing.hpp"
#include "pathosyn/run_config.hpp"

namespace pathosyn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads are little-endian");

constexpr char kMagic[8] = {'P', 'S', 'Y', 'N', 'C', 'K', 'P', 'T'};

using json = nlohmann::json;

std::string dtype_name(torch::Dtype d) {
  if (d == torch::kFloat32) return "f32";
  if (d == torch::kFloat64) return "f64";
  throw InvalidArgument("checkpoint: unsupported tensor dtype");
}

torch::Dtype parse_dtype(const std::string& s) {
  if (s == "f32") return torch::kFloat32;
  if (s == "f64") return torch::kFloat64;
  throw DataError("checkpoint: unknown tensor dtype '" + s + "'");
}

struct NamedTensor {
  std::string name;
  torch::Tensor tensor;
};

std::vector<NamedTensor> collect(const TrainingState& s, std::vector<std::int64_t>& adam_steps) {
  std::vector<NamedTensor> out;
  for (const auto& p : s.f_sub->named_parameters(true)) out.push_back({"f_sub." + p.key(), p.value()});
  for (const auto& p : s.eps->named_parameters(true)) out.push_back({"eps." + p.key(), p.value()});
  const auto params = s.parameters();
  const auto& states = s.optimizer->state();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto it = states.find(params[i].unsafeGetTensorImpl());
    if (it == states.end()) {
      adam_steps.push_back(-1);
      continue;
    }
    const auto& st = static_cast<const torch::optim::AdamWParamState&>(*it->second);
    adam_steps.push_back(st.step());
    out.push_back({"adamw." + std::to_string(i) + ".exp_avg", st.exp_avg()});
    out.push_back({"adamw." + std::to_string(i) + ".exp_avg_sq", st.exp_avg_sq()});
  }
  return out;
}

json schedule_json(const ScheduleParams& p) {
  return {{"steps", p.steps}, {"beta_start", p.beta_start}, {"beta_end", p.beta_end},
          {"sigma", to_string(p.sigma_kind)}};
}

}  // namespace

std::string config_digest(const TrainConfig& config) { return sha256_hex(to_json(config).dump()); }

void save_checkpoint(const TrainingState& state, const std::filesystem::path& path) {
  std::vector<std::int64_t> adam_steps;
  const auto tensors = collect(state, adam_steps);

  json table = json::array();
  std::vector<torch::Tensor> payload;
  std::uint64_t offset = 0;
  for (const auto& nt : tensors) {
    auto t = nt.tensor.detach().to(torch::kCPU).contiguous();
    const std::uint64_t nbytes = static_cast<std::uint64_t>(t.numel()) * t.element_size();
    table.push_back({{"name", nt.name},
                     {"dtype", dtype_name(t.scalar_type())},
                     {"shape", t.sizes().vec()},
                     {"offset", offset},
                     {"nbytes", nbytes}});
    offset += nbytes;
    payload.push_back(std::move(t));
  }
  json header = {
      {"format_version", kCheckpointFormatVersion},
      {"config", to_json(state.config)},
      {"config_digest", config_digest(state.config)},
      {"step", state.step},
      {"skipped_subjects", state.skipped_subjects},
      {"best_validation", std::isfinite(state.best_validation) ? json(state.best_validation) : json(nullptr)},
      {"rng", {{"seed", state.config.seed}}},
      {"schedule", schedule_json(state.config.schedule)},
      {"adamw_steps", adam_steps},
      {"tensors", table},
  };
  const std::string text = header.dump();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_checkpoint: cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint32_t version = kCheckpointFormatVersion;
    const std::uint64_t header_bytes = text.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&header_bytes), sizeof header_bytes);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : payload) {
      out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
    }
    if (!out) throw DataError("save_checkpoint: write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainingState load_checkpoint(const std::filesystem::path& path, const TrainConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t prefix = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < prefix || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("load_checkpoint: " + path.string() + " is not a pathosyn checkpoint");
  }
  std::uint32_t version = 0;
  std::uint64_t header_bytes = 0;
  std::memcpy(&version, bytes.data() + sizeof kMagic, sizeof version);
  std::memcpy(&header_bytes, bytes.data() + sizeof kMagic + sizeof version, sizeof header_bytes);
  if (version != kCheckpointFormatVersion) {
    throw DataError("load_checkpoint: unsupported format_version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointFormatVersion) + ")");
  }
  if (bytes.size() < prefix + header_bytes) throw DataError("load_checkpoint: truncated header in " + path.string());

  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(prefix),
                         bytes.begin() + static_cast<std::ptrdiff_t>(prefix + header_bytes));
  } catch (const json::exception& e) {
    throw DataError("load_checkpoint: malformed header in " + path.string() + ": " + e.what());
  }
  const char* payload = bytes.data() + prefix + header_bytes;
  const std::size_t payload_bytes = bytes.size() - prefix - header_bytes;

  try {
    const TrainConfig config = train_config_from_json(header.at("config"));
    const std::string digest = header.at("config_digest").get<std::string>();
    if (digest != config_digest(config)) throw DataError("load_checkpoint: config digest does not match stored config");
    if (expected != nullptr && config_digest(*expected) != digest) {
      throw ConfigError("load_checkpoint: checkpoint was written under a different training config (digest " +
                        digest.substr(0, 12) + ")");
    }

    std::map<std::string, torch::Tensor> stored;
    for (const auto& e : header.at("tensors")) {
      const auto offset = e.at("offset").get<std::uint64_t>();
      const auto nbytes = e.at("nbytes").get<std::uint64_t>();
      if (offset + nbytes > payload_bytes) throw DataError("load_checkpoint: tensor payload truncated");
      const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
      auto t = torch::empty(shape, torch::TensorOptions().dtype(parse_dtype(e.at("dtype").get<std::string>())));
      if (static_cast<std::uint64_t>(t.numel() * t.element_size()) != nbytes) {
        throw DataError("load_checkpoint: size mismatch for tensor " + e.at("name").get<std::string>());
      }
      std::memcpy(t.data_ptr(), payload + offset, nbytes);
      stored.emplace(e.at("name").get<std::string>(), std::move(t));
    }
    auto take = [&](const std::string& name, const torch::Tensor& like) {
      const auto it = stored.find(name);
      if (it == stored.end()) throw DataError("load_checkpoint: missing tensor " + name);
      if (it->second.sizes() != like.sizes() || it->second.scalar_type() != like.scalar_type()) {
        throw DataError("load_checkpoint: tensor " + name + " has the wrong shape or dtype");
      }
      return it->second;
    };

    TrainingState state = make_training_state(config);
    {
      torch::NoGradGuard no_grad;
      for (auto& p : state.f_sub->named_parameters(true)) p.value().copy_(take("f_sub." + p.key(), p.value()));
      for (auto& p : state.eps->named_parameters(true)) p.value().copy_(take("eps." + p.key(), p.value()));
    }
    const auto steps = header.at("adamw_steps").get<std::vector<std::int64_t>>();
    const auto params = state.parameters();
    if (steps.size() != params.size()) throw DataError("load_checkpoint: optimizer state does not match networks");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (steps[i] < 0) continue;
      auto st = std::make_unique<torch::optim::AdamWParamState>();
      st->step(steps[i]);
      st->exp_avg(take("adamw." + std::to_string(i) + ".exp_avg", params[i]).clone());
      st->exp_avg_sq(take("adamw." + std::to_string(i) + ".exp_avg_sq", params[i]).clone());
      state.optimizer->state()[params[i].unsafeGetTensorImpl()] = std::move(st);
    }
    state.step = header.at("step").get<std::int64_t>();
    state.skipped_subjects = header.at("skipped_subjects").get<std::int64_t>();
    const auto& best = header.at("best_validation");
    state.best_validation = best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>();
    return state;
  } catch (const json::exception& e) {
    throw DataError("load_checkpoint: malformed header in " + path.string() + ": " + e.what());
  }
}

}  // namespace pathosyn

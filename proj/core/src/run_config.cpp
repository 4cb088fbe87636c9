#include "pathosyn/run_config.hpp"

#include <fstream>
#include <set>

#include "pathosyn/errors.hpp"

namespace pathosyn {

using json = nlohmann::json;

namespace {

/// Reads keys out of one JSON object and rejects whatever is left over.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + where() + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: bad value for '" + child_path(key) + "'");
    }
  }

  void get(const char* key, Interval& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError("config: '" + child_path(key) + "' must be [lo, hi]");
    }
    out = {v[0].get<double>(), v[1].get<double>()};
  }

  /// Calls fn(sub_object_json, sub_path) when key is present.
  template <class Fn>
  void child(const char* key, Fn&& fn) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    fn(j_.at(key), child_path(key));
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError("config: unknown key '" + child_path(item.key()) + "'");
    }
  }

 private:
  [[nodiscard]] std::string where() const { return path_.empty() ? "<root>" : path_; }
  [[nodiscard]] std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json interval(const Interval& i) { return json::array({i.lo, i.hi}); }

template <class Enum, class Parse>
void get_enum(ObjectReader& r, const char* key, Enum& out, Parse parse) {
  std::string s;
  bool present = false;
  r.child(key, [&](const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError("config: '" + path + "' must be a string");
    s = v.get<std::string>();
    present = true;
  });
  if (present) out = parse(s);
}

void read_train(const json& j, const std::string& path, TrainConfig& c) {
  ObjectReader r(j, path);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("learning_rate", c.learning_rate);
  r.get("weight_decay", c.weight_decay);
  r.get("grad_clip", c.grad_clip);
  r.get("seed", c.seed);
  get_enum(r, "precision", c.precision, parse_precision);
  r.get("per_batch_t", c.per_batch_t);
  r.get("blend_sigma", c.blend_sigma);
  r.get("saturation_delta", c.saturation_delta);
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("validate_every", c.validate_every);
  r.get("validation_subjects", c.validation_subjects);
  r.get("validation_ddim_steps", c.validation_ddim_steps);
  r.child("loss_weights", [&](const json& v, const std::string& p) {
    ObjectReader w(v, p);
    w.get("lambda_diff", c.loss_weights.lambda_diff);
    w.get("lambda_dev", c.loss_weights.lambda_dev);
    w.get("lambda_syn", c.loss_weights.lambda_syn);
    w.get("lambda_pat", c.loss_weights.lambda_pat);
    w.get("lambda_ring", c.loss_weights.lambda_ring);
    w.get("lambda_leak", c.loss_weights.lambda_leak);
    w.finish();
  });
  r.child("substrate_weights", [&](const json& v, const std::string& p) {
    ObjectReader w(v, p);
    w.get("lambda_out", c.substrate_weights.lambda_out);
    w.get("lambda_in", c.substrate_weights.lambda_in);
    w.finish();
  });
  r.child("schedule", [&](const json& v, const std::string& p) {
    ObjectReader s(v, p);
    s.get("steps", c.schedule.steps);
    s.get("beta_start", c.schedule.beta_start);
    s.get("beta_end", c.schedule.beta_end);
    get_enum(s, "sigma", c.schedule.sigma_kind, [](const std::string& x) {
      try {
        return parse_sigma_kind(x);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    });
    s.finish();
  });
  r.child("substrate_net", [&](const json& v, const std::string& p) {
    ObjectReader s(v, p);
    s.get("base_width", c.substrate_net.base_width);
    s.get("depth", c.substrate_net.depth);
    s.get("resolution", c.substrate_net.resolution);
    get_enum(s, "norm", c.substrate_net.norm, parse_norm_kind);
    s.finish();
  });
  r.child("noise_net", [&](const json& v, const std::string& p) {
    ObjectReader s(v, p);
    s.get("base_width", c.noise_net.base_width);
    s.get("time_embed_dim", c.noise_net.time_embed_dim);
    s.get("attention_resolution", c.noise_net.attention_resolution);
    s.get("resolution", c.noise_net.resolution);
    s.get("attention", c.noise_net.attention);
    get_enum(s, "norm", c.noise_net.norm, parse_norm_kind);
    s.finish();
  });
  r.finish();
}

void read_sampler(const json& j, const std::string& path, SamplerConfig& c) {
  ObjectReader r(j, path);
  get_enum(r, "kind", c.kind, [](const std::string& x) {
    try {
      return parse_sampler_kind(x);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  });
  r.get("ddim_steps", c.ddim_steps);
  r.get("ddim_eta", c.ddim_eta);
  r.get("seed", c.seed);
  r.finish();
}

void read_toy(const json& j, const std::string& path, ToyParams& p) {
  if (j.is_object() && j.contains("resolution") && j.at("resolution").is_number_integer()) {
    p = ToyParams::for_resolution(j.at("resolution").get<int>());
  }
  ObjectReader r(j, path);
  r.get("resolution", p.resolution);
  r.get("head_semi_major", p.head_semi_major);
  r.get("head_semi_minor", p.head_semi_minor);
  r.get("skull_thickness", p.skull_thickness);
  r.get("ventricle_semi_major", p.ventricle_semi_major);
  r.get("ventricle_semi_minor", p.ventricle_semi_minor);
  r.get("skull_intensity", p.skull_intensity);
  r.get("brain_intensity", p.brain_intensity);
  r.get("ventricle_intensity", p.ventricle_intensity);
  r.get("bias_amplitude", p.bias_amplitude);
  r.get("anatomy_smoothing", p.anatomy_smoothing);
  r.get("min_lesions", p.min_lesions);
  r.get("max_lesions", p.max_lesions);
  r.get("lesion_radius", p.lesion_radius);
  r.get("amplitude", p.amplitude);
  r.get("negative_fraction", p.negative_fraction);
  r.get("texture_strength", p.texture_strength);
  r.get("texture_length", p.texture_length);
  r.get("noise_std", p.noise_std);
  r.finish();
}

template <class Fn>
auto as_config_error(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

json to_json(const TrainConfig& c) {
  const auto& lw = c.loss_weights;
  return {
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"weight_decay", c.weight_decay},
      {"grad_clip", c.grad_clip},
      {"seed", c.seed},
      {"precision", to_string(c.precision)},
      {"per_batch_t", c.per_batch_t},
      {"blend_sigma", c.blend_sigma},
      {"saturation_delta", c.saturation_delta},
      {"checkpoint_every", c.checkpoint_every},
      {"validate_every", c.validate_every},
      {"validation_subjects", c.validation_subjects},
      {"validation_ddim_steps", c.validation_ddim_steps},
      {"loss_weights",
       {{"lambda_diff", lw.lambda_diff},
        {"lambda_dev", lw.lambda_dev},
        {"lambda_syn", lw.lambda_syn},
        {"lambda_pat", lw.lambda_pat},
        {"lambda_ring", lw.lambda_ring},
        {"lambda_leak", lw.lambda_leak}}},
      {"substrate_weights",
       {{"lambda_out", c.substrate_weights.lambda_out}, {"lambda_in", c.substrate_weights.lambda_in}}},
      {"schedule",
       {{"steps", c.schedule.steps},
        {"beta_start", c.schedule.beta_start},
        {"beta_end", c.schedule.beta_end},
        {"sigma", to_string(c.schedule.sigma_kind)}}},
      {"substrate_net",
       {{"base_width", c.substrate_net.base_width},
        {"depth", c.substrate_net.depth},
        {"resolution", c.substrate_net.resolution},
        {"norm", to_string(c.substrate_net.norm)}}},
      {"noise_net",
       {{"base_width", c.noise_net.base_width},
        {"time_embed_dim", c.noise_net.time_embed_dim},
        {"attention_resolution", c.noise_net.attention_resolution},
        {"resolution", c.noise_net.resolution},
        {"attention", c.noise_net.attention},
        {"norm", to_string(c.noise_net.norm)}}},
  };
}

json to_json(const SamplerConfig& c) {
  return {{"kind", to_string(c.kind)}, {"ddim_steps", c.ddim_steps}, {"ddim_eta", c.ddim_eta}, {"seed", c.seed}};
}

json to_json(const ToyParams& p) {
  return {
      {"resolution", p.resolution},
      {"head_semi_major", interval(p.head_semi_major)},
      {"head_semi_minor", interval(p.head_semi_minor)},
      {"skull_thickness", p.skull_thickness},
      {"ventricle_semi_major", interval(p.ventricle_semi_major)},
      {"ventricle_semi_minor", interval(p.ventricle_semi_minor)},
      {"skull_intensity", interval(p.skull_intensity)},
      {"brain_intensity", interval(p.brain_intensity)},
      {"ventricle_intensity", interval(p.ventricle_intensity)},
      {"bias_amplitude", p.bias_amplitude},
      {"anatomy_smoothing", p.anatomy_smoothing},
      {"min_lesions", p.min_lesions},
      {"max_lesions", p.max_lesions},
      {"lesion_radius", interval(p.lesion_radius)},
      {"amplitude", interval(p.amplitude)},
      {"negative_fraction", p.negative_fraction},
      {"texture_strength", p.texture_strength},
      {"texture_length", p.texture_length},
      {"noise_std", p.noise_std},
  };
}

json to_json(const RunConfig& c) {
  return {{"train", to_json(c.train)}, {"sampler", to_json(c.sampler)}, {"toy", to_json(c.toy)}};
}

TrainConfig train_config_from_json(const json& j) {
  return as_config_error([&] {
    TrainConfig c;
    read_train(j, "train", c);
    c.validate();
    return c;
  });
}

SamplerConfig sampler_config_from_json(const json& j) {
  return as_config_error([&] {
    SamplerConfig c;
    read_sampler(j, "sampler", c);
    return c;
  });
}

ToyParams toy_params_from_json(const json& j) {
  return as_config_error([&] {
    ToyParams p;
    read_toy(j, "toy", p);
    p.validate();
    return p;
  });
}

RunConfig run_config_from_json(const json& j) {
  return as_config_error([&] {
    RunConfig c;
    ObjectReader r(j, "");
    r.child("train", [&](const json& v, const std::string& p) { read_train(v, p, c.train); });
    r.child("sampler", [&](const json& v, const std::string& p) { read_sampler(v, p, c.sampler); });
    r.child("toy", [&](const json& v, const std::string& p) { read_toy(v, p, c.toy); });
    r.finish();
    c.train.validate();
    c.sampler.validate(c.train.schedule.steps);
    c.toy.validate();
    return c;
  });
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace pathosyn

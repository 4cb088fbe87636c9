// pathosyn: toy data generation, joint training, synthesis and evaluation.
//
// Exit codes: 0 success, 2 usage / configuration error, 3 data error,
// 4 numerical failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pathosyn/checkpoint.hpp"
#include "pathosyn/dataset.hpp"
#include "pathosyn/errors.hpp"
#include "pathosyn/evaluation.hpp"
#include "pathosyn/run_config.hpp"
#include "pathosyn/synthesis.hpp"
#include "pathosyn/trainer.hpp"

#ifndef PATHOSYN_VERSION
#define PATHOSYN_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace pathosyn;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

/// PATHOSYN_LOG_LEVEL: quiet, info (default) or debug.
int log_level() {
  static const int level = [] {
    const char* v = std::getenv("PATHOSYN_LOG_LEVEL");
    const std::string s = v ? v : "info";
    if (s == "quiet") return 0;
    if (s == "debug") return 2;
    return 1;
  }();
  return level;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << '\n';
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

bool non_empty_dir(const fs::path& p) { return fs::exists(p) && !fs::is_empty(p); }

struct GenDataArgs {
  fs::path out;
  int subjects = 0;
  int resolution = 64;
  std::uint64_t seed = 0;
  double lesion_free = 0.0;
  fs::path config;
  bool force = false;
};

int gen_data(const GenDataArgs& a) {
  if (non_empty_dir(a.out) && !a.force) {
    throw DataError("output directory " + a.out.string() + " is not empty (use --force to overwrite)");
  }
  ToyParams params = ToyParams::for_resolution(a.resolution);
  if (!a.config.empty()) {
    const RunConfig rc = load_run_config(a.config);
    params = rc.toy;
    if (params.resolution != a.resolution) {
      throw ConfigError("toy.resolution " + std::to_string(params.resolution) + " disagrees with --resolution " +
                        std::to_string(a.resolution));
    }
  }
  if (a.subjects < 0) throw ConfigError("--subjects must be nonnegative");
  if (a.subjects == 0) warn("generating an empty dataset");
  const auto records = generate_corpus(params, a.subjects, a.seed, a.lesion_free);
  const DatasetManifest m = write_dataset(records, a.out, a.seed);
  std::cout << "subjects " << m.subjects.size() << ": train " << m.ids_in(Split::train).size() << ", val "
            << m.ids_in(Split::val).size() << ", test " << m.ids_in(Split::test).size() << '\n';
  return kOk;
}

struct TrainArgs {
  fs::path data;
  fs::path config;
  fs::path out;
  fs::path resume;
  std::int64_t max_steps = -1;
};

int train_cmd(const TrainArgs& a) {
  const RunConfig rc = load_run_config(a.config);
  const Dataset dataset = read_dataset(a.data);
  fs::create_directories(a.out);
  RunConfig resolved = rc;
  resolved.train.substrate_net.resolution = dataset.manifest.resolution;
  resolved.train.noise_net.resolution = dataset.manifest.resolution;
  json resolved_json = to_json(resolved);
  resolved_json["pathosyn_version"] = PATHOSYN_VERSION;
  write_text(a.out / "config.resolved.json", resolved_json.dump(2) + "\n");

  TrainOptions opts;
  opts.out_dir = a.out;
  opts.resume = a.resume;
  opts.max_steps = a.max_steps;
  int last_epoch = -1;
  double epoch_diff = 0.0;
  int epoch_rows = 0;
  opts.on_step = [&](const MetricsRow& row) {
    if (row.epoch != last_epoch) {
      if (epoch_rows > 0) info("epoch " + std::to_string(last_epoch) + " mean l_diff " + std::to_string(epoch_diff / epoch_rows));
      last_epoch = row.epoch;
      epoch_diff = 0.0;
      epoch_rows = 0;
    }
    epoch_diff += row.losses.l_diff;
    ++epoch_rows;
    if (log_level() >= 2) info(format_metrics_row(row));
  };
  const TrainResult result = train(rc.train, dataset, opts);
  if (epoch_rows > 0) info("epoch " + std::to_string(last_epoch) + " mean l_diff " + std::to_string(epoch_diff / epoch_rows));
  if (result.state.skipped_subjects > 0) {
    warn(std::to_string(result.state.skipped_subjects) + " lesion-free subjects skipped");
  }
  std::cout << "trained " << result.state.step << " steps; checkpoint " << (a.out / "last.ckpt").string() << '\n';
  return kOk;
}

struct SynthArgs {
  fs::path data;
  fs::path ckpt;
  std::vector<std::string> subjects;
  std::string split;
  int samples = 1;
  std::string sampler = "ddim";
  int steps = 50;
  double eta = 0.0;
  std::uint64_t seed = 0;
  fs::path out;
  bool no_preview = false;
};

int synthesize_cmd(const SynthArgs& a) {
  const Dataset dataset = read_dataset(a.data);
  TrainingState state = load_checkpoint(a.ckpt);
  SamplerConfig cfg;
  cfg.kind = parse_sampler_kind(a.sampler);
  cfg.ddim_steps = a.steps;
  cfg.ddim_eta = a.eta;
  cfg.seed = a.seed;
  try {
    cfg.validate(state.schedule.steps());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }

  std::vector<const SubjectRecord*> subjects;
  for (const auto& id : a.subjects) {
    if (!dataset.manifest.splits.contains(id)) throw DataError("unknown subject " + id);
    subjects.push_back(&dataset.subject(id));
  }
  if (!a.split.empty()) {
    for (const SubjectRecord* r : dataset.split(parse_split(a.split))) {
      if (!r->mask.empty()) subjects.push_back(r);
    }
  }
  if (subjects.empty()) throw ConfigError("nothing to synthesize: give --subject or --split");
  for (const SubjectRecord* r : subjects) {
    if (r->mask.empty()) throw DataError("subject " + r->id + ": empty mask");
  }
  const auto samples = synthesize_batch(state, subjects, cfg, a.samples);
  const json provenance = {{"checkpoint", fs::absolute(a.ckpt).string()},
                           {"checkpoint_step", state.step},
                           {"config_digest", config_digest(state.config)},
                           {"sampler", to_json(cfg)},
                           {"samples", a.samples},
                           {"pathosyn_version", PATHOSYN_VERSION}};
  write_synth_samples(a.out, samples, provenance, !a.no_preview);
  std::cout << "wrote " << samples.size() << " samples for " << subjects.size() << " subject(s) to " << a.out.string()
            << '\n';
  return kOk;
}

struct EvalArgs {
  fs::path data;
  fs::path synth;
  fs::path out;
  std::string encoder = "builtin";
  std::uint64_t seed = 0;
  int bootstrap = 1000;
  int margin = 4;
  int bins = 16;
};

int evaluate_cmd(const EvalArgs& a) {
  const Dataset dataset = read_dataset(a.data);
  const auto synth = read_synth_dir(a.synth);
  const auto encoder = make_encoder(a.encoder);
  EvalOptions opts;
  opts.seed = a.seed;
  opts.bootstrap_n = a.bootstrap;
  opts.patch_margin = a.margin;
  opts.mi_bins = a.bins;
  const EvaluationReport report = evaluate_synthesis(dataset, synth, *encoder, opts);
  json j = to_json(report);
  j["bootstrap_seed"] = a.seed;
  const fs::path dir = a.out.has_parent_path() ? a.out.parent_path() : fs::path(".");
  fs::create_directories(dir);
  write_text(a.out, j.dump(2) + "\n");
  write_text(dir / "ecdf.csv", ecdf_csv(report.ecdf));
  write_text(dir / "roc.csv", roc_csv(report.roc));
  const auto& auc = report.metrics.at("discriminability_auc");
  std::cout << "discriminability AUC " << auc.mean << " [" << auc.ci->first << ", " << auc.ci->second << "]\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PathoSyn deviation-space lesion synthesis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PATHOSYN_VERSION);

  GenDataArgs g;
  auto* gen = app.add_subcommand("gen-data", "Generate a procedural toy dataset");
  gen->add_option("--out", g.out, "Output dataset directory")->required();
  gen->add_option("--subjects", g.subjects, "Number of subjects")->required();
  gen->add_option("--resolution", g.resolution, "Grid side in pixels");
  gen->add_option("--seed", g.seed, "Generator and split seed");
  gen->add_option("--lesion-free-frac", g.lesion_free, "Fraction of subjects without a lesion")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--config", g.config, "Run config file (uses its toy section)")->check(CLI::ExistingFile);
  gen->add_flag("--force", g.force, "Write into a non-empty directory");

  TrainArgs t;
  auto* tr = app.add_subcommand("train", "Jointly train f_sub and eps_theta");
  tr->add_option("--data", t.data, "Dataset directory")->required();
  tr->add_option("--config", t.config, "Run config file")->required();
  tr->add_option("--out", t.out, "Output directory")->required();
  tr->add_option("--resume", t.resume, "Resume from checkpoint")->check(CLI::ExistingFile);
  tr->add_option("--max-steps", t.max_steps, "Stop after this many steps");

  SynthArgs s;
  auto* sy = app.add_subcommand("synthesize", "Sample deviations and recompose images");
  sy->add_option("--data", s.data, "Dataset directory")->required();
  sy->add_option("--ckpt", s.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  sy->add_option("--subject", s.subjects, "Subject id (repeatable)");
  sy->add_option("--split", s.split, "Synthesize every lesioned subject of a split")
      ->check(CLI::IsMember({"train", "val", "test"}));
  sy->add_option("--samples", s.samples, "Samples per subject")->check(CLI::PositiveNumber);
  sy->add_option("--sampler", s.sampler, "ancestral or ddim")->check(CLI::IsMember({"ancestral", "ddim"}));
  sy->add_option("--steps", s.steps, "DDIM steps")->check(CLI::PositiveNumber);
  sy->add_option("--eta", s.eta, "DDIM eta")->check(CLI::Range(0.0, 1.0));
  sy->add_option("--seed", s.seed, "Sampling seed");
  sy->add_option("--out", s.out, "Output directory")->required();
  sy->add_flag("--no-preview", s.no_preview, "Skip PNG previews");

  EvalArgs e;
  auto* ev = app.add_subcommand("evaluate", "Evaluate synthesized samples against held-out test subjects");
  ev->add_option("--data", e.data, "Dataset directory")->required();
  ev->add_option("--synth", e.synth, "Synthesis directory")->required();
  ev->add_option("--out", e.out, "Report JSON path")->required();
  ev->add_option("--encoder", e.encoder, "builtin or external:PATH");
  ev->add_option("--seed", e.seed, "Bootstrap / fold seed");
  ev->add_option("--bootstrap", e.bootstrap, "Bootstrap resamples")->check(CLI::PositiveNumber);
  ev->add_option("--margin", e.margin, "Lesion patch margin in pixels")->check(CLI::NonNegativeNumber);
  ev->add_option("--bins", e.bins, "Mutual information bins")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return gen_data(g);
    if (*tr) return train_cmd(t);
    if (*sy) return synthesize_cmd(s);
    if (*ev) return evaluate_cmd(e);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const NumericalError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kNumerical;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  }
  return kUsage;
}

#include "pathosyn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "pathosyn/checkpoint.hpp"
#include "pathosyn/errors.hpp"
#include "pathosyn/lattice.hpp"
#include "pathosyn/sampler.hpp"
#include "pathosyn/tensor_bridge.hpp"

namespace pathosyn {

std::string to_string(Precision p) { return p == Precision::f64 ? "f64" : "f32"; }

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + s + "' (expected f32 or f64)");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be nonnegative");
  if (batch_size <= 0) throw ConfigError("train.batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be nonnegative");
  if (!(grad_clip > 0.0)) throw ConfigError("train.grad_clip must be positive");
  if (!(blend_sigma > 0.0)) throw ConfigError("train.blend_sigma must be positive");
  if (!(saturation_delta > 0.0)) throw ConfigError("train.saturation_delta must be positive");
  if (checkpoint_every < 0 || validate_every < 0 || validation_subjects < 0) {
    throw ConfigError("train: checkpoint_every, validate_every and validation_subjects must be nonnegative");
  }
  if (validation_ddim_steps <= 0 || validation_ddim_steps > schedule.steps) {
    throw ConfigError("train.validation_ddim_steps must be in [1, schedule.steps]");
  }
  loss_weights.validate();
  substrate_weights.validate();
  substrate_net.validate();
  noise_net.validate();
  if (substrate_net.resolution != noise_net.resolution) {
    throw ConfigError("train: substrate and noise networks disagree on resolution");
  }
  (void)linear_schedule(schedule);
}

double cosine_lr(double eta, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 1) return eta;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return 0.5 * eta * (1.0 + std::cos(std::numbers::pi * frac));
}

std::vector<torch::Tensor> TrainingState::parameters() const {
  auto p = f_sub->parameters();
  const auto q = eps->parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

TrainingState make_training_state(const TrainConfig& config) {
  config.validate();
  TrainingState s{config, linear_schedule(config.schedule)};
  const RngKey init = RngKey(config.seed).fold("init");
  s.f_sub = SubstrateNet(config.substrate_net);
  s.f_sub->to(config.dtype());
  initialize_parameters(*s.f_sub, init.fold("f_sub"));
  s.eps = EpsNet(config.noise_net);
  s.eps->to(config.dtype());
  initialize_parameters(*s.eps, init.fold("eps"));
  s.optimizer = std::make_unique<torch::optim::AdamW>(
      s.parameters(), torch::optim::AdamWOptions(config.learning_rate).weight_decay(config.weight_decay));
  return s;
}

StepDraws draw_step(const TrainConfig& config, std::int64_t step, std::span<const SubjectRecord* const> batch) {
  if (batch.empty()) throw InvalidArgument("draw_step: empty batch");
  const RngKey key = RngKey(config.seed).fold("train").fold(static_cast<std::uint64_t>(step));
  const int steps = config.schedule.steps;
  const Shape shape = batch.front()->x.shape();
  StepDraws d;
  std::int64_t shared_t = 0;
  if (config.per_batch_t) shared_t = RngStream(key.fold("t")).uniform_int(1, steps);
  std::vector<double> noise(batch.size() * shape.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    require_same_shape(batch[i]->x.shape(), shape, "draw_step");
    RngStream rng(key.fold(batch[i]->id));
    d.t.push_back(config.per_batch_t ? shared_t : rng.uniform_int(1, steps));
    rng.fill_normal(std::span<double>(noise).subspan(i * shape.size(), shape.size()));
  }
  d.eps = torch::tensor(noise, torch::kFloat64)
              .reshape({static_cast<std::int64_t>(batch.size()), 1, shape.height, shape.width})
              .to(config.dtype());
  return d;
}

BatchTensors make_batch(const TrainConfig& config, std::span<const SubjectRecord* const> batch) {
  const auto dtype = config.dtype();
  std::vector<torch::Tensor> x, m, xph, s, w;
  for (const SubjectRecord* r : batch) {
    x.push_back(to_tensor(r->x, dtype));
    m.push_back(to_tensor(r->mask, dtype));
    xph.push_back(to_tensor(r->x_ph, dtype));
    const BlendMap<double> blend = smooth_mask<double>(r->mask, config.blend_sigma);
    s.push_back(to_tensor(blend, dtype));
    w.push_back(to_tensor(ring_weight(blend), dtype));
  }
  return {torch::cat(x), torch::cat(m), torch::cat(xph), torch::cat(s), torch::cat(w)};
}

LossBreakdown JointForward::breakdown() const {
  return {l_sub.item<double>(), l_diff.item<double>(), l_dev.item<double>(), l_syn.item<double>(),
          total.item<double>()};
}

JointForward joint_forward(TrainingState& state, const BatchTensors& b, const StepDraws& draws) {
  const TrainConfig& cfg = state.config;
  const auto dtype = cfg.dtype();
  const std::vector<std::int64_t> sum_dims{1, 2, 3};
  const auto n = static_cast<std::int64_t>(draws.t.size());

  std::vector<double> ab(draws.t.size());
  for (std::size_t i = 0; i < ab.size(); ++i) ab[i] = state.schedule.alpha_bar(static_cast<int>(draws.t[i]));
  const auto abar = torch::tensor(ab, torch::kFloat64).reshape({n, 1, 1, 1});
  const auto sqrt_ab = abar.sqrt().to(dtype);
  const auto sqrt_1mab = (1.0 - abar).sqrt().to(dtype);

  const auto mbar = 1.0 - b.m;
  const auto n_in = b.m.sum(sum_dims).clamp_min(1.0);
  const auto n_out = mbar.sum(sum_dims).clamp_min(1.0);

  JointForward f;
  f.x_sub = state.f_sub->forward(b.x * mbar, mbar);
  const auto& sw = cfg.substrate_weights;
  const auto l_sub_i = sw.lambda_out * ((f.x_sub - b.x) * mbar).square().sum(sum_dims) / n_out +
                       sw.lambda_in * ((f.x_sub - b.x_ph) * b.m).square().sum(sum_dims) / n_in;

  const double delta = cfg.saturation_delta;
  f.r0 = delta * torch::tanh((b.x - f.x_sub) * b.m / delta);
  f.r_t = (sqrt_ab * f.r0 + sqrt_1mab * draws.eps) * b.m;
  f.eps_hat = state.eps->forward(f.r_t, f.x_sub, b.m, torch::tensor(draws.t, torch::kInt64));
  const auto l_diff_i = ((draws.eps - f.eps_hat) * b.m).square().sum(sum_dims) / n_in;

  f.r0_hat = ((f.r_t - sqrt_1mab * f.eps_hat) / sqrt_ab) * b.m;
  const auto& lw = cfg.loss_weights;
  const auto resid = (f.r0_hat - f.r0).abs();
  const auto l_dev_i = lw.lambda_pat * (resid * b.m).sum(sum_dims) / n_in +
                       lw.lambda_ring * (resid * b.w_ring).sum(sum_dims) / b.w_ring.sum(sum_dims).clamp_min(1e-12) +
                       lw.lambda_leak * (f.r0_hat * mbar).abs().sum(sum_dims) / n_out;

  f.x_hat = f.x_sub + b.s * f.r0_hat;
  const auto l_syn_i = ((f.x_hat - b.x).abs() * b.s).sum(sum_dims) / b.s.sum(sum_dims).clamp_min(1e-12);

  f.l_sub = l_sub_i.mean();
  f.l_diff = l_diff_i.mean();
  f.l_dev = l_dev_i.mean();
  f.l_syn = l_syn_i.mean();
  f.total = f.l_sub + lw.lambda_diff * f.l_diff + lw.lambda_dev * f.l_dev + lw.lambda_syn * f.l_syn;
  return f;
}

namespace {

std::vector<const SubjectRecord*> lesioned(std::span<const SubjectRecord* const> batch, std::int64_t& skipped) {
  std::vector<const SubjectRecord*> out;
  for (const SubjectRecord* r : batch) {
    if (r->mask.empty()) {
      ++skipped;
    } else {
      out.push_back(r);
    }
  }
  return out;
}

void check_finite(const LossBreakdown& l, std::int64_t step) {
  const std::pair<const char*, double> terms[] = {
      {"l_sub", l.l_sub}, {"l_diff", l.l_diff}, {"l_dev", l.l_dev}, {"l_syn", l.l_syn}, {"total", l.total}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      throw NumericalError("train_step: non-finite " + std::string(name) + " at step " + std::to_string(step));
    }
  }
}

}  // namespace

LossBreakdown train_step(TrainingState& state, std::span<const SubjectRecord* const> batch, int total_steps) {
  std::int64_t skipped = 0;
  const auto active = lesioned(batch, skipped);
  state.skipped_subjects += skipped;
  if (active.empty()) throw InvalidArgument("train_step: batch has no lesioned subjects");

  const StepDraws draws = draw_step(state.config, state.step, active);
  const BatchTensors tensors = make_batch(state.config, active);
  const double lr = cosine_lr(state.config.learning_rate, state.step, total_steps);
  for (auto& group : state.optimizer->param_groups()) {
    static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
  }
  state.optimizer->zero_grad();
  const JointForward f = joint_forward(state, tensors, draws);
  const LossBreakdown out = f.breakdown();
  check_finite(out, state.step);
  f.total.backward();
  torch::nn::utils::clip_grad_norm_(state.parameters(), state.config.grad_clip);
  state.optimizer->step();
  ++state.step;
  return out;
}

LossBreakdown evaluate_losses(TrainingState& state, std::span<const SubjectRecord* const> batch,
                              const StepDraws& draws) {
  torch::NoGradGuard no_grad;
  return joint_forward(state, make_batch(state.config, batch), draws).breakdown();
}

std::string metrics_header() { return "step,epoch,lr,l_sub,l_diff,l_dev,l_syn,total"; }

std::string format_metrics_row(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", static_cast<long long>(r.step),
                r.epoch, r.lr, r.losses.l_sub, r.losses.l_diff, r.losses.l_dev, r.losses.l_syn, r.losses.total);
  return buf;
}

double validation_l1(TrainingState& state, std::span<const SubjectRecord* const> subjects) {
  std::vector<SamplingRequest<float>> requests;
  std::vector<DeviationField<float>> targets;
  const RngKey key = RngKey(state.config.seed).fold("validation");
  for (const SubjectRecord* r : subjects) {
    if (r->mask.empty()) continue;
    auto x_sub = estimate_substrate(state.f_sub, r->x, r->mask);
    targets.push_back(extract_deviation(r->x, x_sub, r->mask, static_cast<float>(state.config.saturation_delta)));
    requests.push_back({std::move(x_sub), r->mask, key.fold(r->id)});
  }
  if (requests.empty()) return 0.0;
  SamplerConfig cfg;
  cfg.kind = SamplerKind::ddim;
  cfg.ddim_steps = state.config.validation_ddim_steps;
  const TorchNoisePredictor<float> predictor(state.eps);
  const auto samples = sample_deviations<float>(predictor, requests, state.schedule, cfg);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < samples[i].size(); ++k) {
      if (requests[i].mask[k]) acc += std::abs(static_cast<double>(samples[i][k]) - targets[i][k]);
    }
    total += acc / static_cast<double>(requests[i].mask.count());
  }
  return total / static_cast<double>(samples.size());
}

TrainResult train(const TrainConfig& config_in, const Dataset& dataset, const TrainOptions& options) {
  TrainConfig config = config_in;
  config.substrate_net.resolution = dataset.manifest.resolution;
  config.noise_net.resolution = dataset.manifest.resolution;
  config.validate();

  std::int64_t skipped = 0;
  const auto train_records = lesioned(dataset.split(Split::train), skipped);
  if (train_records.empty()) throw DataError("train: no lesioned subjects in the train split");
  auto val_records = lesioned(dataset.split(Split::val), skipped);
  if (config.validation_subjects > 0 && val_records.size() > static_cast<std::size_t>(config.validation_subjects)) {
    val_records.resize(static_cast<std::size_t>(config.validation_subjects));
  }

  TrainResult result{options.resume.empty() ? make_training_state(config) : load_checkpoint(options.resume, &config),
                     {}};
  TrainingState& state = result.state;
  if (options.resume.empty()) state.skipped_subjects = skipped;

  const auto n = static_cast<std::int64_t>(train_records.size());
  const std::int64_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::int64_t total_steps = per_epoch * config.epochs;

  std::filesystem::create_directories(options.out_dir);
  const auto metrics_path = options.out_dir / "metrics.csv";
  const auto validation_path = options.out_dir / "validation.csv";
  const bool append = !options.resume.empty() && std::filesystem::exists(metrics_path);
  std::ofstream metrics(metrics_path, append ? std::ios::app : std::ios::trunc);
  if (!metrics) throw DataError("train: cannot write " + metrics_path.string());
  if (!append) metrics << metrics_header() << '\n';
  std::ofstream validation(validation_path, append ? std::ios::app : std::ios::trunc);
  if (!append) validation << "epoch,step,val_l1\n";

  std::vector<const SubjectRecord*> order;
  std::int64_t order_epoch = -1;
  std::int64_t budget = options.max_steps;
  while (state.step < total_steps && budget != 0) {
    const std::int64_t epoch = state.step / per_epoch;
    const std::int64_t pos = state.step % per_epoch;
    if (epoch != order_epoch) {
      order = train_records;
      RngStream shuffle(RngKey(config.seed).fold("shuffle").fold(static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), shuffle.engine());
      order_epoch = epoch;
    }
    const auto begin = static_cast<std::size_t>(pos * config.batch_size);
    const auto end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
    const std::span<const SubjectRecord* const> batch(order.data() + begin, end - begin);

    MetricsRow row;
    row.step = state.step;
    row.epoch = static_cast<int>(epoch);
    row.lr = cosine_lr(config.learning_rate, state.step, total_steps);
    row.losses = train_step(state, batch, static_cast<int>(total_steps));
    metrics << format_metrics_row(row) << '\n' << std::flush;
    result.metrics.push_back(row);
    if (options.on_step) options.on_step(row);
    if (budget > 0) --budget;

    if (config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0) {
      save_checkpoint(state, options.out_dir / "last.ckpt");
    }
    const bool epoch_done = pos == per_epoch - 1;
    if (epoch_done && config.validate_every > 0 && (epoch + 1) % config.validate_every == 0 && !val_records.empty()) {
      const double v = validation_l1(state, val_records);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g\n", static_cast<long long>(epoch),
                    static_cast<long long>(state.step), v);
      validation << buf << std::flush;
      if (v < state.best_validation) {
        state.best_validation = v;
        save_checkpoint(state, options.out_dir / "best.ckpt");
      }
    }
  }
  save_checkpoint(state, options.out_dir / "last.ckpt");
  return result;
}

}  // namespace pathosyn

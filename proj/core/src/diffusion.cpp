#include "pathosyn/diffusion.hpp"

#include <set>

namespace pathosyn {

std::string to_string(SigmaKind k) { return k == SigmaKind::large ? "large" : "posterior"; }

SigmaKind parse_sigma_kind(const std::string& s) {
  if (s == "large") return SigmaKind::large;
  if (s == "posterior") return SigmaKind::posterior;
  throw ConfigError("unknown sigma kind '" + s + "' (expected large|posterior)");
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas, SigmaKind sigma_kind)
    : beta_(std::move(betas)), sigma_kind_(sigma_kind) {
  if (beta_.empty()) throw InvalidArgument("NoiseSchedule: need at least one step");
  alpha_.resize(beta_.size());
  alpha_bar_.resize(beta_.size());
  sigma_.resize(beta_.size());
  double running = 1.0;
  for (std::size_t i = 0; i < beta_.size(); ++i) {
    const double b = beta_[i];
    if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("NoiseSchedule: beta must lie in (0,1)");
    if (i > 0 && b < beta_[i - 1]) throw InvalidArgument("NoiseSchedule: beta must be nondecreasing");
    alpha_[i] = 1.0 - b;
    const double prev = running;
    running *= alpha_[i];
    alpha_bar_[i] = running;
    sigma_[i] = sigma_kind == SigmaKind::large ? std::sqrt(b)
                                               : std::sqrt((1.0 - prev) / (1.0 - running) * b);
  }
}

void NoiseSchedule::check_step(int t, const char* what) const {
  if (t < 1 || t > steps()) {
    throw InvalidArgument(std::string(what) + ": step " + std::to_string(t) + " outside [1, " +
                          std::to_string(steps()) + "]");
  }
}

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end, SigmaKind sigma_kind) {
  if (steps < 1) throw InvalidArgument("linear_schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw InvalidArgument("linear_schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
    betas[static_cast<std::size_t>(t - 1)] = beta_start + (beta_end - beta_start) * f;
  }
  return NoiseSchedule(std::move(betas), sigma_kind);
}

NoiseSchedule linear_schedule(const ScheduleParams& p) {
  return linear_schedule(p.steps, p.beta_start, p.beta_end, p.sigma_kind);
}

std::vector<int> ddim_timesteps(int total_steps, int ddim_steps) {
  if (ddim_steps < 1 || ddim_steps > total_steps) {
    throw InvalidArgument("ddim_timesteps: need 1 <= ddim_steps <= T");
  }
  std::vector<int> ts;
  ts.reserve(static_cast<std::size_t>(ddim_steps));
  for (int i = 0; i < ddim_steps; ++i) {
    const auto offset = static_cast<int>((static_cast<long long>(i) * total_steps) / ddim_steps);
    ts.push_back(total_steps - offset);
  }
  return ts;
}

double ddim_sigma(const NoiseSchedule& sched, int t, int t_prev, double eta) {
  if (eta == 0.0) return 0.0;
  const double ab = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t_prev);
  return eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
}

}  // namespace pathosyn

#pragma once

// Noise schedule and the mask-constrained forward / reverse transitions
// over deviation fields. Coefficients are held in double; fields may be
// float or double. Every transition ends with projection onto the mask.

#include <cmath>
#include <concepts>
#include <optional>
#include <string>
#include <vector>

#include "pathosyn/grid.hpp"
#include "pathosyn/lattice.hpp"

namespace pathosyn {

/// sqrt(beta_t) ("large") or the DDPM posterior variance
/// beta~_t = (1 - abar_{t-1}) / (1 - abar_t) * beta_t ("posterior").
enum class SigmaKind { large, posterior };

std::string to_string(SigmaKind k);
SigmaKind parse_sigma_kind(const std::string& s);

class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> betas, SigmaKind sigma_kind = SigmaKind::large);

  [[nodiscard]] int steps() const noexcept { return static_cast<int>(beta_.size()); }
  /// Step-indexed accessors, 1 <= t <= T. alpha_bar(0) == 1 by convention.
  [[nodiscard]] double beta(int t) const { return beta_[idx(t)]; }
  [[nodiscard]] double alpha(int t) const { return alpha_[idx(t)]; }
  [[nodiscard]] double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_[idx(t)]; }
  [[nodiscard]] double sigma(int t) const { return sigma_[idx(t)]; }
  [[nodiscard]] SigmaKind sigma_kind() const noexcept { return sigma_kind_; }

  [[nodiscard]] const std::vector<double>& betas() const noexcept { return beta_; }
  [[nodiscard]] const std::vector<double>& alpha_bars() const noexcept { return alpha_bar_; }

  void check_step(int t, const char* what) const;

 private:
  [[nodiscard]] std::size_t idx(int t) const {
    check_step(t, "NoiseSchedule");
    return static_cast<std::size_t>(t - 1);
  }

  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> sigma_;
  SigmaKind sigma_kind_;
};

struct ScheduleParams {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  SigmaKind sigma_kind = SigmaKind::large;
};

/// beta linearly interpolated from beta_start (t = 1) to beta_end (t = T).
[[nodiscard]] NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end,
                                            SigmaKind sigma_kind = SigmaKind::large);
[[nodiscard]] NoiseSchedule linear_schedule(const ScheduleParams& p);

/// Strided DDIM grid: ddim_steps descending timesteps starting at T.
/// The step after the last entry targets t = 0 (alpha_bar_0 = 1).
[[nodiscard]] std::vector<int> ddim_timesteps(int total_steps, int ddim_steps);

namespace detail {
template <std::floating_point T>
void check_pair(const DeviationField<T>& a, const Grid<T, tags::Deviation>& b, const LesionMask& m,
                const char* what) {
  require_same_shape(a.shape(), b.shape(), what);
  require_same_shape(a.shape(), m.shape(), what);
}
}  // namespace detail

/// r_t = (sqrt(abar_t) r₀ + sqrt(1 - abar_t) eps) ⊙ m.
template <std::floating_point T>
[[nodiscard]] DeviationField<T> forward_sample(const DeviationField<T>& r0, int t,
                                               const DeviationField<T>& eps,
                                               const NoiseSchedule& sched, const LesionMask& m) {
  sched.check_step(t, "forward_sample");
  detail::check_pair(r0, eps, m, "forward_sample");
  const double a = std::sqrt(sched.alpha_bar(t));
  const double b = std::sqrt(1.0 - sched.alpha_bar(t));
  DeviationField<T> out(r0.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = m[k] ? static_cast<T>(a * r0[k] + b * eps[k]) : T(0);
  }
  return out;
}

/// One Markov step of the forward chain, q(r_t | r_{t-1}), projected onto m.
template <std::floating_point T>
[[nodiscard]] DeviationField<T> forward_step(const DeviationField<T>& r_prev, int t,
                                             const DeviationField<T>& eps,
                                             const NoiseSchedule& sched, const LesionMask& m) {
  sched.check_step(t, "forward_step");
  detail::check_pair(r_prev, eps, m, "forward_step");
  const double a = std::sqrt(1.0 - sched.beta(t));
  const double b = std::sqrt(sched.beta(t));
  DeviationField<T> out(r_prev.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = m[k] ? static_cast<T>(a * r_prev[k] + b * eps[k]) : T(0);
  }
  return out;
}

/// r̂₀ = ((r_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)) ⊙ m.
template <std::floating_point T>
[[nodiscard]] DeviationField<T> estimate_clean(const DeviationField<T>& r_t,
                                               const DeviationField<T>& eps_hat, int t,
                                               const NoiseSchedule& sched, const LesionMask& m) {
  sched.check_step(t, "estimate_clean");
  detail::check_pair(r_t, eps_hat, m, "estimate_clean");
  const double a = std::sqrt(sched.alpha_bar(t));
  const double b = std::sqrt(1.0 - sched.alpha_bar(t));
  DeviationField<T> out(r_t.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = m[k] ? static_cast<T>((r_t[k] - b * eps_hat[k]) / a) : T(0);
  }
  return out;
}

/// Ancestral reverse transition r_t -> r_{t-1}:
/// (r_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t) + sigma_t z, then ⊙ m.
/// At t = 1 no noise is added; passing a nonzero z there is an error.
template <std::floating_point T>
[[nodiscard]] DeviationField<T> ancestral_step(const DeviationField<T>& r_t,
                                               const DeviationField<T>& eps_hat, int t,
                                               const std::optional<DeviationField<T>>& z,
                                               const NoiseSchedule& sched, const LesionMask& m) {
  sched.check_step(t, "ancestral_step");
  detail::check_pair(r_t, eps_hat, m, "ancestral_step");
  if (z) {
    require_same_shape(r_t.shape(), z->shape(), "ancestral_step");
    if (t == 1) {
      for (T v : z->values()) {
        if (v != T(0)) throw InvalidArgument("ancestral_step: z must be zero at t = 1");
      }
    }
  }
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(t));
  const double coef = sched.beta(t) / std::sqrt(1.0 - sched.alpha_bar(t));
  const double sigma = t > 1 ? sched.sigma(t) : 0.0;
  DeviationField<T> out(r_t.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!m[k]) {
      out[k] = T(0);
      continue;
    }
    double v = inv_sqrt_alpha * (r_t[k] - coef * eps_hat[k]);
    if (z) v += sigma * (*z)[k];
    out[k] = static_cast<T>(v);
  }
  return out;
}

template <std::floating_point T>
[[nodiscard]] DeviationField<T> ancestral_step(const DeviationField<T>& r_t,
                                               const DeviationField<T>& eps_hat, int t,
                                               const NoiseSchedule& sched, const LesionMask& m) {
  return ancestral_step(r_t, eps_hat, t, std::optional<DeviationField<T>>{}, sched, m);
}

/// Stochasticity of a DDIM step from t to t_prev (0 when eta == 0).
[[nodiscard]] double ddim_sigma(const NoiseSchedule& sched, int t, int t_prev, double eta);

/// DDIM transition r_t -> r_{t_prev} (t_prev may be 0, with abar_0 = 1):
/// sqrt(abar_prev) r̂₀ + sqrt(1 - abar_prev - s²) eps_hat + s z, then ⊙ m.
template <std::floating_point T>
[[nodiscard]] DeviationField<T> ddim_step(const DeviationField<T>& r_t,
                                          const DeviationField<T>& eps_hat, int t, int t_prev,
                                          const NoiseSchedule& sched, double eta,
                                          const std::optional<DeviationField<T>>& z,
                                          const LesionMask& m) {
  sched.check_step(t, "ddim_step");
  if (t_prev < 0 || t_prev >= t) {
    throw InvalidArgument("ddim_step: need 0 <= t_prev < t, got t=" + std::to_string(t) +
                          " t_prev=" + std::to_string(t_prev));
  }
  if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("ddim_step: eta must lie in [0,1]");
  detail::check_pair(r_t, eps_hat, m, "ddim_step");
  if (z) require_same_shape(r_t.shape(), z->shape(), "ddim_step");

  const double s = ddim_sigma(sched, t, t_prev, eta);
  const double ab = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t_prev);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  const double c0 = std::sqrt(ab_prev);
  const double c1 = std::sqrt(std::max(0.0, 1.0 - ab_prev - s * s));
  DeviationField<T> out(r_t.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!m[k]) {
      out[k] = T(0);
      continue;
    }
    const double r0_hat = static_cast<double>(static_cast<T>((r_t[k] - b * eps_hat[k]) / a));
    double v = c0 * r0_hat + c1 * eps_hat[k];
    if (z && s > 0.0) v += s * (*z)[k];
    out[k] = static_cast<T>(v);
  }
  return out;
}

}  // namespace pathosyn

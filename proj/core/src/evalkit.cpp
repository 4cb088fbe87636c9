#include "pathosyn/evalkit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace pathosyn {

double cosine_coupling(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw InvalidArgument("cosine_coupling: vectors must be nonempty and of equal length");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine_coupling: zero vector has no direction");
  return std::min(1.0, std::abs(dot) / (std::sqrt(na) * std::sqrt(nb)));
}

std::vector<int> equal_frequency_bins(std::span<const double> v, int bins) {
  if (bins < 1) throw InvalidArgument("equal_frequency_bins: bins must be positive");
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<int> out(n, 0);
  std::size_t first_rank = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (r > 0 && v[order[r]] != v[order[r - 1]]) first_rank = r;
    out[order[r]] = static_cast<int>((first_rank * static_cast<std::size_t>(bins)) / n);
  }
  return out;
}

namespace {

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

MutualInformation mutual_information(std::span<const double> a, std::span<const double> b, int bins) {
  if (a.size() != b.size()) throw InvalidArgument("mutual_information: sample counts differ");
  if (a.size() < 2) throw InvalidArgument("mutual_information: need at least 2 samples");
  if (bins < 1) throw InvalidArgument("mutual_information: bins must be positive");
  if (is_constant(a) || is_constant(b)) return {0.0, true};
  const std::vector<int> ba = equal_frequency_bins(a, bins);
  const std::vector<int> bb = equal_frequency_bins(b, bins);
  const auto nb = static_cast<std::size_t>(bins);
  std::vector<double> joint(nb * nb, 0.0);
  std::vector<double> pa(nb, 0.0);
  std::vector<double> pb(nb, 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    joint[static_cast<std::size_t>(ba[k]) * nb + static_cast<std::size_t>(bb[k])] += 1.0;
    pa[static_cast<std::size_t>(ba[k])] += 1.0;
    pb[static_cast<std::size_t>(bb[k])] += 1.0;
  }
  const auto n = static_cast<double>(a.size());
  double mi = 0.0;
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double c = joint[i * nb + j];
      if (c == 0.0) continue;
      // p_ij log(p_ij / (p_i p_j)) with counts: (c/n) log(c n / (c_i c_j))
      mi += (c / n) * std::log((c * n) / (pa[i] * pb[j]));
    }
  }
  return {std::max(0.0, mi), false};
}

std::vector<double> principal_projection(const FeatureSet& features) {
  if (features.empty()) return {};
  const auto n = static_cast<Eigen::Index>(features.size());
  const auto d = static_cast<Eigen::Index>(features.front().size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(features[static_cast<std::size_t>(i)].size()) != d) {
      throw InvalidArgument("principal_projection: ragged feature set");
    }
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = features[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  // Correlation-matrix PCA: centre and scale each column.
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, n - 1)));
    if (sd > 1e-12) x.col(j) /= sd;
    else x.col(j).setZero();
  }
  Eigen::VectorXd axis;
  if (d == 1) {
    axis = Eigen::VectorXd::Ones(1);
  } else {
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(std::max<Eigen::Index>(1, n - 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    axis = eig.eigenvectors().col(d - 1);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
  }
  const Eigen::VectorXd proj = x * axis;
  return {proj.data(), proj.data() + proj.size()};
}

MutualInformation mutual_information(const FeatureSet& a, const FeatureSet& b, int bins) {
  if (a.size() != b.size()) throw InvalidArgument("mutual_information: paired sets differ in size");
  const std::vector<double> pa = principal_projection(a);
  const std::vector<double> pb = principal_projection(b);
  return mutual_information(std::span<const double>(pa), std::span<const double>(pb), bins);
}

double roc_auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw InvalidArgument("roc_auc: both classes must be nonempty");
  struct Item {
    double score;
    bool pos;
  };
  std::vector<Item> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.push_back({s, true});
  for (double s : negative) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Item& x, const Item& y) { return x.score < y.score; });
  // Midranks (1-based) for ties; rank sums are exact multiples of 0.5.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j + 1 < all.size() && all[j + 1].score == all[i].score) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (all[k].pos) rank_sum += midrank;
    }
    i = j + 1;
  }
  const auto np = static_cast<double>(positive.size());
  const auto nn = static_cast<double>(negative.size());
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

std::vector<RocPoint> roc_curve(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw InvalidArgument("roc_curve: both classes must be nonempty");
  std::vector<double> thresholds(positive.begin(), positive.end());
  thresholds.insert(thresholds.end(), negative.begin(), negative.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<RocPoint> out;
  out.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (double th : thresholds) {
    const auto tp = std::count_if(positive.begin(), positive.end(), [&](double s) { return s >= th; });
    const auto fp = std::count_if(negative.begin(), negative.end(), [&](double s) { return s >= th; });
    out.push_back({th, static_cast<double>(fp) / static_cast<double>(negative.size()),
                   static_cast<double>(tp) / static_cast<double>(positive.size())});
  }
  return out;
}

namespace {

/// L2-penalised logistic regression (intercept unpenalised) fitted by Newton steps.
Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2) {
  const Eigen::Index d = x.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d, l2);
  penalty(d - 1) = 1e-8;
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd z = x * w;
    Eigen::VectorXd p(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) p(i) = 1.0 / (1.0 + std::exp(-z(i)));
    const Eigen::VectorXd grad = x.transpose() * (p - y) + penalty.cwiseProduct(w);
    const Eigen::VectorXd s = p.cwiseProduct((Eigen::VectorXd::Ones(p.size()) - p)).cwiseMax(1e-12);
    Eigen::MatrixXd h = x.transpose() * s.asDiagonal() * x;
    h.diagonal() += penalty;
    const Eigen::VectorXd step = h.ldlt().solve(grad);
    w -= step;
    if (step.norm() < 1e-10) break;
  }
  return w;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

Discriminability discriminability_auc(const FeatureSet& real, const FeatureSet& synth, RngKey key,
                                      DiscriminabilityOptions opts,
                                      const std::vector<std::string>* real_groups,
                                      const std::vector<std::string>* synth_groups) {
  if (real.size() < 5 || synth.size() < 5) {
    throw InvalidArgument("discriminability_auc: each class needs at least 5 samples");
  }
  if (opts.folds < 2 || opts.bootstrap_n < 1) {
    throw InvalidArgument("discriminability_auc: need folds >= 2 and bootstrap_n >= 1");
  }
  if ((real_groups == nullptr) != (synth_groups == nullptr) ||
      (real_groups && (real_groups->size() != real.size() || synth_groups->size() != synth.size()))) {
    throw InvalidArgument("discriminability_auc: group labels must cover both classes");
  }
  const std::size_t d = real.front().size();
  const std::size_t n = real.size() + synth.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureVector& f = i < real.size() ? real[i] : synth[i - real.size()];
    if (f.size() != d) throw InvalidArgument("discriminability_auc: ragged feature sets");
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[j];
    y(static_cast<Eigen::Index>(i)) = i < real.size() ? 1.0 : 0.0;
  }

  // Fold assignment: stratified by class, or by group when groups are given.
  std::vector<int> fold(n, 0);
  RngStream rng(key.fold("folds"));
  if (real_groups) {
    std::vector<std::string> groups(real_groups->begin(), real_groups->end());
    groups.insert(groups.end(), synth_groups->begin(), synth_groups->end());
    std::vector<std::string> unique = groups;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    std::shuffle(unique.begin(), unique.end(), rng.engine());
    std::map<std::string, int> group_fold;
    for (std::size_t g = 0; g < unique.size(); ++g) group_fold[unique[g]] = static_cast<int>(g % static_cast<std::size_t>(opts.folds));
    for (std::size_t i = 0; i < n; ++i) fold[i] = group_fold[groups[i]];
  } else {
    for (int cls = 0; cls < 2; ++cls) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < n; ++i) {
        if ((y(static_cast<Eigen::Index>(i)) == 1.0) == (cls == 0)) idx.push_back(i);
      }
      std::shuffle(idx.begin(), idx.end(), rng.engine());
      for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(opts.folds));
    }
  }

  std::vector<double> scores(n, 0.0);
  for (int f = 0; f < opts.folds; ++f) {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
    if (test.empty()) continue;
    Eigen::MatrixXd xtr(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(d + 1));
    Eigen::VectorXd ytr(static_cast<Eigen::Index>(train.size()));
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(d));
    for (Eigen::Index r : train) mean += x.row(r);
    mean /= static_cast<double>(train.size());
    Eigen::RowVectorXd sd = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(d));
    for (Eigen::Index r : train) sd += (x.row(r) - mean).cwiseAbs2();
    sd = (sd / static_cast<double>(std::max<std::size_t>(1, train.size() - 1))).cwiseSqrt();
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
      if (sd(j) < 1e-12) sd(j) = std::numeric_limits<double>::infinity();
    }
    auto standardized = [&](Eigen::Index r) {
      Eigen::RowVectorXd row(static_cast<Eigen::Index>(d + 1));
      row.head(static_cast<Eigen::Index>(d)) = (x.row(r) - mean).cwiseQuotient(sd);
      row(static_cast<Eigen::Index>(d)) = 1.0;
      return row;
    };
    for (std::size_t k = 0; k < train.size(); ++k) {
      xtr.row(static_cast<Eigen::Index>(k)) = standardized(train[k]);
      ytr(static_cast<Eigen::Index>(k)) = y(train[k]);
    }
    const Eigen::VectorXd w = fit_logistic(xtr, ytr, opts.l2);
    for (Eigen::Index r : test) scores[static_cast<std::size_t>(r)] = standardized(r).dot(w);
  }

  Discriminability out;
  out.real_scores.assign(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(real.size()));
  out.synth_scores.assign(scores.begin() + static_cast<std::ptrdiff_t>(real.size()), scores.end());
  out.auc = roc_auc(out.real_scores, out.synth_scores);

  RngStream boot(key.fold("bootstrap"));
  std::vector<double> rs(real.size());
  std::vector<double> ss(synth.size());
  out.bootstrap_aucs.reserve(static_cast<std::size_t>(opts.bootstrap_n));
  for (int b = 0; b < opts.bootstrap_n; ++b) {
    for (double& v : rs) v = out.real_scores[static_cast<std::size_t>(boot.uniform_int(0, static_cast<std::int64_t>(real.size()) - 1))];
    for (double& v : ss) v = out.synth_scores[static_cast<std::size_t>(boot.uniform_int(0, static_cast<std::int64_t>(synth.size()) - 1))];
    out.bootstrap_aucs.push_back(roc_auc(rs, ss));
  }
  const double alpha = 1.0 - opts.confidence;
  out.ci_low = percentile(out.bootstrap_aucs, alpha / 2.0);
  out.ci_high = percentile(out.bootstrap_aucs, 1.0 - alpha / 2.0);
  return out;
}

namespace {

// Symmetric co-occurrence counts; every entry is an exact integer.
std::vector<double> glcm_counts(const ImageGrid<float>& x, int levels, GlcmOffset offset, double& total) {
  if (levels < 2) throw InvalidArgument("glcm: levels must be >= 2");
  if (std::abs(offset.di) >= x.height() || std::abs(offset.dj) >= x.width()) {
    throw InvalidArgument("glcm: image smaller than offset");
  }
  auto quantize = [levels](float v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return std::min(levels - 1, static_cast<int>(std::floor(c * levels)));
  };
  const auto nl = static_cast<std::size_t>(levels);
  std::vector<double> p(nl * nl, 0.0);
  total = 0.0;
  for (int i = 0; i < x.height(); ++i) {
    const int i2 = i + offset.di;
    if (i2 < 0 || i2 >= x.height()) continue;
    for (int j = 0; j < x.width(); ++j) {
      const int j2 = j + offset.dj;
      if (j2 < 0 || j2 >= x.width()) continue;
      const auto a = static_cast<std::size_t>(quantize(x(i, j)));
      const auto b = static_cast<std::size_t>(quantize(x(i2, j2)));
      p[a * nl + b] += 1.0;
      p[b * nl + a] += 1.0;
      total += 2.0;
    }
  }
  return p;
}

}  // namespace

std::vector<double> glcm_matrix(const ImageGrid<float>& x, int levels, GlcmOffset offset) {
  double total = 0.0;
  std::vector<double> p = glcm_counts(x, levels, offset, total);
  for (double& v : p) v /= total;
  return p;
}

// Both statistics depend on the matrix only through the number of pairs at
// each gray-level distance, so they are evaluated from those integer counts:
// the result does not depend on summation order.
GlcmStats glcm_stats(const ImageGrid<float>& x, int levels, GlcmOffset offset) {
  double total = 0.0;
  const std::vector<double> p = glcm_counts(x, levels, offset, total);
  std::vector<double> by_distance(static_cast<std::size_t>(levels), 0.0);
  for (int i = 0; i < levels; ++i) {
    for (int j = 0; j < levels; ++j) {
      by_distance[static_cast<std::size_t>(std::abs(i - j))] += p[static_cast<std::size_t>(i * levels + j)];
    }
  }
  double contrast = 0.0;
  double homogeneity = 0.0;
  for (int d = 0; d < levels; ++d) {
    const double n = by_distance[static_cast<std::size_t>(d)];
    contrast += static_cast<double>(d) * d * n;
    homogeneity += n / (1.0 + d);
  }
  return {contrast / total, homogeneity / total};
}

EcdfCurve feature_distance_ecdf(const FeatureSet& real, const FeatureSet& synth) {
  if (real.empty() || synth.empty()) throw InvalidArgument("feature_distance_ecdf: empty feature set");
  std::vector<double> dist;
  dist.reserve(synth.size());
  for (const auto& s : synth) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : real) {
      if (r.size() != s.size()) throw InvalidArgument("feature_distance_ecdf: ragged feature sets");
      double d2 = 0.0;
      for (std::size_t k = 0; k < r.size(); ++k) d2 += (r[k] - s[k]) * (r[k] - s[k]);
      best = std::min(best, d2);
    }
    dist.push_back(std::sqrt(best));
  }
  std::sort(dist.begin(), dist.end());
  EcdfCurve c;
  const auto n = static_cast<double>(dist.size());
  for (std::size_t k = 0; k < dist.size(); ++k) {
    if (k + 1 < dist.size() && dist[k + 1] == dist[k]) continue;
    c.values.push_back(dist[k]);
    c.fractions.push_back(static_cast<double>(k + 1) / n);
  }
  c.fractions.back() = 1.0;
  return c;
}

StatisticsEncoder::StatisticsEncoder(int levels, double value_lo, double value_hi)
    : levels_(levels), lo_(value_lo), hi_(value_hi) {
  if (levels < 2 || !(value_hi > value_lo)) throw InvalidArgument("StatisticsEncoder: invalid range");
}

FeatureVector StatisticsEncoder::encode(const ImageGrid<float>& x) const {
  const auto n = static_cast<double>(x.size());
  double mean = 0.0;
  for (float v : x.values()) mean += v;
  mean /= n;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (float v : x.values()) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double sd = std::sqrt(m2);
  const double skew = m2 > 1e-18 ? m3 / std::pow(m2, 1.5) : 0.0;
  const double kurt = m2 > 1e-18 ? m4 / (m2 * m2) : 0.0;
  FeatureVector f{mean, sd, skew, kurt};

  ImageGrid<float> unit(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) unit[k] = static_cast<float>((x[k] - lo_) / (hi_ - lo_));
  for (GlcmOffset off : {GlcmOffset{0, 1}, GlcmOffset{1, 0}, GlcmOffset{1, 1}, GlcmOffset{1, -1}}) {
    if (std::abs(off.di) >= x.height() || std::abs(off.dj) >= x.width()) {
      f.push_back(0.0);
      f.push_back(1.0);
      continue;
    }
    const GlcmStats s = glcm_stats(unit, levels_, off);
    f.push_back(s.contrast);
    f.push_back(s.homogeneity);
  }
  return f;
}

ImageGrid<float> lesion_patch(const ImageGrid<float>& x, const LesionMask& m, int margin) {
  require_same_shape(x.shape(), m.shape(), "lesion_patch");
  if (m.empty()) return x;
  int i0 = x.height(), i1 = -1, j0 = x.width(), j1 = -1;
  for (int i = 0; i < x.height(); ++i) {
    for (int j = 0; j < x.width(); ++j) {
      if (!m(i, j)) continue;
      i0 = std::min(i0, i);
      i1 = std::max(i1, i);
      j0 = std::min(j0, j);
      j1 = std::max(j1, j);
    }
  }
  i0 = std::max(0, i0 - margin);
  j0 = std::max(0, j0 - margin);
  i1 = std::min(x.height() - 1, i1 + margin);
  j1 = std::min(x.width() - 1, j1 + margin);
  ImageGrid<float> out(Shape{i1 - i0 + 1, j1 - j0 + 1});
  for (int i = i0; i <= i1; ++i) {
    for (int j = j0; j <= j1; ++j) out(i - i0, j - j0) = x(i, j);
  }
  return out;
}

void standardize_features(const FeatureSet& reference, std::vector<FeatureSet*> sets) {
  if (reference.empty()) throw InvalidArgument("standardize_features: empty reference");
  const std::size_t d = reference.front().size();
  std::vector<double> mean(d, 0.0);
  std::vector<double> sd(d, 0.0);
  for (const auto& f : reference) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += f[j];
  }
  for (double& v : mean) v /= static_cast<double>(reference.size());
  for (const auto& f : reference) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
  }
  for (double& v : sd) v = std::max(1e-12, std::sqrt(v / static_cast<double>(std::max<std::size_t>(1, reference.size() - 1))));
  for (FeatureSet* set : sets) {
    for (auto& f : *set) {
      for (std::size_t j = 0; j < d; ++j) f[j] = (f[j] - mean[j]) / sd[j];
    }
  }
}

SummaryStat summarize(std::span<const double> v) {
  SummaryStat s;
  s.n = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

DisentanglementReport disentanglement_report(const FeatureEncoder& encoder,
                                             std::span<const DisentanglementInput> items, int bins,
                                             RngKey key, int bootstrap_n) {
  if (items.size() < 2) throw InvalidArgument("disentanglement_report: need at least 2 subjects");
  DisentanglementReport rep;
  rep.mi_bins = bins;
  FeatureSet sub_f;
  FeatureSet dev_f;
  std::vector<double> couplings;
  for (const auto& item : items) {
    const bool zero_dev = std::all_of(item.deviation.values().begin(), item.deviation.values().end(),
                                      [](float v) { return v == 0.0f; });
    if (zero_dev) {
      ++rep.skipped;
      continue;
    }
    FeatureVector fs = encoder.encode(item.x_sub);
    FeatureVector fd = encoder.encode(item.deviation);
    const auto is_zero = [](const FeatureVector& f) {
      return std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; });
    };
    if (is_zero(fs) || is_zero(fd)) {
      ++rep.skipped;
      continue;
    }
    couplings.push_back(cosine_coupling(fs, fd));
    sub_f.push_back(std::move(fs));
    dev_f.push_back(std::move(fd));
  }
  rep.coupling = summarize(couplings);
  if (sub_f.size() >= 2) {
    rep.mutual_information.n = sub_f.size();
    rep.mutual_information.mean = mutual_information(sub_f, dev_f, bins).nats;
    RngStream rng(key.fold("mi-bootstrap"));
    std::vector<double> boot;
    FeatureSet bs(sub_f.size());
    FeatureSet bd(sub_f.size());
    for (int b = 0; b < bootstrap_n; ++b) {
      for (std::size_t k = 0; k < sub_f.size(); ++k) {
        const auto pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(sub_f.size()) - 1));
        bs[k] = sub_f[pick];
        bd[k] = dev_f[pick];
      }
      boot.push_back(mutual_information(bs, bd, bins).nats);
    }
    rep.mutual_information.sd = summarize(boot).sd;
  }
  return rep;
}

}  // namespace pathosyn

#include "pathosyn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "pathosyn/errors.hpp"

namespace pathosyn {

using json = nlohmann::json;

namespace {

MetricSummary from_values(std::span<const double> v) {
  const SummaryStat s = summarize(v);
  return {s.mean, s.sd, s.n, std::nullopt};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EvaluationReport evaluate_synthesis(const Dataset& dataset, std::span<const SynthSample> synth,
                                    const FeatureEncoder& encoder, const EvalOptions& options) {
  if (synth.empty()) throw DataError("evaluate: no synthesized samples");
  for (const SynthSample& s : synth) {
    const auto it = dataset.manifest.splits.find(s.subject);
    if (it == dataset.manifest.splits.end()) throw DataError("evaluate: unknown subject " + s.subject);
    if (it->second == Split::train) {
      throw DataError("evaluate: split leakage, synthesized subject " + s.subject + " belongs to the train split");
    }
  }

  EvaluationReport rep;
  rep.encoder = encoder.name();
  FeatureSet real;
  FeatureSet fake;
  std::vector<std::string> real_groups;
  std::vector<std::string> fake_groups;
  std::vector<double> glcm[2][2];
  auto texture = [&](const ImageGrid<float>& patch, int side) {
    const GlcmStats g = glcm_stats(patch, 32, GlcmOffset{0, 1});
    glcm[side][0].push_back(g.contrast);
    glcm[side][1].push_back(g.homogeneity);
  };
  for (const SubjectRecord* r : dataset.split(Split::test)) {
    if (r->mask.empty()) continue;
    const auto patch = lesion_patch(r->x, r->mask, options.patch_margin);
    real.push_back(encoder.encode(patch));
    real_groups.push_back(r->id);
    texture(patch, 0);
  }
  std::vector<DisentanglementInput> pairs;
  for (const SynthSample& s : synth) {
    const SubjectRecord& r = dataset.subject(s.subject);
    const auto patch = lesion_patch(s.x_hat, r.mask, options.patch_margin);
    fake.push_back(encoder.encode(patch));
    fake_groups.push_back(s.subject);
    texture(patch, 1);
    pairs.push_back({s.x_sub, retag<tags::Image>(s.r_hat)});
  }
  rep.n_real = real.size();
  rep.n_synth = fake.size();

  const RngKey key = RngKey(options.seed).fold("evaluate");
  DiscriminabilityOptions dopts;
  dopts.bootstrap_n = options.bootstrap_n;
  rep.discriminability = discriminability_auc(real, fake, key.fold("auc"), dopts, &real_groups, &fake_groups);
  rep.roc = roc_curve(rep.discriminability.real_scores, rep.discriminability.synth_scores);
  {
    MetricSummary m = from_values(rep.discriminability.bootstrap_aucs);
    m.mean = rep.discriminability.auc;
    m.n = real.size() + fake.size();
    m.ci = std::pair{rep.discriminability.ci_low, rep.discriminability.ci_high};
    rep.metrics["discriminability_auc"] = m;
  }

  FeatureSet real_z = real;
  FeatureSet fake_z = fake;
  standardize_features(real, {&real_z, &fake_z});
  rep.ecdf = feature_distance_ecdf(real_z, fake_z);
  {
    std::vector<double> dist;
    std::size_t prev = 0;
    for (std::size_t i = 0; i < rep.ecdf.values.size(); ++i) {
      const auto upto = static_cast<std::size_t>(std::llround(rep.ecdf.fractions[i] * static_cast<double>(fake.size())));
      dist.insert(dist.end(), upto - prev, rep.ecdf.values[i]);
      prev = upto;
    }
    rep.metrics["feature_distance"] = from_values(dist);
  }
  rep.metrics["glcm_contrast_real"] = from_values(glcm[0][0]);
  rep.metrics["glcm_homogeneity_real"] = from_values(glcm[0][1]);
  rep.metrics["glcm_contrast_synth"] = from_values(glcm[1][0]);
  rep.metrics["glcm_homogeneity_synth"] = from_values(glcm[1][1]);

  if (pairs.size() >= 2) {
    const int bins = std::max(1, std::min<int>(options.mi_bins, static_cast<int>(pairs.size())));
    rep.disentanglement = disentanglement_report(encoder, pairs, bins, key.fold("disentanglement"));
    const auto& d = rep.disentanglement;
    rep.metrics["coupling"] = {d.coupling.mean, d.coupling.sd, d.coupling.n, std::nullopt};
    rep.metrics["mutual_information"] = {d.mutual_information.mean, d.mutual_information.sd,
                                         d.mutual_information.n, std::nullopt};
  }
  return rep;
}

json to_json(const EvaluationReport& r) {
  json metrics = json::object();
  for (const auto& [name, m] : r.metrics) {
    metrics[name] = {{"mean", m.mean},
                     {"sd", m.sd},
                     {"n", m.n},
                     {"ci", m.ci ? json::array({m.ci->first, m.ci->second}) : json(nullptr)}};
  }
  return {{"encoder", r.encoder},
          {"n_real", r.n_real},
          {"n_synth", r.n_synth},
          {"disentanglement_skipped", r.disentanglement.skipped},
          {"mi_bins", r.disentanglement.mi_bins},
          {"metrics", metrics}};
}

std::string ecdf_csv(const EcdfCurve& c) {
  std::string out = "distance,fraction\n";
  for (std::size_t i = 0; i < c.values.size(); ++i) out += fmt(c.values[i]) + "," + fmt(c.fractions[i]) + "\n";
  return out;
}

std::string roc_csv(std::span<const RocPoint> roc) {
  std::string out = "threshold,fpr,tpr\n";
  for (const RocPoint& p : roc) out += fmt(p.threshold) + "," + fmt(p.fpr) + "," + fmt(p.tpr) + "\n";
  return out;
}

}  // namespace pathosyn

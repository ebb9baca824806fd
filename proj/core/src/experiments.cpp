// Copyright 2026 The curvlens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "curvlens/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "curvlens/errors.hpp"
#include "curvlens/trace.hpp"

namespace curvlens {

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  s.std_error = s.stddev / std::sqrt(static_cast<double>(values.size()));
  return s;
}

double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

std::vector<double> CurvatureEnsemble::column(double CurvatureSample::*field) const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.*field);
  return out;
}

CurvatureEnsemble curvature_ensemble(const LossFunction& loss, const DVector& theta_star,
                                     std::size_t samples, const RngStream& rng,
                                     const Exec& exec) {
  require_same_dim(static_cast<Eigen::Index>(loss.dim()), theta_star.size(),
                   "curvature_ensemble");
  if (samples == 0) throw InvalidDimension("curvature_ensemble: samples must be >= 1");

  CurvatureEnsemble ens;
  ens.samples.resize(samples);
  parallel_for(samples, exec, [&](std::size_t s) {
    RngStream sub = rng.substream(s);
    const DirectionPair pair = make_random_pair(loss.dim(), sub);
    const ProjectedHessian ph = projected_hessian(loss, theta_star, pair);
    const CurvaturePair k = principal_curvatures_2d(ph);
    ens.samples[s] = CurvatureSample{ph.A, ph.B, ph.C, k.kappa_plus, k.kappa_minus};
  });

  double sa = 0, sb = 0, sc = 0, skp = 0, skm = 0;
  for (auto* v : {&ens.mean_A, &ens.mean_B, &ens.mean_C, &ens.mean_kplus, &ens.mean_kminus,
                  &ens.ktilde_plus, &ens.ktilde_minus})
    v->reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto& x = ens.samples[s];
    sa += x.A;
    sb += x.B;
    sc += x.C;
    skp += x.kappa_plus;
    skm += x.kappa_minus;
    const double inv = 1.0 / static_cast<double>(s + 1);
    ens.mean_A.push_back(sa * inv);
    ens.mean_B.push_back(sb * inv);
    ens.mean_C.push_back(sc * inv);
    ens.mean_kplus.push_back(skp * inv);
    ens.mean_kminus.push_back(skm * inv);
    const CurvaturePair kt =
        principal_curvatures_2d({ens.mean_A.back(), ens.mean_B.back(), ens.mean_C.back()});
    ens.ktilde_plus.push_back(kt.kappa_plus);
    ens.ktilde_minus.push_back(kt.kappa_minus);
  }
  return ens;
}

namespace {
double normal_positive_prob(const Summary& s) {
  if (s.stddev == 0.0) return s.mean > 0.0 ? 1.0 : (s.mean < 0.0 ? 0.0 : 0.5);
  return normal_sf(-s.mean / s.stddev);
}
}  // namespace

SaddleMisidResult saddle_misid_probability(const CurvatureEnsemble& ensemble) {
  if (ensemble.size() == 0) throw InvalidDimension("saddle_misid_probability: empty ensemble");
  SaddleMisidResult r;
  r.samples = ensemble.size();
  std::size_t same = 0, opposite = 0, kp_pos = 0, kp_neg = 0, km_pos = 0, km_neg = 0;
  for (const auto& s : ensemble.samples) {
    const double prod = s.kappa_plus * s.kappa_minus;
    if (prod > 0.0) ++same;
    if (prod < 0.0) ++opposite;
    kp_pos += s.kappa_plus > 0.0;
    kp_neg += s.kappa_plus < 0.0;
    km_pos += s.kappa_minus > 0.0;
    km_neg += s.kappa_minus < 0.0;
  }
  const double n = static_cast<double>(r.samples);
  r.p_same_sign = static_cast<double>(same) / n;
  r.p_opposite_sign = static_cast<double>(opposite) / n;
  r.std_error = std::sqrt(r.p_same_sign * (1.0 - r.p_same_sign) / n);
  r.p_same_sign_marginal = (static_cast<double>(kp_pos) / n) * (static_cast<double>(km_pos) / n) +
                           (static_cast<double>(kp_neg) / n) * (static_cast<double>(km_neg) / n);
  const double pp = normal_positive_prob(ensemble.summary(&CurvatureSample::kappa_plus));
  const double pm = normal_positive_prob(ensemble.summary(&CurvatureSample::kappa_minus));
  r.p_same_sign_gaussian = pp * pm + (1.0 - pp) * (1.0 - pm);
  return r;
}

SaddleMisidResult saddle_misid_probability(const LossFunction& loss, const DVector& theta_star,
                                           std::size_t samples, const RngStream& rng,
                                           const Exec& exec) {
  return saddle_misid_probability(curvature_ensemble(loss, theta_star, samples, rng, exec));
}

Histogram make_histogram(const std::vector<double>& values, std::size_t bins) {
  require_dim(bins, "make_histogram bins");
  if (values.empty()) throw InvalidDimension("make_histogram: no values");
  const Summary s = summarize(values);
  const double half = s.stddev > 0.0 ? 4.0 * s.stddev : 0.5;
  const double lo = s.mean - half;
  const double hi = s.mean + half;
  Histogram h;
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (v < lo) {
      ++h.underflow;
    } else if (v > hi) {
      ++h.overflow;
    } else {
      auto b = static_cast<std::size_t>((v - lo) / width);
      ++h.counts[std::min(b, bins - 1)];
    }
  }
  return h;
}

CurvatureHistograms curvature_histograms(const CurvatureEnsemble& ensemble, std::size_t bins) {
  return CurvatureHistograms{make_histogram(ensemble.column(&CurvatureSample::kappa_plus), bins),
                             make_histogram(ensemble.column(&CurvatureSample::kappa_minus), bins)};
}

double dot_identity_error(const DVector& eta, const DVector& delta) {
  require_same_dim(eta.size(), delta.size(), "dot_identity_error");
  double direct = 0.0, plus = 0.0, minus = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    direct += eta[i] * delta[i];
    const double x = eta[i] + delta[i];
    const double y = eta[i] - delta[i];
    plus += x * x;
    minus += y * y;
  }
  const double scale = 0.25 * (plus + minus);
  const double diff = std::abs(direct - 0.25 * (plus - minus));
  return scale > 0.0 ? diff / scale : diff;
}

TailReport orthogonality_tail(std::size_t n, std::size_t samples,
                              const std::vector<double>& epsilons, const RngStream& rng,
                              const Exec& exec) {
  require_dim(n, "orthogonality_tail");
  if (samples < 100) throw InvalidDimension("orthogonality_tail: samples must be >= 100");

  std::vector<double> ratio(samples), ident(samples);
  parallel_for(samples, exec, [&](std::size_t s) {
    RngStream sub = rng.substream(s);
    const DVector eta = gaussian_vector(n, sub);
    const DVector delta = gaussian_vector(n, sub);
    ratio[s] = dot(eta, delta) / static_cast<double>(n);
    ident[s] = dot_identity_error(eta, delta);
  });

  TailReport r;
  r.n = n;
  r.samples = samples;
  r.epsilons = epsilons;
  const double S = static_cast<double>(samples);
  const double N = static_cast<double>(n);
  for (double eps : epsilons) {
    std::size_t hits = 0;
    for (double x : ratio)
      if (std::abs(x) >= eps) ++hits;
    const double p = static_cast<double>(hits) / S;
    r.empirical_freq.push_back(p);
    r.std_error.push_back(std::sqrt(p * (1.0 - p) / S));
    r.paper_bound.push_back(std::sqrt(2.0) * std::exp(-2.0 * N * eps * eps));
    r.gaussian_ref.push_back(2.0 * normal_sf(eps * std::sqrt(N)));
  }
  r.sample_variance = std::pow(summarize(ratio).stddev, 2);
  for (double e : ident) {
    r.max_identity_error = std::max(r.max_identity_error, e);
    if (e > kIdentityTol) ++r.identity_failures;
  }
  return r;
}

// ---------------------------------------------------------------------------

std::string ensemble_csv(const CurvatureEnsemble& e) {
  CsvWriter csv({"sample", "mean_A", "mean_B", "mean_C", "mean_kplus", "mean_kminus",
                 "ktilde_plus", "ktilde_minus"});
  for (std::size_t s = 0; s < e.size(); ++s) {
    csv.row({static_cast<double>(s + 1), e.mean_A[s], e.mean_B[s], e.mean_C[s], e.mean_kplus[s],
             e.mean_kminus[s], e.ktilde_plus[s], e.ktilde_minus[s]});
  }
  return csv.str();
}

std::string histogram_csv(const Histogram& h) {
  CsvWriter csv({"bin_left", "bin_right", "count"});
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    csv.row({h.edges[b], h.edges[b + 1], static_cast<double>(h.counts[b])});
  return csv.str();
}

std::string tail_csv(const TailReport& r) {
  CsvWriter csv({"epsilon", "empirical", "stderr", "paper_bound", "gaussian_ref"});
  for (std::size_t i = 0; i < r.epsilons.size(); ++i)
    csv.row({r.epsilons[i], r.empirical_freq[i], r.std_error[i], r.paper_bound[i],
             r.gaussian_ref[i]});
  return csv.str();
}

namespace {

nlohmann::ordered_json run_header(const RunInfo& run) {
  nlohmann::ordered_json j;
  j["command"] = run.command;
  j["version"] = version_string();
  j["config"] = nlohmann::ordered_json::parse(run.config_json);
  j["seed"] = run.seed;
  return j;
}

nlohmann::ordered_json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"stddev", s.stddev}, {"stderr", s.std_error}};
}

nlohmann::ordered_json misid_json(const SaddleMisidResult& m) {
  return {{"samples", m.samples},
          {"p_same_sign", m.p_same_sign},
          {"stderr", m.std_error},
          {"p_opposite_sign", m.p_opposite_sign},
          {"p_same_sign_gaussian", m.p_same_sign_gaussian},
          {"p_same_sign_marginal", m.p_same_sign_marginal}};
}

nlohmann::ordered_json histogram_meta(const Histogram& h) {
  return {{"bins", h.counts.size()},
          {"edges", h.edges},
          {"underflow", h.underflow},
          {"overflow", h.overflow}};
}

nlohmann::ordered_json ensemble_stats(const CurvatureEnsemble& e) {
  const std::size_t last = e.size() - 1;
  return {{"samples", e.size()},
          {"A", summary_json(e.summary(&CurvatureSample::A))},
          {"B", summary_json(e.summary(&CurvatureSample::B))},
          {"C", summary_json(e.summary(&CurvatureSample::C))},
          {"kappa_plus", summary_json(e.summary(&CurvatureSample::kappa_plus))},
          {"kappa_minus", summary_json(e.summary(&CurvatureSample::kappa_minus))},
          {"ktilde_plus", e.ktilde_plus[last]},
          {"ktilde_minus", e.ktilde_minus[last]}};
}

}  // namespace

std::string ensemble_json(const CurvatureEnsemble& ensemble, const SaddleMisidResult& misid,
                          const CurvatureHistograms& hists, const RunInfo& run,
                          const std::string& loss_name) {
  auto j = run_header(run);
  j["loss"] = loss_name;
  j["ensemble"] = ensemble_stats(ensemble);
  j["misidentification"] = misid_json(misid);
  j["histograms"] = {{"kappa_plus", histogram_meta(hists.kappa_plus)},
                     {"kappa_minus", histogram_meta(hists.kappa_minus)}};
  return j.dump(2) + "\n";
}

std::string tail_json(const TailReport& r, const RunInfo& run) {
  auto j = run_header(run);
  j["n"] = r.n;
  j["samples"] = r.samples;
  j["sample_variance"] = r.sample_variance;
  j["expected_variance"] = 1.0 / static_cast<double>(r.n);
  j["max_identity_error"] = r.max_identity_error;
  j["identity_failures"] = r.identity_failures;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& bundle_keys() {
  static const std::vector<std::string> keys = {
      "ensemble_symmetric",    "ensemble_asymmetric",    "hist_symmetric_kplus",
      "hist_symmetric_kminus", "hist_asymmetric_kplus",  "hist_asymmetric_kminus",
      "trace_symmetric",       "trace_asymmetric",       "probabilities",
      "tail",                  "metadata"};
  return keys;
}

// Fixed stream ids keep each study's samples independent of which outputs
// are requested.
enum BundleStream : std::uint64_t {
  kEnsembleSym = 1,
  kEnsembleAsym = 2,
  kHistSym = 3,
  kHistAsym = 4,
  kTraceSym = 5,
  kTraceAsym = 6,
  kVisible = 7,
  kTail = 8,
};

}  // namespace

BundleConfig BundleConfig::defaults() {
  BundleConfig c;
  for (const auto& k : bundle_keys()) {
    c.outputs[k] = k + (k == "probabilities" || k == "metadata" ? ".json" : ".csv");
  }
  return c;
}

BundleConfig BundleConfig::from_json(const std::string& text) {
  BundleConfig c = defaults();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bundle config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("bundle config: expected a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      const auto& v = it.value();
      if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "n") c.n = v.get<std::size_t>();
      else if (key == "ntilde") c.ntilde = v.get<std::size_t>();
      else if (key == "ensemble_samples") c.ensemble_samples = v.get<std::size_t>();
      else if (key == "histogram_samples") c.histogram_samples = v.get<std::size_t>();
      else if (key == "histogram_bins") c.histogram_bins = v.get<std::size_t>();
      else if (key == "trace_samples") c.trace_samples = v.get<std::size_t>();
      else if (key == "half_width") c.half_width = v.get<double>();
      else if (key == "n_points") c.n_points = v.get<std::size_t>();
      else if (key == "visible_n") c.visible_n = v.get<std::size_t>();
      else if (key == "visible_ntilde") c.visible_ntilde = v.get<std::size_t>();
      else if (key == "visible_samples") c.visible_samples = v.get<std::size_t>();
      else if (key == "tail_dim") c.tail_dim = v.get<std::size_t>();
      else if (key == "tail_samples") c.tail_samples = v.get<std::size_t>();
      else if (key == "tail_epsilons") c.tail_epsilons = v.get<std::vector<double>>();
      else if (key == "outputs") {
        c.outputs = v.get<std::map<std::string, std::string>>();
        for (const auto& [k, file] : c.outputs) {
          if (std::find(bundle_keys().begin(), bundle_keys().end(), k) == bundle_keys().end()) {
            throw ParseError("bundle config: unknown output key '" + k + "'");
          }
          if (file.empty()) throw ParseError("bundle config: empty file name for '" + k + "'");
        }
      } else {
        throw ParseError("bundle config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bundle config: ") + e.what());
  }
  return c;
}

std::string BundleConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["n"] = n;
  j["ntilde"] = ntilde;
  j["ensemble_samples"] = ensemble_samples;
  j["histogram_samples"] = histogram_samples;
  j["histogram_bins"] = histogram_bins;
  j["trace_samples"] = trace_samples;
  j["half_width"] = half_width;
  j["n_points"] = n_points;
  j["visible_n"] = visible_n;
  j["visible_ntilde"] = visible_ntilde;
  j["visible_samples"] = visible_samples;
  j["tail_dim"] = tail_dim;
  j["tail_samples"] = tail_samples;
  j["tail_epsilons"] = tail_epsilons;
  j["outputs"] = outputs;
  return j.dump(2);
}

std::vector<std::string> study_bundle(const BundleConfig& config, const std::string& output_dir,
                                      const Exec& exec) {
  const auto wants = [&](const std::string& key) { return config.outputs.count(key) > 0; };
  const auto path_of = [&](const std::string& key) {
    return (std::filesystem::path(output_dir) / config.outputs.at(key)).string();
  };
  std::vector<std::string> written;
  const auto emit = [&](const std::string& key, const std::string& content) {
    const std::string p = path_of(key);
    write_text_file(p, content);
    written.push_back(p);
  };
  const RunInfo run{"bundle", config.to_json(), config.seed};

  const SymmetricSaddleLoss sym(config.n);
  const AsymmetricSaddleLoss asym(config.n, config.ntilde);
  const DVector sym_star = sym.critical_point();
  const DVector asym_star = asym.critical_point();

  if (wants("ensemble_symmetric")) {
    emit("ensemble_symmetric",
         ensemble_csv(curvature_ensemble(sym, sym_star, config.ensemble_samples,
                                         RngStream(config.seed, kEnsembleSym), exec)));
  }
  if (wants("ensemble_asymmetric")) {
    emit("ensemble_asymmetric",
         ensemble_csv(curvature_ensemble(asym, asym_star, config.ensemble_samples,
                                         RngStream(config.seed, kEnsembleAsym), exec)));
  }

  const bool need_hist_sym = wants("hist_symmetric_kplus") || wants("hist_symmetric_kminus") ||
                             wants("probabilities");
  const bool need_hist_asym = wants("hist_asymmetric_kplus") || wants("hist_asymmetric_kminus") ||
                              wants("probabilities");
  nlohmann::ordered_json probs;
  if (need_hist_sym) {
    const auto ens = curvature_ensemble(sym, sym_star, config.histogram_samples,
                                        RngStream(config.seed, kHistSym), exec);
    const auto h = curvature_histograms(ens, config.histogram_bins);
    if (wants("hist_symmetric_kplus")) emit("hist_symmetric_kplus", histogram_csv(h.kappa_plus));
    if (wants("hist_symmetric_kminus")) emit("hist_symmetric_kminus", histogram_csv(h.kappa_minus));
    probs["symmetric"] = misid_json(saddle_misid_probability(ens));
  }
  if (need_hist_asym) {
    const auto ens = curvature_ensemble(asym, asym_star, config.histogram_samples,
                                        RngStream(config.seed, kHistAsym), exec);
    const auto h = curvature_histograms(ens, config.histogram_bins);
    if (wants("hist_asymmetric_kplus")) emit("hist_asymmetric_kplus", histogram_csv(h.kappa_plus));
    if (wants("hist_asymmetric_kminus"))
      emit("hist_asymmetric_kminus", histogram_csv(h.kappa_minus));
    probs["asymmetric"] = misid_json(saddle_misid_probability(ens));
  }
  if (wants("probabilities")) {
    const AsymmetricSaddleLoss visible(config.visible_n, config.visible_ntilde);
    probs["visible_saddle"] =
        misid_json(saddle_misid_probability(visible, visible.critical_point(),
                                            config.visible_samples,
                                            RngStream(config.seed, kVisible), exec));
    auto j = run_header(run);
    j["probabilities"] = probs;
    emit("probabilities", j.dump(2) + "\n");
  }
  if (wants("trace_symmetric")) {
    emit("trace_symmetric",
         convergence_csv(paired_convergence(sym, sym_star, config.trace_samples,
                                            mix64(config.seed ^ kTraceSym), config.half_width,
                                            config.n_points, exec)));
  }
  if (wants("trace_asymmetric")) {
    emit("trace_asymmetric",
         convergence_csv(paired_convergence(asym, asym_star, config.trace_samples,
                                            mix64(config.seed ^ kTraceAsym), config.half_width,
                                            config.n_points, exec)));
  }
  if (wants("tail")) {
    emit("tail", tail_csv(orthogonality_tail(config.tail_dim, config.tail_samples,
                                             config.tail_epsilons,
                                             RngStream(config.seed, kTail), exec)));
  }
  if (wants("metadata")) {
    auto j = run_header(run);
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (const auto& [k, f] : config.outputs) files[k] = f;
    j["files"] = files;
    j["streams"] = {{"ensemble_symmetric", kEnsembleSym}, {"ensemble_asymmetric", kEnsembleAsym},
                    {"hist_symmetric", kHistSym},         {"hist_asymmetric", kHistAsym},
                    {"trace_symmetric", kTraceSym},       {"trace_asymmetric", kTraceAsym},
                    {"visible_saddle", kVisible},         {"tail", kTail}};
    emit("metadata", j.dump(2) + "\n");
  }
  return written;
}

}  // namespace curvlens

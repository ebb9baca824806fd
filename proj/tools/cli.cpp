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

#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "curvlens/errors.hpp"
#include "curvlens/experiments.hpp"
#include "curvlens/io.hpp"
#include "curvlens/projection.hpp"
#include "curvlens/spectral.hpp"
#include "curvlens/trace.hpp"
#include "loss_spec.hpp"

namespace curvlens::cli {

namespace {

struct Common {
  std::string loss;
  std::uint64_t seed = 1;
  std::string out;
  unsigned threads = 0;
  std::string point;
};

struct Range {
  double lo = -1.0;
  double hi = 1.0;
};

Range parse_range(const std::string& text, const char* flag) {
  // Split on the colon that follows the first number, so "-1:1" works.
  const auto colon = text.find(':', 1);
  if (colon == std::string::npos) {
    throw ParseError(std::string(flag) + ": expected min:max, got '" + text + "'");
  }
  try {
    std::size_t used = 0;
    Range r;
    r.lo = std::stod(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(text);
    const std::string rest = text.substr(colon + 1);
    r.hi = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    if (!(r.lo <= r.hi)) throw ParseError(std::string(flag) + ": min must not exceed max");
    return r;
  } catch (const std::logic_error&) {
    throw ParseError(std::string(flag) + ": expected min:max, got '" + text + "'");
  }
}

std::string output_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return ".";
}

std::string out_path(const Common& c, const std::string& file) {
  return (std::filesystem::path(output_dir(c)) / file).string();
}

/// Effective value of every option of `sub` except those that must not
/// influence output bytes (worker count, output location).
std::string config_echo(CLI::App* sub) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_name(false, true);
    std::string key = opt->get_single_name();
    if (key.empty() || key == "help" || key == "threads" || key == "out") continue;
    if (name.empty()) continue;
    const auto& res = opt->results();
    if (res.empty()) {
      j[key] = opt->get_default_str();
    } else if (res.size() == 1) {
      j[key] = res.front();
    } else {
      j[key] = res;
    }
  }
  return j.dump();
}

LanczosOptions lanczos_from(double tol, std::size_t max_iter, std::size_t krylov) {
  LanczosOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  o.krylov_dim = krylov;
  return o;
}

DVector resolve_point(const Common& c, const LoadedLoss& loaded) {
  if (c.point.empty()) return loaded.default_point;
  DVector p = read_vector_file(c.point);
  require_same_dim(static_cast<Eigen::Index>(loaded.loss->dim()), p.size(), "--point");
  return p;
}

void add_common(CLI::App* sub, Common& c, bool needs_loss) {
  auto* loss = sub->add_option("--loss", c.loss,
                               "Loss spec: symmetric:n=N | asymmetric:n=N,ntilde=M | "
                               "quadratic:diag=a;b;c | quadratic:diagfile=F | "
                               "mlp:ckpt=NET.json,data=DATA.csv");
  if (needs_loss) loss->required();
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--out", c.out,
                  std::string("Output directory (default: $") + kOutputDirEnv + " or .)");
  sub->add_option("--threads", c.threads, "Worker threads (0 = all cores)")
      ->capture_default_str();
  if (needs_loss) {
    sub->add_option("--point", c.point,
                    "Parameter vector file (default: critical point, zero, or checkpoint "
                    "weights)");
  }
}

struct SolverFlags {
  double tol = 1e-8;
  std::size_t max_iter = 10;
  std::size_t krylov = 200;
};

void add_solver_flags(CLI::App* sub, SolverFlags& f) {
  sub->add_option("--tol", f.tol, "Eigensolver residual tolerance (relative)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", f.max_iter, "Lanczos restarts")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--krylov", f.krylov, "Krylov dimension per restart")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

// ---------------------------------------------------------------------------

struct ProjectFlags {
  Common common;
  SolverFlags solver;
  std::string mode = "random";
  std::string alpha = "-1:1";
  std::string beta = "-1:1";
  std::size_t res = 51;
  std::string normalize = "auto";
};

int cmd_project(const ProjectFlags& f, CLI::App* sub, std::ostream& out, std::ostream& err) {
  const LoadedLoss loaded = load_loss(parse_loss_spec(f.common.loss));
  const LossFunction& loss = *loaded.loss;
  const DVector theta = resolve_point(f.common, loaded);
  const Exec exec{f.common.threads};

  const Range a = parse_range(f.alpha, "--alpha");
  const Range b = parse_range(f.beta, "--beta");
  GridSpec spec{a.lo, a.hi, b.lo, b.hi, f.res, f.res};

  int code = kExitOk;
  DirectionPair pair;
  std::optional<std::pair<double, double>> eigenvalues;
  if (f.mode == "hessian") {
    const HessianDirections hd = dominant_hessian_directions(
        loss, theta, lanczos_from(f.solver.tol, f.solver.max_iter, f.solver.krylov),
        RngStream(f.common.seed));
    if (!hd.opposite_sign_found) {
      err << "warning: no eigenvalue of opposite sign resolved (max " << hd.max_pair.value
          << ", min " << hd.min_pair.value << ")\n";
      code = kExitWarning;
    }
    pair = DirectionPair{hd.max_pair.vector, hd.min_pair.vector,
                         DirectionKind::HessianDirections, Normalization::None};
    eigenvalues = std::make_pair(hd.max_pair.value, hd.min_pair.value);
  } else {
    Normalization norm = Normalization::None;
    if (f.normalize == "layerwise" || (f.normalize == "auto" && loaded.layout)) {
      norm = Normalization::Layerwise;
    }
    RngStream rng(f.common.seed);
    pair = make_random_pair(theta, rng, norm,
                            loaded.layout ? loaded.layout : BlockLayout::single(loss.dim()));
  }

  GridResult grid = project_loss_grid(loss, theta, pair, spec, exec);
  grid.seeds = {f.common.seed};
  grid.eigenvalues = eigenvalues;
  grid.origin_hessian = projected_hessian(loss, theta, pair);

  const RunInfo run{"project", config_echo(sub), f.common.seed};
  export_grid(grid, run, out_path(f.common, "grid.csv"), out_path(f.common, "grid.json"));
  const CurvaturePair k = principal_curvatures_2d(*grid.origin_hessian);
  out << "grid " << grid.spec.n_alpha << "x" << grid.spec.n_beta << " written to "
      << out_path(f.common, "grid.csv") << "\n";
  out << "kappa_plus " << format_double(k.kappa_plus) << " kappa_minus "
      << format_double(k.kappa_minus) << "\n";
  if (eigenvalues) {
    out << "max_eigenvalue " << format_double(eigenvalues->first) << " min_eigenvalue "
        << format_double(eigenvalues->second) << "\n";
  }
  if (grid.nonfinite_count > 0) {
    err << "warning: " << grid.nonfinite_count << " grid points have non-finite loss\n";
  }
  return code;
}

// ---------------------------------------------------------------------------

struct TraceFlags {
  Common common;
  std::string method = "paired";
  std::string dist = "gaussian";
  std::size_t samples = 1000;
  double half_width = kDefaultHalfWidth;
  std::size_t points = kDefaultSlicePoints;
};

int cmd_trace(const TraceFlags& f, CLI::App* sub, std::ostream& out) {
  const LoadedLoss loaded = load_loss(parse_loss_spec(f.common.loss));
  const LossFunction& loss = *loaded.loss;
  const DVector theta = resolve_point(f.common, loaded);
  const Exec exec{f.common.threads};
  const RunInfo run{"trace", config_echo(sub), f.common.seed};
  const RngStream rng(f.common.seed);

  std::vector<TraceEstimate> estimates;
  if (f.method == "hutchinson") {
    estimates.push_back(hutchinson_trace(
        loss, theta, f.samples, rng,
        f.dist == "rademacher" ? ProbeDistribution::Rademacher : ProbeDistribution::Gaussian,
        exec));
  } else if (f.method == "slicefit") {
    estimates.push_back(
        slice_fit_trace(loss, theta, f.samples, rng, f.half_width, f.points, exec));
  } else {
    PairedConvergence pc =
        paired_convergence(loss, theta, f.samples, f.common.seed, f.half_width, f.points, exec);
    write_text_file(out_path(f.common, "convergence.csv"), convergence_csv(pc));
    estimates.push_back(std::move(pc.hutchinson));
    estimates.push_back(std::move(pc.slice_fit));
  }
  std::vector<const TraceEstimate*> ptrs;
  for (const auto& e : estimates) ptrs.push_back(&e);
  write_text_file(out_path(f.common, "trace.json"), trace_json(ptrs, run, loss.name()));
  for (const auto& e : estimates) {
    out << to_string(e.method) << " estimate " << format_double(e.estimate) << " stderr "
        << format_double(e.std_error) << " samples " << e.samples << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct HessdirsFlags {
  Common common;
  SolverFlags solver;
  bool write_vectors = false;
};

int cmd_hessdirs(const HessdirsFlags& f, CLI::App* sub, std::ostream& out, std::ostream& err) {
  const LoadedLoss loaded = load_loss(parse_loss_spec(f.common.loss));
  const LossFunction& loss = *loaded.loss;
  const DVector theta = resolve_point(f.common, loaded);
  const HessianDirections hd = dominant_hessian_directions(
      loss, theta, lanczos_from(f.solver.tol, f.solver.max_iter, f.solver.krylov),
      RngStream(f.common.seed));
  const RunInfo run{"hessdirs", config_echo(sub), f.common.seed};
  write_text_file(out_path(f.common, "hessdirs.json"), hessian_directions_json(hd, run, loss.name()));
  if (f.write_vectors) {
    write_text_file(out_path(f.common, "eigvec_max.csv"), vector_csv(hd.max_pair.vector));
    write_text_file(out_path(f.common, "eigvec_min.csv"), vector_csv(hd.min_pair.vector));
  }
  out << "max_eigenvalue " << format_double(hd.max_pair.value) << " residual "
      << format_double(hd.max_pair.residual) << "\n";
  out << "min_eigenvalue " << format_double(hd.min_pair.value) << " residual "
      << format_double(hd.min_pair.residual) << "\n";
  if (!hd.opposite_sign_found) {
    err << "warning: no eigenvalue of opposite sign resolved; the Hessian looks "
           "(semi)definite\n";
    return kExitWarning;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EnsembleFlags {
  Common common;
  std::size_t samples = 10000;
  std::size_t bins = kDefaultHistogramBins;
};

int cmd_ensemble(const EnsembleFlags& f, CLI::App* sub, std::ostream& out) {
  const LoadedLoss loaded = load_loss(parse_loss_spec(f.common.loss));
  const LossFunction& loss = *loaded.loss;
  const DVector theta = resolve_point(f.common, loaded);
  const CurvatureEnsemble ens = curvature_ensemble(loss, theta, f.samples,
                                                   RngStream(f.common.seed),
                                                   Exec{f.common.threads});
  const SaddleMisidResult misid = saddle_misid_probability(ens);
  const CurvatureHistograms hists = curvature_histograms(ens, f.bins);
  const RunInfo run{"ensemble", config_echo(sub), f.common.seed};

  write_text_file(out_path(f.common, "ensemble.csv"), ensemble_csv(ens));
  write_text_file(out_path(f.common, "hist_kplus.csv"), histogram_csv(hists.kappa_plus));
  write_text_file(out_path(f.common, "hist_kminus.csv"), histogram_csv(hists.kappa_minus));
  write_text_file(out_path(f.common, "ensemble.json"),
                  ensemble_json(ens, misid, hists, run, loss.name()));

  const std::size_t last = ens.size() - 1;
  out << "mean_A " << format_double(ens.mean_A[last]) << " mean_B "
      << format_double(ens.mean_B[last]) << " mean_C " << format_double(ens.mean_C[last]) << "\n";
  out << "mean_kplus " << format_double(ens.mean_kplus[last]) << " mean_kminus "
      << format_double(ens.mean_kminus[last]) << "\n";
  out << "ktilde_plus " << format_double(ens.ktilde_plus[last]) << " ktilde_minus "
      << format_double(ens.ktilde_minus[last]) << "\n";
  out << "p_same_sign " << format_double(misid.p_same_sign) << " stderr "
      << format_double(misid.std_error) << "\n";
  out << "p_same_sign_gaussian " << format_double(misid.p_same_sign_gaussian) << "\n";
  out << "p_opposite_sign " << format_double(misid.p_opposite_sign) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct OrthoFlags {
  Common common;
  std::size_t dim = 100;
  std::size_t samples = 100000;
  std::vector<double> eps;
};

int cmd_orthocheck(const OrthoFlags& f, CLI::App* sub, std::ostream& out) {
  std::vector<double> eps = f.eps;
  if (eps.empty()) eps.push_back(1.0 / std::sqrt(static_cast<double>(f.dim)));
  const TailReport report = orthogonality_tail(f.dim, f.samples, eps, RngStream(f.common.seed),
                                               Exec{f.common.threads});
  const RunInfo run{"orthocheck", config_echo(sub), f.common.seed};
  write_text_file(out_path(f.common, "tail.csv"), tail_csv(report));
  write_text_file(out_path(f.common, "tail.json"), tail_json(report, run));
  out << "sample_variance " << format_double(report.sample_variance) << " expected "
      << format_double(1.0 / static_cast<double>(f.dim)) << "\n";
  for (std::size_t i = 0; i < eps.size(); ++i) {
    out << "eps " << format_double(eps[i]) << " empirical " << format_double(report.empirical_freq[i])
        << " stderr " << format_double(report.std_error[i]) << " gaussian_ref "
        << format_double(report.gaussian_ref[i]) << " paper_bound "
        << format_double(report.paper_bound[i]) << "\n";
  }
  out << "max_identity_error " << format_double(report.max_identity_error) << "\n";
  return report.identity_failures == 0 ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------

struct BundleFlags {
  Common common;
  std::string config;
};

int cmd_bundle(const BundleFlags& f, std::ostream& out) {
  const BundleConfig cfg =
      f.config.empty() ? BundleConfig::defaults() : BundleConfig::from_json(read_text_file(f.config));
  const auto files = study_bundle(cfg, output_dir(f.common), Exec{f.common.threads});
  for (const auto& p : files) out << "wrote " << p << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"curvlens: curvature analysis of high-dimensional losses through low-dimensional "
               "projections"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  ProjectFlags project;
  auto* sp = app.add_subcommand("project", "Evaluate L(theta + a*eta + b*delta) on a grid");
  add_common(sp, project.common, true);
  add_solver_flags(sp, project.solver);
  sp->add_option("--mode", project.mode, "Directions: random or hessian")
      ->capture_default_str()
      ->check(CLI::IsMember({"random", "hessian"}));
  sp->add_option("--alpha", project.alpha, "alpha range min:max")->capture_default_str();
  sp->add_option("--beta", project.beta, "beta range min:max")->capture_default_str();
  sp->add_option("--res", project.res, "Grid points per axis")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sp->add_option("--normalize", project.normalize,
                 "Random-direction scaling: auto (layerwise for mlp), none, layerwise")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "none", "layerwise"}));

  TraceFlags trace;
  auto* st = app.add_subcommand("trace", "Estimate tr(H) by Hutchinson probes and slice fits");
  add_common(st, trace.common, true);
  st->add_option("--method", trace.method, "hutchinson, slicefit or paired")
      ->capture_default_str()
      ->check(CLI::IsMember({"hutchinson", "slicefit", "paired"}));
  st->add_option("--dist", trace.dist, "Hutchinson probe distribution: gaussian or rademacher")
      ->capture_default_str()
      ->check(CLI::IsMember({"gaussian", "rademacher"}));
  st->add_option("--samples", trace.samples, "Number of probes")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  st->add_option("--half-width", trace.half_width, "Slice interval [-h, h]")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  st->add_option("--points", trace.points, "Points per slice fit")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{3}, std::size_t{1} << 20));

  HessdirsFlags hessdirs;
  auto* sh = app.add_subcommand("hessdirs", "Dominant positive/negative Hessian eigenpairs");
  add_common(sh, hessdirs.common, true);
  add_solver_flags(sh, hessdirs.solver);
  sh->add_flag("--write-vectors", hessdirs.write_vectors,
               "Also write eigvec_max.csv and eigvec_min.csv");

  EnsembleFlags ensemble;
  auto* se = app.add_subcommand("ensemble", "Monte Carlo over random Gaussian direction pairs");
  add_common(se, ensemble.common, true);
  se->add_option("--samples", ensemble.samples, "Number of direction pairs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  se->add_option("--bins", ensemble.bins, "Histogram bins")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  OrthoFlags ortho;
  auto* so = app.add_subcommand("orthocheck", "Tail statistics of dot(eta, delta)/N");
  add_common(so, ortho.common, false);
  so->add_option("--dim", ortho.dim, "Dimension N")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  so->add_option("--samples", ortho.samples, "Number of pairs (>= 100)")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{100}, std::numeric_limits<std::size_t>::max()));
  so->add_option("--eps", ortho.eps, "Tail thresholds (default 1/sqrt(N))")->delimiter(',');

  BundleFlags bundle;
  auto* sb = app.add_subcommand("bundle", "Run the full set of ensemble/trace/tail studies");
  add_common(sb, bundle.common, false);
  sb->add_option("--config", bundle.config, "JSON config (default: built-in)")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << version_string() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (sp->parsed()) return cmd_project(project, sp, out, err);
    if (st->parsed()) return cmd_trace(trace, st, out);
    if (sh->parsed()) return cmd_hessdirs(hessdirs, sh, out, err);
    if (se->parsed()) return cmd_ensemble(ensemble, se, out);
    if (so->parsed()) return cmd_orthocheck(ortho, so, out);
    if (sb->parsed()) return cmd_bundle(bundle, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConvergenceError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const OperatorError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const FitError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const BreakdownError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const OracleLimitError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace curvlens::cli

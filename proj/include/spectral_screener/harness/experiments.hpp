#pragma once

// Monte Carlo experiments. Each experiment turns a config into one row per
// trial plus a JSON summary. Trial t (counted across the whole n / m list)
// draws from seed base_seed + t, so results do not depend on scheduling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectral_screener/error.hpp"
#include "spectral_screener/estimate.hpp"
#include "spectral_screener/fpca.hpp"
#include "spectral_screener/harness/calibrate.hpp"
#include "spectral_screener/harness/config.hpp"
#include "spectral_screener/harness/report.hpp"
#include "spectral_screener/harness/stats.hpp"
#include "spectral_screener/linalg.hpp"
#include "spectral_screener/models.hpp"
#include "spectral_screener/screen.hpp"

namespace spectral::harness {

struct ExperimentOutput {
  ReportSchema schema;
  std::vector<TrialReport> rows;
  json summary;

  std::string csv() const { return to_csv(schema, rows); }

  // Column `name` over all rows.
  std::vector<double> column(const std::string& name) const {
    const std::size_t idx = schema.column_index(name);
    std::vector<double> out;
    for (const auto& row : rows) out.push_back(row.values[idx]);
    return out;
  }

  double frequency(const std::string& flag) const { return summary.at("frequencies").at(flag).get<double>(); }
};

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs job(t) for t in [0, count) on a pool and returns results in index order.
template <typename Result, typename Job>
std::vector<Result> parallel_map(Index count, unsigned workers, Job job) {
  std::vector<Result> results(static_cast<std::size_t>(count));
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (Index t = next++; t < count; t = next++) {
      try {
        results[static_cast<std::size_t>(t)] = job(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const unsigned pool = std::min<unsigned>(workers, static_cast<unsigned>(std::max<Index>(count, 1)));
  if (pool <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (unsigned i = 0; i < pool; ++i) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

inline SampleMatrix draw_sample(const PopulationModel& model, SamplerKind sampler, Index n, std::uint64_t seed) {
  switch (sampler) {
    case SamplerKind::Gaussian: return sample_gaussian(model, n, seed);
    case SamplerKind::Rademacher: return sample_subgaussian_rotated(model, n, seed, ComponentLaw::Rademacher);
    case SamplerKind::Uniform: return sample_subgaussian_rotated(model, n, seed, ComponentLaw::Uniform);
  }
  throw InvalidArgument("unknown sampler");
}

namespace detail {

struct Plan {
  Index n = 0;
  Index m = 0;  // functional experiments only
  Index rep = 0;
};

// Trials ordered by n (then m), reps innermost.
inline std::vector<Plan> plan_trials(const ExperimentConfig& c, bool functional) {
  std::vector<Plan> out;
  const std::vector<Index> ms = functional ? c.model.m_list : std::vector<Index>{0};
  for (Index n : c.n_list)
    for (Index m : ms)
      for (Index r = 0; r < c.reps; ++r) out.push_back({n, m, r});
  return out;
}

inline double max_rel_error(const Vector& est, const Vector& truth, Index upto) {
  double out = 0.0;
  for (Index k = 0; k < upto; ++k) out = std::max(out, std::abs(est(k) / truth(k) - 1.0));
  return out;
}

inline double vector_error(const Vector& est, const Vector& truth) {
  return (align_sign(est, truth) - truth).norm();
}

inline json summarize(const ExperimentConfig& c, const ReportSchema& schema, const std::vector<TrialReport>& rows) {
  json s;
  s["experiment"] = schema.experiment;
  s["run_id"] = c.run_id;
  s["trials"] = rows.size();
  s["config"] = config_to_json(c);
  s["frequencies"] = json::object();
  for (const auto& [name, value] : flag_frequencies(schema, rows)) s["frequencies"][name] = value;
  s["constants_label"] =
      c.constants_ref ? "quantile calibration (stand-in for cross validation)" : "configured constants";
  return s;
}

// Per (n, p) flag frequencies and column medians.
inline json group_summary(const ReportSchema& schema, const std::vector<TrialReport>& rows,
                          const std::vector<std::string>& median_columns) {
  json groups = json::array();
  std::vector<std::pair<std::int64_t, std::int64_t>> keys;
  for (const auto& r : rows)
    if (std::find(keys.begin(), keys.end(), std::make_pair(r.n, r.p)) == keys.end()) keys.emplace_back(r.n, r.p);
  for (const auto& [n, p] : keys) {
    std::vector<TrialReport> sub;
    for (const auto& r : rows)
      if (r.n == n && r.p == p) sub.push_back(r);
    json g;
    g["n"] = n;
    g["p"] = p;
    g["trials"] = sub.size();
    g["frequencies"] = json::object();
    for (const auto& [name, value] : flag_frequencies(schema, sub)) g["frequencies"][name] = value;
    for (const auto& col : median_columns) {
      const std::size_t idx = schema.column_index(col);
      std::vector<double> vals;
      for (const auto& r : sub) vals.push_back(r.values[idx]);
      g["median_" + col] = median(vals);
    }
    groups.push_back(g);
  }
  return groups;
}

inline void require_population(const ExperimentConfig& c) {
  if (c.model.kind == "operator") {
    throw ConfigError("experiment " + to_string(c.experiment) + " needs a matrix model, not an operator");
  }
}

inline void require_operator(const ExperimentConfig& c) {
  if (c.model.kind != "operator") {
    throw ConfigError("experiment " + to_string(c.experiment) + " needs an operator model");
  }
}

// Grid and population spectrum of Sigma = K + sigma^2/m I, per m.
struct GridContext {
  Index m = 0;
  DesignGrid grid = DesignGrid::uniform(1);
  Vector population;
};

inline std::vector<GridContext> grid_contexts(const ExperimentConfig& c, const CovarianceOperator& op) {
  std::vector<GridContext> out;
  for (Index m : c.model.m_list) {
    GridContext g{m, DesignGrid::uniform(m, c.model.grid_offset), {}};
    g.population = eigvalsh(population_covariance(op, g.grid, c.model.sigma2));
    out.push_back(std::move(g));
  }
  return out;
}

inline const GridContext& context_for(const std::vector<GridContext>& ctx, Index m) {
  for (const auto& g : ctx)
    if (g.m == m) return g;
  throw InvalidArgument("no grid context for m = " + std::to_string(m));
}

}  // namespace detail

// ---------------------------------------------------------- matrix level ---

inline ExperimentOutput run_norm_bounds(const ExperimentConfig& c) {
  detail::require_population(c);
  const PopulationModel model = build_population(c.model);
  ReportSchema schema{"norm_bounds",
                      {"frob_err", "frob_bound", "op_err", "op_bound", "weyl_dev", "weyl_limit"},
                      {{"frob_ok", "frob_err", "<=", "frob_bound"},
                       {"op_ok", "op_err", "<=", "op_bound"},
                       {"weyl_ok", "weyl_dev", "<=", "weyl_limit"}}};
  const auto plan = detail::plan_trials(c, false);
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const ConstantsConfig k = resolve_constants(c, pl.n, model.dim());
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const SymmetricMatrix sn = sample_covariance(draw_sample(model, c.model.sampler, pl.n, seed));
    const SymmetricMatrix diff = sn - model.sigma;
    const double op_err = operator_norm(diff);
    const double weyl = (eigvalsh(sn) - model.true_spectrum).cwiseAbs().maxCoeff();
    return make_row(schema, t, seed, pl.n, model.dim(),
                    {frobenius_norm(diff), bounds::frobenius(model, pl.n, k), op_err, bounds::operator_norm(model, pl.n, k),
                     weyl, op_err * (1.0 + 1e-9) + 1e-14});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["groups"] = detail::group_summary(schema, out.rows, {"op_err", "frob_err"});
  if (c.n_list.size() >= 3) {
    std::vector<double> ns;
    std::vector<double> med;
    for (const auto& g : out.summary["groups"]) {
      ns.push_back(g["n"].get<double>());
      med.push_back(g["median_op_err"].get<double>());
    }
    const SlopeFit fit = slope_fit(ns, med);
    out.summary["op_err_slope"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}};
  }
  return out;
}

inline ExperimentOutput run_trace_bound(const ExperimentConfig& c) {
  detail::require_population(c);
  const PopulationModel model = build_population(c.model);
  ReportSchema schema{"trace_bound",
                      {"trace_err", "trace_bound", "eig_dev_over_p", "eig_dev_bound"},
                      {{"trace_ok", "trace_err", "<=", "trace_bound"},
                       {"eig_ok", "eig_dev_over_p", "<=", "eig_dev_bound"}}};
  const auto plan = detail::plan_trials(c, false);
  const double p = static_cast<double>(model.dim());
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const ConstantsConfig k = resolve_constants(c, pl.n, model.dim());
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const SymmetricMatrix sn = sample_covariance(draw_sample(model, c.model.sampler, pl.n, seed));
    const double dev = (eigvalsh(sn) - model.true_spectrum).cwiseAbs().maxCoeff();
    return make_row(schema, t, seed, pl.n, model.dim(),
                    {trace_relative_error(sn, model), bounds::trace_relative(pl.n, k), dev / p,
                     bounds::eigenvalue_absolute(model, pl.n, k) / p});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["groups"] = detail::group_summary(schema, out.rows, {"trace_err"});
  return out;
}

inline ExperimentOutput run_effrank_bound(const ExperimentConfig& c) {
  detail::require_population(c);
  const PopulationModel model = build_population(c.model);
  ReportSchema schema{"effrank_bound", {"effrank_err", "effrank_bound"},
                      {{"effrank_ok", "effrank_err", "<=", "effrank_bound"}}};
  const auto plan = detail::plan_trials(c, false);
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const ConstantsConfig k = resolve_constants(c, pl.n, model.dim());
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const SymmetricMatrix sn = sample_covariance(draw_sample(model, c.model.sampler, pl.n, seed));
    return make_row(schema, t, seed, pl.n, model.dim(),
                    {effrank_relative_error(sn, model), bounds::effrank_relative(model, pl.n, c.regime, k)});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["groups"] = detail::group_summary(schema, out.rows, {"effrank_err"});
  return out;
}

// Population jump condition for the minimal-level rule at index s.
inline bool minimal_jump_condition(const Vector& spectrum, Index s, double eta, double eps1, double Cj) {
  if (s < 1 || s >= spectrum.size()) return false;
  return spectrum(s - 1) >= (2.0 * (1.0 + eps1) / Cj + 1.0) * eta &&
         spectrum(s) < (2.0 * Cj * (1.0 - eps1) - 1.0) * eta;
}

inline ExperimentOutput run_jump_minimal(const ExperimentConfig& c) {
  detail::require_population(c);
  const PopulationModel model = build_population(c.model);
  const Index target = target_index(c.model);
  // C_lo / C_hi: the range of the master constant C for which this trial
  // would have returned the target (threshold 2 eta~ is linear in C).
  ReportSchema schema{"jump_minimal",
                      {"s_hat", "target", "threshold", "eta_tilde", "jump_condition", "C_used", "C_lo", "C_hi"},
                      {{"hit", "s_hat", "==", "target"}}};
  const auto plan = detail::plan_trials(c, false);
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const ConstantsConfig k = resolve_constants(c, pl.n, model.dim());
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const Vector eigs = eigvalsh(sample_covariance(draw_sample(model, c.model.sampler, pl.n, seed)));
    const JumpDecision d = detect_minimal_jump(eigs, pl.n, c.regime, k);
    const double eta = eta_theoretical(model, pl.n, c.regime, k);
    const bool cond = minimal_jump_condition(model.true_spectrum, target, eta, epsilon1(pl.n, k), k.regime_constant(c.regime));
    const double per_unit = k.C > 0.0 ? d.threshold / k.C : 0.0;
    double lo = 0.0;
    double hi = 0.0;
    if (target >= 1 && target < eigs.size() && per_unit > 0.0) {
      lo = eigs(target) / per_unit;
      hi = eigs(target - 1) / per_unit;
    }
    return make_row(schema, t, seed, pl.n, model.dim(),
                    {static_cast<double>(d.s_hat), static_cast<double>(target), d.threshold, d.noise_level,
                     cond ? 1.0 : 0.0, k.C, lo, hi});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["groups"] = detail::group_summary(schema, out.rows, {"s_hat", "threshold", "C_lo", "C_hi"});
  return out;
}

inline ExperimentOutput run_jump_poly(const ExperimentConfig& c) {
  detail::require_population(c);
  const PopulationModel model = build_population(c.model);
  const PolyDecayParams poly = poly_params(c.model);
  const Index target = target_index(c.model);
  ReportSchema schema{"jump_poly", {"s_hat", "target", "threshold", "eta_tilde", "c4l"},
                      {{"hit", "s_hat", "==", "target"}}};
  const auto plan = detail::plan_trials(c, false);
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const ConstantsConfig k = resolve_constants(c, pl.n, model.dim());
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const Vector eigs = eigvalsh(sample_covariance(draw_sample(model, c.model.sampler, pl.n, seed)));
    const JumpDecision d = detect_poly_jump(eigs, pl.n, poly, k);
    return make_row(schema, t, seed, pl.n, model.dim(),
                    {static_cast<double>(d.s_hat), static_cast<double>(target), d.threshold, d.noise_level,
                     k.c4l.value_or(c4l_from_lower_envelope(poly))});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["groups"] = detail::group_summary(schema, out.rows, {"s_hat", "threshold"});
  return out;
}

inline ExperimentOutput run_eigenvalue_select(const ExperimentConfig& c) {
  detail::require_population(c);
  const PopulationModel model = build_population(c.model);
  ReportSchema schema{"eigenvalue_select", {"K", "threshold", "max_rel_err", "alpha"},
                      {{"rel_ok", "max_rel_err", "<=", "alpha"}}};
  const auto plan = detail::plan_trials(c, false);
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const ConstantsConfig k = resolve_constants(c, pl.n, model.dim());
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const Vector eigs = eigvalsh(sample_covariance(draw_sample(model, c.model.sampler, pl.n, seed)));
    const SelectionResult r = select_eigenvalues(eigs, pl.n, c.regime, c.alpha, k);
    return make_row(schema, t, seed, pl.n, model.dim(),
                    {static_cast<double>(r.K), r.threshold, detail::max_rel_error(eigs, model.true_spectrum, r.K),
                     c.alpha});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["groups"] = detail::group_summary(schema, out.rows, {"K", "max_rel_err"});
  return out;
}

inline ExperimentOutput run_eigenvector_certify(const ExperimentConfig& c) {
  detail::require_population(c);
  const PopulationModel model = build_population(c.model);
  // gap_bound_excess = max_k (error_k - bound_k) over k <= min(n, p) with a
  // positive population gap, bound evaluated at eta_min = min(eta_1, eta_2).
  ReportSchema schema{"eigenvector_certify",
                      {"certified", "threshold", "max_cert_err", "alpha", "op_err", "eta_min", "gap_bound_excess"},
                      {{"cert_ok", "max_cert_err", "<=", "alpha"},
                       {"norm_event", "op_err", "<=", "eta_min"},
                       {"gap_bound_ok", "gap_bound_excess", "<=", "0"},
                       {"gap_bound_given_event", "norm_event", "implies", "gap_bound_ok"}}};
  const auto plan = detail::plan_trials(c, false);
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const ConstantsConfig k = resolve_constants(c, pl.n, model.dim());
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const SymmetricMatrix sn = sample_covariance(draw_sample(model, c.model.sampler, pl.n, seed));
    const SpectralDecomposition dec = eigh(sn);
    const SelectionResult r = certify_eigenvectors(dec, pl.n, c.regime, c.alpha, k);
    double max_cert = 0.0;
    for (Index idx : r.certified_vectors) {
      max_cert = std::max(max_cert, detail::vector_error(dec.eigenvector(idx - 1), model.true_eigenvectors.col(idx - 1)));
    }
    const double eta_min = std::min(eta_theoretical(model, pl.n, Regime::One, k), eta_theoretical(model, pl.n, Regime::Two, k));
    double excess = -std::numeric_limits<double>::infinity();
    for (Index q = 1; q <= std::min(pl.n, model.dim()); ++q) {
      const double bound = eigenvector_error_bound(model, q, eta_min);
      if (!std::isfinite(bound)) continue;
      const double err = detail::vector_error(dec.eigenvector(q - 1), model.true_eigenvectors.col(q - 1));
      excess = std::max(excess, err - bound);
    }
    return make_row(schema, t, seed, pl.n, model.dim(),
                    {static_cast<double>(r.certified_vectors.size()), r.threshold, max_cert, c.alpha,
                     operator_norm(sn - model.sigma), eta_min, excess});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["groups"] = detail::group_summary(schema, out.rows, {"certified", "max_cert_err"});
  return out;
}

inline ExperimentOutput run_combined_poly(const ExperimentConfig& c) {
  detail::require_population(c);
  const PopulationModel model = build_population(c.model);
  const PolyDecayParams poly = poly_params(c.model);
  ReportSchema schema{"combined_poly",
                      {"K", "threshold", "max_vec_err", "max_rel_err", "alpha", "alpha_third"},
                      {{"vec_ok", "max_vec_err", "<=", "alpha"},
                       {"val_ok", "max_rel_err", "<=", "alpha_third"},
                       {"both_ok", "vec_ok", "and", "val_ok"}}};
  const auto plan = detail::plan_trials(c, false);
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const ConstantsConfig k = resolve_constants(c, pl.n, model.dim());
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const SymmetricMatrix sn = sample_covariance(draw_sample(model, c.model.sampler, pl.n, seed));
    const SpectralDecomposition dec = eigh(sn);
    const SelectionResult r = select_combined_poly(dec.eigenvalues, pl.n, poly, c.alpha, k);
    double vec = 0.0;
    for (Index idx : r.certified_vectors) {
      vec = std::max(vec, detail::vector_error(dec.eigenvector(idx - 1), model.true_eigenvectors.col(idx - 1)));
    }
    return make_row(schema, t, seed, pl.n, model.dim(),
                    {static_cast<double>(r.K), r.threshold, vec,
                     detail::max_rel_error(dec.eigenvalues, model.true_spectrum, r.K), c.alpha, c.alpha / 3.0});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["groups"] = detail::group_summary(schema, out.rows, {"K", "max_vec_err"});
  return out;
}

// ------------------------------------------------------------- functional ---

// Deterministic: one row per m; n is unused and recorded as 0.
inline ExperimentOutput run_fpca_approx(const ExperimentConfig& c) {
  detail::require_operator(c);
  const CovarianceOperator op = build_operator(c.model);
  ReportSchema schema{"fpca_approx",
                      {"eig_dev", "trace_dev", "vec_dev", "gram_dev", "c7l", "c8l", "eig_bound", "validity_ok"},
                      {{"eig_within_bound", "eig_dev", "<=", "eig_bound"}}};
  const auto& ms = c.model.m_list;
  auto rows = parallel_map<TrialReport>(static_cast<Index>(ms.size()), resolve_workers(c.workers), [&](Index t) {
    const Index m = ms[static_cast<std::size_t>(t)];
    const DesignGrid grid = DesignGrid::uniform(m, c.model.grid_offset);
    const ConstantsConfig k = resolve_constants(c, c.n_list.front(), m);
    const ApproximationReport rep = approximation_report(op, grid, std::min(c.model.depth, m), k);
    return make_row(schema, t, c.base_seed + static_cast<std::uint64_t>(t), 0, m,
                    {rep.eigenvalue_deviation, rep.trace_deviation, rep.eigenvector_deviation, rep.gram_deviation,
                     rep.c7l, rep.c8l, rep.eigenvalue_bound, rep.validity_ok ? 1.0 : 0.0});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["approx_exponent"] = op.decay.approx_exponent();
  if (ms.size() >= 3) {
    std::vector<double> xs(ms.begin(), ms.end());
    for (const std::string col : {"eig_dev", "trace_dev", "gram_dev"}) {
      const auto ys = out.column(col);
      if (std::all_of(ys.begin(), ys.end(), [](double v) { return v > 0.0; })) {
        const SlopeFit fit = slope_fit(xs, ys);
        out.summary["slopes"][col] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}};
      } else {
        out.summary["slopes"][col] = nullptr;
      }
    }
  }
  return out;
}

inline ExperimentOutput run_fpca_jump(const ExperimentConfig& c) {
  detail::require_operator(c);
  const CovarianceOperator op = build_operator(c.model);
  const Index target = target_index(c.model);
  ReportSchema schema{"fpca_jump",
                      {"s_hat", "target", "threshold", "eta_tilde", "c4l", "jump_condition"},
                      {{"hit", "s_hat", "==", "target"}}};
  const auto plan = detail::plan_trials(c, true);
  const auto contexts = detail::grid_contexts(c, op);
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const detail::GridContext& ctx = detail::context_for(contexts, pl.m);
    const DesignGrid& grid = ctx.grid;
    const ConstantsConfig k = resolve_constants(c, pl.n, pl.m);
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const FunctionalSample sample = simulate_trajectories(op, nullptr, c.model.sigma2, pl.n, grid, seed);
    const Vector eigs = eigvalsh(scaled_sample_covariance(sample));
    const JumpDecision d = detect_operator_jump(eigs, pl.n, op, k);
    const double c4l = k.c4l.value_or(operator_c4l(op));
    const Vector& pop = ctx.population;
    const double eta2 = noise_level(operator_norm(pop), effective_rank(pop), pl.n, pl.m, Regime::Two, k.C);
    const double c7l = k.c7l.value_or(gram_deviation(op, grid, std::max<Index>(eigenvector_depth(pl.m, op.decay), 2)).fitted_c7l);
    const bool cond = target >= 1 && operator_jump_condition(op, target, pl.m, c.model.sigma2, eta2, epsilon1(pl.n, k), c4l,
                                                             c8l(op, c7l, k.lambda0));
    return make_row(schema, t, seed, pl.n, pl.m,
                    {static_cast<double>(d.s_hat), static_cast<double>(target), d.threshold, d.noise_level, c4l,
                     cond ? 1.0 : 0.0});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["groups"] = detail::group_summary(schema, out.rows, {"s_hat", "threshold"});
  return out;
}

inline ExperimentOutput run_fpca_select(const ExperimentConfig& c) {
  detail::require_operator(c);
  const CovarianceOperator op = build_operator(c.model);
  // Noise-level chain: eig_event_dev = max_k |lambda^_k - lambda_k(Sigma)|,
  // fpca_dev = max_k |lambda^_k - rho_k|, eta_f_theory = C10 (eta_2 + m^e).
  ReportSchema schema{"fpca_select",
                      {"K_op", "certified", "depth_cap", "eta_f", "eta_op", "max_cert_err", "alpha", "eig_event_dev",
                       "eta2", "fpca_dev", "eta_f_theory"},
                      {{"cert_ok", "max_cert_err", "<=", "alpha"},
                       {"cap_ok", "certified", "<=", "depth_cap"},
                       {"eig_event", "eig_event_dev", "<=", "eta2"},
                       {"fpca_bound_ok", "fpca_dev", "<=", "eta_f_theory"},
                       {"fpca_bound_given_event", "eig_event", "implies", "fpca_bound_ok"}}};
  const auto plan = detail::plan_trials(c, true);
  const auto contexts = detail::grid_contexts(c, op);
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const detail::GridContext& ctx = detail::context_for(contexts, pl.m);
    const DesignGrid& grid = ctx.grid;
    const ConstantsConfig k = resolve_constants(c, pl.n, pl.m);
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const FunctionalSample sample = simulate_trajectories(op, nullptr, c.model.sigma2, pl.n, grid, seed);
    const SymmetricMatrix sn = scaled_sample_covariance(sample);
    const Vector eigs = eigvalsh(sn);
    const OperatorSelection sel = select_operator_eigen(eigs, pl.n, op, grid, c.alpha, k);

    double max_cert = 0.0;
    if (!sel.selection.certified_vectors.empty()) {
      const SpectralDecomposition dec = eigh(sn);
      for (Index idx : sel.selection.certified_vectors) {
        const Vector phi = phi_vector(op, idx, grid);
        const Vector psi = align_sign(dec.eigenvector(idx - 1), phi / phi.norm());
        max_cert = std::max(max_cert, (psi - phi).norm());
      }
    }
    const Vector& pop = ctx.population;
    const double eta2 = noise_level(operator_norm(pop), effective_rank(pop), pl.n, pl.m, Regime::Two, k.C);
    double fpca_dev = 0.0;
    for (Index q = 1; q <= pl.m; ++q) fpca_dev = std::max(fpca_dev, std::abs(eigs(q - 1) - op.eigenvalue(q)));
    const double eta_f_theory =
        sel.c10l * (eta2 + std::pow(static_cast<double>(pl.m), op.decay.approx_exponent()));
    return make_row(schema, t, seed, pl.n, pl.m,
                    {static_cast<double>(sel.selection.K), static_cast<double>(sel.selection.certified_vectors.size()),
                     static_cast<double>(sel.depth_cap), sel.eta_f, sel.eta_op, max_cert, c.alpha,
                     (eigs - pop).cwiseAbs().maxCoeff(), eta2, fpca_dev, eta_f_theory});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["groups"] = detail::group_summary(schema, out.rows, {"K_op", "certified", "eta_op"});
  return out;
}

// ----------------------------------------------------------- calibration ---

// Calibrates (c1, C) for every n in the list and writes the sidecar entries.
inline ExperimentOutput run_calibrate(const ExperimentConfig& c, bool write = true) {
  detail::require_population(c);
  const PopulationModel model = build_population(c.model);
  ReportSchema schema{"calibrate", {"trace_err", "op_ratio"}, {}};
  for (Index n : c.n_list) {
    if (c.reps < min_calibration_reps(n)) {
      throw ConfigError("calibrate: reps = " + std::to_string(c.reps) + " is too small at n = " + std::to_string(n) +
                        "; need at least " + std::to_string(min_calibration_reps(n)));
    }
  }
  const auto plan = detail::plan_trials(c, false);
  auto rows = parallel_map<TrialReport>(static_cast<Index>(plan.size()), resolve_workers(c.workers), [&](Index t) {
    const auto& pl = plan[static_cast<std::size_t>(t)];
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(t);
    const SymmetricMatrix sn = sample_covariance(draw_sample(model, c.model.sampler, pl.n, seed));
    const CalibrationSample s = calibration_sample(sn, model, pl.n);
    return make_row(schema, t, seed, pl.n, model.dim(), {s.trace_error, s.op_ratio});
  });
  ExperimentOutput out{schema, std::move(rows), {}};
  out.summary = detail::summarize(c, schema, out.rows);
  out.summary["entries"] = json::array();
  for (Index n : c.n_list) {
    std::vector<CalibrationSample> samples;
    for (const auto& r : out.rows)
      if (r.n == n) samples.push_back({r.values[0], r.values[1]});
    const CalibrationEntry e = calibrate_from_samples(samples, model, c.model.kind, n);
    out.summary["entries"].push_back(to_json(e));
    if (write) write_sidecar(c.resolved_calibration_dir(), c.run_id, e);
  }
  return out;
}

// --------------------------------------------------------------- dispatch ---

inline ExperimentOutput run_experiment(const ExperimentConfig& c) {
  c.validate();
  switch (c.experiment) {
    case Experiment::NormBounds: return run_norm_bounds(c);
    case Experiment::TraceBound: return run_trace_bound(c);
    case Experiment::EffRankBound: return run_effrank_bound(c);
    case Experiment::JumpMinimal: return run_jump_minimal(c);
    case Experiment::JumpPoly: return run_jump_poly(c);
    case Experiment::EigenvalueSelect: return run_eigenvalue_select(c);
    case Experiment::EigenvectorCertify: return run_eigenvector_certify(c);
    case Experiment::CombinedPoly: return run_combined_poly(c);
    case Experiment::FpcaApprox: return run_fpca_approx(c);
    case Experiment::FpcaJump: return run_fpca_jump(c);
    case Experiment::FpcaSelect: return run_fpca_select(c);
    case Experiment::Calibrate: return run_calibrate(c);
  }
  throw ConfigError("unknown experiment");
}

struct RunFiles {
  std::string csv_path;
  std::string summary_path;
};

inline std::string file_stem(const ExperimentConfig& c) { return c.output_dir + "/" + to_string(c.experiment) + "-" + c.run_id; }

// Runs the experiment and writes <out>/<experiment>-<run-id>.csv and .summary.json.
inline RunFiles run(const ExperimentConfig& c, ExperimentOutput* output = nullptr) {
  ExperimentOutput result = run_experiment(c);
  std::error_code ec;
  std::filesystem::create_directories(c.output_dir, ec);
  RunFiles files{file_stem(c) + ".csv", file_stem(c) + ".summary.json"};
  std::ofstream csv(files.csv_path, std::ios::binary);
  std::ofstream js(files.summary_path, std::ios::binary);
  if (!csv || !js) throw ConfigError("output directory " + c.output_dir + " is not writable");
  csv << result.csv();
  js << result.summary.dump(2) << '\n';
  if (output != nullptr) *output = std::move(result);
  return files;
}

// Flags whose frequency falls below the configured minimum.
inline std::vector<std::string> assertion_failures(const ExperimentConfig& c, const ExperimentOutput& out) {
  std::vector<std::string> failures;
  const json& freq = out.summary.at("frequencies");
  if (c.assertions.empty()) {
    for (const auto& [name, value] : freq.items())
      if (value.get<double>() < 1.0) failures.push_back(name + " = " + value.dump() + " < 1");
    return failures;
  }
  for (const auto& [name, minimum] : c.assertions) {
    if (!freq.contains(name)) {
      failures.push_back(name + ": no such flag");
    } else if (freq.at(name).get<double>() < minimum) {
      failures.push_back(name + " = " + freq.at(name).dump() + " < " + json(minimum).dump());
    }
  }
  return failures;
}

}  // namespace spectral::harness

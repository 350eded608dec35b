#pragma once

// Quantile calibration of c1 and C on a model with known Sigma.
//
//   c1 = q_{1-5/n}(|tr S_n - tr S| / tr S) / (4 sqrt(ln n / n))
//   C  = q_{1-4/n}(||S_n - S||_2 / (||S||_2 max{sqrt(r ln(pn)/n), r ln(pn)/n}))

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "spectral_screener/error.hpp"
#include "spectral_screener/estimate.hpp"
#include "spectral_screener/harness/config.hpp"
#include "spectral_screener/harness/stats.hpp"
#include "spectral_screener/models.hpp"

namespace spectral::harness {

inline double c1_level(Index n) { return 1.0 - 5.0 / static_cast<double>(n); }
inline double C_level(Index n) { return 1.0 - 4.0 / static_cast<double>(n); }

// Enough trials that the upper tail beyond the C quantile holds at least one draw.
inline Index min_calibration_reps(Index n) { return static_cast<Index>(std::ceil(static_cast<double>(n) / 4.0)); }

struct CalibrationSample {
  double trace_error = 0.0;  // relative trace error
  double op_ratio = 0.0;     // operator error over its bound shape
};

inline CalibrationSample calibration_sample(const SymmetricMatrix& sigma_n, const PopulationModel& model, Index n) {
  CalibrationSample s;
  s.trace_error = trace_relative_error(sigma_n, model);
  const double shape = model.operator_norm() * bounds::operator_rate(model.effective_rank(), n, model.dim());
  s.op_ratio = operator_norm(sigma_n - model.sigma) / shape;
  return s;
}

inline double c1_from_trace_errors(const std::vector<double>& errors, Index n, double level) {
  return quantile(errors, level) / (4.0 * std::sqrt(std::log(static_cast<double>(n)) / static_cast<double>(n)));
}

inline CalibrationEntry calibrate_from_samples(const std::vector<CalibrationSample>& samples,
                                               const PopulationModel& model, const std::string& kind, Index n) {
  if (samples.empty()) throw InvalidArgument("calibrate: no samples");
  std::vector<double> trace;
  std::vector<double> ratio;
  for (const auto& s : samples) {
    trace.push_back(s.trace_error);
    ratio.push_back(s.op_ratio);
  }
  CalibrationEntry e;
  e.model_kind = kind;
  e.n = n;
  e.p = model.dim();
  e.reps = static_cast<Index>(samples.size());
  e.level_c1 = c1_level(n);
  e.level_C = C_level(n);
  e.c1 = c1_from_trace_errors(trace, n, e.level_c1);
  e.C = quantile(ratio, e.level_C);
  return e;
}

// Runs `reps` trials; `sigma_n_of_trial(t)` returns the sample covariance of trial t.
inline CalibrationEntry calibrate_with(const PopulationModel& model, const std::string& kind, Index n, Index reps,
                                       const std::function<SymmetricMatrix(Index)>& sigma_n_of_trial) {
  if (reps < min_calibration_reps(n)) {
    throw ConfigError("calibrate: reps = " + std::to_string(reps) + " is too small for the 1-4/n quantile at n = " +
                      std::to_string(n) + "; need at least " + std::to_string(min_calibration_reps(n)));
  }
  std::vector<CalibrationSample> samples;
  samples.reserve(static_cast<std::size_t>(reps));
  for (Index t = 0; t < reps; ++t) samples.push_back(calibration_sample(sigma_n_of_trial(t), model, n));
  return calibrate_from_samples(samples, model, kind, n);
}

}  // namespace spectral::harness

#pragma once

// Sample covariance estimation, the theoretical and plug-in noise levels, the
// calibration constants they depend on, and reduced-effective-rank class
// checks.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "spectral_screener/error.hpp"
#include "spectral_screener/linalg.hpp"
#include "spectral_screener/models.hpp"

namespace spectral {

// Selects eta_1 / P_1 (p polynomial in n) or eta_2 / P_2 (any p).
enum class Regime { One = 1, Two = 2 };

inline int to_int(Regime regime) { return static_cast<int>(regime); }

inline Regime regime_from_int(int j) {
  if (j == 1) return Regime::One;
  if (j == 2) return Regime::Two;
  throw InvalidArgument("regime must be 1 or 2, got " + std::to_string(j));
}

// Absolute constants that the bounds leave unspecified. Defaults are
// placeholders; experiments load calibrated values.
struct ConstantsConfig {
  enum class Source { Default, Calibrated };
  // Which operator quantity multiplies 13 C7 in the C8 closed form.
  enum class Lambda0Reading { Rho0, Rho1 };

  double C = 1.0;                       // master constant of eta_1 / eta_2
  double c0 = std::numbers::pi / 2.0;   // sub-Gaussian moment constant (Gaussian value)
  double c1 = 0.5;                      // concentration constant in epsilon_1
  double C1_regime = 0.9;
  double C2_regime = 1.0;
  std::optional<double> c3;             // only used for the regime-1 side condition
  std::optional<double> c4l;            // poly-jump constant; derived from the model when empty
  std::string c4l_formula = "derived";  // which closed form produced c4l
  double gamma = 2.0;                   // P_1 growth clause p <= n^gamma
  std::optional<double> c7l;            // Gram deviation constant (fitted when empty)
  std::optional<double> c9l;            // trace approximation constant
  std::optional<double> c10l;           // fPCA noise-level constant; defaults to C8
  Lambda0Reading lambda0 = Lambda0Reading::Rho0;
  Source source = Source::Default;
  std::string run_id;

  double regime_constant(Regime regime) const {
    return regime == Regime::One ? C1_regime : C2_regime;
  }

  void validate() const {
    const auto nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
    if (!nonneg(C) || !nonneg(c0) || !nonneg(c1) || !nonneg(gamma)) {
      throw ConfigError("constants: C, c0, c1, gamma must be finite and nonnegative");
    }
    if (!(C1_regime > 0.0 && C1_regime <= 1.0) || !(C2_regime > 0.0 && C2_regime <= 1.0)) {
      throw ConfigError("constants: regime constants must lie in (0, 1]");
    }
    for (const auto& opt : {c3, c4l, c7l, c9l, c10l}) {
      if (opt && !(*opt > 0.0 && std::isfinite(*opt))) {
        throw ConfigError("constants: optional constants must be positive when set");
      }
    }
  }
};

inline SymmetricMatrix sample_covariance(const Matrix& rows) {
  const Index n = rows.rows();
  if (n < 2) throw InvalidArgument("sample_covariance: n must be >= 2");
  const Matrix centered = rows.rowwise() - rows.colwise().mean();
  Matrix out = Matrix::Zero(rows.cols(), rows.cols());
  out.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / static_cast<double>(n));
  return SymmetricMatrix::from_lower(std::move(out));
}

// Sigma_n = n^-1 sum (X_i - Xbar)(X_i - Xbar)'. Divisor n, not n - 1.
inline SymmetricMatrix sample_covariance(const SampleMatrix& data) { return sample_covariance(data.rows()); }

inline double log_ratio_root(double log_term, Index n) {
  return std::sqrt(log_term / static_cast<double>(n));
}

// eta_1 = C ||S|| sqrt(r_e) sqrt(ln(pn)/n);  eta_2 = C ||S|| r_e sqrt(ln n / n).
inline double noise_level(double op_norm, double eff_rank, Index n, Index p, Regime regime, double C) {
  if (n < 2) throw InvalidArgument("noise_level: n must be >= 2");
  const double dn = static_cast<double>(n);
  if (regime == Regime::One) {
    return C * op_norm * std::sqrt(eff_rank) * log_ratio_root(std::log(static_cast<double>(p) * dn), n);
  }
  return C * op_norm * eff_rank * log_ratio_root(std::log(dn), n);
}

inline double eta_theoretical(const PopulationModel& model, Index n, Regime regime,
                              const ConstantsConfig& consts) {
  return noise_level(model.operator_norm(), model.effective_rank(), n, model.dim(), regime, consts.C);
}

// Plug-in level from a descending sample spectrum.
inline double eta_empirical(const Vector& sample_eigenvalues, Index n, Regime regime,
                            const ConstantsConfig& consts) {
  const double norm = operator_norm(sample_eigenvalues);
  if (norm == 0.0) throw DegenerateInput("eta_empirical: zero sample covariance");
  return noise_level(norm, effective_rank(sample_eigenvalues), n, sample_eigenvalues.size(), regime,
                     consts.C);
}

inline double eta_empirical(const SymmetricMatrix& sigma_n, Index n, Regime regime,
                            const ConstantsConfig& consts) {
  return eta_empirical(eigvalsh(sigma_n), n, regime, consts);
}

// epsilon_1 = 4 c1 sqrt(ln n / n). Every downstream threshold divides by
// (1 - epsilon_1), so values >= 1 are rejected.
inline double epsilon1(Index n, const ConstantsConfig& consts) {
  if (n < 2) throw InvalidArgument("epsilon1: n must be >= 2");
  const double eps = 4.0 * consts.c1 * log_ratio_root(std::log(static_cast<double>(n)), n);
  if (eps >= 1.0) {
    throw SampleTooSmall("epsilon1 = " + std::to_string(eps) + " >= 1: sample too small for calibrated c1");
  }
  return eps;
}

// Membership in P_1(eps) / P_2(eps) with the implicit constant set to 1.
// Regime 1 also requires p <= n^gamma.
inline bool class_membership(double eff_rank, Index n, Index p, double eps, Regime regime, double gamma = 2.0) {
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidArgument("class_membership: eps must lie in (0, 1]");
  if (n < 2) throw InvalidArgument("class_membership: n must be >= 2");
  const double dn = static_cast<double>(n);
  const double dp = static_cast<double>(p);
  if (regime == Regime::One) {
    return eff_rank <= eps * dn / std::log(dp * dn) && dp <= std::pow(dn, gamma);
  }
  return eff_rank <= eps * std::sqrt(dn / std::log(dn));
}

inline bool class_membership(const PopulationModel& model, Index n, double eps, Regime regime,
                             double gamma = 2.0) {
  return class_membership(model.effective_rank(), n, model.dim(), eps, regime, gamma);
}

// |tr Sigma_n - tr Sigma| / tr Sigma.
inline double trace_relative_error(const SymmetricMatrix& sigma_n, const PopulationModel& model) {
  const double tr = model.trace();
  if (!(tr > 0.0)) throw DegenerateInput("trace_relative_error: model trace must be positive");
  return std::abs(trace(sigma_n) - tr) / tr;
}

// |r_e(Sigma_n) / r_e(Sigma) - 1|.
inline double effrank_relative_error(const Vector& sample_eigenvalues, const PopulationModel& model) {
  return std::abs(effective_rank(sample_eigenvalues) / model.effective_rank() - 1.0);
}

inline double effrank_relative_error(const SymmetricMatrix& sigma_n, const PopulationModel& model) {
  return effrank_relative_error(eigvalsh(sigma_n), model);
}

// Right-hand sides of the concentration bounds, evaluated at the true Sigma.
namespace bounds {

// Frobenius bound 2 c1 ||Sigma|| r_e sqrt(ln n / n).
inline double frobenius(const PopulationModel& model, Index n, const ConstantsConfig& consts) {
  return 2.0 * consts.c1 * model.operator_norm() * model.effective_rank() *
         log_ratio_root(std::log(static_cast<double>(n)), n);
}

// max{ sqrt(r_e ln(pn)/n), r_e ln(pn)/n }, the shape of the operator-norm bound.
inline double operator_rate(double eff_rank, Index n, Index p) {
  const double t = eff_rank * std::log(static_cast<double>(p) * static_cast<double>(n)) /
                   static_cast<double>(n);
  return std::max(std::sqrt(t), t);
}

// C ||Sigma|| max{...}; C stands in for 1 + c1 + c3.
inline double operator_norm(const PopulationModel& model, Index n, const ConstantsConfig& consts) {
  return consts.C * model.operator_norm() * operator_rate(model.effective_rank(), n, model.dim());
}

// Relative trace bound 4 c1 sqrt(ln n / n).
inline double trace_relative(Index n, const ConstantsConfig& consts) {
  return 4.0 * consts.c1 * log_ratio_root(std::log(static_cast<double>(n)), n);
}

// Order of the relative effective-rank error: max{sqrt(r_e ln(pn)/(2n)), r_e ln(pn)/n}
// in regime 1 and r_e ln n / n in regime 2, scaled by C.
inline double effrank_relative(const PopulationModel& model, Index n, Regime regime,
                               const ConstantsConfig& consts) {
  const double re = model.effective_rank();
  const double dn = static_cast<double>(n);
  if (regime == Regime::One) {
    const double t = re * std::log(static_cast<double>(model.dim()) * dn) / dn;
    return consts.C * std::max(std::sqrt(t / 2.0), t);
  }
  return consts.C * re * std::log(dn) / dn;
}

// Eigenvalue bound on the unscaled spectrum: 2 c1 tr(Sigma) sqrt(ln n / n).
inline double eigenvalue_absolute(const PopulationModel& model, Index n, const ConstantsConfig& consts) {
  return 2.0 * consts.c1 * model.trace() * log_ratio_root(std::log(static_cast<double>(n)), n);
}

}  // namespace bounds

}  // namespace spectral

#pragma once

// Scree-plot decision rules: jump detection at the minimal noise level and
// under polynomial decay, eigenvalue selection, eigenvector gap
// certification, and the combined polynomial-decay selector.
//
// Rules are scale-agnostic; callers pass the spectrum on whatever scale the
// noise level was computed on (the factor model is stored as Sigma / p).
// Eigenvalue indices in results are 1-based, matching the scree plot.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "spectral_screener/error.hpp"
#include "spectral_screener/estimate.hpp"
#include "spectral_screener/linalg.hpp"
#include "spectral_screener/models.hpp"

namespace spectral {

enum class JumpRule { MinimalJump, PolyJump, OperatorJump };
enum class SelectionRule { EigenvalueK, GapCertified, CombinedKev, OperatorKop };

inline const char* to_string(JumpRule rule) {
  switch (rule) {
    case JumpRule::MinimalJump: return "minimal_jump";
    case JumpRule::PolyJump: return "poly_jump";
    case JumpRule::OperatorJump: return "operator_jump";
  }
  return "unknown";
}

inline const char* to_string(SelectionRule rule) {
  switch (rule) {
    case SelectionRule::EigenvalueK: return "eigenvalue_k";
    case SelectionRule::GapCertified: return "gap_certified";
    case SelectionRule::CombinedKev: return "combined_kev";
    case SelectionRule::OperatorKop: return "operator_kop";
  }
  return "unknown";
}

struct JumpDecision {
  Index s_hat = 0;  // 0: nothing above the threshold
  double threshold = 0.0;
  double noise_level = 0.0;  // the plug-in eta used to build the threshold
  Regime regime = Regime::Two;
  JumpRule rule = JumpRule::MinimalJump;
  std::vector<std::string> warnings;
};

struct SelectionResult {
  Index K = 0;
  double alpha = 0.0;
  double threshold = 0.0;
  SelectionRule rule = SelectionRule::EigenvalueK;
  std::vector<Index> certified_vectors;  // 1-based
};

// Largest k with lambda_k >= tau (0 when none), for a non-increasing spectrum.
inline Index scree_count(const Vector& eigenvalues, double tau) {
  for (Index k = 1; k < eigenvalues.size(); ++k) {
    if (eigenvalues(k) > eigenvalues(k - 1)) {
      throw InvalidArgument("scree_count: eigenvalues must be sorted in non-increasing order");
    }
  }
  Index count = 0;
  while (count < eigenvalues.size() && eigenvalues(count) >= tau) ++count;
  return count;
}

// ---------------------------------------------------------------- jumps ---

// s_hat(2 eta~_j). With regime 1 and c3 configured, the side condition
// (1 + c1 + c3) sqrt(eps) < 0.19 is evaluated at the smallest eps placing
// Sigma_n in P_1(eps) and reported as a warning.
inline JumpDecision detect_minimal_jump(const Vector& sample_eigenvalues, Index n, Regime regime,
                                        const ConstantsConfig& consts) {
  JumpDecision out;
  out.regime = regime;
  out.rule = JumpRule::MinimalJump;
  out.noise_level = eta_empirical(sample_eigenvalues, n, regime, consts);
  out.threshold = 2.0 * out.noise_level;
  out.s_hat = scree_count(sample_eigenvalues, out.threshold);
  if (regime == Regime::One && consts.c3) {
    const double p = static_cast<double>(sample_eigenvalues.size());
    const double eps = effective_rank(sample_eigenvalues) * std::log(p * static_cast<double>(n)) /
                       static_cast<double>(n);
    const double lhs = (1.0 + consts.c1 + *consts.c3) * std::sqrt(eps);
    if (!(lhs < 0.19)) {
      out.warnings.push_back("regime-1 side condition (1+c1+c3)sqrt(eps) = " + std::to_string(lhs) +
                             " is not < 0.19");
    }
  }
  return out;
}

inline JumpDecision detect_minimal_jump(const SymmetricMatrix& sigma_n, Index n, Regime regime,
                                        const ConstantsConfig& consts) {
  return detect_minimal_jump(eigvalsh(sigma_n), n, regime, consts);
}

// C4 = 3 C2^-1 C1^(beta3/beta1), the jump-detection form.
inline double c4l_from_lower_envelope(const PolyDecayParams& poly) {
  return 3.0 / poly.c2l * std::pow(poly.c1l, poly.beta3 / poly.beta1);
}

// C4 = 3 C3^-1 C1^(beta3/beta1), the form used for covariance operators.
inline double c4l_from_gap_envelope(const PolyDecayParams& poly) {
  return 3.0 / poly.c3l * std::pow(poly.c1l, poly.beta3 / poly.beta1);
}

// (C4 eta)^(beta1/beta3).
inline double poly_jump_threshold(double c4l, double eta2, double beta1, double beta3) {
  const double base = c4l * eta2;
  if (!(base > 0.0)) throw DegenerateInput("poly jump: C4 * eta must be positive");
  return std::pow(base, beta1 / beta3);
}

inline JumpDecision detect_poly_jump(const Vector& sample_eigenvalues, Index n, const PolyDecayParams& poly,
                                     const ConstantsConfig& consts) {
  if (!(poly.beta3 > poly.beta1 && poly.beta1 > 1.0)) {
    throw InvalidArgument("detect_poly_jump: need beta3 > beta1 > 1");
  }
  JumpDecision out;
  out.regime = Regime::Two;
  out.rule = JumpRule::PolyJump;
  out.noise_level = eta_empirical(sample_eigenvalues, n, Regime::Two, consts);
  const double c4l = consts.c4l.value_or(c4l_from_lower_envelope(poly));
  out.threshold = poly_jump_threshold(c4l, out.noise_level, poly.beta1, poly.beta3);
  out.s_hat = scree_count(sample_eigenvalues, out.threshold);
  return out;
}

inline JumpDecision detect_poly_jump(const SymmetricMatrix& sigma_n, Index n, const PolyDecayParams& poly,
                                     const ConstantsConfig& consts) {
  return detect_poly_jump(eigvalsh(sigma_n), n, poly, consts);
}

// ------------------------------------------------------------ selection ---

// eta~ (1 + 1/alpha) / (C_j (1 - eps1)).
inline double eigenvalue_selection_threshold(double eta, double eps1, Regime regime, double alpha,
                                             const ConstantsConfig& consts) {
  return eta / (consts.regime_constant(regime) * (1.0 - eps1)) * (1.0 + 1.0 / alpha);
}

// eta~ (2 + 3/alpha) / (C_j (1 - eps1)).
inline double eigenvector_gap_threshold(double eta, double eps1, Regime regime, double alpha,
                                        const ConstantsConfig& consts) {
  return eta / (consts.regime_constant(regime) * (1.0 - eps1)) * (2.0 + 3.0 / alpha);
}

inline void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("alpha must lie in (0, 1]");
  }
}

// K~_j = scree count at the selection threshold, for a given plug-in level.
inline SelectionResult select_eigenvalues_at(const Vector& sample_eigenvalues, double eta, double eps1,
                                             Regime regime, double alpha, const ConstantsConfig& consts) {
  require_alpha(alpha);
  SelectionResult out;
  out.rule = SelectionRule::EigenvalueK;
  out.alpha = alpha;
  out.threshold = eigenvalue_selection_threshold(eta, eps1, regime, alpha, consts);
  out.K = scree_count(sample_eigenvalues, out.threshold);
  return out;
}

inline SelectionResult select_eigenvalues(const Vector& sample_eigenvalues, Index n, Regime regime, double alpha,
                                          const ConstantsConfig& consts) {
  const double eps1 = epsilon1(n, consts);
  const double eta = eta_empirical(sample_eigenvalues, n, regime, consts);
  return select_eigenvalues_at(sample_eigenvalues, eta, eps1, regime, alpha, consts);
}

inline SelectionResult select_eigenvalues(const SymmetricMatrix& sigma_n, Index n, Regime regime, double alpha,
                                          const ConstantsConfig& consts) {
  return select_eigenvalues(eigvalsh(sigma_n), n, regime, alpha, consts);
}

// Every k whose two neighbouring sample gaps (with lambda_0 = +inf and
// lambda_{p+1} = 0) both reach `gap_threshold`.
inline std::vector<Index> gap_certified(const Vector& sample_eigenvalues, double gap_threshold) {
  const Index p = sample_eigenvalues.size();
  std::vector<Index> out;
  for (Index k = 0; k < p; ++k) {
    const double above = k == 0 ? std::numeric_limits<double>::infinity()
                                : sample_eigenvalues(k - 1) - sample_eigenvalues(k);
    const double below = sample_eigenvalues(k) - (k + 1 < p ? sample_eigenvalues(k + 1) : 0.0);
    if (std::min(above, below) >= gap_threshold) out.push_back(k + 1);
  }
  return out;
}

inline SelectionResult certify_eigenvectors_at(const Vector& sample_eigenvalues, double eta, double eps1,
                                               Regime regime, double alpha, const ConstantsConfig& consts) {
  require_alpha(alpha);
  SelectionResult out;
  out.rule = SelectionRule::GapCertified;
  out.alpha = alpha;
  out.threshold = eigenvector_gap_threshold(eta, eps1, regime, alpha, consts);
  out.certified_vectors = gap_certified(sample_eigenvalues, out.threshold);
  out.K = static_cast<Index>(out.certified_vectors.size());
  return out;
}

inline SelectionResult certify_eigenvectors(const SpectralDecomposition& decomp, Index n, Regime regime,
                                            double alpha, const ConstantsConfig& consts) {
  const double eps1 = epsilon1(n, consts);
  const double eta = eta_empirical(decomp.eigenvalues, n, regime, consts);
  return certify_eigenvectors_at(decomp.eigenvalues, eta, eps1, regime, alpha, consts);
}

// eta~_ev = C1 [3 eta~2 / ((1 - eps1) C3 alpha)]^(beta1/beta3) + eta~2 / (1 - eps1).
inline double combined_poly_threshold(double eta2, double eps1, double alpha, const PolyDecayParams& poly) {
  return poly.c1l * std::pow(3.0 * eta2 / ((1.0 - eps1) * poly.c3l * alpha), poly.beta1 / poly.beta3) +
         eta2 / (1.0 - eps1);
}

// K~_ev and the certified prefix {1..K~_ev}.
inline SelectionResult select_combined_poly_at(const Vector& sample_eigenvalues, double eta2, double eps1,
                                               const PolyDecayParams& poly, double alpha) {
  require_alpha(alpha);
  SelectionResult out;
  out.rule = SelectionRule::CombinedKev;
  out.alpha = alpha;
  out.threshold = combined_poly_threshold(eta2, eps1, alpha, poly);
  out.K = scree_count(sample_eigenvalues, out.threshold);
  for (Index k = 1; k <= out.K; ++k) out.certified_vectors.push_back(k);
  return out;
}

inline SelectionResult select_combined_poly(const Vector& sample_eigenvalues, Index n, const PolyDecayParams& poly,
                                            double alpha, const ConstantsConfig& consts) {
  const double eps1 = epsilon1(n, consts);
  const double eta2 = eta_empirical(sample_eigenvalues, n, Regime::Two, consts);
  return select_combined_poly_at(sample_eigenvalues, eta2, eps1, poly, alpha);
}

inline SelectionResult select_combined_poly(const SymmetricMatrix& sigma_n, Index n, const PolyDecayParams& poly,
                                            double alpha, const ConstantsConfig& consts) {
  return select_combined_poly(eigvalsh(sigma_n), n, poly, alpha, consts);
}

// eta/g + 6 eta^2/g^2 with g the distance from lambda_k to its nearest other
// eigenvalue (k is 1-based). A zero gap yields +inf.
inline double eigenvector_error_bound(const Vector& spectrum, Index k, double eta_min) {
  if (k < 1 || k > spectrum.size()) throw InvalidArgument("eigenvector_error_bound: k out of range");
  if (eta_min == 0.0) return 0.0;
  const double gap = min_gap(spectrum, k - 1);
  if (gap == 0.0) return std::numeric_limits<double>::infinity();
  const double ratio = eta_min / gap;
  return ratio + 6.0 * ratio * ratio;
}

inline double eigenvector_error_bound(const PopulationModel& model, Index k, double eta_min) {
  return eigenvector_error_bound(model.true_spectrum, k, eta_min);
}

}  // namespace spectral

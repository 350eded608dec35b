#pragma once

// Ground-truth population covariance models with known spectra, and i.i.d.
// samplers drawing from matching sub-Gaussian distributions.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "spectral_screener/error.hpp"
#include "spectral_screener/linalg.hpp"
#include "spectral_screener/rng.hpp"

namespace spectral {

enum class ModelKind { Explicit, Factor, PolyDecay };

inline const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Explicit: return "explicit";
    case ModelKind::Factor: return "factor";
    case ModelKind::PolyDecay: return "poly";
  }
  return "unknown";
}

// Scaled factor model  Sigma / p = sum_r strength_r xi_r xi_r' + (noise_var / p) I_p.
struct FactorParams {
  Index p = 0;
  std::vector<double> factor_strengths;  // strictly decreasing, positive
  double noise_var = 0.0;
  std::uint64_t loading_seed = 0;

  Index factors() const noexcept { return static_cast<Index>(factor_strengths.size()); }
};

// Polynomially decaying spectrum. Defaults to lambda_k = scale * k^-beta1 with
// beta2 == beta1; `eigenvalue_rule` overrides the formula (k is 1-based).
struct PolyDecayParams {
  Index p = 0;
  double beta1 = 2.0;
  double beta2 = 2.0;
  double beta3 = 3.0;
  double c1l = 1.0;
  double c2l = 1.0;
  double c3l = 0.75;
  double scale = 1.0;
  std::function<double(Index)> eigenvalue_rule;
  // Seed for a Haar rotation of the eigenbasis; identity when empty.
  std::optional<std::uint64_t> rotation_seed;

  double eigenvalue(Index k) const {
    return eigenvalue_rule ? eigenvalue_rule(k) : scale * std::pow(static_cast<double>(k), -beta1);
  }
};

struct PopulationModel {
  ModelKind kind = ModelKind::Explicit;
  SymmetricMatrix sigma{1};
  Vector true_spectrum;      // non-increasing
  Matrix true_eigenvectors;  // orthonormal columns
  std::variant<std::monostate, FactorParams, PolyDecayParams> params;

  Index dim() const noexcept { return sigma.dim(); }
  double trace() const { return true_spectrum.sum(); }
  double operator_norm() const { return spectral::operator_norm(true_spectrum); }
  double effective_rank() const { return spectral::effective_rank(true_spectrum); }
};

// n observations of a p-vector, one per row.
class SampleMatrix {
 public:
  explicit SampleMatrix(Matrix rows) : rows_(std::move(rows)) {
    if (!rows_.allFinite()) throw InvalidArgument("SampleMatrix: non-finite entries");
  }

  Index n() const noexcept { return rows_.rows(); }
  Index p() const noexcept { return rows_.cols(); }
  const Matrix& rows() const noexcept { return rows_; }

 private:
  Matrix rows_;
};

// Haar-distributed orthonormal p x p matrix: QR of a seeded standard normal
// matrix with the diagonal of R made positive.
inline Matrix random_orthonormal(Index p, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Matrix g(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR();
  for (Index j = 0; j < p; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

// Sigma = V diag(spectrum) V'. `spectrum` must be non-increasing and
// nonnegative; V is identity unless `rotation_seed` is given.
inline PopulationModel build_explicit(const Vector& spectrum,
                                      std::optional<std::uint64_t> rotation_seed = std::nullopt) {
  const Index p = spectrum.size();
  if (p < 1) throw InvalidArgument("build_explicit: empty spectrum");
  for (Index k = 0; k < p; ++k) {
    if (!(spectrum(k) >= 0.0)) throw InvalidArgument("build_explicit: spectrum must be nonnegative");
    if (k > 0 && spectrum(k) > spectrum(k - 1)) {
      throw InvalidArgument("build_explicit: spectrum must be non-increasing");
    }
  }
  PopulationModel model;
  model.kind = ModelKind::Explicit;
  model.true_spectrum = spectrum;
  model.true_eigenvectors = rotation_seed ? random_orthonormal(p, *rotation_seed) : Matrix::Identity(p, p);
  model.sigma = rotation_seed ? SymmetricMatrix::from_spectrum(model.true_eigenvectors, spectrum)
                              : SymmetricMatrix::diagonal(spectrum);
  return model;
}

inline PopulationModel build_factor(const FactorParams& params) {
  const Index p = params.p;
  const Index r = params.factors();
  if (r < 1) throw InvalidArgument("build_factor: need at least one factor");
  if (r >= p) throw InvalidArgument("build_factor: number of factors must be < p");
  if (params.noise_var < 0.0) throw InvalidArgument("build_factor: noise_var must be >= 0");
  for (Index k = 0; k < r; ++k) {
    const double s = params.factor_strengths[static_cast<std::size_t>(k)];
    if (!(s > 0.0)) throw InvalidArgument("build_factor: factor strengths must be positive");
    if (k > 0 && !(s < params.factor_strengths[static_cast<std::size_t>(k - 1)])) {
      throw InvalidArgument("build_factor: factor strengths must be strictly decreasing");
    }
  }

  const double floor = params.noise_var / static_cast<double>(p);
  Vector spectrum = Vector::Constant(p, floor);
  for (Index k = 0; k < r; ++k) spectrum(k) += params.factor_strengths[static_cast<std::size_t>(k)];

  PopulationModel model;
  model.kind = ModelKind::Factor;
  model.true_spectrum = spectrum;
  model.true_eigenvectors = random_orthonormal(p, params.loading_seed);
  model.sigma = SymmetricMatrix::from_spectrum(model.true_eigenvectors, spectrum);
  model.params = params;
  return model;
}

// First 1-based index at which the spectrum leaves the decay envelope
// C2 k^-beta2 <= lambda_k <= C1 k^-beta1, or 0 when it stays inside.
inline std::size_t first_envelope_violation(const Vector& spectrum, const PolyDecayParams& params) {
  for (Index i = 0; i < spectrum.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    const double lo = params.c2l * std::pow(k, -params.beta2);
    const double hi = params.c1l * std::pow(k, -params.beta1);
    if (spectrum(i) < lo || spectrum(i) > hi) return static_cast<std::size_t>(i + 1);
  }
  return 0;
}

// Distance from lambda_k to the nearest other eigenvalue; +inf when p == 1.
inline double min_gap(const Vector& descending, Index k) {
  double gap = std::numeric_limits<double>::infinity();
  if (k > 0) gap = std::min(gap, std::abs(descending(k - 1) - descending(k)));
  if (k + 1 < descending.size()) gap = std::min(gap, std::abs(descending(k) - descending(k + 1)));
  return gap;
}

// First 1-based index whose nearest-neighbour gap falls below C3 k^-beta3,
// or 0 when every gap is wide enough.
inline std::size_t first_gap_violation(const Vector& spectrum, const PolyDecayParams& params) {
  for (Index i = 0; i < spectrum.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    if (min_gap(spectrum, i) < params.c3l * std::pow(k, -params.beta3)) {
      return static_cast<std::size_t>(i + 1);
    }
  }
  return 0;
}

inline PopulationModel build_poly_decay(const PolyDecayParams& params) {
  if (params.p < 1) throw InvalidArgument("build_poly_decay: p must be >= 1");
  if (!(params.beta1 > 1.0 && params.beta2 >= params.beta1 && params.beta3 > params.beta2)) {
    throw InvalidArgument("build_poly_decay: need beta3 > beta2 >= beta1 > 1");
  }
  if (!(params.c1l > 0.0 && params.c2l > 0.0 && params.c3l > 0.0)) {
    throw InvalidArgument("build_poly_decay: envelope constants must be positive");
  }

  Vector spectrum(params.p);
  for (Index i = 0; i < params.p; ++i) spectrum(i) = params.eigenvalue(i + 1);
  for (Index i = 1; i < params.p; ++i) {
    if (spectrum(i) > spectrum(i - 1)) {
      throw ParameterError("build_poly_decay: eigenvalue rule is not non-increasing at index " +
                               std::to_string(i + 1),
                           static_cast<std::size_t>(i + 1));
    }
  }
  if (const auto bad = first_envelope_violation(spectrum, params); bad != 0) {
    throw ParameterError("build_poly_decay: lambda_" + std::to_string(bad) +
                             " violates C2 k^-beta2 <= lambda_k <= C1 k^-beta1",
                         bad);
  }
  if (const auto bad = first_gap_violation(spectrum, params); bad != 0) {
    throw ParameterError("build_poly_decay: gap at index " + std::to_string(bad) +
                             " is below C3 k^-beta3",
                         bad);
  }

  PopulationModel model = build_explicit(spectrum, params.rotation_seed);
  model.kind = ModelKind::PolyDecay;
  model.params = params;
  return model;
}

namespace detail {

inline void require_sample_size(Index n) {
  if (n < 2) throw InvalidArgument("sampler: n must be >= 2");
}

// Rows z_i diag(sqrt(lambda)) V' for a fixed innovation matrix z (n x p).
inline SampleMatrix rotate_innovations(const PopulationModel& model, Matrix z) {
  const Vector root = model.true_spectrum.cwiseMax(0.0).cwiseSqrt();
  z = z * root.asDiagonal();
  return SampleMatrix(z * model.true_eigenvectors.transpose());
}

}  // namespace detail

// Rows i.i.d. N(0, Sigma), generated as V diag(sqrt(lambda)) z.
inline SampleMatrix sample_gaussian(const PopulationModel& model, Index n, std::uint64_t seed) {
  detail::require_sample_size(n);
  const Index p = model.dim();
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Matrix z(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) z(i, j) = normal(rng);
  return detail::rotate_innovations(model, std::move(z));
}

enum class ComponentLaw { Rademacher, Uniform };

// Independent unit-variance components (Rademacher or uniform on
// [-sqrt 3, sqrt 3]) scaled by sqrt(lambda_j), then rotated by V.
inline SampleMatrix sample_subgaussian_rotated(const PopulationModel& model, Index n, std::uint64_t seed,
                                               ComponentLaw law) {
  detail::require_sample_size(n);
  const Index p = model.dim();
  Rng rng(seed);
  Matrix z(n, p);
  if (law == ComponentLaw::Rademacher) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j) z(i, j) = (rng() >> 63) != 0 ? 1.0 : -1.0;
  } else {
    const double half_width = std::sqrt(3.0);
    std::uniform_real_distribution<double> uniform(-half_width, half_width);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j) z(i, j) = uniform(rng);
  }
  return detail::rotate_innovations(model, std::move(z));
}

}  // namespace spectral

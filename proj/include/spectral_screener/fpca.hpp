#pragma once

// Functional data: covariance operators with closed-form eigenstructure,
// design grids, discretization, trajectory simulation, finite-approximation
// diagnostics, and operator-level jump detection / eigen selection.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "spectral_screener/error.hpp"
#include "spectral_screener/estimate.hpp"
#include "spectral_screener/linalg.hpp"
#include "spectral_screener/models.hpp"
#include "spectral_screener/rng.hpp"
#include "spectral_screener/screen.hpp"

namespace spectral {

// Decay exponents and constants of an operator spectrum / eigenbasis.
struct DecayConstants {
  double beta1 = 2.0;
  double beta2 = 2.0;
  double beta3 = 3.0;
  double gamma1 = 1.0;
  double c1l = 1.0;
  double c2l = 1.0;
  double c3l = 1.0;
  double c5l = 1.0;  // sup bound on |phi_k(t)|
  double c6l = 1.0;  // Lipschitz scale of phi_k, grows like k^gamma1

  // (1 - beta1) / (beta1 + gamma1): the exponent of m in the approximation error.
  double approx_exponent() const { return (1.0 - beta1) / (beta1 + gamma1); }

  PolyDecayParams as_poly() const {
    PolyDecayParams out;
    out.beta1 = beta1;
    out.beta2 = beta2;
    out.beta3 = beta3;
    out.c1l = c1l;
    out.c2l = c2l;
    out.c3l = c3l;
    return out;
  }
};

struct CovarianceOperator {
  std::string name;
  std::function<double(double, double)> kernel;
  std::function<double(Index)> eigenvalue;             // rho_k, k >= 1, non-increasing
  std::function<double(Index, double)> eigenfunction;  // phi_k(t)
  double rho0 = 0.0;                                   // trace, sum of rho_k
  DecayConstants decay;
  // Draws X(t_1..t_m) exactly; empty when only the KL expansion is available.
  std::function<Vector(const Vector& t, Rng& rng)> path_sampler;
};

namespace detail {

inline Vector brownian_path(const Vector& t, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector out(t.size());
  double prev_t = 0.0;
  double value = 0.0;
  for (Index j = 0; j < t.size(); ++j) {
    value += std::sqrt(t(j) - prev_t) * normal(rng);
    out(j) = value;
    prev_t = t(j);
  }
  return out;
}

}  // namespace detail

// Standard Brownian motion on [0, 1].
inline CovarianceOperator brownian_motion() {
  using std::numbers::pi;
  CovarianceOperator op;
  op.name = "brownian_motion";
  op.kernel = [](double s, double t) { return std::min(s, t); };
  op.eigenvalue = [](Index k) {
    const double w = (static_cast<double>(k) - 0.5) * pi;
    return 1.0 / (w * w);
  };
  op.eigenfunction = [](Index k, double t) {
    return std::numbers::sqrt2 * std::sin((static_cast<double>(k) - 0.5) * pi * t);
  };
  op.rho0 = 0.5;
  op.decay = {2.0, 2.0, 3.0, 1.0, 4.0 / (pi * pi), 1.0 / (pi * pi), 2.0 / (pi * pi), std::numbers::sqrt2,
              std::numbers::sqrt2 * pi};
  op.path_sampler = detail::brownian_path;
  return op;
}

// Brownian bridge on [0, 1], sampled as W(t) - t W(1).
inline CovarianceOperator brownian_bridge() {
  using std::numbers::pi;
  CovarianceOperator op;
  op.name = "brownian_bridge";
  op.kernel = [](double s, double t) { return std::min(s, t) - s * t; };
  op.eigenvalue = [](Index k) {
    const double w = static_cast<double>(k) * pi;
    return 1.0 / (w * w);
  };
  op.eigenfunction = [](Index k, double t) {
    return std::numbers::sqrt2 * std::sin(static_cast<double>(k) * pi * t);
  };
  op.rho0 = 1.0 / 6.0;
  op.decay = {2.0, 2.0, 3.0, 1.0, 1.0 / (pi * pi), 1.0 / (pi * pi), 3.0 / (4.0 * pi * pi),
              std::numbers::sqrt2, std::numbers::sqrt2 * pi};
  op.path_sampler = [](const Vector& t, Rng& rng) {
    Vector ext(t.size() + 1);
    ext.head(t.size()) = t;
    ext(t.size()) = 1.0;
    const Vector w = detail::brownian_path(ext, rng);
    return Vector(w.head(t.size()) - t * w(t.size()));
  };
  return op;
}

// Smallest envelope constants valid for k <= kmax:
// c1 = max rho_k k^beta1, c2 = min rho_k k^beta2, c3 = min gap_k k^beta3.
inline DecayConstants envelope_constants(const std::function<double(Index)>& eigenvalue, DecayConstants base,
                                         Index kmax) {
  if (kmax < 2) throw InvalidArgument("envelope_constants: kmax must be >= 2");
  double c1 = 0.0;
  double c2 = std::numeric_limits<double>::infinity();
  double c3 = std::numeric_limits<double>::infinity();
  double prev = std::numeric_limits<double>::infinity();
  double cur = eigenvalue(1);
  for (Index k = 1; k <= kmax; ++k) {
    const double next = eigenvalue(k + 1);
    const double kd = static_cast<double>(k);
    c1 = std::max(c1, cur * std::pow(kd, base.beta1));
    c2 = std::min(c2, cur * std::pow(kd, base.beta2));
    c3 = std::min(c3, std::min(prev - cur, cur - next) * std::pow(kd, base.beta3));
    prev = cur;
    cur = next;
  }
  base.c1l = c1;
  base.c2l = c2;
  base.c3l = c3;
  return base;
}

// Keeps the first `s` eigenpairs of `base` and multiplies every later
// eigenvalue by `factor`:  K = factor * K_base + (1 - factor) sum_{k<=s} rho_k phi_k phi_k.
// Needs a base with an exact path sampler. Envelope constants are rescanned
// over k <= envelope_depth.
inline CovarianceOperator planted_jump(const CovarianceOperator& base, Index s, double factor,
                                       Index envelope_depth = 2000) {
  if (s < 1) throw InvalidArgument("planted_jump: s must be >= 1");
  if (!(factor > 0.0 && factor < 1.0)) throw InvalidArgument("planted_jump: factor must lie in (0, 1)");
  if (!base.path_sampler) throw InvalidArgument("planted_jump: base operator needs an exact sampler");

  std::vector<double> head_rho;
  double head_trace = 0.0;
  for (Index k = 1; k <= s; ++k) {
    head_rho.push_back(base.eigenvalue(k));
    head_trace += head_rho.back();
  }
  CovarianceOperator op;
  op.name = "planted_" + base.name;
  op.eigenfunction = base.eigenfunction;
  op.eigenvalue = [ev = base.eigenvalue, s, factor](Index k) { return k <= s ? ev(k) : factor * ev(k); };
  op.kernel = [base, head_rho, factor](double u, double v) {
    double head = 0.0;
    for (std::size_t k = 0; k < head_rho.size(); ++k) {
      const auto idx = static_cast<Index>(k + 1);
      head += head_rho[k] * base.eigenfunction(idx, u) * base.eigenfunction(idx, v);
    }
    return factor * base.kernel(u, v) + (1.0 - factor) * head;
  };
  op.rho0 = factor * base.rho0 + (1.0 - factor) * head_trace;
  op.decay = envelope_constants(op.eigenvalue, base.decay, envelope_depth);
  op.path_sampler = [base, head_rho, factor](const Vector& t, Rng& rng) {
    Vector out = std::sqrt(factor) * base.path_sampler(t, rng);
    std::normal_distribution<double> normal;
    for (std::size_t k = 0; k < head_rho.size(); ++k) {
      const double score = std::sqrt((1.0 - factor) * head_rho[k]) * normal(rng);
      const auto idx = static_cast<Index>(k + 1);
      for (Index j = 0; j < t.size(); ++j) out(j) += score * base.eigenfunction(idx, t(j));
    }
    return out;
  };
  return op;
}

// Fixed design points 0 < t_1 < ... < t_m < 1.
class DesignGrid {
 public:
  // Validates spacing (boundary gaps included) against M^-1 m^-1 and M m^-1.
  DesignGrid(Vector points, double mesh_constant) : points_(std::move(points)), mesh_(mesh_constant) {
    const Index m = points_.size();
    if (m < 1) throw InvalidArgument("DesignGrid: need at least one point");
    if (!(mesh_ >= 1.0)) throw InvalidArgument("DesignGrid: mesh constant must be >= 1");
    const double md = static_cast<double>(m);
    const double lo = 1.0 / (mesh_ * md) * (1.0 - 1e-12);
    const double hi = mesh_ / md * (1.0 + 1e-12);
    for (Index j = 0; j <= m; ++j) {
      const double left = j == 0 ? 0.0 : points_(j - 1);
      const double right = j == m ? 1.0 : points_(j);
      const double gap = right - left;
      // A design point sitting on t = 1 is allowed; the zero end gap is skipped.
      if (j == m && gap == 0.0) continue;
      if (!(gap >= lo && gap <= hi)) {
        throw InvalidArgument("DesignGrid: spacing " + std::to_string(gap) + " at gap " + std::to_string(j) +
                              " violates the mesh condition for M = " + std::to_string(mesh_));
      }
    }
  }

  // t_j = (j - 1 + offset) / m. offset 1/2 is the midpoint rule, offset 1 gives j/m.
  static DesignGrid uniform(Index m, double offset = 0.5) {
    if (m < 1) throw InvalidArgument("DesignGrid: m must be >= 1");
    if (!(offset > 0.0 && offset <= 1.0)) throw InvalidArgument("DesignGrid: offset must lie in (0, 1]");
    Vector t(m);
    for (Index j = 0; j < m; ++j) t(j) = (static_cast<double>(j) + offset) / static_cast<double>(m);
    const double widest = std::max({offset, 1.0 - offset, 1.0});
    const double narrowest = offset == 1.0 ? 1.0 : std::min({offset, 1.0 - offset, 1.0});
    const double mesh = std::max({2.0, widest, 1.0 / narrowest});
    return DesignGrid(std::move(t), mesh);
  }

  Index m() const noexcept { return points_.size(); }
  const Vector& points() const noexcept { return points_; }
  double mesh_constant() const noexcept { return mesh_; }

 private:
  Vector points_;
  double mesh_;
};

// K = m^-1 {kernel(t_i, t_j)}.
inline SymmetricMatrix discretize(const CovarianceOperator& op, const DesignGrid& grid) {
  const Index m = grid.m();
  const Vector& t = grid.points();
  const double inv_m = 1.0 / static_cast<double>(m);
  SymmetricMatrix out(m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j <= i; ++j) out.set(i, j, inv_m * op.kernel(t(i), t(j)));
  return out;
}

// m^-1/2 (phi_k(t_1), ..., phi_k(t_m)).
inline Vector phi_vector(const CovarianceOperator& op, Index k, const DesignGrid& grid) {
  if (k < 1) throw InvalidArgument("phi_vector: k must be >= 1");
  const double scale = 1.0 / std::sqrt(static_cast<double>(grid.m()));
  Vector out(grid.m());
  for (Index j = 0; j < grid.m(); ++j) out(j) = scale * op.eigenfunction(k, grid.points()(j));
  return out;
}

// Columns phi_1..phi_kmax.
inline Matrix phi_matrix(const CovarianceOperator& op, Index kmax, const DesignGrid& grid) {
  Matrix out(grid.m(), kmax);
  for (Index k = 1; k <= kmax; ++k) out.col(k - 1) = phi_vector(op, k, grid);
  return out;
}

struct GramDeviation {
  double max_deviation = 0.0;  // max |phi_k1' phi_k2 - delta|
  double fitted_c7l = 0.0;     // max |phi_k1' phi_k2 - delta| m / max(k1,k2)^gamma1
};

inline GramDeviation gram_deviation(const CovarianceOperator& op, const DesignGrid& grid, Index kmax) {
  const Matrix phi = phi_matrix(op, kmax, grid);
  const Matrix gram = phi.transpose() * phi;
  GramDeviation out;
  const double md = static_cast<double>(grid.m());
  for (Index a = 0; a < kmax; ++a) {
    for (Index b = 0; b <= a; ++b) {
      const double dev = std::abs(gram(a, b) - (a == b ? 1.0 : 0.0));
      out.max_deviation = std::max(out.max_deviation, dev);
      out.fitted_c7l =
          std::max(out.fitted_c7l, dev * md / std::pow(static_cast<double>(a + 1), op.decay.gamma1));
    }
  }
  return out;
}

// floor(m^(1/(beta1+gamma1))), the depth up to which eigenvectors are compared.
inline Index eigenvector_depth(Index m, const DecayConstants& decay) {
  const double raw = std::pow(static_cast<double>(m), 1.0 / (decay.beta1 + decay.gamma1));
  return static_cast<Index>(std::floor(raw * (1.0 + 1e-12)));
}

// C8 = C5^2 C1 / (beta1 - 1) + C1 + 13 C7 lambda0, lambda0 read as rho0 or rho1.
inline double c8l(const CovarianceOperator& op, double c7l,
                  ConstantsConfig::Lambda0Reading reading = ConstantsConfig::Lambda0Reading::Rho0) {
  const DecayConstants& d = op.decay;
  const double lambda0 = reading == ConstantsConfig::Lambda0Reading::Rho0 ? op.rho0 : op.eigenvalue(1);
  return d.c5l * d.c5l * d.c1l / (d.beta1 - 1.0) + d.c1l + 13.0 * c7l * lambda0;
}

struct ApproximationReport {
  Index m = 0;
  Index depth = 0;
  Index vector_depth = 0;  // min(depth, floor(m^(1/(beta1+gamma1))))
  double eigenvalue_deviation = 0.0;   // max_{k<=depth} |lambda_k(K) - rho_k|
  double trace_deviation = 0.0;        // |tr K - rho0|
  double eigenvector_deviation = 0.0;  // max_{k<=vector_depth} ||psi_k - phi_k||, sign aligned
  std::vector<double> eigenvector_errors;
  double gram_deviation = 0.0;
  double c7l = 0.0;
  double c8l = 0.0;
  double eigenvalue_bound = 0.0;  // C8 m^((1-beta1)/(beta1+gamma1))
  // Eigenvector envelopes per k: the stated form ends in 7 C7 m^e, the
  // derivation form in 7 C7 N^(1+gamma1) / m.
  std::vector<double> envelope_stated;
  std::vector<double> envelope_derived;
  bool validity_ok = true;  // m^e <= 1 / (12 C7)
  std::vector<std::string> warnings;
};

inline ApproximationReport approximation_report(const CovarianceOperator& op, const DesignGrid& grid, Index depth,
                                                const ConstantsConfig& consts = {}) {
  const Index m = grid.m();
  if (depth < 1 || depth > m) throw InvalidArgument("approximation_report: depth must lie in [1, m]");
  const DecayConstants& d = op.decay;
  const double md = static_cast<double>(m);
  const double rate = std::pow(md, d.approx_exponent());

  ApproximationReport out;
  out.m = m;
  out.depth = depth;
  out.vector_depth = std::min(depth, eigenvector_depth(m, d));

  const SymmetricMatrix K = discretize(op, grid);
  const SpectralDecomposition decomp = eigh(K);
  for (Index k = 1; k <= depth; ++k) {
    out.eigenvalue_deviation =
        std::max(out.eigenvalue_deviation, std::abs(decomp.eigenvalues(k - 1) - op.eigenvalue(k)));
  }
  out.trace_deviation = std::abs(trace(K) - op.rho0);

  const GramDeviation gram = gram_deviation(op, grid, std::max<Index>(depth, 2));
  out.gram_deviation = gram.max_deviation;
  out.c7l = consts.c7l.value_or(gram.fitted_c7l);
  out.c8l = spectral::c8l(op, out.c7l, consts.lambda0);
  out.eigenvalue_bound = out.c8l * rate;

  const double ceil_n = std::ceil(std::pow(md, 1.0 / (d.beta1 + d.gamma1)) * (1.0 - 1e-12));
  for (Index k = 1; k <= out.vector_depth; ++k) {
    const Vector phi = phi_vector(op, k, grid);
    const Vector psi = align_sign(decomp.eigenvector(k - 1), phi / phi.norm());
    const double err = (psi - phi).norm();
    out.eigenvector_errors.push_back(err);
    out.eigenvector_deviation = std::max(out.eigenvector_deviation, err);

    const double rho = op.eigenvalue(k);
    double gap = op.eigenvalue(k) - op.eigenvalue(k + 1);
    if (k > 1) gap = std::min(gap, op.eigenvalue(k - 1) - rho);
    const double ratio = out.eigenvalue_bound / gap;
    const double head = ratio + 6.0 * ratio * ratio;
    out.envelope_stated.push_back(head + 7.0 * out.c7l * rate);
    out.envelope_derived.push_back(head + 7.0 * out.c7l * std::pow(ceil_n, 1.0 + d.gamma1) / md);
  }

  out.validity_ok = rate * 12.0 * out.c7l <= 1.0;
  if (!out.validity_ok) {
    out.warnings.push_back("m^e = " + std::to_string(rate) + " exceeds 1/(12 C7) with C7 = " +
                           std::to_string(out.c7l));
  }
  return out;
}

// Y_i(t_j) = mu(t_j) + X_i(t_j) + E_ij, stored one trajectory per row.
struct FunctionalSample {
  DesignGrid grid = DesignGrid::uniform(1);
  Matrix observations;  // n x m
  double noise_var = 0.0;
  Vector mean;  // mu on the grid

  Index n() const noexcept { return observations.rows(); }
  Index m() const noexcept { return observations.cols(); }
};

struct SimulationOptions {
  bool prefer_exact = true;        // use op.path_sampler when available
  double tail_fraction = 1e-6;     // KL tail trace target relative to rho0
  Index truncation_cap_factor = 10;  // KL depth capped at factor * m
};

// Smallest K with rho0 - sum_{k<=K} rho_k < tail_fraction * rho0, capped at
// cap_factor * m.
inline Index kl_truncation_depth(const CovarianceOperator& op, Index m, const SimulationOptions& options = {}) {
  const Index cap = options.truncation_cap_factor * m;
  const double target = options.tail_fraction * op.rho0;
  double partial = 0.0;
  for (Index k = 1; k <= cap; ++k) {
    partial += op.eigenvalue(k);
    if (op.rho0 - partial < target) return k;
  }
  throw Error("kl_truncation_depth: tail trace " + std::to_string(op.rho0 - partial) + " after " +
              std::to_string(cap) + " terms misses target " + std::to_string(target));
}

// Trajectory i draws from its own stream, keyed by (seed, i + 1).
inline FunctionalSample simulate_trajectories(const CovarianceOperator& op, const std::function<double(double)>& mu,
                                              double sigma2, Index n, const DesignGrid& grid, std::uint64_t seed,
                                              const SimulationOptions& options = {}) {
  if (n < 2) throw InvalidArgument("simulate_trajectories: n must be >= 2");
  if (!(sigma2 >= 0.0)) throw InvalidArgument("simulate_trajectories: noise variance must be >= 0");
  const Index m = grid.m();
  const Vector& t = grid.points();

  FunctionalSample out;
  out.grid = grid;
  out.noise_var = sigma2;
  out.mean.resize(m);
  for (Index j = 0; j < m; ++j) out.mean(j) = mu ? mu(t(j)) : 0.0;
  out.observations.resize(n, m);

  const bool exact = options.prefer_exact && static_cast<bool>(op.path_sampler);
  Matrix basis;  // m x K_tr, sqrt(rho_k) phi_k(t_j)
  if (!exact) {
    const Index depth = kl_truncation_depth(op, m, options);
    basis.resize(m, depth);
    for (Index k = 1; k <= depth; ++k) {
      const double root = std::sqrt(op.eigenvalue(k));
      for (Index j = 0; j < m; ++j) basis(j, k - 1) = root * op.eigenfunction(k, t(j));
    }
  }

  const double noise_sd = std::sqrt(sigma2);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < n; ++i) {
    Rng rng(Rng::Key{seed, static_cast<std::uint64_t>(i) + 1}, Rng::Block{});
    Vector x;
    if (exact) {
      x = op.path_sampler(t, rng);
    } else {
      Vector z(basis.cols());
      for (Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
      x = basis * z;
    }
    for (Index j = 0; j < m; ++j) {
      const double e = noise_sd > 0.0 ? noise_sd * normal(rng) : 0.0;
      out.observations(i, j) = out.mean(j) + x(j) + e;
    }
  }
  return out;
}

// Sigma_n = m^-1 n^-1 sum (Y_i - Ybar)(Y_i - Ybar)'.
inline SymmetricMatrix scaled_sample_covariance(const FunctionalSample& sample) {
  if (sample.n() < 2) throw InvalidArgument("scaled_sample_covariance: n must be >= 2");
  return sample_covariance(sample.observations).scaled(1.0 / static_cast<double>(sample.m()));
}

// Sigma = K + m^-1 sigma^2 I.
inline SymmetricMatrix population_covariance(const CovarianceOperator& op, const DesignGrid& grid, double sigma2) {
  return discretize(op, grid).shifted(sigma2 / static_cast<double>(grid.m()));
}

// C4 = 3 C3^-1 C1^(beta3/beta1).
inline double operator_c4l(const CovarianceOperator& op) { return c4l_from_gap_envelope(op.decay.as_poly()); }

inline JumpDecision detect_operator_jump(const Vector& sample_eigenvalues, Index n, const CovarianceOperator& op,
                                         const ConstantsConfig& consts) {
  const DecayConstants& d = op.decay;
  if (!(d.beta3 > d.beta1 && d.beta1 > 1.0)) throw InvalidArgument("detect_operator_jump: need beta3 > beta1 > 1");
  JumpDecision out;
  out.regime = Regime::Two;
  out.rule = JumpRule::OperatorJump;
  out.noise_level = eta_empirical(sample_eigenvalues, n, Regime::Two, consts);
  const double c4l = consts.c4l.value_or(operator_c4l(op));
  out.threshold = poly_jump_threshold(c4l, out.noise_level, d.beta1, d.beta3);
  out.s_hat = scree_count(sample_eigenvalues, out.threshold);
  return out;
}

inline JumpDecision detect_operator_jump(const SymmetricMatrix& sigma_n, Index n, const CovarianceOperator& op,
                                         const ConstantsConfig& consts) {
  return detect_operator_jump(eigvalsh(sigma_n), n, op, consts);
}

// Whether index s satisfies the population jump condition for operators,
// given the true eta2, eps1 and C8.
inline bool operator_jump_condition(const CovarianceOperator& op, Index s, Index m, double sigma2, double eta2,
                                    double eps1, double c4l, double c8l_value) {
  const DecayConstants& d = op.decay;
  const double approx = c8l_value * std::pow(static_cast<double>(m), d.approx_exponent()) +
                        sigma2 / static_cast<double>(m) + eta2;
  const double e = d.beta1 / d.beta3;
  const double upper = std::pow(c4l * (1.0 + eps1) * eta2, e) + approx;
  const double lower = std::pow(c4l * (1.0 - eps1) * eta2, e) - approx;
  return op.eigenvalue(s) >= upper && op.eigenvalue(s + 1) < lower;
}

struct OperatorSelection {
  SelectionResult selection;
  double eta_f = 0.0;
  double eta_op = 0.0;
  double c7l = 0.0;
  double c8l = 0.0;
  double c10l = 0.0;
  Index depth_cap = 0;  // floor(m^(1/(beta1+gamma1)))
};

// eta_f = C10 (eta~2 + m^e);  eta_op = C1 (3 eta_f / (C3 alpha))^(beta1/beta3) + eta_f.
// C7 comes from consts or is fitted on the grid; C10 defaults to C8.
inline OperatorSelection select_operator_eigen(const Vector& sample_eigenvalues, Index n,
                                               const CovarianceOperator& op, const DesignGrid& grid, double alpha,
                                               const ConstantsConfig& consts) {
  require_alpha(alpha);
  const DecayConstants& d = op.decay;
  const Index m = grid.m();
  OperatorSelection out;
  out.depth_cap = eigenvector_depth(m, d);
  out.c7l = consts.c7l.value_or(gram_deviation(op, grid, std::max<Index>(out.depth_cap, 2)).fitted_c7l);
  out.c8l = c8l(op, out.c7l, consts.lambda0);
  out.c10l = consts.c10l.value_or(out.c8l);

  const double eta2 = eta_empirical(sample_eigenvalues, n, Regime::Two, consts);
  out.eta_f = out.c10l * (eta2 + std::pow(static_cast<double>(m), d.approx_exponent()));
  out.eta_op = d.c1l * std::pow(3.0 * out.eta_f / (d.c3l * alpha), d.beta1 / d.beta3) + out.eta_f;

  SelectionResult& sel = out.selection;
  sel.rule = SelectionRule::OperatorKop;
  sel.alpha = alpha;
  sel.threshold = out.eta_op;
  sel.K = scree_count(sample_eigenvalues, out.eta_op);
  for (Index k = 1; k <= std::min(sel.K, out.depth_cap); ++k) sel.certified_vectors.push_back(k);
  return out;
}

}  // namespace spectral

#pragma once

// Dense symmetric linear algebra: storage, eigendecomposition, norms,
// effective rank and eigenvector sign alignment.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "spectral_screener/error.hpp"

namespace spectral {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A dense real symmetric p x p matrix. Every mutation writes both (i,j) and
// (j,i), so entries(i,j) == entries(j,i) holds bit for bit.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Index dim) : data_(Matrix::Zero(check_dim(dim), dim)) {}

  // Accepts a dense square matrix whose asymmetry is below `rel_tol` times its
  // largest entry and stores the exact symmetric part (A + A') / 2.
  static SymmetricMatrix from_dense(const Matrix& dense, double rel_tol = 1e-10) {
    if (dense.rows() != dense.cols()) throw InvalidArgument("SymmetricMatrix: matrix is not square");
    SymmetricMatrix out(dense.rows());
    const double scale = dense.size() == 0 ? 0.0 : dense.cwiseAbs().maxCoeff();
    const double asym = (dense - dense.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= rel_tol * scale)) {
      throw InvalidArgument("SymmetricMatrix: input asymmetry " + std::to_string(asym) +
                            " exceeds tolerance");
    }
    out.data_ = 0.5 * (dense + dense.transpose());
    return out;
  }

  // Copies the lower triangle into the upper one. For results of
  // selfadjointView<Lower>() kernels.
  static SymmetricMatrix from_lower(Matrix dense) {
    if (dense.rows() != dense.cols()) throw InvalidArgument("SymmetricMatrix: matrix is not square");
    SymmetricMatrix out(dense.rows());
    dense.triangularView<Eigen::StrictlyUpper>() = dense.transpose().eval();
    out.data_ = std::move(dense);
    return out;
  }

  static SymmetricMatrix identity(Index dim) {
    SymmetricMatrix out(dim);
    out.data_.setIdentity();
    return out;
  }

  static SymmetricMatrix diagonal(const Vector& diag) {
    SymmetricMatrix out(diag.size());
    out.data_.diagonal() = diag;
    return out;
  }

  // V diag(values) V', symmetrized.
  static SymmetricMatrix from_spectrum(const Matrix& vectors, const Vector& values) {
    const Matrix dense = vectors * values.asDiagonal() * vectors.transpose();
    SymmetricMatrix out(dense.rows());
    out.data_ = 0.5 * (dense + dense.transpose());
    return out;
  }

  Index dim() const noexcept { return data_.rows(); }
  double operator()(Index i, Index j) const { return data_(i, j); }

  void set(Index i, Index j, double value) {
    data_(i, j) = value;
    data_(j, i) = value;
  }

  const Matrix& dense() const noexcept { return data_; }

  SymmetricMatrix operator+(const SymmetricMatrix& other) const { return combine(other, 1.0); }
  SymmetricMatrix operator-(const SymmetricMatrix& other) const { return combine(other, -1.0); }

  SymmetricMatrix scaled(double factor) const {
    SymmetricMatrix out(dim());
    out.data_ = data_ * factor;
    return out;
  }

  SymmetricMatrix shifted(double diagonal_shift) const {
    SymmetricMatrix out = *this;
    out.data_.diagonal().array() += diagonal_shift;
    return out;
  }

 private:
  static Index check_dim(Index dim) {
    if (dim < 1) throw InvalidArgument("SymmetricMatrix: dimension must be >= 1");
    return dim;
  }

  SymmetricMatrix combine(const SymmetricMatrix& other, double sign) const {
    if (other.dim() != dim()) throw InvalidArgument("SymmetricMatrix: dimension mismatch");
    SymmetricMatrix out(dim());
    out.data_ = data_ + sign * other.data_;
    return out;
  }

  Matrix data_;
};

// Eigenvalues in non-increasing order; column k of `eigenvectors` belongs to
// eigenvalues(k).
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;

  Index dim() const noexcept { return eigenvalues.size(); }
  Vector eigenvector(Index k) const { return eigenvectors.col(k); }

  Matrix reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }
};

struct JacobiOptions {
  int max_sweeps = 100;
  // Converged once the off-diagonal Frobenius mass is below tol * ||M||_F.
  double tolerance = 1e-13;
};

namespace detail {

// Stable descending order of `values`; ties keep their incoming order.
inline std::vector<Index> descending_order(const Vector& values) {
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values(a) > values(b); });
  return order;
}

inline SpectralDecomposition sorted(const Vector& values, const Matrix& vectors) {
  const auto order = descending_order(values);
  SpectralDecomposition out;
  out.eigenvalues.resize(values.size());
  out.eigenvectors.resize(vectors.rows(), vectors.cols());
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.eigenvalues(static_cast<Index>(k)) = values(order[k]);
    out.eigenvectors.col(static_cast<Index>(k)) = vectors.col(order[k]);
  }
  return out;
}

inline double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

}  // namespace detail

// Cyclic Jacobi eigensolver. Slow (about 6 p^3 flops per sweep) but simple
// and very accurate; used as the independent reference for eigh().
inline SpectralDecomposition eigh_jacobi(const SymmetricMatrix& m, JacobiOptions options = {}) {
  const Index p = m.dim();
  Matrix a = m.dense();
  Matrix v = Matrix::Identity(p, p);
  const double target = options.tolerance * a.norm();

  double off = detail::off_diagonal_norm(a);
  int sweep = 0;
  while (off > target) {
    if (sweep++ == options.max_sweeps) {
      throw ConvergenceError("eigh_jacobi: no convergence after " +
                                 std::to_string(options.max_sweeps) + " sweeps",
                             off);
    }
    for (Index q = 1; q < p; ++q) {
      for (Index r = 0; r < q; ++r) {
        const double apq = a(r, q);
        if (apq == 0.0) continue;
        // Symmetric Schur rotation annihilating a(r,q).
        const double theta = (a(q, q) - a(r, r)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < p; ++k) {
          const double akr = a(k, r);
          const double akq = a(k, q);
          a(k, r) = c * akr - s * akq;
          a(k, q) = s * akr + c * akq;
        }
        for (Index k = 0; k < p; ++k) {
          const double ark = a(r, k);
          const double aqk = a(q, k);
          a(r, k) = c * ark - s * aqk;
          a(q, k) = s * ark + c * aqk;
        }
        for (Index k = 0; k < p; ++k) {
          const double vkr = v(k, r);
          const double vkq = v(k, q);
          v(k, r) = c * vkr - s * vkq;
          v(k, q) = s * vkr + c * vkq;
        }
      }
    }
    off = detail::off_diagonal_norm(a);
  }
  return detail::sorted(a.diagonal(), v);
}

// Full symmetric eigendecomposition (Householder tridiagonalization followed
// by implicit QR, via Eigen). Deterministic for a fixed input.
inline SpectralDecomposition eigh(const SymmetricMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.dense(), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    const double residual = detail::off_diagonal_norm(m.dense());
    throw ConvergenceError("eigh: tridiagonal QR did not converge", residual);
  }
  // Eigen returns ascending order; reverse before the stable sort so that
  // exactly tied eigenvalues keep a fixed relative order.
  const Vector values = solver.eigenvalues().reverse();
  const Matrix vectors = solver.eigenvectors().rowwise().reverse();
  return detail::sorted(values, vectors);
}

// Eigenvalues only, non-increasing.
inline Vector eigvalsh(const SymmetricMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.dense(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("eigvalsh: tridiagonal QR did not converge",
                           detail::off_diagonal_norm(m.dense()));
  }
  return solver.eigenvalues().reverse();
}

// Largest absolute eigenvalue of a descending spectrum.
inline double operator_norm(const Vector& descending_eigenvalues) {
  if (descending_eigenvalues.size() == 0) return 0.0;
  return std::max(std::abs(descending_eigenvalues(0)),
                  std::abs(descending_eigenvalues(descending_eigenvalues.size() - 1)));
}

inline double operator_norm(const SymmetricMatrix& m) { return operator_norm(eigvalsh(m)); }

inline double frobenius_norm(const SymmetricMatrix& m) { return m.dense().norm(); }

inline double trace(const SymmetricMatrix& m) { return m.dense().trace(); }

// r_e = trace / operator norm, from a descending spectrum.
inline double effective_rank(const Vector& descending_eigenvalues) {
  const double tr = descending_eigenvalues.sum();
  const double norm = operator_norm(descending_eigenvalues);
  if (!(tr > 0.0) || norm == 0.0) {
    throw DegenerateInput("effective_rank: requires trace > 0 and nonzero operator norm");
  }
  return tr / norm;
}

inline double effective_rank(const SymmetricMatrix& m) {
  const double tr = trace(m);
  if (!(tr > 0.0)) throw DegenerateInput("effective_rank: requires trace > 0");
  const double norm = operator_norm(m);
  if (norm == 0.0) throw DegenerateInput("effective_rank: zero operator norm");
  return tr / norm;
}

// Returns `estimated` or its negation so that the inner product with
// `reference` is nonnegative. An exactly zero inner product returns the input
// unchanged. Both vectors must be unit-norm within `unit_tol`.
inline Vector align_sign(const Vector& estimated, const Vector& reference, double unit_tol = 1e-6) {
  if (estimated.size() != reference.size()) throw InvalidArgument("align_sign: size mismatch");
  if (std::abs(estimated.norm() - 1.0) > unit_tol || std::abs(reference.norm() - 1.0) > unit_tol) {
    throw InvalidArgument("align_sign: arguments must be unit vectors");
  }
  return estimated.dot(reference) < 0.0 ? Vector(-estimated) : estimated;
}

// Maximum absolute deviation of V'V from the identity.
inline double orthonormality_defect(const Matrix& vectors) {
  const Index k = vectors.cols();
  return (vectors.transpose() * vectors - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
}

}  // namespace spectral

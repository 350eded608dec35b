#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "oracles.hpp"
#include "spectral_screener/fpca.hpp"
#include "spectral_screener/harness/fpca_io.hpp"

using namespace spectral;
using std::numbers::pi;

namespace {

// rho_k = 2^-k with a cosine basis; KL-only (no exact sampler).
CovarianceOperator geometric_cosine() {
  CovarianceOperator op;
  op.name = "geometric_cosine";
  op.eigenvalue = [](Index k) { return std::ldexp(1.0, -static_cast<int>(k)); };
  op.eigenfunction = [](Index k, double t) { return std::numbers::sqrt2 * std::cos(static_cast<double>(k) * pi * t); };
  op.kernel = [op](double s, double t) {
    double sum = 0.0;
    for (Index k = 1; k <= 60; ++k) sum += op.eigenvalue(k) * op.eigenfunction(k, s) * op.eigenfunction(k, t);
    return sum;
  };
  op.rho0 = 1.0;
  return op;
}

CovarianceOperator constant_function() {
  CovarianceOperator op = brownian_motion();
  op.eigenfunction = [](Index, double) { return 1.0; };
  return op;
}

}  // namespace

TEST(Operators, BrownianTopEigenvalueFromFineGrid) {
  const auto op = brownian_motion();
  EXPECT_NEAR(op.eigenvalue(1), 4.0 / (pi * pi), 1e-15);
  const double top = eigvalsh(discretize(op, DesignGrid::uniform(2000))).maxCoeff();
  EXPECT_NEAR(top, 0.405285, 1e-4);
  EXPECT_NEAR(top, op.eigenvalue(1), 1e-4);
}

TEST(Operators, BrownianTraceIntegral) {
  const auto op = brownian_motion();
  // Midpoint rule is exact for the linear diagonal t.
  const auto grid = DesignGrid::uniform(500);
  double integral = 0.0;
  for (Index j = 0; j < grid.m(); ++j) integral += op.kernel(grid.points()(j), grid.points()(j)) / 500.0;
  EXPECT_NEAR(integral, 0.5, 1e-14);
  EXPECT_EQ(op.rho0, 0.5);
}

TEST(Operators, BridgeKernelAtMidpoint) {
  EXPECT_DOUBLE_EQ(brownian_bridge().kernel(0.5, 0.5), 0.25);
  EXPECT_NEAR(brownian_bridge().rho0, 1.0 / 6.0, 1e-15);
}

TEST(Operators, KernelSymmetricAndMercerSums) {
  for (const auto& op : {brownian_motion(), brownian_bridge()}) {
    for (double s : {0.1, 0.35, 0.8}) {
      for (double t : {0.2, 0.5, 0.95}) {
        EXPECT_EQ(op.kernel(s, t), op.kernel(t, s));
        double partial = 0.0;
        double prev_err = INFINITY;
        for (Index k = 1; k <= 4000; ++k) {
          partial += op.eigenvalue(k) * op.eigenfunction(k, s) * op.eigenfunction(k, t);
          if (k == 40 || k == 400 || k == 4000) {
            const double err = std::abs(partial - op.kernel(s, t));
            EXPECT_LE(err, prev_err + 1e-12);
            prev_err = err;
          }
        }
        EXPECT_LT(prev_err, 1e-3);
      }
    }
  }
}

TEST(Operators, EigenfunctionSupBound) {
  for (const auto& op : {brownian_motion(), brownian_bridge()}) {
    for (Index k = 1; k <= 50; ++k)
      for (int j = 0; j <= 200; ++j) EXPECT_LE(std::abs(op.eigenfunction(k, j / 200.0)), op.decay.c5l + 1e-15);
  }
}

TEST(Operators, EnvelopeConstantsForBrownianMotion) {
  const auto op = brownian_motion();
  const auto d = envelope_constants(op.eigenvalue, op.decay, 2000);
  EXPECT_NEAR(d.c1l, 4.0 / (pi * pi), 1e-12);
  EXPECT_LE(d.c2l, 1.0 / (pi * pi) * 1.01);
  EXPECT_GE(d.c2l, 1.0 / (pi * pi));
  EXPECT_GE(d.c3l, 2.0 / (pi * pi) * 0.99);
  EXPECT_THROW(envelope_constants(op.eigenvalue, op.decay, 1), InvalidArgument);
}

TEST(DesignGrid, Validation) {
  EXPECT_NO_THROW(DesignGrid(Vector{{1.0 / 3.0, 2.0 / 3.0}}, 2.0));
  EXPECT_THROW(DesignGrid(Vector{{0.01, 0.99}}, 2.0), InvalidArgument);
  EXPECT_THROW(DesignGrid(Vector{{0.5}}, 0.5), InvalidArgument);
  EXPECT_EQ(DesignGrid::uniform(4).mesh_constant(), 2.0);
  EXPECT_EQ(DesignGrid::uniform(4, 0.25).mesh_constant(), 4.0);
  EXPECT_EQ(DesignGrid::uniform(4, 1.0).points()(3), 1.0);
}

TEST(Discretize, TwoPointBrownianMatrix) {
  const DesignGrid grid(Vector{{1.0 / 3.0, 2.0 / 3.0}}, 2.0);
  const Matrix k = discretize(brownian_motion(), grid).dense();
  const Matrix expect = 0.5 * (Matrix(2, 2) << 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0).finished();
  EXPECT_LT((k - expect).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Discretize, BrownianTraceOnRightEndpointGrid) {
  for (Index m : {1, 2, 7, 100, 1001}) {
    const double tr = trace(discretize(brownian_motion(), DesignGrid::uniform(m, 1.0)));
    const double md = static_cast<double>(m);
    EXPECT_NEAR(tr, (md + 1.0) / (2.0 * md), 1e-13);
    EXPECT_LE(std::abs(tr - 0.5), 0.5 / md + 1e-15);
  }
}

TEST(Discretize, SymmetricPsdAndBoundedEffectiveRank) {
  for (const auto& op : {brownian_motion(), brownian_bridge()}) {
    for (Index m : {10, 100, 400}) {
      const SymmetricMatrix k = discretize(op, DesignGrid::uniform(m));
      EXPECT_EQ(k.dense(), k.dense().transpose());
      const Vector ev = eigvalsh(k);
      EXPECT_GE(ev.minCoeff(), -1e-12);
      const double rho1 = op.eigenvalue(1);
      EXPECT_LE(effective_rank(ev), (op.rho0 + 1.0 / static_cast<double>(m)) / (0.9 * rho1));
    }
  }
}

TEST(Discretize, NoiseShiftsWholeSpectrum) {
  const auto op = brownian_motion();
  const auto grid = DesignGrid::uniform(60);
  const SymmetricMatrix k = discretize(op, grid);
  const SymmetricMatrix s = population_covariance(op, grid, 0.3);
  const auto dk = eigh(k);
  const auto ds = eigh(s);
  EXPECT_LE((ds.eigenvalues - dk.eigenvalues - Vector::Constant(60, 0.3 / 60.0)).cwiseAbs().maxCoeff(), 1e-13);
  // Eigenvectors of the shifted matrix are still eigenvectors of K.
  for (Index k2 = 0; k2 < 60; ++k2) {
    const Vector v = ds.eigenvector(k2);
    EXPECT_LT((k.dense() * v - dk.eigenvalues(k2) * v).norm(), 1e-12);
  }
}

TEST(PhiVector, ConstantEigenfunctionHasUnitNorm) {
  for (Index m : {1, 3, 50, 777}) EXPECT_NEAR(phi_vector(constant_function(), 1, DesignGrid::uniform(m)).norm(), 1.0, 1e-14);
  EXPECT_THROW(phi_vector(brownian_motion(), 0, DesignGrid::uniform(3)), InvalidArgument);
}

TEST(PhiVector, GramEnvelopeWithFittedConstant) {
  for (const auto& op : {brownian_motion(), brownian_bridge()}) {
    const auto fit = gram_deviation(op, DesignGrid::uniform(100, 0.25), 10);
    EXPECT_GT(fit.fitted_c7l, 0.0);
    for (Index m : {100, 400, 1600}) {
      const auto grid = DesignGrid::uniform(m, 0.25);
      const Matrix phi = phi_matrix(op, 10, grid);
      const Matrix gram = phi.transpose() * phi;
      for (Index a = 0; a < 10; ++a)
        for (Index b = 0; b < 10; ++b) {
          const double dev = std::abs(gram(a, b) - (a == b ? 1.0 : 0.0));
          EXPECT_LE(dev, fit.fitted_c7l * static_cast<double>(std::max(a, b) + 1) / static_cast<double>(m) * (1 + 1e-9));
        }
    }
  }
}

TEST(PhiVector, GramDeviationSlope) {
  std::vector<double> ms;
  std::vector<double> devs;
  for (Index m : {100, 400, 1600}) {
    ms.push_back(static_cast<double>(m));
    devs.push_back(gram_deviation(brownian_motion(), DesignGrid::uniform(m, 0.25), 10).max_deviation);
  }
  const double slope = oracle::loglog_slope(ms, devs);
  EXPECT_GE(slope, -1.2);
  EXPECT_LE(slope, -0.8);
}

TEST(Approximation, ExponentAndRates) {
  const auto op = brownian_motion();
  EXPECT_NEAR(op.decay.approx_exponent(), -1.0 / 3.0, 1e-15);
  std::vector<double> ms;
  std::vector<double> eig;
  std::vector<double> tr;
  for (Index m : {64, 256, 1024}) {
    const auto r = approximation_report(op, DesignGrid::uniform(m, 0.25), 10);
    ms.push_back(static_cast<double>(m));
    eig.push_back(r.eigenvalue_deviation);
    tr.push_back(r.trace_deviation);
    EXPECT_NEAR(r.trace_deviation, 0.25 / static_cast<double>(m), 1e-13);
    EXPECT_LE(r.eigenvalue_deviation, r.eigenvalue_bound);
    EXPECT_EQ(r.vector_depth, std::min<Index>(10, eigenvector_depth(m, op.decay)));
    EXPECT_EQ(r.envelope_stated.size(), static_cast<std::size_t>(r.vector_depth));
    for (std::size_t k = 0; k < r.eigenvector_errors.size(); ++k) {
      EXPECT_LE(r.eigenvector_errors[k], r.envelope_stated[k]);
      EXPECT_LE(r.eigenvector_errors[k], r.envelope_derived[k]);
    }
  }
  const double eig_slope = oracle::loglog_slope(ms, eig);
  EXPECT_LE(eig_slope, -0.25);
  EXPECT_GE(eig_slope, -1.4);
  EXPECT_NEAR(oracle::loglog_slope(ms, tr), -1.0, 0.01);
}

TEST(Approximation, EigenvectorDepthAndC8) {
  DecayConstants d;
  EXPECT_EQ(eigenvector_depth(1000, d), 10);
  EXPECT_EQ(eigenvector_depth(999, d), 9);
  EXPECT_EQ(eigenvector_depth(500, d), 7);
  const auto op = brownian_motion();
  const double c1 = 4.0 / (pi * pi);
  EXPECT_NEAR(c8l(op, 0.5), 2.0 * c1 / 1.0 + c1 + 13.0 * 0.5 * 0.5, 1e-14);
  EXPECT_NEAR(c8l(op, 0.5, ConstantsConfig::Lambda0Reading::Rho1), 3.0 * c1 + 13.0 * 0.5 * c1, 1e-14);
}

TEST(Approximation, ValidityFlag) {
  ConstantsConfig k;
  k.c7l = 100.0;
  const auto r = approximation_report(brownian_motion(), DesignGrid::uniform(64), 5, k);
  EXPECT_FALSE(r.validity_ok);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_THROW(approximation_report(brownian_motion(), DesignGrid::uniform(4), 5), InvalidArgument);
}

TEST(Simulate, BrownianVarianceAtOne) {
  const auto grid = DesignGrid::uniform(10, 1.0);
  const auto sample = simulate_trajectories(brownian_motion(), nullptr, 0.0, 100000, grid, 3);
  const Vector last = sample.observations.col(9);
  const double mean = last.mean();
  const double var = (last.array() - mean).square().mean();
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Simulate, MeanShiftAndNoise) {
  const auto grid = DesignGrid::uniform(8);
  const auto sample = simulate_trajectories(brownian_bridge(), [](double) { return 2.5; }, 0.25, 20000, grid, 4);
  EXPECT_EQ(sample.mean, Vector::Constant(8, 2.5));
  for (Index j = 0; j < 8; ++j) {
    const Vector col = sample.observations.col(j);
    EXPECT_NEAR(col.mean(), 2.5, 0.03);
    const double t = grid.points()(j);
    const double var = (col.array() - col.mean()).square().mean();
    EXPECT_NEAR(var, t - t * t + 0.25, 0.03);
  }
}

TEST(Simulate, DeterministicPerSeed) {
  const auto grid = DesignGrid::uniform(16);
  const auto a = simulate_trajectories(brownian_motion(), nullptr, 0.1, 50, grid, 9);
  const auto b = simulate_trajectories(brownian_motion(), nullptr, 0.1, 50, grid, 9);
  EXPECT_EQ(a.observations, b.observations);
  EXPECT_NE(a.observations, simulate_trajectories(brownian_motion(), nullptr, 0.1, 50, grid, 10).observations);
  EXPECT_THROW(simulate_trajectories(brownian_motion(), nullptr, 0.1, 1, grid, 9), InvalidArgument);
}

TEST(Simulate, KarhunenLoeveMatchesKernel) {
  const auto op = geometric_cosine();
  const auto grid = DesignGrid::uniform(5);
  const auto sample = simulate_trajectories(op, nullptr, 0.0, 100000, grid, 12);
  const Matrix cov = oracle::covariance(sample.observations);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) EXPECT_NEAR(cov(i, j), op.kernel(grid.points()(i), grid.points()(j)), 0.03);
  EXPECT_EQ(kl_truncation_depth(op, 5), 20);
}

TEST(Simulate, TruncationReportsAchievedTail) {
  SimulationOptions opts;
  opts.prefer_exact = false;
  try {
    simulate_trajectories(brownian_bridge(), nullptr, 0.0, 10, DesignGrid::uniform(20), 1, opts);
    FAIL() << "expected truncation error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("tail trace"), std::string::npos);
  }
}

TEST(Simulate, PlantedJumpSamplerMatchesKernel) {
  const auto op = planted_jump(brownian_motion(), 3, 0.01);
  EXPECT_NEAR(op.eigenvalue(3), brownian_motion().eigenvalue(3), 1e-15);
  EXPECT_NEAR(op.eigenvalue(4), 0.01 * brownian_motion().eigenvalue(4), 1e-15);
  const auto grid = DesignGrid::uniform(6);
  const Vector ev = eigvalsh(discretize(op, DesignGrid::uniform(400)));
  EXPECT_NEAR(ev(0), op.eigenvalue(1), 1e-3);
  EXPECT_LT(ev(3), 2e-3);
  const Matrix cov = oracle::covariance(simulate_trajectories(op, nullptr, 0.0, 100000, grid, 2).observations);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) EXPECT_NEAR(cov(i, j), op.kernel(grid.points()(i), grid.points()(j)), 0.015);
  EXPECT_THROW(planted_jump(brownian_motion(), 0, 0.1), InvalidArgument);
  EXPECT_THROW(planted_jump(geometric_cosine(), 2, 0.1), InvalidArgument);
}

TEST(ScaledCovariance, DefinitionAndPair) {
  const auto grid = DesignGrid::uniform(7);
  const auto sample = simulate_trajectories(brownian_motion(), nullptr, 0.2, 30, grid, 5);
  EXPECT_LT((scaled_sample_covariance(sample).dense() - oracle::covariance(sample.observations) / 7.0).cwiseAbs().maxCoeff(),
            1e-14);

  FunctionalSample pair;
  pair.grid = DesignGrid::uniform(4);
  const Vector phi = phi_vector(brownian_motion(), 1, pair.grid) * 2.0;
  pair.observations.resize(2, 4);
  pair.observations.row(0) = phi.transpose();
  pair.observations.row(1) = -phi.transpose();
  const Vector ev = eigvalsh(scaled_sample_covariance(pair));
  EXPECT_GT(ev(0), 0.0);
  EXPECT_LT(ev.tail(3).cwiseAbs().maxCoeff(), 1e-15);

  FunctionalSample single;
  single.grid = DesignGrid::uniform(3);
  single.observations = Matrix::Ones(1, 3);
  EXPECT_THROW(scaled_sample_covariance(single), InvalidArgument);
}

TEST(OperatorJump, ThresholdFollowsPolyRule) {
  const auto op = brownian_motion();
  ConstantsConfig k;
  k.C = 0.5;
  const Vector ev = eigvalsh(population_covariance(op, DesignGrid::uniform(200), 0.0));
  const auto d = detect_operator_jump(ev, 1000, op, k);
  EXPECT_EQ(d.rule, JumpRule::OperatorJump);
  const double c4 = 3.0 / op.decay.c3l * std::pow(op.decay.c1l, 1.5);
  EXPECT_NEAR(operator_c4l(op), c4, 1e-12);
  EXPECT_NEAR(d.threshold, std::pow(c4 * d.noise_level, 2.0 / 3.0), 1e-14);
  double prev = 0.0;
  for (double C : {0.01, 0.1, 1.0}) {
    k.C = C;
    const double t = detect_operator_jump(ev, 1000, op, k).threshold;
    EXPECT_GT(t, prev);
    prev = t;
  }
}

TEST(OperatorJump, ThresholdOrderInSampleSize) {
  // With the population spectrum fixed, the threshold scales as (ln n / n)^(1/3).
  const auto op = brownian_motion();
  const Vector ev = eigvalsh(discretize(op, DesignGrid::uniform(100)));
  ConstantsConfig k;
  const double t1 = detect_operator_jump(ev, 1000, op, k).threshold;
  const double t2 = detect_operator_jump(ev, 100000, op, k).threshold;
  const double ratio = std::cbrt((std::log(1e5) / 1e5) / (std::log(1e3) / 1e3));
  EXPECT_NEAR(t2 / t1, ratio, 1e-12);
}

TEST(OperatorSelect, CapAndFormulas) {
  const auto op = brownian_motion();
  for (Index m : {27, 64, 125, 1000}) {
    const auto grid = DesignGrid::uniform(m);
    const Vector ev = eigvalsh(population_covariance(op, grid, 0.0));
    ConstantsConfig k;
    k.C = 1e-6;
    k.c10l = 1e-6;
    const auto sel = select_operator_eigen(ev, 100000, op, grid, 0.5, k);
    EXPECT_LE(static_cast<Index>(sel.selection.certified_vectors.size()),
              static_cast<Index>(std::floor(std::cbrt(static_cast<double>(m)) + 1e-9)));
    EXPECT_EQ(sel.depth_cap, eigenvector_depth(m, op.decay));
    const double eta2 = eta_empirical(ev, 100000, Regime::Two, k);
    const double eta_f = 1e-6 * (eta2 + std::pow(static_cast<double>(m), -1.0 / 3.0));
    EXPECT_NEAR(sel.eta_f, eta_f, 1e-18);
    const double eta_op = op.decay.c1l * std::pow(3.0 * eta_f / (op.decay.c3l * 0.5), 2.0 / 3.0) + eta_f;
    EXPECT_NEAR(sel.eta_op, eta_op, 1e-15);
    EXPECT_EQ(sel.selection.K, (ev.array() >= eta_op).count());
  }
}

TEST(OperatorSelect, NoiseLevelOrders) {
  // eta_op tracks (ln n / n)^(1/3) once the m term is negligible.
  const auto op = brownian_motion();
  const auto grid = DesignGrid::uniform(64);
  const Vector ev = eigvalsh(discretize(op, grid));
  ConstantsConfig k;
  k.c10l = 1.0;
  const auto a = select_operator_eigen(ev, 1000, op, grid, 0.5, k);
  EXPECT_NEAR(a.eta_f, eta_empirical(ev, 1000, Regime::Two, k) + 0.25, 1e-12);
  EXPECT_NEAR(std::pow(64.0, -1.0 / 3.0), 0.25, 1e-15);
}

TEST(OperatorJumpCondition, MatchesDefinition) {
  const auto op = planted_jump(brownian_motion(), 4, 1e-4);
  const double eta2 = 1e-5;
  const double c4 = 1.0;
  const double c8 = 1e-3;
  const Index m = 1000;
  const double approx = c8 * std::pow(1000.0, -1.0 / 3.0) + 0.0 + eta2;
  const bool expect = op.eigenvalue(4) >= std::pow(c4 * eta2, 2.0 / 3.0) + approx &&
                      op.eigenvalue(5) < std::pow(c4 * eta2, 2.0 / 3.0) - approx;
  EXPECT_EQ(operator_jump_condition(op, 4, m, 0.0, eta2, 0.0, c4, c8), expect);
}

TEST(FunctionalIo, CsvRoundTrip) {
  const auto grid = DesignGrid::uniform(5, 0.25);
  const auto sample = simulate_trajectories(brownian_motion(), [](double t) { return t; }, 0.5, 6, grid, 1);
  const auto dir = std::filesystem::temp_directory_path() / "spectral_screener_fpca_io";
  std::filesystem::create_directories(dir);
  const std::string csv = (dir / "sample.csv").string();
  const std::string side = (dir / "sample.json").string();
  harness::write_functional_sample(sample, csv, side);
  const auto back = harness::read_functional_sample(csv, side);
  EXPECT_EQ(back.observations, sample.observations);
  EXPECT_EQ(back.grid.points(), sample.grid.points());
  EXPECT_EQ(back.grid.mesh_constant(), 4.0);
  EXPECT_EQ(back.noise_var, 0.5);
  EXPECT_EQ(back.mean, sample.mean);
  std::filesystem::remove_all(dir);
}

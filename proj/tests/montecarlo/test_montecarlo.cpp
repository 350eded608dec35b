// Seeded Monte Carlo checks of the frequency examples. Each test records the
// observed frequency so the numbers show up in the XML output.

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "scenarios.hpp"

using namespace spectral;
using namespace spectral::harness;

class MonteCarlo : public ::testing::Test {
 protected:
  // ctest runs each test in its own process; the calibration is shared
  // through the workspace directory.
  static void SetUpTestSuite() {
    workspace_ = new scenario::Workspace(scenario::calibrated_workspace("montecarlo", true));
  }
  static void TearDownTestSuite() {
    delete workspace_;
    workspace_ = nullptr;
  }

  static ExperimentOutput run_named(const std::string& name) {
    const ExperimentConfig c = workspace_->load(name);
    ExperimentOutput out = run_experiment(c);
    for (const auto& [flag, value] : out.summary.at("frequencies").items()) {
      ::testing::Test::RecordProperty(flag, std::to_string(value.get<double>()));
    }
    return out;
  }

  static scenario::Workspace* workspace_;
};

scenario::Workspace* MonteCarlo::workspace_ = nullptr;

TEST_F(MonteCarlo, CalibratedTraceConstantInSanityEnvelope) {
  const auto& e = workspace_->calibration;
  RecordProperty("c1", std::to_string(e.c1));
  RecordProperty("C", std::to_string(e.C));
  EXPECT_EQ(e.n, 4000);
  EXPECT_EQ(e.reps, 1000);
  EXPECT_GE(e.c1, 0.1);
  EXPECT_LE(e.c1, 3.0);
  EXPECT_GT(e.C, 0.0);
}

TEST_F(MonteCarlo, NormBoundFrequencies) {
  const ExperimentOutput out = run_named("norm_bounds");
  const double target = 1.0 - 5.0 / 4000.0;
  EXPECT_GE(out.frequency("frob_ok"), target);
  EXPECT_GE(out.frequency("op_ok"), 1.0 - 4.0 / 4000.0 - 0.02);
  EXPECT_EQ(out.frequency("weyl_ok"), 1.0);
}

TEST_F(MonteCarlo, PlantedPolyJumpRecovered) {
  const ExperimentOutput out = run_named("planted_jump");
  const auto s_hat = out.column("s_hat");
  RecordProperty("median_s_hat", std::to_string(median(s_hat)));
  EXPECT_GE(out.frequency("hit"), 0.9) << "median s_hat " << median(s_hat);
}

TEST_F(MonteCarlo, CombinedPolySelection) {
  const ExperimentOutput out = run_named("combined_poly");
  EXPECT_GE(out.frequency("both_ok"), 0.95);
  for (double k : out.column("K")) EXPECT_GE(k, 1.0);
}

TEST_F(MonteCarlo, BrownianSelectionFineGrid) {
  const ExperimentOutput out = run_named("bm_select_fine");
  RecordProperty("mean_certified", std::to_string(mean(out.column("certified"))));
  RecordProperty("median_eta_op", std::to_string(median(out.column("eta_op"))));
  EXPECT_GE(out.frequency("cert_ok"), 0.95);
  EXPECT_EQ(out.frequency("cap_ok"), 1.0);
  for (double cap : out.column("depth_cap")) EXPECT_EQ(cap, 10.0);
}

// E||S_n - S||_2 at fixed m shrinks like sqrt(ln n / n).
TEST_F(MonteCarlo, ScaledCovarianceErrorRatio) {
  const CovarianceOperator op = brownian_motion();
  const DesignGrid grid = DesignGrid::uniform(100);
  const SymmetricMatrix sigma = population_covariance(op, grid, 0.0);
  const auto mean_error = [&](Index n, std::uint64_t base) {
    double sum = 0.0;
    const int reps = 100;
    for (int t = 0; t < reps; ++t) {
      const auto sample = simulate_trajectories(op, nullptr, 0.0, n, grid, base + static_cast<std::uint64_t>(t));
      sum += operator_norm(scaled_sample_covariance(sample) - sigma);
    }
    return sum / reps;
  };
  const double ratio = mean_error(1600, 13000000) / mean_error(400, 13100000);
  RecordProperty("ratio", std::to_string(ratio));
  EXPECT_GE(ratio, 0.4);
  EXPECT_LE(ratio, 0.65);
}

// Noise-level chain: where the eigenvalue event holds, the fPCA deviation
// stays under its envelope.
TEST_F(MonteCarlo, FpcaChainGivenEigenvalueEvent) {
  const ExperimentOutput out = run_named("bm_select");
  EXPECT_EQ(out.frequency("fpca_bound_given_event"), 1.0);
}

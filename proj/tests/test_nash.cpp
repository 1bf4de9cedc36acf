#include <gtest/gtest.h>

#include "oracles.hpp"
#include "weakmfg/nash.hpp"
#include "weakmfg/solver.hpp"

using namespace weakmfg;

TEST(Kernel, UnitMass) {
  const int M = 2000;
  double s1 = 0.0;
  for (int i = 0; i < M; ++i) s1 += periodic_kernel({(i + 0.5) / M, 0.0}, {0.9, 0.0}, 0.3, 1) / M;
  EXPECT_NEAR(s1, 1.0, 1e-6);
  const int M2 = 400;
  double s2 = 0.0;
  for (int i = 0; i < M2; ++i)
    for (int j = 0; j < M2; ++j) s2 += periodic_kernel({(i + 0.5) / M2, (j + 0.5) / M2}, {0.05, 0.5}, 0.4, 2);
  EXPECT_NEAR(s2 / (M2 * M2), 1.0, 1e-4);
  EXPECT_EQ(bump_kernel({1.0, 0.0}, 1), 0.0);
}

TEST(MollifiedCoupling, UniformCloudSeesUnitDensity) {
  std::vector<Point> pos;
  for (int j = 0; j < 200; ++j) pos.push_back({(j + 0.5) / 200, 0.0});
  PowerCoupling f{2.0, SpatialField(1, 16, 1.0), 0.0};
  EXPECT_NEAR(mollified_coupling({0.37, 0.0}, pos, 0.4, 0.4, f, 1), 1.0, 1e-6);
  EXPECT_THROW(mollified_coupling({0.0, 0.0}, {}, 0.4, 0.4, f, 1), std::invalid_argument);
}

TEST(CircleW1, MatchesDirectMinimization) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 8;
  std::vector<double> density(n);
  double total = 0.0;
  for (double& v : density) total += (v = 0.2 + u(rng));
  for (double& v : density) v *= n / total;
  std::vector<double> samples(37);
  for (double& s : samples) s = u(rng);
  // Cell i covers [i/n - 1/(2n), i/n + 1/(2n)); CDFs measured from 0.
  auto G = [&](double x) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double lo = i / double(n) - 0.5 / n;
      const double hi = lo + 1.0 / n;
      auto seg = [&](double a, double b) { return std::max(0.0, std::min(b, x) - std::max(a, 0.0)); };
      acc += density[i] * (seg(lo, hi) + seg(lo + 1.0, hi + 1.0));
    }
    return acc;
  };
  auto F = [&](double x) {
    double c = 0.0;
    for (double s : samples) c += s <= x ? 1.0 : 0.0;
    return c / samples.size();
  };
  const int Q = 20000;
  std::vector<double> diff(Q);
  for (int j = 0; j < Q; ++j) diff[j] = F((j + 0.5) / Q) - G((j + 0.5) / Q);
  const double c = oracle::zoom_min_1d(
      [&](double cc) {
        double s = 0.0;
        for (double v : diff) s += std::abs(v - cc);
        return s / Q;
      },
      -1.0, 1.0, 81, 40);
  double ref = 0.0;
  for (double v : diff) ref += std::abs(v - c) / Q;
  EXPECT_NEAR(circle_w1(samples, density), ref, 1e-4);
}

TEST(GameConfig, Validation) {
  const SpaceTimeGrid g(1, 16, 16, 1.0);
  GameConfig cfg;
  cfg.N = 1;
  cfg.sample_players = 1;
  EXPECT_THROW(validate_game(cfg, g), GameConfigError);
  cfg = GameConfig{};
  cfg.delta = 0.05;
  EXPECT_THROW(validate_game(cfg, g), GameConfigError);
  cfg = GameConfig{};
  cfg.sample_players = 100;
  EXPECT_THROW(validate_game(cfg, g), GameConfigError);
  EXPECT_NO_THROW(validate_game(GameConfig{}, g));
}

class NashHomogeneous : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new ProblemData(homogeneous_problem(1, 16, 16));
    result_ = new SolveResult(solve(*data_, SolverConfig{}));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete result_;
  }
  static ProblemData* data_;
  static SolveResult* result_;
};
ProblemData* NashHomogeneous::data_ = nullptr;
SolveResult* NashHomogeneous::result_ = nullptr;

TEST_F(NashHomogeneous, SamplingIsSeedDeterministic) {
  GameConfig cfg;
  cfg.N = 16;
  const auto a = sample_equilibrium_trajectories(*data_, result_->primal, cfg);
  const auto b = sample_equilibrium_trajectories(*data_, result_->primal, cfg);
  ASSERT_EQ(a.paths.size(), 16u);
  for (std::size_t j = 0; j < a.paths.size(); ++j) {
    ASSERT_EQ(a.paths[j].size(), b.paths[j].size());
    for (std::size_t s = 0; s < a.paths[j].size(); ++s) EXPECT_EQ(a.paths[j][s], b.paths[j][s]);
  }
  cfg.seed = 9;
  const auto c = sample_equilibrium_trajectories(*data_, result_->primal, cfg);
  EXPECT_NE(a.x0[0], c.x0[0]);
  EXPECT_EQ(a.steps(), static_cast<std::size_t>(16 * cfg.ode_steps));
}

TEST_F(NashHomogeneous, GainsNonNegativeUpToQuadrature) {
  GameConfig cfg;
  cfg.N = 32;
  cfg.sample_players = 32;
  const auto ens = sample_equilibrium_trajectories(*data_, result_->primal, cfg);
  const NashReport rep = nash_gap(ens, *data_, result_->primal, result_->dual, cfg);
  ASSERT_EQ(rep.players.size(), 32u);
  double worst = 0.0;
  for (const auto& row : rep.players) {
    EXPECT_GE(row.gain, -1e-3);
    EXPECT_NEAR(row.gain, row.cost - row.best_response_cost, 1e-15);
    worst = std::max(worst, row.gain);
  }
  EXPECT_DOUBLE_EQ(rep.epsilon_hat, worst);
  EXPECT_NEAR(rep.value, 1.0, 1e-4);
  EXPECT_NEAR(rep.mean_cost, rep.value, 0.1);
  EXPECT_FALSE(rep.lipschitz_warning);
  ASSERT_EQ(rep.wasserstein.size(), 17u);
}

TEST_F(NashHomogeneous, IndependentOfWorkerCount) {
  GameConfig cfg;
  cfg.N = 24;
  cfg.sample_players = 6;
  default_executor(1);
  const auto e1 = sample_equilibrium_trajectories(*data_, result_->primal, cfg);
  const NashReport r1 = nash_gap(e1, *data_, result_->primal, result_->dual, cfg);
  default_executor(3);
  const auto e3 = sample_equilibrium_trajectories(*data_, result_->primal, cfg);
  const NashReport r3 = nash_gap(e3, *data_, result_->primal, result_->dual, cfg);
  default_executor(1);
  EXPECT_EQ(r1.epsilon_hat, r3.epsilon_hat);
  EXPECT_EQ(r1.mean_cost, r3.mean_cost);
  EXPECT_EQ(r1.energy_defect, r3.energy_defect);
}

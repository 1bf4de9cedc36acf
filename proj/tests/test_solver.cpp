#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "weakmfg/io.hpp"
#include "weakmfg/solver.hpp"

using namespace weakmfg;

namespace {

Eigen::MatrixXd dense_lambda(const SpaceTimeGrid& g) {
  const std::size_t free = static_cast<std::size_t>(g.nt()) * g.slice_size();
  const std::size_t rows = free * (1 + 2 * g.dim());
  Eigen::MatrixXd L(rows, free);
  for (std::size_t j = 0; j < free; ++j) {
    Field e(g, TimeLoc::node, SpaceLoc::node);
    e.values[j] = 1.0;
    const CellPair y = apply_lambda(e, false);
    for (std::size_t r = 0; r < y.a.size(); ++r) L(r, j) = y.a[r];
    for (std::size_t r = 0; r < y.b.size(); ++r) L(y.a.size() + r, j) = y.b[r];
  }
  return L;
}

const char* kSmallProblem = R"(name: small
d: 1
nx: 4
nt: 4
T: 1
hamiltonian:
  r: 2
  potential: cosine(0.2, 1)
coupling:
  q: 2
  weight: 1
m0: gaussian_bump(0.4, 0.2, 1)
phi_T: cosine(0.3, 1)
)";

}  // namespace

TEST(OperatorNorm, PowerIterationMatchesDenseSvd) {
  for (int d : {1, 2}) {
    for (int n : {4, 6}) {
      const SpaceTimeGrid g(d, n, n, 1.0);
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense_lambda(g));
      const double ref = svd.singularValues()(0);
      EXPECT_NEAR(estimate_operator_norm(g, 3).full, ref, 1e-5 * ref) << "d=" << d << " n=" << n;
    }
  }
}

TEST(Solve, HomogeneousMatchesExactSolution) {
  const ProblemData p = homogeneous_problem(1, 16, 16);
  const SolveResult r = solve(p, SolverConfig{});
  ASSERT_TRUE(r.report.converged);
  const SpaceTimeGrid g = p.grid();
  for (double m : r.primal.m.values) EXPECT_NEAR(m, 1.0, 1e-6);
  for (int k = 0; k <= g.nt(); ++k)
    for (std::size_t i = 0; i < g.slice_size(); ++i) EXPECT_NEAR(r.dual.phi.at(k, i), 1.0 - g.time_node(k), 1e-4);
}

TEST(Solve, SmallInstanceMatchesPrimalOracle) {
  const ProblemData p = parse_problem(kSmallProblem);
  const oracle::PrimalSolution o = oracle::primal_oracle(p);
  SolverConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iters = 200000;
  const SolveResult r = solve(p, cfg);
  ASSERT_TRUE(r.report.converged);
  for (int j = 0; j < 16; ++j) {
    EXPECT_NEAR(r.primal.m.values[j], o.m(j), 1e-6);
    EXPECT_NEAR(r.primal.w.values[j], o.w(j), 1e-6);
  }
  EXPECT_NEAR(r.report.primal_value, o.value, 1e-8);
}

TEST(Solve, ReportCertificates) {
  ProblemData p = parse_problem(kSmallProblem, 12, 12);
  SolverConfig cfg;
  cfg.tol = 1e-6;
  const SolveResult r = solve(p, cfg);
  ASSERT_TRUE(r.report.converged);
  const auto& rep = r.report;
  EXPECT_LE(std::abs(rep.duality_gap), cfg.tol * (1 + std::abs(rep.primal_value)));
  EXPECT_LE(rep.continuity_residual, cfg.tol);
  EXPECT_LE(rep.constraint_residual, 1e-10);
  EXPECT_NEAR(rep.primal_value + rep.dual_value, rep.duality_gap, 1e-14);
  for (int k = 0; k < p.nt; ++k) EXPECT_NEAR(mass(r.primal.m, k), 1.0, 1e-12);
  for (double m : r.primal.m.values) EXPECT_GE(m, 0.0);
  ASSERT_FALSE(rep.gap_history.empty());
  EXPECT_EQ(rep.gap_history.front().first, 0);
}

TEST(Solve, DeterministicAcrossThreadCounts) {
  const ProblemData p = parse_problem(kSmallProblem, 8, 8);
  SolverConfig cfg;
  cfg.threads = 1;
  const SolveResult a = solve(p, cfg);
  cfg.threads = 3;
  const SolveResult b = solve(p, cfg);
  default_executor(1);
  EXPECT_EQ(a.primal.m.values, b.primal.m.values);
  EXPECT_EQ(a.primal.w.values, b.primal.w.values);
  EXPECT_EQ(a.dual.phi.values, b.dual.phi.values);
  EXPECT_EQ(a.report.iterations, b.report.iterations);
  EXPECT_EQ(a.report.duality_gap, b.report.duality_gap);
}

TEST(Solve, IterationCapReportsNonConvergence) {
  SolverConfig cfg;
  cfg.max_iters = 1;
  const SolveResult r = solve(parse_problem(kSmallProblem), cfg);
  EXPECT_FALSE(r.report.converged);
  EXPECT_EQ(r.report.iterations, 1);
}

TEST(Solve, RejectsInvalidProblem) {
  ProblemData p = homogeneous_problem(1, 8, 8);
  p.m0[0] = -1.0;
  EXPECT_THROW(solve(p, SolverConfig{}), ValidationError);
  SolverConfig cfg;
  cfg.step_ratio = 0.0;
  EXPECT_THROW(solve(homogeneous_problem(1, 8, 8), cfg), SolverError);
}

TEST(Solve, CheckpointCallbackCadence) {
  SolverConfig cfg;
  cfg.checkpoint_every = 100;
  std::vector<long> seen;
  const SolveResult r = solve(parse_problem(kSmallProblem), cfg, [&](const SaddleState& s) { seen.push_back(s.iteration); });
  ASSERT_FALSE(seen.empty());
  for (long it : seen) EXPECT_EQ(it % 100, 0);
  EXPECT_LE(seen.back(), r.report.iterations);
}

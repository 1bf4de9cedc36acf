#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "weakmfg/grid.hpp"
#include "weakmfg/solver.hpp"

using namespace weakmfg;

namespace {

void fill_random(Field& f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (double& v : f.values) v = nd(rng);
}

double rel_defect(double lhs, double rhs) { return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs) + std::abs(rhs)); }

}  // namespace

class Adjointness : public ::testing::TestWithParam<std::tuple<int, int>> {};

TEST_P(Adjointness, GradientAndDivergence) {
  const auto [d, n] = GetParam();
  const SpaceTimeGrid g(d, n, n, 1.0);
  Field phi(g, TimeLoc::node, SpaceLoc::node);
  Field w(g, TimeLoc::node, SpaceLoc::face);
  fill_random(phi, 1);
  fill_random(w, 2);
  const Field grad = spatial_gradient(phi);
  const Field div = divergence(w);
  EXPECT_LT(rel_defect(dot(grad.values, w.values), -dot(phi.values, div.values)), 1e-12);
}

TEST_P(Adjointness, TimeDerivative) {
  const auto [d, n] = GetParam();
  const SpaceTimeGrid g(d, n, n, 0.7);
  Field phi(g, TimeLoc::node, SpaceLoc::node);
  Field psi(g, TimeLoc::cell, SpaceLoc::node);
  fill_random(phi, 3);
  fill_random(psi, 4);
  EXPECT_LT(rel_defect(dot(time_derivative(phi).values, psi.values), dot(phi.values, time_derivative_adjoint(psi).values)),
            1e-12);
}

TEST_P(Adjointness, SaddleOperator) {
  const auto [d, n] = GetParam();
  const SpaceTimeGrid g(d, n, n, 1.0);
  Field phi(g, TimeLoc::node, SpaceLoc::node);
  fill_random(phi, 5);
  for (std::size_t i = 0; i < g.slice_size(); ++i) phi.at(g.nt(), i) = 0.0;
  CellPair y(g);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  for (double& v : y.a) v = nd(rng);
  for (double& v : y.b) v = nd(rng);
  const CellPair lp = apply_lambda(phi, false);
  const Field adj = apply_lambda_adjoint(y, g);
  const double lhs = dot(lp.a, y.a) + dot(lp.b, y.b);
  EXPECT_LT(rel_defect(lhs, dot(phi.values, adj.values)), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Grids, Adjointness,
                         ::testing::Combine(::testing::Values(1, 2), ::testing::Values(4, 8, 16)));

TEST(Grid, PeriodicNeighbors) {
  const SpaceTimeGrid g(2, 4, 3, 1.0);
  EXPECT_EQ(g.neighbor(g.flat(3, 1), 0, +1), g.flat(0, 1));
  EXPECT_EQ(g.neighbor(g.flat(2, 0), 1, -1), g.flat(2, 3));
  EXPECT_DOUBLE_EQ(g.face_position(g.flat(1, 2), 0)[0], 0.375);
}

TEST(Grid, TorusDistanceIsWrapped) {
  EXPECT_NEAR(torus_delta(0.95, 0.05), -0.1, 1e-15);
  EXPECT_NEAR(torus_delta(0.05, 0.95), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(wrap_unit(-0.25), 0.75);
  EXPECT_DOUBLE_EQ(wrap_unit(1.0), 0.0);
}

TEST(Grid, RejectsMismatchedStaggering) {
  const SpaceTimeGrid g(1, 4, 4, 1.0);
  EXPECT_THROW(divergence(Field(g, TimeLoc::cell, SpaceLoc::cell)), GridError);
  EXPECT_THROW(spatial_gradient(Field(g, TimeLoc::node, SpaceLoc::face)), GridError);
}

TEST(ProjectSimplex, FeasibleAndOptimal) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(1.0, 1.5);
  const double vol = 1.0 / 16;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(16);
    for (double& x : v) x = nd(rng);
    const auto p = project_simplex(v, vol);
    double mass = 0.0;
    for (double x : p) {
      EXPECT_GE(x, 0.0);
      mass += x * vol;
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
    // Projection is idempotent and no random feasible point is closer.
    const auto pp = project_simplex(p, vol);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(pp[i], p[i], 1e-12);
    auto dist = [&](const std::vector<double>& a) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - v[i]) * (a[i] - v[i]);
      return s;
    };
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int s = 0; s < 20; ++s) {
      std::vector<double> q(16);
      for (double& x : q) x = u(rng);
      const double total = std::accumulate(q.begin(), q.end(), 0.0) * vol;
      for (double& x : q) x /= total;
      EXPECT_LE(dist(p), dist(q) + 1e-12);
    }
  }
}

TEST(SpatialField, InterpolationReproducesNodes) {
  SpatialField f(2, 4);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i * i % 7);
  const SpaceTimeGrid g(2, 4, 2, 1.0);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f.interpolate(g.node_position(i)), f[i], 1e-14);
  EXPECT_NEAR(f.interpolate({1.0, 0.0}), f[0], 1e-14);
}

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "weakmfg/functionals.hpp"
#include "weakmfg/hj.hpp"

using namespace weakmfg;

TEST(ProxFstar, MatchesGridSearch) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (double q : {1.5, 2.0, 3.0}) {
    PowerCoupling f{q, SpatialField(1, 4, 1.0), 0.0};
    for (int s = 0; s < 20; ++s) {
      const double a0 = u(rng);
      const double tau = 0.05 + std::abs(u(rng));
      const double c = 0.5 + std::abs(u(rng)) / 2;
      const double ref = oracle::zoom_min_1d(
          [&](double a) { return f.Fstar_local(c, a) + (a - a0) * (a - a0) / (2 * tau); }, a0 - 5, a0 + 5);
      EXPECT_NEAR(prox_Fstar(f, c, a0, tau), ref, 1e-6) << "q=" << q << " a0=" << a0;
    }
  }
}

TEST(ProxK, PlainLayoutMatchesGridSearch) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (double r : {1.5, 2.0, 3.0}) {
    for (double q : {1.5, 2.0}) {
      PowerHamiltonian h{r, SpatialField(1, 4, 0.0), 0.0};
      PowerCoupling f{q, SpatialField(1, 4, 1.0), 0.0};
      for (int s = 0; s < 5; ++s) {
        const double a0 = u(rng);
        const double b0[1] = {u(rng)};
        const double ell = 0.3 * u(rng);
        const double tau = 0.1 + std::abs(u(rng)) / 2;
        auto obj = [&](double a, double b) {
          const double bb[1] = {b};
          return K_eval(h, f, ell, 1.0, a, bb) + ((a - a0) * (a - a0) + (b - b0[0]) * (b - b0[0])) / (2 * tau);
        };
        const double R = std::sqrt(2 * tau * obj(a0, b0[0])) + 1e-3;
        const auto ref = oracle::zoom_min_2d(obj, {a0 - R, b0[0] - R}, {a0 + R, b0[0] + R});
        const ProxKResult res = prox_K(h, f, ell, 1.0, a0, b0, tau);
        EXPECT_NEAR(res.a, ref[0], 1e-6);
        EXPECT_NEAR(res.b[0], ref[1], 1e-6);
      }
    }
  }
}

TEST(ProxK, UpwindOptimalityConditions) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (double r : {1.5, 2.0, 3.0}) {
    for (double q : {1.5, 2.0}) {
      PowerHamiltonian h{r, SpatialField(1, 4, 0.0), 0.0};
      PowerCoupling f{q, SpatialField(1, 4, 1.0), 0.0};
      for (int s = 0; s < 50; ++s) {
        const double a0 = u(rng);
        const double b0[4] = {u(rng), u(rng), u(rng), u(rng)};
        const double tau = 0.1 + std::abs(u(rng));
        const ProxKResult res = prox_K(h, f, 0.1, 1.2, a0, b0, tau, GradientLayout::upwind);
        const double mu = f.Fstar_prime_local(1.2, -res.a + cell_hamiltonian(h, 0.1, res.b, GradientLayout::upwind));
        EXPECT_NEAR(res.density, mu, 1e-8);
        EXPECT_NEAR(res.a, a0 + tau * mu, 1e-8);
        const SmallVec g = cell_hamiltonian_gradient(h, res.b, GradientLayout::upwind);
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(res.b[j] + tau * mu * g[j], b0[j], 1e-8);
      }
    }
  }
}

TEST(ProxK, InactiveUpwindComponentsAreUntouched) {
  PowerHamiltonian h{2.0, SpatialField(1, 4, 0.0), 0.0};
  PowerCoupling f{2.0, SpatialField(1, 4, 1.0), 0.0};
  const double b0[2] = {0.7, -0.4};  // forward difference positive, backward negative
  const ProxKResult res = prox_K(h, f, 0.0, 1.0, 0.5, b0, 0.3, GradientLayout::upwind);
  EXPECT_DOUBLE_EQ(res.b[0], 0.7);
  EXPECT_DOUBLE_EQ(res.b[1], -0.4);
  EXPECT_NEAR(res.a, prox_Fstar(f, 1.0, -0.5, 0.3) * -1.0, 1e-12);
}

TEST(ProxK, RejectsNonPositiveStep) {
  PowerHamiltonian h{2.0, SpatialField(1, 4, 0.0), 0.0};
  PowerCoupling f{2.0, SpatialField(1, 4, 1.0), 0.0};
  const double b0[1] = {0.0};
  EXPECT_THROW(prox_K(h, f, 0.0, 1.0, 0.0, b0, 0.0), ProxError);
  EXPECT_THROW(prox_Fstar(f, 1.0, 0.0, -1.0), ProxError);
}

TEST(Kinetic, ZeroDensityConventions) {
  PowerHamiltonian h{2.0, SpatialField(1, 4, 0.0), 0.0};
  const double zero[1] = {0.0};
  const double one[1] = {1.0};
  EXPECT_DOUBLE_EQ(kinetic_integrand(h, 0.0, 0.0, zero).value(), 0.0);
  EXPECT_TRUE(kinetic_integrand(h, 0.0, 0.0, one).is_infinite());
  EXPECT_THROW(kinetic_integrand(h, 0.0, -1.0, zero), std::domain_error);
  EXPECT_NEAR(kinetic_integrand(h, 0.25, 2.0, one).value(), 0.25 + 0.5, 1e-15);
}

TEST(ConjugateOracle, QuadraticSample) {
  std::vector<double> s, g;
  for (int i = -100; i <= 100; ++i) {
    s.push_back(i * 0.05);
    g.push_back(0.5 * s.back() * s.back());
  }
  EXPECT_NEAR(conjugate_oracle(s, g, 1.3), 0.5 * 1.3 * 1.3, 1e-3);
  EXPECT_THROW(conjugate_oracle({}, {}, 0.0), std::invalid_argument);
}

namespace {

ProblemData bumpy_problem(int d, int n) {
  ProblemData p = homogeneous_problem(d, n, n, 1.0, d == 1 ? 2.0 : 3.0, 2.0);
  const SpaceTimeGrid g = p.grid();
  double mass = 0.0;
  for (std::size_t i = 0; i < g.slice_size(); ++i) {
    const Point x = g.node_position(i);
    p.m0[i] = 1.0 + 0.5 * std::sin(2 * std::numbers::pi * x[0]);
    p.phi_T[i] = 0.3 * std::cos(2 * std::numbers::pi * (x[0] + x[1]));
    mass += p.m0[i] * g.cell_volume();
  }
  for (double& v : p.m0.values) v /= mass;
  return p;
}

}  // namespace

TEST(Duality, WeakDualityOnFeasiblePairs) {
  for (int d : {1, 2}) {
    const ProblemData p = bumpy_problem(d, 6);
    const SpaceTimeGrid g = p.grid();
    PrimalState primal = make_primal(g);
    for (int k = 0; k < g.nt(); ++k)
      for (std::size_t i = 0; i < g.slice_size(); ++i) primal.m.at(k, i) = p.m0[i];
    EXPECT_NEAR(continuity_residual(primal, p), 0.0, 1e-14);
    const double B = eval_B(primal, p).value();
    std::mt19937_64 rng(31 + d);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
      DualState dual = make_dual(g);
      for (int k = 0; k < g.nt(); ++k)
        for (std::size_t i = 0; i < g.slice_size(); ++i) dual.phi.at(k, i) = nd(rng);
      for (std::size_t i = 0; i < g.slice_size(); ++i) dual.phi.at(g.nt(), i) = p.phi_T[i];
      dual.alpha = relaxed_control(dual.phi, p);
      EXPECT_LE(constraint_residual(dual, p), 0.0);
      EXPECT_GE(eval_A(dual, p) + B, -1e-12);
    }
  }
}

TEST(Duality, InfiniteCostForMomentumWithoutMass) {
  const ProblemData p = homogeneous_problem(1, 4, 4);
  PrimalState s = make_primal(p.grid());
  s.w.at(1, 2) = 1.0;
  EXPECT_TRUE(eval_B(s, p).is_infinite());
}

TEST(Duality, TerminalConditionEnforced) {
  const ProblemData p = homogeneous_problem(1, 4, 4);
  DualState s = make_dual(p.grid());
  s.phi.at(p.nt, 1) = 0.5;
  EXPECT_THROW(eval_A(s, p), TerminalConditionError);
}

TEST(MaximalSubsolution, IsSubsolutionAndDominatesOthers) {
  for (int d : {1, 2}) {
    const ProblemData p = bumpy_problem(d, 8);
    const SpaceTimeGrid g = p.grid();
    std::mt19937_64 rng(41);
    std::normal_distribution<double> nd;
    Field other(g, TimeLoc::node, SpaceLoc::node);
    for (int k = 0; k < g.nt(); ++k)
      for (std::size_t i = 0; i < g.slice_size(); ++i) other.at(k, i) = nd(rng);
    for (std::size_t i = 0; i < g.slice_size(); ++i) other.at(g.nt(), i) = p.phi_T[i];
    const Field alpha = relaxed_control(other, p);
    const Field phi = maximal_subsolution(alpha, p);
    const Field h = hj_operator(phi, p);
    for (std::size_t c = 0; c < h.values.size(); ++c) EXPECT_LE(h.values[c], alpha.values[c] + 1e-9);
    for (std::size_t i = 0; i < g.slice_size(); ++i) EXPECT_DOUBLE_EQ(phi.at(g.nt(), i), p.phi_T[i]);
    for (std::size_t c = 0; c < phi.values.size(); ++c) EXPECT_GE(phi.values[c], other.values[c] - 1e-9);
  }
}

TEST(MaximalSubsolution, ZeroControlHomogeneous) {
  const ProblemData p = homogeneous_problem(1, 8, 8);
  const Field phi = maximal_subsolution(Field(p.grid(), TimeLoc::cell, SpaceLoc::cell), p);
  for (double v : phi.values) EXPECT_NEAR(v, 0.0, 1e-13);
}

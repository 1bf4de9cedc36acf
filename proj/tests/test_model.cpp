#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "weakmfg/model.hpp"

using namespace weakmfg;

TEST(HolderExponent, ReferenceValues) {
  EXPECT_DOUBLE_EQ(holder_exponent(3.0, 2.0, 2), 0.1);
  EXPECT_DOUBLE_EQ(holder_exponent(2.0, 2.0, 1), 0.2);
}

TEST(Validate, HomogeneousIsAdmissible) {
  const ValidationReport rep = validate(homogeneous_problem(1, 8, 8));
  EXPECT_TRUE(rep.ok()) << rep.failures();
  EXPECT_DOUBLE_EQ(rep.nu, 0.2);
}

TEST(Validate, CompatibilityFailsWhenGrowthTooSmall) {
  const ValidationReport rep = validate(homogeneous_problem(2, 8, 8, 1.0, 2.0, 2.0));
  EXPECT_FALSE(rep.ok());
  EXPECT_NE(rep.failures().find("compatibility.r>d(q-1)"), std::string::npos);
}

TEST(Validate, FlagsNegativeDensityAndMass) {
  ProblemData p = homogeneous_problem(1, 8, 8);
  p.m0[3] = -0.5;
  const ValidationReport rep = validate(p);
  EXPECT_NE(rep.failures().find("m0.nonnegative"), std::string::npos);
  EXPECT_NE(rep.failures().find("m0.mass"), std::string::npos);
}

TEST(Validate, FlagsUnderstatedLipschitzConstant) {
  ProblemData p = homogeneous_problem(1, 8, 8);
  p.hamiltonian.potential[2] = 1.0;
  p.hamiltonian.lipschitz = 0.5;
  const ValidationReport rep = validate(p);
  EXPECT_NE(rep.failures().find("potential.lipschitz"), std::string::npos);
  EXPECT_THROW(require_valid(p), ValidationError);
}

class PowerFamilies : public ::testing::TestWithParam<std::tuple<double, double>> {};

TEST_P(PowerFamilies, HamiltonianConjugateMatchesGridSearch) {
  const auto [r, q] = GetParam();
  PowerHamiltonian h{r, SpatialField(1, 4, 0.0), 0.0};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int s = 0; s < 20; ++s) {
    const double xi = u(rng);
    const double ell = 0.5 * u(rng);
    const double ref = oracle::fenchel_1d([&](double p) { return std::pow(std::abs(p), r) / r - ell; }, xi, -30, 30);
    const double v[1] = {xi};
    EXPECT_NEAR(h.conjugate_local(ell, v), ref, 1e-8);
  }
  (void)q;
}

TEST_P(PowerFamilies, CouplingConjugateMatchesGridSearch) {
  const auto [r, q] = GetParam();
  PowerCoupling f{q, SpatialField(1, 4, 1.0), 0.0};
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> uc(0.5, 2.0);
  for (int s = 0; s < 20; ++s) {
    const double a = u(rng);
    const double c = uc(rng);
    const double top = 2.0 * std::pow(std::max(a, 0.0) / c, 1.0 / (q - 1.0)) + 1.0;
    const auto obj = [&](double m) { return c * std::pow(m, q) / q - a * m; };
    const double mstar = oracle::zoom_min_1d(obj, 0.0, top);
    EXPECT_NEAR(f.Fstar_local(c, a), -obj(mstar), 1e-8);
    EXPECT_NEAR(f.Fstar_prime_local(c, a), mstar, 1e-6);
  }
  (void)r;
}

TEST_P(PowerFamilies, FenchelYoungInequality) {
  const auto [r, q] = GetParam();
  PowerHamiltonian h{r, SpatialField(1, 4, 0.0), 0.0};
  PowerCoupling f{q, SpatialField(1, 4, 1.0), 0.0};
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int s = 0; s < 200; ++s) {
    const double p[2] = {u(rng), u(rng)};
    const double xi[2] = {u(rng), u(rng)};
    EXPECT_GE(h.value_local(0.3, p) + h.conjugate_local(0.3, xi) - (p[0] * xi[0] + p[1] * xi[1]), -1e-12);
    const SmallVec g = h.dp_local(p);
    EXPECT_NEAR(h.value_local(0.3, p) + h.conjugate_local(0.3, g), p[0] * g[0] + p[1] * g[1], 1e-9);
    const double m = std::abs(u(rng));
    const double a = u(rng);
    EXPECT_GE(f.F_local(1.3, m).value() + f.Fstar_local(1.3, a) - a * m, -1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Exponents, PowerFamilies,
                         ::testing::Combine(::testing::Values(1.5, 2.0, 3.0), ::testing::Values(1.5, 2.0)));

TEST(PowerCoupling, NegativeDensityIsInfinite) {
  PowerCoupling f{2.0, SpatialField(1, 4, 1.0), 0.0};
  EXPECT_TRUE(f.F_local(1.0, -0.1).is_infinite());
  EXPECT_DOUBLE_EQ(f.F_local(1.0, 0.0).value(), 0.0);
  EXPECT_DOUBLE_EQ(f.Fstar_local(1.0, -3.0), 0.0);
}

TEST(PowerCoupling, InverseIsInverse) {
  PowerCoupling f{1.5, SpatialField(1, 4, 1.0), 0.0};
  for (double m : {0.0, 0.1, 1.0, 7.5}) EXPECT_NEAR(f.f_inverse_local(2.0, f.f_local(2.0, m)), m, 1e-12);
}

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "weakmfg/grid.hpp"

namespace weakmfg {

/// Value in R ∪ {+∞}. The infinite case is a tag, never an IEEE infinity,
/// so reductions stay finite and comparisons with it are explicit.
class Extended {
 public:
  constexpr Extended() = default;
  constexpr Extended(double v) : value_(v) {}  // NOLINT(google-explicit-constructor)
  static constexpr Extended infinity() {
    Extended e;
    e.infinite_ = true;
    return e;
  }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr bool is_finite() const { return !infinite_; }
  double value() const {
    if (infinite_) throw std::logic_error("value() on the +infinity sentinel");
    return value_;
  }
  /// Finite value, or `fallback` for the sentinel.
  constexpr double value_or(double fallback) const { return infinite_ ? fallback : value_; }

  friend constexpr Extended operator+(Extended a, Extended b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return Extended(a.value_ + b.value_);
  }
  Extended& operator+=(Extended o) { return *this = *this + o; }
  friend constexpr Extended operator*(double s, Extended a) {
    if (a.infinite_) {
      if (s < 0) throw std::logic_error("negative multiple of +infinity");
      return s == 0 ? Extended(0.0) : infinity();
    }
    return Extended(s * a.value_);
  }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

/// Fixed-capacity vector for covectors and the upwind split gradients
/// (at most 2 per axis in d = 2).
struct SmallVec {
  static constexpr std::size_t kCapacity = 4;
  std::array<double, kCapacity> v{};
  std::size_t n = 0;

  SmallVec() = default;
  explicit SmallVec(std::size_t size) : n(size) {}
  SmallVec(std::initializer_list<double> init) : n(init.size()) {
    std::size_t i = 0;
    for (double x : init) v[i++] = x;
  }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  std::size_t size() const { return n; }
  std::span<const double> span() const { return {v.data(), n}; }
  operator std::span<const double>() const { return span(); }  // NOLINT(google-explicit-constructor)
};

inline double norm2(std::span<const double> p) {
  double s = 0.0;
  for (double x : p) s += x * x;
  return std::sqrt(s);
}

/// Hölder conjugate exponent: 1/e + 1/e' = 1.
inline double conjugate_exponent(double e) { return e / (e - 1.0); }

/// H(x, p) = |p|^r / r - l(x).
struct PowerHamiltonian {
  double r = 2.0;
  SpatialField potential;
  double lipschitz = 0.0;

  double r_conj() const { return conjugate_exponent(r); }

  double value_local(double ell, std::span<const double> p) const { return std::pow(norm2(p), r) / r - ell; }

  /// H*(x, xi) = |xi|^{r'} / r' + l(x).
  double conjugate_local(double ell, std::span<const double> xi) const {
    const double rc = r_conj();
    return std::pow(norm2(xi), rc) / rc + ell;
  }

  /// D_p H = |p|^{r-2} p, with the minimal-norm selection 0 at p = 0.
  SmallVec dp_local(std::span<const double> p) const {
    SmallVec out(p.size());
    const double np = norm2(p);
    if (np == 0.0) return out;
    const double scale = std::pow(np, r - 2.0);
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = scale * p[i];
    return out;
  }

  double ell_at(const Point& x) const { return potential.interpolate(x); }

  double hamiltonian(const Point& x, std::span<const double> p) const { return value_local(ell_at(x), p); }
  double conjugate(const Point& x, std::span<const double> xi) const { return conjugate_local(ell_at(x), xi); }
  SmallVec dp_hamiltonian(const Point& /*x*/, std::span<const double> p) const { return dp_local(p); }

  /// Running cost of velocity: L(x, v) = H*(x, -v).
  double lagrangian(const Point& x, std::span<const double> v) const {
    SmallVec neg(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) neg[i] = -v[i];
    return conjugate(x, neg);
  }
};

/// f(x, m) = c(x) m^{q-1} on m >= 0, with primitive F and conjugate F*.
struct PowerCoupling {
  double q = 2.0;
  SpatialField weight;
  double lipschitz = 0.0;

  double p_conj() const { return conjugate_exponent(q); }

  double f_local(double c, double m) const {
    if (m < 0.0) throw std::domain_error("coupling evaluated at negative density");
    if (m == 0.0) return 0.0;
    return c * std::pow(m, q - 1.0);
  }

  /// Inverse of m -> f(x, m) on [0, inf), extended by 0 to a <= 0; this is
  /// also the derivative of F*.
  double f_inverse_local(double c, double a) const {
    if (a <= 0.0) return 0.0;
    return std::pow(a / c, 1.0 / (q - 1.0));
  }

  Extended F_local(double c, double m) const {
    if (m < 0.0) return Extended::infinity();
    return Extended(c * std::pow(m, q) / q);
  }

  double Fstar_local(double c, double a) const {
    if (a <= 0.0) return 0.0;
    const double p = p_conj();
    return std::pow(a, p) * std::pow(c, 1.0 - p) / p;
  }

  double Fstar_prime_local(double c, double a) const { return f_inverse_local(c, a); }

  /// Second derivative of F* in a, for a > 0.
  double Fstar_second_local(double c, double a) const {
    if (a <= 0.0) return 0.0;
    const double p = p_conj();
    return (p - 1.0) * std::pow(a, p - 2.0) * std::pow(c, 1.0 - p);
  }

  double c_at(const Point& x) const { return weight.interpolate(x); }

  double coupling(const Point& x, double m) const { return f_local(c_at(x), m); }
  Extended F(const Point& x, double m) const { return F_local(c_at(x), m); }
  double Fstar(const Point& x, double a) const { return Fstar_local(c_at(x), a); }
};

/// Full data package: Hamiltonian, coupling, m0, phi_T, horizon and the
/// discretization sizes the problem file declares.
struct ProblemData {
  PowerHamiltonian hamiltonian;
  PowerCoupling coupling;
  SpatialField m0;
  SpatialField phi_T;
  double T = 1.0;
  int d = 1;
  int nx = 32;
  int nt = 32;

  SpaceTimeGrid grid() const { return SpaceTimeGrid(d, nx, nt, T); }
};

/// Builds a problem with constant potential, weight, density and terminal
/// cost on an (nx, nt) grid.
inline ProblemData homogeneous_problem(int d, int nx, int nt, double T = 1.0, double r = 2.0, double q = 2.0) {
  ProblemData p;
  p.d = d;
  p.nx = nx;
  p.nt = nt;
  p.T = T;
  p.hamiltonian.r = r;
  p.hamiltonian.potential = SpatialField(d, nx, 0.0);
  p.coupling.q = q;
  p.coupling.weight = SpatialField(d, nx, 1.0);
  p.m0 = SpatialField(d, nx, 1.0);
  p.phi_T = SpatialField(d, nx, 0.0);
  return p;
}

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValidationItem {
  std::string name;
  bool pass = true;
  std::string detail;
  std::optional<Point> offending;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  double nu = 0.0;
  double c0f = 0.0;
  double c0h = 0.0;
  double c_regu = 0.0;

  bool ok() const {
    for (const auto& it : items)
      if (!it.pass) return false;
    return true;
  }
  std::string failures() const {
    std::ostringstream os;
    for (const auto& it : items)
      if (!it.pass) os << it.name << ": " << it.detail << "; ";
    return os.str();
  }
};

/// Hölder-in-time exponent nu = (r - d(q-1)) / (d(q-1)(r-1) + r q).
inline double holder_exponent(double r, double q, int d) {
  const double dq = d * (q - 1.0);
  return (r - dq) / (dq * (r - 1.0) + r * q);
}

inline constexpr double kMassTolerance = 1e-8;

/// Checks the structural assumptions on a problem; never throws for
/// violations, which are listed in the report instead.
inline ValidationReport validate(const ProblemData& data) {
  ValidationReport rep;
  const double r = data.hamiltonian.r;
  const double q = data.coupling.q;
  const int d = data.d;
  auto add = [&](std::string name, bool pass, std::string detail, std::optional<Point> where = std::nullopt) {
    rep.items.push_back({std::move(name), pass, std::move(detail), where});
  };
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
  };

  const bool grid_ok = (d == 1 || d == 2) && data.nx >= 4 && data.nt >= 2 && data.T > 0;
  add("grid", grid_ok,
      grid_ok ? "ok" : "need d in {1,2}, n_x >= 4, n_t >= 2, T > 0");
  if (!grid_ok) return rep;
  const SpaceTimeGrid g = data.grid();
  const std::size_t n = g.slice_size();
  for (auto* f : {&data.hamiltonian.potential, &data.coupling.weight, &data.m0, &data.phi_T}) {
    if (f->size() != n || f->d != d || f->n != data.nx) {
      add("shapes", false, "spatial samples do not match the grid");
      return rep;
    }
  }

  // Coupling exponent, positive weight, f(x,0) = 0.
  const bool q_ok = q > 1.0;
  add("coupling.q", q_ok, "q = " + fmt(q) + (q_ok ? "" : " must exceed 1"));
  const auto& c = data.coupling.weight;
  std::size_t cmin_at = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (c[i] < c[cmin_at]) cmin_at = i;
  const bool c_ok = c[cmin_at] > 0.0;
  add("coupling.weight", c_ok, "inf c = " + fmt(c[cmin_at]), c_ok ? std::nullopt : std::optional(g.node_position(cmin_at)));
  if (q_ok && c_ok) {
    rep.c0f = std::max(c.max(), 1.0 / c.min());
    bool zero_ok = true;
    for (std::size_t i = 0; i < n && zero_ok; ++i) zero_ok = data.coupling.f_local(c[i], 0.0) == 0.0;
    add("coupling.f(x,0)=0", zero_ok, zero_ok ? "exact" : "nonzero at m = 0");
  }

  // Growth exponent and compatibility.
  const bool r_ok = r > 1.0;
  add("hamiltonian.r", r_ok, "r = " + fmt(r) + (r_ok ? "" : " must exceed 1"));
  const double gap = r - d * (q - 1.0);
  const bool compat = gap > 0.0;
  add("compatibility.r>d(q-1)", compat, "r - d(q-1) = " + fmt(gap));
  if (r_ok && q_ok && compat) rep.nu = holder_exponent(r, q, d);

  const auto& ell = data.hamiltonian.potential;
  rep.c0h = std::max(1.0, ell.sup_abs());
  if (r_ok) {
    // Growth sandwich with C0H = max(1, sup|l|) * r, checked on random samples.
    const double C = rep.c0h * r;
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    bool sandwich = true;
    std::optional<Point> where;
    for (int s = 0; s < 2000 && sandwich; ++s) {
      SmallVec xi(static_cast<std::size_t>(d));
      for (int a = 0; a < d; ++a) xi[a] = u(rng);
      const std::size_t i = pick(rng);
      const double h = data.hamiltonian.value_local(ell[i], xi);
      const double nr = std::pow(norm2(xi), r);
      const double lo = nr / (r * C) - C;
      const double hi = C * nr / r + C;
      if (h < lo - 1e-12 || h > hi + 1e-12) {
        sandwich = false;
        where = g.node_position(i);
      }
    }
    add("hamiltonian.growth", sandwich, "C0H = " + fmt(C), where);
  }

  // l Lipschitz, spot-checked on adjacent nodes.
  const NeighborTable nb(g);
  auto max_slope = [&](const SpatialField& fld, std::size_t& at) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < d; ++a) {
        const double v = std::abs(fld[nb.plus[a][i]] - fld[i]) / g.hx();
        if (v > s) {
          s = v;
          at = i;
        }
      }
    return s;
  };
  std::size_t ell_at = 0;
  rep.c_regu = max_slope(ell, ell_at);
  const bool h3 = rep.c_regu <= data.hamiltonian.lipschitz * (1.0 + 1e-9) + 1e-12;
  add("potential.lipschitz", h3,
      "observed slope " + fmt(rep.c_regu) + " vs declared " + fmt(data.hamiltonian.lipschitz),
      h3 ? std::nullopt : std::optional(g.node_position(ell_at)));
  std::size_t c_at = 0;
  const double c_slope = max_slope(c, c_at);
  const bool c_lip = c_slope <= data.coupling.lipschitz * (1.0 + 1e-9) + 1e-12;
  add("weight.lipschitz", c_lip,
      "observed slope " + fmt(c_slope) + " vs declared " + fmt(data.coupling.lipschitz),
      c_lip ? std::nullopt : std::optional(g.node_position(c_at)));

  // m0 a probability density, phi_T finite.
  std::size_t neg_at = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (data.m0[i] < data.m0[neg_at]) neg_at = i;
  const bool nonneg = data.m0[neg_at] >= 0.0;
  add("m0.nonnegative", nonneg, "min m0 = " + fmt(data.m0[neg_at]),
      nonneg ? std::nullopt : std::optional(g.node_position(neg_at)));
  double total = 0.0;
  for (double v : data.m0.values) total += v;
  total *= g.cell_volume();
  const bool unit = std::abs(total - 1.0) <= kMassTolerance;
  add("m0.mass", unit, "mass m0 = " + fmt(total));
  bool finite = true;
  for (double v : data.phi_T.values) finite = finite && std::isfinite(v);
  add("phi_T.finite", finite, finite ? "finite samples" : "non-finite terminal cost");
  return rep;
}

inline void require_valid(const ProblemData& data) {
  const auto rep = validate(data);
  if (!rep.ok()) throw ValidationError("invalid problem data: " + rep.failures());
}

}  // namespace weakmfg

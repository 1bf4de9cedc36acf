#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include "weakmfg/grid.hpp"
#include "weakmfg/model.hpp"
#include "weakmfg/parallel.hpp"

namespace weakmfg {

/// How a gradient argument b is read by the Hamiltonian.
///  - plain: b is an ordinary covector, H(b) = |b|^r / r - l.
///  - upwind: b holds (D+ phi, D- phi) per axis; only min(D+,0) and
///    max(D-,0) enter, which makes the discrete HJ operator monotone.
enum class GradientLayout { plain, upwind };

/// Active part P(b) of a gradient argument.
inline SmallVec active_part(std::span<const double> b, GradientLayout layout) {
  SmallVec out(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (layout == GradientLayout::plain) {
      out[j] = b[j];
    } else {
      out[j] = (j % 2 == 0) ? std::min(b[j], 0.0) : std::max(b[j], 0.0);
    }
  }
  return out;
}

inline double cell_hamiltonian(const PowerHamiltonian& ham, double ell, std::span<const double> b,
                               GradientLayout layout) {
  return ham.value_local(ell, active_part(b, layout));
}

/// Gradient of b -> H(P(b)); zero on inactive components.
inline SmallVec cell_hamiltonian_gradient(const PowerHamiltonian& ham, std::span<const double> b,
                                          GradientLayout layout) {
  return ham.dp_local(active_part(b, layout));
}

/// (D+ phi, D- phi) per axis at node i of one spatial slice.
inline SmallVec upwind_gradient(std::span<const double> slice, const NeighborTable& nb, std::size_t i, int d,
                                double hx) {
  SmallVec b(static_cast<std::size_t>(2 * d));
  const double inv = 1.0 / hx;
  for (int a = 0; a < d; ++a) {
    b[2 * a] = (slice[nb.plus[a][i]] - slice[i]) * inv;
    b[2 * a + 1] = (slice[i] - slice[nb.minus[a][i]]) * inv;
  }
  return b;
}

/// m H*(x, -w/m) with the convention at m = 0: 0 if w = 0, +inf otherwise.
inline Extended kinetic_integrand(const PowerHamiltonian& ham, double ell, double m, std::span<const double> w) {
  if (m < 0.0) throw std::domain_error("kinetic_integrand: negative density");
  const double nw = norm2(w);
  if (m == 0.0) return nw == 0.0 ? Extended(0.0) : Extended::infinity();
  const double rc = ham.r_conj();
  // m (|w/m|^{r'} / r' + l) written to avoid forming w/m for tiny m.
  return Extended(std::pow(nw, rc) * std::pow(m, 1.0 - rc) / rc + m * ell);
}

/// K(x, a, b) = F*(x, -a + H(x, b)).
inline double K_eval(const PowerHamiltonian& ham, const PowerCoupling& coup, double ell, double c, double a,
                     std::span<const double> b, GradientLayout layout = GradientLayout::plain) {
  return coup.Fstar_local(c, -a + cell_hamiltonian(ham, ell, b, layout));
}

class ProxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProxKResult {
  double a = 0.0;
  SmallVec b;
  /// F*'(-a + H(b)) at the minimizer; the density carried by the cell.
  double density = 0.0;
  int iterations = 0;
};

inline constexpr int kProxMaxIterations = 200;

namespace detail {

/// Root of beta + t beta^{r-1} = rho on [0, rho] for t >= 0.
inline double shrink_radius(double rho, double t, double r) {
  if (rho == 0.0 || t == 0.0) return rho;
  if (r == 2.0) return rho / (1.0 + t);
  double lo = 0.0;
  double hi = rho;
  double beta = rho / (1.0 + t * std::pow(rho, r - 2.0));
  beta = std::clamp(beta, lo, hi);
  for (int it = 0; it < kProxMaxIterations; ++it) {
    const double g = beta + t * std::pow(beta, r - 1.0) - rho;
    if (std::abs(g) <= 1e-15 * (1.0 + rho)) return beta;
    if (g > 0) hi = beta;
    else lo = beta;
    const double dg = 1.0 + t * (r - 1.0) * std::pow(beta, r - 2.0);
    double next = beta - g / dg;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-17 * (1.0 + rho)) return 0.5 * (lo + hi);
    beta = next;
  }
  return beta;
}

}  // namespace detail

/// argmin_{a,b} K(x,a,b) + (|a-a0|^2 + |b-b0|^2) / (2 tau).
///
/// Writing mu = F*'(-a + H(b)), optimality gives a = a0 + tau mu and
/// b + tau mu DH(b) = b0, so b shrinks the active part of b0 radially. The
/// density mu is the unique root of the increasing scalar map
///   h(mu) = f(mu) + a0 + tau mu - H(b(mu)),
/// solved by safeguarded Newton on the bracket [0, s0 / tau].
inline ProxKResult prox_K(const PowerHamiltonian& ham, const PowerCoupling& coup, double ell, double c, double a0,
                          std::span<const double> b0, double tau, GradientLayout layout = GradientLayout::plain) {
  if (!(tau > 0.0)) throw ProxError("prox_K: step must be positive");
  ProxKResult out;
  out.b = SmallVec(b0.size());
  for (std::size_t j = 0; j < b0.size(); ++j) out.b[j] = b0[j];
  const SmallVec active = active_part(b0, layout);
  const double rho0 = norm2(active);
  const double r = ham.r;
  const double s0 = -a0 + std::pow(rho0, r) / r - ell;
  if (s0 <= 0.0) {
    out.a = a0;
    return out;
  }

  const double q = coup.q;
  auto h_of = [&](double mu, double& beta, double& slope) {
    beta = detail::shrink_radius(rho0, tau * mu, r);
    const double fm = mu > 0.0 ? c * std::pow(mu, q - 1.0) : 0.0;
    const double hb = std::pow(beta, r) / r - ell;
    double dh = 0.0;
    if (beta > 0.0) {
      const double br2 = std::pow(beta, r - 2.0);
      dh = tau * std::pow(beta, 2.0 * (r - 1.0)) / (1.0 + tau * mu * (r - 1.0) * br2);
    }
    const double df = mu > 0.0 ? c * (q - 1.0) * std::pow(mu, q - 2.0) : std::numeric_limits<double>::infinity();
    slope = df + tau + dh;
    return fm + a0 + tau * mu - hb;
  };

  double lo = 0.0;
  double hi = s0 / tau;
  const double tol = 1e-12 * (1.0 + std::abs(a0) + std::abs(s0));
  double mu = hi;
  double beta = 0.0;
  double slope = 0.0;
  for (int it = 1; it <= kProxMaxIterations; ++it) {
    const double hv = h_of(mu, beta, slope);
    out.iterations = it;
    if (std::abs(hv) <= tol) break;
    if (hv > 0) hi = mu;
    else lo = mu;
    double next = mu - hv / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-16 * std::max(1.0, hi)) {
      mu = 0.5 * (lo + hi);
      h_of(mu, beta, slope);
      break;
    }
    mu = next;
    if (it == kProxMaxIterations) {
      throw ProxError("prox_K: no convergence after " + std::to_string(kProxMaxIterations) + " iterations");
    }
  }

  out.density = mu;
  out.a = a0 + tau * mu;
  if (rho0 > 0.0) {
    const double scale = beta / rho0;
    for (std::size_t j = 0; j < b0.size(); ++j)
      if (active[j] != 0.0) out.b[j] = b0[j] * scale;
  }
  return out;
}

/// argmin_a F*(x,a) + (a - a0)^2 / (2 tau).
inline double prox_Fstar(const PowerCoupling& coup, double c, double a0, double tau) {
  if (!(tau > 0.0)) throw ProxError("prox_Fstar: step must be positive");
  if (a0 <= 0.0) return a0;
  // a + tau F*'(a) = a0 on (0, a0].
  double lo = 0.0;
  double hi = a0;
  if (coup.q == 2.0) return a0 / (1.0 + tau / c);
  double a = 0.5 * a0;
  for (int it = 0; it < kProxMaxIterations; ++it) {
    const double g = a + tau * coup.Fstar_prime_local(c, a) - a0;
    if (std::abs(g) <= 1e-14 * (1.0 + a0)) return a;
    if (g > 0) hi = a;
    else lo = a;
    const double slope = 1.0 + tau * coup.Fstar_second_local(c, a);
    double next = a - g / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-16 * (1.0 + a0)) return 0.5 * (lo + hi);
    a = next;
  }
  throw ProxError("prox_Fstar: no convergence");
}

/// Brute-force Fenchel transform max_s (z s - g(s)) over sampled (s, g(s)).
inline double conjugate_oracle(std::span<const double> s, std::span<const double> g, double z) {
  if (s.empty() || s.size() != g.size()) throw std::invalid_argument("conjugate_oracle: empty or mismatched grid");
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) best = std::max(best, z * s[i] - g[i]);
  return best;
}

/// Density and momentum. m lives on time cells x space cells; w is the face
/// momentum (one component per axis) on time cells.
struct PrimalState {
  Field m;
  Field w;
};

/// Potential on time nodes x space nodes and control on time cells.
struct DualState {
  Field phi;
  Field alpha;
};

inline PrimalState make_primal(const SpaceTimeGrid& g) {
  return {Field(g, TimeLoc::cell, SpaceLoc::cell), Field(g, TimeLoc::cell, SpaceLoc::face)};
}

inline DualState make_dual(const SpaceTimeGrid& g) {
  return {Field(g, TimeLoc::node, SpaceLoc::node), Field(g, TimeLoc::cell, SpaceLoc::cell)};
}

/// Cell split of face momenta: (w+ on the right face, w- on the left face)
/// per axis, keeping the sign that the upwind operator transports.
inline SmallVec split_momentum(const Field& w, int k, std::size_t i, const NeighborTable& nb) {
  const int d = w.grid.dim();
  SmallVec out(static_cast<std::size_t>(2 * d));
  for (int a = 0; a < d; ++a) {
    out[2 * a] = std::max(w.at(k, i, a), 0.0);
    out[2 * a + 1] = std::min(w.at(k, nb.minus[a][i], a), 0.0);
  }
  return out;
}

inline void require_shapes(const PrimalState& s, const SpaceTimeGrid& g) {
  if (!(s.m.grid == g) || s.m.time != TimeLoc::cell || s.m.space != SpaceLoc::cell)
    throw GridError("primal state: density must be a time-cell/space-cell field on the problem grid");
  if (!(s.w.grid == g) || s.w.time != TimeLoc::cell || s.w.space != SpaceLoc::face)
    throw GridError("primal state: momentum must be a time-cell/face field on the problem grid");
}

/// B(m, w): kinetic plus congestion cost over cells and the terminal pairing
/// with the last density slice.
inline Extended eval_B(const PrimalState& s, const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  require_shapes(s, g);
  const NeighborTable nb(g);
  const std::size_t n = g.slice_size();
  const double vol = g.cell_volume();
  const double w_cell = g.ht() * vol;
  bool infinite = false;
  const double running = deterministic_sum(static_cast<std::size_t>(g.nt()) * n, [&](std::size_t idx) {
    const int k = static_cast<int>(idx / n);
    const std::size_t i = idx % n;
    const double m = s.m.at(k, i);
    const Extended cong = data.coupling.F_local(data.coupling.weight[i], m);
    if (cong.is_infinite()) {
      infinite = true;
      return 0.0;
    }
    const Extended kin = kinetic_integrand(data.hamiltonian, data.hamiltonian.potential[i], m,
                                           split_momentum(s.w, k, i, nb));
    if (kin.is_infinite()) {
      infinite = true;
      return 0.0;
    }
    return w_cell * (cong.value() + kin.value());
  });
  if (infinite) return Extended::infinity();
  double terminal = 0.0;
  for (std::size_t i = 0; i < n; ++i) terminal += data.phi_T[i] * s.m.at(g.nt() - 1, i);
  return Extended(running + vol * terminal);
}

class TerminalConditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A(phi, alpha) = sum F*(alpha) - <phi(0), m0>; requires phi(T) = phi_T.
inline double eval_A(const DualState& s, const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  const std::size_t n = g.slice_size();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(s.phi.at(g.nt(), i) - data.phi_T[i]) > 1e-12) {
      throw TerminalConditionError("eval_A: phi(T) differs from phi_T at node " + std::to_string(i));
    }
  }
  const double vol = g.cell_volume();
  const double running = deterministic_sum(static_cast<std::size_t>(g.nt()) * n, [&](std::size_t idx) {
    return data.coupling.Fstar_local(data.coupling.weight[idx % n], s.alpha.values[idx]);
  });
  double initial = 0.0;
  for (std::size_t i = 0; i < n; ++i) initial += s.phi.at(0, i) * data.m0[i];
  return g.ht() * vol * running - vol * initial;
}

/// -d_t phi + H(x, D phi) on every time cell, with the upwind gradient taken
/// at the earlier time node of the cell.
inline Field hj_operator(const Field& phi, const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  const NeighborTable nb(g);
  Field out(g, TimeLoc::cell, SpaceLoc::cell);
  const std::size_t n = g.slice_size();
  const double inv_ht = 1.0 / g.ht();
  default_executor().for_blocks(static_cast<std::size_t>(g.nt()), [&](std::size_t kb) {
    const int k = static_cast<int>(kb);
    const auto cur = phi.slice(k);
    const auto next = phi.slice(k + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const SmallVec b = upwind_gradient(cur, nb, i, g.dim(), g.hx());
      out.at(k, i) = -(next[i] - cur[i]) * inv_ht +
                     cell_hamiltonian(data.hamiltonian, data.hamiltonian.potential[i], b, GradientLayout::upwind);
    }
  });
  return out;
}

/// Smallest admissible control for phi: (-d_t phi + H)^+ per cell.
inline Field relaxed_control(const Field& phi, const ProblemData& data) {
  Field a = hj_operator(phi, data);
  for (double& v : a.values) v = std::max(v, 0.0);
  return a;
}

/// max over cells of (-d_t phi + H - alpha)^+.
inline double constraint_residual(const DualState& s, const ProblemData& data) {
  const Field h = hj_operator(s.phi, data);
  return deterministic_max(h.values.size(), [&](std::size_t i) { return std::max(0.0, h.values[i] - s.alpha.values[i]); });
}

/// Cellwise residual of (m_k - m_{k-1}) / h_t + div w_k with m_{-1} = m0.
inline Field continuity_defect(const PrimalState& s, const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  Field div = divergence(s.w);
  const std::size_t n = g.slice_size();
  for (int k = 0; k < g.nt(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double prev = k == 0 ? data.m0[i] : s.m.at(k - 1, i);
      div.at(k, i) += (s.m.at(k, i) - prev) / g.ht();
    }
  }
  return div;
}

/// L1 norm (space-time quadrature) of the continuity defect.
inline double continuity_residual(const PrimalState& s, const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  const Field r = continuity_defect(s, data);
  return g.ht() * g.cell_volume() *
         deterministic_sum(r.values.size(), [&](std::size_t i) { return std::abs(r.values[i]); });
}

}  // namespace weakmfg

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "weakmfg/functionals.hpp"
#include "weakmfg/grid.hpp"
#include "weakmfg/model.hpp"

namespace weakmfg {

class HJSweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HJSweepOptions {
  int max_sweeps = 20000;
  double tol = 1e-13;
};

namespace detail {

/// Root of x + ht * (|P(x)|^r / r - ell) = rhs, where P(x) is the active
/// upwind gradient at a node whose neighbors are frozen. The left side is
/// convex and increasing in x, so Newton from an upper bound decreases
/// monotonically to the root.
inline double implicit_node_update(const PowerHamiltonian& ham, double ell, double rhs, double ht, double hx,
                                   const double* plus, const double* minus, int d) {
  const double r = ham.r;
  double x = rhs + ht * ell;
  for (int it = 0; it < 200; ++it) {
    double norm_sq = 0.0;
    double abs_sum = 0.0;
    for (int a = 0; a < d; ++a) {
      const double dp = std::min((plus[a] - x) / hx, 0.0);
      const double dm = std::max((x - minus[a]) / hx, 0.0);
      norm_sq += dp * dp + dm * dm;
      abs_sum += -dp + dm;
    }
    const double rho = std::sqrt(norm_sq);
    const double g = x + ht * (std::pow(rho, r) / r - ell) - rhs;
    if (g <= 1e-15 * (1.0 + std::abs(rhs))) return x;
    const double slope = 1.0 + (rho > 0.0 ? ht * std::pow(rho, r - 2.0) * abs_sum / hx : 0.0);
    const double next = x - g / slope;
    if (!(next < x)) return x;
    x = next;
  }
  return x;
}

}  // namespace detail

/// Backward implicit sweep: phi(T) = phi_T and, for k = nt-1 .. 0,
///   phi_k + ht H(D+- phi_k) = phi_{k+1} + ht alpha_k
/// with the same upwind Hamiltonian the solver uses. Each time level is solved
/// by nonlinear Gauss-Seidel with alternating sweep directions.
inline Field maximal_subsolution(const Field& alpha, const ProblemData& data, const HJSweepOptions& opt = {}) {
  const SpaceTimeGrid g = data.grid();
  if (!(alpha.grid == g) || alpha.time != TimeLoc::cell || alpha.space != SpaceLoc::cell)
    throw GridError("maximal_subsolution: control must be a time-cell/space-cell field on the problem grid");
  const NeighborTable nb(g);
  const std::size_t n = g.slice_size();
  const int d = g.dim();
  const double ht = g.ht();
  const double hx = g.hx();
  Field phi(g, TimeLoc::node, SpaceLoc::node);
  auto last = phi.slice(g.nt());
  std::copy(data.phi_T.values.begin(), data.phi_T.values.end(), last.begin());

  for (int k = g.nt() - 1; k >= 0; --k) {
    const auto next = phi.slice(k + 1);
    auto cur = phi.slice(k);
    std::copy(next.begin(), next.end(), cur.begin());
    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(next[i]));
    bool done = false;
    for (int sweep = 0; sweep < opt.max_sweeps && !done; ++sweep) {
      double change = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t i = (sweep % 2 == 0) ? s : n - 1 - s;
        double plus[2];
        double minus[2];
        for (int a = 0; a < d; ++a) {
          plus[a] = cur[nb.plus[a][i]];
          minus[a] = cur[nb.minus[a][i]];
        }
        const double rhs = next[i] + ht * alpha.at(k, i);
        const double v =
            detail::implicit_node_update(data.hamiltonian, data.hamiltonian.potential[i], rhs, ht, hx, plus, minus, d);
        change = std::max(change, std::abs(v - cur[i]));
        cur[i] = v;
      }
      done = change <= opt.tol * scale;
    }
    if (!done) {
      throw HJSweepError("maximal_subsolution: implicit sweep did not settle at time level " + std::to_string(k) +
                         "; try a larger n_t (suggested n_t >= " + std::to_string(2 * g.nt()) + ")");
    }
  }
  return phi;
}

}  // namespace weakmfg

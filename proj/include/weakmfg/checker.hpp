#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "weakmfg/functionals.hpp"
#include "weakmfg/grid.hpp"
#include "weakmfg/model.hpp"
#include "weakmfg/parallel.hpp"
#include "weakmfg/solver.hpp"

namespace weakmfg {

struct CheckThresholds {
  /// Cells with m > m_cut_rel * max(m) form the positive set.
  double m_cut_rel = 1e-6;
  double solver_tol = 1e-5;
  double res_iii_factor = 10.0;
  double res_iv_rel = 1e-2;
  double condsup = 1e-6;
  double res_ii_ae = 1e-2;
};

struct IntegrabilityReport {
  double grad_r = 0.0;          // sum |D phi|^r
  double flux = 0.0;            // sum |m D_pH(D phi)|
  double energy_density = 0.0;  // sum |m (d_t phi - <D phi, D_pH>)|
  bool finite = true;
};

struct WeakSolutionReport {
  IntegrabilityReport res_i;
  double res_ii_ae = 0.0;
  double res_ii_distrib = 0.0;
  double res_iii = 0.0;
  double res_iv_lhs = 0.0;
  double res_iv_rhs = 0.0;
  double res_iv_defect = 0.0;
  double condsup_residual = 0.0;
  double m_cut = 0.0;
  CheckThresholds thresholds;

  double res_iv_relative() const { return std::abs(res_iv_defect) / (1.0 + std::abs(res_iv_rhs)); }
  bool pass_i() const { return res_i.finite; }
  bool pass_ii() const { return res_ii_ae <= thresholds.res_ii_ae; }
  bool pass_iii() const { return res_iii <= thresholds.res_iii_factor * thresholds.solver_tol; }
  bool pass_iv() const { return res_iv_relative() <= thresholds.res_iv_rel; }
  bool pass_condsup() const { return condsup_residual <= thresholds.condsup; }
  bool ok() const { return pass_i() && pass_ii() && pass_iii() && pass_iv() && pass_condsup(); }
};

/// max over cells of (-(-d_t phi + H))^+, with the solver's upwind operator.
inline double check_condsup(const Field& phi, const ProblemData& data) {
  const Field s = hj_operator(phi, data);
  return deterministic_max(s.values.size(), [&](std::size_t i) { return std::max(0.0, -s.values[i]); });
}

namespace detail {

/// Nonnegative tensor cos^2 bumps of half-width rho (space) and rho_t (time),
/// centered on a lattice of spacing rho inside (0, T) x torus.
inline double distributional_residual(const Field& defect, const SpaceTimeGrid& g) {
  const int d = g.dim();
  const std::size_t n = g.slice_size();
  double worst = 0.0;
  for (double rho : {0.25, 0.125, 0.0625}) {
    const double rho_t = rho * g.horizon();
    const int centers = static_cast<int>(std::lround(1.0 / rho));
    const int t_centers = std::max(1, centers - 1);
    for (int ct = 1; ct <= t_centers; ++ct) {
      const double tc = ct * rho_t;
      for (int cx = 0; cx < centers; ++cx) {
        for (int cy = 0; cy < (d == 2 ? centers : 1); ++cy) {
          const Point c{cx * rho, cy * rho};
          double num = 0.0;
          double den = 0.0;
          for (int k = 0; k < g.nt(); ++k) {
            const double dt = g.time_cell(k) - tc;
            if (std::abs(dt) >= rho_t) continue;
            const double wt = std::pow(std::cos(std::numbers::pi * dt / (2 * rho_t)), 2);
            for (std::size_t i = 0; i < n; ++i) {
              const Point x = g.node_position(i);
              double wx = wt;
              for (int a = 0; a < d && wx > 0; ++a) {
                const double dx = torus_delta(x[a], c[a]);
                wx = std::abs(dx) >= rho ? 0.0 : wx * std::pow(std::cos(std::numbers::pi * dx / (2 * rho)), 2);
              }
              if (wx == 0.0) continue;
              num += wx * defect.at(k, i);
              den += wx;
            }
          }
          if (den > 0.0) worst = std::max(worst, num / den);
        }
      }
    }
  }
  return worst;
}

}  // namespace detail

/// Residuals of the four conditions of a weak solution for (m, phi) on the
/// grid, using the solver's discrete operators; the time difference stands in
/// for the absolutely continuous part of d_t phi.
inline WeakSolutionReport check_weak_solution(const Field& m, const Field& phi, const ProblemData& data,
                                              const CheckThresholds& th = {}) {
  const SpaceTimeGrid g = data.grid();
  if (!(m.grid == g) || !(phi.grid == g) || m.time != TimeLoc::cell || m.space != SpaceLoc::cell ||
      phi.time != TimeLoc::node || phi.space != SpaceLoc::node)
    throw GridError("check_weak_solution: fields do not match the problem grid");
  WeakSolutionReport rep;
  rep.thresholds = th;
  const std::size_t n = g.slice_size();
  const int d = g.dim();
  const int nc = 2 * d;
  const double w = g.ht() * g.cell_volume();
  const double r = data.hamiltonian.r;
  const NeighborTable nb(g);

  double m_max = 0.0;
  for (double v : m.values) m_max = std::max(m_max, v);
  rep.m_cut = th.m_cut_rel * m_max;

  const Field s = hj_operator(phi, data);
  double ae = 0.0;
  double lhs = 0.0;
  IntegrabilityReport& ir = rep.res_i;
  for (int k = 0; k < g.nt(); ++k) {
    const auto sl = phi.slice(k);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = static_cast<std::size_t>(k) * n + i;
      const double mv = m.values[c];
      const SmallVec b = upwind_gradient(sl, nb, i, d, g.hx());
      const SmallVec act = active_part(b, GradientLayout::upwind);
      const SmallVec dh = cell_hamiltonian_gradient(data.hamiltonian, b, GradientLayout::upwind);
      double pair = 0.0;
      for (int j = 0; j < nc; ++j) {
        pair += b[j] * dh[j];
      }
      const double dt = (phi.at(k + 1, i) - phi.at(k, i)) / g.ht();
      ir.grad_r += w * std::pow(norm2(act), r);
      ir.flux += w * std::abs(mv) * norm2(dh);
      ir.energy_density += w * std::abs(mv * (dt - pair));
      lhs += w * mv * (dt - pair);
      if (mv > rep.m_cut) {
        ae += w * std::abs(s.values[c] - data.coupling.f_local(data.coupling.weight[i], std::max(0.0, mv)));
      }
    }
  }
  ir.finite = std::isfinite(ir.grad_r) && std::isfinite(ir.flux) && std::isfinite(ir.energy_density);
  rep.res_ii_ae = ae;

  Field defect = s;
  for (std::size_t c = 0; c < defect.values.size(); ++c)
    defect.values[c] -= data.coupling.f_local(data.coupling.weight[c % n], std::max(0.0, m.values[c]));
  rep.res_ii_distrib = detail::distributional_residual(defect, g);

  rep.res_iii = induced_continuity_residual(m, phi, data);

  double rhs = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    rhs += g.cell_volume() * (m.at(g.nt() - 1, i) * data.phi_T[i] - data.m0[i] * phi.at(0, i));
  rep.res_iv_lhs = lhs;
  rep.res_iv_rhs = rhs;
  rep.res_iv_defect = lhs - rhs;
  rep.condsup_residual = check_condsup(phi, data);
  return rep;
}

struct ComparisonResult {
  bool ordered = false;
  /// max(phi1 - phi2) over all nodes.
  double max_defect = 0.0;
  /// mean of phi2 - phi1 on the last free time slice.
  double terminal_difference = 0.0;
  SolveResult first;
  SolveResult second;
};

/// Solves both problems and compares the delivered potentials.
inline ComparisonResult comparison_test(const ProblemData& data1, const ProblemData& data2, const SolverConfig& cfg,
                                        double tol = 1e-6) {
  for (std::size_t i = 0; i < data1.phi_T.size(); ++i) {
    if (data1.phi_T[i] > data2.phi_T[i]) throw std::invalid_argument("comparison_test: requires phi_T1 <= phi_T2");
  }
  ComparisonResult out;
  out.first = solve(data1, cfg);
  out.second = solve(data2, cfg);
  const auto& p1 = out.first.dual.phi.values;
  const auto& p2 = out.second.dual.phi.values;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p1.size(); ++i) worst = std::max(worst, p1[i] - p2[i]);
  out.max_defect = worst;
  out.ordered = worst <= tol;
  const SpaceTimeGrid g = data1.grid();
  double mean = 0.0;
  for (std::size_t i = 0; i < g.slice_size(); ++i)
    mean += out.second.dual.phi.at(g.nt() - 1, i) - out.first.dual.phi.at(g.nt() - 1, i);
  out.terminal_difference = mean / static_cast<double>(g.slice_size());
  return out;
}

struct StabilityPoint {
  double eps = 0.0;
  double m_distance = 0.0;    // L^q distance of densities
  double phi_distance = 0.0;  // sup distance of potentials
};

/// Distances between the solution of `base` and the solutions of perturbed
/// problems perturb(base, eps_k).
template <class Perturb>
std::vector<StabilityPoint> stability_test(const ProblemData& base, const std::vector<double>& eps, Perturb&& perturb,
                                           const SolverConfig& cfg) {
  const SolveResult ref = solve(base, cfg);
  const SpaceTimeGrid g = base.grid();
  const double q = base.coupling.q;
  std::vector<StabilityPoint> out;
  for (double e : eps) {
    StabilityPoint pt;
    pt.eps = e;
    if (e != 0.0) {
      const ProblemData pd = perturb(base, e);
      const SolveResult sol = solve(pd, cfg);
      double sum = 0.0;
      for (std::size_t c = 0; c < ref.primal.m.values.size(); ++c)
        sum += std::pow(std::abs(sol.primal.m.values[c] - ref.primal.m.values[c]), q);
      pt.m_distance = std::pow(g.ht() * g.cell_volume() * sum, 1.0 / q);
      double sup = 0.0;
      for (std::size_t c = 0; c < ref.dual.phi.values.size(); ++c)
        sup = std::max(sup, std::abs(sol.dual.phi.values[c] - ref.dual.phi.values[c]));
      pt.phi_distance = sup;
    }
    out.push_back(pt);
  }
  return out;
}

struct HolderResult {
  /// sup over dyadic node pairs of (phi(t1) - phi(t2)) / ((t2 - t1)^nu |alpha|_p).
  double worst_ratio = -std::numeric_limits<double>::infinity();
  double nu = 0.0;
  double alpha_norm = 0.0;
};

inline HolderResult check_holder_time(const Field& phi, const Field& alpha, const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  HolderResult out;
  out.nu = holder_exponent(data.hamiltonian.r, data.coupling.q, g.dim());
  const double p = data.coupling.p_conj();
  double sum = 0.0;
  for (double a : alpha.values) sum += std::pow(std::abs(a), p);
  out.alpha_norm = std::pow(g.ht() * g.cell_volume() * sum, 1.0 / p);
  const double norm = out.alpha_norm > 0.0 ? out.alpha_norm : 1.0;
  const std::size_t n = g.slice_size();
  for (int step = 1; step <= g.nt(); step *= 2) {
    const double dt = step * g.ht();
    const double scale = std::pow(dt, out.nu) * norm;
    for (int k1 = 0; k1 + step <= g.nt(); k1 += step) {
      const int k2 = k1 + step;
      double worst = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, phi.at(k1, i) - phi.at(k2, i));
      out.worst_ratio = std::max(out.worst_ratio, worst / scale);
    }
  }
  return out;
}

struct EllipticResidual {
  /// min{G, -d_t phi + H} at time nodes 2 .. nt-2; zero elsewhere.
  Field values;
  /// h_t h^d weighted L1 norm over the evaluated nodes.
  double l1 = 0.0;
  double max_abs = 0.0;
};

/// Space-time elliptic operator for the power families, with central
/// differences at nodes at least two steps from t = 0 and t = T. G is set to
/// 0 where -p_t + H <= delta_reg.
inline EllipticResidual elliptic_residual(const Field& phi, const ProblemData& data, double delta_reg = 1e-8) {
  const SpaceTimeGrid g = data.grid();
  if (!(phi.grid == g) || phi.time != TimeLoc::node || phi.space != SpaceLoc::node)
    throw GridError("elliptic_residual: potential must be a node field on the problem grid");
  EllipticResidual out{Field(g, TimeLoc::node, SpaceLoc::node), 0.0, 0.0};
  const NeighborTable nb(g);
  const int d = g.dim();
  const std::size_t n = g.slice_size();
  const double ht = g.ht();
  const double hx = g.hx();
  const double r = data.hamiltonian.r;
  const double pexp = data.coupling.p_conj();
  const auto& ell = data.hamiltonian.potential;
  const auto& cw = data.coupling.weight;

  auto central = [&](const SpatialField& f, std::size_t i, int a) {
    return (f[nb.plus[a][i]] - f[nb.minus[a][i]]) / (2 * hx);
  };

  for (int k = 2; k <= g.nt() - 2; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      auto P = [&](int kk, std::size_t ii) { return phi.at(kk, ii); };
      const double pt = (P(k + 1, i) - P(k - 1, i)) / (2 * ht);
      const double a2 = (P(k + 1, i) - 2 * P(k, i) + P(k - 1, i)) / (ht * ht);
      std::array<double, 2> px{0, 0}, bx{0, 0};
      std::array<std::array<double, 2>, 2> C{};
      for (int a = 0; a < d; ++a) {
        const std::size_t ip = nb.plus[a][i];
        const std::size_t im = nb.minus[a][i];
        px[a] = (P(k, ip) - P(k, im)) / (2 * hx);
        bx[a] = (P(k + 1, ip) - P(k + 1, im) - P(k - 1, ip) + P(k - 1, im)) / (4 * hx * ht);
        C[a][a] = (P(k, ip) - 2 * P(k, i) + P(k, im)) / (hx * hx);
      }
      if (d == 2) {
        const std::size_t pp = nb.plus[1][nb.plus[0][i]];
        const std::size_t pm = nb.minus[1][nb.plus[0][i]];
        const std::size_t mp = nb.plus[1][nb.minus[0][i]];
        const std::size_t mm = nb.minus[1][nb.minus[0][i]];
        C[0][1] = C[1][0] = (P(k, pp) - P(k, pm) - P(k, mp) + P(k, mm)) / (4 * hx * hx);
      }
      const double np = std::sqrt(px[0] * px[0] + px[1] * px[1]);
      const double H = std::pow(np, r) / r - ell[i];
      const double alpha = -pt + H;
      double G = 0.0;
      if (alpha > delta_reg) {
        const double c = cw[i];
        const double Fa = std::pow(alpha, pexp - 1.0) * std::pow(c, 1.0 - pexp);
        const double Faa = (pexp - 1.0) * std::pow(alpha, pexp - 2.0) * std::pow(c, 1.0 - pexp);
        std::array<double, 2> Hp{0, 0}, Hx{0, 0}, Fxa{0, 0};
        const double s = np > 0.0 ? std::pow(np, r - 2.0) : 0.0;
        for (int a = 0; a < d; ++a) {
          Hp[a] = s * px[a];
          Hx[a] = -central(ell, i, a);
          Fxa[a] = std::pow(alpha, pexp - 1.0) * (1.0 - pexp) * std::pow(c, -pexp) * central(cw, i, a);
        }
        // Hpp = |p|^{r-2} (I + (r-2) p p^T / |p|^2).
        std::array<std::array<double, 2>, 2> Hpp{};
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) {
            double v = a == b ? 1.0 : 0.0;
            if (np > 0.0) v += (r - 2.0) * px[a] * px[b] / (np * np);
            Hpp[a][b] = np > 0.0 ? s * v : (r == 2.0 ? v : 0.0);
          }
        double hp_b = 0.0, hp_hx = 0.0, chh = 0.0, fxa_hp = 0.0, tr = 0.0;
        for (int a = 0; a < d; ++a) {
          hp_b += Hp[a] * bx[a];
          hp_hx += Hp[a] * Hx[a];
          fxa_hp += Fxa[a] * Hp[a];
          for (int b = 0; b < d; ++b) {
            chh += C[a][b] * Hp[a] * Hp[b];
            tr += Hpp[a][b] * C[b][a];
          }
        }
        G = Faa * (-a2 + 2 * hp_b - chh - hp_hx) - fxa_hp - Fa * tr;
      }
      const double v = std::min(G, alpha);
      out.values.at(k, i) = v;
      out.l1 += ht * g.cell_volume() * std::abs(v);
      out.max_abs = std::max(out.max_abs, std::abs(v));
    }
  }
  return out;
}

}  // namespace weakmfg

#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "weakmfg/functionals.hpp"
#include "weakmfg/grid.hpp"
#include "weakmfg/hj.hpp"
#include "weakmfg/model.hpp"
#include "weakmfg/parallel.hpp"

namespace weakmfg {

/// Values of the linear map phi -> (d_t phi, D+- phi) on every time cell.
/// a[k*n + i] is the time difference and b[(k*n + i)*nc + j] the j-th upwind
/// difference, nc = 2d.
struct CellPair {
  std::vector<double> a;
  std::vector<double> b;
  int nc = 2;

  CellPair() = default;
  explicit CellPair(const SpaceTimeGrid& g)
      : a(static_cast<std::size_t>(g.nt()) * g.slice_size(), 0.0),
        b(a.size() * static_cast<std::size_t>(2 * g.dim()), 0.0),
        nc(2 * g.dim()) {}
};

/// Lambda(phi) over the free nodes k = 0 .. nt-1. With `terminal` set, slice nt
/// of phi enters the last time difference; otherwise it is treated as zero,
/// which gives the linear part of the affine map.
inline CellPair apply_lambda(const Field& phi, bool terminal = true) {
  const SpaceTimeGrid& g = phi.grid;
  const NeighborTable nb(g);
  const std::size_t n = g.slice_size();
  CellPair out(g);
  const double inv_ht = 1.0 / g.ht();
  default_executor().for_blocks(static_cast<std::size_t>(g.nt()), [&](std::size_t kb) {
    const int k = static_cast<int>(kb);
    const auto cur = phi.slice(k);
    const auto next = phi.slice(k + 1);
    const bool use_next = terminal || k + 1 < g.nt();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = kb * n + i;
      out.a[c] = ((use_next ? next[i] : 0.0) - cur[i]) * inv_ht;
      const SmallVec b = upwind_gradient(cur, nb, i, g.dim(), g.hx());
      for (int j = 0; j < out.nc; ++j) out.b[c * out.nc + j] = b[j];
    }
  });
  return out;
}

/// Transpose of the linear part of apply_lambda; slice nt of the result is 0.
inline Field apply_lambda_adjoint(const CellPair& y, const SpaceTimeGrid& g) {
  const NeighborTable nb(g);
  const std::size_t n = g.slice_size();
  const int d = g.dim();
  const int nc = 2 * d;
  const double inv_ht = 1.0 / g.ht();
  const double inv_hx = 1.0 / g.hx();
  Field out(g, TimeLoc::node, SpaceLoc::node);
  default_executor().for_blocks(static_cast<std::size_t>(g.nt()), [&](std::size_t kb) {
    const int k = static_cast<int>(kb);
    auto o = out.slice(k);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = kb * n + i;
      double v = -y.a[c] * inv_ht;
      if (k >= 1) v += y.a[c - n] * inv_ht;
      for (int a = 0; a < d; ++a) {
        const std::size_t ip = nb.plus[a][i];
        const std::size_t im = nb.minus[a][i];
        const std::size_t cm = kb * n + im;
        const std::size_t cp = kb * n + ip;
        // Forward component 2a at cells i and i-1, backward 2a+1 at i and i+1.
        v += (y.b[cm * nc + 2 * a] - y.b[c * nc + 2 * a]) * inv_hx;
        v += (y.b[c * nc + 2 * a + 1] - y.b[cp * nc + 2 * a + 1]) * inv_hx;
      }
      o[i] = v;
    }
  });
  return out;
}

struct OperatorNorm {
  double full = 0.0;
  double time_part = 0.0;
  double space_part = 0.0;
};

namespace detail {

inline double power_iteration(const SpaceTimeGrid& g, std::uint64_t seed, bool use_time, bool use_space) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Field v(g, TimeLoc::node, SpaceLoc::node);
  const std::size_t free = static_cast<std::size_t>(g.nt()) * g.slice_size();
  for (std::size_t i = 0; i < free; ++i) v.values[i] = nd(rng);
  auto normalize = [&](Field& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < free; ++i) s += f.values[i] * f.values[i];
    s = std::sqrt(s);
    for (std::size_t i = 0; i < free; ++i) f.values[i] /= s;
    return s;
  };
  normalize(v);
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    CellPair y = apply_lambda(v, false);
    if (!use_time) std::fill(y.a.begin(), y.a.end(), 0.0);
    if (!use_space) std::fill(y.b.begin(), y.b.end(), 0.0);
    Field next = apply_lambda_adjoint(y, g);
    const double est = normalize(next);
    v = std::move(next);
    if (it > 10 && std::abs(est - lambda) <= 1e-7 * est) {
      lambda = est;
      break;
    }
    lambda = est;
  }
  return std::sqrt(lambda);
}

}  // namespace detail

/// Power iteration on Lambda* Lambda for the full operator and for its time
/// and space blocks separately.
inline OperatorNorm estimate_operator_norm(const SpaceTimeGrid& g, std::uint64_t seed = 0) {
  OperatorNorm out;
  out.full = detail::power_iteration(g, seed, true, true);
  out.time_part = detail::power_iteration(g, seed + 1, true, false);
  out.space_part = detail::power_iteration(g, seed + 2, false, true);
  return out;
}

struct SolverConfig {
  double tol = 1e-5;
  long max_iters = 50000;
  double step_safety = 0.95;
  std::uint64_t seed = 0;
  long checkpoint_every = 0;
  unsigned threads = 1;
  /// sigma / tau; the product is fixed by step_safety / |Lambda|^2.
  double step_ratio = 10.0;
  /// Iterations between gap evaluations.
  long check_every = 20;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SaddleState {
  DualState dual;
  PrimalState primal;
  /// Cellwise momentum split (w+ , w-) per axis, nc = 2d values per cell.
  std::vector<double> w_split;
  /// Last prox output, the auxiliary copy of (d_t phi, D+- phi).
  CellPair aux;
  Field phi_bar;
  double sigma = 0.0;
  double tau = 0.0;
  double op_norm = 0.0;
  long iteration = 0;
};

/// Assemble face momenta from the cell split: W_{i+1/2} = w+_i + w-_{i+1}.
inline void faces_from_split(SaddleState& s) {
  const SpaceTimeGrid& g = s.primal.w.grid;
  const NeighborTable nb(g);
  const std::size_t n = g.slice_size();
  const int d = g.dim();
  const int nc = 2 * d;
  for (int k = 0; k < g.nt(); ++k) {
    for (int a = 0; a < d; ++a) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = static_cast<std::size_t>(k) * n + i;
        const std::size_t cp = static_cast<std::size_t>(k) * n + nb.plus[a][i];
        s.primal.w.at(k, i, a) = s.w_split[c * nc + 2 * a] + s.w_split[cp * nc + 2 * a + 1];
      }
    }
  }
}

inline SaddleState initial_state(const ProblemData& data, const SolverConfig& cfg) {
  const SpaceTimeGrid g = data.grid();
  SaddleState s;
  s.dual = make_dual(g);
  s.primal = make_primal(g);
  for (int k = 0; k <= g.nt(); ++k) {
    auto sl = s.dual.phi.slice(k);
    std::copy(data.phi_T.values.begin(), data.phi_T.values.end(), sl.begin());
  }
  for (int k = 0; k < g.nt(); ++k) {
    auto sl = s.primal.m.slice(k);
    std::copy(data.m0.values.begin(), data.m0.values.end(), sl.begin());
  }
  s.w_split.assign(static_cast<std::size_t>(g.nt()) * g.slice_size() * (2 * g.dim()), 0.0);
  s.aux = CellPair(g);
  s.phi_bar = s.dual.phi;
  s.op_norm = estimate_operator_norm(g, cfg.seed).full;
  if (!(cfg.step_safety > 0.0) || !(cfg.step_ratio > 0.0)) throw SolverError("solver: step_safety and step_ratio must be positive");
  const double prod = cfg.step_safety / (s.op_norm * s.op_norm);
  s.sigma = std::sqrt(prod * cfg.step_ratio);
  s.tau = std::sqrt(prod / cfg.step_ratio);
  return s;
}

/// One primal-dual iteration with over-relaxation 1:
///   (m, w) <- prox_{sigma G*}((m, w) + sigma (Lambda phi_bar + c)) via prox_K,
///   phi    <- phi - tau * (continuity defect),
///   phi_bar <- 2 phi_new - phi_old.
/// The terminal slice of phi stays equal to phi_T throughout.
inline void pd_step(SaddleState& s, const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  const std::size_t n = g.slice_size();
  const int nc = 2 * g.dim();
  const CellPair lam = apply_lambda(s.phi_bar, true);
  const double sigma = s.sigma;
  const double inv_sigma = 1.0 / sigma;
  const auto& ham = data.hamiltonian;
  const auto& coup = data.coupling;

  default_executor().for_blocks(static_cast<std::size_t>(g.nt()), [&](std::size_t kb) {
    SmallVec b0(static_cast<std::size_t>(nc));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = kb * n + i;
      const double m = s.primal.m.values[c];
      const double a0 = (-m + sigma * lam.a[c]) * inv_sigma;
      for (int j = 0; j < nc; ++j) b0[j] = (-s.w_split[c * nc + j] + sigma * lam.b[c * nc + j]) * inv_sigma;
      ProxKResult p;
      try {
        p = prox_K(ham, coup, ham.potential[i], coup.weight[i], a0, b0, inv_sigma, GradientLayout::upwind);
      } catch (const ProxError& e) {
        const auto mi = g.multi(i);
        throw ProxError(std::string(e.what()) + " at cell (k=" + std::to_string(kb) + ", i=" + std::to_string(mi[0]) +
                        (g.dim() == 2 ? ", j=" + std::to_string(mi[1]) : std::string()) + ")");
      }
      s.primal.m.values[c] = p.density;
      const SmallVec grad = cell_hamiltonian_gradient(ham, p.b, GradientLayout::upwind);
      for (int j = 0; j < nc; ++j) s.w_split[c * nc + j] = -p.density * grad[j];
      s.aux.a[c] = p.a;
      for (int j = 0; j < nc; ++j) s.aux.b[c * nc + j] = p.b[j];
    }
  });
  faces_from_split(s);

  const Field defect = continuity_defect(s.primal, data);
  const double tau = s.tau;
  for (int k = 0; k < g.nt(); ++k) {
    auto phi = s.dual.phi.slice(k);
    auto bar = s.phi_bar.slice(k);
    const auto r = defect.slice(k);
    for (std::size_t i = 0; i < n; ++i) {
      const double updated = phi[i] - tau * r[i];
      bar[i] = 2.0 * updated - phi[i];
      phi[i] = updated;
    }
  }
  ++s.iteration;
}

struct SolveReport {
  double duality_gap = 0.0;
  double primal_value = 0.0;
  double dual_value = 0.0;
  double continuity_residual = 0.0;
  double constraint_residual = 0.0;
  double energy_identity_residual = 0.0;
  double momentum_residual = 0.0;
  double induced_continuity_residual = 0.0;
  double alpha_discrepancy = 0.0;
  double max_superlevel_gap = 0.0;
  long iterations = 0;
  bool converged = false;
  std::vector<std::pair<long, double>> gap_history;
  double operator_norm = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
  double wall_time = 0.0;
};

struct SolveResult {
  PrimalState primal;
  DualState dual;
  /// The raw potential iterate before the maximal-subsolution selection.
  Field raw_phi;
  SolveReport report;
};

struct GapEvaluation {
  double A = 0.0;
  Extended B;
  double gap = 0.0;
  double continuity = 0.0;
};

inline GapEvaluation evaluate_gap(const SaddleState& s, const ProblemData& data) {
  GapEvaluation e;
  DualState d{s.dual.phi, relaxed_control(s.dual.phi, data)};
  e.A = eval_A(d, data);
  e.B = eval_B(s.primal, data);
  e.gap = e.B.is_infinite() ? std::numeric_limits<double>::infinity() : e.A + e.B.value();
  e.continuity = continuity_residual(s.primal, data);
  return e;
}

struct AlphaExtraction {
  Field alpha;
  /// L^p distance (p conjugate to q) between alpha and f(x, m).
  double discrepancy = 0.0;
};

/// alpha = (-d_t phi + H)^+ per cell, cross-checked against f(x, m).
inline AlphaExtraction extract_alpha(const DualState& dual, const PrimalState& primal, const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  AlphaExtraction out{relaxed_control(dual.phi, data), 0.0};
  const std::size_t n = g.slice_size();
  const double p = data.coupling.p_conj();
  const double sum = deterministic_sum(out.alpha.values.size(), [&](std::size_t c) {
    const double m = std::max(0.0, primal.m.values[c]);
    return std::pow(std::abs(out.alpha.values[c] - data.coupling.f_local(data.coupling.weight[c % n], m)), p);
  });
  out.discrepancy = std::pow(g.ht() * g.cell_volume() * sum, 1.0 / p);
  return out;
}

/// Sum over cells of h_t h^d |w + m DH(D+- phi)| for the cell split of w,
/// divided by the same norm of m.
inline double momentum_residual(const std::vector<double>& w_split, const Field& m, const Field& phi,
                                const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  const NeighborTable nb(g);
  const std::size_t n = g.slice_size();
  const int nc = 2 * g.dim();
  double num = 0.0;
  double den = 0.0;
  for (int k = 0; k < g.nt(); ++k) {
    const auto sl = phi.slice(k);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = static_cast<std::size_t>(k) * n + i;
      const SmallVec b = upwind_gradient(sl, nb, i, g.dim(), g.hx());
      const SmallVec dh = cell_hamiltonian_gradient(data.hamiltonian, b, GradientLayout::upwind);
      double e = 0.0;
      for (int j = 0; j < nc; ++j) e += std::pow(w_split[c * nc + j] + m.values[c] * dh[j], 2);
      num += std::sqrt(e);
      den += std::abs(m.values[c]);
    }
  }
  return den > 0.0 ? num / den : num;
}

/// Continuity residual of (m, -m D_pH(D+- phi)): the flux induced by the
/// potential rather than the primal iterate.
inline double induced_continuity_residual(const Field& m, const Field& phi, const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  const NeighborTable nb(g);
  const std::size_t n = g.slice_size();
  const int nc = 2 * g.dim();
  SaddleState t;
  t.primal = make_primal(g);
  t.primal.m = m;
  t.w_split.assign(static_cast<std::size_t>(g.nt()) * n * nc, 0.0);
  default_executor().for_blocks(static_cast<std::size_t>(g.nt()), [&](std::size_t kb) {
    const auto sl = phi.slice(static_cast<int>(kb));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = kb * n + i;
      const SmallVec b = upwind_gradient(sl, nb, i, g.dim(), g.hx());
      const SmallVec dh = cell_hamiltonian_gradient(data.hamiltonian, b, GradientLayout::upwind);
      for (int j = 0; j < nc; ++j) t.w_split[c * nc + j] = -m.values[c] * dh[j];
    }
  });
  faces_from_split(t);
  return continuity_residual(t.primal, data);
}

/// Runs the primal-dual iteration until |A + B| <= tol (1 + |B|) and both the
/// primal and the potential-induced continuity defects are below tol, then delivers the maximal subsolution for
/// the extracted control and the simplex-projected density.
inline SolveResult solve(const ProblemData& data, const SolverConfig& cfg,
                         const std::function<void(const SaddleState&)>& checkpoint = {}) {
  require_valid(data);
  if (cfg.threads > 0) default_executor(cfg.threads);
  const auto t0 = std::chrono::steady_clock::now();
  const SpaceTimeGrid g = data.grid();
  SaddleState s = initial_state(data, cfg);

  SolveResult res;
  SolveReport& rep = res.report;
  rep.operator_norm = s.op_norm;
  rep.sigma = s.sigma;
  rep.tau = s.tau;

  const GapEvaluation first = evaluate_gap(s, data);
  const double gap_ref = std::max(std::abs(first.gap), 1e-3 * (1.0 + std::abs(first.B.value_or(0.0))));
  rep.gap_history.emplace_back(0, first.gap);
  GapEvaluation last = first;
  double induced = std::numeric_limits<double>::infinity();
  const long every = std::max<long>(1, cfg.check_every);
  while (s.iteration < cfg.max_iters) {
    pd_step(s, data);
    if (cfg.checkpoint_every > 0 && checkpoint && s.iteration % cfg.checkpoint_every == 0) checkpoint(s);
    if (s.iteration % every != 0 && s.iteration != cfg.max_iters) continue;
    last = evaluate_gap(s, data);
    rep.gap_history.emplace_back(s.iteration, last.gap);
    if (!std::isfinite(last.A) || (last.B.is_finite() && !std::isfinite(last.B.value())) ||
        (std::isfinite(last.gap) && std::abs(last.gap) > 10.0 * gap_ref && s.iteration > every * 10) ||
        !std::isfinite(last.continuity)) {
      throw SolverError("solver: duality gap diverged at iteration " + std::to_string(s.iteration) +
                        "; reduce step_safety");
    }
    const double bval = last.B.value_or(std::numeric_limits<double>::infinity());
    if (std::abs(last.gap) <= cfg.tol * (1.0 + std::abs(bval)) && last.continuity <= cfg.tol) {
      induced = induced_continuity_residual(s.primal.m, s.dual.phi, data);
      if (induced <= cfg.tol) {
        rep.converged = true;
        break;
      }
    }
  }

  rep.iterations = s.iteration;
  rep.dual_value = last.A;
  rep.primal_value = last.B.value_or(std::numeric_limits<double>::infinity());
  rep.duality_gap = last.gap;
  rep.continuity_residual = last.continuity;
  rep.momentum_residual = momentum_residual(s.w_split, s.primal.m, s.dual.phi, data);
  rep.induced_continuity_residual =
      rep.converged ? induced : induced_continuity_residual(s.primal.m, s.dual.phi, data);

  res.raw_phi = s.dual.phi;
  AlphaExtraction ex = extract_alpha(s.dual, s.primal, data);
  rep.alpha_discrepancy = ex.discrepancy;
  res.dual.phi = maximal_subsolution(ex.alpha, data);
  res.dual.alpha = std::move(ex.alpha);
  rep.constraint_residual = constraint_residual(res.dual, data);
  double dominance = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < res.raw_phi.values.size(); ++i)
    dominance = std::max(dominance, res.raw_phi.values[i] - res.dual.phi.values[i]);
  rep.max_superlevel_gap = dominance;

  res.primal = s.primal;
  for (int k = 0; k < g.nt(); ++k) {
    auto sl = res.primal.m.slice(k);
    const auto proj = project_simplex(sl, g.cell_volume());
    std::copy(proj.begin(), proj.end(), sl.begin());
  }

  // Energy identity on the delivered pair with the solver momentum.
  {
    const double vol = g.cell_volume();
    const Field dt = time_derivative(res.dual.phi);
    const Field grad = spatial_gradient(res.dual.phi);
    double lhs = 0.0;
    for (int k = 0; k < g.nt(); ++k)
      for (std::size_t i = 0; i < g.slice_size(); ++i) {
        double pair = 0.0;
        for (int a = 0; a < g.dim(); ++a) pair += res.primal.w.at(k, i, a) * grad.at(k, i, a);
        lhs += g.ht() * vol * (res.primal.m.at(k, i) * dt.at(k, i) + pair);
      }
    double rhs = 0.0;
    for (std::size_t i = 0; i < g.slice_size(); ++i)
      rhs += vol * (res.primal.m.at(g.nt() - 1, i) * data.phi_T[i] - data.m0[i] * res.dual.phi.at(0, i));
    rep.energy_identity_residual = std::abs(lhs - rhs);
  }

  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace weakmfg

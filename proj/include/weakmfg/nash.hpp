#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
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

struct GameConfig {
  int N = 64;
  double delta = 0.4;
  double sigma = 0.4;
  std::uint64_t seed = 0;
  int ode_steps = 4;
  int sample_players = 16;
};

class GameConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void validate_game(const GameConfig& cfg, const SpaceTimeGrid& g) {
  if (cfg.N < 2) throw GameConfigError("game: N must be at least 2, got " + std::to_string(cfg.N));
  if (!(cfg.delta >= 2 * g.hx()) || !(cfg.sigma >= 2 * g.hx()))
    throw GameConfigError("game: delta and sigma must be at least 2 h_x = " + std::to_string(2 * g.hx()));
  if (cfg.ode_steps < 1) throw GameConfigError("game: ode_steps must be positive");
  if (cfg.sample_players < 1 || cfg.sample_players > cfg.N)
    throw GameConfigError("game: sample_players must lie in [1, N]");
}

/// C (1 - |z|^2)^3 on the unit ball, normalized to unit mass.
inline double bump_kernel(const Point& z, int d) {
  const double s = z[0] * z[0] + (d == 2 ? z[1] * z[1] : 0.0);
  if (s >= 1.0) return 0.0;
  const double c = d == 1 ? 35.0 / 32.0 : 4.0 / std::numbers::pi;
  const double u = 1.0 - s;
  return c * u * u * u;
}

/// delta^{-d} xi(z / delta) summed over the 3 nearest lattice images per axis.
inline double periodic_kernel(const Point& x, const Point& y, double width, int d) {
  Point base{torus_delta(x[0], y[0]), d == 2 ? torus_delta(x[1], y[1]) : 0.0};
  const double scale = d == 1 ? 1.0 / width : 1.0 / (width * width);
  double total = 0.0;
  for (int a = -1; a <= 1; ++a) {
    for (int b = (d == 2 ? -1 : 0); b <= (d == 2 ? 1 : 0); ++b) {
      const Point z{(base[0] + a) / width, (base[1] + b) / width};
      total += bump_kernel(z, d);
    }
  }
  return total * scale;
}

/// Uniform lattice used for the sigma-convolution; spacing <= min(delta, sigma)/8.
inline int quadrature_resolution(double delta, double sigma, int nx) {
  return std::max(nx, static_cast<int>(std::ceil(8.0 / std::min(delta, sigma))));
}

namespace detail {

inline Point lattice_point(std::size_t l, int M, int d) {
  if (d == 1) return {(static_cast<double>(l) + 0.5) / M, 0.0};
  return {(static_cast<double>(l / M) + 0.5) / M, (static_cast<double>(l % M) + 0.5) / M};
}

/// Lattice indices within `radius` of x (periodic, no duplicates for radius < 1/2).
inline void lattice_ball(const Point& x, double radius, int M, int d, std::vector<std::size_t>& out) {
  out.clear();
  const int R = static_cast<int>(std::ceil(radius * M)) + 1;
  const int span = std::min(2 * R + 1, M);
  auto axis_indices = [&](double c) {
    std::vector<int> idx;
    const int center = static_cast<int>(std::floor(wrap_unit(c) * M));
    for (int o = 0; o < span; ++o) idx.push_back((((center - span / 2 + o) % M) + M) % M);
    return idx;
  };
  const auto ix = axis_indices(x[0]);
  if (d == 1) {
    for (int i : ix) out.push_back(static_cast<std::size_t>(i));
    return;
  }
  const auto iy = axis_indices(x[1]);
  for (int i : ix)
    for (int j : iy) out.push_back(static_cast<std::size_t>(i) * M + j);
}

}  // namespace detail

/// f^{delta,sigma}(x, (1/|positions|) sum delta_{x^j}): the sigma-kernel
/// convolution is a normalized lattice quadrature, the delta-smoothing is an
/// exact kernel sum.
inline double mollified_coupling(const Point& x, const std::vector<Point>& positions, double delta, double sigma,
                                 const PowerCoupling& coup, int d, int M = 0) {
  if (positions.empty()) throw std::invalid_argument("mollified_coupling: no positions");
  if (!(delta > 0.0) || !(sigma > 0.0)) throw GameConfigError("mollified_coupling: widths must be positive");
  if (M <= 0) M = quadrature_resolution(delta, sigma, coup.weight.n);
  std::vector<std::size_t> ball;
  detail::lattice_ball(x, sigma, M, d, ball);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t l : ball) {
    const Point y = detail::lattice_point(l, M, d);
    const double ks = periodic_kernel(x, y, sigma, d);
    if (ks == 0.0) continue;
    double rho = 0.0;
    for (const Point& p : positions) rho += periodic_kernel(y, p, delta, d);
    rho /= static_cast<double>(positions.size());
    num += ks * coup.f_local(coup.c_at(y), rho);
    den += ks;
  }
  return den > 0.0 ? num / den : 0.0;
}

/// Cached delta-smoothed empirical density of all players on the quadrature
/// lattice at one time; evaluates the coupling seen by one player with its
/// own atom removed.
class CouplingSlice {
 public:
  CouplingSlice() = default;
  CouplingSlice(const std::vector<Point>& all, double delta, double sigma, const PowerCoupling& coup, int d, int M)
      : delta_(delta), sigma_(sigma), d_(d), M_(M), n_(all.size()), coup_(&coup) {
    const std::size_t size = d == 1 ? static_cast<std::size_t>(M) : static_cast<std::size_t>(M) * M;
    rho_.assign(size, 0.0);
    weight_.assign(size, 0.0);
    for (std::size_t l = 0; l < size; ++l) {
      const Point y = detail::lattice_point(l, M, d);
      double s = 0.0;
      for (const Point& p : all) s += periodic_kernel(y, p, delta, d);
      rho_[l] = s;
      weight_[l] = coup.c_at(y);
    }
  }

  /// Coupling at x for the measure of all players except the one whose atom
  /// sits at `own`.
  double value(const Point& x, const Point& own, std::vector<std::size_t>& scratch) const {
    detail::lattice_ball(x, sigma_, M_, d_, scratch);
    double num = 0.0;
    double den = 0.0;
    const double inv = 1.0 / static_cast<double>(n_ - 1);
    for (std::size_t l : scratch) {
      const Point y = detail::lattice_point(l, M_, d_);
      const double ks = periodic_kernel(x, y, sigma_, d_);
      if (ks == 0.0) continue;
      const double rho = std::max(0.0, rho_[l] - periodic_kernel(y, own, delta_, d_)) * inv;
      num += ks * coup_->f_local(weight_[l], rho);
      den += ks;
    }
    return den > 0.0 ? num / den : 0.0;
  }

 private:
  double delta_ = 0.0;
  double sigma_ = 0.0;
  int d_ = 1;
  int M_ = 1;
  std::size_t n_ = 0;
  const PowerCoupling* coup_ = nullptr;
  std::vector<double> rho_;
  std::vector<double> weight_;
};

/// Paths sampled at the fine time nodes t_s = s h_t / ode_steps.
struct TrajectoryEnsemble {
  int d = 1;
  int ode_steps = 1;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::vector<Point> x0;
  /// paths[j][s]
  std::vector<std::vector<Point>> paths;
  /// velocities[j][s] on segment [t_s, t_{s+1}]
  std::vector<std::vector<Point>> velocities;

  std::size_t steps() const { return paths.empty() ? 0 : paths.front().size() - 1; }
};

inline Point wrap_point(Point p, int d) {
  p[0] = wrap_unit(p[0]);
  p[1] = d == 2 ? wrap_unit(p[1]) : 0.0;
  return p;
}

inline std::mt19937_64 player_rng(std::uint64_t seed, std::size_t player) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(player), static_cast<std::uint32_t>(player >> 32)};
  return std::mt19937_64(seq);
}

/// Draw from the cell-constant density m0 (cell i centered at node i) by
/// inverse CDF; in 2-D the first coordinate uses the marginal and the second
/// the conditional row.
inline Point sample_initial(const ProblemData& data, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = data.nx;
  const double h = 1.0 / n;
  auto pick = [&](const std::vector<double>& w) {
    double total = 0.0;
    for (double v : w) total += std::max(0.0, v);
    const double target = u(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += std::max(0.0, w[i]);
      if (target < acc) return i;
    }
    return w.size() - 1;
  };
  if (data.d == 1) {
    const std::size_t i = pick(data.m0.values);
    return {wrap_unit((static_cast<double>(i) - 0.5 + u(rng)) * h), 0.0};
  }
  std::vector<double> marginal(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) marginal[i] += std::max(0.0, data.m0[static_cast<std::size_t>(i) * n + j]);
  const std::size_t i = pick(marginal);
  std::vector<double> row(data.m0.values.begin() + static_cast<std::ptrdiff_t>(i * n),
                          data.m0.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
  const std::size_t j = pick(row);
  const double x = (static_cast<double>(i) - 0.5 + u(rng)) * h;
  const double y = (static_cast<double>(j) - 0.5 + u(rng)) * h;
  return {wrap_unit(x), wrap_unit(y)};
}

namespace detail {

/// Node samples of w^eps / m^eps for each time interval, one SpatialField per
/// axis. Density on interval k is the average of the levels it connects.
inline std::vector<std::array<SpatialField, 2>> mollified_velocity(const ProblemData& data, const PrimalState& primal,
                                                                   double eps) {
  const SpaceTimeGrid g = data.grid();
  const int d = g.dim();
  const std::size_t n = g.slice_size();
  const double vol = g.cell_volume();
  const int R = static_cast<int>(std::ceil(eps / g.hx()));
  std::vector<std::array<SpatialField, 2>> out(static_cast<std::size_t>(g.nt()));
  default_executor().for_blocks(static_cast<std::size_t>(g.nt()), [&](std::size_t kb) {
    const int k = static_cast<int>(kb);
    std::array<SpatialField, 2>& v = out[kb];
    for (int a = 0; a < 2; ++a) v[a] = SpatialField(d, g.nx(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const Point x = g.node_position(i);
      const auto mi = g.multi(i);
      double me = 0.0;
      std::array<double, 2> we{0.0, 0.0};
      for (int ox = -R; ox <= R; ++ox) {
        for (int oy = (d == 2 ? -R : 0); oy <= (d == 2 ? R : 0); ++oy) {
          const std::size_t j = g.flat(mi[0] + ox, mi[1] + oy);
          const double prev = k == 0 ? data.m0[j] : primal.m.at(k - 1, j);
          const double mid = 0.5 * (prev + primal.m.at(k, j));
          me += periodic_kernel(x, g.node_position(j), eps, d) * mid * vol;
          for (int a = 0; a < d; ++a)
            we[a] += periodic_kernel(x, g.face_position(j, a), eps, d) * primal.w.at(k, j, a) * vol;
        }
      }
      for (int a = 0; a < d; ++a) v[a][i] = me > 1e-12 ? we[a] / me : 0.0;
    }
  });
  return out;
}

template <class Velocity>
std::vector<Point> integrate_path(const Point& start, const SpaceTimeGrid& g, int substeps, Velocity&& velocity) {
  const double dt = g.ht() / substeps;
  std::vector<Point> path;
  path.reserve(static_cast<std::size_t>(g.nt()) * substeps + 1);
  Point x = start;
  path.push_back(x);
  for (int k = 0; k < g.nt(); ++k) {
    for (int s = 0; s < substeps; ++s) {
      const Point v1 = velocity(k, x);
      Point mid = x;
      for (int a = 0; a < g.dim(); ++a) mid[a] += 0.5 * dt * v1[a];
      mid = wrap_point(mid, g.dim());
      const Point v2 = velocity(k, mid);
      for (int a = 0; a < g.dim(); ++a) x[a] += dt * v2[a];
      x = wrap_point(x, g.dim());
      path.push_back(x);
    }
  }
  return path;
}

inline std::vector<Point> path_velocities(const std::vector<Point>& path, double dt, int d) {
  std::vector<Point> v(path.size() - 1, Point{0.0, 0.0});
  for (std::size_t s = 0; s + 1 < path.size(); ++s)
    for (int a = 0; a < d; ++a) v[s][a] = torus_delta(path[s + 1][a], path[s][a]) / dt;
  return v;
}

inline Point lerp_torus(const Point& a, const Point& b, double t, int d) {
  Point out = a;
  for (int k = 0; k < d; ++k) out[k] = a[k] + t * torus_delta(b[k], a[k]);
  return wrap_point(out, d);
}

}  // namespace detail

/// Equilibrium paths: x0 drawn from m0 per player stream, then the mollified
/// flow of the solution integrated by explicit midpoint.
inline TrajectoryEnsemble sample_equilibrium_trajectories(const ProblemData& data, const PrimalState& primal,
                                                          const GameConfig& cfg) {
  const SpaceTimeGrid g = data.grid();
  validate_game(cfg, g);
  const int d = g.dim();
  TrajectoryEnsemble ens;
  ens.d = d;
  ens.ode_steps = cfg.ode_steps;
  ens.dt = g.ht() / cfg.ode_steps;
  ens.seed = cfg.seed;
  const double eps = std::max(cfg.delta, 2 * g.hx());
  const auto field = detail::mollified_velocity(data, primal, eps);
  const std::size_t N = static_cast<std::size_t>(cfg.N);
  ens.x0.resize(N);
  ens.paths.resize(N);
  ens.velocities.resize(N);
  default_executor().for_blocks(N, [&](std::size_t j) {
    auto rng = player_rng(cfg.seed, j);
    ens.x0[j] = sample_initial(data, rng);
    ens.paths[j] = detail::integrate_path(ens.x0[j], g, cfg.ode_steps, [&](int k, const Point& x) {
      Point v{0.0, 0.0};
      for (int a = 0; a < d; ++a) v[a] = field[static_cast<std::size_t>(k)][a].interpolate(x);
      return v;
    });
    ens.velocities[j] = detail::path_velocities(ens.paths[j], ens.dt, d);
  });
  return ens;
}

/// Coupling slices at every fine time node plus one per time-cell midpoint.
struct CouplingCache {
  std::vector<CouplingSlice> nodes;
  std::vector<CouplingSlice> cells;
};

inline CouplingCache build_coupling_cache(const TrajectoryEnsemble& ens, const ProblemData& data,
                                          const GameConfig& cfg) {
  const SpaceTimeGrid g = data.grid();
  const int M = quadrature_resolution(cfg.delta, cfg.sigma, g.nx());
  const std::size_t S = ens.steps();
  CouplingCache cache;
  cache.nodes.resize(S + 1);
  cache.cells.resize(static_cast<std::size_t>(g.nt()));
  default_executor().for_blocks(S + 1 + cache.cells.size(), [&](std::size_t b) {
    std::vector<Point> pos(ens.paths.size());
    if (b <= S) {
      for (std::size_t j = 0; j < pos.size(); ++j) pos[j] = ens.paths[j][b];
      cache.nodes[b] = CouplingSlice(pos, cfg.delta, cfg.sigma, data.coupling, g.dim(), M);
    } else {
      const std::size_t k = b - S - 1;
      const double fine = (static_cast<double>(k) + 0.5) * ens.ode_steps;
      const std::size_t s0 = static_cast<std::size_t>(std::floor(fine));
      const double frac = fine - static_cast<double>(s0);
      for (std::size_t j = 0; j < pos.size(); ++j)
        pos[j] = frac == 0.0 ? ens.paths[j][s0] : detail::lerp_torus(ens.paths[j][s0], ens.paths[j][s0 + 1], frac, g.dim());
      cache.cells[k] = CouplingSlice(pos, cfg.delta, cfg.sigma, data.coupling, g.dim(), M);
    }
  });
  return cache;
}

/// J_i for an arbitrary path of player i against the frozen others: kinetic
/// part per segment at the segment midpoint, potential and coupling by the
/// trapezoid rule on the fine nodes, plus the terminal cost.
inline double path_cost(std::size_t i, const std::vector<Point>& path, const TrajectoryEnsemble& ens,
                        const CouplingCache& cache, const ProblemData& data) {
  const int d = ens.d;
  const double rc = data.hamiltonian.r_conj();
  const auto vel = detail::path_velocities(path, ens.dt, d);
  std::vector<std::size_t> scratch;
  double total = 0.0;
  auto running = [&](std::size_t s) {
    const Point& x = path[s];
    return data.hamiltonian.ell_at(x) + cache.nodes[s].value(x, ens.paths[i][s], scratch);
  };
  double prev = running(0);
  for (std::size_t s = 0; s + 1 < path.size(); ++s) {
    const double cur = running(s + 1);
    total += ens.dt * (std::pow(norm2(std::span<const double>(vel[s].data(), static_cast<std::size_t>(d))), rc) / rc +
                       0.5 * (prev + cur));
    prev = cur;
  }
  return total + data.phi_T.interpolate(path.back());
}

inline double player_cost(std::size_t i, const TrajectoryEnsemble& ens, const CouplingCache& cache,
                          const ProblemData& data) {
  return path_cost(i, ens.paths[i], ens, cache, data);
}

struct BestResponse {
  std::vector<Point> path;
  double cost = 0.0;
};

/// Backward HJ with right-hand side f^{delta,sigma}(x, others) on the solution
/// grid, then the feedback flow -D_pH(D phi) from the player's start.
inline BestResponse best_response(std::size_t i, const TrajectoryEnsemble& ens, const CouplingCache& cache,
                                  const ProblemData& data) {
  const SpaceTimeGrid g = data.grid();
  const std::size_t n = g.slice_size();
  const int d = g.dim();
  Field alpha(g, TimeLoc::cell, SpaceLoc::cell);
  std::vector<std::size_t> scratch;
  for (int k = 0; k < g.nt(); ++k) {
    const double fine = (k + 0.5) * ens.ode_steps;
    const std::size_t s0 = static_cast<std::size_t>(std::floor(fine));
    const double frac = fine - static_cast<double>(s0);
    const Point own = frac == 0.0 ? ens.paths[i][s0] : detail::lerp_torus(ens.paths[i][s0], ens.paths[i][s0 + 1], frac, d);
    for (std::size_t x = 0; x < n; ++x)
      alpha.at(k, x) = cache.cells[static_cast<std::size_t>(k)].value(g.node_position(x), own, scratch);
  }
  const Field phi = maximal_subsolution(alpha, data);

  const NeighborTable nb(g);
  std::vector<std::array<SpatialField, 2>> feedback(static_cast<std::size_t>(g.nt()));
  const double r = data.hamiltonian.r;
  for (int k = 0; k < g.nt(); ++k) {
    auto& fb = feedback[static_cast<std::size_t>(k)];
    for (int a = 0; a < 2; ++a) fb[a] = SpatialField(d, g.nx(), 0.0);
    const auto sl = phi.slice(k);
    for (std::size_t x = 0; x < n; ++x) {
      const SmallVec b = upwind_gradient(sl, nb, x, d, g.hx());
      const SmallVec act = active_part(b, GradientLayout::upwind);
      const double rho = norm2(act);
      const double s = rho > 0.0 ? std::pow(rho, r - 2.0) : 0.0;
      for (int a = 0; a < d; ++a) fb[a][x] = -s * (act[2 * a] + act[2 * a + 1]);
    }
  }
  BestResponse br;
  br.path = detail::integrate_path(ens.x0[i], g, ens.ode_steps, [&](int k, const Point& x) {
    Point v{0.0, 0.0};
    for (int a = 0; a < d; ++a) v[a] = feedback[static_cast<std::size_t>(k)][a].interpolate(x);
    return v;
  });
  br.cost = path_cost(i, br.path, ens, cache, data);
  return br;
}

struct PlayerRow {
  std::size_t index = 0;
  Point x0{0.0, 0.0};
  double cost = 0.0;
  double best_response_cost = 0.0;
  double gain = 0.0;
};

struct NashReport {
  double epsilon_hat = 0.0;
  double mean_cost = 0.0;
  /// sum h^d phi(0) m0.
  double value = 0.0;
  std::vector<PlayerRow> players;
  /// (t, W1 between the ensemble slice and m(t)) at the time nodes.
  std::vector<std::pair<double, double>> wasserstein;
  /// value - (terminal + ensemble running cost + sum f(m) m).
  double energy_defect = 0.0;
  bool lipschitz_warning = false;
};

/// W1 on the circle between an empirical sample and a cell-constant density
/// (cell i centered at node i): min_c int |F - G - c|, evaluated exactly on the
/// piecewise-linear difference of the two CDFs.
inline double circle_w1(std::vector<double> samples, std::span<const double> density) {
  const std::size_t n = density.size();
  if (n == 0 || samples.empty()) throw std::invalid_argument("circle_w1: empty input");
  const double h = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (double v : density) total += std::max(0.0, v);
  // Shift by h/2 so that cell i is [i h, (i+1) h).
  for (double& s : samples) s = wrap_unit(s + 0.5 * h);
  std::sort(samples.begin(), samples.end());
  struct Segment {
    double length, d0, d1;
  };
  std::vector<Segment> segs;
  segs.reserve(n + samples.size());
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  std::size_t next = 0;
  double G = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double slope = std::max(0.0, density[i]) / (total * h);
    const double right = static_cast<double>(i + 1) * h;
    double x = static_cast<double>(i) * h;
    while (true) {
      while (next < samples.size() && samples[next] <= x) ++next;
      const double stop = next < samples.size() ? std::min(samples[next], right) : right;
      const double F = static_cast<double>(next) * inv_n;
      const double g1 = G + slope * (stop - x);
      if (stop > x) segs.push_back({stop - x, F - G, F - g1});
      G = g1;
      x = stop;
      if (x >= right) break;
    }
  }
  auto below = [&](double c) {
    double m = 0.0;
    for (const auto& s : segs) {
      if (s.d0 == s.d1) {
        m += s.d0 < c ? s.length : 0.0;
        continue;
      }
      const double t = std::clamp((c - s.d0) / (s.d1 - s.d0), 0.0, 1.0);
      m += s.length * (s.d1 > s.d0 ? t : 1.0 - t);
    }
    return m;
  };
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : segs) {
    lo = std::min({lo, s.d0, s.d1});
    hi = std::max({hi, s.d0, s.d1});
  }
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (below(mid) < 0.5) lo = mid;
    else hi = mid;
  }
  const double c = 0.5 * (lo + hi);
  double w = 0.0;
  for (const auto& s : segs) {
    const double a = s.d0 - c;
    const double b = s.d1 - c;
    if (a * b >= 0.0) w += s.length * 0.5 * (std::abs(a) + std::abs(b));
    else w += s.length * (a * a + b * b) / (2.0 * (std::abs(a) + std::abs(b)));
  }
  return w;
}

/// Per-axis mean of circle W1 for marginals; exact circle W1 in 1-D.
inline double ensemble_w1(const std::vector<Point>& pos, std::span<const double> density, int d, int nx) {
  if (d == 1) {
    std::vector<double> s(pos.size());
    for (std::size_t j = 0; j < pos.size(); ++j) s[j] = pos[j][0];
    return circle_w1(std::move(s), density);
  }
  double total = 0.0;
  for (int a = 0; a < 2; ++a) {
    std::vector<double> marg(static_cast<std::size_t>(nx), 0.0);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nx; ++j) marg[a == 0 ? i : j] += density[static_cast<std::size_t>(i) * nx + j];
    std::vector<double> s(pos.size());
    for (std::size_t j = 0; j < pos.size(); ++j) s[j] = pos[j][a];
    total += circle_w1(std::move(s), marg);
  }
  return 0.5 * total;
}

/// Costs of all players, best responses of the first sample_players, the
/// gap estimate, Wasserstein series and the energy audit.
inline NashReport nash_gap(const TrajectoryEnsemble& ens, const ProblemData& data, const PrimalState& primal,
                           const DualState& dual, const GameConfig& cfg) {
  const SpaceTimeGrid g = data.grid();
  validate_game(cfg, g);
  const CouplingCache cache = build_coupling_cache(ens, data, cfg);
  const std::size_t N = ens.paths.size();
  NashReport rep;
  rep.lipschitz_warning = data.coupling.q != 2.0;
  std::vector<double> costs(N, 0.0);
  default_executor().for_blocks(N, [&](std::size_t j) { costs[j] = player_cost(j, ens, cache, data); });
  double sum = 0.0;
  for (double c : costs) sum += c;
  rep.mean_cost = sum / static_cast<double>(N);

  const std::size_t S = static_cast<std::size_t>(cfg.sample_players);
  rep.players.resize(S);
  default_executor().for_blocks(S, [&](std::size_t j) {
    const BestResponse br = best_response(j, ens, cache, data);
    PlayerRow& row = rep.players[j];
    row.index = j;
    row.x0 = ens.x0[j];
    row.cost = costs[j];
    row.best_response_cost = br.cost;
    row.gain = costs[j] - br.cost;
  });
  double eps = 0.0;
  for (const auto& row : rep.players) eps = std::max(eps, row.gain);
  rep.epsilon_hat = eps;

  const std::size_t n = g.slice_size();
  const double vol = g.cell_volume();
  for (std::size_t i = 0; i < n; ++i) rep.value += vol * dual.phi.at(0, i) * data.m0[i];

  for (int k = 0; k <= g.nt(); ++k) {
    const std::size_t s = static_cast<std::size_t>(k) * ens.ode_steps;
    std::vector<Point> pos(N);
    for (std::size_t j = 0; j < N; ++j) pos[j] = ens.paths[j][s];
    const auto density = k == 0 ? std::span<const double>(data.m0.values) : primal.m.slice(k - 1);
    rep.wasserstein.emplace_back(g.time_node(k), ensemble_w1(pos, density, g.dim(), g.nx()));
  }

  // Energy audit: kinetic and potential terms from the ensemble, coupling and
  // terminal terms from the grid density.
  const double rc = data.hamiltonian.r_conj();
  double running = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    for (std::size_t s = 0; s < ens.velocities[j].size(); ++s) {
      const Point mid = detail::lerp_torus(ens.paths[j][s], ens.paths[j][s + 1], 0.5, g.dim());
      running += ens.dt * (std::pow(norm2(std::span<const double>(ens.velocities[j][s].data(),
                                                                 static_cast<std::size_t>(g.dim()))),
                                    rc) / rc +
                           data.hamiltonian.ell_at(mid));
    }
  }
  running /= static_cast<double>(N);
  double coupling = 0.0;
  for (std::size_t c = 0; c < primal.m.values.size(); ++c) {
    const double m = std::max(0.0, primal.m.values[c]);
    coupling += g.ht() * vol * data.coupling.f_local(data.coupling.weight[c % n], m) * m;
  }
  double terminal = 0.0;
  for (std::size_t i = 0; i < n; ++i) terminal += vol * data.phi_T[i] * primal.m.at(g.nt() - 1, i);
  rep.energy_defect = rep.value - (terminal + running + coupling);
  return rep;
}

}  // namespace weakmfg

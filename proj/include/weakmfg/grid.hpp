#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace weakmfg {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point of the flat torus; only the first `d` coordinates are used.
using Point = std::array<double, 2>;

inline double wrap_unit(double x) {
  x -= std::floor(x);
  return x >= 1.0 ? 0.0 : x;
}

/// Signed shortest displacement from b to a on the unit circle, in [-1/2, 1/2).
inline double torus_delta(double a, double b) {
  double z = a - b;
  z -= std::floor(z + 0.5);
  return z;
}

/// Periodic discretization of [0,T] x T^d. Spatial nodes sit at i*h_x along
/// each axis, time nodes at k*h_t. Spatial "cells" are the dual control
/// volumes centred on the nodes, so node and cell arrays share an index;
/// faces sit half a step forward along their axis.
class SpaceTimeGrid {
 public:
  SpaceTimeGrid() = default;
  SpaceTimeGrid(int d, int nx, int nt, double horizon) : d_(d), nx_(nx), nt_(nt), T_(horizon) {
    if (d < 1 || d > 2) throw GridError("dimension must be 1 or 2, got " + std::to_string(d));
    if (nx < 4) throw GridError("n_x must be >= 4, got " + std::to_string(nx));
    if (nt < 2) throw GridError("n_t must be >= 2, got " + std::to_string(nt));
    if (!(horizon > 0.0)) throw GridError("horizon T must be positive");
    slice_ = d == 1 ? static_cast<std::size_t>(nx) : static_cast<std::size_t>(nx) * nx;
  }

  int dim() const { return d_; }
  int nx() const { return nx_; }
  int nt() const { return nt_; }
  double horizon() const { return T_; }
  double hx() const { return 1.0 / nx_; }
  double ht() const { return T_ / nt_; }
  double cell_volume() const { return d_ == 1 ? hx() : hx() * hx(); }
  std::size_t slice_size() const { return slice_; }

  /// Flat index of the node with multi-index (i, j); j ignored for d = 1.
  std::size_t flat(int i, int j = 0) const {
    i = ((i % nx_) + nx_) % nx_;
    if (d_ == 1) return static_cast<std::size_t>(i);
    j = ((j % nx_) + nx_) % nx_;
    return static_cast<std::size_t>(i) * nx_ + static_cast<std::size_t>(j);
  }

  std::array<int, 2> multi(std::size_t flat_index) const {
    if (d_ == 1) return {static_cast<int>(flat_index), 0};
    return {static_cast<int>(flat_index / nx_), static_cast<int>(flat_index % nx_)};
  }

  /// Periodic neighbour of node `i` one step along `axis` (shift = +1 or -1).
  std::size_t neighbor(std::size_t i, int axis, int shift) const {
    auto mi = multi(i);
    mi[axis] += shift;
    return flat(mi[0], mi[1]);
  }

  Point node_position(std::size_t i) const {
    const auto mi = multi(i);
    return {mi[0] * hx(), d_ == 2 ? mi[1] * hx() : 0.0};
  }

  Point face_position(std::size_t i, int axis) const {
    Point p = node_position(i);
    p[axis] += 0.5 * hx();
    return p;
  }

  double time_node(int k) const { return k * ht(); }
  double time_cell(int k) const { return (k + 0.5) * ht(); }

  bool operator==(const SpaceTimeGrid& o) const {
    return d_ == o.d_ && nx_ == o.nx_ && nt_ == o.nt_ && T_ == o.T_;
  }

 private:
  int d_ = 1;
  int nx_ = 4;
  int nt_ = 2;
  double T_ = 1.0;
  std::size_t slice_ = 4;
};

/// Per-axis neighbour lookup tables; avoids recomputing multi-indices in
/// the inner loops of the solver.
struct NeighborTable {
  std::array<std::vector<std::size_t>, 2> plus;
  std::array<std::vector<std::size_t>, 2> minus;

  explicit NeighborTable(const SpaceTimeGrid& g) {
    for (int a = 0; a < g.dim(); ++a) {
      plus[a].resize(g.slice_size());
      minus[a].resize(g.slice_size());
      for (std::size_t i = 0; i < g.slice_size(); ++i) {
        plus[a][i] = g.neighbor(i, a, +1);
        minus[a][i] = g.neighbor(i, a, -1);
      }
    }
  }
};

enum class TimeLoc { node, cell };
enum class SpaceLoc { node, cell, face };

inline const char* to_string(SpaceLoc s) {
  switch (s) {
    case SpaceLoc::node: return "node";
    case SpaceLoc::cell: return "cell";
    case SpaceLoc::face: return "face";
  }
  return "?";
}

/// Space-time array with staggering metadata. Layout is
/// values[(slice * components + component) * slice_size + node].
struct Field {
  SpaceTimeGrid grid;
  TimeLoc time = TimeLoc::node;
  SpaceLoc space = SpaceLoc::node;
  std::vector<double> values;

  Field() = default;
  Field(const SpaceTimeGrid& g, TimeLoc t, SpaceLoc s, double fill = 0.0)
      : grid(g), time(t), space(s), values(g.slice_size() * slices_for(g, t) * components_for(g, s), fill) {}

  static int slices_for(const SpaceTimeGrid& g, TimeLoc t) { return t == TimeLoc::node ? g.nt() + 1 : g.nt(); }
  static int components_for(const SpaceTimeGrid& g, SpaceLoc s) { return s == SpaceLoc::face ? g.dim() : 1; }

  int slices() const { return slices_for(grid, time); }
  int components() const { return components_for(grid, space); }

  double& at(int k, std::size_t i, int comp = 0) {
    return values[(static_cast<std::size_t>(k) * components() + comp) * grid.slice_size() + i];
  }
  double at(int k, std::size_t i, int comp = 0) const {
    return values[(static_cast<std::size_t>(k) * components() + comp) * grid.slice_size() + i];
  }

  std::span<double> slice(int k, int comp = 0) {
    return {values.data() + (static_cast<std::size_t>(k) * components() + comp) * grid.slice_size(), grid.slice_size()};
  }
  std::span<const double> slice(int k, int comp = 0) const {
    return {values.data() + (static_cast<std::size_t>(k) * components() + comp) * grid.slice_size(), grid.slice_size()};
  }

  bool same_layout(const Field& o) const {
    return grid == o.grid && time == o.time && space == o.space && values.size() == o.values.size();
  }
};

inline void require_space(const Field& f, SpaceLoc expected, const char* op) {
  if (f.space != expected) {
    throw GridError(std::string(op) + ": expected " + to_string(expected) + "-staggered input, got " +
                    to_string(f.space));
  }
}

/// Periodic forward difference per axis: node field -> face field.
inline Field spatial_gradient(const Field& phi) {
  require_space(phi, SpaceLoc::node, "spatial_gradient");
  const auto& g = phi.grid;
  Field out(g, phi.time, SpaceLoc::face);
  const double inv_h = 1.0 / g.hx();
  const NeighborTable nb(g);
  for (int k = 0; k < phi.slices(); ++k) {
    const auto s = phi.slice(k);
    for (int a = 0; a < g.dim(); ++a) {
      auto o = out.slice(k, a);
      for (std::size_t i = 0; i < g.slice_size(); ++i) o[i] = (s[nb.plus[a][i]] - s[i]) * inv_h;
    }
  }
  return out;
}

/// Negative adjoint of spatial_gradient: face field -> cell field.
inline Field divergence(const Field& w) {
  require_space(w, SpaceLoc::face, "divergence");
  const auto& g = w.grid;
  Field out(g, w.time, SpaceLoc::cell);
  const double inv_h = 1.0 / g.hx();
  const NeighborTable nb(g);
  for (int k = 0; k < w.slices(); ++k) {
    auto o = out.slice(k);
    for (int a = 0; a < g.dim(); ++a) {
      const auto s = w.slice(k, a);
      for (std::size_t i = 0; i < g.slice_size(); ++i) o[i] += (s[i] - s[nb.minus[a][i]]) * inv_h;
    }
  }
  return out;
}

/// (phi_{k+1} - phi_k) / h_t: time-node field -> time-cell field.
inline Field time_derivative(const Field& phi) {
  if (phi.time != TimeLoc::node) throw GridError("time_derivative: expected time-node input");
  const auto& g = phi.grid;
  Field out(g, TimeLoc::cell, phi.space);
  const double inv = 1.0 / g.ht();
  for (int k = 0; k < g.nt(); ++k) {
    for (int c = 0; c < phi.components(); ++c) {
      const auto a = phi.slice(k, c);
      const auto b = phi.slice(k + 1, c);
      auto o = out.slice(k, c);
      for (std::size_t i = 0; i < g.slice_size(); ++i) o[i] = (b[i] - a[i]) * inv;
    }
  }
  return out;
}

/// Euclidean adjoint of time_derivative: sum_k psi_k (d_t phi)_k equals
/// sum_j phi_j (adjoint psi)_j for all time-node fields phi. Entry j = 0
/// carries -psi_0 / h_t and entry n_t carries psi_{n_t-1} / h_t; these are the
/// boundary terms of summation by parts.
inline Field time_derivative_adjoint(const Field& psi) {
  if (psi.time != TimeLoc::cell) throw GridError("time_derivative_adjoint: expected time-cell input");
  const auto& g = psi.grid;
  Field out(g, TimeLoc::node, psi.space);
  const double inv = 1.0 / g.ht();
  for (int j = 0; j <= g.nt(); ++j) {
    for (int c = 0; c < psi.components(); ++c) {
      auto o = out.slice(j, c);
      for (std::size_t i = 0; i < g.slice_size(); ++i) {
        double v = 0.0;
        if (j >= 1) v += psi.at(j - 1, i, c);
        if (j <= g.nt() - 1) v -= psi.at(j, i, c);
        o[i] = v * inv;
      }
    }
  }
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw GridError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Sum of m * h_x^d over one spatial slice.
inline double mass(const Field& m, int k) {
  double s = 0.0;
  for (double v : m.slice(k)) s += v;
  return s * m.grid.cell_volume();
}

/// Euclidean projection of a slice onto {m >= 0, sum m * vol = 1}, computed
/// by the sort-and-threshold rule.
inline std::vector<double> project_simplex(std::span<const double> slice, double cell_volume) {
  const double radius = 1.0 / cell_volume;
  std::vector<double> sorted(slice.begin(), slice.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double shift = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - radius) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) shift = candidate;
  }
  std::vector<double> out(slice.size());
  for (std::size_t i = 0; i < slice.size(); ++i) out[i] = std::max(0.0, slice[i] - shift);
  return out;
}

/// Purely spatial periodic samples on the grid nodes (potential, weights,
/// initial density, terminal cost).
struct SpatialField {
  int d = 1;
  int n = 4;
  std::vector<double> values;

  SpatialField() = default;
  SpatialField(int dim, int nodes, double fill = 0.0)
      : d(dim), n(nodes), values(dim == 1 ? nodes : static_cast<std::size_t>(nodes) * nodes, fill) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  /// Periodic multilinear interpolation between node samples.
  double interpolate(const Point& x) const {
    const double h = 1.0 / n;
    auto locate = [&](double c, int& i0, double& frac) {
      const double s = wrap_unit(c) / h;
      i0 = static_cast<int>(std::floor(s));
      frac = s - i0;
      i0 %= n;
    };
    int i0 = 0;
    double fx = 0.0;
    locate(x[0], i0, fx);
    const int i1 = (i0 + 1) % n;
    if (d == 1) return (1.0 - fx) * values[i0] + fx * values[i1];
    int j0 = 0;
    double fy = 0.0;
    locate(x[1], j0, fy);
    const int j1 = (j0 + 1) % n;
    auto v = [&](int i, int j) { return values[static_cast<std::size_t>(i) * n + j]; };
    return (1.0 - fx) * ((1.0 - fy) * v(i0, j0) + fy * v(i0, j1)) + fx * ((1.0 - fy) * v(i1, j0) + fy * v(i1, j1));
  }

  /// Periodic gradient of the interpolant at x (piecewise constant per cell).
  std::array<double, 2> interpolate_gradient(const Point& x) const {
    const double eps = 1e-7;
    std::array<double, 2> g{0.0, 0.0};
    for (int a = 0; a < d; ++a) {
      Point xp = x;
      Point xm = x;
      xp[a] += eps;
      xm[a] -= eps;
      g[a] = (interpolate(xp) - interpolate(xm)) / (2 * eps);
    }
    return g;
  }

  double min() const { return *std::min_element(values.begin(), values.end()); }
  double max() const { return *std::max_element(values.begin(), values.end()); }
  double sup_abs() const {
    double s = 0.0;
    for (double v : values) s = std::max(s, std::abs(v));
    return s;
  }
};

}  // namespace weakmfg

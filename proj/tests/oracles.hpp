// Test-side reference computations, written against the problem definition
// rather than the library internals.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include "weakmfg/model.hpp"

namespace oracle {

/// Minimizer of a convex function on [lo, hi] by repeated grid refinement.
inline double zoom_min_1d(const std::function<double(double)>& f, double lo, double hi, int points = 201,
                          int rounds = 60) {
  const double lo0 = lo;
  const double hi0 = hi;
  double best = lo;
  for (int r = 0; r < rounds; ++r) {
    const double step = (hi - lo) / (points - 1);
    double fb = std::numeric_limits<double>::infinity();
    for (int j = 0; j < points; ++j) {
      const double x = lo + j * step;
      const double v = f(x);
      if (v < fb) {
        fb = v;
        best = x;
      }
    }
    lo = std::max(lo0, best - 2 * step);
    hi = std::min(hi0, best + 2 * step);
  }
  return best;
}

/// Same in two variables on a box.
inline std::array<double, 2> zoom_min_2d(const std::function<double(double, double)>& f, std::array<double, 2> lo,
                                         std::array<double, 2> hi, int points = 41, int rounds = 60) {
  const auto lo0 = lo;
  const auto hi0 = hi;
  std::array<double, 2> best = lo;
  for (int r = 0; r < rounds; ++r) {
    const double sx = (hi[0] - lo[0]) / (points - 1);
    const double sy = (hi[1] - lo[1]) / (points - 1);
    double fb = std::numeric_limits<double>::infinity();
    for (int i = 0; i < points; ++i) {
      for (int j = 0; j < points; ++j) {
        const double x = lo[0] + i * sx;
        const double y = lo[1] + j * sy;
        const double v = f(x, y);
        if (v < fb) {
          fb = v;
          best = {x, y};
        }
      }
    }
    lo = {std::max(lo0[0], best[0] - 2 * sx), std::max(lo0[1], best[1] - 2 * sy)};
    hi = {std::min(hi0[0], best[0] + 2 * sx), std::min(hi0[1], best[1] + 2 * sy)};
  }
  return best;
}

/// sup_p xi p - g(p) over [lo, hi] for concave objective.
inline double fenchel_1d(const std::function<double(double)>& g, double xi, double lo, double hi) {
  const double p = zoom_min_1d([&](double s) { return g(s) - xi * s; }, lo, hi);
  return xi * p - g(p);
}

struct PrimalSolution {
  Eigen::VectorXd m;  // m[k*n + i], end-of-interval density
  Eigen::VectorXd w;  // w[k*n + i], flux through the face right of node i
  double value = 0.0;
  long iterations = 0;
};

/// Direct minimization of the discrete primal for d = 1, r = q = 2:
///   sum ht h [ c m^2/2 + l m + (W+_{i+1/2}^2 + W-_{i-1/2}^2) / (2 m) ] + h sum phi_T m_{nt-1}
/// subject to (m_k - m_{k-1})/ht + (W_{i+1/2} - W_{i-1/2})/h = 0, m_{-1} = m0.
/// Each face flux is charged to its upwind cell. Accelerated projected
/// gradient with exact projection onto the affine constraint.
inline PrimalSolution primal_oracle(const weakmfg::ProblemData& p, double tol = 1e-14, long max_iters = 4000000) {
  const int n = p.nx;
  const int nt = p.nt;
  const double h = 1.0 / n;
  const double ht = p.T / nt;
  const int nm = n * nt;
  const int dim = 2 * nm;
  auto wrap = [&](int i) { return (i % n + n) % n; };

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nm, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nm);
  for (int k = 0; k < nt; ++k) {
    for (int i = 0; i < n; ++i) {
      const int row = k * n + i;
      A(row, k * n + i) += 1.0 / ht;
      if (k > 0) A(row, (k - 1) * n + i) -= 1.0 / ht;
      else rhs(row) += p.m0[i] / ht;
      A(row, nm + k * n + i) += 1.0 / h;
      A(row, nm + k * n + wrap(i - 1)) -= 1.0 / h;
    }
  }
  const Eigen::MatrixXd gram = A * A.transpose();
  const auto solver = gram.completeOrthogonalDecomposition();
  auto project = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return x - A.transpose() * solver.solve(A * x - rhs);
  };

  auto value = [&](const Eigen::VectorXd& x) {
    double s = 0.0;
    for (int k = 0; k < nt; ++k) {
      for (int i = 0; i < n; ++i) {
        const double m = x(k * n + i);
        if (m <= 0.0) return std::numeric_limits<double>::infinity();
        const double wp = std::max(x(nm + k * n + i), 0.0);
        const double wm = std::min(x(nm + k * n + wrap(i - 1)), 0.0);
        s += ht * h * (p.coupling.weight[i] * m * m / 2 + p.hamiltonian.potential[i] * m + (wp * wp + wm * wm) / (2 * m));
      }
    }
    for (int i = 0; i < n; ++i) s += h * p.phi_T[i] * x((nt - 1) * n + i);
    return s;
  };
  auto gradient = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    for (int k = 0; k < nt; ++k) {
      for (int i = 0; i < n; ++i) {
        const double m = x(k * n + i);
        const double wp = std::max(x(nm + k * n + i), 0.0);
        const double wm = std::min(x(nm + k * n + wrap(i - 1)), 0.0);
        g(k * n + i) = ht * h * (p.coupling.weight[i] * m + p.hamiltonian.potential[i] - (wp * wp + wm * wm) / (2 * m * m));
        const double w = x(nm + k * n + i);
        const double upwind = w > 0 ? m : x(k * n + wrap(i + 1));
        g(nm + k * n + i) = ht * h * w / upwind;
      }
    }
    for (int i = 0; i < n; ++i) g((nt - 1) * n + i) += h * p.phi_T[i];
    return g;
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  for (int k = 0; k < nt; ++k)
    for (int i = 0; i < n; ++i) x(k * n + i) = p.m0[i];
  x = project(x);
  Eigen::VectorXd y = x;
  double t = 1.0;
  double step = 1.0;
  PrimalSolution out;
  long it = 0;
  for (; it < max_iters; ++it) {
    const Eigen::VectorXd gy = gradient(y);
    const double fy = value(y);
    Eigen::VectorXd next;
    // Backtracking on the quadratic upper bound.
    while (true) {
      next = project(y - step * gy);
      const Eigen::VectorXd d = next - y;
      const double fn = value(next);
      if (std::isfinite(fn) && fn <= fy + gy.dot(d) + d.squaredNorm() / (2 * step) + 1e-15 * std::abs(fy)) break;
      step *= 0.5;
    }
    const double tn = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
    Eigen::VectorXd mom = next + ((t - 1) / tn) * (next - x);
    // Restart when the objective goes up.
    if (value(next) > value(x)) {
      mom = next;
      t = 1.0;
    } else {
      t = tn;
    }
    const double change = (next - x).lpNorm<Eigen::Infinity>();
    x = next;
    y = mom;
    if (value(y) == std::numeric_limits<double>::infinity()) y = x;
    step *= 1.2;
    if (change < tol && it > 100) break;
  }
  out.m = x.head(nm);
  out.w = x.tail(nm);
  out.value = value(x);
  out.iterations = it;
  return out;
}

}  // namespace oracle

// grid.hpp
//
// Interior node grids over a domain, nodal fields with exterior closure, and
// local quadratic least-squares models (the discrete stand-in for smooth test
// functions).

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "nlb/geometry.hpp"

namespace nlb {

// ============================================================================
// Grid
// ============================================================================

/// Uniform grid of strictly interior nodes. Unknowns never sit on the
/// boundary; between the outermost nodes and the boundary, nodal fields are
/// extended by their nearest nodal value (keeps interpolation weights
/// nonnegative).
class Grid {
 public:
  /// n interior nodes per dimension. 2D grids keep the Cartesian nodes with
  /// d(x) >= 0.01 h (slivers closer to the boundary would produce unbounded
  /// cut-cell coefficients).
  static std::shared_ptr<const Grid> make(const Domain& domain, int n_per_dim) {
    if (n_per_dim < 4) throw std::invalid_argument("grid: need >= 4 nodes per dimension");
    auto g = std::make_shared<Grid>();
    g->dim_ = domain.dim();
    if (domain.dim() == 1) {
      double a = domain.interval_a(), b = domain.interval_b();
      g->h_ = (b - a) / (n_per_dim + 1);
      g->nx_ = n_per_dim;
      g->ny_ = 1;
      g->x0_ = a + g->h_;
      g->y0_ = 0.0;
      g->node_of_cell_.assign(n_per_dim, -1);
      for (int i = 0; i < n_per_dim; ++i) {
        g->node_of_cell_[i] = int(g->nodes_.size());
        g->nodes_.push_back({g->x0_ + i * g->h_, 0.0});
      }
    } else {
      Pt c = domain.center();
      double rx = domain.radius_x(), ry = domain.radius_y();
      double span = 2.0 * std::max(rx, ry);
      g->h_ = span / (n_per_dim + 1);
      g->nx_ = int(std::floor(2.0 * rx / g->h_)) + 1;
      g->ny_ = int(std::floor(2.0 * ry / g->h_)) + 1;
      g->x0_ = c.x - 0.5 * (g->nx_ - 1) * g->h_;
      g->y0_ = c.y - 0.5 * (g->ny_ - 1) * g->h_;
      g->node_of_cell_.assign(std::size_t(g->nx_) * g->ny_, -1);
      for (int iy = 0; iy < g->ny_; ++iy) {
        for (int ix = 0; ix < g->nx_; ++ix) {
          Pt p{g->x0_ + ix * g->h_, g->y0_ + iy * g->h_};
          if (domain.signed_distance(p) >= 0.01 * g->h_) {
            g->node_of_cell_[std::size_t(iy) * g->nx_ + ix] = int(g->nodes_.size());
            g->nodes_.push_back(p);
          }
        }
      }
      if (g->nodes_.size() < 4) throw std::invalid_argument("grid: domain under-resolved");
    }
    return g;
  }

  int dim() const { return dim_; }
  double h() const { return h_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Pt>& nodes() const { return nodes_; }
  Pt node(std::size_t i) const { return nodes_[i]; }

  int node_at(int ix, int iy) const {
    if (ix < 0 || ix >= nx_ || iy < 0 || iy >= ny_) return -1;
    return node_of_cell_[std::size_t(iy) * nx_ + ix];
  }

  void node_cell(std::size_t id, int& ix, int& iy) const {
    Pt p = nodes_[id];
    ix = int(std::lround((p.x - x0_) / h_));
    iy = int(std::lround((p.y - y0_) / h_));
  }

  /// Nearest interior node (expanding ring search in 2D).
  int nearest_node(Pt p) const {
    if (dim_ == 1) {
      int i = int(std::lround((p.x - x0_) / h_));
      return std::clamp(i, 0, nx_ - 1);
    }
    int cx = std::clamp(int(std::lround((p.x - x0_) / h_)), 0, nx_ - 1);
    int cy = std::clamp(int(std::lround((p.y - y0_) / h_)), 0, ny_ - 1);
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    int max_r = std::max(nx_, ny_);
    for (int r = 0; r <= max_r; ++r) {
      for (int iy = cy - r; iy <= cy + r; ++iy) {
        for (int ix = cx - r; ix <= cx + r; ++ix) {
          if (std::max(std::abs(ix - cx), std::abs(iy - cy)) != r) continue;
          int id = node_at(ix, iy);
          if (id < 0) continue;
          Pt q = nodes_[id];
          double d2 = dot(p - q, p - q);
          if (d2 < best_d2) { best_d2 = d2; best = id; }
        }
      }
      if (best >= 0 && r >= 1) break;  // one extra ring to be safe
    }
    if (best < 0) throw std::runtime_error("nearest_node: empty grid");
    return best;
  }

  struct InterpWeights {
    int ids[4] = {-1, -1, -1, -1};
    double w[4] = {0, 0, 0, 0};
    int count = 0;
  };

  /// Interpolation weights at a point of the closed domain: piecewise linear
  /// (1D) / bilinear (2D) between nodes, nearest-value extension toward the
  /// boundary. All weights nonnegative, summing to one.
  InterpWeights weights_at(Pt p) const {
    InterpWeights out;
    if (dim_ == 1) {
      double s = (p.x - x0_) / h_;
      if (s <= 0.0) { out.ids[0] = 0; out.w[0] = 1.0; out.count = 1; return out; }
      if (s >= nx_ - 1) { out.ids[0] = nx_ - 1; out.w[0] = 1.0; out.count = 1; return out; }
      int i = int(std::floor(s));
      double f = s - i;
      out.ids[0] = i; out.w[0] = 1.0 - f;
      out.ids[1] = i + 1; out.w[1] = f;
      out.count = 2;
      return out;
    }
    double fx = (p.x - x0_) / h_, fy = (p.y - y0_) / h_;
    int ix = std::clamp(int(std::floor(fx)), 0, nx_ - 2);
    int iy = std::clamp(int(std::floor(fy)), 0, ny_ - 2);
    double ax = std::clamp(fx - ix, 0.0, 1.0);
    double ay = std::clamp(fy - iy, 0.0, 1.0);
    const int cs[4][2] = {{ix, iy}, {ix + 1, iy}, {ix, iy + 1}, {ix + 1, iy + 1}};
    const double ws[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
    double tot = 0.0;
    for (int k = 0; k < 4; ++k) {
      int id = node_at(cs[k][0], cs[k][1]);
      if (id >= 0 && ws[k] > 0.0) {
        out.ids[out.count] = id;
        out.w[out.count] = ws[k];
        tot += ws[k];
        ++out.count;
      }
    }
    if (out.count == 0) {
      out.ids[0] = nearest_node(p);
      out.w[0] = 1.0;
      out.count = 1;
      return out;
    }
    for (int k = 0; k < out.count; ++k) out.w[k] /= tot;
    return out;
  }

  double interpolate(std::span<const double> values, Pt p) const {
    InterpWeights w = weights_at(p);
    double v = 0.0;
    for (int k = 0; k < w.count; ++k) v += w.w[k] * values[std::size_t(w.ids[k])];
    return v;
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }

  int dim_ = 1;
  double h_ = 0.0;
  int nx_ = 0, ny_ = 0;
  double x0_ = 0.0, y0_ = 0.0;
  std::vector<Pt> nodes_;
  std::vector<int> node_of_cell_;
};

// ============================================================================
// GridFunction
// ============================================================================

/// Nodal values on the interior grid plus a continuous exterior datum.
struct GridFunction {
  std::shared_ptr<const Grid> grid;
  std::vector<double> values;
  std::function<double(Pt)> exterior;  // phi on the complement of Omega
  double exterior_sup = 0.0;           // known sup-norm of phi

  double operator()(Pt p) const { return grid->interpolate(values, p); }
  double at(std::size_t i) const { return values[i]; }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

inline GridFunction make_grid_function(std::shared_ptr<const Grid> grid,
                                       std::function<double(Pt)> exterior,
                                       double exterior_sup) {
  GridFunction f;
  f.grid = std::move(grid);
  f.values.assign(f.grid->size(), 0.0);
  f.exterior = std::move(exterior);
  f.exterior_sup = exterior_sup;
  return f;
}

// ============================================================================
// Local quadratic model
// ============================================================================

/// Quadratic model around a base point: increments
/// q(x+z) - q(x) = g.z + z^T H z / 2.
struct QuadraticModel {
  Pt base;
  double value = 0.0;
  Pt grad{0.0, 0.0};
  double hxx = 0.0, hxy = 0.0, hyy = 0.0;

  double increment(Pt z) const {
    return grad.x * z.x + grad.y * z.y +
           0.5 * (hxx * z.x * z.x + 2.0 * hxy * z.x * z.y + hyy * z.y * z.y);
  }
};

/// Least-squares quadratic fit of nodal values around node i: the 5-node
/// window in 1D, the 13-node diamond (|di|+|dj| <= 2) in 2D. Windows shift or
/// grow near the boundary so the fit stays determined.
inline QuadraticModel fit_quadratic(const Grid& grid, std::span<const double> values,
                                    std::size_t node_id) {
  QuadraticModel q;
  q.base = grid.node(node_id);
  q.value = values[node_id];
  if (grid.dim() == 1) {
    int n = int(grid.size());
    int i = int(node_id);
    int lo = std::clamp(i - 2, 0, std::max(0, n - 5));
    int m = std::min(5, n - lo);
    if (m < 3) throw std::runtime_error("fit_quadratic: not enough nodes");
    Eigen::MatrixXd A(m, 3);
    Eigen::VectorXd rhs(m);
    for (int k = 0; k < m; ++k) {
      double z = grid.node(lo + k).x - q.base.x;
      A(k, 0) = 1.0;
      A(k, 1) = z;
      A(k, 2) = 0.5 * z * z;
      rhs(k) = values[std::size_t(lo + k)];
    }
    Eigen::Vector3d c = (A.transpose() * A).ldlt().solve(A.transpose() * rhs);
    q.grad = {c(1), 0.0};
    q.hxx = c(2);
    return q;
  }
  int cx, cy;
  grid.node_cell(node_id, cx, cy);
  std::vector<int> ids;
  for (int radius = 2; radius <= 4; ++radius) {
    ids.clear();
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (std::abs(dx) + std::abs(dy) <= radius) {
          int id = grid.node_at(cx + dx, cy + dy);
          if (id >= 0) ids.push_back(id);
        }
    if (ids.size() >= 8) break;
  }
  if (ids.size() < 6) throw std::runtime_error("fit_quadratic: not enough neighbors");
  Eigen::MatrixXd A(ids.size(), 6);
  Eigen::VectorXd rhs(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    Pt z = grid.node(std::size_t(ids[k])) - q.base;
    A(k, 0) = 1.0;
    A(k, 1) = z.x;
    A(k, 2) = z.y;
    A(k, 3) = 0.5 * z.x * z.x;
    A(k, 4) = z.x * z.y;
    A(k, 5) = 0.5 * z.y * z.y;
    rhs(k) = values[std::size_t(ids[k])];
  }
  Eigen::VectorXd c = (A.transpose() * A).ldlt().solve(A.transpose() * rhs);
  q.grad = {c(1), c(2)};
  q.hxx = c(3);
  q.hxy = c(4);
  q.hyy = c(5);
  return q;
}

}  // namespace nlb

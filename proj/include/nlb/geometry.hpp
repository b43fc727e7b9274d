// geometry.hpp
//
// Bounded C2 domains with exact signed distance: interval, disk, ellipse.
// Boundary sampling, drift-based boundary classification (inward / outward /
// mixed arcs), and nontangential interior cone sequences toward boundary
// points.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlb {

// ============================================================================
// Small point/vector type (used for both 1D and 2D; 1D keeps y == 0)
// ============================================================================

struct Pt {
  double x = 0.0;
  double y = 0.0;
};

inline Pt operator+(Pt a, Pt b) { return {a.x + b.x, a.y + b.y}; }
inline Pt operator-(Pt a, Pt b) { return {a.x - b.x, a.y - b.y}; }
inline Pt operator*(double s, Pt a) { return {s * a.x, s * a.y}; }
inline double dot(Pt a, Pt b) { return a.x * b.x + a.y * b.y; }
inline double norm(Pt a) { return std::sqrt(dot(a, a)); }

enum class ShapeKind { Interval, Disk, Ellipse };

// ============================================================================
// Domain
// ============================================================================

/// Bounded domain with computable C2 signed distance. d > 0 inside,
/// d < 0 outside, d = 0 on the boundary; |Dd| = 1 within the smoothness
/// band |d| < delta0.
class Domain {
 public:
  static Domain interval(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("interval: need a < b");
    Domain d;
    d.dim_ = 1;
    d.kind_ = ShapeKind::Interval;
    d.a_ = a;
    d.b_ = b;
    d.delta0_ = 0.5 * (b - a);
    return d;
  }

  static Domain disk(Pt center, double radius) {
    if (!(radius > 0)) throw std::invalid_argument("disk: radius must be > 0");
    Domain d;
    d.dim_ = 2;
    d.kind_ = ShapeKind::Disk;
    d.center_ = center;
    d.rx_ = d.ry_ = radius;
    d.delta0_ = radius;
    return d;
  }

  static Domain ellipse(Pt center, double rx, double ry) {
    if (!(rx > 0) || !(ry > 0))
      throw std::invalid_argument("ellipse: semi-axes must be > 0");
    Domain d;
    d.dim_ = 2;
    d.kind_ = ShapeKind::Ellipse;
    d.center_ = center;
    d.rx_ = rx;
    d.ry_ = ry;
    // smallest radius of curvature bounds the band where d stays smooth
    d.delta0_ = std::min(rx, ry) * std::min(rx, ry) / std::max(rx, ry);
    return d;
  }

  int dim() const { return dim_; }
  ShapeKind kind() const { return kind_; }
  double delta0() const { return delta0_; }
  double interval_a() const { return a_; }
  double interval_b() const { return b_; }
  Pt center() const { return center_; }
  double radius_x() const { return rx_; }
  double radius_y() const { return ry_; }

  double diameter() const {
    switch (kind_) {
      case ShapeKind::Interval: return b_ - a_;
      case ShapeKind::Disk: return 2.0 * rx_;
      case ShapeKind::Ellipse: return 2.0 * std::max(rx_, ry_);
    }
    return 0.0;
  }

  /// Exact signed distance to the boundary.
  double signed_distance(Pt p) const {
    switch (kind_) {
      case ShapeKind::Interval:
        return std::min(p.x - a_, b_ - p.x);
      case ShapeKind::Disk:
        return rx_ - norm(p - center_);
      case ShapeKind::Ellipse: {
        Pt q = project_boundary(p);
        double dist = norm(p - q);
        return is_inside_level(p) ? dist : -dist;
      }
    }
    return 0.0;
  }

  bool contains(Pt p) const { return signed_distance(p) > 0.0; }

  /// Gradient of the signed distance (unit inward normal direction).
  /// Only valid in the smoothness band |d| < delta0.
  Pt distance_gradient(Pt p) const {
    double d = signed_distance(p);
    if (!(std::abs(d) < delta0_))
      throw std::domain_error("distance_gradient: point outside smoothness band");
    switch (kind_) {
      case ShapeKind::Interval:
        return {(p.x - a_ < b_ - p.x) ? 1.0 : -1.0, 0.0};
      case ShapeKind::Disk: {
        Pt r = p - center_;
        double n = norm(r);
        return {-r.x / n, -r.y / n};
      }
      case ShapeKind::Ellipse: {
        Pt q = project_boundary(p);
        double dist = norm(p - q);
        if (dist > 1e-12 * std::max(rx_, ry_)) {
          double inv = 1.0 / dist;
          Pt g = inv * (p - q);
          return is_inside_level(p) ? g : Pt{-g.x, -g.y};
        }
        // on the boundary: inward normal from the level-set gradient
        Pt rel = p - center_;
        Pt n{rel.x / (rx_ * rx_), rel.y / (ry_ * ry_)};
        double nn = norm(n);
        return {-n.x / nn, -n.y / nn};
      }
    }
    return {0, 0};
  }

  /// Hessian of the signed distance, valid in the smoothness band.
  /// Returned as (hxx, hxy, hyy); 1D uses hxx only (== 0).
  void distance_hessian(Pt p, double& hxx, double& hxy, double& hyy) const {
    switch (kind_) {
      case ShapeKind::Interval:
        hxx = hxy = hyy = 0.0;
        return;
      case ShapeKind::Disk: {
        Pt r = p - center_;
        double n = norm(r);
        double nx = r.x / n, ny = r.y / n;
        // D^2 (R - |p-c|) = -(I - n n^T)/|p-c|
        hxx = -(1.0 - nx * nx) / n;
        hxy = -(-nx * ny) / n;
        hyy = -(1.0 - ny * ny) / n;
        return;
      }
      case ShapeKind::Ellipse: {
        // central differences of the exact gradient
        double e = 1e-6 * std::min(rx_, ry_);
        Pt gxp = distance_gradient({p.x + e, p.y});
        Pt gxm = distance_gradient({p.x - e, p.y});
        Pt gyp = distance_gradient({p.x, p.y + e});
        Pt gym = distance_gradient({p.x, p.y - e});
        hxx = (gxp.x - gxm.x) / (2 * e);
        hyy = (gyp.y - gym.y) / (2 * e);
        hxy = 0.5 * ((gxp.y - gxm.y) / (2 * e) + (gyp.x - gym.x) / (2 * e));
        return;
      }
    }
  }

  /// Nearest boundary point.
  Pt project_boundary(Pt p) const {
    switch (kind_) {
      case ShapeKind::Interval:
        return {(p.x - a_ < b_ - p.x) ? a_ : b_, 0.0};
      case ShapeKind::Disk: {
        Pt r = p - center_;
        double n = norm(r);
        if (n < 1e-14 * rx_) return {center_.x + rx_, center_.y};
        return center_ + (rx_ / n) * r;
      }
      case ShapeKind::Ellipse:
        return ellipse_project(p);
    }
    return p;
  }

  /// First boundary crossing from an interior point x along direction dir:
  /// returns t > 0 with x + t*dir on the boundary. Supported shapes are
  /// convex, so the crossing is unique.
  double ray_exit(Pt x, Pt dir) const {
    switch (kind_) {
      case ShapeKind::Interval: {
        if (dir.x > 0) return (b_ - x.x) / dir.x;
        if (dir.x < 0) return (a_ - x.x) / dir.x;
        throw std::invalid_argument("ray_exit: zero direction");
      }
      case ShapeKind::Disk: {
        Pt p = x - center_;
        double dd = dot(dir, dir);
        double pd = dot(p, dir);
        double disc = pd * pd + dd * (rx_ * rx_ - dot(p, p));
        return (-pd + std::sqrt(std::max(disc, 0.0))) / dd;
      }
      case ShapeKind::Ellipse: {
        Pt p = x - center_;
        Pt P{p.x / rx_, p.y / ry_};
        Pt D{dir.x / rx_, dir.y / ry_};
        double dd = dot(D, D);
        double pd = dot(P, D);
        double disc = pd * pd + dd * (1.0 - dot(P, P));
        return (-pd + std::sqrt(std::max(disc, 0.0))) / dd;
      }
    }
    return 0.0;
  }

  /// Number of connected components of the boundary (2 for the interval).
  int boundary_components() const { return kind_ == ShapeKind::Interval ? 2 : 1; }

  /// Uniform boundary sampling. The interval boundary is the two endpoints,
  /// regardless of the requested count; closed curves get n equispaced
  /// parameter values.
  std::vector<Pt> sample_boundary(std::size_t n) const {
    std::vector<Pt> out;
    if (kind_ == ShapeKind::Interval) {
      out.push_back({a_, 0.0});
      out.push_back({b_, 0.0});
      return out;
    }
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      double th = 2.0 * M_PI * double(i) / double(n);
      out.push_back({center_.x + rx_ * std::cos(th), center_.y + ry_ * std::sin(th)});
    }
    return out;
  }

  /// Component id of the i-th boundary sample (matches sample_boundary).
  int sample_component(std::size_t i) const {
    return kind_ == ShapeKind::Interval ? int(i) : 0;
  }

 private:
  bool is_inside_level(Pt p) const {
    Pt r = p - center_;
    double v = (r.x / rx_) * (r.x / rx_) + (r.y / ry_) * (r.y / ry_);
    return v < 1.0;
  }

  // Nearest point on the ellipse x^2/rx^2 + y^2/ry^2 = 1 (robust bisection on
  // the standard Lagrange parameter; evolute special cases on the axes).
  Pt ellipse_project(Pt p) const {
    Pt rel = p - center_;
    double px = std::abs(rel.x), py = std::abs(rel.y);
    double sx = rel.x < 0 ? -1.0 : 1.0, sy = rel.y < 0 ? -1.0 : 1.0;
    double a = rx_, b = ry_;
    double tinyx = 1e-14 * a, tinyy = 1e-14 * b;
    double qx, qy;
    if (px < tinyx && py < tinyy) {
      // domain center: nearest tip of the minor axis
      if (b <= a) { qx = 0.0; qy = b; } else { qx = a; qy = 0.0; }
    } else if (py < tinyy) {
      // on the major (x) axis
      double cut = (a * a - b * b) / a;
      if (a > b && px < cut) {
        qx = a * a * px / (a * a - b * b);
        double s = 1.0 - (qx / a) * (qx / a);
        qy = b * std::sqrt(std::max(s, 0.0));
      } else {
        qx = a; qy = 0.0;
      }
    } else if (px < tinyx) {
      double cut = (b * b - a * a) / b;
      if (b > a && py < cut) {
        qy = b * b * py / (b * b - a * a);
        double s = 1.0 - (qy / b) * (qy / b);
        qx = a * std::sqrt(std::max(s, 0.0));
      } else {
        qx = 0.0; qy = b;
      }
    } else {
      // f(t) = (a px/(t+a^2))^2 + (b py/(t+b^2))^2 - 1, decreasing on
      // t > -min(a,b)^2 with a unique root
      double tlo = -std::min(a * a, b * b);
      double thi = std::max(a * px, b * py) + std::max(a * a, b * b);
      auto f = [&](double t) {
        double u = a * px / (t + a * a);
        double v = b * py / (t + b * b);
        return u * u + v * v - 1.0;
      };
      while (f(thi) > 0) thi = 2 * thi + std::max(a * a, b * b);
      double t0 = tlo, t1 = thi;
      for (int it = 0; it < 200; ++it) {
        double tm = 0.5 * (t0 + t1);
        if (tm == t0 || tm == t1) break;
        if (f(tm) > 0) t0 = tm; else t1 = tm;
      }
      double t = 0.5 * (t0 + t1);
      qx = a * a * px / (t + a * a);
      qy = b * b * py / (t + b * b);
    }
    return {center_.x + sx * qx, center_.y + sy * qy};
  }

  int dim_ = 1;
  ShapeKind kind_ = ShapeKind::Interval;
  double a_ = 0.0, b_ = 1.0;   // interval
  Pt center_{0.0, 0.0};        // disk / ellipse
  double rx_ = 1.0, ry_ = 1.0; // semi-axes (disk: rx == ry)
  double delta0_ = 0.5;
};

// ============================================================================
// Boundary classification: Gamma_in / Gamma_out / Gamma
// ============================================================================

enum class BoundaryLabel { In, Out, Mixed };

inline const char* to_string(BoundaryLabel l) {
  switch (l) {
    case BoundaryLabel::In: return "In";
    case BoundaryLabel::Out: return "Out";
    case BoundaryLabel::Mixed: return "Mixed";
  }
  return "?";
}

struct BoundarySample {
  std::size_t index = 0;
  Pt point;
  int component = 0;
  BoundaryLabel label = BoundaryLabel::Out;
  double min_product = 0.0;  // min over controls of b_beta . Dd
  double max_product = 0.0;  // max over controls of b_beta . Dd
};

/// Maximal run of equally-labeled samples, contiguous along the boundary
/// parameter (circular for closed curves).
struct BoundaryArc {
  BoundaryLabel label;
  int component = 0;
  std::size_t first = 0;  // sample index where the run starts
  std::size_t count = 0;
};

struct BoundaryClassification {
  std::vector<BoundarySample> samples;
  std::vector<BoundaryArc> arcs;
  double tau_b = 1e-8;
  bool circular = false;  // samples wrap around (disk / ellipse)

  bool has_label(BoundaryLabel l) const {
    for (const auto& s : samples)
      if (s.label == l) return true;
    return false;
  }
};

/// Classify boundary samples by the sign of b_beta . Dd against tau_b:
/// In when the product exceeds tau_b for every control, Out when it is
/// <= tau_b for every control, Mixed otherwise.
///
/// Problem must expose num_controls() and drift(Pt, k) -> Pt.
template <class Problem>
BoundaryClassification classify_boundary(const Domain& domain, const Problem& problem,
                                         std::size_t n_samples, double tau_b = 1e-8) {
  if (problem.num_controls() == 0)
    throw std::invalid_argument("classify_boundary: empty control set");
  if (n_samples < 4) throw std::invalid_argument("classify_boundary: n_samples >= 4");

  BoundaryClassification cls;
  cls.tau_b = tau_b;
  cls.circular = (domain.kind() != ShapeKind::Interval);
  auto pts = domain.sample_boundary(n_samples);
  cls.samples.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Pt nrm = domain.distance_gradient(pts[i]);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < problem.num_controls(); ++k) {
      double prod = dot(problem.drift(pts[i], k), nrm);
      lo = std::min(lo, prod);
      hi = std::max(hi, prod);
    }
    BoundarySample s;
    s.index = i;
    s.point = pts[i];
    s.component = domain.sample_component(i);
    s.min_product = lo;
    s.max_product = hi;
    if (lo > tau_b)
      s.label = BoundaryLabel::In;
    else if (hi <= tau_b)
      s.label = BoundaryLabel::Out;
    else
      s.label = BoundaryLabel::Mixed;
    cls.samples.push_back(s);
  }

  // contiguous same-label runs, per component, with circular wrap merge
  std::size_t n = cls.samples.size();
  std::size_t i = 0;
  while (i < n) {
    BoundaryArc arc;
    arc.label = cls.samples[i].label;
    arc.component = cls.samples[i].component;
    arc.first = i;
    arc.count = 1;
    std::size_t j = i + 1;
    while (j < n && cls.samples[j].label == arc.label &&
           cls.samples[j].component == arc.component) {
      ++arc.count;
      ++j;
    }
    cls.arcs.push_back(arc);
    i = j;
  }
  if (cls.circular && cls.arcs.size() > 1) {
    // merge last run into first if the labels match across the wrap
    auto& first = cls.arcs.front();
    auto& last = cls.arcs.back();
    if (first.label == last.label && first.component == last.component) {
      first.first = last.first;
      first.count += last.count;
      cls.arcs.pop_back();
    }
  }
  return cls;
}

struct AssumptionHReport {
  bool holds = true;
  std::string detail;
};

/// Sampled analog of assumption (H): every label present must occupy a single
/// contiguous arc of each boundary component (fragmented labels fail).
inline AssumptionHReport check_assumption_H(const BoundaryClassification& cls) {
  AssumptionHReport rep;
  for (BoundaryLabel l : {BoundaryLabel::In, BoundaryLabel::Out, BoundaryLabel::Mixed}) {
    // count arcs per component carrying this label
    std::vector<int> per_component;
    for (const auto& arc : cls.arcs) {
      if (arc.label != l) continue;
      if (int(per_component.size()) <= arc.component)
        per_component.resize(arc.component + 1, 0);
      per_component[arc.component]++;
    }
    for (std::size_t c = 0; c < per_component.size(); ++c) {
      if (per_component[c] > 1) {
        rep.holds = false;
        rep.detail += std::string(to_string(l)) + " fragments into " +
                      std::to_string(per_component[c]) + " arcs on component " +
                      std::to_string(c) + "; ";
      }
    }
  }
  if (rep.holds) rep.detail = "each label forms a single contiguous arc";
  return rep;
}

// ============================================================================
// Interior cones
// ============================================================================

/// Nontangential cone at a boundary vertex: generated points x_k approach the
/// vertex with d(x_k) >= aperture * |x_k - vertex|.
struct ConeSpec {
  Pt vertex;
  double aperture = 0.5;  // C in (0, 1]
  Pt direction{1.0, 0.0}; // unit vector, into the domain
  double ratio = 0.5;     // geometric step factor in (0, 1)
};

/// Default cone at a boundary point: normal direction, aperture 1/2.
inline ConeSpec normal_cone(const Domain& domain, Pt vertex, double aperture = 0.5,
                            double ratio = 0.5) {
  ConeSpec c;
  c.vertex = vertex;
  c.aperture = aperture;
  c.direction = domain.distance_gradient(vertex);
  c.ratio = ratio;
  return c;
}

/// Geometric point sequence inside the cone. Throws when the direction is too
/// tangent for the requested aperture.
inline std::vector<Pt> cone_points(const Domain& domain, const ConeSpec& spec,
                                   std::size_t k) {
  if (!(spec.ratio > 0.0 && spec.ratio < 1.0))
    throw std::invalid_argument("cone_points: ratio must be in (0,1)");
  if (std::abs(domain.signed_distance(spec.vertex)) > 1e-9 * domain.diameter())
    throw std::invalid_argument("cone_points: vertex not on the boundary");
  Pt nrm = domain.distance_gradient(spec.vertex);
  double along = dot(spec.direction, nrm);
  if (along < spec.aperture)
    throw std::domain_error("cone_points: infeasible cone (direction too tangent)");

  // largest starting step within the smoothness band that satisfies the
  // aperture bound; shrinks geometrically from there
  double t0 = 0.5 * domain.delta0();
  auto ok = [&](double t) {
    Pt p = spec.vertex + t * spec.direction;
    return domain.signed_distance(p) >= spec.aperture * t;
  };
  int guard = 0;
  while (!ok(t0) && guard++ < 80) t0 *= 0.5;
  if (guard >= 80) throw std::domain_error("cone_points: no feasible starting step");

  std::vector<Pt> pts;
  pts.reserve(k);
  double t = t0;
  for (std::size_t j = 0; j < k; ++j) {
    Pt p = spec.vertex + t * spec.direction;
    if (!(domain.signed_distance(p) >= spec.aperture * norm(p - spec.vertex) * (1.0 - 1e-12)))
      throw std::domain_error("cone_points: aperture violated along the sequence");
    pts.push_back(p);
    t *= spec.ratio;
  }
  return pts;
}

}  // namespace nlb

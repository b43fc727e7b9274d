// config.hpp
//
// Experiment configuration: one JSON document with explicit keys describing
// the domain, kernel, control set, exterior datum, grid, quadrature, solver,
// and Monte Carlo blocks. Parsing normalizes defaults so that
// parse -> serialize -> parse is the identity; named presets ship the
// benchmark problems.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlb/csv.hpp"
#include "nlb/geometry.hpp"
#include "nlb/hamiltonian.hpp"
#include "nlb/kernel.hpp"
#include "nlb/montecarlo.hpp"

namespace nlb {

using nlohmann::json;

struct McConfigBlock;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (j.contains(key)) return j.at(key).get<T>();
  return fallback;
}

}  // namespace detail

// ============================================================================
// Builtin scalar fields (exterior data and costs)
// ============================================================================

/// Exterior datum from its config block; bounded and continuous on the
/// complement of every supported domain.
inline std::function<double(Pt)> make_phi(const json& j, double* sup_out) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    double v = j.at("value").get<double>();
    if (sup_out) *sup_out = std::abs(v);
    return [v](Pt) { return v; };
  }
  if (kind == "ramp") {
    double x0 = j.at("x0").get<double>(), x1 = j.at("x1").get<double>();
    double l = j.at("left").get<double>(), r = j.at("right").get<double>();
    detail::require(x1 > x0, "phi.ramp: x1 > x0");
    if (sup_out) *sup_out = std::max(std::abs(l), std::abs(r));
    return [=](Pt p) {
      double t = std::clamp((p.x - x0) / (x1 - x0), 0.0, 1.0);
      return l + (r - l) * t;
    };
  }
  if (kind == "runge") {
    double amp = j.at("amp").get<double>();
    if (sup_out) *sup_out = std::abs(amp);
    return [amp](Pt p) { return amp / (1.0 + dot(p, p)); };
  }
  if (kind == "gauss") {
    double amp = j.at("amp").get<double>();
    double w = j.at("width").get<double>();
    double cx = detail::get_or(j, "cx", 0.0), cy = detail::get_or(j, "cy", 0.0);
    detail::require(w > 0, "phi.gauss: width > 0");
    if (sup_out) *sup_out = std::abs(amp);
    return [=](Pt p) {
      Pt r{p.x - cx, p.y - cy};
      return amp * std::exp(-dot(r, r) / (w * w));
    };
  }
  if (kind == "affine_clamped") {
    double a = j.at("a").get<double>();
    double gx = detail::get_or(j, "gx", 0.0), gy = detail::get_or(j, "gy", 0.0);
    double lo = j.at("lo").get<double>(), hi = j.at("hi").get<double>();
    detail::require(hi >= lo, "phi.affine_clamped: hi >= lo");
    if (sup_out) *sup_out = std::max(std::abs(lo), std::abs(hi));
    return [=](Pt p) { return std::clamp(a + gx * p.x + gy * p.y, lo, hi); };
  }
  if (kind == "table") {
    auto xs = j.at("xs").get<std::vector<double>>();
    auto vals = j.at("vals").get<std::vector<double>>();
    detail::require(xs.size() == vals.size() && xs.size() >= 2, "phi.table: need matched xs/vals");
    double s = 0;
    for (double v : vals) s = std::max(s, std::abs(v));
    if (sup_out) *sup_out = s;
    return [xs, vals](Pt p) {
      if (p.x <= xs.front()) return vals.front();
      if (p.x >= xs.back()) return vals.back();
      auto it = std::upper_bound(xs.begin(), xs.end(), p.x);
      std::size_t i = std::size_t(it - xs.begin()) - 1;
      double t = (p.x - xs[i]) / (xs[i + 1] - xs[i]);
      return vals[i] + t * (vals[i + 1] - vals[i]);
    };
  }
  throw ConfigError("phi: unknown kind '" + kind + "'");
}

/// Polynomial cost from coefficients: 1D [c0, c1, c2, ...] in x;
/// 2D [c0, cx, cy, cxx, cxy, cyy].
inline std::function<double(Pt)> make_cost(const std::vector<double>& coeffs, int dim) {
  if (dim == 1) {
    return [coeffs](Pt p) {
      double v = 0.0, m = 1.0;
      for (double c : coeffs) {
        v += c * m;
        m *= p.x;
      }
      return v;
    };
  }
  return [coeffs](Pt p) {
    const double basis[6] = {1.0, p.x, p.y, p.x * p.x, p.x * p.y, p.y * p.y};
    double v = 0.0;
    for (std::size_t i = 0; i < coeffs.size() && i < 6; ++i) v += coeffs[i] * basis[i];
    return v;
  };
}

/// Affine drift b(x) = A x + c from row-major A.
inline std::function<Pt(Pt)> make_drift(const std::vector<double>& A,
                                        const std::vector<double>& c, int dim) {
  if (dim == 1) {
    double a = A.empty() ? 0.0 : A[0];
    double c0 = c.empty() ? 0.0 : c[0];
    return [a, c0](Pt p) { return Pt{a * p.x + c0, 0.0}; };
  }
  double a11 = A.size() > 0 ? A[0] : 0.0, a12 = A.size() > 1 ? A[1] : 0.0;
  double a21 = A.size() > 2 ? A[2] : 0.0, a22 = A.size() > 3 ? A[3] : 0.0;
  double c1 = c.size() > 0 ? c[0] : 0.0, c2 = c.size() > 1 ? c[1] : 0.0;
  return [=](Pt p) {
    return Pt{a11 * p.x + a12 * p.y + c1, a21 * p.x + a22 * p.y + c2};
  };
}

// ============================================================================
// ExperimentConfig
// ============================================================================

class ExperimentConfig {
 public:
  static ExperimentConfig from_json(const json& raw) {
    ExperimentConfig c;
    c.j_ = raw;
    c.normalize();
    c.validate();
    return c;
  }

  static ExperimentConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json raw;
    try {
      in >> raw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return from_json(raw);
  }

  static ExperimentConfig preset(const std::string& name);
  static std::vector<std::string> preset_names() {
    return {"outward-1d", "inward-1d", "inward-1d-strong",
            "mixed-disk", "linear-validate", "two-control-1d"};
  }

  const json& to_json() const { return j_; }
  std::string dump() const { return j_.dump(2); }
  std::uint64_t hash() const { return fnv1a(j_.dump()); }

  /// Dotted-path override, e.g. set("grid.n", 512) or set("kernel.alpha", 0.3).
  void set_path(const std::string& dotted, const json& value) {
    json* cur = &j_;
    std::size_t pos = 0;
    while (true) {
      std::size_t dotp = dotted.find('.', pos);
      std::string key = dotted.substr(pos, dotp == std::string::npos ? dotp : dotp - pos);
      if (dotp == std::string::npos) {
        (*cur)[key] = value;
        break;
      }
      cur = &(*cur)[key];
      pos = dotp + 1;
    }
    normalize();
    validate();
  }

  // ---- builders --------------------------------------------------------

  Domain make_domain() const {
    const json& d = j_.at("domain");
    std::string kind = d.at("kind").get<std::string>();
    if (kind == "interval")
      return Domain::interval(d.at("a").get<double>(), d.at("b").get<double>());
    if (kind == "disk")
      return Domain::disk({d.at("cx").get<double>(), d.at("cy").get<double>()},
                          d.at("r").get<double>());
    if (kind == "ellipse")
      return Domain::ellipse({d.at("cx").get<double>(), d.at("cy").get<double>()},
                             d.at("rx").get<double>(), d.at("ry").get<double>());
    throw ConfigError("domain: unknown kind '" + kind + "'");
  }

  LevyKernel make_kernel() const {
    const json& k = j_.at("kernel");
    LevyKernel out;
    out.dim = make_domain().dim();
    out.alpha = k.at("alpha").get<double>();
    out.Lambda = k.at("Lambda").get<double>();
    out.c1 = k.at("c1").get<double>();
    out.c2 = k.at("c2").get<double>();
    const json& den = k.at("density");
    std::string kind = den.at("kind").get<std::string>();
    if (kind == "constant")
      out.density = constant_density(den.at("value").get<double>());
    else if (kind == "cutoff")
      out.density = cutoff_density(den.at("value").get<double>(), den.at("radius").get<double>());
    else if (kind == "skew")
      out.density = skew_density(den.at("right").get<double>(), den.at("left").get<double>());
    else if (kind == "radial_table") {
      auto rs = den.at("rs").get<std::vector<double>>();
      auto ks = den.at("ks").get<std::vector<double>>();
      detail::require(rs.size() == ks.size() && rs.size() >= 2, "density.radial_table");
      KernelDensity d;
      d.symmetric = true;
      d.eval = [rs, ks](Pt z) {
        double r = norm(z);
        if (r <= rs.front()) return ks.front();
        if (r >= rs.back()) return ks.back();
        auto it = std::upper_bound(rs.begin(), rs.end(), r);
        std::size_t i = std::size_t(it - rs.begin()) - 1;
        double t = (r - rs[i]) / (rs[i + 1] - rs[i]);
        return ks[i] + t * (ks[i + 1] - ks[i]);
      };
      out.density = d;
    } else {
      throw ConfigError("density: unknown kind '" + kind + "'");
    }
    return out;
  }

  ControlProblem make_problem() const {
    Domain dom = make_domain();
    ControlProblem pb;
    pb.lambda = j_.at("lambda").get<double>();
    double phi_sup = 0.0;
    pb.phi = make_phi(j_.at("phi"), &phi_sup);
    pb.phi_sup = phi_sup;
    const json& ctls = j_.at("controls");
    detail::require(ctls.is_array() && !ctls.empty(), "controls: nonempty array required");
    for (const auto& c : ctls) {
      Control ctl;
      ctl.label = detail::get_or<std::string>(c, "label",
                                              "c" + std::to_string(pb.controls.size()));
      auto A = detail::get_or(c, "A", std::vector<double>{});
      auto cc = detail::get_or(c, "c", std::vector<double>{});
      auto f = detail::get_or(c, "f", std::vector<double>{0.0});
      ctl.drift = make_drift(A, cc, dom.dim());
      ctl.cost = make_cost(f, dom.dim());
      pb.controls.push_back(std::move(ctl));
    }
    // sampled bounds over the closed domain box
    double fs = 0.0;
    double diam = dom.diameter();
    Pt ctr = dom.dim() == 1 ? Pt{0.5 * (dom.interval_a() + dom.interval_b()), 0.0}
                            : dom.center();
    for (int i = 0; i < 64; ++i) {
      for (int jy = 0; jy < (dom.dim() == 2 ? 64 : 1); ++jy) {
        Pt p{ctr.x + diam * (i / 63.0 - 0.5),
             dom.dim() == 2 ? ctr.y + diam * (jy / 63.0 - 0.5) : 0.0};
        if (dom.signed_distance(p) < 0) continue;
        for (const auto& ctl : pb.controls) fs = std::max(fs, std::abs(ctl.cost(p)));
      }
    }
    pb.f_sup = fs;
    pb.lipschitz_b = sampled_drift_lipschitz(pb, dom);
    return pb;
  }

  QuadratureSpec make_quadrature() const {
    const json& q = j_.at("quadrature");
    QuadratureSpec spec;
    spec.delta_factor = q.at("delta_factor").get<double>();
    spec.panels_per_decade = q.at("panels_per_decade").get<int>();
    spec.truncation_radius = q.at("truncation_radius").get<double>();
    spec.angular_nodes = q.at("angular_nodes").get<int>();
    std::string tm = q.at("tail_mode").get<std::string>();
    if (tm == "closed_form_constant_K")
      spec.tail_mode = QuadratureSpec::TailMode::ClosedFormConstantK;
    else if (tm == "upper_bound_Lambda")
      spec.tail_mode = QuadratureSpec::TailMode::UpperBoundLambda;
    else
      throw ConfigError("quadrature.tail_mode: unknown '" + tm + "'");
    return spec;
  }

  // ---- leaf accessors ----------------------------------------------------

  int grid_n() const { return j_.at("grid").at("n").get<int>(); }
  double solver_tol() const { return j_.at("solver").at("tol").get<double>(); }
  std::size_t solver_max_outer() const {
    return j_.at("solver").at("max_outer").get<std::size_t>();
  }
  std::vector<double> eps_sweep() const {
    return j_.at("solver").at("eps_sweep").get<std::vector<double>>();
  }
  std::string output_dir() const { return j_.at("output_dir").get<std::string>(); }
  std::uint64_t seed() const { return j_.at("seed").get<std::uint64_t>(); }

  std::size_t classify_samples() const {
    return j_.at("classify").at("n_samples").get<std::size_t>();
  }
  double classify_tau() const { return j_.at("classify").at("tau_b").get<double>(); }

  double barrier_sigma() const { return j_.at("barriers").at("sigma").get<double>(); }
  int barrier_min_exp() const { return j_.at("barriers").at("sweep_min_exp").get<int>(); }
  int barrier_max_exp() const { return j_.at("barriers").at("sweep_max_exp").get<int>(); }

  McConfigBlock mc() const;

  json phi2_block() const {
    if (!j_.contains("compare") || !j_.at("compare").contains("phi2"))
      throw ConfigError("compare.phi2 missing");
    return j_.at("compare").at("phi2");
  }

 private:
  void normalize() {
    json d = json::object();
    d["domain"] = json{{"kind", "interval"}, {"a", 0.0}, {"b", 1.0}};
    d["kernel"] = json{{"alpha", 0.5}, {"Lambda", 1.0}, {"c1", 1.0}, {"c2", 1.0},
                       {"density", json{{"kind", "constant"}, {"value", 1.0}}}};
    d["controls"] = json::array({json{{"label", "c0"}, {"A", json::array()},
                                      {"c", json::array()}, {"f", json::array({0.0})}}});
    d["lambda"] = 0.0;
    d["phi"] = json{{"kind", "constant"}, {"value", 0.0}};
    d["grid"] = json{{"n", 256}};
    d["quadrature"] =
        json{{"panels_per_decade", 8}, {"truncation_radius", 1e6},
             {"tail_mode", "closed_form_constant_K"}, {"angular_nodes", 64},
             {"delta_factor", 0.5}};
    d["solver"] = json{{"tol", 1e-9}, {"max_outer", 50},
                       {"eps_sweep", json::array({1.0, 0.5, 0.25, 0.125, 0.0625,
                                                  0.03125, 0.015625})}};
    d["mc"] = json{{"paths", 100000}, {"dt", 1e-3}, {"rho", 0.01}, {"t_max", 50.0},
                   {"seed", 12345}, {"antithetic", false},
                   {"probes", json::array()}};
    d["barriers"] = json{{"sigma", 0.5}, {"sweep_min_exp", 4}, {"sweep_max_exp", 12}};
    d["classify"] = json{{"n_samples", 64}, {"tau_b", 1e-8}};
    d["output_dir"] = "out";
    d["seed"] = 12345;

    // deep default fill: keep user keys, add missing ones
    std::function<void(json&, const json&)> merge = [&](json& dst, const json& def) {
      for (auto it = def.begin(); it != def.end(); ++it) {
        if (!dst.contains(it.key()))
          dst[it.key()] = it.value();
        else if (dst[it.key()].is_object() && it.value().is_object())
          merge(dst[it.key()], it.value());
      }
    };
    if (!j_.is_object()) throw ConfigError("config root must be an object");
    merge(j_, d);
  }

  void validate() const {
    double alpha = j_.at("kernel").at("alpha").get<double>();
    detail::require(alpha > 0.0 && alpha < 1.0, "kernel.alpha must lie in (0,1)");
    detail::require(j_.at("kernel").at("Lambda").get<double>() > 0, "kernel.Lambda > 0");
    detail::require(j_.at("grid").at("n").get<int>() >= 4, "grid.n >= 4");
    detail::require(j_.at("lambda").get<double>() >= 0.0, "lambda >= 0");
    detail::require(j_.at("controls").is_array() && !j_.at("controls").empty(),
                    "controls must be a nonempty array");
    Domain dom = make_domain();
    detail::require(j_.at("quadrature").at("truncation_radius").get<double>() >=
                        dom.diameter(),
                    "quadrature.truncation_radius must cover the domain diameter");
    (void)make_kernel();
    double sup = 0;
    (void)make_phi(j_.at("phi"), &sup);
  }

  json j_;
};

/// Typed view of the mc block.
struct McConfigBlock {
  McConfig cfg;
  std::vector<Pt> probes;
};

inline McConfigBlock ExperimentConfig::mc() const {
  const json& m = j_.at("mc");
  McConfigBlock out;
  out.cfg.paths = m.at("paths").get<std::size_t>();
  out.cfg.dt = m.at("dt").get<double>();
  out.cfg.jump_cutoff = m.at("rho").get<double>();
  out.cfg.t_max = m.at("t_max").get<double>();
  out.cfg.seed = m.at("seed").get<std::uint64_t>();
  out.cfg.antithetic = m.at("antithetic").get<bool>();
  for (const auto& p : m.at("probes")) {
    std::vector<double> v = p.get<std::vector<double>>();
    out.probes.push_back({v.empty() ? 0.0 : v[0], v.size() > 1 ? v[1] : 0.0});
  }
  return out;
}

// ============================================================================
// Presets
// ============================================================================

inline ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  json j;
  if (name == "outward-1d") {
    // b == 0: every boundary point is Gamma_out; no loss of the datum. The
    // cost varies in the interior while the exterior datum matches it at the
    // boundary (f(0) = lambda * phi), so the attainment layer is resolvable
    // on desk-scale grids.
    j["domain"] = {{"kind", "interval"}, {"a", 0.0}, {"b", 1.0}};
    j["kernel"] = {{"alpha", 0.5}, {"Lambda", 1.0}, {"c1", 1.0}, {"c2", 1.0},
                   {"density", {{"kind", "constant"}, {"value", 1.0}}}};
    j["controls"] = json::array(
        {{{"label", "rest"}, {"f", {0.5, 0.75, -0.75}}}});  // 0.5 + 0.75 x (1 - x)
    j["lambda"] = 1.0;
    j["phi"] = {{"kind", "constant"}, {"value", 0.5}};
    j["grid"] = {{"n", 256}};
  } else if (name == "inward-1d") {
    // constant rightward drift: Gamma_in = {0}, Gamma_out = {1}
    j["domain"] = {{"kind", "interval"}, {"a", 0.0}, {"b", 1.0}};
    j["kernel"] = {{"alpha", 0.5}, {"Lambda", 1.0}, {"c1", 1.0}, {"c2", 1.0},
                   {"density", {{"kind", "constant"}, {"value", 1.0}}}};
    j["controls"] = json::array({{{"label", "push"}, {"c", {1.0}}, {"f", {0.0}}}});
    j["lambda"] = 0.0;
    j["phi"] = {{"kind", "ramp"}, {"x0", 0.0}, {"x1", 1.0}, {"left", 1.0}, {"right", 0.0}};
    j["grid"] = {{"n", 256}};
    j["mc"] = {{"probes", {{0.2}, {0.35}, {0.5}, {0.65}, {0.8}}}};
  } else if (name == "inward-1d-strong") {
    // alpha = 0.3 with drift far above the nonlocal scale: persistent loss
    j["domain"] = {{"kind", "interval"}, {"a", 0.0}, {"b", 1.0}};
    j["kernel"] = {{"alpha", 0.3}, {"Lambda", 1.0}, {"c1", 1.0}, {"c2", 1.0},
                   {"density", {{"kind", "constant"}, {"value", 1.0}}}};
    j["controls"] = json::array({{{"label", "push"}, {"c", {4.0}}, {"f", {0.0}}}});
    j["lambda"] = 0.0;
    j["phi"] = {{"kind", "ramp"}, {"x0", 0.0}, {"x1", 1.0}, {"left", 1.0}, {"right", 0.0}};
    j["grid"] = {{"n", 256}};
    j["barriers"] = {{"sigma", 0.7}, {"sweep_min_exp", 4}, {"sweep_max_exp", 12}};
  } else if (name == "mixed-disk") {
    // radial inward field vs constant downward: In on the upper arc, Mixed
    // below (two contiguous arcs)
    j["domain"] = {{"kind", "disk"}, {"cx", 0.0}, {"cy", 0.0}, {"r", 1.0}};
    j["kernel"] = {{"alpha", 0.5}, {"Lambda", 1.0}, {"c1", 1.0}, {"c2", 1.0},
                   {"density", {{"kind", "constant"}, {"value", 1.0}}}};
    j["controls"] = json::array(
        {{{"label", "inward"}, {"A", {-1.0, 0.0, 0.0, -1.0}}, {"f", {1.0}}},
         {{"label", "down"}, {"c", {0.0, -1.0}}, {"f", {0.5}}}});
    j["lambda"] = 0.5;
    j["phi"] = {{"kind", "affine_clamped"}, {"a", 0.0}, {"gx", 0.0}, {"gy", 1.0},
                {"lo", -1.0}, {"hi", 1.0}};
    j["grid"] = {{"n", 24}};
  } else if (name == "linear-validate") {
    // single control: the linear benchmark for stochastic cross-validation
    j["domain"] = {{"kind", "interval"}, {"a", 0.0}, {"b", 1.0}};
    j["kernel"] = {{"alpha", 0.5}, {"Lambda", 1.0}, {"c1", 1.0}, {"c2", 1.0},
                   {"density", {{"kind", "constant"}, {"value", 1.0}}}};
    j["controls"] = json::array({{{"label", "drift"}, {"c", {0.3}}, {"f", {1.0}}}});
    j["lambda"] = 0.5;
    j["phi"] = {{"kind", "runge"}, {"amp", 1.0}};
    j["grid"] = {{"n", 256}};
    j["mc"] = {{"paths", 100000}, {"dt", 1e-3}, {"rho", 0.01}, {"t_max", 50.0},
               {"seed", 12345}, {"antithetic", false},
               {"probes", {{0.2}, {0.35}, {0.5}, {0.65}, {0.8}}}};
  } else if (name == "two-control-1d") {
    j["domain"] = {{"kind", "interval"}, {"a", 0.0}, {"b", 1.0}};
    j["kernel"] = {{"alpha", 0.5}, {"Lambda", 1.0}, {"c1", 1.0}, {"c2", 1.0},
                   {"density", {{"kind", "constant"}, {"value", 1.0}}}};
    j["controls"] = json::array(
        {{{"label", "right"}, {"c", {1.0}}, {"f", {0.3}}},
         {{"label", "left"}, {"c", {-1.0}}, {"f", {0.7}}}});
    j["lambda"] = 1.0;
    j["phi"] = {{"kind", "runge"}, {"amp", 1.0}};
    j["grid"] = {{"n", 256}};
    j["mc"] = {{"paths", 100000}, {"dt", 1e-3}, {"rho", 0.01}, {"t_max", 50.0},
               {"seed", 12345}, {"antithetic", false},
               {"probes", {{0.3}, {0.5}, {0.7}}}};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return from_json(j);
}

}  // namespace nlb

// hamiltonian.hpp
//
// Bellman Hamiltonian over a finite control set:
//   H(x,p) = max_beta { -b_beta(x).p - f_beta(x) },
// its cost-free envelopes H_i / H_s, and argmax extraction for policy
// iteration. Includes a sampled Lipschitz diagnostic for the drift fields.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlb/geometry.hpp"

namespace nlb {

struct Control {
  std::string label;
  std::function<Pt(Pt)> drift;    // b_beta(x)
  std::function<double(Pt)> cost; // f_beta(x)
};

/// Exit-time control problem data: finite control list (the discretization of
/// the compact control space), discount, exterior datum, and the bounds the
/// estimates depend on.
struct ControlProblem {
  std::vector<Control> controls;
  double lambda = 0.0;                 // discount, >= 0
  std::function<double(Pt)> phi;       // exterior datum on the complement
  double phi_sup = 0.0;                // ||phi||_inf
  double f_sup = 0.0;                  // ||f||_inf over controls
  double lipschitz_b = 0.0;            // L in assumption (L)

  std::size_t num_controls() const { return controls.size(); }
  Pt drift(Pt x, std::size_t k) const { return controls[k].drift(x); }
  double cost(Pt x, std::size_t k) const { return controls[k].cost(x); }

  void validate() const {
    if (controls.empty()) throw std::invalid_argument("ControlProblem: no controls");
    if (lambda < 0) throw std::invalid_argument("ControlProblem: lambda < 0");
  }
};

/// H(x,p) = max over the control list of -b_beta(x).p - f_beta(x).
inline double hamiltonian(const ControlProblem& pb, Pt x, Pt p) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : pb.controls)
    best = std::max(best, -dot(c.drift(x), p) - c.cost(x));
  return best;
}

struct Envelopes {
  double h_inf;  // H_i = inf_beta { -b_beta . p }
  double h_sup;  // H_s = sup_beta { -b_beta . p }
};

/// Cost-free envelopes of the linear forms -b_beta(x).p.
inline Envelopes hamiltonian_envelopes(const ControlProblem& pb, Pt x, Pt p) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& c : pb.controls) {
    double v = -dot(c.drift(x), p);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

/// First control (lowest index) attaining the maximum of -b.p - f.
inline std::size_t argmax_control(const ControlProblem& pb, Pt x, Pt p) {
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pb.controls.size(); ++k) {
    double v = -dot(pb.controls[k].drift(x), p) - pb.controls[k].cost(x);
    if (v > best_v) {
      best_v = v;
      best = k;
    }
  }
  return best;
}

/// Largest sampled Lipschitz quotient of the drift fields over random-ish
/// point pairs in the box around the domain; a diagnostic against the
/// declared constant L.
inline double sampled_drift_lipschitz(const ControlProblem& pb, const Domain& domain,
                                      int samples = 200) {
  double quot = 0.0;
  double diam = domain.diameter();
  Pt c = domain.dim() == 1
             ? Pt{0.5 * (domain.interval_a() + domain.interval_b()), 0.0}
             : domain.center();
  // low-discrepancy sweep; deterministic
  double g1 = 0.6180339887498949, g2 = 0.7548776662466927;
  double s1 = 0.17, s2 = 0.39;
  for (int i = 0; i < samples; ++i) {
    s1 = std::fmod(s1 + g1, 1.0);
    s2 = std::fmod(s2 + g2, 1.0);
    Pt p{c.x + diam * (s1 - 0.5), c.y + (domain.dim() == 2 ? diam * (s2 - 0.5) : 0.0)};
    Pt q{c.x + diam * (s2 - 0.5), c.y + (domain.dim() == 2 ? diam * (s1 - 0.5) : 0.0)};
    double dist = norm(p - q);
    if (dist < 1e-12) continue;
    for (const auto& ctl : pb.controls)
      quot = std::max(quot, norm(ctl.drift(p) - ctl.drift(q)) / dist);
  }
  return quot;
}

}  // namespace nlb

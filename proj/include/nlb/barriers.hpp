// barriers.hpp
//
// Barrier functions d^sigma and zeta = log d, their censored-equation
// residuals near the inward boundary set, and numerical certification of the
// classical-subsolution inequalities with fitted constants:
//
//   -I_Omega[d^sigma] + H_s(x, D d^sigma) <= -c~_0 d^{sigma-1}
//   -I_Omega[zeta]    + H_s(x, D zeta)    <= -c_0 d^{-1}
//   -I_Omega[zeta]    <= C d^{-alpha}
//
// The constants are fitted over a geometric distance sweep, never taken from
// elsewhere; certification asserts their positivity and the residual signs.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "nlb/geometry.hpp"
#include "nlb/hamiltonian.hpp"
#include "nlb/kernel.hpp"

namespace nlb {

// ============================================================================
// Barrier fields
// ============================================================================

/// zeta(x) = log d(x) inside Omega, 0 outside; -inf sentinel on the boundary
/// itself (never fed to quadrature: the crossing is handled by the exact log
/// sliver).
inline double eval_zeta(const Domain& domain, Pt x) {
  double d = domain.signed_distance(x);
  if (d > 0) return std::log(d);
  if (d < 0) return 0.0;
  return -std::numeric_limits<double>::infinity();
}

inline AnalyticField zeta_field(const Domain& domain) {
  AnalyticField f;
  // floor guards against rounding-collapsed distances at quadrature points
  f.value = [&domain](Pt p) {
    double d = domain.signed_distance(p);
    return d > 0 ? std::log(std::max(d, 1e-300)) : 0.0;
  };
  f.singularity = BoundarySingularity::Log;
  return f;
}

inline AnalyticField dsigma_field(const Domain& domain, double sigma, double amplitude = 1.0) {
  AnalyticField f;
  f.value = [&domain, sigma, amplitude](Pt p) {
    double d = domain.signed_distance(p);
    return d > 0 ? amplitude * std::pow(d, sigma) : 0.0;
  };
  f.singularity = BoundarySingularity::Power;
  f.power = sigma;
  f.scale = amplitude;
  return f;
}

// ============================================================================
// Residuals
// ============================================================================

/// -I_Omega[d^sigma](x) + H_s(x, sigma d^{sigma-1} Dd): censored quadrature
/// plus the exact gradient. Requires x interior within the smoothness band.
inline double residual_d_sigma(const Domain& domain, const LevyKernel& kernel,
                               const ControlProblem& problem, Pt x, double sigma,
                               const QuadratureSpec& spec, double* i_omega_out = nullptr) {
  double d = domain.signed_distance(x);
  if (!(d > 0) || d >= domain.delta0())
    throw std::invalid_argument("residual_d_sigma: x outside the smoothness band");
  if (!(sigma > 0.0 && sigma <= 1.0))
    throw std::invalid_argument("residual_d_sigma: sigma in (0,1]");
  AnalyticField g = dsigma_field(domain, sigma);
  double iomega = censored_apply_analytic(g, kernel, domain, x, spec);
  if (i_omega_out) *i_omega_out = iomega;
  Pt grad = sigma * std::pow(d, sigma - 1.0) * domain.distance_gradient(x);
  return -iomega + hamiltonian_envelopes(problem, x, grad).h_sup;
}

struct ZetaResidual {
  double residual;      // -I_Omega[zeta](x) + H_s(x, Dd/d)
  double i_omega_zeta;  // I_Omega[zeta](x)
};

inline ZetaResidual residual_zeta(const Domain& domain, const LevyKernel& kernel,
                                  const ControlProblem& problem, Pt x,
                                  const QuadratureSpec& spec) {
  double d = domain.signed_distance(x);
  if (!(d > 0) || d >= domain.delta0())
    throw std::invalid_argument("residual_zeta: x outside the smoothness band");
  AnalyticField g = zeta_field(domain);
  double iomega = censored_apply_analytic(g, kernel, domain, x, spec);
  Pt grad = (1.0 / d) * domain.distance_gradient(x);
  return {-iomega + hamiltonian_envelopes(problem, x, grad).h_sup, iomega};
}

// ============================================================================
// Certification
// ============================================================================

struct BarrierSweepRow {
  Pt x;
  double d = 0.0;
  double res_dsigma = 0.0;
  double res_zeta = 0.0;
  double i_omega_zeta = 0.0;
  double i_omega_dsigma = 0.0;
};

struct BarrierReport {
  double sigma = 0.5;
  double r_bar = 0.0;              // widest sweep distance where both rates certify
  std::vector<BarrierSweepRow> rows;
  double fitted_c0_zeta = 0.0;     // res_zeta <= -c0 / d
  double fitted_c0_dsigma = 0.0;   // res_dsigma <= -c0 d^{sigma-1}
  double fitted_C_zeta = 0.0;      // |I_Omega[zeta]| <= C d^{-alpha}
  double fitted_C_dsigma = 0.0;    // -I_Omega[d^sigma] <= C d^{sigma-alpha}
  double slope = 0.0;              // log-log slope of |I_Omega[zeta]| vs d
  double eps_cert = 0.0;           // certification margin actually used
  bool applicable = false;         // Gamma_in nonempty
  bool certified = false;
  std::string detail;
  // slope-fit window: deeper than the certification sweep, where the
  // d^-alpha scaling has shed its sqrt(d) log d transient
  std::vector<std::pair<double, double>> slope_rows;  // (d, I_Omega[zeta])
};

/// Run both residual checks over a geometric distance sweep along the inward
/// normal at each Gamma_in sample; fit the constants and the log-log slope of
/// |I_Omega[zeta]| (expected -alpha). Certification failure is reported, not
/// thrown.
inline BarrierReport certify_barriers(const Domain& domain, const LevyKernel& kernel,
                                      const ControlProblem& problem,
                                      const BoundaryClassification& cls, double sigma,
                                      const QuadratureSpec& spec, int sweep_min_exp = 4,
                                      int sweep_max_exp = 12,
                                      std::size_t max_vertices = 4) {
  BarrierReport rep;
  rep.sigma = sigma;

  std::vector<Pt> vertices;
  for (const auto& s : cls.samples)
    if (s.label == BoundaryLabel::In) vertices.push_back(s.point);
  if (vertices.empty()) {
    rep.applicable = false;
    rep.detail = "Gamma_in empty: report not applicable";
    return rep;
  }
  rep.applicable = true;
  if (vertices.size() > max_vertices) {
    std::vector<Pt> picked;
    for (std::size_t k = 0; k < max_vertices; ++k)
      picked.push_back(vertices[k * vertices.size() / max_vertices]);
    vertices.swap(picked);
  }

  for (Pt v : vertices) {
    Pt nrm = domain.distance_gradient(v);
    for (int e = sweep_min_exp; e <= sweep_max_exp; ++e) {
      double d = std::ldexp(1.0, -e);
      if (d >= 0.9 * domain.delta0()) continue;  // keep inside the band
      Pt x = v + d * nrm;
      BarrierSweepRow row;
      row.x = x;
      row.d = domain.signed_distance(x);
      row.res_dsigma =
          residual_d_sigma(domain, kernel, problem, x, sigma, spec, &row.i_omega_dsigma);
      ZetaResidual z = residual_zeta(domain, kernel, problem, x, spec);
      row.res_zeta = z.residual;
      row.i_omega_zeta = z.i_omega_zeta;
      rep.rows.push_back(row);
    }
  }
  if (rep.rows.size() < 3) {
    rep.detail = "sweep too short inside the smoothness band";
    return rep;
  }

  // fitted constants (rate-normalized residual envelopes)
  double c0z = std::numeric_limits<double>::infinity();
  double c0d = std::numeric_limits<double>::infinity();
  double Cz = 0.0, Cd = -std::numeric_limits<double>::infinity();
  for (const auto& r : rep.rows) {
    c0z = std::min(c0z, -r.res_zeta * r.d);
    c0d = std::min(c0d, -r.res_dsigma * std::pow(r.d, 1.0 - sigma));
    Cz = std::max(Cz, std::abs(r.i_omega_zeta) * std::pow(r.d, kernel.alpha));
    Cd = std::max(Cd, -r.i_omega_dsigma * std::pow(r.d, kernel.alpha - sigma));
  }
  rep.fitted_c0_zeta = c0z;
  rep.fitted_c0_dsigma = c0d;
  rep.fitted_C_zeta = Cz;
  rep.fitted_C_dsigma = Cd;

  // log-log slope of |I_Omega[zeta]| against d, fitted in the asymptotic
  // window: the certification sweep still carries an O(sqrt(d) log d)
  // transient, while the barrier evaluation is pure quadrature and stays
  // exact at much smaller d
  {
    Pt v = vertices.front();
    Pt nrm = domain.distance_gradient(v);
    int deep_min = std::max(sweep_max_exp + 2, 14);
    int deep_max = deep_min + 12;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (int e = deep_min; e <= deep_max; e += 2) {
      double d = std::ldexp(1.0, -e);
      Pt x = v + d * nrm;
      AnalyticField g = zeta_field(domain);
      double iom = censored_apply_analytic(g, kernel, domain, x, spec);
      rep.slope_rows.emplace_back(d, iom);
      if (std::abs(iom) <= 0) continue;
      double lx = std::log(d), ly = std::log(std::abs(iom));
      sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
      ++n;
    }
    if (n >= 2) rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }

  // self-calibrating margin: half the fitted constant; the decisive gate is
  // positivity of the fitted rate constants (their stability is checked by
  // rerunning the sweep with doubled panels)
  rep.eps_cert = 0.5 * std::max(c0z, 0.0);

  bool all_neg = true;
  double coarse_d = 0.0;
  for (const auto& r : rep.rows) {
    all_neg = all_neg && r.res_dsigma < 0.0 && r.res_zeta < 0.0;
    coarse_d = std::max(coarse_d, r.d);
  }
  rep.certified = all_neg && c0z > 0.0 && c0d > 0.0;
  if (rep.certified) {
    rep.r_bar = coarse_d;
    rep.detail = "certified";
  } else {
    rep.detail = all_neg ? "residual decay rate too weak" : "residual with wrong sign in sweep";
  }
  return rep;
}

}  // namespace nlb

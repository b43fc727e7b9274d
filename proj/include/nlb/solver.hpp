// solver.hpp
//
// Monotone discretization of the censored reformulation
//
//   lambda_bar(x) u - I_Omega[u] + H(x, Du) = phi_bar(x)  in Omega,
//
// with unknowns at strictly interior nodes only. The censored operator is
// assembled from nonnegative interpolation weights (hat functions with
// nearest-value extension toward the boundary), the drift is first-order
// upwind per component with cut cells reading the exterior datum at the
// boundary crossing, and lambda_bar sits on the diagonal unclipped. The
// resulting per-control matrices are strictly diagonally dominant M-matrices
// whenever assumption (M) holds.
//
// Fixed points are computed by Howard policy iteration (direct linear solves)
// or by a damped nonlinear Gauss-Seidel sweep (value iteration), and the
// eps-penalized Perron scheme is the same sweep with nodewise clamping
// between the penalization envelopes.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "nlb/geometry.hpp"
#include "nlb/grid.hpp"
#include "nlb/hamiltonian.hpp"
#include "nlb/kernel.hpp"

namespace nlb {

// ============================================================================
// Discrete scheme
// ============================================================================

/// Upwind drift stencil of one control at one node: positive diagonal mass,
/// up to dim interior couplings, and the known boundary contribution.
struct UpwindStencil {
  double diag = 0.0;
  int cols[2] = {-1, -1};
  double coefs[2] = {0.0, 0.0};  // applied as A(i, col) -= coef
  int ncols = 0;
  double rhs = 0.0;              // sum of coef * phi(boundary crossing)
};

struct DiscreteScheme {
  std::shared_ptr<const Grid> grid;
  Domain domain;
  LevyKernel kernel;
  ControlProblem problem;
  QuadratureSpec quad;

  Eigen::MatrixXd W;          // censored nonlocal weights, >= 0, zero diagonal
  Eigen::VectorXd row_mass;   // W row sums
  Eigen::VectorXd lam_bar;    // lambda + tail_mass at each node
  Eigen::VectorXd phib;       // phi_bar at each node
  std::vector<std::vector<UpwindStencil>> stencils;  // [control][node]
  std::vector<Eigen::VectorXd> fvals;                // [control]

  double mu0 = 0.0;      // lambda + min tail_mass over nodes
  bool m_holds = true;   // assumption (M) flag

  std::size_t size() const { return grid->size(); }
  std::size_t num_controls() const { return problem.num_controls(); }

  double bound_R() const { return problem.phi_sup + (mu0 > 0 ? problem.f_sup / mu0 : 0.0); }

  /// Residual of the frozen-control row: (A_c u - rhs_c)_i. Wu must be W*u.
  double control_residual(const Eigen::VectorXd& u, const Eigen::VectorXd& Wu,
                          std::size_t c, std::size_t i) const {
    const UpwindStencil& st = stencils[c][i];
    double r = (lam_bar[i] + row_mass[i] + st.diag) * u[i] - Wu[i];
    for (int k = 0; k < st.ncols; ++k) r -= st.coefs[k] * u[st.cols[k]];
    r -= st.rhs + fvals[c][i] + phib[i];
    return r;
  }

  /// Bellman residual max_c (A_c u - rhs_c) and the attaining policy.
  Eigen::VectorXd bellman_residual(const Eigen::VectorXd& u,
                                   std::vector<std::size_t>* policy = nullptr) const {
    Eigen::VectorXd Wu = W * u;
    Eigen::VectorXd res(size());
    if (policy) policy->assign(size(), 0);
    for (std::size_t i = 0; i < size(); ++i) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < num_controls(); ++c) {
        double r = control_residual(u, Wu, c, i);
        if (r > best) { best = r; arg = c; }
      }
      res[i] = best;
      if (policy) (*policy)[i] = arg;
    }
    return res;
  }

  /// Dense matrix and right-hand side at a frozen policy.
  void build_system(const std::vector<std::size_t>& policy, Eigen::MatrixXd& A,
                    Eigen::VectorXd& rhs) const {
    std::size_t n = size();
    A = -W;
    rhs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const UpwindStencil& st = stencils[policy[i]][i];
      A(i, i) += lam_bar[i] + row_mass[i] + st.diag;
      for (int k = 0; k < st.ncols; ++k) A(i, st.cols[k]) -= st.coefs[k];
      rhs[i] = fvals[policy[i]][i] + phib[i] + st.rhs;
    }
  }
};

// ============================================================================
// Assembly
// ============================================================================

namespace detail {

// 1D hat weights against K^alpha; exact power-law antiderivatives for constant
// densities, graded panels otherwise.
inline void accumulate_weights_1d(DiscreteScheme& S, std::size_t i) {
  const Grid& g = *S.grid;
  const LevyKernel& k = S.kernel;
  double h = g.h();
  double alpha = k.alpha;
  int n = int(g.size());
  double xi = g.node(i).x;
  double a = g.node(0).x - h;      // left boundary
  double b = g.node(n - 1).x + h;  // right boundary

  const bool constK = k.density.is_constant;
  const double Kc = k.density.constant_value;
  auto I0 = [&](double p, double q) {  // int_p^q z^-(1+a) dz
    return (std::pow(p, -alpha) - std::pow(q, -alpha)) / alpha;
  };
  auto I1 = [&](double p, double q) {  // int_p^q z^-a dz
    return (std::pow(q, 1.0 - alpha) - std::pow(p, 1.0 - alpha)) / (1.0 - alpha);
  };

  for (int side = 0; side < 2; ++side) {
    double sgn = side == 0 ? 1.0 : -1.0;
    Pt dir{sgn, 0.0};
    // ramp weight onto `col` over radial span [p,q]: ramp = (z - z_at0)/h if
    // rising from z_at0, or (z_at1 - z)/h if falling to z_at1
    auto add_ramp = [&](int col, double p, double q, double zfoot, bool rising) {
      if (col == int(i) || col < 0 || !(q > p)) return;
      double w;
      if (constK) {
        w = rising ? (Kc / h) * (I1(p, q) - zfoot * I0(std::max(p, 1e-300), q))
                   : (Kc / h) * (zfoot * I0(std::max(p, 1e-300), q) - I1(p, q));
        if (p == 0.0 && rising && zfoot == 0.0) w = (Kc / h) * I1(0.0, q);
      } else {
        auto f = [&](double r) {
          double ramp = rising ? (r - zfoot) / h : (zfoot - r) / h;
          return ramp * k.density.eval(r * dir) * std::pow(r, -(1.0 + alpha));
        };
        double lo = p > 0 ? p : q * std::ldexp(1.0, -40);
        w = integrate_radial(f, lo, q, S.quad.panels_per_decade);
      }
      S.W(i, col) += w;
    };
    auto add_const = [&](int col, double p, double q) {
      if (col == int(i) || col < 0 || !(q > p)) return;
      double w;
      if (constK) {
        w = Kc * I0(p, q);
      } else {
        auto f = [&](double r) {
          return k.density.eval(r * dir) * std::pow(r, -(1.0 + alpha));
        };
        w = integrate_radial(f, p, q, S.quad.panels_per_decade);
      }
      S.W(i, col) += w;
    };

    if (side == 0) {
      for (int c = int(i); c + 1 < n; ++c) {
        double zl = g.node(c).x - xi, zr = g.node(c + 1).x - xi;
        add_ramp(c, zl, zr, zr, false);       // falling to node c
        add_ramp(c + 1, zl, zr, zl, true);    // rising to node c+1
      }
      add_const(n - 1, g.node(n - 1).x - xi, b - xi);  // extension strip
    } else {
      for (int c = int(i); c - 1 >= 0; --c) {
        double zl = xi - g.node(c).x, zr = xi - g.node(c - 1).x;
        add_ramp(c, zl, zr, zr, false);
        add_ramp(c - 1, zl, zr, zl, true);
      }
      add_const(0, xi - g.node(0).x, xi - a);
    }
  }
}

// 2D polar accumulation: scatter graded radial quadrature onto bilinear
// interpolation weights; the self-node increment carries no weight.
inline void accumulate_weights_2d(DiscreteScheme& S, std::size_t i) {
  const Grid& g = *S.grid;
  const LevyKernel& k = S.kernel;
  double h = g.h();
  double alpha = k.alpha;
  Pt xi = g.node(i);
  for (const auto& ray : make_rays(2, S.quad.angular_nodes)) {
    double rho = S.domain.ray_exit(xi, ray.dir);
    double r_lo = std::min(h, rho) * std::ldexp(1.0, -40);
    // panel breakpoints: geometric within [r_lo, min(h,rho)], then per decade
    std::vector<double> brk;
    brk.push_back(r_lo);
    for (int lev = 39; lev >= 0; --lev) {
      double r = std::min(h, rho) * std::ldexp(1.0, -lev);
      if (r > r_lo && r < rho) brk.push_back(r);
    }
    brk.push_back(rho);
    for (std::size_t s = 0; s + 1 < brk.size(); ++s) {
      double lo = brk[s], hi = brk[s + 1];
      int np = std::max(1, int(std::ceil(S.quad.panels_per_decade / 2.0 *
                                         std::log10(hi / lo))));
      np = std::min(np, 200);
      double gr = std::pow(hi / lo, 1.0 / np);
      double p0 = lo;
      for (int pnl = 0; pnl < np; ++pnl) {
        double p1 = (pnl + 1 == np) ? hi : p0 * gr;
        double mid = 0.5 * (p0 + p1), half = 0.5 * (p1 - p0);
        for (int q = 0; q < 4; ++q) {
          static constexpr double gx[4] = {-0.8611363115940526, -0.3399810435848563,
                                           0.3399810435848563, 0.8611363115940526};
          static constexpr double gw[4] = {0.3478548451374538, 0.6521451548625461,
                                           0.6521451548625461, 0.3478548451374538};
          double r = mid + half * gx[q];
          double qw = ray.weight * gw[q] * half * k.density.eval(r * ray.dir) *
                      std::pow(r, -(1.0 + alpha));
          Grid::InterpWeights iw = g.weights_at(xi + r * ray.dir);
          for (int t = 0; t < iw.count; ++t)
            if (iw.ids[t] != int(i)) S.W(i, iw.ids[t]) += qw * iw.w[t];
        }
        p0 = p1;
      }
    }
  }
}

inline void build_upwind(DiscreteScheme& S, std::size_t c) {
  const Grid& g = *S.grid;
  double h = g.h();
  auto& row = S.stencils[c];
  row.assign(g.size(), UpwindStencil{});
  for (std::size_t i = 0; i < g.size(); ++i) {
    Pt x = g.node(i);
    Pt b = S.problem.drift(x, c);
    int ix = 0, iy = 0;
    g.node_cell(i, ix, iy);
    UpwindStencil& st = row[i];
    const double comps[2] = {b.x, b.y};
    for (int axis = 0; axis < (g.dim() == 1 ? 1 : 2); ++axis) {
      double bc = comps[axis];
      if (bc == 0.0) continue;  // vanishing component contributes nothing
      int step = bc > 0 ? 1 : -1;
      int nb = axis == 0 ? g.node_at(ix + step, iy) : g.node_at(ix, iy + step);
      Pt dir = axis == 0 ? Pt{double(step), 0.0} : Pt{0.0, double(step)};
      if (nb >= 0) {
        double coef = std::abs(bc) / h;
        st.diag += coef;
        st.cols[st.ncols] = nb;
        st.coefs[st.ncols] = coef;
        ++st.ncols;
      } else {
        // cut cell: the upwind neighbor is past the boundary; read the
        // exterior datum at the crossing
        double t_cut = S.domain.ray_exit(x, dir);
        double coef = std::abs(bc) / t_cut;
        st.diag += coef;
        st.rhs += coef * S.problem.phi(x + t_cut * dir);
      }
    }
  }
}

}  // namespace detail

/// Assemble the monotone discrete scheme. Records a violation of (M) in
/// m_holds rather than failing; throws when the grid is degenerate.
inline DiscreteScheme assemble(const Domain& domain, const LevyKernel& kernel,
                               const ControlProblem& problem,
                               std::shared_ptr<const Grid> grid,
                               const QuadratureSpec& quad) {
  problem.validate();
  if (grid->size() < 4) throw std::invalid_argument("assemble: grid too coarse");
  DiscreteScheme S;
  S.grid = std::move(grid);
  S.domain = domain;
  S.kernel = kernel;
  S.problem = problem;
  S.quad = quad;
  std::size_t n = S.grid->size();

  S.W = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (S.grid->dim() == 1)
      detail::accumulate_weights_1d(S, i);
    else
      detail::accumulate_weights_2d(S, i);
  }
  S.row_mass = S.W.rowwise().sum();

  S.lam_bar.resize(n);
  S.phib.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    S.lam_bar[i] = problem.lambda + tail_mass(kernel, domain, S.grid->node(i), quad);
    S.phib[i] = phi_bar(problem.phi, kernel, domain, S.grid->node(i), quad);
  }
  S.mu0 = S.lam_bar.minCoeff();
  S.m_holds = S.mu0 > 0.0;

  S.stencils.resize(problem.num_controls());
  S.fvals.resize(problem.num_controls());
  for (std::size_t c = 0; c < problem.num_controls(); ++c) {
    detail::build_upwind(S, c);
    S.fvals[c].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      S.fvals[c][i] = problem.cost(S.grid->node(i), c);
  }
  return S;
}

// ============================================================================
// Solvers
// ============================================================================

struct SolverResult {
  GridFunction values;
  std::vector<std::size_t> policy;
  std::vector<double> residual_history;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  double bound_R = 0.0;
  double mu0 = 0.0;
  bool converged = false;
  bool bound_ok = false;

  int exit_code() const { return converged ? 0 : 2; }
};

namespace detail {

inline GridFunction wrap_values(const DiscreteScheme& S, const Eigen::VectorXd& u) {
  GridFunction f = make_grid_function(S.grid, S.problem.phi, S.problem.phi_sup);
  for (std::size_t i = 0; i < S.size(); ++i) f.values[i] = u[i];
  return f;
}

inline void finalize(const DiscreteScheme& S, SolverResult& out, const Eigen::VectorXd& u,
                     double tol) {
  out.values = wrap_values(S, u);
  out.bound_R = S.bound_R();
  out.mu0 = S.mu0;
  out.bound_ok = out.values.sup_norm() <= out.bound_R + 10.0 * tol;
}

}  // namespace detail

/// Howard policy iteration: alternate a direct linear solve at the frozen
/// policy with a pointwise argmax over controls. The Bellman residual history
/// is nonincreasing after the first outer iteration (M-matrix monotonicity).
inline SolverResult policy_iteration(const DiscreteScheme& S, double tol = 1e-9,
                                     std::size_t max_outer = 50) {
  std::size_t n = S.size();
  SolverResult out;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  std::vector<std::size_t> policy;
  S.bellman_residual(u, &policy);  // argmax at u = 0
  Eigen::MatrixXd A;
  Eigen::VectorXd rhs;
  for (std::size_t outer = 1; outer <= max_outer; ++outer) {
    S.build_system(policy, A, rhs);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    u = lu.solve(rhs);
    if (!u.allFinite()) throw std::runtime_error("policy_iteration: linear solve failed");
    std::vector<std::size_t> next;
    Eigen::VectorXd res = S.bellman_residual(u, &next);
    double rinf = res.cwiseAbs().maxCoeff();
    out.residual_history.push_back(rinf);
    out.iterations = outer;
    if (rinf <= tol) {
      out.converged = true;
      out.policy = policy;
      out.final_residual = rinf;
      break;
    }
    policy = next;
    out.final_residual = rinf;
  }
  if (!out.converged) out.policy = policy;
  detail::finalize(S, out, u, tol);
  return out;
}

/// Damped nonlinear Gauss-Seidel sweep on the Bellman system (contraction
/// supplied by assumption (M)); cross-checks policy_iteration.
inline SolverResult value_iteration(const DiscreteScheme& S, double tol = 1e-9,
                                    std::size_t max_iters = 100000, double damping = 1.0) {
  std::size_t n = S.size();
  std::size_t m = S.num_controls();
  SolverResult out;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);

  // per-control diagonals
  std::vector<Eigen::VectorXd> den(m);
  for (std::size_t c = 0; c < m; ++c) {
    den[c].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      den[c][i] = S.lam_bar[i] + S.row_mass[i] + S.stencils[c][i].diag;
  }

  for (std::size_t sweep = 1; sweep <= max_iters; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      double Wu = S.W.row(i).dot(u);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < m; ++c) {
        const UpwindStencil& st = S.stencils[c][i];
        double num = S.fvals[c][i] + S.phib[i] + st.rhs + Wu;
        for (int k = 0; k < st.ncols; ++k) num += st.coefs[k] * u[st.cols[k]];
        best = std::min(best, num / den[c][i]);  // root of max_c(...) = 0
      }
      u[i] = (1.0 - damping) * u[i] + damping * best;
    }
    Eigen::VectorXd res = S.bellman_residual(u);
    double rinf = res.cwiseAbs().maxCoeff();
    out.residual_history.push_back(rinf);
    out.iterations = sweep;
    out.final_residual = rinf;
    if (rinf <= tol) {
      out.converged = true;
      break;
    }
  }
  S.bellman_residual(u, &out.policy);
  detail::finalize(S, out, u, tol);
  return out;
}

// ============================================================================
// eps-penalized Perron scheme
// ============================================================================

struct PenalizedResult {
  GridFunction values;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  bool converged = false;
  std::vector<double> psi_minus, psi_plus;
};

/// Continuous extension of the exterior datum into Omega by nearest boundary
/// projection (phi_tilde = phi on the complement).
inline double phi_tilde(const ControlProblem& pb, const Domain& domain, Pt x) {
  if (domain.signed_distance(x) <= 0.0) return pb.phi(x);
  return pb.phi(domain.project_boundary(x));
}

/// Penalized Hamiltonian solve:
///   min{ w - psi_-, max{ w - psi_+, Bellman(w) } } = 0
/// with psi_+- = phi_tilde +- d_+/eps; the fixed point is the Bellman
/// Gauss-Seidel update clamped nodewise between the envelopes, so
/// psi_- <= w <= psi_+ holds by construction.
inline PenalizedResult solve_penalized(const DiscreteScheme& S, double eps,
                                       double tol = 1e-9, std::size_t max_iters = 100000,
                                       const std::vector<double>* warm_start = nullptr) {
  if (!(eps > 0)) throw std::invalid_argument("solve_penalized: eps must be > 0");
  std::size_t n = S.size();
  std::size_t m = S.num_controls();
  PenalizedResult out;
  out.psi_minus.resize(n);
  out.psi_plus.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Pt x = S.grid->node(i);
    double base = phi_tilde(S.problem, S.domain, x);
    double pen = std::max(S.domain.signed_distance(x), 0.0) / eps;
    out.psi_minus[i] = base - pen;
    out.psi_plus[i] = base + pen;
  }

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  if (warm_start) {
    for (std::size_t i = 0; i < n; ++i) u[i] = (*warm_start)[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    u[i] = std::clamp(u[i], out.psi_minus[i], out.psi_plus[i]);

  std::vector<Eigen::VectorXd> den(m);
  for (std::size_t c = 0; c < m; ++c) {
    den[c].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      den[c][i] = S.lam_bar[i] + S.row_mass[i] + S.stencils[c][i].diag;
  }

  for (std::size_t sweep = 1; sweep <= max_iters; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      double Wu = S.W.row(i).dot(u);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < m; ++c) {
        const UpwindStencil& st = S.stencils[c][i];
        double num = S.fvals[c][i] + S.phib[i] + st.rhs + Wu;
        for (int k = 0; k < st.ncols; ++k) num += st.coefs[k] * u[st.cols[k]];
        best = std::min(best, num / den[c][i]);
      }
      u[i] = std::clamp(best, out.psi_minus[i], out.psi_plus[i]);
    }
    // penalized residual: min{u - psi_-, max{u - psi_+, bellman}}
    Eigen::VectorXd bres = S.bellman_residual(u);
    double rinf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = std::min(u[i] - out.psi_minus[i],
                          std::max(u[i] - out.psi_plus[i], bres[i]));
      rinf = std::max(rinf, std::abs(r));
    }
    out.iterations = sweep;
    out.final_residual = rinf;
    if (rinf <= tol) {
      out.converged = true;
      break;
    }
  }
  out.values = detail::wrap_values(S, u);
  return out;
}

}  // namespace nlb

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "nlb/config.hpp"
#include "nlb/solver.hpp"

using namespace nlb;

namespace {

struct Setup {
  Domain dom = Domain::interval(0, 1);
  LevyKernel ker;
  ControlProblem pb;
  QuadratureSpec quad;

  Setup() {
    ker.dim = 1;
    ker.alpha = 0.5;
    ker.Lambda = 1.0;
    ker.density = constant_density(1.0);
  }
};

ControlProblem single_control(double b, double f, double lambda,
                              std::function<double(Pt)> phi, double phi_sup) {
  ControlProblem pb;
  pb.controls.push_back(
      {"c", [b](Pt) { return Pt{b, 0}; }, [f](Pt) { return f; }});
  pb.lambda = lambda;
  pb.phi = std::move(phi);
  pb.phi_sup = phi_sup;
  pb.f_sup = std::abs(f);
  return pb;
}

}  // namespace

TEST_CASE("degenerate local case: b = 0, K = 0 is the diagonal system") {
  Setup s;
  s.ker.density = constant_density(0.0);
  s.ker.Lambda = 1.0;  // bound only
  auto f = [](Pt p) { return 1.0 + p.x; };
  ControlProblem pb;
  pb.controls.push_back({"rest", [](Pt) { return Pt{0, 0}; }, f});
  pb.lambda = 2.0;
  pb.phi = [](Pt) { return 0.3; };
  pb.phi_sup = 0.3;
  pb.f_sup = 2.0;
  auto grid = Grid::make(s.dom, 32);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  CHECK(S.W.cwiseAbs().maxCoeff() == 0.0);
  auto r = policy_iteration(S);
  REQUIRE(r.converged);
  for (std::size_t i = 0; i < grid->size(); ++i)
    CHECK(r.values.values[i] ==
          Catch::Approx(f(grid->node(i)) / 2.0).epsilon(1e-12));
}

TEST_CASE("row identity: diagonal minus off-diagonal mass equals lambda_bar") {
  Setup s;
  auto pb = single_control(1.0, 0.0, 0.25, [](Pt) { return 0.0; }, 0.0);
  auto grid = Grid::make(s.dom, 48);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  CHECK(S.W.minCoeff() >= 0.0);  // monotone weights
  std::vector<std::size_t> policy(S.size(), 0);
  Eigen::MatrixXd A;
  Eigen::VectorXd rhs;
  S.build_system(policy, A, rhs);
  for (std::size_t i = 0; i < S.size(); ++i) {
    // boundary-cut upwind mass moved to the rhs re-enters the identity
    const UpwindStencil& st = S.stencils[0][i];
    double cut = st.diag;
    for (int k = 0; k < st.ncols; ++k) cut -= st.coefs[k];
    double row = A.row(i).sum();
    CHECK(row == Catch::Approx(S.lam_bar[i] + cut).epsilon(1e-10));
  }
}

TEST_CASE("diagonal grows like d^-alpha near the endpoints") {
  Setup s;
  auto pb = single_control(0.0, 0.0, 0.5, [](Pt) { return 0.0; }, 0.0);
  auto grid = Grid::make(s.dom, 64);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  for (std::size_t i = 0; i < S.size(); ++i) {
    Pt x = grid->node(i);
    double expect = 0.5 + 2.0 * (std::pow(x.x, -0.5) + std::pow(1 - x.x, -0.5));
    CHECK(S.lam_bar[i] == Catch::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("constant benchmark: phi = c, f = lambda c solves exactly") {
  Setup s;
  double c = 0.7, lambda = 1.0;
  ControlProblem pb;
  pb.controls.push_back(
      {"a", [](Pt p) { return Pt{1 - p.x, 0}; }, [=](Pt) { return lambda * c; }});
  pb.controls.push_back(
      {"b", [](Pt p) { return Pt{-0.4, 0}; }, [=](Pt) { return lambda * c; }});
  pb.lambda = lambda;
  pb.phi = [c](Pt) { return c; };
  pb.phi_sup = c;
  pb.f_sup = lambda * c;
  auto grid = Grid::make(s.dom, 64);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  auto r = policy_iteration(S);
  REQUIRE(r.converged);
  CHECK(r.iterations <= 2);
  for (double v : r.values.values) CHECK(v == Catch::Approx(c).margin(1e-8));
}

TEST_CASE("single control converges in one linear solve") {
  Setup s;
  auto pb = single_control(0.6, 1.0, 0.5, [](Pt p) { return 1.0 / (1 + p.x * p.x); }, 1.0);
  auto grid = Grid::make(s.dom, 64);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  auto r = policy_iteration(S);
  REQUIRE(r.converged);
  CHECK(r.iterations == 1);
}

TEST_CASE("two opposing controls: value below each frozen-control value") {
  Setup s;
  ControlProblem pb;
  pb.controls.push_back({"right", [](Pt) { return Pt{1, 0}; }, [](Pt) { return 0.3; }});
  pb.controls.push_back({"left", [](Pt) { return Pt{-1, 0}; }, [](Pt) { return 0.7; }});
  pb.lambda = 1.0;
  pb.phi = [](Pt p) { return 1.0 / (1 + p.x * p.x); };
  pb.phi_sup = 1.0;
  pb.f_sup = 0.7;
  auto grid = Grid::make(s.dom, 96);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  auto r = policy_iteration(S);
  REQUIRE(r.converged);

  for (std::size_t c = 0; c < 2; ++c) {
    ControlProblem frozen = pb;
    frozen.controls = {pb.controls[c]};
    auto Sf = assemble(s.dom, s.ker, frozen, grid, s.quad);
    auto rf = policy_iteration(Sf);
    REQUIRE(rf.converged);
    for (std::size_t i = 0; i < S.size(); ++i)
      CHECK(r.values.values[i] <= rf.values.values[i] + 1e-9);
  }
}

TEST_CASE("policy and value iteration agree within 10 tol") {
  Setup s;
  for (const char* preset : {"inward-1d", "two-control-1d"}) {
    auto cfg = ExperimentConfig::preset(preset);
    auto dom = cfg.make_domain();
    auto ker = cfg.make_kernel();
    auto pb = cfg.make_problem();
    auto grid = Grid::make(dom, 64);
    auto S = assemble(dom, ker, pb, grid, cfg.make_quadrature());
    double tol = 1e-9;
    auto rp = policy_iteration(S, tol);
    auto rv = value_iteration(S, tol);
    REQUIRE(rp.converged);
    REQUIRE(rv.converged);
    double dmax = 0;
    for (std::size_t i = 0; i < S.size(); ++i)
      dmax = std::max(dmax, std::abs(rp.values.values[i] - rv.values.values[i]));
    CHECK(dmax <= 10 * tol);
  }
}

TEST_CASE("zero data solves to zero in one sweep") {
  Setup s;
  auto pb = single_control(0.8, 0.0, 0.0, [](Pt) { return 0.0; }, 0.0);
  auto grid = Grid::make(s.dom, 32);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  auto r = value_iteration(S);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(r.values.sup_norm() == 0.0);
}

TEST_CASE("policy iteration residual history is nonincreasing after the first outer") {
  Setup s;
  ControlProblem pb;
  pb.controls.push_back({"a", [](Pt p) { return Pt{1 - 2 * p.x, 0}; },
                         [](Pt p) { return 0.2 + p.x; }});
  pb.controls.push_back({"b", [](Pt p) { return Pt{std::sin(5 * p.x), 0}; },
                         [](Pt p) { return 0.9 - p.x; }});
  pb.controls.push_back({"c", [](Pt) { return Pt{-1, 0}; }, [](Pt) { return 0.5; }});
  pb.lambda = 0.2;
  pb.phi = [](Pt p) { return std::cos(2 * p.x); };
  pb.phi_sup = 1.0;
  pb.f_sup = 1.9;
  auto grid = Grid::make(s.dom, 96);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  auto r = policy_iteration(S);
  REQUIRE(r.converged);
  for (std::size_t k = 1; k < r.residual_history.size(); ++k)
    CHECK(r.residual_history[k] <= r.residual_history[k - 1] * (1 + 1e-9));
}

TEST_CASE("a-priori bound holds on a nontrivial solve") {
  Setup s;
  auto pb = single_control(1.0, 2.0, 0.0, [](Pt p) { return std::cos(p.x); }, 1.0);
  auto grid = Grid::make(s.dom, 64);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  auto r = policy_iteration(S);
  REQUIRE(r.converged);
  CHECK(r.bound_ok);
  CHECK(r.values.sup_norm() <= pb.phi_sup + pb.f_sup / S.mu0 + 1e-8);
}

TEST_CASE("assumption (M) violation is flagged, not thrown") {
  Setup s;
  s.ker.density = constant_density(0.0);
  auto pb = single_control(0.5, 0.0, 0.0, [](Pt) { return 0.0; }, 0.0);
  auto grid = Grid::make(s.dom, 16);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  CHECK_FALSE(S.m_holds);
  CHECK(S.mu0 == 0.0);
}

TEST_CASE("discrete comparison: ordered data give ordered solutions") {
  Setup s;
  ControlProblem pb;
  pb.controls.push_back({"right", [](Pt) { return Pt{1, 0}; }, [](Pt) { return 0.1; }});
  pb.controls.push_back({"left", [](Pt) { return Pt{-1, 0}; }, [](Pt) { return 0.4; }});
  pb.lambda = 0.5;
  pb.f_sup = 0.4;
  auto grid = Grid::make(s.dom, 48);
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    double a0 = uni(rng), a1 = uni(rng), bump = 0.05 + uni(rng);
    auto phi1 = [=](Pt p) { return a0 / (1 + p.x * p.x) - a1; };
    auto phi2 = [=](Pt p) { return a0 / (1 + p.x * p.x) - a1 + bump; };
    pb.phi = phi1;
    pb.phi_sup = a0 + a1;
    auto S1 = assemble(s.dom, s.ker, pb, grid, s.quad);
    auto r1 = policy_iteration(S1);
    pb.phi = phi2;
    pb.phi_sup = a0 + a1 + bump;
    auto S2 = assemble(s.dom, s.ker, pb, grid, s.quad);
    auto r2 = policy_iteration(S2);
    REQUIRE(r1.converged);
    REQUIRE(r2.converged);
    for (std::size_t i = 0; i < S1.size(); ++i)
      CHECK(r1.values.values[i] <= r2.values.values[i]);
  }
}

TEST_CASE("single-control linear problem scales exactly with the data") {
  Setup s;
  auto grid = Grid::make(s.dom, 48);
  auto pb1 = single_control(0.7, 1.0, 0.5, [](Pt p) { return std::sin(p.x); }, 1.0);
  auto pb2 = single_control(0.7, 2.0, 0.5, [](Pt p) { return 2.0 * std::sin(p.x); }, 2.0);
  auto S1 = assemble(s.dom, s.ker, pb1, grid, s.quad);
  auto S2 = assemble(s.dom, s.ker, pb2, grid, s.quad);
  auto r1 = policy_iteration(S1);
  auto r2 = policy_iteration(S2);
  REQUIRE(r1.converged);
  REQUIRE(r2.converged);
  // doubling is exact in floating point through the whole linear pipeline
  for (std::size_t i = 0; i < S1.size(); ++i)
    CHECK(r2.values.values[i] == 2.0 * r1.values.values[i]);
}

TEST_CASE("penalized solve: clamped between the envelopes, bounded by g") {
  Setup s;
  auto pb = single_control(1.0, 0.0, 0.0,
                           [](Pt p) { return p.x <= 0 ? 1.0 : 0.0; }, 1.0);
  auto grid = Grid::make(s.dom, 64);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  double R = S.bound_R();
  auto pr = solve_penalized(S, 0.5);
  REQUIRE(pr.converged);
  for (std::size_t i = 0; i < S.size(); ++i) {
    CHECK(pr.values.values[i] >= pr.psi_minus[i] - 1e-12);
    CHECK(pr.values.values[i] <= pr.psi_plus[i] + 1e-12);
    CHECK(std::abs(pr.values.values[i]) <= 2 * R + 1e-9);
  }
  CHECK_THROWS_AS(solve_penalized(S, 0.0), std::invalid_argument);
}

TEST_CASE("penalized eps-sweep converges to the direct solve in the interior") {
  Setup s;
  auto pb = single_control(1.0, 0.0, 0.0,
                           [](Pt p) { return p.x <= 0 ? 1.0 : 0.0; }, 1.0);
  auto grid = Grid::make(s.dom, 64);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  auto direct = policy_iteration(S);
  REQUIRE(direct.converged);
  double h = grid->h();

  std::vector<double> prev;
  std::vector<double> diffs;
  for (double eps : {1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625}) {
    auto pr = solve_penalized(S, eps, 1e-9, 200000, prev.empty() ? nullptr : &prev);
    REQUIRE(pr.converged);
    if (!prev.empty()) {
      double dmax = 0;
      for (std::size_t i = 0; i < S.size(); ++i) {
        if (s.dom.signed_distance(grid->node(i)) < 4 * h) continue;
        dmax = std::max(dmax, std::abs(pr.values.values[i] - prev[i]));
      }
      diffs.push_back(dmax);
    }
    prev = pr.values.values;
  }
  for (std::size_t k = 1; k < diffs.size(); ++k)
    CHECK(diffs[k] <= diffs[k - 1] * (1 + 1e-9));
  double final_gap = 0;
  for (std::size_t i = 0; i < S.size(); ++i) {
    if (s.dom.signed_distance(grid->node(i)) < 4 * h) continue;
    final_gap = std::max(final_gap, std::abs(prev[i] - direct.values.values[i]));
  }
  CHECK(final_gap <= 10.0 * std::pow(h, 0.5) * (1 + direct.values.sup_norm()));
}

TEST_CASE("grid refinement: interior sup-difference shrinks") {
  Setup s;
  auto pb = single_control(1.0, 0.5, 0.5, [](Pt p) { return 1.0 / (1 + p.x * p.x); }, 1.0);
  double d64 = 0, d128 = 0;
  auto g_coarse = Grid::make(s.dom, 64);
  auto g_mid = Grid::make(s.dom, 128);
  auto g_fine = Grid::make(s.dom, 256);
  auto u_c = policy_iteration(assemble(s.dom, s.ker, pb, g_coarse, s.quad)).values;
  auto u_m = policy_iteration(assemble(s.dom, s.ker, pb, g_mid, s.quad)).values;
  auto u_f = policy_iteration(assemble(s.dom, s.ker, pb, g_fine, s.quad)).values;
  for (std::size_t i = 0; i < g_coarse->size(); ++i) {
    Pt x = g_coarse->node(i);
    if (s.dom.signed_distance(x) < 4 * g_coarse->h()) continue;
    d64 = std::max(d64, std::abs(u_c(x) - u_m(x)));
    d128 = std::max(d128, std::abs(u_m(x) - u_f(x)));
  }
  CHECK(d128 < d64);
}

TEST_CASE("value iteration: geometric residual decay within the contraction bound") {
  Setup s;
  auto pb = single_control(0.5, 1.0, 10.0, [](Pt p) { return std::sin(2 * p.x); }, 1.0);
  auto grid = Grid::make(s.dom, 48);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  auto r = value_iteration(S, 1e-10);
  REQUIRE(r.converged);
  const auto& hist = r.residual_history;
  REQUIRE(hist.size() >= 4);
  for (std::size_t k = 1; k < hist.size(); ++k)
    CHECK(hist[k] <= hist[k - 1] * (1 + 1e-9));
  // Gauss-Seidel contracts at least as fast as the Jacobi-type bound
  // rate <= max_i (offdiag mass) / diag = 1 - mu0-ish / diag_max
  double rate_bound = 0.0;
  for (std::size_t i = 0; i < S.size(); ++i) {
    double diag = S.lam_bar[i] + S.row_mass[i] + S.stencils[0][i].diag;
    rate_bound = std::max(rate_bound, (diag - S.lam_bar[i]) / diag);
  }
  std::size_t k0 = hist.size() / 2;
  double measured = std::pow(hist[hist.size() - 1] / hist[k0],
                             1.0 / double(hist.size() - 1 - k0));
  CHECK(measured <= rate_bound + 1e-6);
}

TEST_CASE("2D assembly: nonnegative weights, row identity, monotone solve") {
  auto cfg = ExperimentConfig::preset("mixed-disk");
  auto dom = cfg.make_domain();
  auto ker = cfg.make_kernel();
  auto pb = cfg.make_problem();
  QuadratureSpec quad = cfg.make_quadrature();
  quad.angular_nodes = 32;
  auto grid = Grid::make(dom, 12);
  auto S = assemble(dom, ker, pb, grid, quad);
  CHECK(S.W.minCoeff() >= 0.0);
  CHECK(S.m_holds);
  CHECK(S.mu0 > 0.0);
  std::vector<std::size_t> policy(S.size(), 0);
  Eigen::MatrixXd A;
  Eigen::VectorXd rhs;
  S.build_system(policy, A, rhs);
  for (std::size_t i = 0; i < S.size(); ++i) {
    const UpwindStencil& st = S.stencils[0][i];
    double cut = st.diag;
    for (int k = 0; k < st.ncols; ++k) cut -= st.coefs[k];
    CHECK(A.row(i).sum() == Catch::Approx(S.lam_bar[i] + cut).epsilon(1e-9));
  }
  auto r = policy_iteration(S);
  CHECK(r.converged);
  CHECK(r.bound_ok);
}

TEST_CASE("ellipse domain: assembly and solve end to end") {
  auto dom = Domain::ellipse({0.0, 0.0}, 1.6, 0.9);
  LevyKernel ker;
  ker.dim = 2;
  ker.alpha = 0.4;
  ker.Lambda = 1.0;
  ker.density = constant_density(1.0);
  QuadratureSpec quad;
  quad.angular_nodes = 32;
  ControlProblem pb;
  pb.controls.push_back(
      {"inward", [](Pt p) { return Pt{-0.5 * p.x, -0.5 * p.y}; }, [](Pt) { return 0.3; }});
  pb.controls.push_back({"drift", [](Pt) { return Pt{0.4, 0.1}; }, [](Pt) { return 0.6; }});
  pb.lambda = 0.5;
  pb.phi = [](Pt p) { return 0.5 / (1 + dot(p, p)); };
  pb.phi_sup = 0.5;
  pb.f_sup = 0.6;
  pb.lipschitz_b = 0.5;
  auto grid = Grid::make(dom, 14);
  auto S = assemble(dom, ker, pb, grid, quad);
  CHECK(S.W.minCoeff() >= 0.0);
  CHECK(S.m_holds);
  auto r = policy_iteration(S);
  REQUIRE(r.converged);
  CHECK(r.bound_ok);
  auto rv = value_iteration(S, 1e-9);
  double dmax = 0;
  for (std::size_t i = 0; i < S.size(); ++i)
    dmax = std::max(dmax, std::abs(r.values.values[i] - rv.values.values[i]));
  CHECK(dmax <= 1e-8);
}

TEST_CASE("assembled nonlocal row agrees with the split evaluator on the interpolant") {
  // two independent integration routes of the same piecewise-linear field:
  // exact hat-weight integrals (assembly) vs graded panels with the local
  // model (apply_censored); affine nodal data make the local model exact
  Setup s;
  auto pb = single_control(0.0, 0.0, 1.0, [](Pt) { return 0.0; }, 0.0);
  auto grid = Grid::make(s.dom, 80);
  auto S = assemble(s.dom, s.ker, pb, grid, s.quad);
  GridFunction u = make_grid_function(grid, [](Pt) { return 0.0; }, 0.0);
  for (std::size_t j = 0; j < grid->size(); ++j) u.values[j] = grid->node(j).x;

  for (std::size_t i : {std::size_t(3), std::size_t(40), std::size_t(76)}) {
    double row = 0.0;
    for (std::size_t j = 0; j < grid->size(); ++j)
      row += S.W(i, j) * (u.values[j] - u.values[i]);
    Pt x = grid->node(i);
    double d = s.dom.signed_distance(x);
    QuadraticModel m = fit_quadratic(*grid, u.values, i);
    double split = apply_censored(u, s.ker, s.dom, x, s.quad.inner_radius(grid->h(), d),
                                  m, s.quad);
    CHECK(row == Catch::Approx(split).margin(1e-8 * (1 + std::abs(split))));
  }
}

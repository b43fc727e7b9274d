// montecarlo.hpp
//
// Exit-time payoff estimation for the controlled jump SDE
//   dX_t = b(X_t, beta_t) dt + dZ_t,
// with Z the pure-jump Levy process of kernel K^alpha. Jumps below the
// cutoff rho are discarded (finite-variation regime alpha < 1); for
// asymmetric kernels their mean is restored as a drift compensator. Paths
// use Euler drift steps between jump epochs, exit is tested after every step
// and every jump, and the payoff accumulates with exact discount factors.
//
// Per-path RNG streams are derived from (seed, path index), so estimates are
// reproducible independent of evaluation order.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "nlb/geometry.hpp"
#include "nlb/grid.hpp"
#include "nlb/hamiltonian.hpp"
#include "nlb/kernel.hpp"

namespace nlb {

struct McConfig {
  std::size_t paths = 100000;
  double dt = 1e-3;
  double jump_cutoff = 0.01;  // rho: jumps below are discarded
  double t_max = 50.0;        // horizon cap
  std::uint64_t seed = 12345;
  bool antithetic = false;    // pairing, symmetric kernels only
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double mean_exit_time = 0.0;
  double fraction_capped = 0.0;
  std::size_t paths = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(path + 1)));
}

}  // namespace detail

// ============================================================================
// Jump sampling
// ============================================================================

/// Sampler for the compound-Poisson part |z| > rho: total intensity
/// Lambda_rho = int_{|z|>rho} K^alpha, exponential waiting times, inverse
/// transform radii for constant densities and Lambda-envelope rejection
/// otherwise.
class JumpSampler {
 public:
  JumpSampler(const LevyKernel& kernel, double rho, const QuadratureSpec& spec)
      : kernel_(kernel), rho_(rho) {
    if (!(rho > 0)) throw std::invalid_argument("JumpSampler: rho must be > 0");
    rays_ = detail::make_rays(kernel.dim, spec.angular_nodes);
    ray_mass_.resize(rays_.size());
    total_rate_ = 0.0;
    for (std::size_t j = 0; j < rays_.size(); ++j) {
      double m;
      if (kernel.density.is_constant) {
        m = kernel.density.constant_value * std::pow(rho, -kernel.alpha) / kernel.alpha;
      } else {
        auto f = [&](double r) {
          return kernel.density.eval(r * rays_[j].dir) * std::pow(r, -(1.0 + kernel.alpha));
        };
        m = detail::integrate_radial(f, rho, spec.truncation_radius,
                                     spec.panels_per_decade,
                                     kernel.density.radial_breaks) +
            detail::tail_beyond(kernel, spec, rays_[j].dir, spec.truncation_radius);
      }
      ray_mass_[j] = rays_[j].weight * m;
      total_rate_ += ray_mass_[j];
    }
    // mean of the discarded small jumps (zero for symmetric kernels)
    compensator_ = {0.0, 0.0};
    if (!kernel.density.symmetric) {
      for (const auto& ray : rays_) {
        auto f = [&](double r) {
          return r * kernel.density.eval(r * ray.dir) * std::pow(r, -(1.0 + kernel.alpha));
        };
        double m = detail::integrate_radial(f, rho * std::ldexp(1.0, -40), rho, 8,
                                            kernel.density.radial_breaks);
        compensator_ = compensator_ + (ray.weight * m) * ray.dir;
      }
    }
  }

  double total_rate() const { return total_rate_; }
  Pt compensator() const { return compensator_; }

  /// (waiting time, jump vector); infinite waiting time for a null kernel.
  std::pair<double, Pt> sample(std::mt19937_64& rng) const {
    if (total_rate_ <= 0.0)
      return {std::numeric_limits<double>::infinity(), Pt{0.0, 0.0}};
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double wait = -std::log1p(-uni(rng)) / total_rate_;

    Pt z;
    if (kernel_.density.is_constant) {
      z = propose(rng, uni);
    } else {
      // rejection against the Lambda envelope
      for (int it = 0; it < 100000; ++it) {
        Pt cand = propose(rng, uni);
        if (uni(rng) * kernel_.Lambda <= kernel_.density.eval(cand)) { z = cand; break; }
        if (it + 1 == 100000)
          throw std::runtime_error("JumpSampler: rejection sampling stalled");
      }
    }
    return {wait, z};
  }

 private:
  // proposal from the Lambda-envelope law: uniform direction, Pareto radius
  // with tail exponent alpha (the restricted K^alpha radial law)
  template <class Uni>
  Pt propose(std::mt19937_64& rng, Uni& uni) const {
    double r = rho_ * std::pow(1.0 - uni(rng), -1.0 / kernel_.alpha);
    Pt dir;
    if (kernel_.dim == 1) {
      dir = uni(rng) < 0.5 ? Pt{1.0, 0.0} : Pt{-1.0, 0.0};
    } else {
      double th = 2.0 * M_PI * uni(rng);
      dir = {std::cos(th), std::sin(th)};
    }
    return r * dir;
  }

  LevyKernel kernel_;
  double rho_;
  std::vector<detail::Ray> rays_;
  std::vector<double> ray_mass_;
  double total_rate_ = 0.0;
  Pt compensator_{0.0, 0.0};
};

/// Backward-compatible single-draw form of the sampler.
inline std::pair<double, Pt> sample_jump(const LevyKernel& kernel, double rho,
                                         std::mt19937_64& rng,
                                         const QuadratureSpec& spec = {}) {
  JumpSampler s(kernel, rho, spec);
  return s.sample(rng);
}

// ============================================================================
// Payoff simulation
// ============================================================================

/// Feedback policy from a solved policy field: nearest-node lookup.
inline std::function<std::size_t(Pt)> policy_lookup(std::shared_ptr<const Grid> grid,
                                                    std::vector<std::size_t> policy) {
  return [grid = std::move(grid), policy = std::move(policy)](Pt p) {
    return policy[std::size_t(grid->nearest_node(p))];
  };
}

inline std::function<std::size_t(Pt)> fixed_policy(std::size_t control) {
  return [control](Pt) { return control; };
}

namespace detail {

struct PathOutcome {
  double payoff = 0.0;
  double exit_time = 0.0;
  bool capped = false;
};

inline PathOutcome run_path(const Domain& domain, const ControlProblem& pb,
                            const std::function<std::size_t(Pt)>& policy, Pt x0,
                            const McConfig& cfg, const JumpSampler& sampler,
                            std::mt19937_64& rng, bool mirror_jumps) {
  PathOutcome out;
  double lambda = pb.lambda;
  Pt comp = sampler.compensator();
  Pt x = x0;
  double t = 0.0;

  auto running_cost = [&](double f, double t_start, double step) {
    if (lambda > 0.0)
      return f * std::exp(-lambda * t_start) * (1.0 - std::exp(-lambda * step)) / lambda;
    return f * step;
  };

  while (true) {
    auto [wait, z] = sampler.sample(rng);
    if (mirror_jumps) z = {-z.x, -z.y};
    double t_jump = t + wait;
    double t_stop = std::min(t_jump, cfg.t_max);
    bool exited = false;
    while (t < t_stop) {
      double step = std::min(cfg.dt, t_stop - t);
      std::size_t c = policy(x);
      Pt b = pb.drift(x, c) + comp;
      out.payoff += running_cost(pb.cost(x, c), t, step);
      x = x + step * b;
      t += step;
      if (domain.signed_distance(x) <= 0.0) {
        out.payoff += std::exp(-lambda * t) * pb.phi(x);
        out.exit_time = t;
        exited = true;
        break;
      }
    }
    if (exited) break;
    if (t >= cfg.t_max) {
      out.capped = true;
      out.exit_time = cfg.t_max;
      break;
    }
    x = x + z;
    if (domain.signed_distance(x) <= 0.0) {
      out.payoff += std::exp(-lambda * t) * pb.phi(x);
      out.exit_time = t;
      break;
    }
  }
  return out;
}

}  // namespace detail

/// Monte Carlo estimate of the exit-time payoff
///   E_x [ int_0^tau f(X_s) e^{-lambda s} ds + phi(X_tau) e^{-lambda tau} ]
/// under the given feedback policy.
inline McEstimate simulate_payoff(const Domain& domain, const LevyKernel& kernel,
                                  const ControlProblem& problem,
                                  const std::function<std::size_t(Pt)>& policy, Pt x0,
                                  const McConfig& cfg, const QuadratureSpec& spec = {}) {
  if (!(domain.signed_distance(x0) > 0))
    throw std::invalid_argument("simulate_payoff: x0 must be interior");
  if (cfg.paths < 1) throw std::invalid_argument("simulate_payoff: paths >= 1");
  if (cfg.antithetic && !kernel.density.symmetric)
    throw std::invalid_argument("simulate_payoff: antithetic pairing needs a symmetric kernel");

  JumpSampler sampler(kernel, cfg.jump_cutoff, spec);
  McEstimate est;
  double sum = 0.0, sum_sq = 0.0, sum_exit = 0.0;
  std::size_t capped = 0;

  if (!cfg.antithetic) {
    for (std::size_t p = 0; p < cfg.paths; ++p) {
      auto rng = detail::path_rng(cfg.seed, p);
      auto o = detail::run_path(domain, problem, policy, x0, cfg, sampler, rng, false);
      sum += o.payoff;
      sum_sq += o.payoff * o.payoff;
      sum_exit += o.exit_time;
      capped += o.capped ? 1 : 0;
    }
    est.paths = cfg.paths;
    est.mean = sum / double(cfg.paths);
    double var = std::max(0.0, sum_sq / double(cfg.paths) - est.mean * est.mean);
    est.std_error = std::sqrt(var / double(cfg.paths));
    est.mean_exit_time = sum_exit / double(cfg.paths);
    est.fraction_capped = double(capped) / double(cfg.paths);
    return est;
  }

  std::size_t pairs = (cfg.paths + 1) / 2;
  for (std::size_t p = 0; p < pairs; ++p) {
    auto rng_a = detail::path_rng(cfg.seed, p);
    auto rng_b = detail::path_rng(cfg.seed, p);  // same stream, mirrored jumps
    auto oa = detail::run_path(domain, problem, policy, x0, cfg, sampler, rng_a, false);
    auto ob = detail::run_path(domain, problem, policy, x0, cfg, sampler, rng_b, true);
    double v = 0.5 * (oa.payoff + ob.payoff);
    sum += v;
    sum_sq += v * v;
    sum_exit += 0.5 * (oa.exit_time + ob.exit_time);
    capped += (oa.capped ? 1 : 0) + (ob.capped ? 1 : 0);
  }
  est.paths = 2 * pairs;
  est.mean = sum / double(pairs);
  double var = std::max(0.0, sum_sq / double(pairs) - est.mean * est.mean);
  est.std_error = std::sqrt(var / double(pairs));
  est.mean_exit_time = sum_exit / double(pairs);
  est.fraction_capped = double(capped) / double(2 * pairs);
  return est;
}

}  // namespace nlb

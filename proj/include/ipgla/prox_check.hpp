#pragma once

// Standalone self-check of the inexact prox evaluators against independent references:
// closed-form 1D endpoints on a dense grid, and certified TV / l1 prox points against a
// slow plain projected-gradient solve of the same subproblem.

#include <cmath>
#include <string>
#include <vector>

#include "ipgla/core.hpp"
#include "ipgla/inexact_prox.hpp"
#include "ipgla/linops.hpp"
#include "ipgla/potentials.hpp"
#include "ipgla/rng.hpp"

namespace ipgla {

/// Plain projected gradient (step 1/8) on the ROF dual for a fixed iteration count.
inline Vec rof_reference(ConstView y, Shape s, double mu, double gamma, int iterations) {
  const std::size_t n = s.size();
  const double r = mu * gamma;
  Vec wh(n, 0.0), wv(n, 0.0), x(n), gh(n), gv(n);
  auto primal = [&] {
    grad_adjoint(s, wh, wv, x);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] - x[i];
  };
  for (int it = 0; it < iterations; ++it) {
    primal();
    grad_apply(s, x, gh, gv);
    for (std::size_t i = 0; i < n; ++i) {
      wh[i] += gh[i] / kGradNormSqBound;
      wv[i] += gv[i] / kGradNormSqBound;
      const double m = std::hypot(wh[i], wv[i]);
      if (m > r) {
        wh[i] *= r / m;
        wv[i] *= r / m;
      }
    }
  }
  primal();
  return x;
}

/// mu TV(x) + ||x - y||^2 / (2 gamma).
inline double tv_prox_objective(ConstView x, ConstView y, Shape s, double mu, double gamma) {
  return mu * total_variation(s, x) + squared_distance(x, y) / (2.0 * gamma);
}

struct ProxCheckRow {
  std::string check;
  std::size_t trials = 0;
  std::size_t passed = 0;
  /// Largest violation over failed trials (0 if none).
  double worst_violation = 0.0;
  bool ok() const { return passed == trials; }
};

struct ProxCheckParams {
  std::size_t abs_trials = 1000;
  std::size_t abs_grid = 10000;
  std::size_t tv_trials = 1000;
  std::size_t tv_size = 16;
  std::size_t oracle_trials = 5;
  int oracle_iterations = 1000000;
  std::uint64_t seed = 1;
};

inline std::vector<ProxCheckRow> run_prox_check(const ProxCheckParams& p) {
  std::vector<ProxCheckRow> rows;
  Rng rng(p.seed);

  // 1D endpoints: members at eps, and (interior endpoints only) not members at eps/10.
  {
    ProxCheckRow at{"abs_endpoint_at_eps"}, tenth{"abs_endpoint_fails_at_eps_over_10"};
    for (std::size_t t = 0; t < p.abs_trials; ++t) {
      const double x = 6.0 * rng.uniform() - 3.0, tau = 0.05 + 1.95 * rng.uniform();
      const double eps = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
      const double u = inexact_prox_abs(x, tau, eps, InexactSelector::upper);
      const double pslope = (x - u) / tau;
      Vec grid(p.abs_grid);
      const double lo = std::min(-10.0, u - 10.0), hi = std::max(10.0, u + 10.0);
      for (std::size_t i = 0; i < grid.size(); ++i)
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid.size() - 1);
      grid.push_back(0.0);
      grid.push_back(u);
      const auto G = [](double v) { return std::abs(v); };
      ++at.trials;
      if (eps_subgradient_check_1d(G, u, pslope, eps, grid)) ++at.passed;
      // Endpoints clipped at x + tau are exact prox points of a shifted problem, not tight.
      if (u < x + tau && u > 0.0) {
        ++tenth.trials;
        if (!eps_subgradient_check_1d(G, u, pslope, eps / 10.0, grid)) ++tenth.passed;
      }
    }
    rows.push_back(at);
    rows.push_back(tenth);
  }

  // Certified TV prox on random images: reported gap within the target.
  {
    ProxCheckRow row{"tv_certified_gap"};
    const Shape s{p.tv_size, p.tv_size};
    for (std::size_t t = 0; t < p.tv_trials; ++t) {
      Vec y(s.size());
      for (double& v : y) v = rng.uniform() + 0.3 * rng.normal();
      const double mu = 0.1 + 2.0 * rng.uniform(), gamma = 0.01 + rng.uniform();
      const double c0 = mu * total_variation(s, y);
      const double eps = c0 * std::pow(10.0, -4.0 + 3.0 * rng.uniform());
      const auto cert = inexact_prox_tv(y, s, mu, gamma, eps);
      ++row.trials;
      if (cert.certified && *cert.gap_achieved <= eps) {
        ++row.passed;
      } else {
        row.worst_violation = std::max(row.worst_violation, *cert.gap_achieved - eps);
      }
    }
    rows.push_back(row);
  }

  // Objective suboptimality of certified points against the slow reference on 4x4.
  {
    ProxCheckRow row{"tv_objective_vs_reference"};
    const Shape s{4, 4};
    for (std::size_t t = 0; t < p.oracle_trials; ++t) {
      Vec y(s.size());
      for (double& v : y) v = rng.normal();
      const double mu = 0.2 + rng.uniform(), gamma = 0.1 + rng.uniform();
      const double eps = 1e-3 * mu * total_variation(s, y);
      const auto cert = inexact_prox_tv(y, s, mu, gamma, eps);
      const Vec ref = rof_reference(y, s, mu, gamma, p.oracle_iterations);
      const double excess =
          tv_prox_objective(cert.point, y, s, mu, gamma) - tv_prox_objective(ref, y, s, mu, gamma) - eps - 1e-8;
      ++row.trials;
      if (excess <= 0.0) {
        ++row.passed;
      } else {
        row.worst_violation = std::max(row.worst_violation, excess);
      }
    }
    rows.push_back(row);
  }

  // l1 dual prox: certified points satisfy the eps-subgradient inequality for all v.
  {
    ProxCheckRow row{"l1_certified_gap"};
    for (std::size_t t = 0; t < p.abs_trials; ++t) {
      Vec y(8);
      for (double& v : y) v = 2.0 * rng.normal();
      const double mu = 0.1 + rng.uniform(), gamma = 0.05 + rng.uniform();
      const double eps = std::pow(10.0, -4.0 + 3.0 * rng.uniform());
      const auto cert = inexact_prox_l1_dual(y, mu, gamma, eps);
      // Type-2 check: mu||v||_1 >= mu||x||_1 + <(y - x)/gamma, v - x> - eps for all v; the
      // worst v is found coordinate-wise in closed form.
      double slack = 0.0;
      bool bounded = true;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double x = cert.point[i], q = (y[i] - x) / gamma;
        if (std::abs(q) > mu * (1.0 + 1e-12)) bounded = false;
        slack += mu * std::abs(x) - q * x;  // min over v of mu|v| - q v is 0 for |q| <= mu
      }
      ++row.trials;
      if (bounded && slack <= eps * (1.0 + 1e-9) + 1e-14) {
        ++row.passed;
      } else {
        row.worst_violation = std::max(row.worst_violation, slack - eps);
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ipgla

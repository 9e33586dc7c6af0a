#pragma once

// Step-size and accuracy schedules for the inexact proximal Langevin chain.

#include <algorithm>
#include <cmath>
#include <variant>

#include "ipgla/core.hpp"
#include "ipgla/inexact_prox.hpp"
#include "ipgla/potentials.hpp"

namespace ipgla {

/// Evaluates F(x - gamma grad F(x)) - F(x) + gamma/2 ||grad F(x)||^2 at a single point.
/// Returns +inf when x or the trial point leaves dom F.
inline double descent_gap(const SmoothPotential& F, ConstView x, double gamma, double* fx_out = nullptr) {
  const double fx = F.value(x);
  if (fx_out) *fx_out = fx;
  if (!std::isfinite(fx)) return kInf;
  const Vec g = F.gradient(x);
  Vec trial(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - gamma * g[i];
  const double ft = F.value(trial);
  if (!std::isfinite(ft)) return kInf;
  return ft - fx + 0.5 * gamma * dot(g, g);
}

/// Pointwise descent condition. The 1e-12 threshold is scaled by max(1, |F(x)|) so that
/// rounding in F does not decide the outcome for large potentials.
inline bool check_descent(const SmoothPotential& F, ConstView x, double gamma) {
  double fx = 0.0;
  const double q = descent_gap(F, x, gamma, &fx);
  if (!std::isfinite(q)) return false;
  return q <= 1e-12 * std::max(1.0, std::abs(fx));
}

inline constexpr double kGammaMin = 1e-15;

/// Two-way backtracking: start at min(grow * gamma_prev, gamma_max) and shrink until the
/// descent condition holds at x.
inline double backtracking_gamma(const SmoothPotential& F, ConstView x, double gamma_prev, double shrink, double grow,
                                 double gamma_max) {
  require(shrink > 0.0 && shrink < 1.0 && grow > 1.0, "backtracking_gamma: need 0 < shrink < 1 < grow");
  require(gamma_prev > 0.0 && gamma_max > 0.0, "backtracking_gamma: step sizes must be positive");
  double gamma = std::min(grow * gamma_prev, gamma_max);
  while (!check_descent(F, x, gamma)) {
    gamma *= shrink;
    if (gamma < kGammaMin) throw NumericalFailure("backtracking_gamma: step size underflow below 1e-15");
  }
  return gamma;
}

struct FixedStep {
  double gamma;
};

/// gamma_0 = 1/L, gamma_k = min{gamma_{k-1}, max{C'/k, gamma_{k-1}/(1 + lambda_F)}}.
struct DecayingStep {
  double c_prime;
  double lambda_F;
  double L;
};

struct BacktrackingStep {
  double gamma_init;
  double shrink = 0.5;
  double grow = 1.25;
  double gamma_max = kInf;
};

using StepSchedule = std::variant<FixedStep, DecayingStep, BacktrackingStep>;

inline void validate(const StepSchedule& s, double lipschitz = 0.0) {
  if (const auto* f = std::get_if<FixedStep>(&s)) {
    require(f->gamma > 0.0, "FixedStep: gamma must be positive");
    if (lipschitz > 0.0) require(f->gamma <= 1.0 / lipschitz * (1.0 + 1e-12), "FixedStep: gamma must not exceed 1/L");
  } else if (const auto* d = std::get_if<DecayingStep>(&s)) {
    require(d->lambda_F > 0.0 && d->L > 0.0, "DecayingStep: need lambda_F > 0 and L > 0");
    require(d->c_prime >= 1.0 / d->lambda_F * (1.0 - 1e-12), "DecayingStep: C' must be >= 1/lambda_F");
  } else {
    const auto& b = std::get<BacktrackingStep>(s);
    require(b.gamma_init > 0.0, "BacktrackingStep: initial gamma must be positive");
    require(b.shrink > 0.0 && b.shrink < 1.0 && b.grow > 1.0, "BacktrackingStep: need 0 < shrink < 1 < grow");
  }
}

/// Step size for iteration k. `gamma_prev` is gamma_{k-1} (ignored at k = 0).
inline double schedule_next_gamma(const StepSchedule& s, std::size_t k, double gamma_prev, const SmoothPotential* F,
                                  ConstView x) {
  if (const auto* f = std::get_if<FixedStep>(&s)) return f->gamma;
  if (const auto* d = std::get_if<DecayingStep>(&s)) {
    if (k == 0) return 1.0 / d->L;
    const double decay = d->c_prime / static_cast<double>(k);
    return std::min(gamma_prev, std::max(decay, gamma_prev / (1.0 + d->lambda_F)));
  }
  const auto& b = std::get<BacktrackingStep>(s);
  if (F == nullptr) throw std::invalid_argument("schedule_next_gamma: backtracking needs the smooth potential");
  const double start = k == 0 ? b.gamma_init / b.grow : gamma_prev;
  return backtracking_gamma(*F, x, start, b.shrink, b.grow, b.gamma_max);
}

// ---------------------------------------------------------------------------

struct FixedEps {
  double eps;
};

/// eps_k = c (k + 1)^{-beta}; shifted by one so that k = 0 is defined.
struct PowerDecayEps {
  double c;
  double beta;
};

struct BudgetEps {
  int iterations;
};

/// eps = C0 * eps_tilde with C0 the duality gap of the first prox input at z = 0.
struct RelativeGapEps {
  double eps_tilde;
};

using ErrorSchedule = std::variant<FixedEps, PowerDecayEps, BudgetEps, RelativeGapEps>;

inline void validate(const ErrorSchedule& e) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, FixedEps>) require(v.eps >= 0.0, "FixedEps: eps must be >= 0");
        if constexpr (std::is_same_v<T, PowerDecayEps>)
          require(v.c >= 0.0 && v.beta > 0.0, "PowerDecayEps: need c >= 0 and beta > 0");
        if constexpr (std::is_same_v<T, BudgetEps>) require(v.iterations >= 1, "BudgetEps: need >= 1 iteration");
        if constexpr (std::is_same_v<T, RelativeGapEps>) require(v.eps_tilde >= 0.0, "RelativeGapEps: need eps >= 0");
      },
      e);
}

/// Accuracy request for iteration k. `c0` is only read for RelativeGapEps.
inline Accuracy schedule_accuracy(const ErrorSchedule& e, std::size_t k, double c0) {
  if (const auto* f = std::get_if<FixedEps>(&e)) return TargetEpsilon{f->eps};
  if (const auto* p = std::get_if<PowerDecayEps>(&e))
    return TargetEpsilon{p->c * std::pow(static_cast<double>(k + 1), -p->beta)};
  if (const auto* b = std::get_if<BudgetEps>(&e)) return InnerBudget{b->iterations};
  return TargetEpsilon{c0 * std::get<RelativeGapEps>(e).eps_tilde};
}

}  // namespace ipgla

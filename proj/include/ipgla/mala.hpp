#pragma once

// Metropolis-adjusted Langevin reference sampler for V = F + G.

#include <cmath>
#include <string>
#include <utility>

#include "ipgla/core.hpp"
#include "ipgla/potentials.hpp"
#include "ipgla/rng.hpp"
#include "ipgla/sampler.hpp"

namespace ipgla {

struct MalaDiagnostics {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const {
    return proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
  }
};

/// V = F + G with drift grad F + (a subgradient selection of G).
struct LangevinTarget {
  const SmoothPotential& F;
  const NonsmoothPotential& G;

  double value(ConstView x) const {
    const double g = G.value(x);
    if (!std::isfinite(g)) return kInf;
    const double f = F.value(x);
    return std::isfinite(f) ? f + g : kInf;
  }

  void drift(ConstView x, MutView out) const {
    F.gradient(x, out);
    Vec s(x.size());
    G.subgradient(x, s);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s[i];
  }
};

struct MalaState {
  Vec position;
  Rng rng;
  double value = kInf;  // V(position), cached
  Vec drift;            // drift at position, cached
};

/// log of the Metropolis-Hastings ratio for a move x -> x_prop with Langevin proposals
/// q(b | a) proportional to exp(-||b - a + gamma d(a)||^2 / (4 gamma)). -inf outside the domain.
inline double mala_log_acceptance(double v_x, ConstView drift_x, ConstView x, double v_prop, ConstView drift_prop,
                                  ConstView x_prop, double gamma) {
  if (!std::isfinite(v_prop)) return -kInf;
  double fwd = 0.0, bwd = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x_prop[i] - x[i] + gamma * drift_x[i];
    const double b = x[i] - x_prop[i] + gamma * drift_prop[i];
    fwd += a * a;
    bwd += b * b;
  }
  return (v_x - v_prop) + (fwd - bwd) / (4.0 * gamma);
}

inline void mala_init(MalaState& st, const LangevinTarget& V) {
  st.value = V.value(st.position);
  require(std::isfinite(st.value), "mala: V must be finite at the initial state");
  st.drift.assign(st.position.size(), 0.0);
  V.drift(st.position, st.drift);
}

/// One MALA transition; returns whether the proposal was accepted. On rejection the state
/// is left bitwise unchanged apart from the generator.
inline bool mala_step(MalaState& st, const LangevinTarget& V, double gamma) {
  require(gamma > 0.0, "mala_step: gamma must be positive");
  if (st.drift.size() != st.position.size()) mala_init(st, V);
  const std::size_t d = st.position.size();
  const double noise = std::sqrt(2.0 * gamma);
  Vec prop(d);
  for (std::size_t i = 0; i < d; ++i) prop[i] = st.position[i] - gamma * st.drift[i] + noise * st.rng.normal();
  const double u = st.rng.uniform();

  const double v_prop = V.value(prop);
  if (!std::isfinite(v_prop)) return false;
  Vec drift_prop(d);
  try {
    V.drift(prop, drift_prop);
  } catch (const DomainError&) {
    return false;
  }
  const double log_alpha = mala_log_acceptance(st.value, st.drift, st.position, v_prop, drift_prop, prop, gamma);
  if (std::log(u) < log_alpha) {
    st.position = std::move(prop);
    st.value = v_prop;
    st.drift = std::move(drift_prop);
    return true;
  }
  return false;
}

/// MALA chain with the same sink interface as run_chain.
inline std::pair<ChainOutput, MalaDiagnostics> run_mala_chain(const ChainConfig& cfg, const LangevinTarget& V,
                                                              double gamma, std::span<SampleSink* const> sinks = {}) {
  require(cfg.n_samples >= 1, "run_mala_chain: n_samples must be >= 1");
  require(cfg.initial.size() == V.F.dimension(), "run_mala_chain: initial point has wrong dimension");
  MalaState st;
  st.position = cfg.initial;
  st.rng = Rng(cfg.seed);
  mala_init(st, V);

  ChainOutput out;
  out.seed = cfg.seed;
  out.moments = RunningMoments(st.position.size());
  MalaDiagnostics diag, early;
  StepDiagnostics step;
  step.gamma = gamma;
  const std::size_t total = cfg.burn_in + cfg.n_samples;
  for (std::size_t k = 0; k < total; ++k) {
    const bool acc = mala_step(st, V, gamma);
    ++diag.proposals;
    diag.accepted += acc ? 1 : 0;
    if (k < 10000) {
      ++early.proposals;
      early.accepted += acc ? 1 : 0;
    }
    if (k < cfg.burn_in) continue;
    out.moments.update(st.position);
    out.gamma_sum += gamma;
    for (SampleSink* s : sinks) s->consume(k - cfg.burn_in + 1, st.position, step);
  }
  out.iterations = total;
  out.final_position = st.position;
  if (early.proposals >= std::min<std::size_t>(total, 10000) && early.acceptance_rate() < 0.01)
    out.warnings.push_back("MALA acceptance rate below 1% over the first " + std::to_string(early.proposals) +
                           " steps; reduce the step size");
  return {std::move(out), diag};
}

}  // namespace ipgla

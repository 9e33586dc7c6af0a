#pragma once

/**
 * @file sampler.hpp
 * @brief Inexact proximal gradient Langevin chain.
 *
 * One iteration maps X^k to
 *   X^{k+1/3} = X^k - gamma_k grad F(X^k)
 *   X^{k+2/3} = X^{k+1/3} + sqrt(2 gamma_k) xi,   xi ~ N(0, I)
 *   X^{k+1}   = eps_k-approximation of prox_{gamma_k G}(X^{k+2/3})
 * With G = 0 this is the unadjusted Langevin algorithm.
 */

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ipgla/core.hpp"
#include "ipgla/inexact_prox.hpp"
#include "ipgla/metrics.hpp"
#include "ipgla/potentials.hpp"
#include "ipgla/rng.hpp"
#include "ipgla/schedules.hpp"

namespace ipgla {

struct ChainState {
  Vec position;
  std::size_t iteration = 0;
  Rng rng;
  WarmStart warm;
  double gamma_prev = 0.0;
  /// Reference gap C0, set on the first iteration that needs it.
  std::optional<double> c0;
};

struct StepDiagnostics {
  double gamma = 0.0;
  Accuracy accuracy;
  ProxCertificate certificate;
};

/// One inexact proximal Langevin step with step size gamma and prox accuracy `accuracy`.
/// On a prox failure the exception propagates and state.position is left untouched.
inline StepDiagnostics ipgla_step(ChainState& state, const SmoothPotential& F, const ProxProvider& G, double gamma,
                                  const Accuracy& accuracy) {
  require(gamma > 0.0, "ipgla_step: gamma must be positive");
  const std::size_t d = state.position.size();
  Vec y(d);
  F.gradient(state.position, y);
  const double noise = std::sqrt(2.0 * gamma);
  for (std::size_t i = 0; i < d; ++i) y[i] = state.position[i] - gamma * y[i] + noise * state.rng.normal();

  StepDiagnostics diag;
  diag.gamma = gamma;
  diag.accuracy = accuracy;
  diag.certificate = G.prox(ProxRequest{y, gamma, accuracy}, &state.warm);
  if (!all_finite(diag.certificate.point)) throw NumericalFailure("ipgla_step: prox returned non-finite values");
  state.position = diag.certificate.point;
  ++state.iteration;
  state.gamma_prev = gamma;
  return diag;
}

/// Statistic consumer for post-burn-in samples; k counts samples from 1.
class SampleSink {
 public:
  virtual ~SampleSink() = default;
  virtual void consume(std::size_t k, ConstView sample, const StepDiagnostics& diag) = 0;
};

/// Keeps every `stride`-th sample.
class ThinnedSamples final : public SampleSink {
 public:
  explicit ThinnedSamples(std::size_t stride) : stride_(std::max<std::size_t>(stride, 1)) {}
  void consume(std::size_t k, ConstView x, const StepDiagnostics&) override {
    if (k % stride_ == 0) samples.emplace_back(x.begin(), x.end());
  }
  std::vector<Vec> samples;

 private:
  std::size_t stride_;
};

/// Records a scalar functional of each sample (e.g. a pixel value for ACF analysis).
class ScalarTrace final : public SampleSink {
 public:
  explicit ScalarTrace(std::function<double(ConstView)> f) : f_(std::move(f)) {}
  void consume(std::size_t, ConstView x, const StepDiagnostics&) override { values.push_back(f_(x)); }
  Vec values;

 private:
  std::function<double(ConstView)> f_;
};

struct ChainConfig {
  std::uint64_t seed = 0;
  std::size_t burn_in = 0;
  std::size_t n_samples = 1;
  Vec initial;
  /// Abort after this many consecutive uncertified or failed prox calls (0 = never).
  std::size_t max_consecutive_failures = 0;
  /// Keep the post-burn-in step sizes in ChainOutput::gammas.
  bool record_gammas = false;
};

struct ChainOutput {
  RunningMoments moments;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  long long inner_iterations_total = 0;     // post-burn-in
  long long inner_iterations_burn_in = 0;
  std::size_t uncertified_prox = 0;
  double gamma_sum = 0.0;                  // post-burn-in
  std::optional<double> c0;
  Vec final_position;
  Vec gammas;
  std::vector<std::string> warnings;

  double mean_gamma() const { return moments.count() ? gamma_sum / static_cast<double>(moments.count()) : 0.0; }
  double mean_inner_iterations() const {
    return moments.count() ? static_cast<double>(inner_iterations_total) / static_cast<double>(moments.count()) : 0.0;
  }
};

namespace detail {

inline Accuracy accuracy_for(const ErrorSchedule& errors, ChainState& st, const SmoothPotential& F,
                             const ProxProvider& G, double gamma) {
  if (std::holds_alternative<RelativeGapEps>(errors) && !st.c0) {
    // C0 = gap(X^{0+2/3}, 0) = G(X^{0+2/3}), evaluated on a copy of the generator so the
    // chain's noise sequence is unaffected.
    Rng probe = st.rng;
    Vec y = F.gradient(st.position);
    const double noise = std::sqrt(2.0 * gamma);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = st.position[i] - gamma * y[i] + noise * probe.normal();
    st.c0 = G.reference_gap(y);
  }
  return schedule_accuracy(errors, st.iteration, st.c0.value_or(0.0));
}

}  // namespace detail

/// Burn-in followed by n_samples iterations; every post-burn-in sample is streamed to the
/// sinks and to the running moments. Deterministic given the configuration.
inline ChainOutput run_chain(const ChainConfig& cfg, const SmoothPotential& F, const ProxProvider& G,
                             const StepSchedule& steps, const ErrorSchedule& errors,
                             std::span<SampleSink* const> sinks = {}) {
  require(cfg.n_samples >= 1, "run_chain: n_samples must be >= 1");
  require(cfg.initial.size() == F.dimension(), "run_chain: initial point has wrong dimension");
  validate(steps);
  validate(errors);

  ChainState st;
  st.position = cfg.initial;
  st.rng = Rng(cfg.seed);

  ChainOutput out;
  out.seed = cfg.seed;
  out.moments = RunningMoments(F.dimension());
  std::size_t consecutive_failures = 0;
  const std::size_t total = cfg.burn_in + cfg.n_samples;
  for (std::size_t k = 0; k < total; ++k) {
    const double gamma = schedule_next_gamma(steps, k, st.gamma_prev, &F, st.position);
    const Accuracy acc = detail::accuracy_for(errors, st, F, G, gamma);
    StepDiagnostics diag;
    try {
      diag = ipgla_step(st, F, G, gamma, acc);
    } catch (const DomainError& e) {
      throw NumericalFailure(std::string("run_chain: iteration ") + std::to_string(k) + ": " + e.what());
    }
    if (!diag.certificate.certified) {
      ++out.uncertified_prox;
      ++consecutive_failures;
      if (cfg.max_consecutive_failures > 0 && consecutive_failures >= cfg.max_consecutive_failures)
        throw NumericalFailure("run_chain: too many consecutive uncertified prox evaluations");
    } else {
      consecutive_failures = 0;
    }
    if (k < cfg.burn_in) {
      out.inner_iterations_burn_in += diag.certificate.inner_iterations;
      continue;
    }
    const std::size_t sample_index = k - cfg.burn_in + 1;
    out.moments.update(st.position);
    out.inner_iterations_total += diag.certificate.inner_iterations;
    out.gamma_sum += gamma;
    if (cfg.record_gammas) out.gammas.push_back(gamma);
    for (SampleSink* s : sinks) s->consume(sample_index, st.position, diag);
  }
  out.iterations = total;
  out.c0 = st.c0;
  out.final_position = st.position;
  if (out.uncertified_prox > 0)
    out.warnings.push_back(std::to_string(out.uncertified_prox) +
                           " prox evaluations exhausted their inner budget before reaching the target gap");
  return out;
}

/// Runs m independent chains with seeds derive_seed(base_seed, i). `make_sinks(i)` may
/// return chain-local sinks (or an empty list). Results are ordered by chain index.
inline std::vector<ChainOutput> run_parallel_chains(
    std::size_t m, std::uint64_t base_seed, ChainConfig cfg, const SmoothPotential& F, const ProxProvider& G,
    const StepSchedule& steps, const ErrorSchedule& errors,
    const std::function<std::vector<SampleSink*>(std::size_t)>& make_sinks = {}, unsigned threads = 0) {
  require(m >= 1, "run_parallel_chains: need at least one chain");
  std::vector<ChainOutput> results(m);
  std::vector<std::exception_ptr> errs(m);
  auto work = [&](std::size_t i) {
    try {
      ChainConfig c = cfg;
      c.seed = derive_seed(base_seed, i);
      std::vector<SampleSink*> sinks = make_sinks ? make_sinks(i) : std::vector<SampleSink*>{};
      results[i] = run_chain(c, F, G, steps, errors, sinks);
    } catch (...) {
      errs[i] = std::current_exception();
    }
  };
  const unsigned hw = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  const std::size_t nthreads = std::min<std::size_t>(hw, m);
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < m; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < m; i += nthreads) work(i);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return results;
}

/// Ensemble of m chains started from draws of `init(rng)`; returns, for each checkpoint
/// iteration k (1-based, k <= max checkpoint), the m chain positions (d = 1) at that k.
/// Used to estimate the marginal law of X^k.
inline std::vector<Vec> run_ensemble_1d(std::size_t m, std::uint64_t base_seed,
                                        const std::function<double(Rng&)>& init, const SmoothPotential& F,
                                        const ProxProvider& G, const StepSchedule& steps, const ErrorSchedule& errors,
                                        const std::vector<std::size_t>& checkpoints) {
  require(m >= 1 && !checkpoints.empty(), "run_ensemble_1d: need chains and checkpoints");
  require(F.dimension() == 1, "run_ensemble_1d: one-dimensional targets only");
  validate(steps);
  validate(errors);
  const std::size_t K = *std::max_element(checkpoints.begin(), checkpoints.end());
  std::vector<Vec> marginals(checkpoints.size(), Vec(m));
  for (std::size_t i = 0; i < m; ++i) {
    ChainState st;
    st.rng = Rng(derive_seed(base_seed, i));
    st.position = {init(st.rng)};
    for (std::size_t k = 0; k < K; ++k) {
      const double gamma = schedule_next_gamma(steps, k, st.gamma_prev, &F, st.position);
      const Accuracy acc = detail::accuracy_for(errors, st, F, G, gamma);
      ipgla_step(st, F, G, gamma, acc);
      for (std::size_t c = 0; c < checkpoints.size(); ++c)
        if (checkpoints[c] == k + 1) marginals[c][i] = st.position[0];
    }
  }
  return marginals;
}

}  // namespace ipgla

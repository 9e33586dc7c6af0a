#pragma once

// Desk-scale experiment drivers: 1D toy Wasserstein study, wavelet and TV imaging
// posteriors, Poisson deblurring. Drivers compute results in memory; file output is left
// to the caller.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ipgla/core.hpp"
#include "ipgla/image.hpp"
#include "ipgla/inexact_prox.hpp"
#include "ipgla/linops.hpp"
#include "ipgla/mala.hpp"
#include "ipgla/metrics.hpp"
#include "ipgla/potentials.hpp"
#include "ipgla/rng.hpp"
#include "ipgla/sampler.hpp"
#include "ipgla/schedules.hpp"
#include "ipgla/sinks.hpp"

namespace ipgla::experiments {

// Seed streams derived from the run seed.
inline constexpr std::uint64_t kDataStream = 0;
inline constexpr std::uint64_t kChainStream = 1;
inline constexpr std::uint64_t kReferenceStream = 2;
inline constexpr std::uint64_t kEnsembleStream = 3;

/// Runs fn(0..n-1) on up to `threads` workers (0 = hardware concurrency); rethrows the
/// first failure in index order.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = 0) {
  std::vector<std::exception_ptr> errs(n);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errs[i] = std::current_exception();
    }
  };
  const unsigned hw = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(hw, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += workers) guarded(i);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Synthetic phantom

/// Piecewise-constant test image in [0, 1]: a large disk, smaller disks and rectangles on
/// a dark background. Coordinates are relative, so any size works.
inline ImageBuffer make_phantom(std::size_t n) {
  require(n >= 8, "make_phantom: size must be at least 8");
  ImageBuffer img(Shape{n, n}, 0.05);
  struct Disk {
    double r0, c0, radius, value;
  };
  struct Rect {
    double r0, c0, r1, c1, value;
  };
  const Disk disks_below[] = {{0.5, 0.5, 0.42, 0.35}};
  const Rect rects[] = {{0.58, 0.28, 0.78, 0.52, 0.75}, {0.18, 0.42, 0.3, 0.72, 0.9}};
  const Disk disks_above[] = {{0.42, 0.34, 0.11, 1.0}, {0.62, 0.7, 0.08, 0.6}, {0.36, 0.66, 0.05, 0.15}};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double r = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      const double c = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
      double v = img(i, j);
      for (const auto& d : disks_below)
        if (std::hypot(r - d.r0, c - d.c0) <= d.radius) v = d.value;
      for (const auto& q : rects)
        if (r >= q.r0 && r <= q.r1 && c >= q.c0 && c <= q.c1) v = q.value;
      for (const auto& d : disks_above)
        if (std::hypot(r - d.r0, c - d.c0) <= d.radius) v = d.value;
      img(i, j) = v;
    }
  return img;
}

inline Vec add_gaussian_noise(ConstView x, double sigma, Rng& rng) {
  Vec y(x.begin(), x.end());
  for (double& v : y) v += sigma * rng.normal();
  return y;
}

// ---------------------------------------------------------------------------
// 1D toy: F(x) = (x - y)^2 / (2 sigma^2), G(x) = alpha |x|, mu^0 = N(0, 1).

struct Toy1dParams {
  double alpha = 1.0;
  double sigma = 1.0;
  double y = 1.0;
  double gamma = 0.25;
  std::vector<double> eps = {0.0, 0.01, 0.1};
  std::vector<double> betas = {0.5, 1.0};
  double decay_c = 1.0;
  std::size_t chains = 10000;
  std::size_t iterations = 1000;
  std::size_t mala_samples = 1000000;
  std::size_t mala_burn_in = 1000;
  double mala_gamma = 0.5;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

enum class ToyPanel { fixed_fixed, fixed_decaying, decaying_decaying };

inline const char* to_string(ToyPanel p) {
  switch (p) {
    case ToyPanel::fixed_fixed: return "fixed_step_fixed_eps";
    case ToyPanel::fixed_decaying: return "fixed_step_decaying_eps";
    case ToyPanel::decaying_decaying: return "decaying_step_decaying_eps";
  }
  return "?";
}

struct Toy1dCurve {
  ToyPanel panel;
  /// eps for fixed errors, beta for decaying errors.
  double parameter = 0.0;
  std::vector<std::size_t> k;
  Vec w2_sq;
  /// Theoretical bound per checkpoint; NaN where no bound is evaluated.
  Vec bound;
};

struct Toy1dResult {
  std::vector<Toy1dCurve> curves;
  BoundParams bound_params;
  double mala_acceptance = 0.0;
  double reference_mean = 0.0;
  double reference_variance = 0.0;
  std::vector<std::string> warnings;
  std::uint64_t mala_seed = 0;
  std::uint64_t ensemble_seed = 0;
};

/// 1..10, then steps of 10 to 100, steps of 100 to 1000, and so on up to K.
inline std::vector<std::size_t> log_checkpoints(std::size_t K) {
  std::vector<std::size_t> ks;
  for (std::size_t step = 1; step <= K; step *= 10)
    for (std::size_t k = step; k < 10 * step && k <= K; k += step) ks.push_back(k);
  if (ks.empty() || ks.back() != K) ks.push_back(K);
  return ks;
}

inline Toy1dResult run_toy1d(const Toy1dParams& p) {
  require(p.alpha > 0.0 && p.sigma > 0.0, "toy1d: alpha and sigma must be positive");
  require(p.gamma > 0.0 && p.gamma <= p.sigma * p.sigma, "toy1d: need 0 < gamma <= sigma^2 = 1/L");
  require(p.chains >= 2 && p.iterations >= 1 && p.mala_samples >= 2, "toy1d: sample counts too small");
  for (double e : p.eps) require(e >= 0.0, "toy1d: eps must be >= 0");
  for (double b : p.betas) require(b > 0.0, "toy1d: beta must be positive");

  Toy1dResult res;
  auto F = gaussian_likelihood(std::make_shared<IdentityOperator>(1), {p.y}, p.sigma);
  AbsClosedFormProx G(p.alpha);
  const double L = F->lipschitz(), lambda = F->strong_convexity();

  // Reference sample of the target by MALA.
  res.mala_seed = derive_seed(p.seed, kReferenceStream);
  ChainConfig mcfg;
  mcfg.seed = res.mala_seed;
  mcfg.burn_in = p.mala_burn_in;
  mcfg.n_samples = p.mala_samples;
  mcfg.initial = {0.0};
  ScalarTrace trace([](ConstView x) { return x[0]; });
  SampleSink* msinks[] = {&trace};
  const auto [mout, mdiag] = run_mala_chain(mcfg, LangevinTarget{*F, G.potential()}, p.mala_gamma, msinks);
  res.mala_acceptance = mdiag.acceptance_rate();
  res.reference_mean = mout.moments.mean()[0];
  res.reference_variance = mout.moments.variance()[0];
  for (const auto& w : mout.warnings) res.warnings.push_back("mala: " + w);
  Vec reference = std::move(trace.values);
  std::sort(reference.begin(), reference.end());

  // mu^0 = N(0, 1), drawn from each chain's own generator.
  res.ensemble_seed = derive_seed(p.seed, kEnsembleStream);
  auto init = [](Rng& rng) { return rng.normal(); };
  {
    // The chains' own initial draws.
    Vec mu0(p.chains);
    for (std::size_t i = 0; i < p.chains; ++i) {
      Rng r(derive_seed(res.ensemble_seed, i));
      mu0[i] = init(r);
    }
    std::sort(mu0.begin(), mu0.end());
    res.bound_params.W0_sq = wasserstein2_sq_1d_sorted(mu0, reference);
  }
  res.bound_params.lambda_F = lambda;
  res.bound_params.L = L;
  res.bound_params.d = 1;
  res.bound_params.Ctilde = 2.0 * L + p.alpha * p.alpha;

  const auto checkpoints = log_checkpoints(p.iterations);
  struct Case {
    ToyPanel panel;
    double parameter;
  };
  std::vector<Case> cases;
  for (double e : p.eps) cases.push_back({ToyPanel::fixed_fixed, e});
  for (double b : p.betas) cases.push_back({ToyPanel::fixed_decaying, b});
  for (double b : p.betas) cases.push_back({ToyPanel::decaying_decaying, b});
  res.curves.resize(cases.size());

  parallel_for(
      cases.size(),
      [&](std::size_t c) {
        const Case& cs = cases[c];
        StepSchedule steps = FixedStep{p.gamma};
        if (cs.panel == ToyPanel::decaying_decaying) steps = DecayingStep{1.0 / lambda, lambda, L};
        ErrorSchedule errors = FixedEps{cs.parameter};
        if (cs.panel != ToyPanel::fixed_fixed) errors = PowerDecayEps{p.decay_c, cs.parameter};
        auto marginals = run_ensemble_1d(p.chains, res.ensemble_seed, init, *F, G, steps, errors, checkpoints);
        Toy1dCurve& curve = res.curves[c];
        curve.panel = cs.panel;
        curve.parameter = cs.parameter;
        curve.k = checkpoints;
        for (std::size_t i = 0; i < checkpoints.size(); ++i) {
          std::sort(marginals[i].begin(), marginals[i].end());
          curve.w2_sq.push_back(wasserstein2_sq_1d_sorted(marginals[i], reference));
          const std::size_t K = checkpoints[i];
          double b = std::numeric_limits<double>::quiet_NaN();
          if (cs.panel == ToyPanel::fixed_fixed) {
            b = bound_fixed_step(res.bound_params, p.gamma, K, cs.parameter);
          } else if (cs.panel == ToyPanel::fixed_decaying) {
            Vec seq(K);
            for (std::size_t k = 0; k < K; ++k)
              seq[k] = std::get<TargetEpsilon>(schedule_accuracy(errors, k, 0.0)).eps;
            b = bound_decreasing_errors(res.bound_params, p.gamma, seq);
          }
          curve.bound.push_back(b);
        }
      },
      p.threads);
  return res;
}

// ---------------------------------------------------------------------------
// Wavelet-domain l1 deblurring: F(z) = ||A W^T z - y||^2 / (2 sigma^2), G(z) = mu ||z||_1.

struct WaveletDeblurParams {
  ImageBuffer image;
  ConvolutionKernel kernel = make_gaussian_blur(5, 1.0);
  double sigma = 0.02;
  double mu = 20.0;
  int levels = 3;
  /// Dual step of the inner l1 solver as a fraction of 1/Lipschitz.
  double dual_step_fraction = 0.02;
  std::vector<double> eps_tilde = {0.0, std::pow(10.0, -0.1), std::pow(10.0, -0.5), 1e-2};
  std::size_t n_samples = 10000;
  std::size_t burn_in = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct ImageRun {
  double eps_tilde = 0.0;
  ImageBuffer mmse;
  ImageBuffer stddev;
  double psnr = 0.0;
  std::optional<double> c0;
  long long inner_total = 0;
  double mean_inner = 0.0;
  double mean_gamma = 0.0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  std::vector<std::string> warnings;
};

struct WaveletDeblurResult {
  ImageBuffer truth;
  ImageBuffer observed;
  double gamma = 0.0;
  double lipschitz = 0.0;
  double lambda_F = 0.0;
  std::uint64_t data_seed = 0;
  std::vector<ImageRun> runs;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline WaveletDeblurResult run_wavelet_deblur(const WaveletDeblurParams& p) {
  require(p.image.data.size() > 0, "wavelet_deblur: missing image");
  require(p.sigma > 0.0 && p.mu > 0.0, "wavelet_deblur: sigma and mu must be positive");
  require(p.n_samples >= 1, "wavelet_deblur: need at least one sample");
  for (double e : p.eps_tilde) require(e >= 0.0 && e <= 1.0, "wavelet_deblur: eps_tilde must lie in [0, 1]");
  const Shape s = p.image.shape;

  WaveletDeblurResult res;
  res.truth = p.image;
  auto blur = std::make_shared<ConvolutionOperator>(p.kernel, s);
  res.data_seed = derive_seed(p.seed, kDataStream);
  Rng data_rng(res.data_seed);
  ImageBuffer blurred(s);
  blur->apply(p.image.data, blurred.data);
  res.observed = ImageBuffer(s, add_gaussian_noise(blurred.data, p.sigma, data_rng));

  auto op = std::make_shared<WaveletSynthesisOperator>(blur, s, p.levels);
  auto F = gaussian_likelihood(op, res.observed.data, p.sigma);
  res.lipschitz = F->lipschitz();
  res.lambda_F = F->strong_convexity();
  res.gamma = 1.0 / res.lipschitz;
  L1DualProx G(p.mu, L1DualOptions{p.dual_step_fraction});

  ChainConfig cfg;
  cfg.seed = derive_seed(p.seed, kChainStream);
  cfg.burn_in = p.burn_in;
  cfg.n_samples = p.n_samples;
  cfg.initial.resize(s.size());
  dwt_forward(s, p.levels, res.observed.data, cfg.initial);

  res.runs.resize(p.eps_tilde.size());
  parallel_for(
      p.eps_tilde.size(),
      [&](std::size_t r) {
        const auto t0 = std::chrono::steady_clock::now();
        const double et = p.eps_tilde[r];
        const ErrorSchedule errors = et == 0.0 ? ErrorSchedule{FixedEps{0.0}} : ErrorSchedule{RelativeGapEps{et}};
        TransformedMoments image_moments(s.size(), [&](ConstView z, MutView x) { dwt_inverse(s, p.levels, z, x); });
        SampleSink* sinks[] = {&image_moments};
        const ChainOutput out = run_chain(cfg, *F, G, FixedStep{res.gamma}, errors, sinks);
        ImageRun& run = res.runs[r];
        run.eps_tilde = et;
        run.mmse = ImageBuffer(s, image_moments.moments.mean());
        run.stddev = ImageBuffer(s, image_moments.moments.stddev());
        run.psnr = psnr(run.mmse.data, p.image.data);
        run.c0 = out.c0;
        run.inner_total = out.inner_iterations_total;
        run.mean_inner = out.mean_inner_iterations();
        run.mean_gamma = out.mean_gamma();
        run.seed = cfg.seed;
        run.warnings = out.warnings;
        run.seconds = seconds_since(t0);
      },
      p.threads);
  return res;
}

// ---------------------------------------------------------------------------
// TV denoising: F(x) = ||x - y||^2 / (2 sigma^2), G = mu TV.

struct TvDenoiseParams {
  ImageBuffer image;
  double sigma = 0.1;
  double mu = 20.0;
  std::vector<double> eps_tilde = {1.0, 1e-1, 1e-2};
  std::vector<double> deltas = {0.1, 0.05, 0.02, 0.01};
  double reference_eps_tilde = 1e-3;
  std::size_t reference_samples = 10000;
  std::size_t n_samples = 10000;
  std::size_t burn_in = 200;
  /// Carry the dual field between certified prox calls.
  bool warm_start = true;
  int max_inner = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct KStarEntry {
  double delta = 0.0;
  std::optional<std::size_t> k_star;
  std::optional<long long> inner_iterations;
};

struct TvDenoiseRun {
  ImageRun run;
  std::vector<KStarEntry> k_star;
  Vec relative_errors;
};

struct TvDenoiseResult {
  ImageBuffer truth;
  ImageBuffer noisy;
  ImageRun reference;
  double gamma = 0.0;
  std::uint64_t data_seed = 0;
  std::vector<TvDenoiseRun> runs;
};

inline TvDenoiseResult run_tv_denoise(const TvDenoiseParams& p) {
  require(p.image.data.size() > 0, "tv_denoise: missing image");
  require(p.sigma > 0.0 && p.mu > 0.0, "tv_denoise: sigma and mu must be positive");
  require(p.reference_eps_tilde > 0.0, "tv_denoise: reference eps_tilde must be positive");
  for (double e : p.eps_tilde) require(e > 0.0 && e <= 1.0, "tv_denoise: eps_tilde must lie in (0, 1]");
  const Shape s = p.image.shape;

  TvDenoiseResult res;
  res.truth = p.image;
  res.data_seed = derive_seed(p.seed, kDataStream);
  Rng data_rng(res.data_seed);
  res.noisy = ImageBuffer(s, add_gaussian_noise(p.image.data, p.sigma, data_rng));
  auto F = gaussian_likelihood(std::make_shared<IdentityOperator>(s.size()), res.noisy.data, p.sigma);
  res.gamma = 1.0 / F->lipschitz();
  TVDualProx G(p.mu, s, p.max_inner, p.warm_start);

  ChainConfig cfg;
  cfg.burn_in = p.burn_in;
  cfg.initial = res.noisy.data;

  auto fill_run = [&](ImageRun& run, const ChainOutput& out, double et, std::chrono::steady_clock::time_point t0) {
    run.eps_tilde = et;
    run.mmse = ImageBuffer(s, out.moments.mean());
    run.stddev = ImageBuffer(s, out.moments.stddev());
    run.psnr = psnr(run.mmse.data, p.image.data);
    run.c0 = out.c0;
    run.inner_total = out.inner_iterations_total;
    run.mean_inner = out.mean_inner_iterations();
    run.mean_gamma = out.mean_gamma();
    run.seed = out.seed;
    run.warnings = out.warnings;
    run.seconds = seconds_since(t0);
  };

  {
    const auto t0 = std::chrono::steady_clock::now();
    ChainConfig rc = cfg;
    rc.seed = derive_seed(p.seed, kReferenceStream);
    rc.n_samples = p.reference_samples;
    const ChainOutput out = run_chain(rc, *F, G, FixedStep{res.gamma}, RelativeGapEps{p.reference_eps_tilde});
    fill_run(res.reference, out, p.reference_eps_tilde, t0);
  }

  cfg.seed = derive_seed(p.seed, kChainStream);
  cfg.n_samples = p.n_samples;
  res.runs.resize(p.eps_tilde.size());
  parallel_for(
      p.eps_tilde.size(),
      [&](std::size_t r) {
        const auto t0 = std::chrono::steady_clock::now();
        KStarTracker tracker(res.reference.mmse.data);
        SampleSink* sinks[] = {&tracker};
        const ChainOutput out = run_chain(cfg, *F, G, FixedStep{res.gamma}, RelativeGapEps{p.eps_tilde[r]}, sinks);
        TvDenoiseRun& run = res.runs[r];
        fill_run(run.run, out, p.eps_tilde[r], t0);
        for (double d : p.deltas) run.k_star.push_back({d, tracker.k_star(d), tracker.inner_at(d)});
        run.relative_errors = std::move(tracker.relative_errors);
      },
      p.threads);
  return res;
}

// ---------------------------------------------------------------------------
// TV deblurring with Gaussian noise.

/// MAP estimate argmin F + mu TV by accelerated proximal gradient with step 1/L; each
/// prox is solved to a gap of `prox_rel` times mu TV of its input.
inline Vec tv_map_estimate(const GaussianLikelihood& F, Shape s, double mu, ConstView x0, int iterations = 300,
                           double prox_rel = 1e-6) {
  const double gamma = 1.0 / F.lipschitz();
  Vec x(x0.begin(), x0.end()), x_prev = x, v = x, g(x.size());
  WarmStart warm;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    F.gradient(v, g);
    for (std::size_t i = 0; i < v.size(); ++i) g[i] = v[i] - gamma * g[i];
    x_prev = x;
    const double eps = std::max(prox_rel * mu * total_variation(s, g), 1e-12);
    x = inexact_prox_tv(g, s, mu, gamma, eps, TVDualOptions{5000}, &warm).point;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] + (t - 1.0) / t_next * (x[i] - x_prev[i]);
    t = t_next;
  }
  return x;
}

struct TvDeblurParams {
  ImageBuffer image;
  ConvolutionKernel kernel = make_gaussian_blur(9, 1.5);
  double sigma = 0.1;
  double mu = 10.0;
  std::vector<double> eps_tilde = {1.0, 1e-2, 1e-4};
  std::size_t n_samples = 10000;
  std::size_t burn_in = 2000;
  int map_iterations = 300;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct TvDeblurResult {
  ImageBuffer truth;
  ImageBuffer observed;
  ImageBuffer map;
  double map_psnr = 0.0;
  double gamma = 0.0;
  std::uint64_t data_seed = 0;
  std::vector<ImageRun> runs;
};

inline TvDeblurResult run_tv_deblur(const TvDeblurParams& p) {
  require(p.image.data.size() > 0, "tv_deblur: missing image");
  require(p.sigma > 0.0 && p.mu > 0.0, "tv_deblur: sigma and mu must be positive");
  for (double e : p.eps_tilde) require(e > 0.0 && e <= 1.0, "tv_deblur: eps_tilde must lie in (0, 1]");
  const Shape s = p.image.shape;

  TvDeblurResult res;
  res.truth = p.image;
  auto blur = std::make_shared<ConvolutionOperator>(p.kernel, s);
  res.data_seed = derive_seed(p.seed, kDataStream);
  Rng data_rng(res.data_seed);
  Vec blurred(s.size());
  blur->apply(p.image.data, blurred);
  res.observed = ImageBuffer(s, add_gaussian_noise(blurred, p.sigma, data_rng));
  auto F = gaussian_likelihood(blur, res.observed.data, p.sigma);
  res.gamma = 1.0 / F->lipschitz();
  res.map = ImageBuffer(s, tv_map_estimate(*F, s, p.mu, res.observed.data, p.map_iterations));
  res.map_psnr = psnr(res.map.data, p.image.data);
  TVDualProx G(p.mu, s);

  ChainConfig cfg;
  cfg.seed = derive_seed(p.seed, kChainStream);
  cfg.burn_in = p.burn_in;
  cfg.n_samples = p.n_samples;
  cfg.initial = res.map.data;
  res.runs.resize(p.eps_tilde.size());
  parallel_for(
      p.eps_tilde.size(),
      [&](std::size_t r) {
        const auto t0 = std::chrono::steady_clock::now();
        const ChainOutput out = run_chain(cfg, *F, G, FixedStep{res.gamma}, RelativeGapEps{p.eps_tilde[r]});
        ImageRun& run = res.runs[r];
        run.eps_tilde = p.eps_tilde[r];
        run.mmse = ImageBuffer(s, out.moments.mean());
        run.stddev = ImageBuffer(s, out.moments.stddev());
        run.psnr = psnr(run.mmse.data, p.image.data);
        run.c0 = out.c0;
        run.inner_total = out.inner_iterations_total;
        run.mean_inner = out.mean_inner_iterations();
        run.mean_gamma = out.mean_gamma();
        run.seed = cfg.seed;
        run.warnings = out.warnings;
        run.seconds = seconds_since(t0);
      },
      p.threads);
  return res;
}

// ---------------------------------------------------------------------------
// Poisson deblurring: y ~ Poisson(A x + b), G = mu TV + indicator(x >= 0).

struct PoissonRunSpec {
  std::string name;
  bool backtracking = false;
  int inner_iterations = 10;
  std::size_t burn_in = 1000;
};

struct PoissonDeblurParams {
  ImageBuffer image;
  ConvolutionKernel kernel = make_uniform_blur(5);
  double mean_intensity = 2.0;
  double background = 0.02;
  double mu = 0.5;
  std::vector<PoissonRunSpec> configs = {
      {"fixed_step_10_inner", false, 10, 5000},
      {"backtracking_1_inner", true, 1, 1000},
      {"backtracking_10_inner", true, 10, 1000},
  };
  /// Backtracking searches gamma in [.., factor / L~]; without a cap the step grows without
  /// bound where the likelihood is nearly linear.
  double backtracking_max_factor = 1e4;
  std::size_t n_samples = 10000;
  std::size_t acf_max_lag = 200;
  std::vector<std::size_t> std_factors = {1, 2, 4, 8};
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

/// Tracks the smallest entry over all samples.
class MinimumSink final : public SampleSink {
 public:
  void consume(std::size_t, ConstView x, const StepDiagnostics&) override {
    for (double v : x) minimum = std::min(minimum, v);
  }
  double minimum = kInf;
};

struct PoissonRun {
  PoissonRunSpec spec;
  ImageRun run;
  /// std maps of the samples on the [0, 1] image scale, per downsampling factor.
  std::vector<std::pair<std::size_t, ImageBuffer>> std_maps;
  /// ACF of the slowest, median and fastest Fourier-mode series.
  Vec acf[3];
  double sample_minimum = 0.0;
};

struct PoissonDeblurResult {
  ImageBuffer truth;
  ImageBuffer counts;
  double scale = 1.0;
  double lipschitz_estimate = 0.0;
  FourierMode modes[3];
  std::uint64_t data_seed = 0;
  std::vector<PoissonRun> runs;
};

inline PoissonDeblurResult run_poisson_deblur(const PoissonDeblurParams& p) {
  require(p.image.data.size() > 0, "poisson_deblur: missing image");
  require(std::isfinite(p.background) && p.background > 0.0, "poisson_deblur: background must be positive");
  require(p.mean_intensity > 0.0 && p.mu > 0.0, "poisson_deblur: mean intensity and mu must be positive");
  require(p.backtracking_max_factor >= 1.0, "poisson_deblur: backtracking_max_factor must be >= 1");
  const Shape s = p.image.shape;

  PoissonDeblurResult res;
  res.truth = p.image;
  double mean = 0.0;
  for (double v : p.image.data) mean += v;
  mean /= static_cast<double>(s.size());
  require(mean > 0.0, "poisson_deblur: image must have positive mean");
  res.scale = p.mean_intensity / mean;

  auto blur = std::make_shared<ConvolutionOperator>(p.kernel, s);
  Vec scaled(p.image.data), rate(s.size());
  for (double& v : scaled) v *= res.scale;
  blur->apply(scaled, rate);
  res.data_seed = derive_seed(p.seed, kDataStream);
  Rng data_rng(res.data_seed);
  res.counts = ImageBuffer(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::poisson_distribution<long> pd(rate[i] + p.background);
    res.counts.data[i] = static_cast<double>(pd(data_rng.engine()));
  }
  auto F = poisson_likelihood(blur, res.counts.data, Vec(s.size(), p.background));
  res.lipschitz_estimate = F->lipschitz();
  TVNonnegProx G(p.mu, s);
  const FourierModeSelector selector(p.kernel, s);
  for (int r = 0; r < 3; ++r) res.modes[r] = selector.mode(static_cast<ModeRank>(r));

  res.runs.resize(p.configs.size());
  parallel_for(
      p.configs.size(),
      [&](std::size_t r) {
        const auto t0 = std::chrono::steady_clock::now();
        const PoissonRunSpec& spec = p.configs[r];
        require(spec.inner_iterations >= 1, "poisson_deblur: inner iterations must be >= 1");
        ChainConfig cfg;
        cfg.seed = derive_seed(p.seed, kChainStream);
        cfg.burn_in = spec.burn_in;
        cfg.n_samples = p.n_samples;
        cfg.initial = res.counts.data;
        const double gamma_fixed = 1.0 / res.lipschitz_estimate;
        const StepSchedule steps =
            spec.backtracking
                ? StepSchedule{BacktrackingStep{gamma_fixed, 0.5, 1.25, p.backtracking_max_factor * gamma_fixed}}
                : StepSchedule{FixedStep{gamma_fixed}};

        std::vector<std::unique_ptr<DownsampledStdSink>> std_sinks;
        std::vector<SampleSink*> sinks;
        for (std::size_t f : p.std_factors) {
          std_sinks.push_back(std::make_unique<DownsampledStdSink>(s, f));
          sinks.push_back(std_sinks.back().get());
        }
        FourierModeSink modes(selector);
        MinimumSink minimum;
        sinks.push_back(&modes);
        sinks.push_back(&minimum);
        const ChainOutput out = run_chain(cfg, *F, G, steps, BudgetEps{spec.inner_iterations}, sinks);

        PoissonRun& run = res.runs[r];
        run.spec = spec;
        run.run.mmse = ImageBuffer(s, out.moments.mean());
        for (double& v : run.run.mmse.data) v /= res.scale;
        run.run.stddev = ImageBuffer(s, out.moments.stddev());
        for (double& v : run.run.stddev.data) v /= res.scale;
        run.run.psnr = psnr(run.run.mmse.data, p.image.data);
        run.run.inner_total = out.inner_iterations_total;
        run.run.mean_inner = out.mean_inner_iterations();
        run.run.mean_gamma = out.mean_gamma();
        run.run.seed = cfg.seed;
        run.run.warnings = out.warnings;
        for (const auto& sink : std_sinks) {
          Vec m = sink->acc.std_map();
          for (double& v : m) v /= res.scale;
          run.std_maps.emplace_back(sink->acc.factor(), ImageBuffer(sink->acc.pooled_shape(), std::move(m)));
        }
        for (int k = 0; k < 3; ++k)
          run.acf[k] = autocorrelation(modes.series[k], std::min(p.acf_max_lag, modes.series[k].size() - 1));
        run.sample_minimum = minimum.minimum;
        run.run.seconds = seconds_since(t0);
      },
      p.threads);
  return res;
}

}  // namespace ipgla::experiments

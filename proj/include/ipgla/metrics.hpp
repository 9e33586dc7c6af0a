#pragma once

// Diagnostics: 1D Wasserstein distances, theoretical bias bounds, image quality,
// streaming moments, autocorrelation, Fourier-mode projections and the k*(delta) criterion.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <tuple>

#include "ipgla/core.hpp"
#include "ipgla/image.hpp"
#include "ipgla/linops.hpp"

namespace ipgla {

// ---------------------------------------------------------------------------
// Wasserstein-2 in one dimension (monotone coupling of the sorted samples).

/// Same as wasserstein2_sq_1d for inputs already sorted ascending.
inline double wasserstein2_sq_1d_sorted(ConstView a, ConstView b) {
  require(!a.empty() && !b.empty(), "wasserstein2_sq_1d: empty sample set");
  if (a.size() == b.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  // Walk the merged quantile grid; masses are tracked in units of 1/(n m) to stay exact.
  const auto n = static_cast<long long>(a.size()), m = static_cast<long long>(b.size());
  long long ra = m, rb = n;  // remaining mass of the current atoms
  std::size_t i = 0, j = 0;
  double s = 0.0;
  while (i < a.size() && j < b.size()) {
    const long long mass = std::min(ra, rb);
    const double d = a[i] - b[j];
    s += static_cast<double>(mass) * d * d;
    ra -= mass;
    rb -= mass;
    if (ra == 0) {
      ++i;
      ra = m;
    }
    if (rb == 0) {
      ++j;
      rb = n;
    }
  }
  return s / static_cast<double>(n * m);
}

inline double wasserstein2_sq_1d(Vec a, Vec b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return wasserstein2_sq_1d_sorted(a, b);
}

// ---------------------------------------------------------------------------
// Bias bounds for the fixed-step chain.

struct BoundParams {
  double lambda_F = 0.0;
  double lambda_Gstar = 0.0;
  double L = 1.0;
  std::size_t d = 1;
  /// C~ = 2 L d + int |grad G|^2 dmu*.
  double Ctilde = 0.0;
  double theta = 0.0;
  /// W2^2(mu^0, mu*).
  double W0_sq = 0.0;
};

inline void validate(const BoundParams& p) {
  require(std::isfinite(p.lambda_F) && std::isfinite(p.lambda_Gstar) && std::isfinite(p.L) &&
              std::isfinite(p.Ctilde) && std::isfinite(p.W0_sq),
          "BoundParams: all parameters must be finite");
  require(p.lambda_F >= 0.0 && p.lambda_Gstar >= 0.0 && p.L > 0.0 && p.W0_sq >= 0.0, "BoundParams: invalid sign");
  require(p.theta >= 0.0 && p.theta < 1.0, "BoundParams: theta must lie in [0, 1)");
}

/// (1 - lambda_F gamma)^K W0 + gamma C~ / lambda_F + 2 eps / lambda_F.
inline double bound_fixed_step(const BoundParams& p, double gamma, std::size_t K, double eps) {
  validate(p);
  require(p.lambda_F > 0.0, "bound_fixed_step: requires lambda_F > 0");
  require(gamma > 0.0 && gamma <= (1.0 + 1e-12) / p.L, "bound_fixed_step: need 0 < gamma <= 1/L");
  require(eps >= 0.0, "bound_fixed_step: eps must be >= 0");
  return std::pow(1.0 - p.lambda_F * gamma, static_cast<double>(K)) * p.W0_sq + gamma * p.Ctilde / p.lambda_F +
         2.0 * eps / p.lambda_F;
}

/// Same as bound_fixed_step with the error term replaced by (2/(K lambda_F)) sum eps_k
/// for a non-increasing sequence eps_0..eps_{K-1}.
inline double bound_decreasing_errors(const BoundParams& p, double gamma, ConstView eps_sequence) {
  validate(p);
  require(p.lambda_F > 0.0, "bound_decreasing_errors: requires lambda_F > 0");
  require(gamma > 0.0 && gamma <= (1.0 + 1e-12) / p.L, "bound_decreasing_errors: need 0 < gamma <= 1/L");
  require(!eps_sequence.empty(), "bound_decreasing_errors: empty error sequence");
  double sum = 0.0;
  for (std::size_t k = 0; k < eps_sequence.size(); ++k) {
    require(eps_sequence[k] >= 0.0, "bound_decreasing_errors: negative error");
    if (k > 0) require(eps_sequence[k] <= eps_sequence[k - 1], "bound_decreasing_errors: sequence must be non-increasing");
    sum += eps_sequence[k];
  }
  const auto K = static_cast<double>(eps_sequence.size());
  return std::pow(1.0 - p.lambda_F * gamma, K) * p.W0_sq + gamma * p.Ctilde / p.lambda_F + 2.0 * sum / (K * p.lambda_F);
}

/// C_theta(gamma, eps) = (C~ gamma (1 - theta) + 2 eps) / ((1 - theta)(theta lambda_G* + gamma)).
inline double c_theta(const BoundParams& p, double theta, double gamma, double eps) {
  return (p.Ctilde * gamma * (1.0 - theta) + 2.0 * eps) / ((1.0 - theta) * (theta * p.lambda_Gstar + gamma));
}

/// Dual-variable bound W0 / (gamma (theta lambda_G* + gamma) K) + C_theta(gamma, eps) at p.theta.
inline double bound_dual_wasserstein(const BoundParams& p, double gamma, std::size_t K, double eps) {
  validate(p);
  require(gamma > 0.0 && K >= 1 && eps >= 0.0, "bound_dual_wasserstein: invalid arguments");
  const double th = p.theta;
  return p.W0_sq / (gamma * (th * p.lambda_Gstar + gamma) * static_cast<double>(K)) + c_theta(p, th, gamma, eps);
}

struct ThetaOptimum {
  double theta;
  double value;
};

/// Minimizes bound_dual_wasserstein over theta in [0, 1 - 1e-9]: a log-spaced scan of
/// 1 - theta followed by golden-section refinement around the best scan point.
inline ThetaOptimum optimize_theta(BoundParams p, double gamma, std::size_t K, double eps) {
  constexpr double kMaxTheta = 1.0 - 1e-9;
  auto f = [&](double th) {
    p.theta = th;
    return bound_dual_wasserstein(p, gamma, K, eps);
  };
  ThetaOptimum best{0.0, f(0.0)};
  constexpr int kScan = 400;
  int best_i = -1;
  std::vector<double> grid;
  for (int i = 0; i <= kScan; ++i) grid.push_back(1.0 - std::pow(10.0, -9.0 * i / kScan));  // theta from 0 up to 1-1e-9
  for (int i = 0; i <= kScan; ++i) {
    const double th = std::min(grid[i], kMaxTheta);
    const double v = f(th);
    if (v < best.value) {
      best = {th, v};
      best_i = i;
    }
  }
  if (best_i >= 0) {
    double lo = grid[std::max(best_i - 1, 0)], hi = std::min(grid[std::min(best_i + 1, kScan)], kMaxTheta);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 100; ++it) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      if (f(a) < f(b))
        hi = b;
      else
        lo = a;
    }
    const double th = 0.5 * (lo + hi);
    const double v = f(th);
    if (v < best.value) best = {th, v};
  }
  return best;
}

// ---------------------------------------------------------------------------

/// Peak signal-to-noise ratio in dB; +inf for identical images.
inline double psnr(ConstView image, ConstView reference, double peak = 1.0) {
  require(image.size() == reference.size() && !image.empty(), "psnr: shape mismatch");
  require(peak > 0.0, "psnr: peak must be positive");
  const double mse = squared_distance(image, reference) / static_cast<double>(image.size());
  if (mse == 0.0) return kInf;
  return 10.0 * std::log10(peak * peak / mse);
}

// ---------------------------------------------------------------------------
// Streaming moments (Welford recurrence; Chan et al. pairwise merge).

class RunningMoments {
 public:
  RunningMoments() = default;
  explicit RunningMoments(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  std::size_t dimension() const { return mean_.size(); }
  std::size_t count() const { return n_; }
  const Vec& mean() const { return mean_; }
  const Vec& sum_sq_dev() const { return m2_; }

  void update(ConstView x) {
    require(x.size() == mean_.size(), "RunningMoments: shape mismatch");
    ++n_;
    const double inv = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean_[i];
      mean_[i] += d * inv;
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }

  /// Unbiased sample variance; requires at least two samples.
  Vec variance() const {
    require(n_ >= 2, "RunningMoments: variance needs at least two samples");
    Vec v(m2_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2_[i] / static_cast<double>(n_ - 1);
    return v;
  }

  Vec stddev() const {
    Vec v = variance();
    for (double& x : v) x = std::sqrt(x);
    return v;
  }

  static RunningMoments merge(const RunningMoments& a, const RunningMoments& b) {
    require(a.dimension() == b.dimension(), "RunningMoments::merge: shape mismatch");
    if (a.n_ == 0) return b;
    if (b.n_ == 0) return a;
    RunningMoments r(a.dimension());
    r.n_ = a.n_ + b.n_;
    const double na = static_cast<double>(a.n_), nb = static_cast<double>(b.n_), n = static_cast<double>(r.n_);
    for (std::size_t i = 0; i < r.mean_.size(); ++i) {
      const double d = b.mean_[i] - a.mean_[i];
      r.mean_[i] = a.mean_[i] + d * nb / n;
      r.m2_[i] = a.m2_[i] + b.m2_[i] + d * d * na * nb / n;
    }
    return r;
  }

 private:
  std::size_t n_ = 0;
  Vec mean_;
  Vec m2_;
};

inline RunningMoments moments_update(RunningMoments acc, ConstView sample) {
  acc.update(sample);
  return acc;
}

inline RunningMoments moments_merge(const RunningMoments& a, const RunningMoments& b) {
  return RunningMoments::merge(a, b);
}

/// Average pooling by an integer factor.
inline Vec average_pool(Shape s, ConstView x, std::size_t factor) {
  require(factor >= 1 && s.height % factor == 0 && s.width % factor == 0,
          "average_pool: image sides must be divisible by the factor");
  require(x.size() == s.size(), "average_pool: shape mismatch");
  const std::size_t h = s.height / factor, w = s.width / factor;
  Vec out(h * w, 0.0);
  for (std::size_t r = 0; r < s.height; ++r)
    for (std::size_t c = 0; c < s.width; ++c) out[(r / factor) * w + c / factor] += x[r * s.width + c];
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (double& v : out) v *= inv;
  return out;
}

/// Pixelwise standard deviation of average-pooled samples.
class DownsampledStd {
 public:
  DownsampledStd(Shape s, std::size_t factor) : shape_(s), factor_(factor) {
    require(factor == 1 || factor == 2 || factor == 4 || factor == 8, "std_map_downsampled: factor must be 1, 2, 4 or 8");
    require(s.height % factor == 0 && s.width % factor == 0, "std_map_downsampled: indivisible shape");
    moments_ = RunningMoments(s.size() / (factor * factor));
  }
  void update(ConstView x) { moments_.update(average_pool(shape_, x, factor_)); }
  Shape pooled_shape() const { return {shape_.height / factor_, shape_.width / factor_}; }
  std::size_t factor() const { return factor_; }
  Vec std_map() const { return moments_.stddev(); }

 private:
  Shape shape_;
  std::size_t factor_;
  RunningMoments moments_;
};

/// std map of average-pooled samples, computed from a stored sample list.
inline Vec std_map_downsampled(Shape s, const std::vector<Vec>& samples, std::size_t factor) {
  DownsampledStd acc(s, factor);
  for (const auto& x : samples) acc.update(x);
  return acc.std_map();
}

// ---------------------------------------------------------------------------

/// Biased sample autocorrelation rho(l) = c(l)/c(0), l = 0..max_lag.
/// Returns an empty vector for a constant series (undefined ACF).
inline Vec autocorrelation(ConstView series, std::size_t max_lag) {
  require(series.size() > max_lag, "autocorrelation: series must be longer than max_lag");
  const auto n = static_cast<double>(series.size());
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  if (c0 == 0.0) return {};
  Vec rho(max_lag + 1);
  for (std::size_t l = 0; l <= max_lag; ++l) {
    double c = 0.0;
    for (std::size_t t = 0; t + l < series.size(); ++t) c += (series[t] - mean) * (series[t + l] - mean);
    rho[l] = c / c0;
  }
  return rho;
}

/// Integrated autocorrelation time 1 + 2 sum rho(l), truncated by Geyer's initial
/// positive sequence rule.
inline double integrated_autocorrelation_time(ConstView series, std::size_t max_lag) {
  const Vec rho = autocorrelation(series, std::min(max_lag, series.size() - 1));
  if (rho.empty()) return 1.0;
  double tau = -1.0;  // rho(0) counted once below: -1 + 2 * (rho0 + rho1) + ...
  for (std::size_t l = 0; l + 1 < rho.size(); l += 2) {
    const double pair = rho[l] + rho[l + 1];
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return std::max(tau, 1.0);
}

// ---------------------------------------------------------------------------
// Real Fourier modes ranked by the A*A eigenvalue of a periodic blur.

struct FourierMode {
  std::size_t u = 0;
  std::size_t v = 0;
  double eigenvalue = 0.0;
};

enum class ModeRank { slowest, median, fastest };

/// Selects the modes whose A*A eigenvalues are the minimum, median and maximum.
/// Ties are broken by lexicographic (u, v) order.
class FourierModeSelector {
 public:
  FourierModeSelector(const ConvolutionKernel& k, Shape s) : shape_(s) {
    const Vec eig = conv_eigenvalues(k, s);
    std::vector<FourierMode> modes;
    modes.reserve(eig.size());
    for (std::size_t u = 0; u < s.height; ++u)
      for (std::size_t v = 0; v < s.width; ++v) modes.push_back({u, v, eig[u * s.width + v]});
    std::stable_sort(modes.begin(), modes.end(),
                     [](const FourierMode& a, const FourierMode& b) { return a.eigenvalue < b.eigenvalue; });
    selected_[0] = modes.front();
    selected_[1] = modes[(modes.size() - 1) / 2];
    // Largest eigenvalue, first in (u, v) order among ties.
    std::size_t i = modes.size() - 1;
    while (i > 0 && modes[i - 1].eigenvalue == modes.back().eigenvalue) --i;
    selected_[2] = modes[i];
    for (int r = 0; r < 3; ++r) basis_[r] = mode_image(selected_[r]);
  }

  const FourierMode& mode(ModeRank r) const { return selected_[static_cast<int>(r)]; }

  /// Unit-norm cosine mode image cos(2 pi (u i / H + v j / W)).
  Vec mode_image(const FourierMode& m) const {
    Vec img(shape_.size());
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < shape_.height; ++i)
      for (std::size_t j = 0; j < shape_.width; ++j)
        img[i * shape_.width + j] =
            std::cos(two_pi * (static_cast<double>(m.u * i) / static_cast<double>(shape_.height) +
                               static_cast<double>(m.v * j) / static_cast<double>(shape_.width)));
    const double n = norm2(img);
    for (double& x : img) x /= n;
    return img;
  }

  double project(ModeRank r, ConstView x) const { return dot(basis_[static_cast<int>(r)], x); }

 private:
  Shape shape_;
  FourierMode selected_[3];
  Vec basis_[3];
};

// ---------------------------------------------------------------------------

/// First k (1-based) with ||mean_k - ref|| / ||ref|| <= delta, given the relative errors
/// of the running means in order. Returns nullopt if never reached.
inline std::optional<std::size_t> k_star(ConstView relative_errors, double delta) {
  for (std::size_t k = 0; k < relative_errors.size(); ++k)
    if (relative_errors[k] <= delta) return k + 1;
  return std::nullopt;
}

/// Relative errors ||mean_k - ref|| / ||ref|| of the running means of a stored sample list.
inline Vec running_mean_relative_errors(const std::vector<Vec>& samples, ConstView reference) {
  const double rn = norm2(reference);
  require(rn > 0.0, "k_star: reference has zero norm");
  RunningMoments acc(reference.size());
  Vec out;
  for (const auto& x : samples) {
    acc.update(x);
    out.push_back(std::sqrt(squared_distance(acc.mean(), reference)) / rn);
  }
  return out;
}

}  // namespace ipgla

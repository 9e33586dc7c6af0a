#pragma once

// Chain-local statistic sinks built on the metrics primitives.

#include <functional>
#include <optional>
#include <utility>

#include "ipgla/metrics.hpp"
#include "ipgla/sampler.hpp"

namespace ipgla {

/// Moments of a transformed sample, e.g. the image W^T z of wavelet coefficients.
class TransformedMoments final : public SampleSink {
 public:
  TransformedMoments(std::size_t dim, std::function<void(ConstView, MutView)> transform)
      : moments(dim), transform_(std::move(transform)), buf_(dim) {}
  void consume(std::size_t, ConstView x, const StepDiagnostics&) override {
    transform_(x, buf_);
    moments.update(buf_);
  }
  RunningMoments moments;

 private:
  std::function<void(ConstView, MutView)> transform_;
  Vec buf_;
};

class DownsampledStdSink final : public SampleSink {
 public:
  DownsampledStdSink(Shape s, std::size_t factor) : acc(s, factor) {}
  void consume(std::size_t, ConstView x, const StepDiagnostics&) override { acc.update(x); }
  DownsampledStd acc;
};

/// Scalar series of the projections onto the slowest, median and fastest Fourier modes.
class FourierModeSink final : public SampleSink {
 public:
  explicit FourierModeSink(const FourierModeSelector& sel) : sel_(sel) {}
  void consume(std::size_t, ConstView x, const StepDiagnostics&) override {
    series[0].push_back(sel_.project(ModeRank::slowest, x));
    series[1].push_back(sel_.project(ModeRank::median, x));
    series[2].push_back(sel_.project(ModeRank::fastest, x));
  }
  Vec series[3];

 private:
  const FourierModeSelector& sel_;
};

/// Tracks ||running mean - reference|| / ||reference|| and the cumulative inner
/// iteration count after every sample.
class KStarTracker final : public SampleSink {
 public:
  explicit KStarTracker(Vec reference) : ref_(std::move(reference)), acc_(ref_.size()) {
    ref_norm_ = norm2(ref_);
    require(ref_norm_ > 0.0, "k_star: reference has zero norm");
  }
  void consume(std::size_t, ConstView x, const StepDiagnostics& diag) override {
    acc_.update(x);
    relative_errors.push_back(std::sqrt(squared_distance(acc_.mean(), ref_)) / ref_norm_);
    inner_total_ += diag.certificate.inner_iterations;
    cumulative_inner.push_back(inner_total_);
  }

  std::optional<std::size_t> k_star(double delta) const { return ipgla::k_star(relative_errors, delta); }

  /// Total inner iterations spent up to k*(delta), if reached.
  std::optional<long long> inner_at(double delta) const {
    const auto k = k_star(delta);
    if (!k) return std::nullopt;
    return cumulative_inner[*k - 1];
  }

  Vec relative_errors;
  std::vector<long long> cumulative_inner;

 private:
  Vec ref_;
  double ref_norm_ = 0.0;
  RunningMoments acc_;
  long long inner_total_ = 0;
};

}  // namespace ipgla

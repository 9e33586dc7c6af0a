#pragma once

// Linear operators on images: periodic convolution, orthogonal Haar wavelets,
// and the forward-difference gradient with its adjoint.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <utility>

#include "ipgla/core.hpp"
#include "ipgla/image.hpp"

namespace ipgla {

/// Spatial-domain blur kernel with odd side lengths, applied with periodic boundary.
struct ConvolutionKernel {
  std::size_t rows = 1;
  std::size_t cols = 1;
  Vec taps{1.0};

  double operator()(std::size_t r, std::size_t c) const { return taps[r * cols + c]; }
};

inline ConvolutionKernel make_gaussian_blur(std::size_t size, double stddev) {
  require(size % 2 == 1, "make_gaussian_blur: size must be odd");
  require(stddev > 0.0, "make_gaussian_blur: std must be positive");
  ConvolutionKernel k{size, size, Vec(size * size)};
  const auto half = static_cast<long>(size / 2);
  double total = 0.0;
  for (long i = -half; i <= half; ++i)
    for (long j = -half; j <= half; ++j) {
      const double v = std::exp(-static_cast<double>(i * i + j * j) / (2.0 * stddev * stddev));
      k.taps[static_cast<std::size_t>((i + half) * static_cast<long>(size) + (j + half))] = v;
      total += v;
    }
  for (double& t : k.taps) t /= total;
  return k;
}

inline ConvolutionKernel make_uniform_blur(std::size_t size) {
  require(size % 2 == 1, "make_uniform_blur: size must be odd");
  const double v = 1.0 / static_cast<double>(size * size);
  return ConvolutionKernel{size, size, Vec(size * size, v)};
}

namespace detail {

inline std::size_t wrap(long i, std::size_t n) {
  const long m = static_cast<long>(n);
  long r = i % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

// out += weight * x shifted by (dr, dc) with periodic wrap: out[r][c] += w * x[r-dr][c-dc].
inline void accumulate_shifted(ConstView x, MutView out, Shape s, long dr, long dc, double weight) {
  const std::size_t w = s.width;
  const std::size_t sc = wrap(-dc, w);  // source column for c = 0
  for (std::size_t r = 0; r < s.height; ++r) {
    const double* src = x.data() + wrap(static_cast<long>(r) - dr, s.height) * w;
    double* dst = out.data() + r * w;
    const std::size_t first = w - sc;
    for (std::size_t c = 0; c < first; ++c) dst[c] += weight * src[sc + c];
    for (std::size_t c = first; c < w; ++c) dst[c] += weight * src[c - first];
  }
}

}  // namespace detail

/// Periodic convolution out = k * x.
inline void conv_apply(const ConvolutionKernel& k, Shape s, ConstView x, MutView out) {
  require(x.size() == s.size() && out.size() == s.size(), "conv_apply: shape mismatch");
  require(k.rows <= s.height && k.cols <= s.width, "conv_apply: kernel larger than image");
  std::fill(out.begin(), out.end(), 0.0);
  const auto hr = static_cast<long>(k.rows / 2), hc = static_cast<long>(k.cols / 2);
  for (std::size_t a = 0; a < k.rows; ++a)
    for (std::size_t b = 0; b < k.cols; ++b) {
      const double t = k(a, b);
      if (t != 0.0) detail::accumulate_shifted(x, out, s, static_cast<long>(a) - hr, static_cast<long>(b) - hc, t);
    }
}

/// Adjoint of conv_apply: convolution with the flipped kernel.
inline void conv_adjoint(const ConvolutionKernel& k, Shape s, ConstView x, MutView out) {
  require(x.size() == s.size() && out.size() == s.size(), "conv_adjoint: shape mismatch");
  require(k.rows <= s.height && k.cols <= s.width, "conv_adjoint: kernel larger than image");
  std::fill(out.begin(), out.end(), 0.0);
  const auto hr = static_cast<long>(k.rows / 2), hc = static_cast<long>(k.cols / 2);
  for (std::size_t a = 0; a < k.rows; ++a)
    for (std::size_t b = 0; b < k.cols; ++b) {
      const double t = k(a, b);
      if (t != 0.0) detail::accumulate_shifted(x, out, s, hr - static_cast<long>(a), hc - static_cast<long>(b), t);
    }
}

inline ImageBuffer conv_apply(const ConvolutionKernel& k, const ImageBuffer& img) {
  ImageBuffer out(img.shape);
  conv_apply(k, img.shape, img.data, out.data);
  return out;
}

inline ImageBuffer conv_adjoint(const ConvolutionKernel& k, const ImageBuffer& img) {
  ImageBuffer out(img.shape);
  conv_adjoint(k, img.shape, img.data, out.data);
  return out;
}

/// Eigenvalues of A*A for the periodic convolution A on grid `s`, i.e. |DFT(embedded kernel)|^2,
/// in row-major frequency order (u, v).
inline Vec conv_eigenvalues(const ConvolutionKernel& k, Shape s) {
  require(k.rows <= s.height && k.cols <= s.width, "conv_spectrum: kernel larger than image");
  const auto hr = static_cast<long>(k.rows / 2), hc = static_cast<long>(k.cols / 2);
  const double two_pi = 2.0 * std::numbers::pi;
  // Phase tables per frequency and per tap offset.
  std::vector<double> cr(s.height * k.rows), sr(s.height * k.rows), cc(s.width * k.cols), sc(s.width * k.cols);
  for (std::size_t u = 0; u < s.height; ++u)
    for (std::size_t a = 0; a < k.rows; ++a) {
      const double ph = two_pi * static_cast<double>(u) * static_cast<double>(static_cast<long>(a) - hr) /
                        static_cast<double>(s.height);
      cr[u * k.rows + a] = std::cos(ph);
      sr[u * k.rows + a] = std::sin(ph);
    }
  for (std::size_t v = 0; v < s.width; ++v)
    for (std::size_t b = 0; b < k.cols; ++b) {
      const double ph = two_pi * static_cast<double>(v) * static_cast<double>(static_cast<long>(b) - hc) /
                        static_cast<double>(s.width);
      cc[v * k.cols + b] = std::cos(ph);
      sc[v * k.cols + b] = std::sin(ph);
    }
  Vec eig(s.size());
  // Separable in the phase: sum_a e^{-i pa} sum_b k[a][b] e^{-i qb}.
  std::vector<double> row_re(k.rows), row_im(k.rows);
  for (std::size_t v = 0; v < s.width; ++v) {
    for (std::size_t a = 0; a < k.rows; ++a) {
      double re = 0.0, im = 0.0;
      for (std::size_t b = 0; b < k.cols; ++b) {
        re += k(a, b) * cc[v * k.cols + b];
        im -= k(a, b) * sc[v * k.cols + b];
      }
      row_re[a] = re;
      row_im[a] = im;
    }
    for (std::size_t u = 0; u < s.height; ++u) {
      double re = 0.0, im = 0.0;
      for (std::size_t a = 0; a < k.rows; ++a) {
        const double c = cr[u * k.rows + a], sn = -sr[u * k.rows + a];
        re += row_re[a] * c - row_im[a] * sn;
        im += row_re[a] * sn + row_im[a] * c;
      }
      eig[u * s.width + v] = re * re + im * im;
    }
  }
  return eig;
}

/// Exact (min, max) eigenvalues of A*A under periodic boundary.
inline std::pair<double, double> conv_spectrum_bounds(const ConvolutionKernel& k, Shape s) {
  const Vec eig = conv_eigenvalues(k, s);
  const auto [lo, hi] = std::minmax_element(eig.begin(), eig.end());
  return {*lo, *hi};
}

// ---------------------------------------------------------------------------
// Orthogonal 2D Haar transform (Mallat layout: approximation in the top-left block).

namespace detail {

inline void haar_check(Shape s, int levels) {
  require(levels >= 0, "dwt: negative level count");
  const std::size_t f = std::size_t{1} << levels;
  require(s.height % f == 0 && s.width % f == 0, "dwt: side lengths must be divisible by 2^levels");
}

// One analysis step on n entries with stride; scratch has room for n values.
inline void haar_step(double* x, std::size_t n, std::size_t stride, double* scratch) {
  const double r = std::numbers::sqrt2 / 2.0;
  const std::size_t h = n / 2;
  for (std::size_t j = 0; j < h; ++j) {
    const double a = x[2 * j * stride], b = x[(2 * j + 1) * stride];
    scratch[j] = (a + b) * r;
    scratch[h + j] = (a - b) * r;
  }
  for (std::size_t j = 0; j < n; ++j) x[j * stride] = scratch[j];
}

inline void haar_step_inverse(double* x, std::size_t n, std::size_t stride, double* scratch) {
  const double r = std::numbers::sqrt2 / 2.0;
  const std::size_t h = n / 2;
  for (std::size_t j = 0; j < h; ++j) {
    const double a = x[j * stride], d = x[(h + j) * stride];
    scratch[2 * j] = (a + d) * r;
    scratch[2 * j + 1] = (a - d) * r;
  }
  for (std::size_t j = 0; j < n; ++j) x[j * stride] = scratch[j];
}

}  // namespace detail

inline void dwt_forward(Shape s, int levels, ConstView image, MutView coeffs) {
  detail::haar_check(s, levels);
  require(image.size() == s.size() && coeffs.size() == s.size(), "dwt_forward: shape mismatch");
  std::copy(image.begin(), image.end(), coeffs.begin());
  Vec scratch(std::max(s.height, s.width));
  for (int l = 0; l < levels; ++l) {
    const std::size_t h = s.height >> l, w = s.width >> l;
    for (std::size_t r = 0; r < h; ++r) detail::haar_step(coeffs.data() + r * s.width, w, 1, scratch.data());
    for (std::size_t c = 0; c < w; ++c) detail::haar_step(coeffs.data() + c, h, s.width, scratch.data());
  }
}

inline void dwt_inverse(Shape s, int levels, ConstView coeffs, MutView image) {
  detail::haar_check(s, levels);
  require(image.size() == s.size() && coeffs.size() == s.size(), "dwt_inverse: shape mismatch");
  std::copy(coeffs.begin(), coeffs.end(), image.begin());
  Vec scratch(std::max(s.height, s.width));
  for (int l = levels - 1; l >= 0; --l) {
    const std::size_t h = s.height >> l, w = s.width >> l;
    for (std::size_t c = 0; c < w; ++c) detail::haar_step_inverse(image.data() + c, h, s.width, scratch.data());
    for (std::size_t r = 0; r < h; ++r) detail::haar_step_inverse(image.data() + r * s.width, w, 1, scratch.data());
  }
}

inline ImageBuffer dwt_forward(const ImageBuffer& img, int levels) {
  ImageBuffer out(img.shape);
  dwt_forward(img.shape, levels, img.data, out.data);
  return out;
}

inline ImageBuffer dwt_inverse(const ImageBuffer& coeffs, int levels) {
  ImageBuffer out(coeffs.shape);
  dwt_inverse(coeffs.shape, levels, coeffs.data, out.data);
  return out;
}

// ---------------------------------------------------------------------------
// Forward differences with Neumann boundary; the last column (row) difference is zero.

inline void grad_apply(Shape s, ConstView x, MutView gh, MutView gv) {
  require(s.height >= 2 && s.width >= 2, "grad_apply: image must be at least 2x2");
  require(x.size() == s.size() && gh.size() == s.size() && gv.size() == s.size(), "grad_apply: shape mismatch");
  const std::size_t H = s.height, W = s.width;
  for (std::size_t r = 0; r < H; ++r) {
    const double* row = x.data() + r * W;
    for (std::size_t c = 0; c + 1 < W; ++c) gh[r * W + c] = row[c + 1] - row[c];
    gh[r * W + W - 1] = 0.0;
    if (r + 1 < H) {
      const double* next = row + W;
      for (std::size_t c = 0; c < W; ++c) gv[r * W + c] = next[c] - row[c];
    } else {
      for (std::size_t c = 0; c < W; ++c) gv[r * W + c] = 0.0;
    }
  }
}

/// Adjoint of grad_apply (negative divergence).
inline void grad_adjoint(Shape s, ConstView gh, ConstView gv, MutView out) {
  require(s.height >= 2 && s.width >= 2, "grad_adjoint: image must be at least 2x2");
  require(out.size() == s.size() && gh.size() == s.size() && gv.size() == s.size(), "grad_adjoint: shape mismatch");
  const std::size_t H = s.height, W = s.width;
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const std::size_t i = r * W + c;
      double v = 0.0;
      if (c > 0) v += gh[i - 1];
      if (c + 1 < W) v -= gh[i];
      if (r > 0) v += gv[i - W];
      if (r + 1 < H) v -= gv[i];
      out[i] = v;
    }
}

inline GradientField grad_apply(const ImageBuffer& img) {
  GradientField g(img.shape);
  grad_apply(img.shape, img.data, g.horizontal, g.vertical);
  return g;
}

inline ImageBuffer grad_adjoint(const GradientField& g) {
  require(g.horizontal.size() == g.shape.size() && g.vertical.size() == g.shape.size(),
          "grad_adjoint: components differ in shape");
  ImageBuffer out(g.shape);
  grad_adjoint(g.shape, g.horizontal, g.vertical, out.data);
  return out;
}

/// Squared operator-norm bound of the gradient: ||B||^2 <= 8.
inline constexpr double kGradNormSqBound = 8.0;

// ---------------------------------------------------------------------------

/// Linear forward model shared read-only by potentials; implementations are immutable.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t input_size() const = 0;
  virtual std::size_t output_size() const = 0;
  virtual void apply(ConstView x, MutView out) const = 0;
  virtual void adjoint(ConstView y, MutView out) const = 0;
  /// Extreme eigenvalues of A*A.
  virtual std::pair<double, double> spectrum_bounds() const = 0;
};

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(std::size_t n) : n_(n) {}
  std::size_t input_size() const override { return n_; }
  std::size_t output_size() const override { return n_; }
  void apply(ConstView x, MutView out) const override {
    require(x.size() == n_ && out.size() == n_, "IdentityOperator: size mismatch");
    std::copy(x.begin(), x.end(), out.begin());
  }
  void adjoint(ConstView y, MutView out) const override { apply(y, out); }
  std::pair<double, double> spectrum_bounds() const override { return {1.0, 1.0}; }

 private:
  std::size_t n_;
};

class ConvolutionOperator final : public LinearOperator {
 public:
  ConvolutionOperator(ConvolutionKernel k, Shape s) : kernel_(std::move(k)), shape_(s) {
    bounds_ = conv_spectrum_bounds(kernel_, shape_);
  }
  std::size_t input_size() const override { return shape_.size(); }
  std::size_t output_size() const override { return shape_.size(); }
  void apply(ConstView x, MutView out) const override { conv_apply(kernel_, shape_, x, out); }
  void adjoint(ConstView y, MutView out) const override { conv_adjoint(kernel_, shape_, y, out); }
  std::pair<double, double> spectrum_bounds() const override { return bounds_; }

  const ConvolutionKernel& kernel() const { return kernel_; }
  Shape shape() const { return shape_; }

 private:
  ConvolutionKernel kernel_;
  Shape shape_;
  std::pair<double, double> bounds_;
};

/// A composed with the inverse wavelet transform: the input is a coefficient vector z
/// and the image is W^T z. The A*A spectrum is unchanged since W is orthogonal.
class WaveletSynthesisOperator final : public LinearOperator {
 public:
  WaveletSynthesisOperator(std::shared_ptr<const LinearOperator> image_op, Shape s, int levels)
      : op_(std::move(image_op)), shape_(s), levels_(levels) {
    detail::haar_check(s, levels);
    require(op_->input_size() == s.size(), "WaveletSynthesisOperator: operator/shape mismatch");
  }
  std::size_t input_size() const override { return shape_.size(); }
  std::size_t output_size() const override { return op_->output_size(); }
  void apply(ConstView z, MutView out) const override {
    Vec img(shape_.size());
    dwt_inverse(shape_, levels_, z, img);
    op_->apply(img, out);
  }
  void adjoint(ConstView y, MutView out) const override {
    Vec img(shape_.size());
    op_->adjoint(y, img);
    dwt_forward(shape_, levels_, img, out);
  }
  std::pair<double, double> spectrum_bounds() const override { return op_->spectrum_bounds(); }

  int levels() const { return levels_; }
  Shape shape() const { return shape_; }

 private:
  std::shared_ptr<const LinearOperator> op_;
  Shape shape_;
  int levels_;
};

}  // namespace ipgla

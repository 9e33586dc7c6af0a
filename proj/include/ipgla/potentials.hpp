#pragma once

// Smooth potentials F (value, gradient, Lipschitz and strong-convexity constants)
// and nonsmooth potentials G (value, domain, a subgradient selection).

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "ipgla/core.hpp"
#include "ipgla/image.hpp"
#include "ipgla/linops.hpp"

namespace ipgla {

/// Differentiable convex potential with L-Lipschitz gradient and strong-convexity modulus lambda_F.
/// value() returns +inf outside the domain.
class SmoothPotential {
 public:
  virtual ~SmoothPotential() = default;
  virtual std::size_t dimension() const = 0;
  virtual double value(ConstView x) const = 0;
  /// Throws DomainError outside the domain.
  virtual void gradient(ConstView x, MutView out) const = 0;
  virtual double lipschitz() const = 0;
  virtual double strong_convexity() const = 0;

  Vec gradient(ConstView x) const {
    Vec g(dimension());
    gradient(x, g);
    return g;
  }
};

/// F(x) = ||Ax - y||^2 / (2 sigma^2).
class GaussianLikelihood final : public SmoothPotential {
 public:
  GaussianLikelihood(std::shared_ptr<const LinearOperator> op, Vec data, double sigma)
      : op_(std::move(op)), y_(std::move(data)), sigma_(sigma) {
    require(sigma > 0.0, "gaussian_likelihood: sigma must be positive");
    require(y_.size() == op_->output_size(), "gaussian_likelihood: data size does not match operator");
    const auto [lo, hi] = op_->spectrum_bounds();
    L_ = hi / (sigma_ * sigma_);
    lambda_ = lo / (sigma_ * sigma_);
  }

  using SmoothPotential::gradient;
  std::size_t dimension() const override { return op_->input_size(); }

  double value(ConstView x) const override {
    Vec r(y_.size());
    residual(x, r);
    return dot(r, r) / (2.0 * sigma_ * sigma_);
  }

  void gradient(ConstView x, MutView out) const override {
    Vec r(y_.size());
    residual(x, r);
    op_->adjoint(r, out);
    const double s = 1.0 / (sigma_ * sigma_);
    for (double& v : out) v *= s;
  }

  double lipschitz() const override { return L_; }
  double strong_convexity() const override { return lambda_; }
  double sigma() const { return sigma_; }
  const Vec& data() const { return y_; }
  const LinearOperator& op() const { return *op_; }

 private:
  void residual(ConstView x, MutView r) const {
    require(x.size() == dimension(), "gaussian_likelihood: shape mismatch");
    op_->apply(x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y_[i];
  }

  std::shared_ptr<const LinearOperator> op_;
  Vec y_;
  double sigma_;
  double L_ = 0.0;
  double lambda_ = 0.0;
};

inline std::shared_ptr<GaussianLikelihood> gaussian_likelihood(std::shared_ptr<const LinearOperator> op, Vec y,
                                                               double sigma) {
  return std::make_shared<GaussianLikelihood>(std::move(op), std::move(y), sigma);
}

/// Poisson negative log-likelihood F(x) = sum_i (Ax)_i - y_i log((Ax)_i + b_i).
///
/// The domain is {x : (Ax)_i + b_i > 0 for all i}. The positivity constraint on x itself
/// belongs in G. The Lipschitz constant is the conservative global bound
/// ||A||^2 max_i y_i / b_i^2; use backtracking when it is too pessimistic.
class PoissonLikelihood final : public SmoothPotential {
 public:
  PoissonLikelihood(std::shared_ptr<const LinearOperator> op, Vec counts, Vec background)
      : op_(std::move(op)), y_(std::move(counts)), b_(std::move(background)) {
    require(y_.size() == op_->output_size() && b_.size() == y_.size(), "poisson_likelihood: size mismatch");
    double ratio = 0.0;
    for (std::size_t i = 0; i < y_.size(); ++i) {
      require(b_[i] > 0.0, "poisson_likelihood: background must be positive");
      require(y_[i] >= 0.0 && std::floor(y_[i]) == y_[i], "poisson_likelihood: counts must be nonnegative integers");
      ratio = std::max(ratio, y_[i] / (b_[i] * b_[i]));
    }
    L_ = op_->spectrum_bounds().second * ratio;
  }

  using SmoothPotential::gradient;
  std::size_t dimension() const override { return op_->input_size(); }

  double value(ConstView x) const override {
    require(x.size() == dimension(), "poisson_likelihood: shape mismatch");
    Vec ax(y_.size());
    op_->apply(x, ax);
    double v = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) {
      const double m = ax[i] + b_[i];
      if (!(m > 0.0)) return kInf;
      v += ax[i];
      if (y_[i] > 0.0) v -= y_[i] * std::log(m);
    }
    return v;
  }

  void gradient(ConstView x, MutView out) const override {
    require(x.size() == dimension(), "poisson_likelihood: shape mismatch");
    Vec w(y_.size());
    op_->apply(x, w);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double m = w[i] + b_[i];
      if (!(m > 0.0)) throw DomainError("poisson_likelihood: (Ax)_i + background_i <= 0");
      w[i] = 1.0 - y_[i] / m;
    }
    op_->adjoint(w, out);
  }

  double lipschitz() const override { return L_; }
  double strong_convexity() const override { return 0.0; }
  const Vec& counts() const { return y_; }

 private:
  std::shared_ptr<const LinearOperator> op_;
  Vec y_;
  Vec b_;
  double L_ = 0.0;
};

inline std::shared_ptr<PoissonLikelihood> poisson_likelihood(std::shared_ptr<const LinearOperator> op, Vec y,
                                                             Vec background) {
  return std::make_shared<PoissonLikelihood>(std::move(op), std::move(y), std::move(background));
}

// ---------------------------------------------------------------------------

/// Proper convex lsc potential; value() is +inf exactly outside the domain.
class NonsmoothPotential {
 public:
  virtual ~NonsmoothPotential() = default;
  virtual double value(ConstView x) const = 0;
  virtual bool in_domain(ConstView x) const = 0;
  /// A deterministic element of the subdifferential at x (used as a Langevin drift).
  virtual void subgradient(ConstView x, MutView out) const = 0;
};

class ZeroPotential final : public NonsmoothPotential {
 public:
  double value(ConstView) const override { return 0.0; }
  bool in_domain(ConstView) const override { return true; }
  void subgradient(ConstView, MutView out) const override { std::fill(out.begin(), out.end(), 0.0); }
};

/// Indicator of the nonnegative orthant.
class NonnegIndicator final : public NonsmoothPotential {
 public:
  double value(ConstView x) const override { return in_domain(x) ? 0.0 : kInf; }
  bool in_domain(ConstView x) const override {
    return std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0; });
  }
  void subgradient(ConstView, MutView out) const override { std::fill(out.begin(), out.end(), 0.0); }
};

/// mu * ||z||_1. With d = 1 this is the Laplace prior alpha|x|.
class L1Potential final : public NonsmoothPotential {
 public:
  explicit L1Potential(double weight) : mu_(weight) { require(weight > 0.0, "l1_potential: weight must be positive"); }
  double value(ConstView z) const override {
    double s = 0.0;
    for (double v : z) s += std::abs(v);
    return mu_ * s;
  }
  bool in_domain(ConstView) const override { return true; }
  void subgradient(ConstView z, MutView out) const override {
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? mu_ : (z[i] < 0.0 ? -mu_ : 0.0);
  }
  double weight() const { return mu_; }

 private:
  double mu_;
};

inline double total_variation(Shape s, ConstView x) {
  Vec gh(s.size()), gv(s.size());
  grad_apply(s, x, gh, gv);
  double tv = 0.0;
  for (std::size_t i = 0; i < gh.size(); ++i) tv += std::hypot(gh[i], gv[i]);
  return tv;
}

/// mu * TV(x) (isotropic), optionally plus the indicator of x >= 0.
class TVPotential final : public NonsmoothPotential {
 public:
  TVPotential(double weight, Shape s, bool nonneg = false) : mu_(weight), shape_(s), nonneg_(nonneg) {
    require(weight > 0.0, "tv_potential: weight must be positive");
  }
  double value(ConstView x) const override {
    require(x.size() == shape_.size(), "tv_potential: shape mismatch");
    if (!in_domain(x)) return kInf;
    return mu_ * total_variation(shape_, x);
  }
  bool in_domain(ConstView x) const override {
    return !nonneg_ || std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0; });
  }
  /// -mu * div(Bx/|Bx|) with 0 where the gradient vanishes.
  void subgradient(ConstView x, MutView out) const override {
    Vec gh(shape_.size()), gv(shape_.size());
    grad_apply(shape_, x, gh, gv);
    for (std::size_t i = 0; i < gh.size(); ++i) {
      const double n = std::hypot(gh[i], gv[i]);
      gh[i] = n > 0.0 ? mu_ * gh[i] / n : 0.0;
      gv[i] = n > 0.0 ? mu_ * gv[i] / n : 0.0;
    }
    grad_adjoint(shape_, gh, gv, out);
  }
  double weight() const { return mu_; }
  Shape shape() const { return shape_; }
  bool nonneg() const { return nonneg_; }

 private:
  double mu_;
  Shape shape_;
  bool nonneg_;
};

inline std::shared_ptr<L1Potential> l1_potential(double weight) { return std::make_shared<L1Potential>(weight); }

inline std::shared_ptr<TVPotential> tv_potential(double weight, Shape s, bool nonneg = false) {
  return std::make_shared<TVPotential>(weight, s, nonneg);
}

}  // namespace ipgla

#pragma once

/**
 * @file inexact_prox.hpp
 * @brief Inexact proximal operators with certificates.
 *
 * A point x is an eps-approximation of prox_{gamma G}(y) when (y - x)/gamma lies in the
 * eps-subdifferential of G at x. Providers return the point together with the evidence
 * for that claim: exact construction (closed forms), a duality gap <= eps (dual solvers
 * for composite G = H(Bx)), or the number of inner iterations spent (fixed budgets).
 *
 * Dual scaling: for G = mu H0(Bx) with H0 a norm, the dual solvers iterate on w = gamma z,
 * constrained to the ball of radius mu*gamma, and recover the primal as x = y - B^T w.
 * With this scaling the duality gap reduces to (mu*gamma H0(Bx) - <w, Bx>) / gamma.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <variant>

#include "ipgla/core.hpp"
#include "ipgla/image.hpp"
#include "ipgla/linops.hpp"
#include "ipgla/potentials.hpp"

namespace ipgla {

struct TargetEpsilon {
  double eps = 0.0;
};

struct InnerBudget {
  int iterations = 1;
};

using Accuracy = std::variant<TargetEpsilon, InnerBudget>;

struct ProxRequest {
  ConstView input;
  double step = 1.0;
  Accuracy accuracy = TargetEpsilon{0.0};
};

enum class ProxMode { closed_form, gap_certified, budget };

inline const char* to_string(ProxMode m) {
  switch (m) {
    case ProxMode::closed_form: return "closed_form";
    case ProxMode::gap_certified: return "gap_certified";
    case ProxMode::budget: return "budget";
  }
  return "?";
}

struct ProxCertificate {
  Vec point;
  ProxMode mode = ProxMode::closed_form;
  std::optional<double> gap_achieved;
  int inner_iterations = 0;
  std::optional<double> epsilon_contract;
  /// False when a certified request ran out of inner iterations before reaching its target.
  bool certified = true;
};

/// Chain-local solver state carried between prox calls.
struct WarmStart {
  Vec dual;
};

enum class InexactSelector { lower, upper, exact };

// ---------------------------------------------------------------------------
// 1D closed forms.

/// Grid test of p in the eps-subdifferential of G at u:
/// G(v) >= G(u) + p (v - u) - eps for every grid point v (up to rounding slack).
inline bool eps_subgradient_check_1d(const std::function<double(double)>& G, double u, double p, double eps,
                                     ConstView grid, double rounding = 1e-12) {
  require(!grid.empty(), "eps_subgradient_check_1d: empty grid");
  const double gu = G(u);
  for (double v : grid) {
    const double rhs = gu + p * (v - u) - eps;
    const double slack = rounding * (1.0 + std::abs(gu) + std::abs(p * (v - u)));
    if (G(v) < rhs - slack) return false;
  }
  return true;
}

namespace detail {
inline double h_tau_eps(double x, double tau, double eps) {
  const double a = (x - tau) / 2.0;
  return a + std::sqrt(a * a + eps * tau);
}
}  // namespace detail

/// Endpoint of the set of eps-approximations of prox_{tau|.|}(x):
/// [max(-h(-x), x - tau), min(h(x), x + tau)] with h(x) = (x - tau)/2 + sqrt((x - tau)^2/4 + eps tau).
inline double inexact_prox_abs(double x, double tau, double eps, InexactSelector selector = InexactSelector::upper) {
  require(tau > 0.0, "inexact_prox_abs: tau must be positive");
  require(eps >= 0.0, "inexact_prox_abs: eps must be nonnegative");
  switch (selector) {
    case InexactSelector::exact: return std::copysign(std::max(std::abs(x) - tau, 0.0), x);
    case InexactSelector::lower: return std::max(-detail::h_tau_eps(-x, tau, eps), x - tau);
    case InexactSelector::upper: return std::min(detail::h_tau_eps(x, tau, eps), x + tau);
  }
  return x;
}

/// Boundary point of the eps-approximations of prox_{tau G}(y) for G(x) = ||x - z||^2 / (2 gamma_q):
/// (gamma_q y + tau (z + r)) / (gamma_q + tau) with r = sqrt(2 gamma_q eps) * direction.
inline Vec inexact_prox_quadratic(ConstView y, ConstView z, double gamma_q, double tau, double eps, ConstView direction) {
  require(gamma_q > 0.0 && tau > 0.0, "inexact_prox_quadratic: scales must be positive");
  require(eps >= 0.0, "inexact_prox_quadratic: eps must be nonnegative");
  require(y.size() == z.size() && z.size() == direction.size(), "inexact_prox_quadratic: size mismatch");
  require(std::abs(norm2(direction) - 1.0) < 1e-9, "inexact_prox_quadratic: direction must be a unit vector");
  const double radius = std::sqrt(2.0 * gamma_q * eps);
  Vec out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    out[i] = (gamma_q * y[i] + tau * (z[i] + radius * direction[i])) / (gamma_q + tau);
  return out;
}

inline Vec soft_threshold(ConstView y, double threshold) {
  Vec out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = std::copysign(std::max(std::abs(y[i]) - threshold, 0.0), y[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Duality gap for G(x) = H(Bx), in the natural dual variable z:
//   gap(x, z) = G(x) + ||x - y||^2/(2 gamma) + gamma/2 ||B^T z||^2 - <B^T z, y> + H*(z).

/// G = mu ||x||_1, B = I, H* = indicator of the box [-mu, mu].
struct L1Composite {
  double mu;

  double primal(ConstView x) const { return L1Potential(mu).value(x); }
  Vec adjoint_B(ConstView z) const { return Vec(z.begin(), z.end()); }
  double conjugate(ConstView z) const {
    for (double v : z)
      if (std::abs(v) > mu * (1.0 + 1e-12)) return kInf;
    return 0.0;
  }
};

/// G = mu TV(x), B = (horizontal, vertical) differences, H* = indicator of ||z||_{2,inf} <= mu.
/// z is stored as [horizontal components, vertical components].
struct TVComposite {
  double mu;
  Shape shape;

  double primal(ConstView x) const { return mu * total_variation(shape, x); }
  Vec adjoint_B(ConstView z) const {
    const std::size_t n = shape.size();
    require(z.size() == 2 * n, "TVComposite: dual field has wrong size");
    Vec out(n);
    grad_adjoint(shape, z.subspan(0, n), z.subspan(n, n), out);
    return out;
  }
  double conjugate(ConstView z) const {
    const std::size_t n = shape.size();
    for (std::size_t i = 0; i < n; ++i)
      if (std::hypot(z[i], z[n + i]) > mu * (1.0 + 1e-12)) return kInf;
    return 0.0;
  }
};

template <class Composite>
double duality_gap(ConstView x, ConstView z, ConstView y, double gamma, const Composite& g) {
  require(gamma > 0.0, "duality_gap: gamma must be positive");
  require(x.size() == y.size(), "duality_gap: shape mismatch");
  const double hstar = g.conjugate(z);
  if (!std::isfinite(hstar)) return kInf;
  const Vec bz = g.adjoint_B(z);
  return g.primal(x) + squared_distance(x, y) / (2.0 * gamma) + 0.5 * gamma * dot(bz, bz) - dot(bz, y) + hstar;
}

// ---------------------------------------------------------------------------
// l1: projected gradient on the box-constrained dual.

struct L1DualOptions {
  /// Step as a fraction of 1/Lipschitz of the dual gradient. A full step solves the
  /// separable dual in one iteration, so the default takes half steps.
  double step_fraction = 0.5;
  int max_inner = 10000;
};

namespace detail {
inline double l1_scaled_gap(ConstView x, ConstView w, double mu, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += mu * gamma * std::abs(x[i]) - w[i] * x[i];
  return s / gamma;
}
}  // namespace detail

/// eps-approximation of prox_{gamma mu ||.||_1}(y), certified by the duality gap.
/// eps = 0 returns the soft threshold (closed form).
inline ProxCertificate inexact_prox_l1_dual(ConstView y, double mu, double gamma, double eps,
                                            const L1DualOptions& opt = {}, std::vector<double>* gap_trace = nullptr) {
  require(mu > 0.0 && gamma > 0.0, "inexact_prox_l1_dual: weight and step must be positive");
  require(eps >= 0.0, "inexact_prox_l1_dual: eps must be nonnegative");
  ProxCertificate cert;
  if (eps == 0.0) {
    cert.point = soft_threshold(y, mu * gamma);
    cert.mode = ProxMode::closed_form;
    cert.gap_achieved = 0.0;
    cert.epsilon_contract = 0.0;
    return cert;
  }
  const double radius = mu * gamma;
  const std::size_t n = y.size();
  Vec w(n, 0.0), x(y.begin(), y.end());
  double gap = detail::l1_scaled_gap(x, w, mu, gamma);
  Vec best_x = x;
  double best_gap = gap;
  if (gap_trace) gap_trace->push_back(best_gap);
  int it = 0;
  while (best_gap > eps && it < opt.max_inner) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = std::clamp(w[i] + opt.step_fraction * (y[i] - w[i]), -radius, radius);
      x[i] = y[i] - w[i];
    }
    ++it;
    gap = detail::l1_scaled_gap(x, w, mu, gamma);
    if (gap < best_gap) {
      best_gap = gap;
      best_x = x;
    }
    if (gap_trace) gap_trace->push_back(best_gap);
  }
  cert.point = std::move(best_x);
  cert.mode = ProxMode::gap_certified;
  cert.gap_achieved = std::max(best_gap, 0.0);
  cert.inner_iterations = it;
  cert.epsilon_contract = eps;
  cert.certified = best_gap <= eps;
  return cert;
}

// ---------------------------------------------------------------------------
// TV: accelerated projected gradient on the ROF dual.

struct TVDualOptions {
  int max_inner = 100000;
};

namespace detail {

inline void project_pixel_balls(MutView wh, MutView wv, double radius) {
  for (std::size_t i = 0; i < wh.size(); ++i) {
    const double n = std::hypot(wh[i], wv[i]);
    if (n > radius) {
      const double s = radius / n;
      wh[i] *= s;
      wv[i] *= s;
    }
  }
}

// x = y - B^T w, and the scaled duality gap (mu gamma TV(x) - <w, Bx>) / gamma.
struct RofEval {
  Shape shape;
  double radius;
  double gamma;
  Vec gh, gv;

  RofEval(Shape s, double r, double g) : shape(s), radius(r), gamma(g), gh(s.size()), gv(s.size()) {}

  double primal_and_gap(ConstView y, ConstView wh, ConstView wv, MutView x) {
    grad_adjoint(shape, wh, wv, x);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = y[i] - x[i];
    grad_apply(shape, x, gh, gv);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += radius * std::hypot(gh[i], gv[i]) - (wh[i] * gh[i] + wv[i] * gv[i]);
    return s / gamma;
  }
};

}  // namespace detail

/// eps-approximation of prox_{gamma mu TV}(y) on an image of shape `s`.
///
/// Runs FISTA on the dual with per-pixel ball projections of radius mu*gamma and step
/// gamma/8 (||B||^2 <= 8). Stops at the first iterate with duality gap <= eps. If eps is
/// not reached within max_inner iterations the best iterate is returned with
/// certified = false. eps = 0 always runs the full budget.
inline ProxCertificate inexact_prox_tv(ConstView y, Shape s, double mu, double gamma, double eps,
                                       const TVDualOptions& opt = {}, WarmStart* warm = nullptr,
                                       std::vector<double>* gap_trace = nullptr) {
  require(mu > 0.0 && gamma > 0.0, "inexact_prox_tv: weight and step must be positive");
  require(eps >= 0.0, "inexact_prox_tv: eps must be nonnegative");
  require(eps > 0.0 || opt.max_inner > 0, "inexact_prox_tv: need eps > 0 or an inner budget");
  require(y.size() == s.size(), "inexact_prox_tv: shape mismatch");
  const std::size_t n = s.size();
  const double radius = mu * gamma;

  Vec w(2 * n, 0.0);
  if (warm && warm->dual.size() == 2 * n) {
    w = warm->dual;
    detail::project_pixel_balls(MutView(w).subspan(0, n), MutView(w).subspan(n, n), radius);
  }
  MutView wh = MutView(w).subspan(0, n), wv = MutView(w).subspan(n, n);

  detail::RofEval eval(s, radius, gamma);
  Vec x(n), best_x(n), best_w;
  double best_gap = eval.primal_and_gap(y, wh, wv, x);
  best_x = x;
  best_w = w;
  if (gap_trace) gap_trace->push_back(best_gap);

  Vec v = w, w_prev(2 * n), xv(n), gh(n), gv(n);
  double t = 1.0;
  int it = 0;
  while (!(best_gap <= eps) && it < opt.max_inner) {
    // Gradient step from the extrapolated point v: w = P(v + (1/8) B x(v)).
    ConstView vh = ConstView(v).subspan(0, n), vv = ConstView(v).subspan(n, n);
    grad_adjoint(s, vh, vv, xv);
    for (std::size_t i = 0; i < n; ++i) xv[i] = y[i] - xv[i];
    grad_apply(s, xv, gh, gv);
    w_prev = w;
    for (std::size_t i = 0; i < n; ++i) {
      wh[i] = v[i] + gh[i] / kGradNormSqBound;
      wv[i] = v[n + i] + gv[i] / kGradNormSqBound;
    }
    detail::project_pixel_balls(wh, wv, radius);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < 2 * n; ++i) v[i] = w[i] + beta * (w[i] - w_prev[i]);
    t = t_next;
    ++it;

    const double gap = eval.primal_and_gap(y, wh, wv, x);
    if (gap < best_gap) {
      best_gap = gap;
      best_x = x;
      best_w = w;
    }
    if (gap_trace) gap_trace->push_back(best_gap);
  }
  if (warm) warm->dual = best_w;

  ProxCertificate cert;
  cert.point = std::move(best_x);
  cert.gap_achieved = std::max(best_gap, 0.0);
  cert.inner_iterations = it;
  cert.certified = best_gap <= eps;
  if (eps > 0.0 && cert.certified) {
    cert.mode = ProxMode::gap_certified;
    cert.epsilon_contract = eps;
  } else {
    cert.mode = ProxMode::budget;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// TV + nonnegativity: accelerated primal-dual iterations with a fixed budget.

/// Approximates prox_{gamma (mu TV + i_{x>=0})}(y) with exactly `budget` primal-dual steps
/// (the accelerated variant for a strongly convex data term). The output is the primal point
/// of the final dual field, projected onto the nonnegative orthant. `warm` carries the dual
/// field between calls.
inline ProxCertificate inexact_prox_tv_nonneg(ConstView y, Shape s, double mu, double gamma, int budget,
                                              WarmStart* warm = nullptr) {
  require(mu > 0.0 && gamma > 0.0, "inexact_prox_tv_nonneg: weight and step must be positive");
  require(budget >= 1, "inexact_prox_tv_nonneg: inner budget must be >= 1");
  require(y.size() == s.size(), "inexact_prox_tv_nonneg: shape mismatch");
  const std::size_t n = s.size();

  Vec p(2 * n, 0.0);
  if (warm && warm->dual.size() == 2 * n) p = warm->dual;
  MutView ph = MutView(p).subspan(0, n), pv = MutView(p).subspan(n, n);
  detail::project_pixel_balls(ph, pv, mu);

  Vec x(n), xbar(n), x_new(n), gh(n), gv(n), bt(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::max(y[i], 0.0);
  xbar = x;
  double tau = 1.0 / std::sqrt(kGradNormSqBound);
  double sigma = 1.0 / (kGradNormSqBound * tau);
  for (int it = 0; it < budget; ++it) {
    grad_apply(s, xbar, gh, gv);
    for (std::size_t i = 0; i < n; ++i) {
      ph[i] += sigma * gh[i];
      pv[i] += sigma * gv[i];
    }
    detail::project_pixel_balls(ph, pv, mu);
    grad_adjoint(s, ph, pv, bt);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x[i] - tau * bt[i];
      x_new[i] = std::max((gamma * v + tau * y[i]) / (gamma + tau), 0.0);
    }
    const double theta = 1.0 / std::sqrt(1.0 + 2.0 * tau / gamma);
    tau *= theta;
    sigma /= theta;
    for (std::size_t i = 0; i < n; ++i) xbar[i] = x_new[i] + theta * (x_new[i] - x[i]);
    std::swap(x, x_new);
  }
  if (warm) warm->dual = p;

  // Primal recovered from the dual iterate, x = max(y - gamma B^T p, 0). It is more accurate
  // than the last primal iterate and nonnegative by construction.
  grad_adjoint(s, ph, pv, bt);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::max(y[i] - gamma * bt[i], 0.0);

  ProxCertificate cert;
  cert.point = std::move(x);
  cert.mode = ProxMode::budget;
  cert.inner_iterations = budget;
  return cert;
}

// ---------------------------------------------------------------------------
// Providers: a nonsmooth potential bundled with a request-driven prox evaluator.

class ProxProvider {
 public:
  virtual ~ProxProvider() = default;
  virtual const NonsmoothPotential& potential() const = 0;
  virtual ProxCertificate prox(const ProxRequest& req, WarmStart* warm) const = 0;
  /// Duality gap at the trivial pair (x = y, z = 0), which equals G(y). Reference scale C0
  /// for relative accuracy targets.
  virtual double reference_gap(ConstView y) const { return potential().value(y); }
};

/// G = 0: the prox is the identity.
class IdentityProx final : public ProxProvider {
 public:
  const NonsmoothPotential& potential() const override { return g_; }
  ProxCertificate prox(const ProxRequest& req, WarmStart*) const override {
    ProxCertificate c;
    c.point.assign(req.input.begin(), req.input.end());
    c.gap_achieved = 0.0;
    c.epsilon_contract = 0.0;
    return c;
  }

 private:
  ZeroPotential g_;
};

/// G = indicator of x >= 0: the prox is the projection.
class NonnegProjectionProx final : public ProxProvider {
 public:
  const NonsmoothPotential& potential() const override { return g_; }
  ProxCertificate prox(const ProxRequest& req, WarmStart*) const override {
    ProxCertificate c;
    c.point.resize(req.input.size());
    for (std::size_t i = 0; i < c.point.size(); ++i) c.point[i] = std::max(req.input[i], 0.0);
    c.gap_achieved = 0.0;
    c.epsilon_contract = 0.0;
    return c;
  }

 private:
  NonnegIndicator g_;
};

/// G = alpha ||x||_1 with the closed-form inexact points of the absolute value.
///
/// Uses (y - x)/gamma in d_eps(alpha|.|)(x) <=> x approximates prox_{gamma alpha |.|}(y) at
/// accuracy eps/alpha. In d > 1 dimensions each component receives eps/d.
class AbsClosedFormProx final : public ProxProvider {
 public:
  AbsClosedFormProx(double alpha, InexactSelector sel = InexactSelector::upper) : g_(alpha), sel_(sel) {}
  const NonsmoothPotential& potential() const override { return g_; }
  ProxCertificate prox(const ProxRequest& req, WarmStart*) const override {
    const auto* target = std::get_if<TargetEpsilon>(&req.accuracy);
    require(target != nullptr, "AbsClosedFormProx: needs an eps target");
    const double alpha = g_.weight();
    const double per = target->eps / (alpha * static_cast<double>(std::max<std::size_t>(req.input.size(), 1)));
    const InexactSelector sel = target->eps == 0.0 ? InexactSelector::exact : sel_;
    ProxCertificate c;
    c.point.resize(req.input.size());
    for (std::size_t i = 0; i < c.point.size(); ++i) c.point[i] = inexact_prox_abs(req.input[i], req.step * alpha, per, sel);
    c.epsilon_contract = target->eps;
    return c;
  }

 private:
  L1Potential g_;
  InexactSelector sel_;
};

class L1DualProx final : public ProxProvider {
 public:
  explicit L1DualProx(double mu, L1DualOptions opt = {}) : g_(mu), opt_(opt) {}
  const NonsmoothPotential& potential() const override { return g_; }
  ProxCertificate prox(const ProxRequest& req, WarmStart*) const override {
    const auto* target = std::get_if<TargetEpsilon>(&req.accuracy);
    require(target != nullptr, "L1DualProx: needs an eps target");
    return inexact_prox_l1_dual(req.input, g_.weight(), req.step, target->eps, opt_);
  }

 private:
  L1Potential g_;
  L1DualOptions opt_;
};

/// G = mu TV. Eps targets are gap-certified; inner budgets run exactly that many dual steps.
class TVDualProx final : public ProxProvider {
 public:
  TVDualProx(double mu, Shape s, int max_inner = 100000, bool warm_certified = false)
      : g_(mu, s), max_inner_(max_inner), warm_certified_(warm_certified) {}
  const NonsmoothPotential& potential() const override { return g_; }
  ProxCertificate prox(const ProxRequest& req, WarmStart* warm) const override {
    if (const auto* target = std::get_if<TargetEpsilon>(&req.accuracy)) {
      return inexact_prox_tv(req.input, g_.shape(), g_.weight(), req.step, target->eps, TVDualOptions{max_inner_},
                             warm_certified_ ? warm : nullptr);
    }
    const int n = std::get<InnerBudget>(req.accuracy).iterations;
    require(n >= 1, "TVDualProx: inner budget must be >= 1");
    // eps = 0 never stops early, so exactly n iterations run.
    return inexact_prox_tv(req.input, g_.shape(), g_.weight(), req.step, 0.0, TVDualOptions{n}, warm);
  }

 private:
  TVPotential g_;
  int max_inner_;
  bool warm_certified_;
};

/// G = mu TV + indicator(x >= 0), budget mode only.
class TVNonnegProx final : public ProxProvider {
 public:
  TVNonnegProx(double mu, Shape s, bool warm_start = true) : g_(mu, s, true), warm_(warm_start) {}
  const NonsmoothPotential& potential() const override { return g_; }
  ProxCertificate prox(const ProxRequest& req, WarmStart* warm) const override {
    const auto* budget = std::get_if<InnerBudget>(&req.accuracy);
    require(budget != nullptr, "TVNonnegProx: only inner-budget accuracy is supported");
    return inexact_prox_tv_nonneg(req.input, g_.shape(), g_.weight(), req.step, budget->iterations,
                                  warm_ ? warm : nullptr);
  }

 private:
  TVPotential g_;
  bool warm_;
};

}  // namespace ipgla

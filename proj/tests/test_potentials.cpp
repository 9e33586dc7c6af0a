#include <gtest/gtest.h>

#include <cmath>

#include "ipgla/potentials.hpp"
#include "ipgla/rng.hpp"
#include "ipgla/schedules.hpp"

using namespace ipgla;

namespace {

// Largest relative deviation between the analytic gradient and central differences.
double gradient_fd_error(const SmoothPotential& F, const Vec& x, double h = 1e-6) {
  const Vec g = F.gradient(x);
  Vec fd(x.size()), xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = F.value(xp);
    xp[i] = x[i] - h;
    const double fm = F.value(xp);
    xp[i] = x[i];
    fd[i] = (fp - fm) / (2.0 * h);
  }
  Vec diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i] = g[i] - fd[i];
  return norm2(diff) / std::max(norm2(g), 1e-12);
}

std::shared_ptr<const LinearOperator> blur_op(Shape s, std::size_t size = 3, double std = 0.8) {
  return std::make_shared<ConvolutionOperator>(make_gaussian_blur(size, std), s);
}

}  // namespace

TEST(Gaussian, IdentityAtData) {
  const Vec y = {0.3, -1.0, 2.0};
  auto F = gaussian_likelihood(std::make_shared<IdentityOperator>(3), y, 1.0);
  EXPECT_EQ(F->value(y), 0.0);
  for (double g : F->gradient(y)) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(F->lipschitz(), 1.0);
  EXPECT_EQ(F->strong_convexity(), 1.0);
}

TEST(Gaussian, ToyValueAndGradient) {
  auto F = gaussian_likelihood(std::make_shared<IdentityOperator>(1), {0.0}, 1.0);
  const Vec x = {2.0};
  EXPECT_DOUBLE_EQ(F->value(x), 2.0);
  EXPECT_DOUBLE_EQ(F->gradient(x)[0], 2.0);
}

TEST(Gaussian, RejectsBadSigmaAndShape) {
  auto I = std::make_shared<IdentityOperator>(3);
  EXPECT_THROW(gaussian_likelihood(I, Vec(3), 0.0), std::invalid_argument);
  EXPECT_THROW(gaussian_likelihood(I, Vec(4), 1.0), std::invalid_argument);
  auto F = gaussian_likelihood(I, Vec(3), 1.0);
  EXPECT_THROW(F->value(Vec(2)), std::invalid_argument);
}

TEST(Gaussian, ConstantsFollowBlurSpectrum) {
  const Shape s{8, 8};
  auto A = blur_op(s);
  auto F = gaussian_likelihood(A, Vec(s.size()), 0.5);
  const auto [lo, hi] = A->spectrum_bounds();
  EXPECT_DOUBLE_EQ(F->lipschitz(), hi / 0.25);
  EXPECT_DOUBLE_EQ(F->strong_convexity(), lo / 0.25);
  EXPECT_LE(F->strong_convexity(), F->lipschitz());
}

TEST(Gaussian, GradientMatchesFiniteDifferences) {
  const Shape s{6, 6};
  Rng rng(1);
  Vec y(s.size());
  rng.fill_normal(y);
  auto F = gaussian_likelihood(blur_op(s), y, 0.7);
  for (int t = 0; t < 20; ++t) {
    Vec x(s.size());
    rng.fill_normal(x);
    EXPECT_LE(gradient_fd_error(*F, x), 1e-5);
  }
}

TEST(Gaussian, DescentIdentityAtInverseLipschitz) {
  const Shape s{8, 8};
  Rng rng(2);
  Vec y(s.size());
  rng.fill_normal(y);
  auto F = gaussian_likelihood(blur_op(s, 5, 1.5), y, 0.3);
  for (int t = 0; t < 20; ++t) {
    Vec x(s.size());
    rng.fill_normal(x);
    EXPECT_TRUE(check_descent(*F, x, 1.0 / F->lipschitz()));
  }
}

TEST(Gaussian, ConvexAlongSegments) {
  const Shape s{6, 6};
  Rng rng(3);
  Vec y(s.size());
  rng.fill_normal(y);
  auto F = gaussian_likelihood(blur_op(s), y, 1.0);
  for (int t = 0; t < 50; ++t) {
    Vec a(s.size()), b(s.size()), m(s.size());
    rng.fill_normal(a);
    rng.fill_normal(b);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
    EXPECT_LE(F->value(m), 0.5 * (F->value(a) + F->value(b)) + 1e-12);
  }
}

TEST(Poisson, ZeroCountsGiveLinearPotential) {
  const Shape s{4, 4};
  auto A = blur_op(s);
  Rng rng(4);
  Vec x(s.size());
  for (double& v : x) v = rng.uniform();
  auto F = poisson_likelihood(A, Vec(s.size(), 0.0), Vec(s.size(), 0.1));
  Vec ax(s.size()), at1(s.size());
  A->apply(x, ax);
  A->adjoint(Vec(s.size(), 1.0), at1);
  EXPECT_NEAR(F->value(x), std::accumulate(ax.begin(), ax.end(), 0.0), 1e-12);
  const Vec g = F->gradient(x);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], at1[i], 1e-12);
}

TEST(Poisson, UnitInstanceAtZero) {
  auto F = poisson_likelihood(std::make_shared<IdentityOperator>(1), {1.0}, {1.0});
  EXPECT_EQ(F->value(Vec{0.0}), 0.0);
  EXPECT_EQ(F->gradient(Vec{0.0})[0], 0.0);
  EXPECT_EQ(F->strong_convexity(), 0.0);
}

TEST(Poisson, GradientMatchesFiniteDifferences) {
  const Shape s{4, 4};
  Rng rng(5);
  Vec y(s.size());
  for (double& v : y) v = std::floor(5.0 * rng.uniform());
  auto F = poisson_likelihood(blur_op(s), y, Vec(s.size(), 0.05));
  for (int t = 0; t < 20; ++t) {
    Vec x(s.size());
    for (double& v : x) v = 0.2 + rng.uniform();
    EXPECT_LE(gradient_fd_error(*F, x), 1e-5);
  }
}

TEST(Poisson, DomainViolations) {
  auto I = std::make_shared<IdentityOperator>(2);
  EXPECT_THROW(poisson_likelihood(I, {1.0, 2.0}, {0.1, -0.1}), std::invalid_argument);
  EXPECT_THROW(poisson_likelihood(I, {1.5, 2.0}, {0.1, 0.1}), std::invalid_argument);
  auto F = poisson_likelihood(I, {1.0, 2.0}, {0.1, 0.1});
  const Vec outside = {-0.2, 1.0};
  EXPECT_EQ(F->value(outside), kInf);
  EXPECT_THROW(F->gradient(outside), DomainError);
  // Slightly negative pixels still lie in the domain while (Ax)_i + b_i > 0.
  EXPECT_TRUE(std::isfinite(F->value(Vec{-0.05, 1.0})));
}

TEST(Poisson, LipschitzBound) {
  const Shape s{4, 4};
  auto A = blur_op(s);
  Vec y(s.size(), 0.0);
  y[3] = 4.0;
  auto F = poisson_likelihood(A, y, Vec(s.size(), 0.02));
  EXPECT_NEAR(F->lipschitz(), A->spectrum_bounds().second * 4.0 / (0.02 * 0.02), 1e-9);
}

TEST(L1, Values) {
  auto G = l1_potential(2.0);
  EXPECT_EQ(G->value(Vec{0.0, 0.0}), 0.0);
  EXPECT_EQ(G->value(Vec{1.0, -3.0}), 8.0);
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    Vec z(5), cz(5);
    rng.fill_normal(z);
    const double c = 3.0 * rng.normal();
    for (std::size_t i = 0; i < z.size(); ++i) cz[i] = c * z[i];
    EXPECT_NEAR(G->value(cz), std::abs(c) * G->value(z), 1e-12 * (1.0 + G->value(cz)));
  }
  EXPECT_THROW(l1_potential(0.0), std::invalid_argument);
}

TEST(TV, Values) {
  const Shape s{2, 2};
  auto G = tv_potential(1.0, s);
  EXPECT_EQ(G->value(Vec(4, 0.7)), 0.0);
  EXPECT_DOUBLE_EQ(G->value(Vec{0.0, 1.0, 0.0, 1.0}), 2.0);
  auto Gp = tv_potential(1.0, s, true);
  EXPECT_EQ(Gp->value(Vec{0.0, 1.0, -0.01, 1.0}), kInf);
  EXPECT_FALSE(Gp->in_domain(Vec{0.0, 1.0, -0.01, 1.0}));
  EXPECT_DOUBLE_EQ(Gp->value(Vec{0.0, 1.0, 0.0, 1.0}), 2.0);
}

TEST(TV, ConvexAlongSegments) {
  const Shape s{5, 5};
  auto G = tv_potential(0.3, s);
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    Vec a(s.size()), b(s.size()), m(s.size());
    rng.fill_normal(a);
    rng.fill_normal(b);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
    EXPECT_LE(G->value(m), 0.5 * (G->value(a) + G->value(b)) + 1e-12);
  }
}

TEST(TV, SubgradientInequality) {
  const Shape s{5, 5};
  auto G = tv_potential(0.5, s);
  Rng rng(8);
  Vec x(s.size()), p(s.size());
  rng.fill_normal(x);
  G->subgradient(x, p);
  for (int t = 0; t < 50; ++t) {
    Vec v(s.size()), d(s.size());
    rng.fill_normal(v);
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = v[i] - x[i];
    EXPECT_GE(G->value(v), G->value(x) + dot(p, d) - 1e-10);
  }
}

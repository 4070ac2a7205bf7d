#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

#include "kib/quadrature.hpp"

using namespace kib;

namespace {

// int_{S^{n-1}} prod_B |x_B|^{2 a_B}, blocks of sizes s_B.
double block_moment(const std::vector<int>& sizes, const std::vector<double>& a) {
  double log_num = std::log(2.0), total = 0.0;
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    const double h = 0.5 * sizes[b];
    log_num += std::lgamma(a[b] + h) + h * std::log(std::numbers::pi) - std::lgamma(h);
    total += a[b] + h;
  }
  return std::exp(log_num - std::lgamma(total));
}

double monomial_moment(const std::vector<double>& a) {
  return block_moment(std::vector<int>(a.size(), 1), a);
}

Vector unit(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x[i++] = a;
  return x.normalized();
}

}  // namespace

TEST_CASE("gauss-jacobi integrates weighted polynomials exactly") {
  for (auto [alpha, beta] : {std::pair{0.0, 0.0}, {0.5, 0.5}, {-0.5, 1.5}, {1.5, -0.25}, {2.0, 0.0}}) {
    const int count = 9;
    const Rule1D g = gauss_jacobi(count, alpha, beta);
    for (int j = 0; j < 2 * count; ++j) {
      const double got = (g.weights.array() * g.nodes.array().pow(j)).sum();
      // x^j = sum_i binom(j, i) (1+x)^i (-1)^{j-i}, each term a beta integral
      double want = 0.0, magnitude = 0.0;
      for (int i = 0; i <= j; ++i) {
        const double term = boost::math::binomial_coefficient<double>(j, i) * std::pow(2.0, alpha + beta + i + 1) *
                            boost::math::beta(alpha + 1, beta + i + 1);
        want += (j - i) % 2 ? -term : term;
        magnitude += term;
      }
      CHECK(std::abs(got - want) <= 1e-12 * std::abs(want) + 1e-14 * magnitude);
    }
  }
  const Rule1D lag = gauss_laguerre(12);
  for (int j = 0; j < 24; ++j) {
    const double got = (lag.weights.array() * lag.nodes.array().pow(j)).sum();
    CHECK(got == doctest::Approx(std::tgamma(j + 1.0)).epsilon(1e-11));
  }
  CHECK_THROWS_AS(gauss_jacobi(4, -1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(gauss_jacobi(0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("sphere areas") {
  CHECK(sphere_area(0) == doctest::Approx(2.0));
  CHECK(sphere_area(1) == doctest::Approx(2.0 * std::numbers::pi));
  CHECK(sphere_area(2) == doctest::Approx(4.0 * std::numbers::pi));
  CHECK(sphere_area(3) == doctest::Approx(2.0 * std::pow(std::numbers::pi, 2)));
  for (int d = 1; d <= 6; ++d) {
    const SphereRule r = build_product_rule(d, 4);
    CHECK(r.weights.sum() == doctest::Approx(sphere_area(d)).epsilon(1e-13));
    CHECK((r.nodes.colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("product rule: monomial moments against the gamma-product formula") {
  for (int n : {3, 4, 5, 6}) {
    const SphereRule rule = build_product_rule(n - 1, 8);
    const std::vector<std::vector<double>> exps = {
        std::vector<double>(static_cast<std::size_t>(n), 0.0),
        [&] { std::vector<double> a(static_cast<std::size_t>(n), 0.0); a[0] = 3; return a; }(),
        [&] { std::vector<double> a(static_cast<std::size_t>(n), 0.0); a[0] = 2; a[n - 1] = 3; return a; }(),
        [&] { std::vector<double> a(static_cast<std::size_t>(n), 1.0); return a; }(),
    };
    for (const auto& a : exps) {
      const double got = integrate_sphere(rule, [&](const Vector& x) {
        double v = 1.0;
        for (int j = 0; j < n; ++j) v *= std::pow(x[j], 2 * a[static_cast<std::size_t>(j)]);
        return v;
      });
      CHECK(got == doctest::Approx(monomial_moment(a)).epsilon(1e-12));
    }
  }
}

TEST_CASE("product rule annihilates odd integrands") {
  const SphereRule rule = build_product_rule(4, 5);
  const double odd = integrate_sphere(rule, [](const Vector& x) {
    return x[0] * x[1] * x[1] + std::pow(x[3], 5) + std::sin(x[2]);
  });
  CHECK(std::abs(odd) < 1e-14);
  // antipodal closure
  for (Eigen::Index i = 0; i < rule.size(); ++i) {
    bool found = false;
    for (Eigen::Index j = 0; j < rule.size() && !found; ++j)
      found = (rule.nodes.col(i) + rule.nodes.col(j)).norm() < 1e-14 && rule.weights[i] == rule.weights[j];
    CHECK(found);
  }
}

TEST_CASE("orbit rule: block-invariant moments") {
  struct Case {
    int n;
    std::vector<std::vector<int>> blocks;
  };
  const std::vector<Case> cases = {
      {5, {{0, 1, 2, 3}, {4}}},
      {6, {{0, 1, 2, 3, 4}, {5}}},
      {6, {{0, 1, 2}, {3, 4, 5}}},
      {6, {{0, 1}, {2, 3}, {4, 5}}},
      {4, {{0}, {1}, {2}, {3}}},
  };
  for (const Case& c : cases) {
    const SphereRule rule = build_orbit_rule(c.n, c.blocks, 16);
    std::vector<int> sizes;
    for (const auto& b : c.blocks) sizes.push_back(static_cast<int>(b.size()));
    for (double base : {0.0, 1.0, 2.0}) {
      std::vector<double> a(c.blocks.size(), 0.0);
      a[0] = base;
      a.back() = 3.0 - base;
      const double got = integrate_sphere(rule, [&](const Vector& x) {
        double v = 1.0;
        for (std::size_t b = 0; b < c.blocks.size(); ++b) {
          double s = 0.0;
          for (int j : c.blocks[b]) s += x[j] * x[j];
          v *= std::pow(s, a[b]);
        }
        return v;
      });
      CHECK(got == doctest::Approx(block_moment(sizes, a)).epsilon(1e-12));
    }
  }
  // Non-polynomial invariant integrand: orbit rule against a full product rule.
  const int n = 5;
  Vector d(n);
  d << 1, 1, 1, 1, 9;
  const auto h = QFExpression::power(DiagQuadForm(d), Rational(-3, 2));
  const double orbit = integrate_sphere(build_orbit_rule(n, {{0, 1, 2, 3}, {4}}, 40), h);
  const double full = integrate_sphere(build_product_rule(n - 1, 40), h);
  CHECK(orbit == doctest::Approx(full).epsilon(1e-11));
  CHECK_THROWS_AS(build_orbit_rule(4, {{0, 1}, {1, 2, 3}}, 4), std::invalid_argument);
}

TEST_CASE("rule text round trip") {
  const SphereRule r = build_product_rule(3, 5);
  std::stringstream ss;
  write_rule(ss, r, 5);
  const SphereRule back = read_rule(ss);
  CHECK(back.dim == 3);
  CHECK((back.nodes - r.nodes).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.weights - r.weights).cwiseAbs().maxCoeff() == 0.0);
  std::stringstream bad("kib-sphere-rule 2\n");
  CHECK_THROWS(read_rule(bad));
}

TEST_CASE("random subspaces") {
  const Subspace a = random_subspace(6, 4, 42);
  const Subspace b = random_subspace(6, 4, 42);
  const Subspace c = random_subspace(6, 4, 43);
  CHECK((a.basis - b.basis).norm() == 0.0);
  CHECK((a.basis - c.basis).norm() > 1e-3);
  CHECK(((a.basis.transpose() * a.basis) - Matrix::Identity(4, 4)).norm() < 1e-13);
  // Uniformity: E[P] = (m/n) I for the orthogonal projection P.
  Matrix mean = Matrix::Zero(6, 6);
  const int samples = 4000;
  for (int s = 0; s < samples; ++s) {
    const Subspace r = random_subspace(6, 2, static_cast<std::uint64_t>(1000 + s));
    mean += r.basis * r.basis.transpose();
  }
  mean /= samples;
  CHECK((mean - Matrix::Identity(6, 6) * (2.0 / 6.0)).cwiseAbs().maxCoeff() < 0.03);
  CHECK_THROWS_AS(random_subspace(3, 4, 1), std::invalid_argument);
}

TEST_CASE("complete_frame") {
  const Vector xi = unit({1, 2, -1, 0.5, 3});
  const Vector v = unit({0, 0, 0, 0, 1});
  const std::vector<Vector> prio = {v};
  const Matrix f = complete_frame(xi, prio);
  CHECK(f.cols() == 4);
  CHECK(((f.transpose() * f) - Matrix::Identity(4, 4)).norm() < 1e-13);
  CHECK((f.transpose() * xi).norm() < 1e-13);
  const Vector proj = (v - xi * xi.dot(v)).normalized();
  CHECK(std::abs(f.col(0).dot(proj) - 1.0) < 1e-13);
  CHECK((complete_frame(xi, prio) - f).norm() == 0.0);
  CHECK_THROWS_AS(complete_frame(Vector::Ones(3)), std::invalid_argument);
}

TEST_CASE("great-subsphere integrals") {
  for (int n : {3, 5, 6}) {
    Vector xi = Vector::LinSpaced(n, 1.0, 2.0).normalized();
    xi[0] = -xi[0];
    Vector v = Vector::LinSpaced(n, -1.0, 0.7);
    const Vector vp = v - xi * xi.dot(v);
    const double want = sphere_area(n - 2) * vp.squaredNorm() / (n - 1);
    InnerRule inner;
    inner.resolution = 6;
    const double got = integrate_subsphere(xi, [&](const Vector& w) { return std::pow(w.dot(v), 2); }, inner);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));

    inner.priority = {v};
    inner.priority_only = true;
    inner.resolution = 12;
    const double collapsed =
        integrate_subsphere(xi, [&](const Vector& w) { return std::exp(w.dot(v)) + std::pow(w.dot(v), 4); }, inner);
    inner.priority_only = false;
    const double full =
        integrate_subsphere(xi, [&](const Vector& w) { return std::exp(w.dot(v)) + std::pow(w.dot(v), 4); }, inner);
    CHECK(collapsed == doctest::Approx(full).epsilon(1e-12));
  }
}

TEST_CASE("t-rules against beta integrals") {
  for (int n : {3, 4, 5, 6, 7}) {
    for (double s : {0.0, -0.5, -0.9, 0.5, 2.5}) {
      const ZonalKernel k = s == 0.0 ? ZonalKernel::smooth() : ZonalKernel::abs_power(s);
      const Rule1D r = build_t_rule(n, k, TRuleConfig{});
      // int_0^1 t^s (1-t^2)^{(n-3)/2} t^{2j} dt = B((s+2j+1)/2, (n-1)/2) / 2
      for (int j : {0, 1, 3}) {
        const double got = (r.weights.array() * r.nodes.array().pow(2 * j)).sum();
        const double want = 0.5 * boost::math::beta(0.5 * (s + 2 * j + 1), 0.5 * (n - 1));
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
  boost::math::quadrature::tanh_sinh<double> ts;
  for (int n : {3, 4, 5, 6}) {
    const Rule1D r = build_t_rule(n, ZonalKernel::log(), TRuleConfig{});
    for (int j : {0, 2}) {
      const double got = (r.weights.array() * r.nodes.array().pow(2 * j)).sum();
      const double want = ts.integrate(
          [&](double t) { return std::log(t) * std::pow(1 - t * t, 0.5 * (n - 3)) * std::pow(t, 2 * j); }, 0.0, 1.0);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(ZonalKernel::abs_power(-1.0), std::invalid_argument);
}

TEST_CASE("zonal reduction against closed forms") {
  for (int n : {3, 5, 6}) {
    const Vector xi = Vector::LinSpaced(n, 0.3, 1.7).normalized();
    Vector v = Vector::LinSpaced(n, 2.0, -1.0);
    const double c = xi.dot(v);
    const Vector vp = v - c * xi;
    for (double s : {0.5, -0.5, 1.0}) {
      InnerRule inner;
      inner.resolution = 8;
      const double got = zonal_reduce(xi, ZonalKernel::abs_power(s),
                                      [&](const Vector& x) { return std::pow(x.dot(v), 2); }, TRuleConfig{}, inner);
      const double want = sphere_area(n - 2) *
                          (c * c * boost::math::beta(0.5 * (s + 3), 0.5 * (n - 1)) +
                           vp.squaredNorm() / (n - 1) * boost::math::beta(0.5 * (s + 1), 0.5 * (n + 1)));
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("zonal reduction of an anisotropic expression with a log kernel, n = 3") {
  // Direct oracle: theta = R (sqrt(1-t^2) cos psi, sqrt(1-t^2) sin psi, t), trapezoid in psi,
  // tanh-sinh in t on both halves.
  Vector d(3);
  d << 1.0, 2.5, 0.4;
  const auto g = QFExpression::power(DiagQuadForm(d), Rational(-1, 2));
  const Vector xi = unit({0.3, -0.5, 0.8});
  const Matrix frame = complete_frame(xi);
  boost::math::quadrature::tanh_sinh<double> ts;
  const int m = 256;
  auto profile = [&](double t) {
    const double s = std::sqrt(std::max(0.0, 1 - t * t));
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      const double psi = 2.0 * std::numbers::pi * i / m;
      const Vector x = t * xi + s * (std::cos(psi) * frame.col(0) + std::sin(psi) * frame.col(1));
      acc += evaluate(g, x);
    }
    return acc * 2.0 * std::numbers::pi / m;
  };
  const double want = ts.integrate([&](double t) { return std::log(t) * profile(t); }, 0.0, 1.0) +
                      ts.integrate([&](double t) { return std::log(-t) * profile(t); }, -1.0, 0.0);

  const QFExpression* fs[] = {&g};
  const ZonalKernel ks[] = {ZonalKernel::log()};
  InnerRule inner;
  inner.resolution = 32;
  const double got = zonal_reduce(xi, ks, fs, TRuleConfig{}, inner)[0];
  CHECK(got == doctest::Approx(want).epsilon(1e-11));
  const double general = zonal_reduce(xi, ZonalKernel::log(), [&](const Vector& x) { return evaluate(g, x); },
                                      TRuleConfig{}, inner);
  CHECK(general == doctest::Approx(want).epsilon(1e-11));
}

#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "kib/bodies.hpp"
#include "kib/fourier.hpp"

using namespace kib;

namespace {

constexpr double kPi = std::numbers::pi;

double cnk_oracle(double n, double k) {
  return std::pow(2.0, n - k) * std::pow(kPi, n / 2) * boost::math::tgamma((n - k) / 2) / boost::math::tgamma(k / 2);
}

// (|T x|^{-p})^(y) for T = diag(t), written out directly.
double linear_image_oracle(int n, double p, const Vector& t, const Vector& y) {
  double det = 1.0, s = 0.0;
  for (int j = 0; j < n; ++j) {
    det *= std::abs(t[j]);
    s += (y[j] / t[j]) * (y[j] / t[j]);
  }
  return cnk_oracle(n, p) / det * std::pow(s, 0.5 * (p - n));
}

Vector seeded_direction(int n, std::uint64_t seed) { return random_subspace(n, 1, seed).basis.col(0); }

QFExpression euclidean_power(int n, Rational p) { return QFExpression::power(DiagQuadForm::euclidean(n), -p / Rational(2)); }

Vector ellipsoid_axes(int n, double eps) {
  Vector a = Vector::Ones(n);
  a[n - 1] = eps;
  return a;
}

}  // namespace

TEST_CASE("constant C_{n,k} against the gamma oracle") {
  for (int n = 2; n <= 8; ++n)
    for (double k : {0.5, 1.0, 1.5, 2.0, n - 0.5, n - 1.0})
      if (k < n) CHECK(constant_cnk(n, k) == doctest::Approx(cnk_oracle(n, k)).epsilon(1e-13));
  CHECK(constant_cnk(3, 2) == doctest::Approx(2 * kPi * kPi).epsilon(1e-14));
  CHECK_THROWS_AS(constant_cnk(4, 0), std::domain_error);
  CHECK_THROWS_AS(constant_cnk(4, 4), std::domain_error);
}

TEST_CASE("Euclidean and linear-image transforms") {
  const Vector y = seeded_direction(5, 3) * 2.5;
  CHECK(ft_euclidean_power(5, 2, y) == doctest::Approx(cnk_oracle(5, 2) * std::pow(2.5, -3.0)).epsilon(1e-13));
  CHECK(ft_linear_image(5, 2, Vector::Ones(5), y) == doctest::Approx(ft_euclidean_power(5, 2, y)).epsilon(1e-13));
  Vector t(5);
  t << 1.0, 2.0, 0.5, 3.0, 0.25;
  CHECK(ft_linear_image(5, 1.5, t, y) == doctest::Approx(linear_image_oracle(5, 1.5, t, y)).epsilon(1e-13));
  // scaling T by s multiplies by s^{-k}
  CHECK(ft_linear_image(5, 1.5, 2.0 * t, y) == doctest::Approx(std::pow(2.0, -1.5) * ft_linear_image(5, 1.5, t, y)).epsilon(1e-13));
  t[2] = 0.0;
  CHECK_THROWS_AS(ft_linear_image(5, 1.5, t, y), std::invalid_argument);
  CHECK_THROWS_AS(ft_euclidean_power(4, 1, y), std::invalid_argument);
}

TEST_CASE("homogeneous function validation and branch selection") {
  CHECK_THROWS_AS(HomogeneousFn(euclidean_power(4, Rational(4))), std::invalid_argument);
  CHECK_THROWS_AS(HomogeneousFn(euclidean_power(4, Rational(0))), std::invalid_argument);
  CHECK_THROWS_AS(HomogeneousFn(euclidean_power(4, Rational(-1))), std::invalid_argument);

  const HomogeneousFn even(euclidean_power(5, Rational(2)));  // q = 2
  CHECK(default_branch(even).method == FtMethod::case_ii);
  CHECK(default_branch(even).k == 1);
  const HomogeneousFn odd(euclidean_power(5, Rational(1)));  // q = 3
  CHECK(default_branch(odd).method == FtMethod::case_iii);
  CHECK(default_branch(odd).k == 2);
  const HomogeneousFn frac(euclidean_power(5, Rational(3, 2)));  // q = 5/2
  CHECK(default_branch(frac).method == FtMethod::case_i);
  CHECK(default_branch(frac).k == 2);
  CHECK(case_i_branch(even).k == 2);
  CHECK_THROWS_AS(case_i_branch(odd), std::invalid_argument);
  CHECK_THROWS_AS(case_i_branch(frac, 1), std::invalid_argument);
  CHECK_THROWS_AS(LemmaTransform(even, FtBranch{FtMethod::case_iii, 1}), std::invalid_argument);
  CHECK_THROWS_AS(LemmaTransform(odd, FtBranch{FtMethod::case_ii, 1}), std::invalid_argument);
  CHECK_THROWS_AS(LemmaTransform(odd, FtBranch{FtMethod::closed_form, 0}), std::invalid_argument);
  CHECK(to_string(FtMethod::case_iii) == "case_iii");
}

TEST_CASE("Euclidean powers reproduce C_{n,p} on every branch") {
  const FtConfig cfg;
  for (int n = 4; n <= 6; ++n) {
    std::vector<Rational> ps;
    for (int j = 1; j < 2 * n; ++j) ps.emplace_back(j, 2);
    ps.emplace_back(1, 3);
    for (const Rational& p : ps) {
      const HomogeneousFn fn(euclidean_power(n, p));
      std::vector<FtBranch> branches{default_branch(fn)};
      const Rational q = fn.q();
      if (!(q.is_integer() && q.num() % 2 != 0)) {
        const int kmin = case_i_branch(fn).k;
        branches.push_back({FtMethod::case_i, kmin});
        branches.push_back({FtMethod::case_i, kmin + 1});
      }
      for (const FtBranch& b : branches) {
        const Vector xi = seeded_direction(n, 11 + b.k);
        const double got = ft_lemma_case(fn, xi, cfg, b);
        INFO("n=" << n << " p=" << p.str() << " branch=" << to_string(b.method) << " k=" << b.k);
        CHECK(got == doctest::Approx(cnk_oracle(n, p.to_double())).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("ellipsoid transforms match the linear-image rule") {
  const FtConfig cfg;
  for (int n = 4; n <= 6; ++n) {
    for (double eps : {0.5, 0.25}) {
      const Vector axes = ellipsoid_axes(n, eps);
      const Vector t = axes.cwiseInverse();
      for (const Rational& p : {Rational(1), Rational(2), Rational(3, 2)}) {
        const HomogeneousFn fn(StarBody::ellipsoid(axes).norm_power(-p));
        Matrix dirs(n, 20);
        for (int i = 0; i < 20; ++i) dirs.col(i) = seeded_direction(n, 100 + i);
        dirs.col(0) = Vector::Unit(n, n - 1);
        const FourierResult r = ft_lemma_case(fn, dirs, cfg);
        CHECK(r.homogeneity_out == doctest::Approx(-n + p.to_double()));
        for (int i = 0; i < 20; ++i) {
          INFO("n=" << n << " eps=" << eps << " p=" << p.str() << " dir " << i);
          const double want = linear_image_oracle(n, p.to_double(), t, dirs.col(i));
          CHECK(r.values[i] == doctest::Approx(want).epsilon(1e-5));
          CHECK(ft_closed_form(fn, dirs.col(i)) == doctest::Approx(want).epsilon(1e-12));
        }
        CHECK(r.est_error < 1e-5 * std::abs(r.values.minCoeff()));
      }
    }
  }
}

TEST_CASE("generic ellipsoid without a symmetry block") {
  Vector axes(4);
  axes << 1.0, 0.8, 0.6, 0.4;
  const HomogeneousFn fn(StarBody::ellipsoid(axes).norm_power(Rational(-1)));
  const Vector xi = seeded_direction(4, 5);
  const double want = linear_image_oracle(4, 1.0, axes.cwiseInverse(), xi);
  CHECK(ft_lemma_case(fn, xi, FtConfig{}) == doctest::Approx(want).epsilon(1e-5));
}

TEST_CASE("symmetry reduction agrees with full product rules") {
  FtConfig full;
  full.use_symmetry = false;
  Vector axes(4);
  axes << 1.0, 1.0, 1.0, 0.5;
  const StarBody ell = StarBody::ellipsoid(axes);
  for (const Rational& p : {Rational(2), Rational(3, 2)}) {
    const HomogeneousFn fn(ell.norm_power(-p) + QFExpression::power(DiagQuadForm::euclidean(4), -p / Rational(2)));
    const Vector xi = seeded_direction(4, 40);
    CHECK(ft_lemma_case(fn, xi, full) == doctest::Approx(ft_lemma_case(fn, xi, FtConfig{})).epsilon(1e-6));
  }
}

TEST_CASE("transforms are even and need unit directions") {
  const HomogeneousFn fn(make_sec2_body(5, 4, 1, 0.3).norm_power(Rational(-1)));
  const LemmaTransform tr(fn);
  const Vector xi = seeded_direction(5, 9);
  CHECK(tr(-xi, FtConfig{}) == doctest::Approx(tr(xi, FtConfig{})).epsilon(1e-14));
  CHECK_THROWS_AS(tr(2.0 * xi, FtConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(tr(Vector::Unit(4, 0), FtConfig{}), std::invalid_argument);
  CHECK(canonical_direction(-xi).isApprox(canonical_direction(xi)));
}

TEST_CASE("closed form rejects products") {
  const HomogeneousFn fn(make_sec2_body(5, 4, 1, 0.3).norm_power(Rational(-2)));
  CHECK_THROWS_AS(ft_closed_form(fn, Vector::Unit(5, 0)), std::invalid_argument);
}

TEST_CASE("results do not depend on the worker count") {
  const HomogeneousFn fn(make_sec2_body(5, 4, 1, 0.3).norm_power(Rational(-1)));
  Matrix dirs(5, 7);
  for (int i = 0; i < 7; ++i) dirs.col(i) = seeded_direction(5, 70 + i);
  setenv("LAB_THREADS", "1", 1);
  const Vector one = ft_lemma_case(fn, dirs, FtConfig{}, std::nullopt, false).values;
  setenv("LAB_THREADS", "3", 1);
  CHECK(worker_threads() == 3);
  const Vector three = ft_lemma_case(fn, dirs, FtConfig{}, std::nullopt, false).values;
  unsetenv("LAB_THREADS");
  CHECK(worker_threads() == 1);
  CHECK((one - three).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Parseval identity at n = 5") {
  const int n = 5;
  const StarBody ball = StarBody::ball(n);
  const StarBody ell = StarBody::ellipsoid(ellipsoid_axes(n, 0.5));
  const StarBody sec2 = make_sec2_body(5, 4, 1, 0.25);
  struct Pair {
    const StarBody* k;
    const StarBody* l;
  };
  for (const Pair& pr : {Pair{&ball, &ball}, Pair{&ball, &ell}, Pair{&sec2, &ball}}) {
    // (||x||_K^{-1})^ against (||x||_L^{-4})^
    const HomogeneousFn kf(pr.k->norm_power(Rational(-1)));
    const HomogeneousFn lf(pr.l->norm_power(Rational(-(n - 1))));
    const FtConfig cfg;
    const ParsevalResult coarse = parseval_check(kf, lf, cfg);
    const ParsevalResult fine = parseval_check(kf, lf, cfg.refined());
    INFO(pr.k->id() << " / " << pr.l->id() << ": " << coarse.rel_gap << " -> " << fine.rel_gap);
    CHECK(coarse.rel_gap < 1e-3);
    // decreasing, or both at the rounding floor
    CHECK((fine.rel_gap < coarse.rel_gap || std::max(fine.rel_gap, coarse.rel_gap) < 1e-14));
    CHECK(coarse.rhs > 0.0);
  }
  const HomogeneousFn a(ball.norm_power(Rational(-1)));
  CHECK_THROWS_AS(parseval_check(a, a, FtConfig{}), std::invalid_argument);
}

TEST_CASE("batch transform reports the error at the smallest value") {
  const HomogeneousFn fn(make_sec2_body(5, 4, 1, 0.25).norm_power(Rational(-1)));
  Matrix dirs(5, 2);
  dirs.col(0) = Vector::Unit(5, 0);
  dirs.col(1) = Vector::Unit(5, 4);
  const FourierResult r = ft_lemma_case(fn, dirs, FtConfig{});
  CHECK(r.method == FtMethod::case_iii);
  CHECK(r.k == 2);
  CHECK(r.values[1] < r.values[0]);
  const LemmaTransform tr(fn);
  CHECK(r.est_error == doctest::Approx(std::abs(tr(dirs.col(1), FtConfig{}.refined()) - r.values[1])));
}

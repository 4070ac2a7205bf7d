#include <doctest.h>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <set>

#include "kib/certify.hpp"

using namespace kib;

namespace {

constexpr double kPi = std::numbers::pi;

double cnk_oracle(double n, double k) {
  return std::pow(2.0, n - k) * std::pow(kPi, n / 2) * boost::math::tgamma((n - k) / 2) / boost::math::tgamma(k / 2);
}

// t-form by the Beta integral: int_0^inf t^{-1/2} (1+t)^{-c} dt = B(1/2, c - 1/2).
double t_form_oracle(int p, int k) {
  const double a = 0.5 * p;
  double ff = 1.0, half = 1.0;
  for (int j = 0; j < k; ++j) ff *= -a - j;
  for (int j = 1; j <= k; ++j) half *= j - 0.5;
  return -0.5 * boost::math::tgamma(2.0 * k) / half * ff * boost::math::beta(0.5, a + k - 0.5);
}

}  // namespace

TEST_CASE("direction grids") {
  const std::vector<std::vector<int>> blocks{{0, 1, 2}, {3}};
  const DirectionGrid g = direction_grid(4, blocks, 8, true);
  CHECK(g.description == "orbit{0,1,2}{3}+axes");
  std::set<std::vector<long long>> keys;
  for (Eigen::Index i = 0; i < g.directions.cols(); ++i) {
    const Vector d = g.directions.col(i);
    CHECK(d.norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(canonical_direction(d) == d);
    std::vector<long long> key;
    for (double x : d) key.push_back(std::llround(x * 1e9));
    keys.insert(key);
  }
  CHECK(keys.size() == static_cast<std::size_t>(g.directions.cols()));
  for (int j = 0; j < 4; ++j) {
    bool found = false;
    for (Eigen::Index i = 0; i < g.directions.cols(); ++i) found = found || g.directions.col(i).isApprox(Vector::Unit(4, j));
    CHECK(found);
  }
  const DirectionGrid p = direction_grid(3, {{0}, {1}, {2}}, 4, false);
  CHECK(p.description == "product+axes");
  // 4 cosines x 8 angles, halved, plus axes not already present
  CHECK(p.directions.cols() >= 16);
  CHECK(p.directions.cols() <= 19);
  CHECK_THROWS_AS(direction_grid(3, {{0, 1, 2}}, 0, true), std::invalid_argument);
}

TEST_CASE("ball reproduces C_{n,k} at every grid direction") {
  for (int n = 4; n <= 6; ++n) {
    for (int k = 1; k < n; ++k) {
      const CertReport r = certify_k_intersection(StarBody::ball(n), k);
      INFO("n=" << n << " k=" << k);
      CHECK(r.verdict == Verdict::positive_certified);
      CHECK(r.body_id == "ball(n=" + std::to_string(n) + ")");
      CHECK(r.dims == n);
      CHECK(r.k == k);
      CHECK(r.grid_size == r.values.size());
      for (Eigen::Index i = 0; i < r.values.size(); ++i)
        CHECK(r.values[i] == doctest::Approx(cnk_oracle(n, k)).epsilon(1e-5));
    }
  }
}

TEST_CASE("certificate fields are consistent") {
  const CertReport r = certify_k_intersection(make_sec2_body(5, 4, 1, 0.25), 1);
  CHECK(r.min_value == r.values.minCoeff());
  CHECK(r.argmin_direction.norm() == doctest::Approx(1.0));
  CHECK(r.argmin_ambient.isApprox(r.argmin_direction));
  CHECK(r.method == FtMethod::case_iii);
  CHECK(r.branch_k == 2);
  const HomogeneousFn fn(make_sec2_body(5, 4, 1, 0.25).norm_power(Rational(-1)));
  CHECK(ft_lemma_case(fn, r.argmin_direction, FtConfig{}) == doctest::Approx(r.min_value).epsilon(1e-14));
  // verdict negative only beyond the error bar
  CHECK(r.verdict == Verdict::negative_witness);
  CHECK(r.min_value < -r.est_error);
  CHECK(to_string(Verdict::inconclusive) == "inconclusive");
}

TEST_CASE("ellipsoids are k-intersection bodies") {
  Vector axes(5);
  axes << 1.0, 1.0, 1.0, 1.0, 0.5;
  const StarBody e = StarBody::ellipsoid(axes);
  for (int k = 1; k < 5; ++k) CHECK(certify_k_intersection(e, k).verdict == Verdict::positive_certified);
  CHECK_THROWS_AS(certify_k_intersection(e, 5), std::invalid_argument);
  CHECK_THROWS_AS(certify_k_intersection(e, 0), std::invalid_argument);
  // powers outside the algebra are rejected up front
  CHECK_THROWS_AS(certify_k_intersection(make_sec2_body(7, 5, 2, 0.2), 1), std::invalid_argument);
}

TEST_CASE("certification without the symmetry reduction") {
  CertConfig cfg;
  cfg.ft.use_symmetry = false;
  cfg.ft.inner_resolution = 24;
  cfg.grid_resolution = 2;
  const CertReport r = certify_k_intersection(StarBody::ball(4), 2, cfg);
  CHECK(r.grid == "product+axes");
  CHECK(r.verdict == Verdict::positive_certified);
  CHECK(r.min_value == doctest::Approx(cnk_oracle(4, 2)).epsilon(1e-5));
}

TEST_CASE("exact witness on the (m+1)-coordinate section") {
  // sec2(6,4,1,1/4) on span(e_1..e_5): -C_{5,1} = -16 pi^2 at e_5
  const StarBody body = make_sec2_body(6, 4, 1, 0.25);
  const std::vector<int> axes{0, 1, 2, 3, 4};
  const StarBody s = section(body, coordinate_subspace(6, axes));
  const double want = -16 * kPi * kPi;
  CHECK(-cnk_oracle(5, 1) == doctest::Approx(want).epsilon(1e-14));
  const HomogeneousFn fn(s.norm_power(Rational(-1)));
  const Vector e5 = Vector::Unit(5, 4);
  CHECK(ft_closed_form(fn, e5) == doctest::Approx(want).epsilon(1e-12));
  const double coarse = ft_lemma_case(fn, e5, FtConfig{});
  CHECK(coarse == doctest::Approx(want).epsilon(1e-3));
  // the witness survives a resolution doubling
  const double fine = ft_lemma_case(fn, e5, FtConfig{}.refined());
  CHECK(fine < 0.0);
  CHECK(std::abs(fine - coarse) < 0.1 * std::abs(coarse));

  const CertReport r = certify_k_intersection(s, 1);
  CHECK(r.verdict == Verdict::negative_witness);
  CHECK(r.min_value == doctest::Approx(want).epsilon(1e-3));
  CHECK(r.argmin_ambient.isApprox(Vector::Unit(6, 4)));
}

TEST_CASE("section scan of the sec2 body") {
  const StarBody body = make_sec2_body(5, 4, 1, 0.25);
  const SectionScan s = scan_section_class(body, 1, 4, 8, 7);
  CHECK(s.sections.size() == 8 + 5);
  CHECK(s.sections.front().label == "random[0]");
  CHECK(s.sections.back().label == "coord{1,2,3,4}");
  for (const SectionCert& c : s.sections) {
    INFO(c.label << " min " << c.report.min_value);
    CHECK(c.report.verdict == Verdict::positive_certified);
    CHECK(c.report.min_value >= 0.0);
    CHECK(c.report.dims == 4);
  }
  CHECK(s.member_sampled);
  REQUIRE(s.witness);
  CHECK(s.witness->label == "coord{0,1,2,3,4}");
  CHECK(s.witness_negative);
  CHECK(s.witness->report.min_value == doctest::Approx(-16 * kPi * kPi).epsilon(1e-3));

  // m = dim: the body itself
  const SectionScan whole = scan_section_class(body, 1, 5, 3, 7);
  CHECK(whole.sections.size() == 1);
  CHECK(!whole.member_sampled);
  CHECK(!whole.witness);
  CHECK(whole.sections[0].report.verdict == Verdict::negative_witness);

  CHECK_THROWS_AS(scan_section_class(body, 4, 4, 1, 7), std::invalid_argument);
  CHECK_THROWS_AS(scan_section_class(body, 1, 6, 1, 7), std::invalid_argument);

  // same seed, same sections
  const SectionScan again = scan_section_class(body, 1, 4, 2, 7);
  CHECK(again.sections[1].report.values == s.sections[1].report.values);
}

TEST_CASE("sections of a positive-certified body are positive-certified") {
  Vector axes(5);
  // one distinct axis, so every section has two coordinate blocks
  axes << 0.4, 0.4, 0.4, 0.4, 1.0;
  const StarBody e = StarBody::ellipsoid(axes);
  REQUIRE(certify_k_intersection(e, 1).verdict == Verdict::positive_certified);
  for (int m : {3, 4}) {
    const SectionScan s = scan_section_class(e, 1, m, 4, 11);
    CHECK(s.member_sampled);
    CHECK(s.witness);
    CHECK(!s.witness_negative);
  }
}

TEST_CASE("log-log fits") {
  const std::vector<double> x{1.0, 0.5, 0.25, 0.125};
  std::vector<double> y;
  for (double v : x) y.push_back(-3.0 * std::pow(v, -1.5));
  const LogLogFit f = fit_log_log(x, y);
  CHECK(f.slope == doctest::Approx(-1.5).epsilon(1e-13));
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-13));
  CHECK(f.residual < 1e-13);
  CHECK_THROWS_AS(fit_log_log({1.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(fit_log_log({1.0, 0.5}, {1.0, 0.0}), std::domain_error);
}

TEST_CASE("even-case slope at n = 5") {
  const std::vector<double> eps{0.1, 0.05, 0.025, 0.0125};
  const SlopeReport r = slope_experiment(1, 1, 5, eps);
  CHECK(r.expected_slope == -2.0);
  CHECK(r.method == FtMethod::case_ii);
  CHECK(r.slope == doctest::Approx(-2.0).epsilon(0.025));
  CHECK(r.residual < 0.05);
  // (|x|^{-1} ||x||_E^{-1})^(e_5) = 2 pi^3 (1 + eps^{-2})
  for (std::size_t i = 0; i < eps.size(); ++i)
    CHECK(r.values[i] == doctest::Approx(2 * std::pow(kPi, 3) * (1 + 1 / (eps[i] * eps[i]))).epsilon(1e-8));
  // halving eps multiplies the value by about 2^{n-p-q-1} = 4
  for (std::size_t i = 1; i < eps.size(); ++i) CHECK(r.values[i] / r.values[i - 1] == doctest::Approx(4.0).epsilon(0.05));
  CHECK(r.uniform_checked);
  CHECK(r.uniform_directions == 100);
  CHECK(r.uniform_constant > 0.0);
  CHECK(r.uniform_ratio <= 1.0 + 1e-9);
}

TEST_CASE("odd-case slope at n = 6") {
  const SlopeReport r = slope_experiment(1, 1, 6, {0.1, 0.05, 0.025, 0.0125});
  CHECK(r.expected_slope == -3.0);
  CHECK(r.method == FtMethod::case_iii);
  CHECK(std::abs(r.slope + 3.0) < 0.1);
  CHECK(!r.uniform_checked);
  for (std::size_t i = 0; i < r.values.size(); ++i) CHECK(r.est_errors[i] < 1e-8 * std::abs(r.values[i]));
}

TEST_CASE("slope experiment validation") {
  const std::vector<double> ok{0.2, 0.1, 0.05};
  CHECK_THROWS_AS(slope_experiment(2, 2, 5, ok), std::invalid_argument);  // p + q > n - 2
  CHECK_THROWS_AS(slope_experiment(0, 1, 5, ok), std::invalid_argument);
  CHECK_THROWS_AS(slope_experiment(1, 1, 5, {0.2, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(slope_experiment(1, 1, 5, {0.1, 0.2, 0.05}), std::invalid_argument);
  CHECK_THROWS_AS(slope_experiment(1, 1, 5, {0.3, 0.2, 0.1}), std::invalid_argument);
  const QFExpression e = slope_expression(5, 1, 2, 0.1);
  CHECK(e.degree() == Rational(-3));
  CHECK(evaluate(e, Vector::Unit(5, 4)) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("derivative polynomials of (1+z^2)^{-a}") {
  const double a = 1.5;
  const auto P = derivative_polynomials(a, 4);
  REQUIRE(P.size() == 5);
  CHECK(P[1] == std::vector<double>{0.0, -3.0});
  // against central differences of the previous derivative
  for (int j = 1; j <= 4; ++j) {
    for (double z : {0.3, 1.1, 2.7}) {
      auto d = [&](int order, double x) {
        double s = 0.0, zp = 1.0;
        for (double c : P[static_cast<std::size_t>(order)]) s += c * zp, zp *= x;
        return s * std::pow(1 + x * x, -a - order);
      };
      const double h = 1e-5;
      const double fd = (d(j - 1, z + h) - d(j - 1, z - h)) / (2 * h);
      CHECK(d(j, z) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("log-integral constant") {
  const LogConstantReport one = log_integral_constant(1, 1);
  CHECK(0.5 * boost::math::beta(0.5, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(one.t_form == doctest::Approx(0.5 * boost::math::beta(0.5, 1.0)).epsilon(1e-12));
  for (int k = 1; k <= 3; ++k) {
    for (int p = 1; p <= 3; ++p) {
      const LogConstantReport r = log_integral_constant(p, k);
      INFO("k=" << k << " p=" << p);
      CHECK(r.rel_gap < 1e-6);
      CHECK(r.z_log_form == doctest::Approx(r.t_form).epsilon(1e-9));
      CHECK(r.t_form == doctest::Approx(t_form_oracle(p, k)).epsilon(1e-12));
      CHECK(std::abs(r.t_form) > 10 * (r.z_error + r.t_error));
      CHECK(std::abs(r.z_form) > 10 * r.z_error);
    }
  }
  CHECK_THROWS_AS(log_integral_constant(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(log_integral_constant(1, 0), std::invalid_argument);
}

TEST_CASE("hierarchy experiment at n = 6, k = 1, l = 2") {
  const HierarchyReport r = hierarchy_experiment(6, 1, 2);
  CHECK(r.found);
  CHECK(r.conclusive);
  CHECK(r.eps > 0.0);
  CHECK(r.eps <= r.eps_max);
  CHECK(std::pow(r.eps_max, 1.5) <= 0.1);
  REQUIRE(r.positive);
  CHECK(r.positive->verdict == Verdict::positive_certified);
  CHECK(r.positive->min_value > r.positive->est_error);
  CHECK(r.truncation_l == 0.0);
  CHECK(r.order_l == 2);
  // (||x||^{-1})^(e_6) = C_{6,1} (1 - eps^{-1/2})
  CHECK(r.witness == Verdict::negative_witness);
  CHECK(r.witness_value == doctest::Approx(cnk_oracle(6, 1) * (1 - 1 / std::sqrt(r.eps))).epsilon(1e-5));
  REQUIRE(r.correction_eps.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(r.correction_values[i] == doctest::Approx(cnk_oracle(6, 1) / std::sqrt(r.correction_eps[i])).epsilon(1e-5));
  CHECK(std::abs(r.correction_slope + 0.5) < 0.1);
  CHECK(!r.trials.empty());
  CHECK(r.trials.back().passed);
  CHECK(r.margins.size() == 2);
  for (const HierarchyTrial& t : r.margins) CHECK(t.positive_min > 0.0);
}

TEST_CASE("hierarchy experiment with a fixed eps and validation") {
  HierarchyConfig cfg;
  cfg.eps = 0.1;
  cfg.slope_points = 3;
  const HierarchyReport r = hierarchy_experiment(6, 1, 2, cfg);
  CHECK(r.trials.size() == 1);
  CHECK(r.eps == 0.1);
  CHECK(r.conclusive);
  CHECK_THROWS_AS(hierarchy_experiment(6, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(hierarchy_experiment(6, 1, 3), std::invalid_argument);  // l >= n - 3
  CHECK_THROWS_AS(hierarchy_experiment(6, 0, 2), std::invalid_argument);
  cfg.eps = 0.5;  // outside the guard
  CHECK_THROWS_AS(hierarchy_experiment(6, 1, 2, cfg), std::invalid_argument);
}

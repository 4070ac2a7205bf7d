#include "kib/certify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "parallel.hpp"

namespace kib {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

std::string join_axes(std::span<const int> axes) {
  std::string s = "{";
  for (std::size_t i = 0; i < axes.size(); ++i) s += (i ? "," : "") + std::to_string(axes[i]);
  return s + "}";
}

std::string describe_blocks(const std::vector<std::vector<int>>& blocks) {
  std::string s;
  for (const auto& b : blocks) s += join_axes(b);
  return s;
}

Verdict classify(double min_value, double error) {
  if (min_value > error) return Verdict::positive_certified;
  if (min_value < -error) return Verdict::negative_witness;
  return Verdict::inconclusive;
}

// Value and resolution-doubling error of a transform at one direction.
std::pair<double, double> value_with_error(const LemmaTransform& tr, const Vector& xi, const FtConfig& cfg) {
  const double v = tr(xi, cfg);
  return {v, std::abs(tr(xi, cfg.refined()) - v)};
}

// Lexicographic order on rounded coordinates, for deduplicating directions.
struct RoundedLess {
  bool operator()(const std::vector<long long>& a, const std::vector<long long>& b) const { return a < b; }
};

std::vector<long long> rounded(const Vector& v) {
  std::vector<long long> r(static_cast<std::size_t>(v.size()));
  for (Eigen::Index j = 0; j < v.size(); ++j) r[static_cast<std::size_t>(j)] = std::llround(v[j] * 1e10);
  return r;
}

double binom_neg(double a, int j) {  // binom(-a, j)
  double c = 1.0;
  for (int i = 0; i < j; ++i) c *= (-a - i) / (i + 1);
  return c;
}

double factorial(int m) { return std::tgamma(m + 1.0); }

double poly(const std::vector<double>& c, double z) {
  double s = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * z + *it;
  return s;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::positive_certified:
      return "positive_certified";
    case Verdict::negative_witness:
      return "negative_witness";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "unknown";
}

DirectionGrid direction_grid(int n, const std::vector<std::vector<int>>& blocks, int resolution, bool use_symmetry) {
  if (resolution < 1) throw std::invalid_argument("direction_grid: resolution must be positive");
  std::vector<Vector> dirs;
  std::map<std::vector<long long>, int, RoundedLess> seen;
  auto add = [&](const Vector& v) {
    const Vector c = canonical_direction(v);
    if (seen.emplace(rounded(c), static_cast<int>(dirs.size())).second) dirs.push_back(c);
  };
  DirectionGrid g;
  g.resolution = resolution;
  if (use_symmetry) {
    const SphereRule rule = build_orbit_rule(n, blocks, resolution);
    for (Eigen::Index i = 0; i < rule.size() / 2; ++i) add(rule.nodes.col(i));
    g.description = "orbit" + describe_blocks(blocks) + "+axes";
  } else {
    const SphereRule rule = build_product_rule(n - 1, resolution);
    for (Eigen::Index i = 0; i < rule.size(); ++i) add(rule.nodes.col(i));
    g.description = "product+axes";
  }
  for (int j = 0; j < n; ++j) add(Vector::Unit(n, j));
  g.directions.resize(n, static_cast<Eigen::Index>(dirs.size()));
  for (std::size_t i = 0; i < dirs.size(); ++i) g.directions.col(static_cast<Eigen::Index>(i)) = dirs[i];
  return g;
}

CertReport certify_expression(const QFExpression& expr, const std::string& id, const Matrix& frame,
                              const CertConfig& config) {
  const HomogeneousFn fn(expr);
  const LemmaTransform tr(fn);
  const int n = fn.dims();
  const DirectionGrid grid = direction_grid(n, tr.blocks(), config.grid_resolution, config.ft.use_symmetry);

  CertReport r;
  r.body_id = id;
  r.dims = n;
  r.k = static_cast<int>(std::lround(fn.p().to_double()));
  r.grid = grid.description;
  r.grid_resolution = grid.resolution;
  r.grid_size = static_cast<int>(grid.directions.cols());
  r.method = tr.branch().method;
  r.branch_k = tr.branch().k;
  r.values = tr.evaluate(grid.directions, config.ft);
  Eigen::Index arg = 0;
  r.min_value = r.values.minCoeff(&arg);
  r.argmin_direction = grid.directions.col(arg);
  r.argmin_ambient = frame * r.argmin_direction;
  r.est_error = std::abs(tr(r.argmin_direction, config.ft.refined()) - r.min_value);
  r.verdict = classify(r.min_value, r.est_error);
  return r;
}

CertReport certify_k_intersection(const StarBody& body, int k, const CertConfig& config) {
  if (!(k > 0 && k < body.dims()))
    throw std::invalid_argument("certify: need 0 < k < dim = " + std::to_string(body.dims()) + ", got k = " +
                                std::to_string(k));
  if (!body.has_norm_power(Rational(-k)))
    throw std::invalid_argument("certify: ||x||^{-" + std::to_string(k) + "} is not representable for " + body.id());
  return certify_expression(body.norm_power(Rational(-k)), body.id(), body.frame(), config);
}

SectionScan scan_section_class(const StarBody& body, int k, int m, int num_subspaces, std::uint64_t seed,
                               const CertConfig& config) {
  const int n = body.dims();
  if (!(k < m && m <= n))
    throw std::invalid_argument("scan_section_class: need k < m <= dim, got k = " + std::to_string(k) +
                                ", m = " + std::to_string(m) + ", dim = " + std::to_string(n));
  if (num_subspaces < 0) throw std::invalid_argument("scan_section_class: negative subspace count");
  SectionScan s;
  s.body_id = body.id();
  s.k = k;
  s.m = m;
  s.seed = seed;

  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  if (m == n) {
    s.sections.push_back({"coord" + join_axes(all), certify_k_intersection(body, k, config)});
  } else {
    for (int i = 0; i < num_subspaces; ++i) {
      const std::uint64_t sub_seed = detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(i) + 1));
      const StarBody sec = section(body, random_subspace(n, m, sub_seed));
      s.sections.push_back({"random[" + std::to_string(i) + "]", certify_k_intersection(sec, k, config)});
    }
    // all m-subsets of the axes, in lexicographic order
    std::vector<int> axes(static_cast<std::size_t>(m));
    std::iota(axes.begin(), axes.end(), 0);
    while (true) {
      const StarBody sec = section(body, coordinate_subspace(n, axes));
      s.sections.push_back({"coord" + join_axes(axes), certify_k_intersection(sec, k, config)});
      int i = m - 1;
      while (i >= 0 && axes[static_cast<std::size_t>(i)] == n - m + i) --i;
      if (i < 0) break;
      ++axes[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < m; ++j) axes[static_cast<std::size_t>(j)] = axes[static_cast<std::size_t>(j - 1)] + 1;
    }
    const std::span<const int> first(all.data(), static_cast<std::size_t>(m + 1));
    const StarBody w = m + 1 == n ? body : section(body, coordinate_subspace(n, first));
    s.witness = SectionCert{"coord" + join_axes(first), certify_k_intersection(w, k, config)};
    s.witness_negative = s.witness->report.verdict == Verdict::negative_witness;
  }
  s.member_sampled = std::all_of(s.sections.begin(), s.sections.end(), [](const SectionCert& c) {
    return c.report.verdict == Verdict::positive_certified;
  });
  return s;
}

LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_log_log: need >= 2 matching points");
  const std::size_t m = x.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(x[i] > 0.0) || y[i] == 0.0) throw std::domain_error("fit_log_log: non-positive abscissa or zero value");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(std::abs(y[i]));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / m;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  LogLogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < m; ++i)
    f.residual = std::max(f.residual, std::abs(ly[i] - f.intercept - f.slope * lx[i]));
  return f;
}

QFExpression slope_expression(int n, int p, int q, double eps) {
  Vector e = Vector::Ones(n);
  e[n - 1] = 1.0 / (eps * eps);
  return QFExpression::power(DiagQuadForm::euclidean(n), Rational(-q, 2)) *
         QFExpression::power(DiagQuadForm(e), Rational(-p, 2));
}

SlopeReport slope_experiment(int p, int q, int n, const std::vector<double>& eps, const CertConfig& config,
                             int uniform_directions, std::uint64_t seed) {
  if (!(p > 0 && q > 0 && p + q <= n - 2))
    throw std::invalid_argument("slopes: need p, q > 0 and p + q <= n - 2, got p = " + std::to_string(p) +
                                ", q = " + std::to_string(q) + ", n = " + std::to_string(n));
  if (eps.size() < 3) throw std::invalid_argument("slopes: need at least 3 eps values");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0 && eps[i] <= 0.25)) throw std::invalid_argument("slopes: eps must lie in (0, 1/4]");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw std::invalid_argument("slopes: eps list must be strictly decreasing");
  }
  SlopeReport r;
  r.p = p;
  r.q = q;
  r.n = n;
  r.eps = eps;
  r.expected_slope = -n + p + q + 1;
  const Vector en = Vector::Unit(n, n - 1);
  std::vector<LemmaTransform> trs;
  for (double e : eps) {
    trs.emplace_back(HomogeneousFn(slope_expression(n, p, q, e)));
    const auto [v, err] = value_with_error(trs.back(), en, config.ft);
    r.values.push_back(v);
    r.est_errors.push_back(err);
  }
  r.method = trs.front().branch().method;
  r.branch_k = trs.front().branch().k;
  const LogLogFit fit = fit_log_log(r.eps, r.values);
  r.slope = fit.slope;
  r.intercept = fit.intercept;
  r.residual = fit.residual;

  if ((n - p - q - 1) % 2 == 0 && uniform_directions > 0) {
    r.uniform_checked = true;
    r.uniform_directions = uniform_directions;
    Matrix dirs(n, uniform_directions + 1);
    dirs.col(0) = en;
    for (int i = 0; i < uniform_directions; ++i)
      dirs.col(i + 1) = random_subspace(n, 1, detail::splitmix64(seed ^ detail::splitmix64(i + 1))).basis.col(0);
    double worst = 0.0;
    for (std::size_t j = 0; j < eps.size(); ++j) {
      const double scaled = trs[j].evaluate(dirs, config.ft).cwiseAbs().maxCoeff() * std::pow(eps[j], -r.expected_slope);
      if (j == 0) r.uniform_constant = scaled;
      worst = std::max(worst, scaled);
    }
    r.uniform_ratio = worst / r.uniform_constant;
  }
  return r;
}

std::vector<std::vector<double>> derivative_polynomials(double a, int order) {
  std::vector<std::vector<double>> out{{1.0}};
  for (int j = 0; j < order; ++j) {
    const std::vector<double>& c = out.back();
    const double b = a + j;
    std::vector<double> d(c.size() + 1, 0.0);
    // P' (1 + z^2) - 2 b z P
    for (std::size_t i = 1; i < c.size(); ++i) {
      d[i - 1] += i * c[i];
      d[i + 1] += i * c[i];
    }
    for (std::size_t i = 0; i < c.size(); ++i) d[i + 1] -= 2.0 * b * c[i];
    out.push_back(std::move(d));
  }
  return out;
}

LogConstantReport log_integral_constant(int p, int k) {
  if (p < 1 || k < 1) throw std::invalid_argument("log constant: need p, k >= 1");
  const double a = 0.5 * p;
  LogConstantReport r;
  r.p = p;
  r.k = k;

  // (f - P) / z^{2k}: the Taylor tail for small z, direct difference otherwise.
  auto remainder = [&](double z) {
    const double z2 = z * z;
    if (z < 0.5) {
      double sum = 0.0, zp = 1.0;
      for (int j = k; j < k + 400; ++j) {
        const double t = binom_neg(a, j) * zp;
        sum += t;
        if (std::abs(t) < 1e-18 * std::abs(sum)) break;
        zp *= z2;
      }
      return sum;
    }
    double taylor = 0.0;
    for (int j = k - 1; j >= 0; --j) taylor = taylor * z2 + binom_neg(a, j);
    return (std::pow(1.0 + z2, -a) - taylor) / std::pow(z2, k);
  };
  const AdaptiveResult near = integrate_adaptive(remainder, 0.0, 1.0);
  const AdaptiveResult far = integrate_adaptive([&](double w) { return remainder(1.0 / w) / (w * w); }, 0.0, 1.0);
  const double fact = factorial(2 * k - 1);
  r.z_form = -fact * (near.value + far.value);
  r.z_error = fact * (near.error + far.error);

  const std::vector<double> c = derivative_polynomials(a, 2 * k).back();
  const std::vector<double> rev(c.rbegin(), c.rend());  // w^{2k} P(1/w)
  auto d2k = [&](double z) { return poly(c, z) * std::pow(1.0 + z * z, -a - 2 * k); };
  // d2k(1/w) / w^2 = w^{p+2k-2} rev(w) (1+w^2)^{-a-2k}
  auto d2k_inv = [&](double w) { return poly(rev, w) * std::pow(w, p + 2 * k - 2) * std::pow(1.0 + w * w, -a - 2 * k); };
  const AdaptiveResult ln_near = integrate_adaptive([&](double z) { return std::log(z) * d2k(z); }, 0.0, 1.0);
  const AdaptiveResult ln_far = integrate_adaptive([&](double w) { return -std::log(w) * d2k_inv(w); }, 0.0, 1.0);
  r.z_log_form = ln_near.value + ln_far.value;
  r.z_log_error = ln_near.error + ln_far.error;

  // t = u / (1 - u): t^{-1/2} dt = u^{-1/2} (1-u)^{-3/2} du; Gauss-Jacobi weight u^{-1/2} (1-u)^beta
  // with beta the fractional part of a + k - 3/2, so the remaining factor is a polynomial.
  double dk = 1.0;  // d^k/dt^k (1+t)^{-a} = dk (1+t)^{-a-k}
  for (int j = 0; j < k; ++j) dk *= -a - j;
  const double cexp = a + k - 1.5;
  const double beta = cexp - std::floor(cexp);
  auto t_integral = [&](int count) {
    const Rule1D gj = gauss_jacobi(count, beta, -0.5);
    double s = 0.0;
    for (Eigen::Index i = 0; i < gj.nodes.size(); ++i) {
      const double u = 0.5 * (1.0 + gj.nodes[i]);
      const double t = u / (1.0 - u);
      s += gj.weights[i] * dk * std::pow(1.0 + t, -a - k) * std::pow(1.0 - u, -1.5 - beta);
    }
    return s * std::pow(2.0, -0.5 - beta);
  };
  double half_prod = 1.0;
  for (int j = 1; j <= k; ++j) half_prod *= j - 0.5;
  const double pre = -0.5 * fact / half_prod;
  const double coarse = pre * t_integral(k + 2);
  r.t_form = pre * t_integral(2 * k + 4);
  r.t_error = std::abs(r.t_form - coarse);

  r.rel_gap = std::abs(r.z_form - r.t_form) / std::abs(r.t_form);
  const double err = r.z_error + r.t_error;
  if (!(std::abs(r.t_form) > 10.0 * err))
    throw std::runtime_error("log constant: |value| = " + fmt(std::abs(r.t_form)) +
                             " is not above 10x the quadrature error " + fmt(err));
  return r;
}

HierarchyReport hierarchy_experiment(int n, int k, int l, const HierarchyConfig& config) {
  if (!(1 <= k && k < l && l < n - 3))
    throw std::invalid_argument("hierarchy: need 1 <= k < l < n - 3, got n = " + std::to_string(n) +
                                ", k = " + std::to_string(k) + ", l = " + std::to_string(l));
  HierarchyReport r;
  r.n = n;
  r.k = k;
  r.l = l;
  r.order_l = config.order_l < 0 ? l : std::min(config.order_l, l);
  r.order_k = config.order_k < 0 ? k : std::min(config.order_k, k);
  r.eps_max = std::pow(config.guard, 1.0 / (n - k - 3.5)) * (1.0 - 1e-12);  // keep clear of the guard under rounding
  if (!(r.eps_max < 1.0)) r.eps_max = 0.5;
  const Vector en = Vector::Unit(n, n - 1);

  struct Full {
    HierarchyTrial trial;
    CertReport positive;
    double trunc_l = 0.0, trunc_k = 0.0;
  };
  auto run_trial = [&](double eps, std::vector<HierarchyTrial>& log) {
    const StarBody body = make_sec3_body(n, k, eps, config.guard);
    const Expansion el = sec3_norm_power_expansion(body, l, r.order_l);
    const Expansion ek = sec3_norm_power_expansion(body, k, r.order_k);
    Full f;
    f.trunc_l = el.truncation_bound;
    f.trunc_k = ek.truncation_bound;
    f.positive = certify_expression(el.expr, body.id(), body.frame(), config.cert);
    const LemmaTransform tk{HomogeneousFn(ek.expr)};
    const auto [wv, we] = value_with_error(tk, en, config.cert.ft);
    HierarchyTrial& t = f.trial;
    t.eps = eps;
    t.positive_min = f.positive.min_value;
    t.positive_error = f.positive.est_error;
    t.positive = f.positive.verdict;
    t.witness_value = wv;
    t.witness_error = we;
    t.witness = classify(wv, we);
    t.passed = t.positive == Verdict::positive_certified && t.witness == Verdict::negative_witness;
    log.push_back(t);
    return f;
  };

  std::optional<Full> best;
  if (config.eps > 0.0) {
    best = run_trial(config.eps, r.trials);
    r.found = best->trial.passed;
  } else {
    double hi = 0.0, eps = r.eps_max;
    for (int h = 0; h <= config.halvings; ++h, eps *= 0.5) {
      Full f = run_trial(eps, r.trials);
      if (f.trial.passed) {
        best = std::move(f);
        break;
      }
      hi = eps;
    }
    if (best && hi > 0.0) {
      double lo = best->trial.eps;
      for (int s = 0; s < config.bisection_steps; ++s) {
        const double mid = std::sqrt(lo * hi);
        Full f = run_trial(mid, r.trials);
        if (f.trial.passed) {
          lo = mid;
          best = std::move(f);
        } else {
          hi = mid;
        }
      }
    }
    r.found = best.has_value();
  }
  if (!best) return r;

  r.eps = best->trial.eps;
  r.positive = best->positive;
  r.truncation_l = best->trunc_l;
  r.truncation_k = best->trunc_k;
  r.witness_value = best->trial.witness_value;
  r.witness_error = best->trial.witness_error;
  r.witness = best->trial.witness;

  for (int i = 0; i < config.slope_points; ++i) {
    const double e = r.eps * std::pow(0.5, i);
    Vector axes = Vector::Ones(n);
    axes[n - 1] = e;
    QFExpression corr = QFExpression::power(DiagQuadForm(axes.cwiseAbs2().cwiseInverse()), Rational(-1, 2),
                                            sec3_perturbation(n, k, e));
    if (k > 1) corr = corr * QFExpression::power(DiagQuadForm::euclidean(n), Rational(-(k - 1), 2));
    if (i > 0) run_trial(e, r.margins);
    r.correction_eps.push_back(e);
    r.correction_values.push_back(ft_lemma_case(HomogeneousFn(corr), en, config.cert.ft));
  }
  if (r.correction_eps.size() >= 2) {
    const LogLogFit fit = fit_log_log(r.correction_eps, r.correction_values);
    r.correction_slope = fit.slope;
    r.correction_residual = fit.residual;
  }
  r.conclusive = r.found && best->trial.passed;
  return r;
}

}  // namespace kib

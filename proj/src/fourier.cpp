#include "kib/fourier.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "parallel.hpp"

namespace kib {

namespace {

constexpr double kPi = std::numbers::pi;

double sign_pow(int k) { return k % 2 == 0 ? 1.0 : -1.0; }

// Unit vectors outside the largest block: with these as leading frame axes the
// inner integrand depends only on the leading coordinates.
std::vector<Vector> block_priority(int n, const std::vector<std::vector<int>>& blocks) {
  std::size_t largest = 0;
  for (std::size_t b = 1; b < blocks.size(); ++b)
    if (blocks[b].size() > blocks[largest].size()) largest = b;
  std::vector<Vector> out;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b == largest) continue;
    for (int j : blocks[b]) out.push_back(Vector::Unit(n, j));
  }
  return out;
}

std::vector<std::vector<int>> trivial_blocks(int n) {
  std::vector<std::vector<int>> b;
  for (int j = 0; j < n; ++j) b.push_back({j});
  return b;
}

// Axis with the largest coefficient ratio in any form: integrands concentrate
// near its orthogonal hyperplane when that ratio is large.
int most_anisotropic_axis(const QFExpression& e) {
  int best = 0;
  double ratio = 0.0;
  for (const DiagQuadForm& q : e.forms()) {
    Eigen::Index j = 0;
    const double r = q.coeffs().maxCoeff(&j) / q.coeffs().minCoeff();
    if (r > ratio * (1.0 + 1e-12)) {
      ratio = r;
      best = static_cast<int>(j);
    }
  }
  return best;
}

SphereRule outer_rule(int n, const std::vector<std::vector<int>>& blocks, const FtConfig& config) {
  if (config.use_symmetry) return build_orbit_rule(n, blocks, config.outer_resolution);
  return build_product_rule(n - 1, config.outer_resolution);
}

}  // namespace

double constant_cnk(double n, double k) {
  if (!(k > 0.0 && k < n)) throw std::domain_error("constant_cnk: need 0 < k < n");
  return std::exp((n - k) * std::log(2.0) + 0.5 * n * std::log(kPi) + std::lgamma(0.5 * (n - k)) -
                  std::lgamma(0.5 * k));
}

double ft_euclidean_power(int n, double k, const Vector& y) {
  if (y.size() != n) throw std::invalid_argument("ft_euclidean_power: dimension mismatch");
  return constant_cnk(n, k) * std::pow(y.norm(), k - n);
}

double ft_linear_image(int n, double k, const Vector& t, const Vector& y) {
  if (t.size() != n || y.size() != n) throw std::invalid_argument("ft_linear_image: dimension mismatch");
  if ((t.array() == 0.0).any()) throw std::invalid_argument("ft_linear_image: singular T");
  const double det = t.array().abs().prod();
  const Vector z = y.cwiseQuotient(t);
  return constant_cnk(n, k) / det * std::pow(z.norm(), k - n);
}

HomogeneousFn::HomogeneousFn(QFExpression expr) : expr_(std::move(expr)) {
  const Rational p = -expr_.degree();
  if (!(p > Rational(0) && p < Rational(expr_.dims())))
    throw std::invalid_argument("HomogeneousFn: degree -p must satisfy 0 < p < n, got p = " + p.str());
}

std::string to_string(FtMethod m) {
  switch (m) {
    case FtMethod::closed_form:
      return "closed_form";
    case FtMethod::case_i:
      return "case_i";
    case FtMethod::case_ii:
      return "case_ii";
    case FtMethod::case_iii:
      return "case_iii";
  }
  return "unknown";
}

FtBranch default_branch(const HomogeneousFn& fn) {
  const Rational q = fn.q();
  if (q.is_integer()) {
    const std::int64_t qi = q.num();
    if (qi % 2 == 0) return {FtMethod::case_ii, static_cast<int>(qi / 2)};
    return {FtMethod::case_iii, static_cast<int>((qi + 1) / 2)};
  }
  return case_i_branch(fn);
}

FtBranch case_i_branch(const HomogeneousFn& fn, int k) {
  const Rational q = fn.q();
  if (q.is_integer() && q.num() % 2 != 0)
    throw std::invalid_argument("case (i) requires q not an odd integer, got q = " + q.str());
  if (k < 0) k = static_cast<int>(std::floor(q.to_double() / 2.0)) + 1;
  if (!(q < Rational(2 * k))) throw std::invalid_argument("case (i) requires q < 2k");
  return {FtMethod::case_i, k};
}

FtConfig FtConfig::refined() const {
  FtConfig c = *this;
  c.inner_resolution *= 2;
  c.outer_resolution *= 2;
  c.t = t.refined();
  return c;
}

LemmaTransform::LemmaTransform(const HomogeneousFn& fn, std::optional<FtBranch> branch)
    : fn_(fn), branch_(branch ? *branch : default_branch(fn)), main_(fn.expr()), second_(fn.expr()) {
  const Rational q = fn_.q();
  const int k = branch_.k;
  switch (branch_.method) {
    case FtMethod::case_i: {
      case_i_branch(fn_, k);
      const double qd = q.to_double();
      const double s = 2.0 * k - qd - 1.0;
      kernel_ = ZonalKernel::abs_power(s);
      prefactor_ = sign_pow(k + 1) * kPi / (2.0 * std::tgamma(2.0 * k - qd) * std::sin(0.5 * kPi * s));
      break;
    }
    case FtMethod::case_ii:
      if (q != Rational(2 * k)) throw std::invalid_argument("case (ii) requires q = 2k, got q = " + q.str());
      prefactor_ = sign_pow(k) * kPi;
      break;
    case FtMethod::case_iii:
      if (k < 1 || q != Rational(2 * k - 1))
        throw std::invalid_argument("case (iii) requires q = 2k - 1 >= 1, got q = " + q.str());
      kernel_ = ZonalKernel::log();
      prefactor_ = sign_pow(k + 1);
      break;
    case FtMethod::closed_form:
      throw std::invalid_argument("LemmaTransform: closed_form is not a lemma branch");
  }
  if (branch_.method == FtMethod::case_iii) second_ = iterated_laplacian(fn_.expr(), k - 1);
  main_ = iterated_laplacian(fn_.expr(), k);
  const QFExpression* exprs[] = {&fn_.expr(), &main_, &second_};
  blocks_ = coordinate_blocks(exprs);
}

double LemmaTransform::second_term(const FtConfig& config) const {
  if (branch_.method != FtMethod::case_iii) return 0.0;
  const int n = fn_.dims();
  // Zonal reduction about the most anisotropic axis; the t-rule is graded
  // toward the hyperplane where the integrand concentrates.
  const Vector axis = Vector::Unit(n, most_anisotropic_axis(second_));
  InnerRule inner;
  inner.resolution = config.inner_resolution;
  if (config.use_symmetry) {
    inner.priority = block_priority(n, blocks_);
    inner.priority_only = true;
  }
  const ZonalKernel ks[] = {ZonalKernel::smooth()};
  const QFExpression* fs[] = {&second_};
  const double integral = zonal_reduce(axis, ks, fs, config.t, inner)[0];
  return sign_pow(branch_.k) * (2.0 - n) * integral;
}

double LemmaTransform::value_at(const Vector& xi_in, const FtConfig& config, double second) const {
  const int n = fn_.dims();
  if (xi_in.size() != n) throw std::invalid_argument("LemmaTransform: direction has wrong dimension");
  if (std::abs(xi_in.norm() - 1.0) > 1e-12) throw std::invalid_argument("LemmaTransform: direction must be a unit vector");
  const Vector xi = canonical_direction(xi_in);
  if (main_.is_zero()) return second;
  InnerRule inner;
  inner.resolution = config.inner_resolution;
  if (config.use_symmetry) {
    inner.priority = block_priority(n, blocks_);
    inner.priority_only = true;
  }
  const QFExpression* fs[] = {&main_};
  if (branch_.method == FtMethod::case_ii) return prefactor_ * integrate_subsphere(xi, fs, inner)[0];
  const ZonalKernel ks[] = {kernel_};
  return prefactor_ * zonal_reduce(xi, ks, fs, config.t, inner)[0] + second;
}

double LemmaTransform::operator()(const Vector& xi, const FtConfig& config) const {
  return value_at(xi, config, second_term(config));
}

Vector LemmaTransform::evaluate(const Matrix& directions, const FtConfig& config) const {
  const double second = second_term(config);
  Vector out(directions.cols());
  detail::parallel_for(static_cast<std::size_t>(directions.cols()), worker_threads(), [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    out[c] = value_at(directions.col(c), config, second);
  });
  return out;
}

double ft_lemma_case(const HomogeneousFn& fn, const Vector& xi, const FtConfig& config, std::optional<FtBranch> branch) {
  return LemmaTransform(fn, branch)(xi, config);
}

FourierResult ft_lemma_case(const HomogeneousFn& fn, const Matrix& directions, const FtConfig& config,
                            std::optional<FtBranch> branch, bool estimate_error) {
  const LemmaTransform tr(fn, branch);
  FourierResult r;
  r.directions = directions;
  r.values = tr.evaluate(directions, config);
  r.homogeneity_out = -fn.dims() + fn.p().to_double();
  r.method = tr.branch().method;
  r.k = tr.branch().k;
  if (estimate_error && r.values.size() > 0) {
    Eigen::Index arg = 0;
    r.values.minCoeff(&arg);
    r.est_error = std::abs(tr(directions.col(arg), config.refined()) - r.values[arg]);
  }
  return r;
}

double ft_closed_form(const HomogeneousFn& fn, const Vector& xi) {
  const int n = fn.dims();
  const double p = fn.p().to_double();
  double sum = 0.0;
  for (const QFTerm& t : fn.expr().terms()) {
    if (t.factors.size() != 1)
      throw std::invalid_argument("ft_closed_form: term is not a single quadratic-form power");
    const DiagQuadForm& q = fn.expr().forms()[static_cast<std::size_t>(t.factors[0].form)];
    if (!q.positive_definite()) throw std::invalid_argument("ft_closed_form: degenerate form");
    // c Q^{-p/2} = c |T x|^{-p} with T = diag(sqrt(d))
    sum += t.coeff * ft_linear_image(n, p, q.coeffs().cwiseSqrt(), xi);
  }
  return sum;
}

ParsevalResult parseval_check(const HomogeneousFn& k_fn, const HomogeneousFn& l_fn, const FtConfig& config) {
  const int n = k_fn.dims();
  if (l_fn.dims() != n) throw std::invalid_argument("parseval_check: dimension mismatch");
  if (k_fn.p() + l_fn.p() != Rational(n))
    throw std::invalid_argument("parseval_check: homogeneity degrees must sum to -n");
  const LemmaTransform tk(k_fn), tl(l_fn);
  const QFExpression product = k_fn.expr() * l_fn.expr();
  const QFExpression* all[] = {&tk.integrand(), &tl.integrand(), &k_fn.expr(), &l_fn.expr()};
  const auto blocks = config.use_symmetry ? coordinate_blocks(all) : trivial_blocks(n);
  const SphereRule rule = outer_rule(n, blocks, config);

  // Orbit rules list one node of each antipodal pair first; transforms are even.
  const Eigen::Index used = config.use_symmetry ? rule.size() / 2 : rule.size();
  const double mult = config.use_symmetry ? 2.0 : 1.0;
  const Matrix reps = rule.nodes.leftCols(used);
  const Vector fk = tk.evaluate(reps, config);
  const Vector fl = tl.evaluate(reps, config);
  ParsevalResult r;
  r.lhs = mult * (rule.weights.head(used).array() * fk.array() * fl.array()).sum();
  r.rhs = std::pow(2.0 * kPi, n) * integrate_sphere(rule, product);
  r.rel_gap = std::abs(r.lhs - r.rhs) / std::abs(r.rhs);
  return r;
}

Vector canonical_direction(const Vector& xi) {
  for (Eigen::Index j = 0; j < xi.size(); ++j) {
    if (xi[j] > 0.0) return xi;
    if (xi[j] < 0.0) return -xi;
  }
  return xi;
}

int worker_threads() { return detail::env_threads(); }

}  // namespace kib

#include "kib/quadform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace kib {

namespace {

constexpr double kFormMatchTol = 1e-13;
constexpr double kDropRelTol = 1e-14;

void check_dims(int a, int b, const char* where) {
  if (a != b)
    throw std::invalid_argument(std::string(where) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
}

// Upper bound of |Q^e| on the unit sphere for a form normalised to max 1.
double factor_sup_bound(const DiagQuadForm& q, const Rational& e) {
  if (e.num() > 0) return 1.0;
  const double lo = q.coeffs().minCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return std::pow(lo, e.to_double());
}

}  // namespace

DiagQuadForm::DiagQuadForm(Vector coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.size() == 0) throw std::invalid_argument("DiagQuadForm: empty coefficient vector");
  if (!coeffs_.allFinite() || (coeffs_.array() < 0.0).any())
    throw std::invalid_argument("DiagQuadForm: coefficients must be finite and nonnegative");
  if (coeffs_.maxCoeff() <= 0.0) throw std::invalid_argument("DiagQuadForm: all coefficients zero");
}

DiagQuadForm DiagQuadForm::euclidean(int dims) { return DiagQuadForm(Vector::Ones(dims)); }

double DiagQuadForm::operator()(const Eigen::Ref<const Vector>& x) const {
  check_dims(dims(), static_cast<int>(x.size()), "DiagQuadForm");
  return coeffs_.dot(x.cwiseAbs2());
}

WeightVector::WeightVector(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0 || !weights_.allFinite() || (weights_.array() <= 0.0).any())
    throw std::invalid_argument("WeightVector: weights must be finite and positive");
}

WeightVector WeightVector::unit(int dims) { return WeightVector(Vector::Ones(dims)); }

// Accumulates terms against an interned form table, then canonicalises.
class ExpressionBuilder {
 public:
  ExpressionBuilder(int dims, Rational degree) : dims_(dims), degree_(degree) {}

  // Returns the id of the normalised form and the scale s with raw = s * form.
  std::pair<int, double> intern(const Vector& raw) {
    check_dims(dims_, static_cast<int>(raw.size()), "QFExpression");
    const double scale = raw.maxCoeff();
    if (!(scale > 0.0)) throw std::invalid_argument("QFExpression: zero quadratic form");
    Vector normalised = raw / scale;
    for (std::size_t i = 0; i < forms_.size(); ++i) {
      if ((forms_[i].coeffs() - normalised).cwiseAbs().maxCoeff() <= kFormMatchTol)
        return {static_cast<int>(i), scale};
    }
    forms_.emplace_back(std::move(normalised));
    return {static_cast<int>(forms_.size()) - 1, scale};
  }

  const DiagQuadForm& form(int id) const { return forms_[static_cast<std::size_t>(id)]; }

  void add(double coeff, std::vector<Factor> factors) {
    if (coeff == 0.0) return;
    std::sort(factors.begin(), factors.end(),
              [](const Factor& a, const Factor& b) { return a.form < b.form; });
    Key key;
    Rational half_degree;
    for (const Factor& f : factors) {
      half_degree += f.exponent;
      if (!key.empty() && key.back().first == f.form)
        key.back().second += f.exponent;
      else
        key.emplace_back(f.form, f.exponent);
    }
    std::erase_if(key, [](const auto& p) { return p.second.is_zero(); });
    if (half_degree * Rational(2) != degree_)
      throw std::logic_error("QFExpression: term degree " + (half_degree * Rational(2)).str() +
                             " differs from expression degree " + degree_.str());
    terms_[key] += coeff;
  }

  // Adds coeff * prod raw_j^{e_j} for un-normalised forms.
  void add_raw(double coeff, const std::vector<std::pair<Vector, Rational>>& raw_factors) {
    std::vector<Factor> factors;
    factors.reserve(raw_factors.size());
    for (const auto& [raw, e] : raw_factors) {
      const auto [id, scale] = intern(raw);
      coeff *= std::pow(scale, e.to_double());
      factors.push_back({id, e});
    }
    add(coeff, std::move(factors));
  }

  // Adds every term of `src`, scaled by s.
  void add_expression(const QFExpression& src, double s) {
    const std::vector<int> ids = intern_all(src);
    for (const QFTerm& t : src.terms()) {
      std::vector<Factor> f = t.factors;
      for (Factor& x : f) x.form = ids[static_cast<std::size_t>(x.form)];
      add(s * t.coeff, std::move(f));
    }
  }

  std::vector<int> intern_all(const QFExpression& src) {
    std::vector<int> ids;
    ids.reserve(src.forms().size());
    for (const DiagQuadForm& q : src.forms()) ids.push_back(intern(q.coeffs()).first);
    return ids;
  }

  QFExpression build() && {
    // Drop terms that are negligible against the largest sup-norm bound.
    std::vector<std::pair<const Key*, double>> kept;
    double max_bound = 0.0;
    std::vector<double> bounds;
    for (const auto& [key, c] : terms_) {
      double b = std::abs(c);
      for (const auto& [id, e] : key) b *= factor_sup_bound(forms_[static_cast<std::size_t>(id)], e);
      bounds.push_back(b);
      if (std::isfinite(b)) max_bound = std::max(max_bound, b);
    }
    std::size_t idx = 0;
    for (const auto& [key, c] : terms_) {
      const double b = bounds[idx++];
      if (c == 0.0 || b < kDropRelTol * max_bound) continue;
      kept.emplace_back(&key, c);
    }

    // Compact the form table to the forms still referenced.
    std::vector<int> remap(forms_.size(), -1);
    for (const auto& [key, c] : kept)
      for (const auto& [id, e] : *key) remap[static_cast<std::size_t>(id)] = 0;
    QFExpression out;
    out.dims_ = dims_;
    out.degree_ = degree_;
    for (std::size_t i = 0; i < forms_.size(); ++i) {
      if (remap[i] < 0) continue;
      remap[i] = static_cast<int>(out.forms_.size());
      out.forms_.push_back(forms_[i]);
    }
    out.terms_.reserve(kept.size());
    for (const auto& [key, c] : kept) {
      QFTerm t;
      t.coeff = c;
      for (const auto& [id, e] : *key) t.factors.push_back({remap[static_cast<std::size_t>(id)], e});
      out.terms_.push_back(std::move(t));
    }
    return out;
  }

 private:
  using Key = std::vector<std::pair<int, Rational>>;
  int dims_;
  Rational degree_;
  std::vector<DiagQuadForm> forms_;
  std::map<Key, double> terms_;
};

QFExpression::QFExpression(int dims, Rational degree) : dims_(dims), degree_(degree) {
  if (dims < 1) throw std::invalid_argument("QFExpression: dims must be positive");
}

QFExpression QFExpression::power(const DiagQuadForm& q, Rational exponent, double coeff) {
  ExpressionBuilder b(q.dims(), exponent * Rational(2));
  b.add_raw(coeff, {{q.coeffs(), exponent}});
  return std::move(b).build();
}

QFExpression QFExpression::constant(int dims, double value) {
  ExpressionBuilder b(dims, Rational(0));
  b.add(value, {});
  return std::move(b).build();
}

QFExpression operator+(const QFExpression& a, const QFExpression& b) {
  check_dims(a.dims(), b.dims(), "QFExpression +");
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (a.degree() != b.degree())
    throw std::invalid_argument("QFExpression +: degrees differ (" + a.degree().str() + " vs " +
                                b.degree().str() + ")");
  ExpressionBuilder out(a.dims(), a.degree());
  out.add_expression(a, 1.0);
  out.add_expression(b, 1.0);
  return std::move(out).build();
}

QFExpression operator-(const QFExpression& a, const QFExpression& b) { return a + (-1.0) * b; }

QFExpression operator*(double s, const QFExpression& e) {
  ExpressionBuilder out(e.dims(), e.degree());
  out.add_expression(e, s);
  return std::move(out).build();
}

QFExpression operator*(const QFExpression& a, const QFExpression& b) {
  check_dims(a.dims(), b.dims(), "QFExpression *");
  ExpressionBuilder out(a.dims(), a.degree() + b.degree());
  const std::vector<int> ia = out.intern_all(a);
  const std::vector<int> ib = out.intern_all(b);
  for (const QFTerm& ta : a.terms()) {
    for (const QFTerm& tb : b.terms()) {
      std::vector<Factor> f;
      for (Factor x : ta.factors) f.push_back({ia[static_cast<std::size_t>(x.form)], x.exponent});
      for (Factor x : tb.factors) f.push_back({ib[static_cast<std::size_t>(x.form)], x.exponent});
      out.add(ta.coeff * tb.coeff, std::move(f));
    }
  }
  return std::move(out).build();
}

QFExpression QFExpression::pow(int j) const {
  if (j < 0) throw std::invalid_argument("QFExpression::pow: negative power");
  QFExpression acc = constant(dims_, 1.0);
  for (int i = 0; i < j; ++i) acc = acc * *this;
  return acc;
}

double evaluate(const QFExpression& expr, const Eigen::Ref<const Vector>& x) {
  check_dims(expr.dims(), static_cast<int>(x.size()), "evaluate");
  std::vector<double> q;
  q.reserve(expr.forms().size());
  for (const DiagQuadForm& f : expr.forms()) q.push_back(f(x));
  double sum = 0.0;
  for (const QFTerm& t : expr.terms()) {
    double v = t.coeff;
    for (const Factor& f : t.factors) {
      const double qv = q[static_cast<std::size_t>(f.form)];
      if (qv <= 0.0 && f.exponent.num() < 0)
        throw std::domain_error("evaluate: form with negative exponent vanishes at x");
      v *= std::pow(qv, f.exponent.to_double());
    }
    sum += v;
  }
  return sum;
}

QFExpression laplacian(const QFExpression& expr, const WeightVector& weights) {
  check_dims(expr.dims(), weights.dims(), "laplacian");
  const Vector& w = weights.weights();
  ExpressionBuilder out(expr.dims(), expr.degree() - Rational(2));
  const std::vector<int> ids = out.intern_all(expr);
  const std::size_t nf = expr.forms().size();

  std::vector<double> trace(nf);
  for (std::size_t i = 0; i < nf; ++i) trace[i] = w.dot(expr.forms()[i].coeffs());

  // Derived forms sum_j w_j d_ij d_i'j x_j^2, interned lazily.
  std::map<std::pair<std::size_t, std::size_t>, std::pair<int, double>> cross;
  auto cross_form = [&](std::size_t i, std::size_t j) -> std::pair<int, double> {
    const auto key = std::minmax(i, j);
    if (auto it = cross.find(key); it != cross.end()) return it->second;
    const Vector raw =
        w.cwiseProduct(expr.forms()[i].coeffs()).cwiseProduct(expr.forms()[j].coeffs());
    std::pair<int, double> r{-1, 0.0};
    if (raw.maxCoeff() > 0.0) r = out.intern(raw);
    cross.emplace(key, r);
    return r;
  };

  for (const QFTerm& t : expr.terms()) {
    std::vector<Factor> base = t.factors;
    for (Factor& f : base) f.form = ids[static_cast<std::size_t>(f.form)];
    const std::size_t nt = t.factors.size();
    for (std::size_t a = 0; a < nt; ++a) {
      const std::size_t fa = static_cast<std::size_t>(t.factors[a].form);
      const Rational ea = t.factors[a].exponent;
      const double ead = ea.to_double();

      // 2 e_a tr_a / Q_a
      {
        std::vector<Factor> f = base;
        f[a].exponent -= Rational(1);
        out.add(t.coeff * 2.0 * ead * trace[fa], std::move(f));
      }
      // 4 e_a (e_a - 1) S_aa / Q_a^2
      if (const auto [sid, s] = cross_form(fa, fa); sid >= 0) {
        std::vector<Factor> f = base;
        f[a].exponent -= Rational(2);
        f.push_back({sid, Rational(1)});
        out.add(t.coeff * 4.0 * ead * (ead - 1.0) * s, std::move(f));
      }
      // 8 e_a e_b S_ab / (Q_a Q_b)
      for (std::size_t b = a + 1; b < nt; ++b) {
        const std::size_t fb = static_cast<std::size_t>(t.factors[b].form);
        const auto [sid, s] = cross_form(fa, fb);
        if (sid < 0) continue;
        std::vector<Factor> f = base;
        f[a].exponent -= Rational(1);
        f[b].exponent -= Rational(1);
        f.push_back({sid, Rational(1)});
        out.add(t.coeff * 8.0 * ead * t.factors[b].exponent.to_double() * s, std::move(f));
      }
    }
  }
  return std::move(out).build();
}

QFExpression laplacian(const QFExpression& expr) {
  return laplacian(expr, WeightVector::unit(expr.dims()));
}

QFExpression iterated_laplacian(const QFExpression& expr, const WeightVector& weights, int k,
                                std::size_t term_cap) {
  if (k < 0) throw std::invalid_argument("iterated_laplacian: negative order");
  QFExpression cur = expr;
  for (int i = 0; i < k; ++i) {
    cur = laplacian(cur, weights);
    if (cur.size() > term_cap)
      throw std::length_error("iterated_laplacian: " + std::to_string(cur.size()) +
                              " terms exceed cap " + std::to_string(term_cap));
  }
  return cur;
}

QFExpression iterated_laplacian(const QFExpression& expr, int k, std::size_t term_cap) {
  return iterated_laplacian(expr, WeightVector::unit(expr.dims()), k, term_cap);
}

QFExpression euler_radial_derivative(const QFExpression& expr) {
  ExpressionBuilder out(expr.dims(), expr.degree());
  const std::vector<int> ids = out.intern_all(expr);
  for (const QFTerm& t : expr.terms()) {
    std::vector<Factor> base = t.factors;
    for (Factor& f : base) f.form = ids[static_cast<std::size_t>(f.form)];
    for (std::size_t a = 0; a < t.factors.size(); ++a) {
      // x . grad Q = sum_j x_j * 2 d_j x_j, again a diagonal form.
      const Vector grad_form = 2.0 * expr.forms()[static_cast<std::size_t>(t.factors[a].form)].coeffs();
      const auto [gid, s] = out.intern(grad_form);
      std::vector<Factor> f = base;
      f[a].exponent -= Rational(1);
      f.push_back({gid, Rational(1)});
      out.add(t.coeff * t.factors[a].exponent.to_double() * s, std::move(f));
    }
  }
  return std::move(out).build();
}

QFExpression spherical_laplacian_on_sphere(const QFExpression& expr) {
  const Rational m = expr.degree();
  const Rational shift = m * (m + Rational(expr.dims() - 2));
  QFExpression lap = laplacian(expr);
  if (shift.is_zero()) return lap;
  // Degree of expr differs from lap's; on the unit sphere both are
  // evaluated at |x| = 1, so re-home expr at degree m - 2 via |x|^{-2}.
  const QFExpression rehomed =
      expr * QFExpression::power(DiagQuadForm::euclidean(expr.dims()), Rational(-1));
  return lap - shift.to_double() * rehomed;
}

std::string dump(const QFExpression& expr) {
  std::ostringstream os;
  char buf[64];
  os << "QFExpression dims=" << expr.dims() << " degree=" << expr.degree().str()
     << " forms=" << expr.forms().size() << " terms=" << expr.terms().size() << "\n";
  for (std::size_t i = 0; i < expr.forms().size(); ++i) {
    os << "form[" << i << "] = [";
    const Vector& c = expr.forms()[i].coeffs();
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", c[j]);
      os << (j ? ", " : "") << buf;
    }
    os << "]\n";
  }
  for (std::size_t i = 0; i < expr.terms().size(); ++i) {
    const QFTerm& t = expr.terms()[i];
    std::snprintf(buf, sizeof buf, "%+.12e", t.coeff);
    os << "term[" << i << "] = " << buf;
    for (const Factor& f : t.factors) os << " * F" << f.form << "^(" << f.exponent.str() << ")";
    os << "\n";
  }
  return os.str();
}

CompiledExpressions::CompiledExpressions(const QFExpression& expr) {
  const QFExpression* p = &expr;
  *this = CompiledExpressions(std::span<const QFExpression* const>(&p, 1));
}

CompiledExpressions::CompiledExpressions(std::span<const QFExpression* const> exprs) {
  if (exprs.empty()) throw std::invalid_argument("CompiledExpressions: no expressions");
  dims_ = exprs.front()->dims();
  std::vector<Vector> forms;
  std::vector<std::vector<int>> ids(exprs.size());
  std::size_t term_count = 0;
  for (std::size_t e = 0; e < exprs.size(); ++e) {
    check_dims(dims_, exprs[e]->dims(), "CompiledExpressions");
    term_count += exprs[e]->terms().size();
    for (const DiagQuadForm& q : exprs[e]->forms()) {
      int id = -1;
      for (std::size_t i = 0; i < forms.size(); ++i)
        if ((forms[i] - q.coeffs()).cwiseAbs().maxCoeff() == 0.0) id = static_cast<int>(i);
      if (id < 0) {
        forms.push_back(q.coeffs());
        id = static_cast<int>(forms.size()) - 1;
      }
      ids[e].push_back(id);
    }
  }
  form_coeffs_.resize(static_cast<Eigen::Index>(forms.size()), dims_);
  for (std::size_t i = 0; i < forms.size(); ++i)
    form_coeffs_.row(static_cast<Eigen::Index>(i)) = forms[i].transpose();
  exponents_ = Matrix::Zero(static_cast<Eigen::Index>(term_count), form_coeffs_.rows());
  output_coeffs_ = Matrix::Zero(static_cast<Eigen::Index>(exprs.size()), exponents_.rows());
  Eigen::Index row = 0;
  for (std::size_t e = 0; e < exprs.size(); ++e) {
    for (const QFTerm& t : exprs[e]->terms()) {
      for (const Factor& f : t.factors)
        exponents_(row, ids[e][static_cast<std::size_t>(f.form)]) += f.exponent.to_double();
      output_coeffs_(static_cast<Eigen::Index>(e), row) = t.coeff;
      ++row;
    }
  }
}

void CompiledExpressions::evaluate_slow(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const {
  const Vector q = form_coeffs_ * x.cwiseAbs2();
  Vector terms(exponents_.rows());
  for (Eigen::Index t = 0; t < exponents_.rows(); ++t) {
    double v = 1.0;
    for (Eigen::Index f = 0; f < exponents_.cols(); ++f) {
      const double e = exponents_(t, f);
      if (e == 0.0) continue;
      if (q[f] <= 0.0 && e < 0.0)
        throw std::domain_error("evaluate: form with negative exponent vanishes at x");
      v *= std::pow(q[f], e);
    }
    terms[t] = v;
  }
  out = output_coeffs_ * terms;
}

Matrix CompiledExpressions::evaluate(const Eigen::Ref<const Matrix>& points) const {
  check_dims(dims_, static_cast<int>(points.rows()), "CompiledExpressions::evaluate");
  const Eigen::Index n = points.cols();
  Matrix out(outputs(), n);
  constexpr Eigen::Index kChunk = 1024;
  for (Eigen::Index s = 0; s < n; s += kChunk) {
    const Eigen::Index c = std::min(kChunk, n - s);
    const Matrix q = form_coeffs_ * points.middleCols(s, c).cwiseAbs2();
    if ((q.array() > 0.0).all()) {
      const Matrix z = exponents_ * q.array().log().matrix();
      out.middleCols(s, c).noalias() = output_coeffs_ * z.array().exp().matrix();
    } else {
      for (Eigen::Index j = 0; j < c; ++j) evaluate_slow(points.col(s + j), out.col(s + j));
    }
  }
  return out;
}

std::vector<std::vector<int>> coordinate_blocks(std::span<const QFExpression* const> exprs, double tol) {
  if (exprs.empty()) throw std::invalid_argument("coordinate_blocks: no expressions");
  const int n = exprs[0]->dims();
  auto same = [&](int a, int b) {
    for (const QFExpression* e : exprs) {
      if (e->dims() != n) throw std::invalid_argument("coordinate_blocks: dimension mismatch");
      for (const DiagQuadForm& q : e->forms()) {
        const double x = q.coeffs()[a], y = q.coeffs()[b];
        if (std::abs(x - y) > tol * std::max(std::abs(x), std::abs(y))) return false;
      }
    }
    return true;
  };
  std::vector<std::vector<int>> blocks;
  for (int j = 0; j < n; ++j) {
    auto it = std::find_if(blocks.begin(), blocks.end(), [&](const std::vector<int>& b) { return same(b[0], j); });
    if (it == blocks.end())
      blocks.push_back({j});
    else
      it->push_back(j);
  }
  return blocks;
}

std::vector<std::vector<int>> coordinate_blocks(const QFExpression& expr, double tol) {
  const QFExpression* p = &expr;
  return coordinate_blocks(std::span<const QFExpression* const>(&p, 1), tol);
}

}  // namespace kib

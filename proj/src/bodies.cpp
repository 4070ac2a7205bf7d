#include "kib/bodies.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "parallel.hpp"

namespace kib {

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Anchor of the form c * Q^1: every power of the norm is a single term.
bool single_form(const QFExpression& anchor) {
  return anchor.terms().size() == 1 && anchor.terms()[0].factors.size() == 1 &&
         anchor.terms()[0].factors[0].exponent == Rational(1) && anchor.terms()[0].coeff > 0.0;
}

QFExpression substitute_forms(const QFExpression& e, const std::vector<DiagQuadForm>& forms) {
  const int m = forms.front().dims();
  QFExpression out(m, e.degree());
  for (const QFTerm& t : e.terms()) {
    QFExpression term = QFExpression::constant(m, t.coeff);
    for (const Factor& f : t.factors)
      term = term * QFExpression::power(forms[static_cast<std::size_t>(f.form)], f.exponent);
    out = out + term;
  }
  return out;
}

void check_positive_on_sphere(const QFExpression& anchor, const char* what) {
  const SphereRule grid = build_product_rule(anchor.dims() - 1, 12);
  const Matrix v = CompiledExpressions(anchor).evaluate(grid.nodes);
  if (!(v.minCoeff() > 0.0))
    throw std::runtime_error(std::string(what) + ": defining expression is not positive on the sphere (min " +
                             fmt(v.minCoeff()) + ")");
}

}  // namespace

std::string to_string(BodyKind kind) {
  switch (kind) {
    case BodyKind::ball:
      return "ball";
    case BodyKind::ellipsoid:
      return "ellipsoid";
    case BodyKind::sec2:
      return "sec2";
    case BodyKind::sec3:
      return "sec3";
    case BodyKind::section:
      return "section";
  }
  return "unknown";
}

std::string to_string(ConvexityVerdict v) {
  return v == ConvexityVerdict::convex_certified_numerically ? "convex_certified_numerically" : "violation_found";
}

StarBody::StarBody(BodyKind kind, std::string id, QFExpression anchor, Rational exponent)
    : kind_(kind), id_(std::move(id)), anchor_(std::move(anchor)), anchor_exponent_(exponent) {
  frame_ = Matrix::Identity(anchor_.dims(), anchor_.dims());
}

StarBody StarBody::ball(int n) {
  if (n < 2) throw std::invalid_argument("ball: need n >= 2");
  return StarBody(BodyKind::ball, "ball(n=" + std::to_string(n) + ")",
                  QFExpression::power(DiagQuadForm::euclidean(n), Rational(1)), Rational(2));
}

StarBody StarBody::ellipsoid(const Vector& semiaxes) {
  if (semiaxes.size() < 2 || !(semiaxes.minCoeff() > 0.0))
    throw std::invalid_argument("ellipsoid: need at least two positive semiaxes");
  const DiagQuadForm e(semiaxes.cwiseAbs2().cwiseInverse());
  std::string id = "ellipsoid(n=" + std::to_string(semiaxes.size()) + ",axes=";
  for (Eigen::Index j = 0; j < semiaxes.size(); ++j) id += (j ? ":" : "") + fmt(semiaxes[j]);
  StarBody b(BodyKind::ellipsoid, id + ")", QFExpression::power(e, Rational(1)), Rational(2));
  b.ellipsoid_ = e;
  return b;
}

double StarBody::norm(const Vector& x) const {
  if (x.size() != dims()) throw std::invalid_argument("StarBody::norm: dimension mismatch");
  if (x.isZero(0.0)) return 0.0;
  const double a = evaluate(anchor_, x);
  if (!(a > 0.0)) throw std::domain_error("StarBody::norm: defining expression not positive");
  return std::pow(a, 1.0 / anchor_exponent_.to_double());
}

bool StarBody::has_norm_power(Rational s) const {
  if (s.is_zero()) return true;
  if (single_form(anchor_)) return true;
  const Rational j = s / anchor_exponent_;
  return j.is_integer() && j.num() > 0;
}

QFExpression StarBody::norm_power(Rational s) const {
  if (s.is_zero()) return QFExpression::constant(dims(), 1.0);
  if (single_form(anchor_)) {
    // anchor = c Q = ||x||^2
    const QFTerm& t = anchor_.terms()[0];
    const Rational e = s / Rational(2);
    return QFExpression::power(anchor_.forms()[static_cast<std::size_t>(t.factors[0].form)], e,
                               std::pow(t.coeff, e.to_double()));
  }
  const Rational j = s / anchor_exponent_;
  if (!j.is_integer() || j.num() <= 0)
    throw std::domain_error("norm_power: ||x||^" + s.str() + " is not representable for " + id_);
  return anchor_.pow(static_cast<int>(j.num()));
}

std::optional<Vector> StarBody::ellipsoid_semiaxes() const {
  if (!ellipsoid_) return std::nullopt;
  return Vector(ellipsoid_->coeffs().cwiseSqrt().cwiseInverse());
}

StarBody make_sec2_body(int n, int m, int k, double eps) {
  if (!(k >= 1 && k + 3 <= m && m < n))
    throw std::invalid_argument("sec2 body: need k + 3 <= m < n, got n=" + std::to_string(n) +
                                " m=" + std::to_string(m) + " k=" + std::to_string(k));
  if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("sec2 body: need 0 < eps < 1/2");
  Vector d = Vector::Ones(n);
  d.tail(n - m).setConstant(1.0 / (eps * eps));
  const DiagQuadForm e(d);
  const Rational half_k(-k, 2);
  const QFExpression anchor = QFExpression::power(DiagQuadForm::euclidean(n), half_k) -
                              2.0 * std::pow(eps, m - k) * QFExpression::power(e, half_k);
  check_positive_on_sphere(anchor, "sec2 body");
  StarBody b(BodyKind::sec2,
             "sec2(n=" + std::to_string(n) + ",m=" + std::to_string(m) + ",k=" + std::to_string(k) +
                 ",eps=" + fmt(eps) + ")",
             anchor, Rational(-k));
  b.ellipsoid_ = e;
  b.perturbation_ = 2.0 * std::pow(eps, m - k);
  return b;
}

double sec3_perturbation(int n, int k, double eps) { return std::pow(eps, n - k - 1.5); }

StarBody make_sec3_body(int n, int k, double eps, double guard) {
  if (!(k >= 1 && k < n - 3))
    throw std::invalid_argument("sec3 body: need 1 <= k < n - 3, got n=" + std::to_string(n) +
                                " k=" + std::to_string(k));
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("sec3 body: need 0 < eps < 1");
  if (std::pow(eps, n - k - 3.5) > guard)
    throw std::invalid_argument("sec3 body: eps^{n-k-7/2} = " + fmt(std::pow(eps, n - k - 3.5)) +
                                " exceeds the guard " + fmt(guard));
  Vector d = Vector::Ones(n);
  d[n - 1] = 1.0 / (eps * eps);
  const DiagQuadForm e(d);
  const QFExpression anchor = QFExpression::power(DiagQuadForm::euclidean(n), Rational(-1, 2)) -
                              sec3_perturbation(n, k, eps) * QFExpression::power(e, Rational(-1, 2));
  check_positive_on_sphere(anchor, "sec3 body");
  StarBody b(BodyKind::sec3, "sec3(n=" + std::to_string(n) + ",k=" + std::to_string(k) + ",eps=" + fmt(eps) + ")",
             anchor, Rational(-1));
  b.ellipsoid_ = e;
  b.perturbation_ = sec3_perturbation(n, k, eps);
  return b;
}

Expansion sec3_norm_power_expansion(const StarBody& body, int l, int order) {
  if (body.kind() != BodyKind::sec3) throw std::invalid_argument("sec3 expansion: body is not a sec3 body");
  if (l < 1 || order < 0) throw std::invalid_argument("sec3 expansion: need l >= 1 and order >= 0");
  const int n = body.dims();
  const Vector axes = *body.ellipsoid_semiaxes();
  const DiagQuadForm e(axes.cwiseAbs2().cwiseInverse());
  const double delta = body.perturbation();
  Expansion out{QFExpression(n, Rational(-l)), std::min(order, l), 0.0};
  double binom = 1.0;
  for (int i = 0; i <= l; ++i) {
    if (i > 0) binom = binom * (l - i + 1) / i;
    const double c = binom * std::pow(-delta, i);
    if (i <= order) {
      out.expr = out.expr + QFExpression::power(DiagQuadForm::euclidean(n), Rational(-(l - i), 2), c) *
                                QFExpression::power(e, Rational(-i, 2));
    } else {
      out.truncation_bound += std::abs(c);  // |x|^{-(l-i)} ||x||_E^{-i} <= 1 on the sphere
    }
  }
  return out;
}

StarBody section(const StarBody& body, const Subspace& h) {
  const int n = body.dims();
  const int m = h.dim();
  if (h.ambient_dim() != n) throw std::invalid_argument("section: subspace lives in the wrong dimension");
  if (m < 2) throw std::invalid_argument("section: need dim(H) >= 2");
  const Matrix& basis = h.basis;

  std::vector<DiagQuadForm> forms = body.anchor().forms();
  if (body.ellipsoid_) forms.push_back(*body.ellipsoid_);
  std::vector<Matrix> restricted;
  for (const DiagQuadForm& q : forms) restricted.push_back(basis.transpose() * q.coeffs().asDiagonal() * basis);

  auto off_diagonal = [](const Matrix& a) {
    Matrix b = a;
    b.diagonal().setZero();
    return b.cwiseAbs().maxCoeff();
  };
  bool diagonal = true;
  for (const Matrix& a : restricted) diagonal = diagonal && off_diagonal(a) <= 1e-14 * a.cwiseAbs().maxCoeff();
  Matrix v = Matrix::Identity(m, m);
  if (!diagonal) {
    Matrix combo = Matrix::Zero(m, m);
    for (std::size_t f = 0; f < restricted.size(); ++f)
      combo += (1.0 + 0.6180339887498949 * static_cast<double>(f)) * restricted[f] / restricted[f].norm();
    const Eigen::SelfAdjointEigenSolver<Matrix> es(combo);
    if (es.info() != Eigen::Success) throw std::runtime_error("section: eigensolver failed");
    v = es.eigenvectors();
    for (Eigen::Index j = 0; j < m; ++j) {
      Eigen::Index i = 0;
      while (i < m && std::abs(v(i, j)) <= 1e-12) ++i;
      if (i < m && v(i, j) < 0.0) v.col(j) = -v.col(j);
    }
  }

  std::vector<Vector> diag;
  for (const Matrix& a : restricted) {
    const Matrix r = v.transpose() * a * v;
    const double scale = r.cwiseAbs().maxCoeff();
    if (off_diagonal(r) > 1e-9 * scale)
      throw std::runtime_error("section: restricted forms are not simultaneously diagonalisable");
    if (!(r.diagonal().minCoeff() > 1e-12 * scale))
      throw std::runtime_error("section: restricted form is not positive definite");
    diag.push_back(r.diagonal());
  }
  // Snap coordinates on which all forms agree to a common value.
  std::vector<int> group(static_cast<std::size_t>(m), -1);
  for (int j = 0; j < m; ++j) {
    if (group[static_cast<std::size_t>(j)] >= 0) continue;
    group[static_cast<std::size_t>(j)] = j;
    for (int i = j + 1; i < m; ++i) {
      bool same = group[static_cast<std::size_t>(i)] < 0;
      for (const Vector& d : diag)
        same = same && std::abs(d[i] - d[j]) <= 1e-9 * std::max(std::abs(d[i]), std::abs(d[j]));
      if (same) group[static_cast<std::size_t>(i)] = j;
    }
  }
  for (Vector& d : diag) {
    Vector snapped = d;
    for (int j = 0; j < m; ++j) {
      double sum = 0.0;
      int count = 0;
      for (int i = 0; i < m; ++i)
        if (group[static_cast<std::size_t>(i)] == group[static_cast<std::size_t>(j)]) {
          sum += d[i];
          ++count;
        }
      snapped[j] = sum / count;
    }
    d = snapped;
  }
  std::vector<DiagQuadForm> new_forms;
  for (std::size_t f = 0; f < body.anchor().forms().size(); ++f) new_forms.emplace_back(diag[f]);

  StarBody s(BodyKind::section, "section(" + body.id() + ",dim=" + std::to_string(m) + ")",
             substitute_forms(body.anchor(), new_forms), body.anchor_exponent());
  if (body.ellipsoid_) s.ellipsoid_ = DiagQuadForm(diag.back());
  s.perturbation_ = body.perturbation_;
  s.frame_ = body.frame_ * basis * v;
  return s;
}

ConvexityReport convexity_check(const StarBody& body, int planes, int angles, std::uint64_t seed, double tol,
                                double h) {
  if (planes < 1 || angles < 3) throw std::invalid_argument("convexity_check: need planes >= 1 and angles >= 3");
  const int n = body.dims();
  struct PlaneMin {
    double value;
    double angle;
    Vector u, v;
  };
  std::vector<PlaneMin> mins(static_cast<std::size_t>(planes));
  detail::parallel_for(static_cast<std::size_t>(planes), detail::env_threads(), [&](std::size_t p) {
    const Subspace plane = random_subspace(n, 2, detail::splitmix64(seed ^ detail::splitmix64(p)));
    const Vector u = plane.basis.col(0), v = plane.basis.col(1);
    auto r = [&](double phi) { return body.radial(std::cos(phi) * u + std::sin(phi) * v); };
    PlaneMin best{std::numeric_limits<double>::infinity(), 0.0, u, v};
    for (int j = 0; j < angles; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / angles;
      const double r0 = r(phi);
      const double rp1 = r(phi + h), rm1 = r(phi - h), rp2 = r(phi + 0.5 * h), rm2 = r(phi - 0.5 * h);
      const double d1 = (4.0 * (rp2 - rm2) / h - (rp1 - rm1) / (2.0 * h)) / 3.0;
      const double d2 = (4.0 * (rp2 - 2.0 * r0 + rm2) / (0.25 * h * h) - (rp1 - 2.0 * r0 + rm1) / (h * h)) / 3.0;
      const double value = r0 * r0 + 2.0 * d1 * d1 - r0 * d2;
      if (value < best.value) best = {value, phi, u, v};
    }
    mins[p] = best;
  });
  ConvexityReport rep;
  rep.planes = planes;
  rep.angles = angles;
  rep.min_value = std::numeric_limits<double>::infinity();
  for (const PlaneMin& pm : mins) {
    if (pm.value < rep.min_value) {
      rep.min_value = pm.value;
      rep.worst_angle = pm.angle;
      rep.worst_u = pm.u;
      rep.worst_v = pm.v;
    }
  }
  rep.verdict = rep.min_value >= -tol ? ConvexityVerdict::convex_certified_numerically
                                      : ConvexityVerdict::violation_found;
  return rep;
}

}  // namespace kib

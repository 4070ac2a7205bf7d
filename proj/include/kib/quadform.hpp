#pragma once

// Closed algebra of products of powers of diagonal quadratic forms.
//
// Every function handled by the toolkit is a finite sum
//     sum_t c_t * prod_i Q_i(x)^{e_ti},   Q_i(x) = sum_j d_ij x_j^2,
// homogeneous of a common degree 2*sum_i e_ti.  The algebra is closed under
// (weighted) Laplacians: differentiating produces the derived forms
// sum_j w_j d_ij d_i'j x_j^2, which are interned per expression.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kib/rational.hpp"

namespace kib {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Q(x) = sum_j d_j x_j^2 with d_j >= 0 and at least one d_j > 0.
class DiagQuadForm {
 public:
  explicit DiagQuadForm(Vector coeffs);

  static DiagQuadForm euclidean(int dims);

  int dims() const { return static_cast<int>(coeffs_.size()); }
  const Vector& coeffs() const { return coeffs_; }
  double operator()(const Eigen::Ref<const Vector>& x) const;
  bool positive_definite() const { return coeffs_.minCoeff() > 0.0; }

 private:
  Vector coeffs_;
};

/// Weights of the anisotropic Laplacian sum_j w_j d^2/dx_j^2.
class WeightVector {
 public:
  explicit WeightVector(Vector weights);

  static WeightVector unit(int dims);

  int dims() const { return static_cast<int>(weights_.size()); }
  const Vector& weights() const { return weights_; }

 private:
  Vector weights_;
};

struct Factor {
  int form = 0;  // index into QFExpression::forms()
  Rational exponent;
};

struct QFTerm {
  double coeff = 0.0;
  std::vector<Factor> factors;  // sorted by form, no zero exponents
};

class ExpressionBuilder;

/// Immutable homogeneous sum of quadratic-form monomials.
///
/// Forms are stored normalised (largest coefficient 1) and deduplicated;
/// the scale is folded into term coefficients.  Terms with identical factor
/// signatures are merged.
class QFExpression {
 public:
  /// The zero expression of the given dimension and nominal degree.
  QFExpression(int dims, Rational degree);

  /// coeff * q(x)^exponent.
  static QFExpression power(const DiagQuadForm& q, Rational exponent, double coeff = 1.0);
  static QFExpression constant(int dims, double value);

  int dims() const { return dims_; }
  Rational degree() const { return degree_; }
  const std::vector<DiagQuadForm>& forms() const { return forms_; }
  const std::vector<QFTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  /// Non-negative integer power, expanded.
  QFExpression pow(int j) const;

  friend QFExpression operator+(const QFExpression& a, const QFExpression& b);
  friend QFExpression operator-(const QFExpression& a, const QFExpression& b);
  friend QFExpression operator*(double s, const QFExpression& e);
  friend QFExpression operator*(const QFExpression& a, const QFExpression& b);

 private:
  friend class ExpressionBuilder;
  QFExpression() = default;

  int dims_ = 0;
  Rational degree_;
  std::vector<DiagQuadForm> forms_;
  std::vector<QFTerm> terms_;
};

/// Value of the expression at x.  Throws std::domain_error when a form with
/// a negative exponent vanishes at x, std::invalid_argument on dimension
/// mismatch.
double evaluate(const QFExpression& expr, const Eigen::Ref<const Vector>& x);

/// sum_j w_j d^2/dx_j^2 expr, exact.  Degree drops by 2.
QFExpression laplacian(const QFExpression& expr, const WeightVector& weights);
QFExpression laplacian(const QFExpression& expr);

/// k-fold laplacian.  Throws std::length_error when an intermediate
/// expression has more than `term_cap` terms.
QFExpression iterated_laplacian(const QFExpression& expr, const WeightVector& weights, int k,
                                std::size_t term_cap = 1'000'000);
QFExpression iterated_laplacian(const QFExpression& expr, int k, std::size_t term_cap = 1'000'000);

/// x . grad(expr), computed with the product rule (equals degree * expr).
QFExpression euler_radial_derivative(const QFExpression& expr);

/// Laplacian minus m(m+n-2) expr, m the degree: the spherical Laplacian of
/// the restriction to the unit sphere.
QFExpression spherical_laplacian_on_sphere(const QFExpression& expr);

/// Partition of the coordinates into maximal blocks on which every form of
/// every expression has equal coefficients (relative tolerance `tol`).  The
/// expressions are then invariant under the orthogonal group of each block.
/// Blocks are ordered by their first coordinate.
std::vector<std::vector<int>> coordinate_blocks(std::span<const QFExpression* const> exprs, double tol = 1e-12);
std::vector<std::vector<int>> coordinate_blocks(const QFExpression& expr, double tol = 1e-12);

/// Textual listing of forms and terms, stable across runs.
std::string dump(const QFExpression& expr);

/// Batched evaluator for several expressions on a common point set.
///
/// Forms are evaluated once per point; term values are formed as
/// exp(E * log Q) with E the exponent matrix.
class CompiledExpressions {
 public:
  explicit CompiledExpressions(std::span<const QFExpression* const> exprs);
  explicit CompiledExpressions(const QFExpression& expr);

  int dims() const { return dims_; }
  int outputs() const { return static_cast<int>(output_coeffs_.rows()); }

  /// points: dims x N.  Returns outputs x N.
  Matrix evaluate(const Eigen::Ref<const Matrix>& points) const;

 private:
  void evaluate_slow(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const;

  int dims_ = 0;
  Matrix form_coeffs_;     // forms x dims
  Matrix exponents_;       // terms x forms
  Matrix output_coeffs_;   // outputs x terms
};

}  // namespace kib

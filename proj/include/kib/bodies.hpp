#pragma once

// Origin-symmetric star bodies whose Minkowski functional has an exact power
// in the quadratic-form algebra: ||x||^a = A(x) for a fixed anchor exponent a.

#include <cstdint>
#include <optional>
#include <string>

#include "kib/quadform.hpp"
#include "kib/quadrature.hpp"

namespace kib {

enum class BodyKind { ball, ellipsoid, sec2, sec3, section };

std::string to_string(BodyKind kind);

class StarBody {
 public:
  static StarBody ball(int n);
  /// ||x||^2 = sum_j x_j^2 / a_j^2.
  static StarBody ellipsoid(const Vector& semiaxes);

  BodyKind kind() const { return kind_; }
  int dims() const { return anchor_.dims(); }
  /// Short identifier with parameters, e.g. "sec2(n=5,m=4,k=1,eps=0.25)".
  const std::string& id() const { return id_; }

  double norm(const Vector& x) const;
  /// rho(theta) = 1 / ||theta||.
  double radial(const Vector& theta) const { return 1.0 / norm(theta); }

  /// ||x||^s as an expression.  Available for every s on balls and
  /// ellipsoids and for positive integer multiples of the anchor exponent
  /// otherwise (expanded exactly); std::domain_error if not representable.
  QFExpression norm_power(Rational s) const;
  bool has_norm_power(Rational s) const;

  Rational anchor_exponent() const { return anchor_exponent_; }
  const QFExpression& anchor() const { return anchor_; }

  /// Semiaxes of the ellipsoid factor E (for ellipsoids, sec2, sec3 and their sections).
  std::optional<Vector> ellipsoid_semiaxes() const;

  /// Coefficient of ||x||_E^{a} in the anchor (2 eps^{m-k} for sec2, eps^{n-k-3/2} for sec3).
  double perturbation() const { return perturbation_; }

  /// For sections: the n x m frame with parent(frame * u) = section(u).
  const Matrix& frame() const { return frame_; }

 private:
  friend StarBody make_sec2_body(int, int, int, double);
  friend StarBody make_sec3_body(int, int, double, double);
  friend StarBody section(const StarBody&, const Subspace&);

  StarBody(BodyKind kind, std::string id, QFExpression anchor, Rational exponent);

  BodyKind kind_;
  std::string id_;
  QFExpression anchor_;
  Rational anchor_exponent_;
  std::optional<DiagQuadForm> ellipsoid_;  // the form of E
  double perturbation_ = 0.0;              // coefficient of the E term in the anchor
  Matrix frame_;
};

/// ||x||^{-k} = |x|^{-k} - 2 eps^{m-k} ||x||_E^{-k},
/// ||x||_E^2 = x_1^2 + ... + x_m^2 + (x_{m+1}^2 + ... + x_n^2) / eps^2.
/// Requires k + 3 <= m < n and 0 < eps < 1/2; verifies positivity of the
/// defining expression on a sphere grid (std::runtime_error on failure).
StarBody make_sec2_body(int n, int m, int k, double eps);

/// ||x||^{-1} = |x|^{-1} - eps^{n-k-3/2} ||x||_E^{-1},
/// ||x||_E^2 = x_1^2 + ... + x_{n-1}^2 + x_n^2 / eps^2.
/// Requires 1 <= k < n - 3 and eps^{n-k-7/2} <= guard.
StarBody make_sec3_body(int n, int k, double eps, double guard = 0.1);

/// eps^{n-k-3/2}.
double sec3_perturbation(int n, int k, double eps);

struct Expansion {
  QFExpression expr;
  int order = 0;
  /// Sup over S^{n-1} of the omitted terms.
  double truncation_bound = 0.0;
};

/// sum_{i <= order} binom(l, i) (-delta)^i |x|^{-(l-i)} ||x||_E^{-i} with
/// delta = eps^{n-k-3/2}: the binomial expansion of ||x||^{-l} for a sec3
/// body.  order >= l gives the exact expression.
Expansion sec3_norm_power_expansion(const StarBody& body, int l, int order);

/// Induced body on R^m.  The section is expressed in principal coordinates:
/// the frame is basis * V with V the ascending, sign-normalised eigenvectors
/// of a generic combination of the restricted forms (kept as the identity if
/// these are already diagonal).  Throws std::runtime_error if the restricted
/// forms are not simultaneously diagonal or not positive definite.
StarBody section(const StarBody& body, const Subspace& h);

enum class ConvexityVerdict { convex_certified_numerically, violation_found };

struct ConvexityReport {
  ConvexityVerdict verdict = ConvexityVerdict::convex_certified_numerically;
  double min_value = 0.0;  // min of r^2 + 2 r'^2 - r r''
  Vector worst_u, worst_v;  // plane of the minimum
  double worst_angle = 0.0;
  int planes = 0;
  int angles = 0;
};

std::string to_string(ConvexityVerdict v);

/// Polar convexity inequality r^2 + 2 r'^2 - r r'' >= -tol on `planes`
/// random central 2-planes (seeded) times `angles` equally spaced angles.
/// Derivatives by central differences with step h and one Richardson level.
ConvexityReport convexity_check(const StarBody& body, int planes = 200, int angles = 720,
                                std::uint64_t seed = 1, double tol = 1e-6, double h = 1e-4);

}  // namespace kib

#pragma once

// Quadrature on the unit sphere S^d in R^{d+1}: Gauss-type 1-D rules,
// tensor-product sphere rules, great-subsphere integrals and the zonal
// reduction of kernels of (theta, xi) to one-dimensional integrals.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "kib/quadform.hpp"

namespace kib {

struct Rule1D {
  Vector nodes;
  Vector weights;
};

/// Gauss-Jacobi rule on [-1, 1] for the weight (1-x)^alpha (1+x)^beta,
/// via the Golub-Welsch eigenvalue problem.
Rule1D gauss_jacobi(int count, double alpha, double beta);
Rule1D gauss_legendre(int count);
/// Gauss-Laguerre rule on [0, inf) for the weight e^{-u}.
Rule1D gauss_laguerre(int count);

struct AdaptiveResult {
  double value = 0.0;
  double error = 0.0;  // sum of |G7 - K15| over the final intervals
  int intervals = 0;
};

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b] with bisection of the
/// interval of largest error.  Integrable endpoint singularities are
/// resolved by repeated bisection.
AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                  double abs_tol = 1e-14, double rel_tol = 1e-13, int max_intervals = 2000);

/// |S^d| = 2 pi^{(d+1)/2} / Gamma((d+1)/2).
double sphere_area(int d);

enum class KernelClass { smooth, abs_power, log };

struct SphereRule {
  int dim = 0;     // nodes live on S^dim in R^{dim+1}
  Matrix nodes;    // (dim+1) x N, unit columns
  Vector weights;  // sum = |S^dim| (for reduced rules: exact only on invariant integrands)
  KernelClass accuracy = KernelClass::smooth;
  /// Coordinate blocks under whose orthogonal groups the integrand must be
  /// invariant for the rule to be valid.  Empty for a full rule.
  std::vector<std::vector<int>> invariant_blocks;

  Eigen::Index size() const { return nodes.cols(); }
};

inline constexpr std::int64_t kDefaultNodeCap = 10'000'000;

/// Tensor-product rule on S^d.  `level_resolution` has d entries: the first
/// d-1 are Gauss-Gegenbauer counts for the successive polar cosines, the last
/// is r giving 2r uniform angles on the final circle.  Nodes are closed under
/// x -> -x with equal weights.
SphereRule build_product_rule(int d, std::span<const int> level_resolution,
                              std::int64_t node_cap = kDefaultNodeCap);
SphereRule build_product_rule(int d, int resolution, std::int64_t node_cap = kDefaultNodeCap);

/// Rule on S^{n-1} valid for integrands invariant under O(B_1) x ... x O(B_r)
/// acting on the coordinate blocks.  Nested Gauss-Jacobi rules in the block
/// norms; resolution^{r-1} representatives, mirrored antipodally.
SphereRule build_orbit_rule(int n, const std::vector<std::vector<int>>& blocks, int resolution);

double integrate_sphere(const SphereRule& rule, const std::function<double(const Vector&)>& f);
double integrate_sphere(const SphereRule& rule, const QFExpression& f);
/// One value per expression.
Vector integrate_sphere(const SphereRule& rule, std::span<const QFExpression* const> fs);

/// Serialises a rule as versioned decimal text.
void write_rule(std::ostream& os, const SphereRule& rule, int resolution);
SphereRule read_rule(std::istream& is);

/// Orthonormal m-frame in R^n.
struct Subspace {
  Matrix basis;  // n x m, orthonormal columns

  int ambient_dim() const { return static_cast<int>(basis.rows()); }
  int dim() const { return static_cast<int>(basis.cols()); }
};

Subspace make_subspace(Matrix basis);
Subspace coordinate_subspace(int n, std::span<const int> axes);
/// Orthonormalised seeded Gaussian n x m matrix (Householder QR, sign fixed by R).
Subspace random_subspace(int n, int m, std::uint64_t seed);

/// Orthonormal basis (n x (n-1)) of xi^perp.  Columns start with an
/// orthonormalisation of the projections of `priority` (in order of largest
/// residual), followed by projected standard basis vectors chosen by largest
/// pivot.  Deterministic.
Matrix complete_frame(const Vector& xi, std::span<const Vector> priority = {});

/// How the inner S^{n-2} integral is discretised.
struct InnerRule {
  int resolution = 32;
  /// Directions the integrand may depend on anisotropically; leading frame axes.
  std::vector<Vector> priority;
  /// If set, the integrand depends on omega only through its components along
  /// `priority`, so trailing levels of the product rule collapse to one node.
  bool priority_only = false;
};

/// Integral of f over the great subsphere S^{n-1} cap xi^perp.
double integrate_subsphere(const Vector& xi, const std::function<double(const Vector&)>& f,
                           const InnerRule& inner);
Vector integrate_subsphere(const Vector& xi, std::span<const QFExpression* const> fs,
                           const InnerRule& inner);

struct ZonalKernel {
  KernelClass kind = KernelClass::smooth;
  double exponent = 0.0;  // s for |t|^s

  static ZonalKernel smooth() { return {KernelClass::smooth, 0.0}; }
  static ZonalKernel abs_power(double s);
  static ZonalKernel log() { return {KernelClass::log, 0.0}; }
  double operator()(double t) const;
};

/// Discretisation of the t-integral on [0, 1]: an endpoint panel [0, delta]
/// with a kernel-adapted rule (Gauss-Jacobi for |t|^s, Gauss-Laguerre after
/// t = delta e^{-u} for ln t), geometric panels up to `graded_top`, uniform
/// panels of width <= `panel_width`, and a Gauss-Jacobi panel at t = 1 that
/// absorbs (1 - t)^{(n-3)/2}.
///
/// Error model: panels are Gauss-Legendre of `panel_nodes` points; the
/// endpoint panel integrates p(t) t^s (resp. p(t) ln t) exactly for
/// polynomials p of degree < 2 * endpoint_nodes, so the residual error is that
/// of approximating the smooth inner profile on each panel.
struct TRuleConfig {
  int panel_nodes = 16;
  int endpoint_nodes = 16;
  int grading_levels = 20;
  double graded_top = 0.125;
  double panel_width = 0.0625;

  TRuleConfig refined() const;
};

/// Nodes in (0, 1] and weights for int_0^1 kernel(t) (1-t^2)^{(n-3)/2} h(t) dt.
Rule1D build_t_rule(int n, const ZonalKernel& kernel, const TRuleConfig& config);

/// int_{S^{n-1}} kernel((theta, xi)) g(theta) d theta, for general g.
double zonal_reduce(const Vector& xi, const ZonalKernel& kernel,
                    const std::function<double(const Vector&)>& g, const TRuleConfig& t_config,
                    const InnerRule& inner);

/// Same for even expressions; kernels[i] is applied to fs[i].  All kernels
/// share the inner integrals at common t-nodes.
Vector zonal_reduce(const Vector& xi, std::span<const ZonalKernel> kernels,
                    std::span<const QFExpression* const> fs, const TRuleConfig& t_config,
                    const InnerRule& inner);

}  // namespace kib

#pragma once

// Sampled certification of k-intersection bodies: K is one iff the
// distribution (||x||_K^{-k})^ is positive.  Positivity is checked on a
// finite direction grid with an error bar from one resolution doubling; a
// negative value beyond that error bar is a witness.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kib/bodies.hpp"
#include "kib/fourier.hpp"

namespace kib {

enum class Verdict { positive_certified, negative_witness, inconclusive };

std::string to_string(Verdict v);

struct CertConfig {
  FtConfig ft;
  /// Resolution of the orbit (or product) rule whose nodes form the grid.
  int grid_resolution = 16;
};

struct DirectionGrid {
  std::string description;
  int resolution = 0;
  Matrix directions;  // n x N unit columns, one per antipodal pair
};

/// Orbit representatives of the block symmetry group (one per antipodal
/// pair) plus all coordinate directions; without symmetry the product-rule
/// nodes reduced modulo x -> -x plus the coordinate directions.
DirectionGrid direction_grid(int n, const std::vector<std::vector<int>>& blocks, int resolution, bool use_symmetry);

struct CertReport {
  std::string body_id;
  int dims = 0;
  int k = 0;
  std::string grid;
  int grid_resolution = 0;
  int grid_size = 0;
  double min_value = 0.0;
  Vector argmin_direction;  // in the body's own coordinates
  Vector argmin_ambient;    // frame * argmin_direction
  Verdict verdict = Verdict::inconclusive;
  double est_error = 0.0;
  FtMethod method = FtMethod::case_ii;
  int branch_k = 0;
  Vector values;  // grid order
};

/// Scan of (expr)^ for expr homogeneous of degree -k.  Verdict positive if
/// min > est_error, negative if min < -est_error, inconclusive otherwise.
CertReport certify_expression(const QFExpression& expr, const std::string& id, const Matrix& frame,
                              const CertConfig& config);

/// Requires 0 < k < dims and ||x||^{-k} representable (std::invalid_argument otherwise).
CertReport certify_k_intersection(const StarBody& body, int k, const CertConfig& config = {});

struct SectionCert {
  std::string label;  // "random[i]" or "coord{0,1,2,3}"
  CertReport report;
};

struct SectionScan {
  std::string body_id;
  int k = 0;
  int m = 0;
  std::uint64_t seed = 0;
  std::vector<SectionCert> sections;
  /// All sampled m-sections positive.
  bool member_sampled = false;
  /// Coordinate section span(e_1, ..., e_{m+1}) (the body itself when m+1 = n).
  std::optional<SectionCert> witness;
  bool witness_negative = false;
};

/// Certifies num_subspaces seeded random m-sections and all coordinate
/// m-sections, plus the witness section for m + 1 when m < dims.
/// Requires k < m <= dims.
SectionScan scan_section_class(const StarBody& body, int k, int m, int num_subspaces, std::uint64_t seed,
                               const CertConfig& config = {});

/// |x|^{-q} ||x||_E^{-p} with ||x||_E^2 = x_1^2 + ... + x_{n-1}^2 + x_n^2 / eps^2.
QFExpression slope_expression(int n, int p, int q, double eps);

struct SlopeReport {
  int p = 0, q = 0, n = 0;
  std::vector<double> eps;
  std::vector<double> values;      // at e_n
  std::vector<double> est_errors;  // resolution doubling at e_n
  FtMethod method = FtMethod::case_ii;
  int branch_k = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double expected_slope = 0.0;  // -n + p + q + 1
  double residual = 0.0;        // max |fit deviation| in log space
  /// Even n - p - q - 1: max over random xi and all eps of |value| eps^{-expected}
  /// divided by the same quantity at the largest eps.
  bool uniform_checked = false;
  int uniform_directions = 0;
  double uniform_constant = 0.0;
  double uniform_ratio = 0.0;
};

/// Requires integers p, q > 0 with p + q <= n - 2 and at least three
/// strictly decreasing eps in (0, 1/4].
SlopeReport slope_experiment(int p, int q, int n, const std::vector<double>& eps, const CertConfig& config = {},
                             int uniform_directions = 100, std::uint64_t seed = 1);

struct LogConstantReport {
  int p = 0, k = 0;
  /// -(2k-1)! int_0^inf z^{-2k} ((1+z^2)^{-p/2} - P(z^2)) dz, P the Taylor polynomial of order 2k-2.
  double z_form = 0.0;
  double z_error = 0.0;
  /// int_0^inf ln z d^{2k}/dz^{2k} (1+z^2)^{-p/2} dz, integrated as written.
  double z_log_form = 0.0;
  double z_log_error = 0.0;
  /// -(1/2) (2k-1)! / ((1/2)(3/2)...(k-1/2)) int_0^inf t^{-1/2} d^k/dt^k (1+t)^{-p/2} dt.
  double t_form = 0.0;
  double t_error = 0.0;
  double rel_gap = 0.0;
};

/// Throws std::invalid_argument unless p, k >= 1, std::runtime_error if
/// |t_form| is not above 10x the combined error estimate.
LogConstantReport log_integral_constant(int p, int k);

/// Coefficients of d^j/dz^j (1+z^2)^{-a} = P_j(z) (1+z^2)^{-a-j}, lowest degree first.
std::vector<std::vector<double>> derivative_polynomials(double a, int order);

struct HierarchyConfig {
  /// Fixed eps, or <= 0 for the automated search.
  double eps = 0.0;
  double guard = 0.1;
  /// Expansion orders of ||x||^{-l} and ||x||^{-k} (through i = order;
  /// exact once order >= the power); < 0 means exact.
  int order_l = 2;
  int order_k = 2;
  int halvings = 8;
  int bisection_steps = 4;
  int slope_points = 3;
  CertConfig cert;
};

struct HierarchyTrial {
  double eps = 0.0;
  double positive_min = 0.0;
  double positive_error = 0.0;
  Verdict positive = Verdict::inconclusive;
  double witness_value = 0.0;
  double witness_error = 0.0;
  Verdict witness = Verdict::inconclusive;
  bool passed = false;
};

struct HierarchyReport {
  int n = 0, k = 0, l = 0;
  double eps_max = 0.0;  // top of the admissible window
  double eps = 0.0;      // chosen
  std::vector<HierarchyTrial> trials;   // the eps search, in order
  std::vector<HierarchyTrial> margins;  // the same checks at the smaller correction eps
  bool found = false;
  int order_l = 0, order_k = 0;
  double truncation_l = 0.0, truncation_k = 0.0;
  std::optional<CertReport> positive;  // scan of (||x||^{-l})^ at the chosen eps
  double witness_value = 0.0;          // (||x||^{-k})^(e_n)
  double witness_error = 0.0;
  Verdict witness = Verdict::inconclusive;
  std::vector<double> correction_eps;
  std::vector<double> correction_values;  // eps^{n-k-3/2} (|x|^{-k+1} ||x||_E^{-1})^(e_n)
  double correction_slope = 0.0;
  double correction_residual = 0.0;
  /// in I_l and not in I_k, both beyond their error bars.
  bool conclusive = false;
};

/// Requires 1 <= k < l < n - 3.
HierarchyReport hierarchy_experiment(int n, int k, int l, const HierarchyConfig& config = {});

/// Least-squares line through (log x, log |y|): slope, intercept, max |deviation|.
struct LogLogFit {
  double slope = 0.0, intercept = 0.0, residual = 0.0;
};
LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace kib

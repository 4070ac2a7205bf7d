#pragma once

// Fourier transforms of even homogeneous functions f(theta) r^{-p}, 0 < p < n,
// represented by their restriction to the unit sphere (the transform is
// homogeneous of degree -n + p).

#include <optional>
#include <string>
#include <vector>

#include "kib/quadform.hpp"
#include "kib/quadrature.hpp"

namespace kib {

/// C_{n,k} = 2^{n-k} pi^{n/2} Gamma((n-k)/2) / Gamma(k/2), the transform of
/// |x|^{-k} on the unit sphere.  Throws std::domain_error unless 0 < k < n.
double constant_cnk(double n, double k);

/// (|x|^{-k})^(y) = C_{n,k} |y|^{-n+k}.
double ft_euclidean_power(int n, double k, const Vector& y);

/// (|Tx|^{-k})^(y) = C_{n,k} |det T|^{-1} |T^{-1} y|^{-n+k} for T = diag(t).
/// Throws std::invalid_argument for a singular T.
double ft_linear_image(int n, double k, const Vector& t, const Vector& y);

/// expr, homogeneous of degree -p with 0 < p < n.
class HomogeneousFn {
 public:
  explicit HomogeneousFn(QFExpression expr);

  int dims() const { return expr_.dims(); }
  const QFExpression& expr() const { return expr_; }
  Rational p() const { return -expr_.degree(); }
  /// q = n - p - 1, the parameter of the three-case formula.
  Rational q() const { return Rational(dims() - 1) - p(); }

 private:
  QFExpression expr_;
};

enum class FtMethod { closed_form, case_i, case_ii, case_iii };

std::string to_string(FtMethod m);

struct FtBranch {
  FtMethod method = FtMethod::case_ii;
  int k = 0;
};

/// Case (ii) for even integer q, (iii) for odd q, (i) with the minimal k otherwise.
FtBranch default_branch(const HomogeneousFn& fn);
/// Case (i) with the given k, or the minimal admissible one when k < 0.
/// Throws std::invalid_argument when q is an odd integer or q >= 2k.
FtBranch case_i_branch(const HomogeneousFn& fn, int k = -1);

struct FtConfig {
  int inner_resolution = 64;  // product rule on the great subsphere S^{n-2}
  int outer_resolution = 32;  // orbit / product rules on S^{n-1}
  TRuleConfig t;
  /// Exploit coordinate blocks on which all forms agree.
  bool use_symmetry = true;

  FtConfig refined() const;
};

/// Value of (f(theta) r^{-p})^ at the unit vector xi by the three-case formula.
/// Throws std::invalid_argument if the branch does not match q.
class LemmaTransform {
 public:
  explicit LemmaTransform(const HomogeneousFn& fn, std::optional<FtBranch> branch = std::nullopt);

  const HomogeneousFn& fn() const { return fn_; }
  const FtBranch& branch() const { return branch_; }
  const QFExpression& integrand() const { return main_; }
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }

  double operator()(const Vector& xi, const FtConfig& config) const;
  /// One value per column; columns are processed concurrently.
  Vector evaluate(const Matrix& directions, const FtConfig& config) const;

 private:
  double second_term(const FtConfig& config) const;
  double value_at(const Vector& xi, const FtConfig& config, double second) const;

  HomogeneousFn fn_;
  FtBranch branch_;
  QFExpression main_;    // Delta^k of the input
  QFExpression second_;  // Delta^{k-1}, case (iii) only
  double prefactor_ = 0.0;
  ZonalKernel kernel_;
  std::vector<std::vector<int>> blocks_;
};

struct FourierResult {
  Matrix directions;  // n x N unit columns
  Vector values;
  double homogeneity_out = 0.0;  // -n + p
  FtMethod method = FtMethod::case_ii;
  int k = 0;
  /// Change under one resolution doubling at the direction of the smallest value.
  double est_error = 0.0;
};

double ft_lemma_case(const HomogeneousFn& fn, const Vector& xi, const FtConfig& config,
                     std::optional<FtBranch> branch = std::nullopt);
FourierResult ft_lemma_case(const HomogeneousFn& fn, const Matrix& directions, const FtConfig& config,
                            std::optional<FtBranch> branch = std::nullopt, bool estimate_error = true);

/// Term-by-term closed form; every term must be a single power c Q^e.
/// Throws std::invalid_argument otherwise.
double ft_closed_form(const HomogeneousFn& fn, const Vector& xi);

struct ParsevalResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_gap = 0.0;
};

/// Both sides of int (|x|_K^{-p})^ (|x|_L^{-n+p})^ = (2 pi)^n int |x|_K^{-p} |x|_L^{-n+p}
/// over S^{n-1}.  Throws std::invalid_argument unless the degrees sum to -n.
ParsevalResult parseval_check(const HomogeneousFn& k_fn, const HomogeneousFn& l_fn, const FtConfig& config);

/// Representative of {xi, -xi} whose first nonzero component is positive.
Vector canonical_direction(const Vector& xi);

/// Worker count from LAB_THREADS (default 1).
int worker_threads();

}  // namespace kib

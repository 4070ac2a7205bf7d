#include "kib/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace kib {

namespace {

// Golub-Welsch from the Jacobi matrix of a three-term recurrence.
Rule1D golub_welsch(const Vector& diag, const Vector& off, double mu0) {
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw std::runtime_error("golub_welsch: eigensolver failed");
  Rule1D r;
  r.nodes = es.eigenvalues();
  r.weights = mu0 * es.eigenvectors().row(0).transpose().cwiseAbs2();
  return r;
}

void symmetrise(Rule1D& r) {
  const Eigen::Index n = r.nodes.size();
  for (Eigen::Index i = 0; i < n / 2; ++i) {
    const Eigen::Index j = n - 1 - i;
    const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[j]);
    r.nodes[i] = -x;
    r.nodes[j] = x;
    r.weights[i] = r.weights[j] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
}

// Map a rule on [-1, 1] to [a, b]; the weight scale is applied by the caller.
double map_node(double x, double a, double b) { return a + 0.5 * (b - a) * (1.0 + x); }

void check_node_cap(std::int64_t count, std::int64_t cap) {
  if (count > cap)
    throw std::length_error("sphere rule: " + std::to_string(count) + " nodes exceed cap " +
                            std::to_string(cap));
}

std::vector<int> inner_levels(int d, const InnerRule& inner, int priority_count) {
  std::vector<int> levels(static_cast<std::size_t>(d), inner.resolution);
  if (inner.priority_only && priority_count <= d - 1) {
    for (int i = priority_count; i < d; ++i) levels[static_cast<std::size_t>(i)] = 1;
  }
  return levels;
}

std::pair<Matrix, int> frame_with_priority(const Vector& xi, std::span<const Vector> priority);

struct InnerNodes {
  Matrix points;  // n x M, points of S^{n-1} cap xi^perp
  Vector weights;
};

InnerNodes inner_nodes(const Vector& xi, const InnerRule& inner) {
  const int n = static_cast<int>(xi.size());
  const auto [frame, priority_count] = frame_with_priority(xi, inner.priority);
  const int d = n - 2;
  SphereRule rule;
  if (d == 0) {
    rule = build_product_rule(0, std::span<const int>());
  } else {
    const std::vector<int> levels = inner_levels(d, inner, priority_count);
    rule = build_product_rule(d, levels);
  }
  return {frame * rule.nodes, rule.weights};
}

// Representatives of blocks[first..] on the unit sphere of their span, with
// weights summing to the area of that sphere.  Peels off one block at a time:
// x = cos(phi) e_B + sin(phi) y, tau = cos(2 phi).
void orbit_points(int n, const std::vector<std::vector<int>>& blocks, std::size_t first, int resolution,
                  std::vector<Vector>& pts, std::vector<double>& wts) {
  const int s1 = static_cast<int>(blocks[first].size());
  if (first + 1 == blocks.size()) {
    Vector e = Vector::Zero(n);
    e[blocks[first][0]] = 1.0;
    pts.push_back(e);
    wts.push_back(sphere_area(s1 - 1));
    return;
  }
  int s2 = 0;
  for (std::size_t b = first + 1; b < blocks.size(); ++b) s2 += static_cast<int>(blocks[b].size());
  std::vector<Vector> rest;
  std::vector<double> rest_w;
  orbit_points(n, blocks, first + 1, resolution, rest, rest_w);
  const Rule1D g = gauss_jacobi(resolution, 0.5 * (s2 - 2), 0.5 * (s1 - 2));
  const double scale = sphere_area(s1 - 1) * std::pow(2.0, -0.5 * (s1 + s2));
  for (Eigen::Index i = 0; i < g.nodes.size(); ++i) {
    const double tau = g.nodes[i];
    const double c = std::sqrt(0.5 * (1.0 + tau));
    const double s = std::sqrt(0.5 * (1.0 - tau));
    for (std::size_t j = 0; j < rest.size(); ++j) {
      Vector e = s * rest[j];
      e[blocks[first][0]] = c;
      pts.push_back(e);
      wts.push_back(scale * g.weights[i] * rest_w[j]);
    }
  }
}

}  // namespace

Rule1D gauss_jacobi(int count, double alpha, double beta) {
  if (count < 1) throw std::invalid_argument("gauss_jacobi: count must be positive");
  if (alpha <= -1.0 || beta <= -1.0) throw std::invalid_argument("gauss_jacobi: alpha, beta must exceed -1");
  const double ab = alpha + beta;
  Vector diag(count);
  Vector off(std::max(count - 1, 0));
  diag[0] = (beta - alpha) / (ab + 2.0);
  for (int k = 1; k < count; ++k) {
    const double s = 2.0 * k + ab;
    diag[k] = (beta * beta - alpha * alpha) / (s * (s + 2.0));
  }
  for (int k = 1; k < count; ++k) {
    const double s = 2.0 * k + ab;
    double b;
    if (k == 1)
      b = 4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
    else
      b = 4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0));
    off[k - 1] = std::sqrt(b);
  }
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) +
                              std::lgamma(beta + 1.0) - std::lgamma(ab + 2.0));
  Rule1D r = golub_welsch(diag, off, mu0);
  if (alpha == beta) symmetrise(r);
  return r;
}

Rule1D gauss_legendre(int count) { return gauss_jacobi(count, 0.0, 0.0); }

Rule1D gauss_laguerre(int count) {
  if (count < 1) throw std::invalid_argument("gauss_laguerre: count must be positive");
  Vector diag(count);
  Vector off(std::max(count - 1, 0));
  for (int k = 0; k < count; ++k) diag[k] = 2.0 * k + 1.0;
  for (int k = 1; k < count; ++k) off[k - 1] = k;
  return golub_welsch(diag, off, 1.0);
}

AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol,
                                  double rel_tol, int max_intervals) {
  static constexpr double xk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                   0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                   0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                   0.207784955007898467600689403773245, 0.0};
  static constexpr double wk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                   0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                   0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                   0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                   0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
  struct Piece {
    double a, b, value, error;
  };
  auto kronrod = [&](double lo, double hi) {
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    const double fc = f(c);
    double k = wk[7] * fc, g = wg[3] * fc;
    for (int i = 0; i < 7; ++i) {
      const double s = f(c - h * xk[i]) + f(c + h * xk[i]);
      k += wk[i] * s;
      if (i % 2 == 1) g += wg[i / 2] * s;
    }
    return Piece{lo, hi, k * h, std::abs((k - g) * h)};
  };
  std::vector<Piece> pieces{kronrod(a, b)};
  auto totals = [&] {
    AdaptiveResult r;
    for (const Piece& p : pieces) {
      r.value += p.value;
      r.error += p.error;
    }
    r.intervals = static_cast<int>(pieces.size());
    return r;
  };
  AdaptiveResult r = totals();
  while (r.error > std::max(abs_tol, rel_tol * std::abs(r.value)) && static_cast<int>(pieces.size()) < max_intervals) {
    auto worst = std::max_element(pieces.begin(), pieces.end(),
                                  [](const Piece& x, const Piece& y) { return x.error < y.error; });
    const Piece p = *worst;
    const double mid = 0.5 * (p.a + p.b);
    if (!(mid > p.a && mid < p.b)) break;  // interval exhausted in floating point
    *worst = kronrod(p.a, mid);
    pieces.push_back(kronrod(mid, p.b));
    r = totals();
  }
  if (!std::isfinite(r.value)) throw std::domain_error("integrate_adaptive: non-finite integrand");
  return r;
}

double sphere_area(int d) {
  if (d < 0) throw std::invalid_argument("sphere_area: negative dimension");
  const double h = 0.5 * (d + 1);
  return 2.0 * std::exp(h * std::log(std::numbers::pi) - std::lgamma(h));
}

SphereRule build_product_rule(int d, std::span<const int> level_resolution, std::int64_t node_cap) {
  if (d < 0) throw std::invalid_argument("build_product_rule: negative dimension");
  if (static_cast<int>(level_resolution.size()) != d)
    throw std::invalid_argument("build_product_rule: need one resolution per level");
  for (int r : level_resolution)
    if (r < 1) throw std::invalid_argument("build_product_rule: resolution must be positive");

  SphereRule rule;
  rule.dim = d;
  if (d == 0) {
    rule.nodes = Matrix(1, 2);
    rule.nodes << 1.0, -1.0;
    rule.weights = Vector::Ones(2);
    return rule;
  }
  std::int64_t count = 2 * static_cast<std::int64_t>(level_resolution.back());
  for (int i = 0; i + 1 < d; ++i) count *= level_resolution[static_cast<std::size_t>(i)];
  check_node_cap(count, node_cap);

  if (d == 1) {
    const int r = level_resolution[0];
    rule.nodes.resize(2, 2 * r);
    rule.weights = Vector::Constant(2 * r, std::numbers::pi / r);
    for (int j = 0; j < r; ++j) {
      const double phi = (j + 0.5) * std::numbers::pi / r;
      rule.nodes(0, j) = std::cos(phi);
      rule.nodes(1, j) = std::sin(phi);
      rule.nodes.col(j + r) = -rule.nodes.col(j);
    }
    return rule;
  }

  const SphereRule sub = build_product_rule(d - 1, level_resolution.subspan(1), node_cap);
  const double a = 0.5 * (d - 2);
  const Rule1D polar = gauss_jacobi(level_resolution[0], a, a);
  const Eigen::Index m = sub.size();
  rule.nodes.resize(d + 1, polar.nodes.size() * m);
  rule.weights.resize(polar.nodes.size() * m);
  for (Eigen::Index i = 0; i < polar.nodes.size(); ++i) {
    const double t = polar.nodes[i];
    const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
    auto block = rule.nodes.middleCols(i * m, m);
    block.row(0).setConstant(t);
    block.bottomRows(d) = s * sub.nodes;
    rule.weights.segment(i * m, m) = polar.weights[i] * sub.weights;
  }
  return rule;
}

SphereRule build_product_rule(int d, int resolution, std::int64_t node_cap) {
  const std::vector<int> levels(static_cast<std::size_t>(std::max(d, 0)), resolution);
  return build_product_rule(d, levels, node_cap);
}

SphereRule build_orbit_rule(int n, const std::vector<std::vector<int>>& blocks, int resolution) {
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto& b : blocks) {
    if (b.empty()) throw std::invalid_argument("build_orbit_rule: empty block");
    for (int j : b) {
      if (j < 0 || j >= n || seen[static_cast<std::size_t>(j)]++)
        throw std::invalid_argument("build_orbit_rule: blocks must partition the coordinates");
    }
  }
  if (std::count(seen.begin(), seen.end(), 1) != n)
    throw std::invalid_argument("build_orbit_rule: blocks must partition the coordinates");

  SphereRule rule;
  rule.dim = n - 1;
  rule.invariant_blocks = blocks;
  std::vector<Vector> pts;
  std::vector<double> wts;
  orbit_points(n, blocks, 0, resolution, pts, wts);
  // Mirror so that the rule stays closed under x -> -x.
  const Eigen::Index m = static_cast<Eigen::Index>(pts.size());
  rule.nodes.resize(n, 2 * m);
  rule.weights.resize(2 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    rule.nodes.col(i) = pts[static_cast<std::size_t>(i)];
    rule.nodes.col(i + m) = -pts[static_cast<std::size_t>(i)];
    rule.weights[i] = rule.weights[i + m] = 0.5 * wts[static_cast<std::size_t>(i)];
  }
  return rule;
}

double integrate_sphere(const SphereRule& rule, const std::function<double(const Vector&)>& f) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < rule.size(); ++i) {
    const Vector x = rule.nodes.col(i);
    const double v = f(x);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "integrate_sphere: non-finite integrand at node " << i << " = [" << x.transpose() << "]";
      throw std::domain_error(os.str());
    }
    sum += rule.weights[i] * v;
  }
  return sum;
}

Vector integrate_sphere(const SphereRule& rule, std::span<const QFExpression* const> fs) {
  const CompiledExpressions compiled(fs);
  const Matrix values = compiled.evaluate(rule.nodes);
  if (!values.allFinite()) throw std::domain_error("integrate_sphere: non-finite integrand value");
  return values * rule.weights;
}

double integrate_sphere(const SphereRule& rule, const QFExpression& f) {
  const QFExpression* p = &f;
  return integrate_sphere(rule, std::span<const QFExpression* const>(&p, 1))[0];
}

void write_rule(std::ostream& os, const SphereRule& rule, int resolution) {
  os << "kib-sphere-rule 1\n";
  os << "dim " << rule.dim << " resolution " << resolution << " nodes " << rule.size() << "\n";
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < rule.size(); ++i) {
    for (Eigen::Index j = 0; j < rule.nodes.rows(); ++j) os << rule.nodes(j, i) << ' ';
    os << rule.weights[i] << '\n';
  }
}

SphereRule read_rule(std::istream& is) {
  std::string magic, key;
  int version = 0;
  if (!(is >> magic >> version) || magic != "kib-sphere-rule" || version != 1)
    throw std::runtime_error("read_rule: not a version-1 sphere rule");
  SphereRule rule;
  int resolution = 0;
  Eigen::Index count = 0;
  std::string k1, k2, k3;
  if (!(is >> k1 >> rule.dim >> k2 >> resolution >> k3 >> count) || k1 != "dim" ||
      k2 != "resolution" || k3 != "nodes" || rule.dim < 0 || count < 0)
    throw std::runtime_error("read_rule: malformed header");
  rule.nodes.resize(rule.dim + 1, count);
  rule.weights.resize(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j <= rule.dim; ++j)
      if (!(is >> rule.nodes(j, i))) throw std::runtime_error("read_rule: truncated node list");
    if (!(is >> rule.weights[i])) throw std::runtime_error("read_rule: truncated node list");
  }
  return rule;
}

Subspace make_subspace(Matrix basis) {
  const Eigen::Index m = basis.cols();
  if (m < 1 || m > basis.rows()) throw std::invalid_argument("make_subspace: need 1 <= m <= n");
  if (((basis.transpose() * basis) - Matrix::Identity(m, m)).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("make_subspace: basis is not orthonormal");
  return Subspace{std::move(basis)};
}

Subspace coordinate_subspace(int n, std::span<const int> axes) {
  Matrix b = Matrix::Zero(n, static_cast<Eigen::Index>(axes.size()));
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] < 0 || axes[i] >= n) throw std::invalid_argument("coordinate_subspace: axis out of range");
    b(axes[i], static_cast<Eigen::Index>(i)) = 1.0;
  }
  return make_subspace(std::move(b));
}

Subspace random_subspace(int n, int m, std::uint64_t seed) {
  if (m < 1 || m > n) throw std::invalid_argument("random_subspace: need 1 <= m <= n");
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::mt19937_64 gen(seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(attempt));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(n, m);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(gen);
    const Eigen::HouseholderQR<Matrix> qr(g);
    const Matrix r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    if (r.diagonal().cwiseAbs().minCoeff() < 1e-10) continue;
    Matrix q = qr.householderQ() * Matrix::Identity(n, m);
    for (Eigen::Index j = 0; j < m; ++j)
      if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return Subspace{std::move(q)};
  }
  throw std::runtime_error("random_subspace: repeated rank deficiency");
}

Matrix complete_frame(const Vector& xi, std::span<const Vector> priority) {
  return frame_with_priority(xi, priority).first;
}

namespace {

std::pair<Matrix, int> frame_with_priority(const Vector& xi, std::span<const Vector> priority) {
  const Eigen::Index n = xi.size();
  if (n < 2) throw std::invalid_argument("complete_frame: need n >= 2");
  if (std::abs(xi.norm() - 1.0) > 1e-12) throw std::invalid_argument("complete_frame: xi must be a unit vector");
  std::vector<Vector> cols;
  auto residual = [&](Vector v) {
    for (int pass = 0; pass < 2; ++pass) {
      v -= xi * xi.dot(v);
      for (const Vector& c : cols) v -= c * c.dot(v);
    }
    return v;
  };
  auto greedy = [&](std::vector<Vector> cand) {
    while (static_cast<Eigen::Index>(cols.size()) < n - 1 && !cand.empty()) {
      std::vector<double> norms;
      double best = 0.0;
      for (const Vector& c : cand) {
        norms.push_back(residual(c).norm());
        best = std::max(best, norms.back());
      }
      if (best < 1e-10) break;
      std::size_t pick = 0;
      while (norms[pick] < best - 1e-12) ++pick;
      const Vector r = residual(cand[pick]);
      cols.push_back(r / r.norm());
      cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  };
  greedy(std::vector<Vector>(priority.begin(), priority.end()));
  const int priority_used = static_cast<int>(cols.size());
  std::vector<Vector> basis;
  for (Eigen::Index j = 0; j < n; ++j) basis.push_back(Vector::Unit(n, j));
  greedy(std::move(basis));
  Matrix frame(n, n - 1);
  for (Eigen::Index j = 0; j < n - 1; ++j) frame.col(j) = cols[static_cast<std::size_t>(j)];
  return {frame, priority_used};
}

}  // namespace

double integrate_subsphere(const Vector& xi, const std::function<double(const Vector&)>& f,
                           const InnerRule& inner) {
  const InnerNodes nodes = inner_nodes(xi, inner);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < nodes.points.cols(); ++i) sum += nodes.weights[i] * f(nodes.points.col(i));
  return sum;
}

Vector integrate_subsphere(const Vector& xi, std::span<const QFExpression* const> fs, const InnerRule& inner) {
  const InnerNodes nodes = inner_nodes(xi, inner);
  const CompiledExpressions compiled(fs);
  return compiled.evaluate(nodes.points) * nodes.weights;
}

ZonalKernel ZonalKernel::abs_power(double s) {
  if (!(s > -1.0)) throw std::invalid_argument("ZonalKernel::abs_power: exponent must exceed -1");
  return {KernelClass::abs_power, s};
}

double ZonalKernel::operator()(double t) const {
  switch (kind) {
    case KernelClass::smooth:
      return 1.0;
    case KernelClass::abs_power:
      return std::pow(std::abs(t), exponent);
    case KernelClass::log:
      return std::log(std::abs(t));
  }
  return 0.0;
}

TRuleConfig TRuleConfig::refined() const {
  TRuleConfig c = *this;
  c.panel_nodes *= 2;
  c.endpoint_nodes *= 2;
  c.panel_width *= 0.5;
  return c;
}

Rule1D build_t_rule(int n, const ZonalKernel& kernel, const TRuleConfig& cfg) {
  if (n < 2) throw std::invalid_argument("build_t_rule: need n >= 2");
  if (cfg.panel_nodes < 1 || cfg.endpoint_nodes < 1 || cfg.grading_levels < 0 ||
      !(cfg.graded_top > 0.0 && cfg.graded_top < 1.0) || !(cfg.panel_width > 0.0))
    throw std::invalid_argument("build_t_rule: invalid configuration");
  const double a = 0.5 * (n - 3);
  std::vector<double> nodes, weights;
  auto sphere_factor = [a](double t) { return std::pow((1.0 - t) * (1.0 + t), a); };

  const double delta = cfg.graded_top * std::ldexp(1.0, -cfg.grading_levels);
  switch (kernel.kind) {
    case KernelClass::smooth: {
      const Rule1D g = gauss_legendre(cfg.endpoint_nodes);
      for (Eigen::Index i = 0; i < g.nodes.size(); ++i) {
        const double t = map_node(g.nodes[i], 0.0, delta);
        nodes.push_back(t);
        weights.push_back(0.5 * delta * g.weights[i] * sphere_factor(t));
      }
      break;
    }
    case KernelClass::abs_power: {
      const double s = kernel.exponent;
      const Rule1D g = gauss_jacobi(cfg.endpoint_nodes, 0.0, s);
      const double scale = std::pow(0.5 * delta, s + 1.0);
      for (Eigen::Index i = 0; i < g.nodes.size(); ++i) {
        const double t = map_node(g.nodes[i], 0.0, delta);
        nodes.push_back(t);
        weights.push_back(scale * g.weights[i] * sphere_factor(t));
      }
      break;
    }
    case KernelClass::log: {
      // int_0^delta ln t h(t) dt = delta int_0^inf (ln delta - u) h(delta e^{-u}) e^{-u} du
      const Rule1D g = gauss_laguerre(cfg.endpoint_nodes);
      const double log_delta = std::log(delta);
      for (Eigen::Index i = 0; i < g.nodes.size(); ++i) {
        const double t = delta * std::exp(-g.nodes[i]);
        nodes.push_back(t);
        weights.push_back(g.weights[i] * delta * (log_delta - g.nodes[i]) * sphere_factor(t));
      }
      break;
    }
  }

  const Rule1D gl = gauss_legendre(cfg.panel_nodes);
  auto add_panel = [&](double lo, double hi) {
    for (Eigen::Index i = 0; i < gl.nodes.size(); ++i) {
      const double t = map_node(gl.nodes[i], lo, hi);
      nodes.push_back(t);
      weights.push_back(0.5 * (hi - lo) * gl.weights[i] * kernel(t) * sphere_factor(t));
    }
  };
  for (int j = 0; j < cfg.grading_levels; ++j)
    add_panel(std::ldexp(delta, j), std::ldexp(delta, j + 1));

  const int panels = std::max(1, static_cast<int>(std::ceil((1.0 - cfg.graded_top) / cfg.panel_width - 1e-12)));
  const double h = (1.0 - cfg.graded_top) / panels;
  for (int i = 0; i + 1 < panels; ++i) add_panel(cfg.graded_top + i * h, cfg.graded_top + (i + 1) * h);

  // Final panel [c, 1] with the (1 - t)^a endpoint behaviour built in.
  const double c = 1.0 - h;
  const Rule1D gj = gauss_jacobi(cfg.panel_nodes, a, 0.0);
  const double scale = std::pow(0.5 * h, a + 1.0);
  for (Eigen::Index i = 0; i < gj.nodes.size(); ++i) {
    const double t = map_node(gj.nodes[i], c, 1.0);
    nodes.push_back(t);
    weights.push_back(scale * gj.weights[i] * std::pow(1.0 + t, a) * kernel(t));
  }

  Rule1D r;
  r.nodes = Eigen::Map<const Vector>(nodes.data(), static_cast<Eigen::Index>(nodes.size()));
  r.weights = Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return r;
}

double zonal_reduce(const Vector& xi, const ZonalKernel& kernel, const std::function<double(const Vector&)>& g,
                    const TRuleConfig& t_config, const InnerRule& inner) {
  const int n = static_cast<int>(xi.size());
  const InnerNodes in = inner_nodes(xi, inner);
  const Rule1D tr = build_t_rule(n, kernel, t_config);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < tr.nodes.size(); ++i) {
    const double t = tr.nodes[i];
    const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
    double acc = 0.0;
    for (Eigen::Index j = 0; j < in.points.cols(); ++j) {
      const Vector p = s * in.points.col(j);
      acc += in.weights[j] * (g(t * xi + p) + g(-t * xi + p));
    }
    sum += tr.weights[i] * acc;
  }
  return sum;
}

Vector zonal_reduce(const Vector& xi, std::span<const ZonalKernel> kernels, std::span<const QFExpression* const> fs,
                    const TRuleConfig& t_config, const InnerRule& inner) {
  if (kernels.size() != fs.size()) throw std::invalid_argument("zonal_reduce: one kernel per expression");
  const int n = static_cast<int>(xi.size());
  const InnerNodes in = inner_nodes(xi, inner);
  const CompiledExpressions compiled(fs);

  std::vector<Rule1D> rules;
  std::map<double, Eigen::Index> node_index;
  for (const ZonalKernel& k : kernels) {
    rules.push_back(build_t_rule(n, k, t_config));
    for (double t : rules.back().nodes) node_index.emplace(t, 0);
  }
  Eigen::Index next = 0;
  for (auto& [t, idx] : node_index) idx = next++;

  // Inner integrals of every expression at every distinct t-node.
  Matrix profile(static_cast<Eigen::Index>(fs.size()), next);
  Matrix pts(n, in.points.cols());
  for (const auto& [t, idx] : node_index) {
    const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
    pts = s * in.points;
    pts.colwise() += t * xi;
    profile.col(idx) = compiled.evaluate(pts) * in.weights;
  }

  Vector out(static_cast<Eigen::Index>(fs.size()));
  for (std::size_t e = 0; e < fs.size(); ++e) {
    double sum = 0.0;
    const Rule1D& r = rules[e];
    for (Eigen::Index i = 0; i < r.nodes.size(); ++i)
      sum += r.weights[i] * profile(static_cast<Eigen::Index>(e), node_index.at(r.nodes[i]));
    out[static_cast<Eigen::Index>(e)] = 2.0 * sum;  // even integrands: t and -t agree
  }
  return out;
}

}  // namespace kib

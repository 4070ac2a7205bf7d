#include "kib/lab.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "kib/certify.hpp"

#ifndef KIB_VERSION
#define KIB_VERSION "0.0.0"
#endif

namespace kib {

namespace {

using ojson = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string normalise_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

template <class T>
T parse_number(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(field, "cannot parse '" + text + "' as a number");
  return value;
}

std::vector<double> parse_list(const std::string& field, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(field, item));
  if (out.empty()) throw ConfigError(field, "empty list");
  return out;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

ojson vec_json(const Vector& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(x);
  return a;
}

ojson vec_json(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(x);
  return a;
}

ojson cert_json(const CertReport& r) {
  return ojson{{"body", r.body_id},
               {"dims", r.dims},
               {"k", r.k},
               {"grid", r.grid},
               {"grid_resolution", r.grid_resolution},
               {"grid_size", r.grid_size},
               {"min_value", r.min_value},
               {"argmin_direction", vec_json(r.argmin_direction)},
               {"argmin_ambient", vec_json(r.argmin_ambient)},
               {"verdict", to_string(r.verdict)},
               {"est_error", r.est_error},
               {"method", to_string(r.method)},
               {"branch_k", r.branch_k},
               {"values", vec_json(r.values)}};
}

ojson convexity_json(const ConvexityReport& r) {
  return ojson{{"verdict", to_string(r.verdict)}, {"min_value", r.min_value}, {"planes", r.planes},
               {"angles", r.angles},          {"worst_u", vec_json(r.worst_u)}, {"worst_v", vec_json(r.worst_v)},
               {"worst_angle", r.worst_angle}};
}

ojson trial_json(const HierarchyTrial& t) {
  return ojson{{"eps", t.eps},
               {"positive_min", t.positive_min},
               {"positive_error", t.positive_error},
               {"positive", to_string(t.positive)},
               {"witness_value", t.witness_value},
               {"witness_error", t.witness_error},
               {"witness", to_string(t.witness)},
               {"passed", t.passed}};
}

CertConfig cert_config(const ExperimentConfig& c) {
  CertConfig cc;
  cc.ft.inner_resolution = c.inner_resolution;
  cc.ft.outer_resolution = c.outer_resolution;
  cc.grid_resolution = c.grid_resolution;
  return cc;
}

Check make_check(std::string name, bool passed, double value, double threshold, std::string detail = "") {
  return Check{std::move(name), passed, value, threshold, std::move(detail)};
}

Check verdict_check(const std::string& name, const CertReport& r, Verdict want) {
  const bool ok = r.verdict == want;
  std::string detail = to_string(r.verdict);
  if (r.verdict == Verdict::inconclusive) detail += ": |min| within the error bar, increase the resolution";
  return make_check(name, ok, r.min_value, want == Verdict::positive_certified ? r.est_error : -r.est_error, detail);
}

Vector ellipsoid_axes(int n, double eps) {
  Vector a = Vector::Ones(n);
  a[n - 1] = eps;
  return a;
}

// ---------------------------------------------------------------- experiments

void run_thm_sections(const ExperimentConfig& c, RunReport& rep) {
  const CertConfig cc = cert_config(c);
  const StarBody body = make_sec2_body(c.n, c.m, c.k, c.eps[0]);
  const ConvexityReport conv = convexity_check(body);
  rep.checks.push_back(make_check("body convex (sampled planes)",
                                  conv.verdict == ConvexityVerdict::convex_certified_numerically, conv.min_value, 0.0,
                                  to_string(conv.verdict)));
  const SectionScan scan = scan_section_class(body, c.k, c.m, c.subspaces, c.seed, cc);
  ojson sections = ojson::array();
  Series minima{"section_index", "min_value", {}, {}};
  for (std::size_t i = 0; i < scan.sections.size(); ++i) {
    const SectionCert& s = scan.sections[i];
    rep.checks.push_back(verdict_check("section " + s.label + " positive", s.report, Verdict::positive_certified));
    ojson j = cert_json(s.report);
    j["label"] = s.label;
    sections.push_back(std::move(j));
    minima.x.push_back(static_cast<double>(i));
    minima.y.push_back(s.report.min_value);
  }
  rep.series["section_minima"] = minima;
  rep.results["body"] = body.id();
  rep.results["convexity"] = convexity_json(conv);
  rep.results["member_sampled"] = scan.member_sampled;
  rep.results["sections"] = std::move(sections);
  if (scan.witness) {
    const CertReport& w = scan.witness->report;
    rep.checks.push_back(verdict_check("witness " + scan.witness->label + " negative", w, Verdict::negative_witness));
    // (||x||^{-k})^ at e_{m+1} on span(e_1..e_{m+1}) is exactly -C_{m+1,k}
    const double exact = -constant_cnk(c.m + 1, c.k);
    std::vector<int> axes(static_cast<std::size_t>(c.m + 1));
    std::iota(axes.begin(), axes.end(), 0);
    const StarBody witness_body = section(body, coordinate_subspace(c.n, axes));
    const Vector e = Vector::Unit(c.m + 1, c.m);
    const double at = ft_lemma_case(HomogeneousFn(witness_body.norm_power(Rational(-c.k))), e, cc.ft);
    const double rel = std::abs(at - exact) / std::abs(exact);
    rep.checks.push_back(make_check("witness value -C_{m+1,k} at e_{m+1}", rel <= 1e-3, rel, 1e-3,
                                    "value " + fmt(at) + " vs " + fmt(exact)));
    ojson j = cert_json(w);
    j["label"] = scan.witness->label;
    j["value_at_last_axis"] = at;
    j["exact"] = exact;
    rep.results["witness"] = std::move(j);
    rep.series["witness_scan"] = Series{"direction_index", "ft_value", {}, {}};
    for (Eigen::Index i = 0; i < w.values.size(); ++i) {
      rep.series["witness_scan"].x.push_back(static_cast<double>(i));
      rep.series["witness_scan"].y.push_back(w.values[i]);
    }
  }
}

void run_thm_hierarchy(const ExperimentConfig& c, RunReport& rep) {
  HierarchyConfig hc;
  hc.cert = cert_config(c);
  if (!c.eps.empty()) hc.eps = c.eps[0];
  const HierarchyReport h = hierarchy_experiment(c.n, c.k, c.l, hc);
  rep.checks.push_back(make_check("admissible eps found", h.found, h.eps, h.eps_max,
                                  h.found ? "" : "no eps in the window passed both checks"));
  ojson trials = ojson::array(), margins = ojson::array();
  for (const auto& t : h.trials) trials.push_back(trial_json(t));
  for (const auto& t : h.margins) margins.push_back(trial_json(t));
  rep.results["eps_max"] = h.eps_max;
  rep.results["eps"] = h.eps;
  rep.results["trials"] = std::move(trials);
  rep.results["margins"] = std::move(margins);
  rep.results["order_l"] = h.order_l;
  rep.results["order_k"] = h.order_k;
  rep.results["truncation_l"] = h.truncation_l;
  rep.results["truncation_k"] = h.truncation_k;
  if (!h.positive) return;
  const StarBody body = make_sec3_body(c.n, c.k, h.eps, hc.guard);
  const ConvexityReport conv = convexity_check(body);
  rep.checks.push_back(make_check("body convex (sampled planes)",
                                  conv.verdict == ConvexityVerdict::convex_certified_numerically, conv.min_value, 0.0,
                                  to_string(conv.verdict)));
  rep.checks.push_back(verdict_check("in I_l: (||x||^{-l})^ positive on the grid", *h.positive,
                                     Verdict::positive_certified));
  rep.checks.push_back(make_check("not in I_k: (||x||^{-k})^(e_n) negative", h.witness == Verdict::negative_witness,
                                  h.witness_value, -h.witness_error, to_string(h.witness)));
  const double dev = std::abs(h.correction_slope + 0.5);
  rep.checks.push_back(make_check("correction slope -1/2 +- 0.1", dev <= 0.1, h.correction_slope, -0.5));
  rep.results["body"] = body.id();
  rep.results["convexity"] = convexity_json(conv);
  rep.results["positive"] = cert_json(*h.positive);
  rep.results["witness"] = ojson{{"value", h.witness_value}, {"est_error", h.witness_error}, {"verdict", to_string(h.witness)}};
  rep.results["correction_eps"] = vec_json(h.correction_eps);
  rep.results["correction_values"] = vec_json(h.correction_values);
  rep.results["correction_slope"] = h.correction_slope;
  rep.results["correction_residual"] = h.correction_residual;
  rep.results["conclusive"] = h.conclusive;
  Series corr{"log_eps", "log_abs_value", {}, {}};
  for (std::size_t i = 0; i < h.correction_eps.size(); ++i) {
    corr.x.push_back(std::log(h.correction_eps[i]));
    corr.y.push_back(std::log(std::abs(h.correction_values[i])));
  }
  rep.series["correction"] = corr;
  Series scan{"direction_index", "ft_value", {}, {}};
  for (Eigen::Index i = 0; i < h.positive->values.size(); ++i) {
    scan.x.push_back(static_cast<double>(i));
    scan.y.push_back(h.positive->values[i]);
  }
  rep.series["scan"] = scan;
  std::vector<HierarchyTrial> all = h.trials;
  all.insert(all.end(), h.margins.begin(), h.margins.end());
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.eps < b.eps; });
  Series marg{"eps", "positive_min", {}, {}};
  for (const auto& t : all) {
    marg.x.push_back(t.eps);
    marg.y.push_back(t.positive_min);
  }
  rep.series["margins"] = marg;
}

void run_slopes(const ExperimentConfig& c, RunReport& rep) {
  const SlopeReport s = slope_experiment(c.p, c.q, c.n, c.eps, cert_config(c), 100, c.seed);
  const bool even = (c.n - c.p - c.q - 1) % 2 == 0;
  const double tol = even ? 0.05 : 0.1;
  rep.checks.push_back(make_check("slope within " + fmt(tol) + " of -n+p+q+1",
                                  std::abs(s.slope - s.expected_slope) <= tol, s.slope, s.expected_slope));
  if (even) {
    rep.checks.push_back(make_check("fit residual < 0.05", s.residual < 0.05, s.residual, 0.05));
    rep.checks.push_back(make_check("uniform bound over 100 random directions", s.uniform_ratio <= 1.0 + 1e-6,
                                    s.uniform_ratio, 1.0 + 1e-6, "max |value| eps^{n-p-q-1} / C"));
  }
  rep.results["expected_slope"] = s.expected_slope;
  rep.results["slope"] = s.slope;
  rep.results["intercept"] = s.intercept;
  rep.results["residual"] = s.residual;
  rep.results["method"] = to_string(s.method);
  rep.results["branch_k"] = s.branch_k;
  rep.results["eps"] = vec_json(s.eps);
  rep.results["values"] = vec_json(s.values);
  rep.results["est_errors"] = vec_json(s.est_errors);
  if (s.uniform_checked)
    rep.results["uniform"] = ojson{{"directions", s.uniform_directions}, {"constant", s.uniform_constant}, {"ratio", s.uniform_ratio}};
  if (c.alpha) {
    const double lower = -c.n + c.p + c.q + 1.0 / (1.0 + *c.alpha), upper = s.expected_slope;
    const bool inside = s.slope >= lower - tol && s.slope <= upper + tol;
    rep.checks.push_back(make_check("slope inside the alpha window (+- " + fmt(tol) + ")", inside, s.slope, lower,
                                    "window [" + fmt(lower) + ", " + fmt(upper) + "]"));
    rep.results["alpha_window"] = ojson{{"alpha", *c.alpha}, {"lower", lower}, {"upper", upper}};
  }
  Series ser{"log_eps", "log_abs_value", {}, {}};
  for (std::size_t i = 0; i < s.eps.size(); ++i) {
    ser.x.push_back(std::log(s.eps[i]));
    ser.y.push_back(std::log(std::abs(s.values[i])));
  }
  rep.series["slope"] = ser;
}

void run_parseval(const ExperimentConfig& c, RunReport& rep) {
  const int n = c.n;
  const StarBody ball = StarBody::ball(n);
  const StarBody ell = StarBody::ellipsoid(ellipsoid_axes(n, c.eps[0]));
  const StarBody sec2 = make_sec2_body(n, c.m, c.k, c.eps[0]);
  const std::vector<std::pair<const StarBody*, const StarBody*>> pairs{{&ball, &ball}, {&ball, &ell}, {&sec2, &ball}};
  FtConfig ft = cert_config(c).ft;
  ojson items = ojson::array();
  Series ser{"pair_index", "rel_gap", {}, {}};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const StarBody& kb = *pairs[i].first;
    const StarBody& lb = *pairs[i].second;
    // (||x||_K^{-k})^ against (||x||_L^{-n+k})^
    const HomogeneousFn kf(kb.norm_power(Rational(-c.k)));
    const HomogeneousFn lf(lb.norm_power(Rational(-(n - c.k))));
    const ParsevalResult coarse = parseval_check(kf, lf, ft);
    const ParsevalResult fine = parseval_check(kf, lf, ft.refined());
    const std::string label = kb.id() + " / " + lb.id();
    rep.checks.push_back(make_check("gap < 1e-3: " + label, coarse.rel_gap < 1e-3, coarse.rel_gap, 1e-3));
    // both gaps at the rounding floor count as converged
    const bool decreasing = fine.rel_gap < coarse.rel_gap || std::max(fine.rel_gap, coarse.rel_gap) < 1e-14;
    rep.checks.push_back(make_check("gap decreasing under doubling: " + label, decreasing, fine.rel_gap,
                                    coarse.rel_gap));
    items.push_back(ojson{{"k_body", kb.id()},
                          {"l_body", lb.id()},
                          {"lhs", coarse.lhs},
                          {"rhs", coarse.rhs},
                          {"rel_gap", coarse.rel_gap},
                          {"rel_gap_refined", fine.rel_gap}});
    ser.x.push_back(static_cast<double>(i));
    ser.y.push_back(coarse.rel_gap);
  }
  rep.results["pairs"] = std::move(items);
  rep.series["parseval"] = ser;
}

StarBody certify_body(const ExperimentConfig& c) {
  if (c.body == "ball") return StarBody::ball(c.n);
  if (c.body == "ellipsoid") return StarBody::ellipsoid(ellipsoid_axes(c.n, c.eps[0]));
  if (c.body == "sec2") return make_sec2_body(c.n, c.m, c.k, c.eps[0]);
  return make_sec3_body(c.n, c.k, c.eps[0]);
}

void run_certify(const ExperimentConfig& c, RunReport& rep) {
  const StarBody body = certify_body(c);
  const CertReport r = certify_k_intersection(body, c.k, cert_config(c));
  rep.checks.push_back(make_check("verdict conclusive", r.verdict != Verdict::inconclusive, r.min_value, r.est_error,
                                  to_string(r.verdict)));
  if (!c.expect.empty()) {
    const Verdict want = c.expect == "positive" ? Verdict::positive_certified : Verdict::negative_witness;
    rep.checks.push_back(verdict_check("verdict " + c.expect, r, want));
  }
  rep.results["certificate"] = cert_json(r);
  Series ser{"direction_index", "ft_value", {}, {}};
  for (Eigen::Index i = 0; i < r.values.size(); ++i) {
    ser.x.push_back(static_cast<double>(i));
    ser.y.push_back(r.values[i]);
  }
  rep.series["scan"] = ser;
}

void run_ft_oracle(const ExperimentConfig& c, RunReport& rep) {
  const int n = c.n;
  const FtConfig ft = cert_config(c).ft;
  Series ser{"evaluation_index", "rel_error", {}, {}};
  ojson items = ojson::array();
  // Euclidean powers on every admissible branch
  std::map<std::string, double> worst;
  for (int j = 1; j < 2 * n; ++j) {
    const Rational p(j, 2);
    const HomogeneousFn fn(QFExpression::power(DiagQuadForm::euclidean(n), -p / Rational(2)));
    std::vector<FtBranch> branches{default_branch(fn)};
    const Rational q = fn.q();
    if (!(q.is_integer() && q.num() % 2 != 0)) branches.push_back(case_i_branch(fn));
    const double want = constant_cnk(n, p.to_double());
    for (const FtBranch& b : branches) {
      const Vector xi = random_subspace(n, 1, c.seed + static_cast<std::uint64_t>(j)).basis.col(0);
      const double got = ft_lemma_case(fn, xi, ft, b);
      const double rel = std::abs(got - want) / want;
      const std::string key = to_string(b.method);
      worst[key] = std::max(worst[key], rel);
      items.push_back(ojson{{"kind", "euclidean"}, {"p", p.str()}, {"branch", key}, {"k", b.k}, {"value", got},
                            {"exact", want}, {"rel_error", rel}});
      ser.x.push_back(static_cast<double>(ser.x.size()));
      ser.y.push_back(rel);
    }
  }
  for (const auto& [branch, rel] : worst)
    rep.checks.push_back(make_check("Euclidean powers, " + branch + ": rel error <= 1e-5", rel <= 1e-5, rel, 1e-5));
  // ellipsoids against the linear-image rule
  for (double eps : c.eps) {
    const Vector axes = ellipsoid_axes(n, eps);
    const StarBody e = StarBody::ellipsoid(axes);
    double w = 0.0;
    for (int j = 1; j < n; ++j) {
      const HomogeneousFn fn(e.norm_power(Rational(-j)));
      Matrix dirs(n, c.directions);
      for (int i = 0; i < c.directions; ++i)
        dirs.col(i) = random_subspace(n, 1, c.seed * 1000 + static_cast<std::uint64_t>(100 * j + i)).basis.col(0);
      const FourierResult r = ft_lemma_case(fn, dirs, ft, std::nullopt, false);
      for (int i = 0; i < c.directions; ++i) {
        const double want = ft_linear_image(n, j, axes.cwiseInverse(), dirs.col(i));
        const double rel = std::abs(r.values[i] - want) / std::abs(want);
        w = std::max(w, rel);
        ser.x.push_back(static_cast<double>(ser.x.size()));
        ser.y.push_back(rel);
      }
      items.push_back(ojson{{"kind", "ellipsoid"}, {"eps", eps}, {"p", j}, {"branch", to_string(r.method)},
                            {"k", r.k}, {"max_rel_error", w}});
    }
    rep.checks.push_back(make_check("ellipsoid eps=" + fmt(eps) + ": rel error <= 1e-5 at " +
                                        std::to_string(c.directions) + " directions",
                                    w <= 1e-5, w, 1e-5));
  }
  rep.results["evaluations"] = std::move(items);
  rep.series["ft_oracle"] = ser;
}

void run_log_constant(const ExperimentConfig& c, RunReport& rep) {
  ojson items = ojson::array();
  Series ser{"index", "t_form", {}, {}};
  for (int k = 1; k <= c.k_max; ++k) {
    for (int p = 1; p <= c.p_max; ++p) {
      const std::string tag = "(k,p)=(" + std::to_string(k) + "," + std::to_string(p) + ")";
      try {
        const LogConstantReport r = log_integral_constant(p, k);
        rep.checks.push_back(make_check("z-form = t-form " + tag, r.rel_gap <= 1e-6, r.rel_gap, 1e-6));
        rep.checks.push_back(make_check("nonzero beyond 10x error " + tag, true, std::abs(r.t_form),
                                        10 * (r.z_error + r.t_error)));
        if (k == 1 && p == 1)
          rep.checks.push_back(make_check("t-form = 1 at (1,1)", std::abs(r.t_form - 1.0) <= 1e-12, r.t_form, 1.0));
        items.push_back(ojson{{"k", k},
                              {"p", p},
                              {"z_form", r.z_form},
                              {"z_error", r.z_error},
                              {"z_log_form", r.z_log_form},
                              {"z_log_error", r.z_log_error},
                              {"t_form", r.t_form},
                              {"t_error", r.t_error},
                              {"rel_gap", r.rel_gap}});
        ser.x.push_back(static_cast<double>(ser.x.size()));
        ser.y.push_back(r.t_form);
      } catch (const std::runtime_error& e) {
        rep.checks.push_back(make_check("nonzero beyond 10x error " + tag, false, 0.0, 0.0, e.what()));
      }
    }
  }
  rep.results["constants"] = std::move(items);
  rep.series["log_constant"] = ser;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void flatten(const ojson& j, const std::string& path, std::ostream& os) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) flatten(value, path + "/" + key, os);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "/" + std::to_string(i), os);
  } else if (j.is_number_float()) {
    os << "result," << csv_field(path) << ",," << num(j.get<double>()) << ",,\n";
  } else if (j.is_string()) {
    os << "result," << csv_field(path) << ",,,," << csv_field(j.get<std::string>()) << "\n";
  } else {
    os << "result," << csv_field(path) << ",," << j.dump() << ",,\n";
  }
}

}  // namespace

std::string toolkit_version() { return KIB_VERSION; }

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"thm-sections", "thm-hierarchy", "slopes",      "parseval",
                                              "certify",      "ft-oracle",     "log-constant"};
  return names;
}

std::string to_string(Experiment e) { return experiment_names()[static_cast<std::size_t>(e)]; }

Experiment parse_experiment(const std::string& name) {
  const auto& names = experiment_names();
  const std::string want = trim(name);
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::string alt = names[i];
    std::replace(alt.begin(), alt.end(), '-', '_');
    if (want == names[i] || want == alt) return static_cast<Experiment>(i);
  }
  throw ConfigError("experiment", "unknown experiment '" + name + "'");
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
    const std::string key = normalise_key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, trim(line.substr(eq + 1))).second) throw ConfigError(key, "duplicate key");
  }
  return out;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ExperimentConfig apply_config(ExperimentConfig c, const ConfigMap& values) {
  for (const auto& [raw_key, value] : values) {
    const std::string key = normalise_key(raw_key);
    auto as_int = [&] { return parse_number<int>(key, value); };
    if (key == "experiment") c.experiment = parse_experiment(value);
    else if (key == "n") c.n = as_int();
    else if (key == "m") c.m = as_int();
    else if (key == "k") c.k = as_int();
    else if (key == "l") c.l = as_int();
    else if (key == "p") c.p = as_int();
    else if (key == "q") c.q = as_int();
    else if (key == "eps") c.eps = parse_list(key, value);
    else if (key == "alpha") c.alpha = parse_number<double>(key, value);
    else if (key == "body") c.body = trim(value);
    else if (key == "expect") c.expect = trim(value);
    else if (key == "inner_resolution") c.inner_resolution = as_int();
    else if (key == "outer_resolution") c.outer_resolution = as_int();
    else if (key == "grid_resolution") c.grid_resolution = as_int();
    else if (key == "subspaces") c.subspaces = as_int();
    else if (key == "directions") c.directions = as_int();
    else if (key == "k_max") c.k_max = as_int();
    else if (key == "p_max") c.p_max = as_int();
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "threads") c.threads = as_int();
    else if (key == "out") c.out = trim(value);
    else if (key == "format") {
      const std::string f = trim(value);
      if (f == "json") c.format = OutputFormat::json;
      else if (f == "csv") c.format = OutputFormat::csv;
      else throw ConfigError(key, "expected json or csv, got '" + f + "'");
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  return c;
}

ExperimentConfig resolve(const ExperimentConfig& in) {
  ExperimentConfig c = in;
  auto dflt = [](int& v, int d) {
    if (v == 0) v = d;
  };
  auto need = [](bool ok, const std::string& field, const std::string& msg) {
    if (!ok) throw ConfigError(field, msg);
  };
  const std::string got = " (got n=" + std::to_string(in.n) + ", m=" + std::to_string(in.m) +
                          ", k=" + std::to_string(in.k) + ", l=" + std::to_string(in.l) +
                          ", p=" + std::to_string(in.p) + ", q=" + std::to_string(in.q) + "; 0 = default)";
  need(c.inner_resolution >= 2, "inner_resolution", "must be >= 2");
  need(c.outer_resolution >= 2, "outer_resolution", "must be >= 2");
  need(c.grid_resolution >= 1, "grid_resolution", "must be >= 1");
  need(c.subspaces >= 0, "subspaces", "must be >= 0");
  need(c.threads >= 0, "threads", "must be >= 0");
  auto single_eps = [&](double d, double lo, double hi, const std::string& range) {
    if (c.eps.empty()) c.eps = {d};
    need(c.eps.size() == 1, "eps", "expects a single value");
    need(c.eps[0] > lo && c.eps[0] < hi, "eps", "must lie in " + range);
  };

  switch (c.experiment) {
    case Experiment::thm_sections:
      dflt(c.n, 5);
      dflt(c.m, c.n - 1);
      dflt(c.k, 1);
      need(c.k >= 1 && c.k + 3 <= c.m && c.m < c.n, "m", "thm-sections requires 1 <= k and k + 3 <= m < n" + got);
      single_eps(0.25, 0.0, 0.5, "(0, 1/2)");
      break;
    case Experiment::thm_hierarchy:
      dflt(c.n, 6);
      dflt(c.k, 1);
      dflt(c.l, c.k + 1);
      need(1 <= c.k && c.k < c.l && c.l < c.n - 3, "l", "thm-hierarchy requires 1 <= k < l < n - 3" + got);
      need(c.eps.size() <= 1, "eps", "expects a single value or none (automated search)");
      if (!c.eps.empty()) need(c.eps[0] > 0.0 && c.eps[0] < 1.0, "eps", "must lie in (0, 1)");
      break;
    case Experiment::slopes:
      dflt(c.n, 5);
      dflt(c.p, 1);
      dflt(c.q, 1);
      need(c.p >= 1 && c.q >= 1 && c.p + c.q <= c.n - 2, "q", "slopes requires p, q >= 1 and p + q <= n - 2" + got);
      if (c.eps.empty()) c.eps = {0.1, 0.05, 0.025, 0.0125};
      need(c.eps.size() >= 3, "eps", "slopes needs at least 3 values");
      for (std::size_t i = 0; i < c.eps.size(); ++i) {
        need(c.eps[i] > 0.0 && c.eps[i] <= 0.25, "eps", "values must lie in (0, 1/4]");
        need(i == 0 || c.eps[i] < c.eps[i - 1], "eps", "list must be strictly decreasing");
      }
      if (c.alpha) need(*c.alpha > 0.0, "alpha", "must be positive");
      break;
    case Experiment::parseval:
      dflt(c.n, 5);
      dflt(c.m, c.n - 1);
      dflt(c.k, 1);
      need(c.k >= 1 && c.k + 3 <= c.m && c.m < c.n, "m", "parseval uses a sec2 body: requires k + 3 <= m < n" + got);
      single_eps(0.25, 0.0, 0.5, "(0, 1/2)");
      break;
    case Experiment::certify:
      need(c.body == "ball" || c.body == "ellipsoid" || c.body == "sec2" || c.body == "sec3", "body",
           "expected ball, ellipsoid, sec2 or sec3, got '" + c.body + "'");
      need(c.expect.empty() || c.expect == "positive" || c.expect == "negative", "expect",
           "expected positive or negative, got '" + c.expect + "'");
      dflt(c.n, c.body == "sec3" ? 6 : 5);
      dflt(c.k, 1);
      need(c.k >= 1 && c.k < c.n, "k", "certify requires 0 < k < n" + got);
      if (c.body == "sec2") {
        dflt(c.m, c.n - 1);
        need(c.k + 3 <= c.m && c.m < c.n, "m", "sec2 requires k + 3 <= m < n" + got);
        single_eps(0.25, 0.0, 0.5, "(0, 1/2)");
      } else if (c.body == "sec3") {
        need(c.k < c.n - 3, "k", "sec3 requires 1 <= k < n - 3" + got);
        single_eps(0.1, 0.0, 1.0, "(0, 1)");
        need(std::pow(c.eps[0], c.n - c.k - 3.5) <= 0.1, "eps", "sec3 requires eps^{n-k-7/2} <= 0.1");
      } else if (c.body == "ellipsoid") {
        single_eps(0.5, 0.0, 1e300, "(0, inf)");
      }
      break;
    case Experiment::ft_oracle:
      dflt(c.n, 5);
      need(c.n >= 3, "n", "ft-oracle requires n >= 3");
      if (c.eps.empty()) c.eps = {0.5, 0.25};
      for (double e : c.eps) need(e > 0.0, "eps", "values must be positive");
      need(c.directions >= 1, "directions", "must be >= 1");
      break;
    case Experiment::log_constant:
      need(c.k_max >= 1 && c.k_max <= 10, "k_max", "must lie in [1, 10]");
      need(c.p_max >= 1 && c.p_max <= 20, "p_max", "must lie in [1, 20]");
      break;
  }
  return c;
}

ojson config_to_json(const ExperimentConfig& c) {
  ojson j{{"experiment", to_string(c.experiment)},
          {"n", c.n},
          {"m", c.m},
          {"k", c.k},
          {"l", c.l},
          {"p", c.p},
          {"q", c.q},
          {"eps", vec_json(c.eps)}};
  j["alpha"] = c.alpha ? ojson(*c.alpha) : ojson(nullptr);
  j["body"] = c.body;
  j["expect"] = c.expect;
  j["inner_resolution"] = c.inner_resolution;
  j["outer_resolution"] = c.outer_resolution;
  j["grid_resolution"] = c.grid_resolution;
  j["subspaces"] = c.subspaces;
  j["directions"] = c.directions;
  j["k_max"] = c.k_max;
  j["p_max"] = c.p_max;
  j["seed"] = c.seed;
  j["format"] = c.format == OutputFormat::json ? "json" : "csv";
  return j;
}

bool RunReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::vector<std::string> RunReport::failures() const {
  std::vector<std::string> out;
  for (const Check& c : checks)
    if (!c.passed) out.push_back(c.name + (c.detail.empty() ? "" : ": " + c.detail));
  return out;
}

RunReport run(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunReport rep;
  rep.config = resolve(config);
  rep.version = toolkit_version();
  if (rep.config.threads > 0) setenv("LAB_THREADS", std::to_string(rep.config.threads).c_str(), 1);
  const ExperimentConfig& c = rep.config;
  try {
    switch (c.experiment) {
      case Experiment::thm_sections:
        run_thm_sections(c, rep);
        break;
      case Experiment::thm_hierarchy:
        run_thm_hierarchy(c, rep);
        break;
      case Experiment::slopes:
        run_slopes(c, rep);
        break;
      case Experiment::parseval:
        run_parseval(c, rep);
        break;
      case Experiment::certify:
        run_certify(c, rep);
        break;
      case Experiment::ft_oracle:
        run_ft_oracle(c, rep);
        break;
      case Experiment::log_constant:
        run_log_constant(c, rep);
        break;
    }
  } catch (const std::exception& e) {
    rep.checks.push_back(make_check("experiment completed", false, 0.0, 0.0, e.what()));
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

ojson report_to_json(const RunReport& r) {
  ojson checks = ojson::array();
  for (const Check& c : r.checks)
    checks.push_back(ojson{{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold},
                           {"detail", c.detail}});
  ojson j{{"schema_version", kReportSchemaVersion},
          {"version", r.version},
          {"experiment", to_string(r.config.experiment)},
          {"config", config_to_json(r.config)},
          {"passed", r.passed()},
          {"failures", r.failures()},
          {"checks", std::move(checks)},
          {"results", r.results}};
  j["wall_time_s"] = r.wall_seconds;
  return j;
}

void write_report(const RunReport& r, std::ostream& os, OutputFormat format) {
  if (format == OutputFormat::json) {
    os << report_to_json(r).dump(2) << "\n";
    return;
  }
  os << "# schema_version=" << kReportSchemaVersion << "\n";
  os << "# version=" << r.version << "\n";
  os << "# experiment=" << to_string(r.config.experiment) << "\n";
  os << "# config=" << config_to_json(r.config).dump() << "\n";
  os << "# passed=" << (r.passed() ? "true" : "false") << "\n";
  os << "# wall_time_s=" << num(r.wall_seconds) << "\n";
  os << "kind,name,passed,value,threshold,detail\n";
  for (const Check& c : r.checks)
    os << "check," << csv_field(c.name) << "," << (c.passed ? "true" : "false") << "," << num(c.value) << ","
       << num(c.threshold) << "," << csv_field(c.detail) << "\n";
  flatten(r.results, "", os);
}

void write_report(const RunReport& r) {
  if (r.config.out.empty()) return;
  std::ofstream os(r.config.out);
  if (!os) throw std::runtime_error("cannot write report to '" + r.config.out + "'");
  write_report(r, os, r.config.format);
}

void emit_plot_data(const RunReport& r, const std::string& quantity, std::ostream& os) {
  const auto it = r.series.find(quantity);
  if (it == r.series.end() && !r.series.empty()) {
    std::string have;
    for (const auto& [name, s] : r.series) have += (have.empty() ? "" : ", ") + name;
    throw std::invalid_argument("emit_plot_data: report has no quantity '" + quantity + "' (available: " + have + ")");
  }
  os << "# quantity=" << quantity << "\n";
  os << "# experiment=" << to_string(r.config.experiment) << "\n";
  os << "# schema_version=" << kReportSchemaVersion << "\n";
  os << "# version=" << r.version << "\n";
  if (it == r.series.end()) {
    os << "x,y\n";
    return;
  }
  const Series& s = it->second;
  os << s.x_label << "," << s.y_label << "\n";
  for (std::size_t i = 0; i < s.x.size(); ++i) os << num(s.x[i]) << "," << num(s.y[i]) << "\n";
}

}  // namespace kib

#pragma once

// Experiment runner behind the `lab` CLI: flat key = value configuration,
// dispatch to the certification and asymptotics experiments, and versioned
// JSON / CSV reports.
//
// Config grammar: one `key = value` per line; `#` starts a comment; blank
// lines are ignored; lists are comma-separated.  Keys are the field names of
// ExperimentConfig (with `-` or `_`).

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace kib {

inline constexpr int kReportSchemaVersion = 1;

/// Toolkit version string embedded in reports.
std::string toolkit_version();

enum class Experiment { thm_sections, thm_hierarchy, slopes, parseval, certify, ft_oracle, log_constant };
enum class OutputFormat { json, csv };

std::string to_string(Experiment e);
/// Throws ConfigError for unknown names.
Experiment parse_experiment(const std::string& name);
const std::vector<std::string>& experiment_names();

/// Parse or validation failure; `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : "config field '" + field + "': " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::thm_sections;
  // Dimensional parameters; 0 selects the experiment default.
  int n = 0, m = 0, k = 0, l = 0;
  int p = 0, q = 0;
  /// A single eps or an eps list, by experiment; empty selects the default
  /// (for thm-hierarchy: the automated search).
  std::vector<double> eps;
  /// Optional Hoelder parameter for slopes: reports the window
  /// [-n+p+q+1/(1+alpha), -n+p+q+1].
  std::optional<double> alpha;
  /// Body for certify: ball, ellipsoid, sec2, sec3.
  std::string body = "sec2";
  /// certify: expected verdict (positive / negative), checked when set.
  std::string expect;
  int inner_resolution = 64;
  int outer_resolution = 32;
  int grid_resolution = 16;
  int subspaces = 50;
  int directions = 20;  // ft-oracle
  int k_max = 3, p_max = 3;  // log-constant
  std::uint64_t seed = 7;
  int threads = 0;  // 0: LAB_THREADS or 1
  std::string out;
  OutputFormat format = OutputFormat::json;
};

using ConfigMap = std::map<std::string, std::string>;

/// Parses the flat key = value text.  Throws ConfigError on malformed lines
/// or duplicate keys.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

/// Applies `values` on top of `base`.  Throws ConfigError for unknown keys or
/// unparsable values.
ExperimentConfig apply_config(ExperimentConfig base, const ConfigMap& values);

/// Fills experiment defaults and checks the parameter constraints before any
/// compute (k + 3 <= m < n for thm-sections, 1 <= k < l < n - 3 for
/// thm-hierarchy, p + q <= n - 2 for slopes).  Throws ConfigError.
ExperimentConfig resolve(const ExperimentConfig& config);

/// Echo of every field, as serialised into reports.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

/// (x, y) pairs for plotting, in deterministic order.
struct Series {
  std::string x_label, y_label;
  std::vector<double> x, y;
};

struct RunReport {
  ExperimentConfig config;
  std::string version;
  std::vector<Check> checks;
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
  std::map<std::string, Series> series;
  double wall_seconds = 0.0;

  bool passed() const;
  std::vector<std::string> failures() const;
};

/// Validates, runs and times one experiment.  Check failures are recorded in
/// the report, not thrown.
RunReport run(const ExperimentConfig& config);

nlohmann::ordered_json report_to_json(const RunReport& report);
void write_report(const RunReport& report, std::ostream& os, OutputFormat format);
/// Writes to report.config.out (no-op when empty).
void write_report(const RunReport& report);

/// Two-column CSV (x, y) with '#' metadata lines.  A report without any
/// series gives the header only; a missing quantity otherwise throws
/// std::invalid_argument.
void emit_plot_data(const RunReport& report, const std::string& quantity, std::ostream& os);

}  // namespace kib

// lab: command-line front end for the experiment runner.
//
//   lab <experiment> [--config FILE] [--key value ...] [--out PATH] [--format json|csv]
//       [--emit QUANTITY [--emit-out PATH]]
//
// Values from --config take precedence over flags.
// Exit codes: 0 all checks passed, 1 some check failed, 2 configuration error,
// 3 runtime error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "kib/lab.hpp"

namespace {

struct Flag {
  const char* key;
  const char* help;
};

const Flag kFlags[] = {
    {"n", "ambient dimension"},
    {"m", "section dimension (thm-sections, parseval, certify sec2)"},
    {"k", "intersection-body order"},
    {"l", "higher order for thm-hierarchy"},
    {"p", "ellipsoid exponent for slopes"},
    {"q", "Euclidean exponent for slopes"},
    {"eps", "eps value or comma-separated list"},
    {"alpha", "Hoelder parameter for the slopes window"},
    {"body", "certify body: ball, ellipsoid, sec2, sec3"},
    {"expect", "certify: expected verdict, positive or negative"},
    {"inner-resolution", "inner quadrature resolution"},
    {"outer-resolution", "outer quadrature resolution"},
    {"grid-resolution", "certification grid resolution"},
    {"subspaces", "random sections for thm-sections"},
    {"directions", "random directions for ft-oracle"},
    {"k-max", "log-constant: largest k"},
    {"p-max", "log-constant: largest p"},
    {"seed", "RNG seed"},
    {"threads", "worker threads (sets LAB_THREADS)"},
    {"out", "report path (stdout when empty)"},
    {"format", "json or csv"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments on intersection bodies of star bodies", "lab"};
  app.set_version_flag("--version", kib::toolkit_version());
  app.require_subcommand(1, 1);

  std::string config_path, emit, emit_out;
  std::map<std::string, std::string> flag_values;
  for (const std::string& name : kib::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--emit", emit, "write the named series as two-column CSV");
    sub->add_option("--emit-out", emit_out, "path for --emit (default <out>.<quantity>.csv, else stdout)");
    for (const Flag& f : kFlags) sub->add_option(std::string("--") + f.key, flag_values[f.key], f.help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  kib::RunReport report;
  try {
    kib::ExperimentConfig cfg;
    cfg.experiment = kib::parse_experiment(sub->get_name());
    kib::ConfigMap given;
    for (const Flag& f : kFlags)
      if (sub->count(std::string("--") + f.key) > 0) given[f.key] = flag_values[f.key];
    cfg = kib::apply_config(cfg, given);
    if (!config_path.empty()) {
      kib::ConfigMap file = kib::load_config_file(config_path);
      if (auto it = file.find("experiment"); it != file.end()) {
        if (kib::parse_experiment(it->second) != cfg.experiment)
          throw kib::ConfigError("experiment", "config file names '" + it->second + "' but the command is '" +
                                                   sub->get_name() + "'");
        file.erase(it);
      }
      cfg = kib::apply_config(cfg, file);
    }
    cfg = kib::resolve(cfg);
    report = kib::run(cfg);
  } catch (const kib::ConfigError& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 3;
  }

  try {
    if (report.config.out.empty())
      kib::write_report(report, std::cout, report.config.format);
    else
      kib::write_report(report);
    if (!emit.empty()) {
      std::string path = emit_out;
      if (path.empty() && !report.config.out.empty()) path = report.config.out + "." + emit + ".csv";
      if (path.empty()) {
        kib::emit_plot_data(report, emit, std::cout);
      } else {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write '" + path + "'");
        kib::emit_plot_data(report, emit, os);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 3;
  }

  for (const kib::Check& c : report.checks)
    std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
  std::cerr << "lab: " << kib::to_string(report.config.experiment) << " " << (report.passed() ? "passed" : "FAILED")
            << " in " << report.wall_seconds << " s\n";
  return report.passed() ? 0 : 1;
}

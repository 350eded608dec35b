// spectral-screener: run experiments, calibrate constants, audit reports and
// draw scree plots.
//
// Exit codes: 0 success, 1 runtime error, 2 config error, 3 failed check
// (run --assert, audit).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spectral_screener/spectral_screener.hpp"

namespace {

using namespace spectral;
using namespace spectral::harness;

constexpr int kConfigError = 2;
constexpr int kCheckFailed = 3;

struct Overrides {
  std::string config_path;
  std::string experiment;
  std::vector<Index> n_list;
  Index reps = -1;
  std::optional<std::uint64_t> base_seed;
  std::optional<double> alpha;
  std::string out;
  std::optional<unsigned> workers;
  std::string run_id;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Experiment config (JSON)");
  cmd->add_option("--experiment", o.experiment, "Experiment tag, e.g. trace_bound");
  cmd->add_option("--n-list", o.n_list, "Sample sizes")->delimiter(',');
  cmd->add_option("--reps", o.reps, "Trials per sample size");
  cmd->add_option("--base-seed", o.base_seed, "Seed of trial 0; trial t uses base_seed + t");
  cmd->add_option("--alpha", o.alpha, "Target precision in (0, 1)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--workers", o.workers, "Worker threads (0: all cores)");
  cmd->add_option("--run-id", o.run_id, "Run identifier used in file names");
}

// Config file, then SPECTRAL_SCREENER_OUT, then command-line flags.
ExperimentConfig build_config(const Overrides& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  apply_environment(c);
  if (!o.experiment.empty()) c.experiment = experiment_from_string(o.experiment);
  if (!o.n_list.empty()) c.n_list = o.n_list;
  if (o.reps >= 0) c.reps = o.reps;
  if (o.base_seed) c.base_seed = *o.base_seed;
  if (o.alpha) c.alpha = *o.alpha;
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.workers) c.workers = *o.workers;
  if (!o.run_id.empty()) c.run_id = o.run_id;
  c.validate();
  return c;
}

int cmd_run(const Overrides& o, bool assert_checks) {
  const ExperimentConfig c = build_config(o);
  ExperimentOutput out;
  const RunFiles files = run(c, &out);
  std::cout << "wrote " << files.csv_path << "\nwrote " << files.summary_path << '\n';
  for (const auto& [name, value] : out.summary.at("frequencies").items()) {
    std::cout << "  " << name << ": " << value.get<double>() << '\n';
  }
  if (assert_checks) {
    const auto failures = assertion_failures(c, out);
    for (const auto& f : failures) std::cerr << "assertion failed: " << f << '\n';
    if (!failures.empty()) return kCheckFailed;
  }
  return 0;
}

int cmd_calibrate(Overrides o) {
  if (o.experiment.empty()) o.experiment = "calibrate";
  ExperimentConfig c = build_config(o);
  c.experiment = Experiment::Calibrate;
  ExperimentOutput out;
  const RunFiles files = run(c, &out);
  std::cout << "wrote " << files.csv_path << "\nwrote " << sidecar_path(c.resolved_calibration_dir(), c.run_id)
            << '\n';
  for (const auto& e : out.summary.at("entries")) {
    std::cout << "  n=" << e.at("n") << " p=" << e.at("p") << " c1=" << e.at("c1").get<double>()
              << " C=" << e.at("C").get<double>() << '\n';
  }
  return 0;
}

int cmd_audit(const std::string& csv, const std::string& summary) {
  const AuditResult r = audit_files(csv, summary.empty() ? std::nullopt : std::optional<std::string>(summary));
  for (const auto& m : r.messages) std::cerr << m << '\n';
  std::cout << r.rows << " rows, " << r.flag_mismatches << " flag mismatches, " << r.summary_mismatches
            << " summary mismatches\n";
  return r.ok() ? 0 : kCheckFailed;
}

std::vector<double> read_numbers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<double> out;
  std::string token;
  while (in >> token) {
    for (char& ch : token)
      if (ch == ',') ch = ' ';
    std::istringstream cells(token);
    double v = 0.0;
    while (cells >> v) out.push_back(v);
  }
  return out;
}

ThresholdLine parse_threshold(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("threshold must look like label=value: " + spec);
  return {spec.substr(0, eq), std::stod(spec.substr(eq + 1))};
}

// Plots either a spectrum file or one draw from the config's model together
// with the thresholds the library would apply to it.
int cmd_plot(const Overrides& o, const std::string& eigen_path, const std::vector<std::string>& threshold_specs,
             const std::string& svg_path) {
  Vector eigs;
  std::vector<ThresholdLine> lines;
  for (const auto& s : threshold_specs) lines.push_back(parse_threshold(s));
  std::string title = "Scree plot";
  if (!eigen_path.empty()) {
    const auto values = read_numbers(eigen_path);
    eigs = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
    std::sort(eigs.data(), eigs.data() + eigs.size(), std::greater<>());
  } else {
    const ExperimentConfig c = build_config(o);
    const Index n = c.n_list.front();
    const ConstantsConfig k = resolve_constants(c, n, c.model.kind == "operator" ? c.model.m_list.front() : c.model.p);
    if (c.model.kind == "operator") {
      const CovarianceOperator op = build_operator(c.model);
      const DesignGrid grid = DesignGrid::uniform(c.model.m_list.front(), c.model.grid_offset);
      eigs = eigvalsh(scaled_sample_covariance(simulate_trajectories(op, nullptr, c.model.sigma2, n, grid, c.base_seed)));
      lines.push_back({"operator jump", detect_operator_jump(eigs, n, op, k).threshold});
    } else {
      const PopulationModel model = build_population(c.model);
      eigs = eigvalsh(sample_covariance(draw_sample(model, c.model.sampler, n, c.base_seed)));
      lines.push_back({"2 eta~", detect_minimal_jump(eigs, n, c.regime, k).threshold});
      lines.push_back({"K~ threshold", select_eigenvalues(eigs, n, c.regime, c.alpha, k).threshold});
    }
    title = "Scree plot: " + c.model.kind + " model, n = " + std::to_string(n);
  }
  const std::string svg = scree_svg(eigs, lines, title);
  std::ofstream out(svg_path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + svg_path);
  out << svg;
  std::cout << "wrote " << svg_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scree-plot thresholds and covariance concentration experiments"};
  app.require_subcommand(1);

  Overrides run_o;
  bool assert_checks = false;
  auto* run_cmd = app.add_subcommand("run", "Run a Monte Carlo experiment");
  add_common(run_cmd, run_o);
  run_cmd->add_flag("--assert", assert_checks, "Exit with code 3 when a configured check fails");

  Overrides cal_o;
  auto* cal_cmd = app.add_subcommand("calibrate", "Calibrate c1 and C by empirical quantiles");
  add_common(cal_cmd, cal_o);

  std::string audit_csv;
  std::string audit_summary;
  auto* audit_cmd = app.add_subcommand("audit", "Recompute every flag of a report CSV");
  audit_cmd->add_option("--csv", audit_csv, "Report CSV")->required();
  audit_cmd->add_option("--summary", audit_summary, "Summary JSON to cross-check");

  Overrides plot_o;
  std::string eigen_path;
  std::vector<std::string> thresholds;
  std::string svg_path = "scree.svg";
  auto* plot_cmd = app.add_subcommand("plot", "Render a scree plot as SVG");
  add_common(plot_cmd, plot_o);
  plot_cmd->add_option("--eigenvalues", eigen_path, "File of eigenvalues (whitespace or comma separated)");
  plot_cmd->add_option("--threshold", thresholds, "Threshold line as label=value (repeatable)");
  plot_cmd->add_option("--svg", svg_path, "Output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run_o, assert_checks);
    if (*cal_cmd) return cmd_calibrate(cal_o);
    if (*audit_cmd) return cmd_audit(audit_csv, audit_summary);
    if (*plot_cmd) return cmd_plot(plot_o, eigen_path, thresholds, svg_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

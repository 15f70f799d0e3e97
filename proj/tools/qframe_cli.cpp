#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qframe/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "configuration file (JSON)")->required();
  cmd->add_option("--seed", o.seed, "override the root seed");
  cmd->add_option("--out", o.out_dir, "override the output directory");
  cmd->add_option("overrides", o.overrides,
                  "dotted-path config overrides, e.g. alice.mu_signal=0.5");
}

qframe::ExperimentConfig load(const CommonOpts& o) {
  qframe::ExperimentConfig cfg = qframe::load_config(o.config_path, o.overrides);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out_dir) cfg.harness.output_dir = *o.out_dir;
  cfg.validate();
  return cfg;
}

int cmd_run(const CommonOpts& o) {
  const qframe::ExperimentConfig cfg = load(o);
  const auto results = qframe::run_experiment(cfg);
  qframe::write_reports(cfg, results);
  std::cout << qframe::render_report_text(cfg, results);
  return kExitOk;
}

int cmd_calibrate(const CommonOpts& o) {
  const qframe::ExperimentConfig cfg = load(o);
  if (!cfg.calibration_targets)
    throw qframe::ConfigError("calibrate requires a calibration_targets section");
  const double trans = qframe::transmittance(cfg.session.channel);
  const qframe::CalibrationFit fit =
      qframe::calibrate(*cfg.calibration_targets, cfg.session.bob.eta, trans);
  const qframe::ExperimentConfig fitted = qframe::apply_calibration(cfg, fit);

  std::filesystem::create_directories(cfg.harness.output_dir);
  const auto path = std::filesystem::path(cfg.harness.output_dir) / "fitted_config.json";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << qframe::config_to_json(fitted).dump(2) << "\n";

  std::printf("fitted p_dark = %.9g\n", fit.p_dark);
  const char* names[4] = {"H", "V", "R", "L"};
  for (int s = 0; s < 4; ++s)
    std::printf("fitted e_prep[%s] = %.9g\n", names[s], fit.per_state_e_prep[s]);
  std::printf("wrote %s\n", path.string().c_str());
  return kExitOk;
}

int cmd_stabilize_demo(const CommonOpts& o, int trials) {
  const qframe::ExperimentConfig cfg = load(o);
  const qframe::StabilizeDemoReport rep = qframe::run_stabilize_demo(cfg, trials);

  std::filesystem::create_directories(cfg.harness.output_dir);
  const auto path = std::filesystem::path(cfg.harness.output_dir) / "stabilize_report.json";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << qframe::stabilize_report_json(rep).dump(2) << "\n";

  std::printf("trials %d, converged %d (%.2f%%)\n", rep.trials, rep.converged,
              100.0 * rep.convergence_rate);
  std::printf("probe iterations: p50 %.0f, p90 %.0f, max %.0f\n", rep.iterations_p50,
              rep.iterations_p90, rep.iterations_max);
  std::printf("residual wrong-port fraction: p50 %.3g, p90 %.3g, max %.3g\n", rep.residual_p50,
              rep.residual_p90, rep.residual_max);
  std::printf("wrote %s\n", path.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polarization-encoded BB84+decoy QKD link simulator with quantum framing"};
  app.require_subcommand(1);

  CommonOpts run_opts, cal_opts, stab_opts;
  int trials = 1000;

  CLI::App* run = app.add_subcommand("run", "run sessions and write reports");
  add_common(run, run_opts);
  CLI::App* cal = app.add_subcommand("calibrate", "fit p_dark and per-state e_prep to targets");
  add_common(cal, cal_opts);
  CLI::App* stab = app.add_subcommand("stabilize-demo", "stabilizer convergence statistics");
  add_common(stab, stab_opts);
  stab->add_option("--trials", trials, "number of random channels to lock onto");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (cal->parsed()) return cmd_calibrate(cal_opts);
    if (stab->parsed()) return cmd_stabilize_demo(stab_opts, trials);
  } catch (const qframe::UnattainableTarget& e) {
    std::cerr << "calibration target unattainable: " << e.what() << "\n"
              << "achievable range: [" << e.achievable_min << ", " << e.achievable_max << "]\n";
    return kExitConfigError;
  } catch (const qframe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitConfigError;
}

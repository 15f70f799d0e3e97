#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qframe/session.hpp"

// nlohmann::json, vendored single header
#include "json.hpp"

namespace qframe {

inline constexpr const char* kCodeVersion = "qframe 0.1.0";

enum class ReportFormat : std::uint8_t { table, machine };

struct HarnessParams {
  int repetitions = 1;
  std::string output_dir = "out";
  ReportFormat report_format = ReportFormat::table;
};

enum class VacuumClickScope : std::uint8_t {
  any,   // fraction of vacuum slots with >=1 click among the 4 gated detectors
  pair,  // per-basis detector pair: 1-(1-p_dark)^2
};

struct CalibrationTargets {
  double mu = 0.5;  // signal intensity the QBER targets refer to
  double vacuum_click_fraction = 0.0;
  VacuumClickScope scope = VacuumClickScope::any;
  std::array<double, 4> signal_qber{};  // indexed by StateLabel
};

struct ExperimentConfig {
  SessionConfig session{};
  HarnessParams harness{};
  std::optional<CalibrationTargets> calibration_targets{};
  std::uint64_t seed = 0;

  void validate() const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Carries the achievable bound when a calibration target is out of reach.
struct UnattainableTarget : std::runtime_error {
  UnattainableTarget(const std::string& what, double lo, double hi)
      : std::runtime_error(what), achievable_min(lo), achievable_max(hi) {}
  double achievable_min;
  double achievable_max;
};

// --- configuration -----------------------------------------------------

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Parses the file; parse failures and missing required fields raise
// ConfigError with a "path:line:" prefix where available.
ExperimentConfig load_config(const std::string& path,
                             std::span<const std::string> overrides = {});

// Applies "dotted.path=value" overrides onto the raw config document.
void apply_overrides(nlohmann::json& doc, std::span<const std::string> overrides);

std::uint64_t fnv1a64(const std::string& data);

// --- calibration ---------------------------------------------------------

struct CalibrationFit {
  double p_dark = 0.0;
  std::array<double, 4> per_state_e_prep{};
};

// Fits p_dark to the vacuum click-fraction target, then each state's e_prep
// to its signal QBER target, by 1-D bisection against analytic_qber_oracle.
// Throws UnattainableTarget (with the achievable range) when a target lies
// outside what the model can produce.
CalibrationFit calibrate(const CalibrationTargets& targets, double eta, double transmittance);

// Fitted parameters folded back into a config.
ExperimentConfig apply_calibration(const ExperimentConfig& base, const CalibrationFit& fit);

// --- experiment runner -----------------------------------------------------

// Runs harness.repetitions sessions; repetition i uses session seed
// derive_seed(cfg.seed, i). Repetitions run on a worker pool; each session is
// single-threaded and deterministic.
std::vector<SessionResult> run_experiment(const ExperimentConfig& cfg);

SessionTallies pooled_tallies(std::span<const SessionResult> results);
FrameStats pooled_frames(std::span<const SessionResult> results);

// --- reports ----------------------------------------------------------------

nlohmann::json result_to_json(const SessionResult& r, int run_index);

// One line per repetition; no timestamps, byte-identical for a fixed
// (config, seed).
std::string results_jsonl(const ExperimentConfig& cfg, std::span<const SessionResult> results);

// Aligned text grid: states across, intensities down, plus the vacuum row,
// decoy summary and framing counters.
std::string render_report_text(const ExperimentConfig& cfg, std::span<const SessionResult> results);

// Full bundle: provenance (config hash, seed, code version, timestamp),
// config echo, pooled aggregate. Timestamps live only here.
nlohmann::json report_bundle(const ExperimentConfig& cfg, std::span<const SessionResult> results,
                             const std::string& timestamp_iso8601);

// Writes results.jsonl, report.txt, report.json under cfg.harness.output_dir.
void write_reports(const ExperimentConfig& cfg, std::span<const SessionResult> results);

// --- stabilization demo -----------------------------------------------------

struct StabilizeDemoReport {
  int trials = 0;
  int converged = 0;
  double convergence_rate = 0.0;
  std::vector<int> iteration_histogram;  // bucket width 10 probes
  double iterations_p50 = 0.0, iterations_p90 = 0.0, iterations_max = 0.0;
  double residual_p50 = 0.0, residual_p90 = 0.0, residual_max = 0.0;
};

// Locks onto `trials` Haar-random channels with the configured stabilizer
// mode and reports convergence statistics.
StabilizeDemoReport run_stabilize_demo(const ExperimentConfig& cfg, int trials);

nlohmann::json stabilize_report_json(const StabilizeDemoReport& r);

std::string current_timestamp_iso8601();

}  // namespace qframe

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "qframe/harness.hpp"

using namespace qframe;
namespace fs = std::filesystem;

namespace {

ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.seed = 99;
  cfg.session.frames = 4;
  cfg.session.quantum_slots_per_frame = 4096;
  return cfg;
}

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path dir = fs::temp_directory_path() / "qframe_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream f(p, std::ios::binary);
  f << content;
  return p;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config json round-trip") {
  ExperimentConfig cfg = base_config();
  cfg.session.alice.per_state_e_prep = std::array<double, 4>{0.01, 0.02, 0.03, 0.04};
  cfg.session.bob.stabilizer_mode = StabilizerMode::feedback;
  cfg.harness.repetitions = 3;
  cfg.calibration_targets = CalibrationTargets{0.5, 0.0015, VacuumClickScope::any,
                                               {0.041, 0.033, 0.042, 0.022}};
  const ExperimentConfig back = config_from_json(config_to_json(cfg));
  CHECK(back.seed == cfg.seed);
  CHECK(back.session.alice.per_state_e_prep == cfg.session.alice.per_state_e_prep);
  CHECK(back.session.bob.stabilizer_mode == StabilizerMode::feedback);
  CHECK(back.harness.repetitions == 3);
  REQUIRE(back.calibration_targets.has_value());
  CHECK(back.calibration_targets->signal_qber == cfg.calibration_targets->signal_qber);
  CHECK(config_to_json(back).dump() == config_to_json(cfg).dump());
}

TEST_CASE("missing required fields are config errors") {
  nlohmann::json j = config_to_json(base_config());
  j["alice"].erase("mu_signal");
  CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("alice.mu_signal"), ConfigError);

  nlohmann::json k = config_to_json(base_config());
  k["bob"].erase("p_dark");
  CHECK_THROWS_AS(config_from_json(k), ConfigError);
}

TEST_CASE("parse errors carry the line number") {
  const fs::path p = temp_file("broken.json", "{\n  \"seed\": 1,\n  \"alice\": oops\n}\n");
  try {
    load_config(p.string());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
}

TEST_CASE("dotted-path overrides") {
  nlohmann::json j = config_to_json(base_config());
  const std::vector<std::string> ovs{"alice.mu_signal=0.25", "bob.tap_enabled=true",
                                     "harness.output_dir=elsewhere", "session.frames=9"};
  apply_overrides(j, ovs);
  const ExperimentConfig cfg = config_from_json(j);
  CHECK(cfg.session.alice.mu_signal == doctest::Approx(0.25));
  CHECK(cfg.session.bob.tap_enabled);
  CHECK(cfg.harness.output_dir == "elsewhere");
  CHECK(cfg.session.frames == 9);

  nlohmann::json k = config_to_json(base_config());
  CHECK_THROWS_AS(apply_overrides(k, std::vector<std::string>{"no-equals-sign"}), ConfigError);
}

TEST_CASE("seed derivation is deterministic and spread") {
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("vacuum inversion golden values") {
  // 1-(1-pd)^2 = 0.0015 and 1-(1-pd)^4 = 0.0015, frozen from closed forms
  CalibrationTargets t;
  t.vacuum_click_fraction = 0.0015;
  t.signal_qber = {0.05, 0.05, 0.05, 0.05};  // above the dark floor for both scopes
  t.scope = VacuumClickScope::pair;
  CHECK(calibrate(t, 0.1, 1.0).p_dark == doctest::Approx(7.5028146114e-4).epsilon(1e-9));
  t.scope = VacuumClickScope::any;
  CHECK(calibrate(t, 0.1, 1.0).p_dark == doctest::Approx(3.7521112226e-4).epsilon(1e-9));
}

TEST_CASE("all-zero targets fit to zero") {
  CalibrationTargets t;  // all zeros
  const CalibrationFit fit = calibrate(t, 0.1, 1.0);
  CHECK(fit.p_dark == 0.0);
  for (double e : fit.per_state_e_prep) CHECK(e == 0.0);
}

TEST_CASE("per-state fits reproduce the targets under the oracle") {
  CalibrationTargets t;
  t.mu = 0.5;
  t.vacuum_click_fraction = 0.0015;
  t.scope = VacuumClickScope::any;
  t.signal_qber = {0.041, 0.033, 0.042, 0.022};
  const double trans = transmittance({0.005, 0.2, 0.0, 0.0, 0});
  const CalibrationFit fit = calibrate(t, 0.1, trans);
  for (std::size_t s = 0; s < 4; ++s) {
    const double back =
        analytic_qber_oracle(0.5, trans, 0.1, fit.p_dark, fit.per_state_e_prep[s]).qber;
    CHECK(back == doctest::Approx(t.signal_qber[s]).epsilon(1e-6));
    CHECK(std::abs(back - t.signal_qber[s]) < 0.001);
  }
}

TEST_CASE("unattainable targets carry the achievable bound") {
  CalibrationTargets t;
  t.mu = 0.5;
  t.vacuum_click_fraction = 0.0015;
  t.scope = VacuumClickScope::pair;  // floor ~2.86% at mu=0.5: 2.2% is out of reach
  t.signal_qber = {0.041, 0.033, 0.042, 0.022};
  try {
    calibrate(t, 0.1, 1.0);
    FAIL("expected UnattainableTarget");
  } catch (const UnattainableTarget& e) {
    CHECK(e.achievable_min > 0.022);
    CHECK(e.achievable_min == doctest::Approx(0.0286).epsilon(0.02));
  }
}

TEST_CASE("experiment runner: determinism and pooling") {
  ExperimentConfig cfg = base_config();
  cfg.harness.repetitions = 3;
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  REQUIRE(a.size() == 3);
  CHECK(results_jsonl(cfg, a) == results_jsonl(cfg, b));
  CHECK(a[0].seed != a[1].seed);

  const SessionTallies pooled = pooled_tallies(a);
  std::int64_t direct = 0, summed = 0;
  for (const auto& r : a) direct += r.tallies.quantum_slots;
  summed = pooled.quantum_slots;
  CHECK(direct == summed);
  CHECK(direct == 3 * 4 * 4096);
}

TEST_CASE("report text mirrors the measurement table layout") {
  ExperimentConfig cfg = base_config();
  cfg.session.frames = 8;
  cfg.session.quantum_slots_per_frame = 20'000;
  const auto results = run_experiment(cfg);
  const std::string report = render_report_text(cfg, results);
  CHECK(report.find("H          V          R          L") != std::string::npos);
  CHECK(report.find("mu=0.5") != std::string::npos);
  CHECK(report.find("mu=0.1") != std::string::npos);
  CHECK(report.find("click[%]") != std::string::npos);
  CHECK(report.find("two-decoy analysis") != std::string::npos);
  CHECK(report.find("frames sent 8") != std::string::npos);
}

TEST_CASE("report bundle embeds config and provenance") {
  ExperimentConfig cfg = base_config();
  const auto results = run_experiment(cfg);
  const nlohmann::json bundle = report_bundle(cfg, results, "2026-01-01T00:00:00Z");
  CHECK(bundle.at("provenance").at("seed") == 99);
  CHECK(bundle.at("provenance").at("timestamp") == "2026-01-01T00:00:00Z");
  CHECK(bundle.at("config").at("alice").at("mu_signal") == 0.5);
  CHECK(bundle.at("aggregate").contains("qber_table"));
  const ExperimentConfig echoed = config_from_json(bundle.at("config"));
  CHECK(echoed.seed == cfg.seed);
}

TEST_CASE("calibration round-trip at demo scale") {
  CalibrationTargets t;
  t.mu = 0.5;
  t.vacuum_click_fraction = 0.0015;
  t.scope = VacuumClickScope::any;
  t.signal_qber = {0.041, 0.033, 0.042, 0.022};

  ExperimentConfig cfg = base_config();
  cfg.session.channel.length_km = 0.005;
  cfg.session.frames = 16;
  cfg.session.quantum_slots_per_frame = 32'768;
  cfg.seed = 515;
  const CalibrationFit fit =
      calibrate(t, cfg.session.bob.eta, transmittance(cfg.session.channel));
  const ExperimentConfig fitted = apply_calibration(cfg, fit);

  const auto results = run_experiment(fitted);
  const SessionTallies pooled = pooled_tallies(results);
  const auto records = qber_table(pooled);
  for (const auto& rec : records) {
    if (rec.click_fraction) {
      REQUIRE(rec.qber.has_value());
      const double sigma = std::sqrt(0.0015 * (1 - 0.0015) / double(rec.n_sifted));
      CHECK(std::abs(*rec.qber - 0.0015) < 3.0 * sigma + 1e-6);
    } else if (rec.state && rec.intensity == Intensity::signal) {
      REQUIRE(rec.qber.has_value());
      const double target = t.signal_qber[static_cast<std::size_t>(*rec.state)];
      CHECK(std::abs(*rec.qber - target) < 3.0 * rec.stat_error + 5e-4);
    }
  }
}

TEST_CASE("stabilize demo statistics") {
  ExperimentConfig cfg = base_config();
  cfg.session.bob.stabilizer_mode = StabilizerMode::feedback;
  const StabilizeDemoReport rep = run_stabilize_demo(cfg, 100);
  CHECK(rep.trials == 100);
  CHECK(rep.convergence_rate >= 0.99);
  CHECK(rep.residual_max <= cfg.session.bob.residual_error);
  CHECK(rep.iterations_max <= cfg.session.bob.feedback_max_iters);

  cfg.session.bob.stabilizer_mode = StabilizerMode::oracle;
  const StabilizeDemoReport oracle_rep = run_stabilize_demo(cfg, 50);
  CHECK(oracle_rep.convergence_rate == 1.0);
  CHECK(oracle_rep.residual_max <= 1e-12);
}

}  // TEST_SUITE

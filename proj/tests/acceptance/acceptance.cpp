// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit status is the failure count.
//
// usage: acceptance <path-to-qframe-cli>

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "qframe/harness.hpp"

using namespace qframe;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

constexpr std::array<const char*, 4> kStateNames{"H", "V", "R", "L"};
constexpr std::array<double, 4> kReferenceSignalQber{0.041, 0.033, 0.042, 0.022};
constexpr double kReferenceAverageQber = 0.034;
constexpr double kReferenceVacuumClickFraction = 0.0015;

const QberRecord* find_cell(const std::vector<QberRecord>& records,
                            std::optional<StateLabel> state, Intensity inten) {
  for (const auto& r : records)
    if (r.state == state && r.intensity == inten && !r.click_fraction) return &r;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Criteria 1-3 share one calibrated high-statistics session.

void calibrated_reproduction_suite() {
  SessionConfig cfg;
  cfg.alice.p_signal = 0.8;
  cfg.alice.p_decoy = 0.15;
  cfg.alice.p_vacuum = 0.05;
  cfg.bob.stabilizer_mode = StabilizerMode::oracle;
  cfg.channel.length_km = 0.005;
  cfg.channel.drift_sigma_per_slot = 0.0;
  cfg.frames = 2510;
  cfg.quantum_slots_per_frame = 65'536;
  cfg.seed = 20260809;

  CalibrationTargets targets;
  targets.mu = cfg.alice.mu_signal;
  targets.vacuum_click_fraction = kReferenceVacuumClickFraction;
  targets.scope = VacuumClickScope::any;
  targets.signal_qber = kReferenceSignalQber;

  const CalibrationFit fit =
      calibrate(targets, cfg.bob.eta, transmittance(cfg.channel));
  cfg.bob.p_dark = fit.p_dark;
  cfg.alice.per_state_e_prep = fit.per_state_e_prep;

  const auto t0 = std::chrono::steady_clock::now();
  const SessionResult r = run_session(cfg);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // -- calibrated-qber-reproduction ----------------------------------------
  bool pass = elapsed < 120.0;
  std::string detail;
  double sum = 0.0;
  for (int s = 0; s < 4; ++s) {
    const QberRecord* cell = find_cell(r.qber_records, static_cast<StateLabel>(s),
                                       Intensity::signal);
    if (!cell || !cell->qber) {
      pass = false;
      detail += std::string(kStateNames[static_cast<std::size_t>(s)]) + "=empty ";
      continue;
    }
    const double q = *cell->qber;
    sum += q;
    const double target = kReferenceSignalQber[static_cast<std::size_t>(s)];
    if (std::abs(q - target) > 0.003) pass = false;
    detail += std::string(kStateNames[static_cast<std::size_t>(s)]) + "=" +
              fmt("%.3f%%", q * 100.0) + " ";
  }
  const double avg = sum / 4.0;
  if (std::abs(avg - kReferenceAverageQber) > 0.002) pass = false;
  detail += "avg=" + fmt("%.3f%%", avg * 100.0) + " (target 3.4+-0.2)";
  detail += ", elapsed " + fmt("%.1fs", elapsed);
  report("calibrated-qber-reproduction", pass, detail);

  // -- stat-error-consistency -------------------------------------------------
  const QberRecord* pooled = find_cell(r.qber_records, std::nullopt, Intensity::signal);
  bool stat_pass = pooled != nullptr && pooled->qber.has_value();
  std::string stat_detail = "no pooled record";
  if (stat_pass) {
    const double rel = std::abs(pooled->stat_error - 1e-4) / 1e-4;
    stat_pass = rel <= 0.20 && pooled->n_sifted > 3'000'000 && pooled->n_sifted < 3'700'000;
    stat_detail = "stat_error=" + fmt("%.5f%%", pooled->stat_error * 100.0) + " on " +
                  std::to_string(pooled->n_sifted) + " sifted bits (target 0.01% +-20%)";
  }
  report("stat-error-consistency", stat_pass, stat_detail);

  // -- decoy-qber-direction ----------------------------------------------------
  bool dir_pass = true;
  std::string dir_detail;
  for (int s = 0; s < 4; ++s) {
    const QberRecord* sig = find_cell(r.qber_records, static_cast<StateLabel>(s),
                                      Intensity::signal);
    const QberRecord* dec = find_cell(r.qber_records, static_cast<StateLabel>(s),
                                      Intensity::decoy);
    if (!sig || !dec || !sig->qber || !dec->qber) {
      dir_pass = false;
      continue;
    }
    if (!(*dec->qber > *sig->qber)) dir_pass = false;
    dir_detail += std::string(kStateNames[static_cast<std::size_t>(s)]) + ":" +
                  fmt("%.2f", *dec->qber * 100.0) + ">" + fmt("%.2f%% ", *sig->qber * 100.0);
  }
  report("decoy-qber-direction", dir_pass, dir_detail);
}

// ---------------------------------------------------------------------------

void stabilization_suite() {
  const int trials = 1000;
  Rng channel_rng(101);
  Rng bob_rng(102);
  BobParams params;
  params.residual_error = 0.002;
  params.feedback_max_iters = 1000;

  int oracle_bad = 0;
  int feedback_ok = 0;
  int max_iters = 0;
  for (int i = 0; i < trials; ++i) {
    const PolUnitary u = random_unitary(channel_rng);
    const WrongPortProbe probe = [&u](const PolUnitary& s, StateLabel anchor) {
      return detection_prob(apply(s, apply(u, jones_of(anchor))), jones_of(StateLabel::V));
    };

    const StabilizerState oracle = stabilize_oracle(u, 0);
    const std::array<std::pair<const PolUnitary*, StateLabel>, 4> arms{
        {{&oracle.s1, StateLabel::H},
         {&oracle.s1, StateLabel::V},
         {&oracle.s2, StateLabel::R},
         {&oracle.s2, StateLabel::L}}};
    for (auto [comp, state] : arms) {
      const JonesVector seen = apply(*comp, apply(u, jones_of(state)));
      const JonesVector wrong =
          bit_of(state) == 0 ? jones_of(StateLabel::V) : jones_of(StateLabel::H);
      if (detection_prob(seen, wrong) > 1e-12) ++oracle_bad;
    }

    try {
      const StabilizerState fb = stabilize_feedback(probe, params, bob_rng, 0);
      const double res = std::max(probe(fb.s1, StateLabel::H), probe(fb.s2, StateLabel::R));
      if (res <= params.residual_error && fb.iterations_used <= params.feedback_max_iters)
        ++feedback_ok;
      max_iters = std::max(max_iters, fb.iterations_used);
    } catch (const LockFailed&) {
    }
  }
  const bool pass = oracle_bad == 0 && feedback_ok >= 990;
  report("stabilization-suite", pass,
         "oracle wrong-port >1e-12 in " + std::to_string(oracle_bad) + "/4000 arms, feedback " +
             std::to_string(feedback_ok) + "/1000 locks at <=0.2% (max " +
             std::to_string(max_iters) + " probes)");
}

// ---------------------------------------------------------------------------

void sifting_mismatch_suite() {
  SessionTallies pooled;
  const int sessions = 64;
  for (int i = 0; i < sessions; ++i) {
    SessionConfig cfg;
    cfg.alice.e_prep = 0.0;
    cfg.alice.p_signal = 1.0;
    cfg.alice.p_decoy = 0.0;
    cfg.alice.p_vacuum = 0.0;
    cfg.bob.p_dark = 0.0;
    cfg.bob.residual_error = 0.0;
    cfg.bob.stabilizer_mode = StabilizerMode::oracle;
    cfg.channel.length_km = 0.0;
    cfg.channel.drift_sigma_per_slot = 0.0;
    cfg.frames = 1;
    cfg.quantum_slots_per_frame = 15'625;
    cfg.seed = 9000 + static_cast<std::uint64_t>(i);  // fresh random birefringence each
    pooled.add(run_session(cfg).tallies);
  }

  std::int64_t errors = 0;
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < 2; ++i) errors += pooled.cell[s][i].errors;
  errors += pooled.vacuum_sift_errors;

  const std::int64_t n = pooled.mismatch_bit0 + pooled.mismatch_bit1;
  const double half_dev = std::abs(pooled.mismatch_bit0 - n / 2.0);
  const double three_sigma = 3.0 * std::sqrt(0.25 * static_cast<double>(n));
  const bool pass = pooled.quantum_slots == 1'000'000 && errors == 0 && n > 0 &&
                    half_dev <= three_sigma;
  report("sifting-mismatch-neutrality", pass,
         std::to_string(pooled.quantum_slots) + " slots, " + std::to_string(errors) +
             " sifted errors, mismatch split " + std::to_string(pooled.mismatch_bit0) + "/" +
             std::to_string(pooled.mismatch_bit1) + " (|dev| " + fmt("%.1f", half_dev) +
             " <= 3sigma " + fmt("%.1f", three_sigma) + ")");
}

// ---------------------------------------------------------------------------

void oracle_equivalence_suite() {
  const double eta = 0.1;
  const double e_opt = 0.03;
  const int n_slots = 1'000'000;
  bool pass = true;
  std::string detail;
  double worst_gain_z = 0.0, worst_qber_z = 0.0;

  int cell_index = 0;
  for (double mu : {0.1, 0.3, 0.5}) {
    for (double pd : {1e-4, 3.7521112226e-4, 7.5e-4}) {
      BobParams bob;
      bob.eta = eta;
      bob.p_dark = pd;
      const StabilizerState stab = stabilize_oracle(PolUnitary::identity(), 0);
      const OracleResult oracle = analytic_qber_oracle(mu, 1.0, eta, pd, e_opt);

      Rng rng(7000 + static_cast<std::uint64_t>(cell_index++));
      std::int64_t pair_clicks = 0, sifted = 0, errors = 0;
      for (int i = 0; i < n_slots; ++i) {
        const int bit = rng.uniform_bit();
        const Basis basis = rng.uniform_bit() ? Basis::X : Basis::Z;
        PulseSlot pulse;
        pulse.klass = PulseClass::signal;
        pulse.mu = mu;
        pulse.pol = jones_of(label_for(basis, bit));
        pulse.truth = PulseTruth{bit, basis, Intensity::signal};
        pulse.prep_error = rng.bernoulli(e_opt);
        const DetectionEvent ev =
            sample_detection(i, click_probabilities(pulse, stab, bob), rng);
        const bool matched_pair = basis == Basis::Z ? (ev.clicks[kDH] || ev.clicks[kDV])
                                                    : (ev.clicks[kDR] || ev.clicks[kDL]);
        pair_clicks += matched_pair;
        if (ev.resolved && ev.resolved->basis == basis) {
          ++sifted;
          errors += ev.resolved->bit != bit;
        }
      }
      const double gain = pair_clicks / double(n_slots);
      const double qber = sifted > 0 ? errors / double(sifted) : 0.0;
      const double sg = std::sqrt(oracle.gain * (1 - oracle.gain) / n_slots);
      const double sq = std::sqrt(oracle.qber * (1 - oracle.qber) / double(sifted));
      const double zg = std::abs(gain - oracle.gain) / sg;
      const double zq = std::abs(qber - oracle.qber) / sq;
      worst_gain_z = std::max(worst_gain_z, zg);
      worst_qber_z = std::max(worst_qber_z, zq);
      if (zg > 3.0 || zq > 3.0) {
        pass = false;
        detail += "(mu=" + fmt("%.1f", mu) + ",pd=" + fmt("%.1e", pd) + ": zg=" +
                  fmt("%.2f", zg) + ",zq=" + fmt("%.2f", zq) + ") ";
      }
    }
  }
  detail += "worst |z|: gain " + fmt("%.2f", worst_gain_z) + ", qber " +
            fmt("%.2f", worst_qber_z) + " over 3x3 grid, 1e6 slots each";
  report("oracle-equivalence", pass, detail);
}

// ---------------------------------------------------------------------------

double poisson_pmf(int n, double mu) {
  double p = std::exp(-mu);
  for (int k = 1; k <= n; ++k) p *= mu / k;
  return p;
}

void decoy_bracketing_suite() {
  const double mu = 0.5, nu = 0.1;
  bool pass = true;
  std::string detail;
  for (double teta : {0.01, 0.05, 0.2}) {
    for (double y0 : {0.0, 5e-4, 3e-3}) {
      for (double e_det : {0.0, 0.03}) {
        auto yield = [&](int n) {
          return 1.0 - (1.0 - y0) * std::pow(1.0 - teta, n);
        };
        auto err_gain = [&](int n) {
          const double eta_n = 1.0 - std::pow(1.0 - teta, n);
          return e_det * eta_n + 0.5 * y0 * (1.0 - eta_n);
        };
        double q_mu = 0, q_nu = 0, eg_mu = 0, eg_nu = 0;
        for (int n = 0; n <= 50; ++n) {
          q_mu += poisson_pmf(n, mu) * yield(n);
          eg_mu += poisson_pmf(n, mu) * err_gain(n);
          q_nu += poisson_pmf(n, nu) * yield(n);
          eg_nu += poisson_pmf(n, nu) * err_gain(n);
        }
        const DecoyEstimate d =
            decoy_bounds(q_mu, eg_mu / q_mu, q_nu, eg_nu / q_nu, y0, mu, nu);
        const double y1_true = yield(1);
        const double e1_true = err_gain(1) / yield(1);
        if (!(d.y1_lower <= y1_true + 1e-12)) {
          pass = false;
          detail += "Y1 bound violated at teta=" + fmt("%.2f ", teta);
        }
        if (d.e1_upper && !(*d.e1_upper >= e1_true - 1e-12)) {
          pass = false;
          detail += "e1 bound violated at teta=" + fmt("%.2f ", teta);
        }
      }
    }
  }
  report("decoy-bound-bracketing", pass,
         detail.empty() ? "Y1_lower <= Y1 and e1_upper >= e1 on all 18 exact channels (n<=50)"
                        : detail);
}

// ---------------------------------------------------------------------------

void codec_suite() {
  bool pass = true;
  std::string detail;

  CFrame golden;
  golden.dst_addr = 0x0001;
  golden.src_addr = 0x0002;
  golden.encoding_id = kEncodingPolarization;
  golden.protocol_id = kProtocolDecoyBb84;
  if (compute_fcs(golden) != 0xD2F2EDD9u) {
    pass = false;
    detail += "golden crc mismatch ";
  }

  Rng rng(606);
  int roundtrip_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    CFrame f;
    f.dst_addr = static_cast<std::uint16_t>(rng.uniform_below(65536));
    f.src_addr = static_cast<std::uint16_t>(rng.uniform_below(65536));
    f.encoding_id = static_cast<std::uint8_t>(rng.uniform_below(256));
    f.protocol_id = static_cast<std::uint8_t>(rng.uniform_below(256));
    f.seq = static_cast<std::uint16_t>(rng.uniform_below(65536));
    f.payload.resize(rng.uniform_below(129));
    for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng.uniform_below(256));
    const DecodeResult r = decode_cframe(encode_cframe(f));
    f.fcs = compute_fcs(f);
    if (!r.ok() || !(r.frame == f)) ++roundtrip_bad;
  }
  if (roundtrip_bad != 0) {
    pass = false;
    detail += std::to_string(roundtrip_bad) + " roundtrip failures ";
  }

  CFrame victim = golden;
  victim.payload.resize(16);
  std::iota(victim.payload.begin(), victim.payload.end(), std::uint8_t{0});
  const SymbolStream clean = encode_cframe(victim);
  int not_bad_crc = 0;
  const std::size_t body_start = kPreambleSymbols + 8;
  for (std::size_t i = body_start; i < clean.size(); ++i) {
    SymbolStream corrupted = clean;
    corrupted[i].bit ^= 1;
    if (decode_cframe(corrupted).error != DecodeError::bad_crc) ++not_bad_crc;
  }
  if (not_bad_crc != 0) {
    pass = false;
    detail += std::to_string(not_bad_crc) + " flips not bad-crc ";
  }
  detail += "1000 roundtrips, " + std::to_string(clean.size() - body_start) +
            " exhaustive header/payload/fcs flips all bad-crc, golden 0xD2F2EDD9";
  report("codec-suite", pass, detail);
}

// ---------------------------------------------------------------------------

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -2;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void cli_determinism_suite(const std::string& cli) {
  namespace fs = std::filesystem;
  const fs::path tmp = fs::path("acceptance_cli_tmp");
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  ExperimentConfig cfg;
  cfg.seed = 7;
  cfg.session.frames = 8;
  cfg.session.quantum_slots_per_frame = 4096;
  cfg.session.alice.e_prep = 0.03;
  cfg.harness.repetitions = 2;
  const fs::path cfg_path = tmp / "config.json";
  {
    std::ofstream f(cfg_path, std::ios::binary);
    f << config_to_json(cfg).dump(2) << "\n";
  }

  const std::string base = "\"" + cli + "\" run --config \"" + cfg_path.string() + "\"";
  const int rc1 = run_command(base + " --out \"" + (tmp / "a").string() + "\" > /dev/null");
  const int rc2 = run_command(base + " --out \"" + (tmp / "b").string() + "\" > /dev/null");
  const std::string ja = slurp(tmp / "a" / "results.jsonl");
  const std::string jb = slurp(tmp / "b" / "results.jsonl");

  // config validation contract: a missing required field exits with code 2
  nlohmann::json broken = config_to_json(cfg);
  broken["alice"].erase("mu_signal");
  const fs::path broken_path = tmp / "broken.json";
  {
    std::ofstream f(broken_path, std::ios::binary);
    f << broken.dump(2) << "\n";
  }
  const int rc3 = run_command("\"" + cli + "\" run --config \"" + broken_path.string() +
                              "\" --out \"" + (tmp / "c").string() + "\" 2> /dev/null");
  const bool no_partial = !fs::exists(tmp / "c" / "results.jsonl");

  const bool pass =
      rc1 == 0 && rc2 == 0 && !ja.empty() && ja == jb && rc3 == 2 && no_partial;
  report("cli-determinism", pass,
         "two runs: exit " + std::to_string(rc1) + "/" + std::to_string(rc2) + ", results.jsonl " +
             std::to_string(ja.size()) + " bytes, identical=" + (ja == jb ? "yes" : "no") +
             "; missing-field config: exit " + std::to_string(rc3) +
             (no_partial ? ", no partial output" : ", PARTIAL OUTPUT LEFT"));
  fs::remove_all(tmp);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-qframe-cli>\n");
    return 64;
  }
  calibrated_reproduction_suite();
  stabilization_suite();
  sifting_mismatch_suite();
  oracle_equivalence_suite();
  decoy_bracketing_suite();
  codec_suite();
  cli_determinism_suite(argv[1]);
  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures;
}

#include "qframe/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace qframe {

using nlohmann::json;

void ExperimentConfig::validate() const {
  session.validate();
  if (harness.repetitions < 1) throw ConfigError("harness.repetitions must be >= 1");
  if (harness.output_dir.empty()) throw ConfigError("harness.output_dir must not be empty");
}

// --- configuration ----------------------------------------------------------

namespace {

constexpr std::array<const char*, 4> kStateNames{"H", "V", "R", "L"};

int line_of_byte_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

const json& require(const json& j, const char* section, const char* key) {
  if (!j.contains(key))
    throw ConfigError(std::string("missing required field ") + section + "." + key);
  return j.at(key);
}

double require_number(const json& j, const char* section, const char* key) {
  const json& v = require(j, section, key);
  if (!v.is_number())
    throw ConfigError(std::string(section) + "." + key + " must be a number");
  return v.get<double>();
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::array<double, 4> state_map_from_json(const json& j, const std::string& where) {
  std::array<double, 4> out{};
  for (std::size_t s = 0; s < 4; ++s) {
    if (!j.contains(kStateNames[s]))
      throw ConfigError(where + " must provide H, V, R and L entries");
    out[s] = j.at(kStateNames[s]).get<double>();
  }
  return out;
}

json state_map_to_json(const std::array<double, 4>& m) {
  json j;
  for (std::size_t s = 0; s < 4; ++s) j[kStateNames[s]] = m[s];
  return j;
}

}  // namespace

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  json& a = j["alice"];
  a["mu_signal"] = cfg.session.alice.mu_signal;
  a["mu_decoy"] = cfg.session.alice.mu_decoy;
  a["mu_vacuum"] = cfg.session.alice.mu_vacuum;
  a["p_signal"] = cfg.session.alice.p_signal;
  a["p_decoy"] = cfg.session.alice.p_decoy;
  a["p_vacuum"] = cfg.session.alice.p_vacuum;
  a["e_prep"] = cfg.session.alice.e_prep;
  if (cfg.session.alice.per_state_e_prep)
    a["per_state_e_prep"] = state_map_to_json(*cfg.session.alice.per_state_e_prep);
  a["mu_classical"] = cfg.session.alice.mu_classical;
  json& b = j["bob"];
  b["eta"] = cfg.session.bob.eta;
  b["p_dark"] = cfg.session.bob.p_dark;
  b["residual_error"] = cfg.session.bob.residual_error;
  b["tap_enabled"] = cfg.session.bob.tap_enabled;
  b["stabilizer_mode"] =
      cfg.session.bob.stabilizer_mode == StabilizerMode::oracle ? "oracle" : "feedback";
  b["feedback_max_iters"] = cfg.session.bob.feedback_max_iters;
  json& c = j["channel"];
  c["length_km"] = cfg.session.channel.length_km;
  c["loss_db_per_km"] = cfg.session.channel.loss_db_per_km;
  c["excess_loss_db"] = cfg.session.channel.excess_loss_db;
  c["drift_sigma_per_slot"] = cfg.session.channel.drift_sigma_per_slot;
  json& s = j["session"];
  s["frames"] = cfg.session.frames;
  s["quantum_slots_per_frame"] = cfg.session.quantum_slots_per_frame;
  s["dst_addr"] = cfg.session.dst_addr;
  s["src_addr"] = cfg.session.src_addr;
  s["guard_slots"] = cfg.session.guard_slots;
  s["record_sifted_bits"] = cfg.session.record_sifted_bits;
  s["desync_abort_after"] = cfg.session.desync_abort_after;
  json& h = j["harness"];
  h["repetitions"] = cfg.harness.repetitions;
  h["output_dir"] = cfg.harness.output_dir;
  h["report_format"] = cfg.harness.report_format == ReportFormat::table ? "table" : "machine";
  if (cfg.calibration_targets) {
    json& t = j["calibration_targets"];
    t["mu"] = cfg.calibration_targets->mu;
    t["vacuum_click_fraction"] = cfg.calibration_targets->vacuum_click_fraction;
    t["vacuum_click_scope"] =
        cfg.calibration_targets->scope == VacuumClickScope::any ? "any" : "pair";
    t["signal_qber"] = state_map_to_json(cfg.calibration_targets->signal_qber);
  }
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (!j.contains("seed")) throw ConfigError("missing required field seed");
  cfg.seed = j.at("seed").get<std::uint64_t>();

  const json& a = require(j, "", "alice");
  cfg.session.alice.mu_signal = require_number(a, "alice", "mu_signal");
  cfg.session.alice.mu_decoy = require_number(a, "alice", "mu_decoy");
  cfg.session.alice.p_signal = require_number(a, "alice", "p_signal");
  cfg.session.alice.p_decoy = require_number(a, "alice", "p_decoy");
  cfg.session.alice.p_vacuum = require_number(a, "alice", "p_vacuum");
  maybe(a, "mu_vacuum", cfg.session.alice.mu_vacuum);
  maybe(a, "e_prep", cfg.session.alice.e_prep);
  maybe(a, "mu_classical", cfg.session.alice.mu_classical);
  if (a.contains("per_state_e_prep"))
    cfg.session.alice.per_state_e_prep =
        state_map_from_json(a.at("per_state_e_prep"), "alice.per_state_e_prep");

  const json& b = require(j, "", "bob");
  cfg.session.bob.eta = require_number(b, "bob", "eta");
  cfg.session.bob.p_dark = require_number(b, "bob", "p_dark");
  maybe(b, "residual_error", cfg.session.bob.residual_error);
  maybe(b, "tap_enabled", cfg.session.bob.tap_enabled);
  maybe(b, "feedback_max_iters", cfg.session.bob.feedback_max_iters);
  if (b.contains("stabilizer_mode")) {
    const std::string m = b.at("stabilizer_mode").get<std::string>();
    if (m == "oracle")
      cfg.session.bob.stabilizer_mode = StabilizerMode::oracle;
    else if (m == "feedback")
      cfg.session.bob.stabilizer_mode = StabilizerMode::feedback;
    else
      throw ConfigError("bob.stabilizer_mode must be \"oracle\" or \"feedback\"");
  }

  const json& c = require(j, "", "channel");
  cfg.session.channel.length_km = require_number(c, "channel", "length_km");
  cfg.session.channel.loss_db_per_km = require_number(c, "channel", "loss_db_per_km");
  maybe(c, "excess_loss_db", cfg.session.channel.excess_loss_db);
  maybe(c, "drift_sigma_per_slot", cfg.session.channel.drift_sigma_per_slot);

  const json& s = require(j, "", "session");
  cfg.session.frames = static_cast<std::int64_t>(require_number(s, "session", "frames"));
  cfg.session.quantum_slots_per_frame =
      static_cast<std::int64_t>(require_number(s, "session", "quantum_slots_per_frame"));
  if (s.contains("dst_addr")) cfg.session.dst_addr = s.at("dst_addr").get<std::uint16_t>();
  if (s.contains("src_addr")) cfg.session.src_addr = s.at("src_addr").get<std::uint16_t>();
  maybe(s, "guard_slots", cfg.session.guard_slots);
  maybe(s, "record_sifted_bits", cfg.session.record_sifted_bits);
  maybe(s, "desync_abort_after", cfg.session.desync_abort_after);

  if (j.contains("harness")) {
    const json& h = j.at("harness");
    maybe(h, "repetitions", cfg.harness.repetitions);
    maybe(h, "output_dir", cfg.harness.output_dir);
    if (h.contains("report_format")) {
      const std::string f = h.at("report_format").get<std::string>();
      if (f == "table")
        cfg.harness.report_format = ReportFormat::table;
      else if (f == "machine")
        cfg.harness.report_format = ReportFormat::machine;
      else
        throw ConfigError("harness.report_format must be \"table\" or \"machine\"");
    }
  }

  if (j.contains("calibration_targets")) {
    const json& t = j.at("calibration_targets");
    CalibrationTargets ct;
    ct.mu = require_number(t, "calibration_targets", "mu");
    ct.vacuum_click_fraction =
        require_number(t, "calibration_targets", "vacuum_click_fraction");
    if (t.contains("vacuum_click_scope")) {
      const std::string sc = t.at("vacuum_click_scope").get<std::string>();
      if (sc == "any")
        ct.scope = VacuumClickScope::any;
      else if (sc == "pair")
        ct.scope = VacuumClickScope::pair;
      else
        throw ConfigError("calibration_targets.vacuum_click_scope must be \"any\" or \"pair\"");
    }
    ct.signal_qber =
        state_map_from_json(require(t, "calibration_targets", "signal_qber"),
                            "calibration_targets.signal_qber");
    cfg.calibration_targets = ct;
  }

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

void apply_overrides(json& doc, std::span<const std::string> overrides) {
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must have the form dotted.path=value: " + ov);
    const std::string path = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;  // bare strings stay strings
    }
    json* node = &doc;
    std::size_t pos = 0;
    while (true) {
      const auto dot = path.find('.', pos);
      const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
      if (key.empty()) throw ConfigError("override has an empty path segment: " + ov);
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      node = &(*node)[key];
      pos = dot + 1;
    }
  }
}

ExperimentConfig load_config(const std::string& path, std::span<const std::string> overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ":" + std::to_string(line_of_byte_offset(text, e.byte)) + ": " +
                      e.what());
  }
  apply_overrides(doc, overrides);
  try {
    return config_from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// --- calibration -------------------------------------------------------------

namespace {

// Solves f(x) = target for monotone-increasing f on [lo, hi].
double bisect(double lo, double hi, double target, const std::function<double(double)>& f,
              const char* what) {
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (target < f_lo - 1e-15 || target > f_hi + 1e-15)
    throw UnattainableTarget(std::string(what) + " target " + std::to_string(target) +
                                 " outside achievable range [" + std::to_string(f_lo) + ", " +
                                 std::to_string(f_hi) + "]",
                             f_lo, f_hi);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double vacuum_click_fraction_of(double p_dark, VacuumClickScope scope) {
  const double miss = 1.0 - p_dark;
  if (scope == VacuumClickScope::pair) return 1.0 - miss * miss;
  return 1.0 - miss * miss * miss * miss;
}

}  // namespace

CalibrationFit calibrate(const CalibrationTargets& targets, double eta, double transmittance) {
  CalibrationFit fit;
  fit.p_dark = bisect(
      0.0, 1.0, targets.vacuum_click_fraction,
      [&](double pd) { return vacuum_click_fraction_of(pd, targets.scope); }, "vacuum click fraction");
  if (targets.vacuum_click_fraction == 0.0) fit.p_dark = 0.0;

  for (std::size_t s = 0; s < 4; ++s) {
    const double target = targets.signal_qber[s];
    fit.per_state_e_prep[s] = bisect(
        0.0, 1.0, target,
        [&](double e) {
          return analytic_qber_oracle(targets.mu, transmittance, eta, fit.p_dark, e).qber;
        },
        kStateNames[s]);
    if (target == 0.0) fit.per_state_e_prep[s] = 0.0;
  }
  return fit;
}

ExperimentConfig apply_calibration(const ExperimentConfig& base, const CalibrationFit& fit) {
  ExperimentConfig out = base;
  out.session.bob.p_dark = fit.p_dark;
  out.session.alice.per_state_e_prep = fit.per_state_e_prep;
  return out;
}

// --- experiment runner --------------------------------------------------------

std::vector<SessionResult> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const int reps = cfg.harness.repetitions;
  std::vector<SessionResult> results(static_cast<std::size_t>(reps));

  auto run_one = [&](int i) {
    SessionConfig sc = cfg.session;
    sc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    results[static_cast<std::size_t>(i)] = run_session(sc);
  };

  if (reps == 1) {
    run_one(0);
    return results;
  }
  const unsigned workers =
      std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                         static_cast<unsigned>(reps));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < reps; i = next.fetch_add(1)) run_one(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

SessionTallies pooled_tallies(std::span<const SessionResult> results) {
  SessionTallies t;
  for (const auto& r : results) t.add(r.tallies);
  return t;
}

FrameStats pooled_frames(std::span<const SessionResult> results) {
  FrameStats f;
  for (const auto& r : results) {
    f.frames_sent += r.frames.frames_sent;
    f.frames_decoded += r.frames.frames_decoded;
    f.decode_errors += r.frames.decode_errors;
    f.address_mismatches += r.frames.address_mismatches;
    f.restabilizations += r.frames.restabilizations;
    f.stabilizer_iterations += r.frames.stabilizer_iterations;
    f.lock_failures += r.frames.lock_failures;
  }
  return f;
}

// --- reports --------------------------------------------------------------------

namespace {

json qber_record_json(const QberRecord& r) {
  json j;
  j["state"] = r.state ? json(to_string(*r.state)) : json(nullptr);
  j["intensity"] = to_string(r.intensity);
  j["click_fraction"] = r.click_fraction;
  j["n_sifted"] = r.n_sifted;
  j["n_errors"] = r.n_errors;
  j["qber"] = r.qber ? json(*r.qber) : json(nullptr);
  j["stat_error"] = r.stat_error;
  return j;
}

json decoy_json(const std::optional<DecoyEstimate>& d) {
  if (!d) return json(nullptr);
  json j;
  j["Q_mu"] = d->q_mu;
  j["E_mu"] = d->e_mu;
  j["Q_nu"] = d->q_nu;
  j["E_nu"] = d->e_nu;
  j["Y0"] = d->y0;
  j["Y1_lower"] = d->y1_lower;
  j["Q1_lower"] = d->q1_lower;
  j["e1_upper"] = d->e1_upper ? json(*d->e1_upper) : json(nullptr);
  j["rate_lower"] = d->rate_lower;
  j["degenerate"] = d->degenerate;
  return j;
}

json frames_json(const FrameStats& f) {
  json j;
  j["frames_sent"] = f.frames_sent;
  j["frames_decoded"] = f.frames_decoded;
  j["decode_errors"] = f.decode_errors;
  j["address_mismatches"] = f.address_mismatches;
  j["restabilizations"] = f.restabilizations;
  j["stabilizer_iterations"] = f.stabilizer_iterations;
  j["lock_failures"] = f.lock_failures;
  return j;
}

json tallies_json(const SessionTallies& t) {
  json j;
  json cells = json::array();
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < 2; ++i) {
      json c;
      c["state"] = kStateNames[s];
      c["intensity"] = i == 0 ? "signal" : "decoy";
      c["sent"] = t.cell[s][i].sent;
      c["sifted"] = t.cell[s][i].sifted;
      c["errors"] = t.cell[s][i].errors;
      cells.push_back(c);
    }
  j["cells"] = cells;
  j["vacuum_sent"] = t.vacuum_sent;
  j["vacuum_any_click"] = t.vacuum_any_click;
  j["vacuum_sifted"] = t.vacuum_sifted;
  j["vacuum_sift_errors"] = t.vacuum_sift_errors;
  j["mismatch_bit0"] = t.mismatch_bit0;
  j["mismatch_bit1"] = t.mismatch_bit1;
  j["quantum_slots"] = t.quantum_slots;
  j["resolved_total"] = t.resolved_total;
  j["squashed_total"] = t.squashed_total;
  return j;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

json result_to_json(const SessionResult& r, int run_index) {
  json j;
  j["run"] = run_index;
  j["seed"] = r.seed;
  j["total_slots"] = r.total_slots;
  json table = json::array();
  for (const auto& rec : r.qber_records) table.push_back(qber_record_json(rec));
  j["qber_table"] = table;
  j["decoy"] = decoy_json(r.decoy);
  j["frames"] = frames_json(r.frames);
  j["tallies"] = tallies_json(r.tallies);
  return j;
}

std::string results_jsonl(const ExperimentConfig& cfg, std::span<const SessionResult> results) {
  (void)cfg;
  std::string out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    out += result_to_json(results[i], static_cast<int>(i)).dump();
    out += '\n';
  }
  return out;
}

std::string render_report_text(const ExperimentConfig& cfg,
                               std::span<const SessionResult> results) {
  const SessionTallies pooled = pooled_tallies(results);
  const FrameStats frames = pooled_frames(results);
  const auto records = qber_table(pooled);
  const auto decoy = decoy_from_tallies(pooled, cfg.session.alice.mu_signal,
                                        cfg.session.alice.mu_decoy);

  auto cell = [&](std::optional<StateLabel> state, Intensity inten) -> const QberRecord* {
    for (const auto& r : records)
      if (r.state == state && r.intensity == inten && !r.click_fraction) return &r;
    return nullptr;
  };

  std::string out;
  out += "quantum-frame QKD session report\n";
  out += "================================\n";
  char head[256];
  std::snprintf(head, sizeof head, "config %016llx  seed %llu  runs %zu  %s\n\n",
                static_cast<unsigned long long>(fnv1a64(config_to_json(cfg).dump())),
                static_cast<unsigned long long>(cfg.seed), results.size(), kCodeVersion);
  out += head;

  out += "QBER by prepared state and mean photon number\n";
  out += "  state                 H          V          R          L        all\n";
  for (int i = 0; i < 2; ++i) {
    const Intensity inten = i == 0 ? Intensity::signal : Intensity::decoy;
    const double mu = i == 0 ? cfg.session.alice.mu_signal : cfg.session.alice.mu_decoy;
    std::string qline = "  mu=" + fmt("%-6.3g", mu) + " qber[%]";
    std::string sline = "           stat[%]";
    std::string nline = "           sifted ";
    for (int s = 0; s < 5; ++s) {
      const QberRecord* r =
          s < 4 ? cell(static_cast<StateLabel>(s), inten) : cell(std::nullopt, inten);
      if (r && r->qber) {
        qline += fmt("%11.3f", *r->qber * 100.0);
        sline += fmt("%11.4f", r->stat_error * 100.0);
        nline += fmt("%11.0f", static_cast<double>(r->n_sifted));
      } else {
        qline += "          -";
        sline += "          -";
        nline += "          -";
      }
    }
    out += qline + "\n" + sline + "\n" + nline + "\n";
  }
  // vacuum row
  for (const auto& r : records)
    if (r.click_fraction) {
      out += "  mu=0     click[%]";
      if (r.qber)
        out += fmt("%11.4f", *r.qber * 100.0) + " +-" + fmt("%.4f", r.stat_error * 100.0) +
               "  (N=" + std::to_string(r.n_sifted) + ")";
      else
        out += "          -";
      out += "\n";
    }
  out += "\n";

  if (decoy) {
    out += "two-decoy analysis (vacuum + weak)\n";
    out += "  Q_mu=" + fmt("%.6g", decoy->q_mu) + "  E_mu=" + fmt("%.6g", decoy->e_mu) +
           "  Q_nu=" + fmt("%.6g", decoy->q_nu) + "  E_nu=" + fmt("%.6g", decoy->e_nu) +
           "  Y0=" + fmt("%.6g", decoy->y0) + "\n";
    out += "  Y1_lower=" + fmt("%.6g", decoy->y1_lower) +
           "  Q1_lower=" + fmt("%.6g", decoy->q1_lower) + "  e1_upper=" +
           (decoy->e1_upper ? fmt("%.6g", *decoy->e1_upper) : std::string("undefined")) +
           "  rate_lower=" + fmt("%.6g", decoy->rate_lower) + " per pulse\n";
    if (decoy->degenerate) out += "  (Y1 bound clamped at 0; estimate degenerate)\n";
    out += "\n";
  }

  out += "framing\n";
  out += "  frames sent " + std::to_string(frames.frames_sent) + ", decoded " +
         std::to_string(frames.frames_decoded) + ", decode errors " +
         std::to_string(frames.decode_errors) + ", restabilizations " +
         std::to_string(frames.restabilizations) + ", stabilizer probes " +
         std::to_string(frames.stabilizer_iterations) + "\n";
  return out;
}

json report_bundle(const ExperimentConfig& cfg, std::span<const SessionResult> results,
                   const std::string& timestamp_iso8601) {
  const SessionTallies pooled = pooled_tallies(results);
  json j;
  json prov;
  prov["config_hash"] = fnv1a64(config_to_json(cfg).dump());
  prov["seed"] = cfg.seed;
  prov["code_version"] = kCodeVersion;
  prov["timestamp"] = timestamp_iso8601;
  j["provenance"] = prov;
  j["config"] = config_to_json(cfg);
  json agg;
  json table = json::array();
  for (const auto& rec : qber_table(pooled)) table.push_back(qber_record_json(rec));
  agg["qber_table"] = table;
  agg["decoy"] = decoy_json(
      decoy_from_tallies(pooled, cfg.session.alice.mu_signal, cfg.session.alice.mu_decoy));
  agg["frames"] = frames_json(pooled_frames(results));
  agg["tallies"] = tallies_json(pooled);
  j["aggregate"] = agg;
  j["runs"] = static_cast<int>(results.size());
  return j;
}

void write_reports(const ExperimentConfig& cfg, std::span<const SessionResult> results) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.harness.output_dir);
  const fs::path dir(cfg.harness.output_dir);
  {
    std::ofstream f(dir / "results.jsonl", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write results.jsonl");
    f << results_jsonl(cfg, results);
  }
  {
    std::ofstream f(dir / "report.txt", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write report.txt");
    f << render_report_text(cfg, results);
  }
  {
    std::ofstream f(dir / "report.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write report.json");
    f << report_bundle(cfg, results, current_timestamp_iso8601()).dump(2) << "\n";
  }
}

// --- stabilization demo --------------------------------------------------------

StabilizeDemoReport run_stabilize_demo(const ExperimentConfig& cfg, int trials) {
  if (trials < 1) throw ConfigError("stabilize-demo requires trials >= 1");
  StabilizeDemoReport rep;
  rep.trials = trials;
  std::vector<double> iters;
  std::vector<double> residuals;
  iters.reserve(static_cast<std::size_t>(trials));
  residuals.reserve(static_cast<std::size_t>(trials));

  for (int i = 0; i < trials; ++i) {
    Rng channel_rng(derive_seed(cfg.seed, 10'000 + static_cast<std::uint64_t>(i)));
    Rng bob_rng(derive_seed(cfg.seed, 20'000 + static_cast<std::uint64_t>(i)));
    const PolUnitary u = random_unitary(channel_rng);
    const WrongPortProbe probe = [&](const PolUnitary& s, StateLabel anchor) {
      return detection_prob(apply(s, apply(u, jones_of(anchor))), jones_of(StateLabel::V));
    };
    try {
      const StabilizerState st =
          stabilize(cfg.session.bob.stabilizer_mode, u, probe, cfg.session.bob, bob_rng, 0);
      const double res = std::max(probe(st.s1, StateLabel::H), probe(st.s2, StateLabel::R));
      rep.converged += 1;
      iters.push_back(st.iterations_used);
      residuals.push_back(res);
    } catch (const LockFailed& e) {
      iters.push_back(e.iterations_used);
      residuals.push_back(e.best_wrong_port);
    }
  }
  rep.convergence_rate = static_cast<double>(rep.converged) / trials;

  auto pct = [](std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t idx =
        std::min(v.size() - 1, static_cast<std::size_t>(p * static_cast<double>(v.size())));
    return v[idx];
  };
  rep.iterations_p50 = pct(iters, 0.50);
  rep.iterations_p90 = pct(iters, 0.90);
  rep.iterations_max = *std::max_element(iters.begin(), iters.end());
  rep.residual_p50 = pct(residuals, 0.50);
  rep.residual_p90 = pct(residuals, 0.90);
  rep.residual_max = *std::max_element(residuals.begin(), residuals.end());

  const int max_bucket = static_cast<int>(rep.iterations_max) / 10;
  rep.iteration_histogram.assign(static_cast<std::size_t>(max_bucket) + 1, 0);
  for (double it : iters) rep.iteration_histogram[static_cast<std::size_t>(it / 10.0)] += 1;
  return rep;
}

json stabilize_report_json(const StabilizeDemoReport& r) {
  json j;
  j["trials"] = r.trials;
  j["converged"] = r.converged;
  j["convergence_rate"] = r.convergence_rate;
  j["iteration_histogram_bucket10"] = r.iteration_histogram;
  j["iterations_p50"] = r.iterations_p50;
  j["iterations_p90"] = r.iterations_p90;
  j["iterations_max"] = r.iterations_max;
  j["residual_p50"] = r.residual_p50;
  j["residual_p90"] = r.residual_p90;
  j["residual_max"] = r.residual_max;
  return j;
}

std::string current_timestamp_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace qframe

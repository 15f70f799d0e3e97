#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qframe/alice.hpp"
#include "qframe/bob.hpp"
#include "qframe/channel.hpp"
#include "qframe/framing.hpp"

namespace qframe {

struct SessionConfig {
  AliceParams alice{};
  BobParams bob{};
  ChannelParams channel{};
  std::int64_t frames = 1;
  std::int64_t quantum_slots_per_frame = 1;
  std::uint16_t dst_addr = 0x0001;
  std::uint16_t src_addr = 0x0002;
  int guard_slots = 8;
  std::uint64_t seed = 0;
  bool record_sifted_bits = false;
  // consecutive undecodable frames before the session gives up
  int desync_abort_after = 8;

  void validate() const;
};

struct SessionAborted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-(state, intensity) counters for signal and decoy pulses.
struct CellTally {
  std::int64_t sent = 0;
  std::int64_t sifted = 0;
  std::int64_t errors = 0;
};

struct SessionTallies {
  CellTally cell[4][2]{};  // [StateLabel][signal=0, decoy=1]
  std::int64_t vacuum_sent = 0;
  std::int64_t vacuum_any_click = 0;  // >=1 click among the four gated detectors
  std::int64_t vacuum_sifted = 0;     // resolved and basis-matched (feeds Y0)
  std::int64_t vacuum_sift_errors = 0;
  // Basis-mismatched resolutions, split by resolved bit (discarded by sifting).
  std::int64_t mismatch_bit0 = 0;
  std::int64_t mismatch_bit1 = 0;
  std::int64_t quantum_slots = 0;
  std::int64_t resolved_total = 0;
  std::int64_t squashed_total = 0;

  void add(const SessionTallies& other);
};

struct SiftedPair {
  std::int64_t slot = 0;
  StateLabel state = StateLabel::H;
  Intensity intensity = Intensity::signal;
  int alice_bit = 0;
  int bob_bit = 0;
};

struct SiftResult {
  std::vector<SiftedPair> pairs;
  SessionTallies tallies;
};

// Keeps slots where Bob resolved a click, the bases match, and the slot was
// signal/decoy class. Vacuum slots are tallied separately; basis mismatches
// and no-clicks are discarded. Inputs must be slot-aligned.
SiftResult sift(std::span<const PulseSlot> alice_slots, std::span<const DetectionEvent> events,
                bool keep_pairs = true);

struct QberRecord {
  std::optional<StateLabel> state{};  // nullopt = pooled row
  Intensity intensity = Intensity::signal;
  bool click_fraction = false;  // vacuum row semantics
  std::int64_t n_sifted = 0;
  std::int64_t n_errors = 0;
  std::optional<double> qber{};  // nullopt when n_sifted == 0
  double stat_error = 0.0;
};

// One record per (state, intensity) cell, pooled rows per intensity, and the
// pooled vacuum click-fraction row.
std::vector<QberRecord> qber_table(const SessionTallies& t);

// Binary entropy, log base 2; H2(0) = H2(1) = 0.
double binary_entropy(double p);

inline constexpr double kErrorCorrectionEfficiency = 1.16;
inline constexpr double kSiftingFactor = 0.5;

struct DecoyEstimate {
  double q_mu = 0.0, e_mu = 0.0;
  double q_nu = 0.0, e_nu = 0.0;
  double y0 = 0.0;
  double y1_lower = 0.0;
  double q1_lower = 0.0;
  std::optional<double> e1_upper{};  // nullopt when y1_lower == 0
  double rate_lower = 0.0;           // may be <= 0; reported, not clamped
  bool degenerate = false;           // Y1 clamped up from a negative value
};

// Vacuum+weak two-decoy bounds. Requires 0 < nu < mu.
DecoyEstimate decoy_bounds(double q_mu, double e_mu, double q_nu, double e_nu, double y0,
                           double mu, double nu);

// Per-pulse yield estimators from sifted counts (the 0.5 a-priori basis-match
// factor divided out), fed to decoy_bounds. nullopt when any intensity class
// is missing from the tallies.
std::optional<DecoyEstimate> decoy_from_tallies(const SessionTallies& t, double mu, double nu);

struct OracleResult {
  double gain = 0.0;
  double qber = 0.0;
};

// Closed-form per-basis-arm gain and QBER used as the Monte-Carlo oracle and
// as the calibration model: Q = Y0c + 1 - exp(-mu*T*0.5*eta) with
// Y0c = 1-(1-p_dark)^2, QBER = (0.5*Y0c + e_opt*(1-exp(-mu*T*0.5*eta)))/Q.
OracleResult analytic_qber_oracle(double mu, double t, double eta, double p_dark, double e_opt);

struct FrameStats {
  std::int64_t frames_sent = 0;
  std::int64_t frames_decoded = 0;
  std::int64_t decode_errors = 0;
  std::int64_t address_mismatches = 0;
  std::int64_t restabilizations = 0;
  std::int64_t stabilizer_iterations = 0;  // feedback probes, total
  std::int64_t lock_failures = 0;
};

struct SessionResult {
  SessionTallies tallies{};
  std::vector<QberRecord> qber_records;
  std::optional<DecoyEstimate> decoy{};
  FrameStats frames{};
  std::vector<SiftedPair> sifted;  // populated iff config.record_sifted_bits
  std::int64_t total_slots = 0;
  std::uint64_t seed = 0;
};

// Drives the full quantum-frame exchange: per frame, drift, C-frame emission
// and decoding, conditional re-stabilization, quantum slot detection, and
// accumulation. Deterministic given the config seed.
SessionResult run_session(const SessionConfig& config);

}  // namespace qframe

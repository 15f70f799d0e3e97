#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>

#include "qframe/framing.hpp"
#include "qframe/pulse.hpp"
#include "qframe/rng.hpp"

namespace qframe {

enum class StabilizerMode : std::uint8_t { oracle, feedback };

struct BobParams {
  double eta = 0.10;            // detector efficiency
  double p_dark = 3.7521112226e-4;  // per detector per gate; default from the
                                    // demo vacuum click-fraction calibration
  double residual_error = 0.002;    // feedback wrong-port target
  bool tap_enabled = false;         // demo configuration: off
  StabilizerMode stabilizer_mode = StabilizerMode::oracle;
  int feedback_max_iters = 1000;  // probe budget; config declares the
                                  // iterations-to-wall-clock mapping
  std::uint64_t seed = 0;

  void validate() const;
};

// Detector indices: Z arm after S1 (D_H, D_V), X arm after S2 (D_R maps to
// the H port of PBS3, D_L to the V port).
enum Detector : std::size_t { kDH = 0, kDV = 1, kDR = 2, kDL = 3 };

struct Resolved {
  int bit = 0;
  Basis basis = Basis::Z;
};

struct DetectionEvent {
  std::int64_t slot = 0;
  std::array<bool, 4> clicks{};
  std::optional<Resolved> resolved{};
  bool squashed = false;  // double-click within the resolved basis, random bit

  bool any_click() const { return clicks[0] || clicks[1] || clicks[2] || clicks[3]; }
};

struct StabilizerState {
  PolUnitary s1{};  // Z-arm compensator (anchor H)
  PolUnitary s2{};  // X-arm compensator (anchor R)
  std::int64_t last_locked_slot = 0;
  int iterations_used = 0;
};

// Intensity-only probe: wrong-port power fraction measured on strong
// reference light of the given anchor polarization, through a candidate
// compensator. anchor is H for the S1 arm and R for the S2 arm.
using WrongPortProbe = std::function<double(const PolUnitary& candidate, StateLabel anchor)>;

struct LockFailed : std::runtime_error {
  LockFailed(const std::string& what, double best, int iters)
      : std::runtime_error(what), best_wrong_port(best), iterations_used(iters) {}
  double best_wrong_port;
  int iterations_used;
};

// Exact lock from the known channel unitary.
StabilizerState stabilize_oracle(const PolUnitary& channel_u, std::int64_t slot);

// Iterative lock from wrong-port power only: coordinate descent over a
// three-angle waveplate parameterization of each compensator, one harmonic
// fit per angle. Throws LockFailed if the probe budget runs out before both
// arms reach residual_error.
StabilizerState stabilize_feedback(const WrongPortProbe& probe, const BobParams& params, Rng& rng,
                                   std::int64_t slot);

StabilizerState stabilize(StabilizerMode mode, const PolUnitary& channel_u,
                          const WrongPortProbe& probe, const BobParams& params, Rng& rng,
                          std::int64_t slot);

// Gated click law: 1 - (1-p_dark)·exp(-mu·0.5·q·eta), the 0.5 being the
// 50/50 basis splitter as Poisson thinning.
double click_probability(double mu, double q, double eta, double p_dark);

// Per-detector click probabilities for a channel-propagated quantum pulse.
// A pulse carrying the preparation-error flag has its correct-basis pair
// swapped.
std::array<double, 4> click_probabilities(const PulseSlot& pulse, const StabilizerState& stab,
                                          const BobParams& params);

// Samples the four detectors independently and resolves: one basis with
// clicks wins outright, both-basis events pick a basis uniformly, and a
// double click within the chosen basis squashes to a uniform random bit.
DetectionEvent sample_detection(std::int64_t slot, const std::array<double, 4>& probs, Rng& rng);

DetectionEvent detect_pulse(const PulseSlot& pulse, const StabilizerState& stab,
                            const BobParams& params, Rng& rng);

// Strong-pulse symbol thresholding. With a stabilizer the pulse is viewed
// through it (SPD-arm fallback read); without, the raw polarization is
// thresholded (classical tap, which sits before the stabilizers).
SymbolStream threshold_symbols(std::span<const PulseSlot> pulses, const PolUnitary* s1);

struct TapRead {
  bool tap_used = false;  // false when the tap is not fitted; caller falls
                          // back to scheduled-slot synchronization
  DecodeResult decode{};
};

// Reads a C-frame from the classical-arm pulse train via the fast detector.
TapRead read_cframe_tap(std::span<const PulseSlot> classical_arm, const BobParams& params);

}  // namespace qframe

#pragma once

#include <cstdint>
#include <utility>

#include "qframe/pulse.hpp"
#include "qframe/rng.hpp"

namespace qframe {

struct ChannelParams {
  double length_km = 0.005;  // proof-of-principle: 5 m patch fibre
  double loss_db_per_km = 0.2;
  double excess_loss_db = 0.0;
  double drift_sigma_per_slot = 0.0;  // radians per slot
  std::uint64_t seed = 0;

  void validate() const;
};

// 10^(-(length*loss + excess)/10)
double transmittance(const ChannelParams& params);

// Fibre state: current birefringence and the slot clock driving drift.
// Owned by exactly one session; the strong classical symbols and the faint
// quantum pulses see the same unitary, which is what makes C-frame-driven
// compensation meaningful.
class ChannelState {
 public:
  // Starts at a Haar-random birefringence drawn from the seed stream.
  explicit ChannelState(const ChannelParams& params);
  // Starts at a caller-chosen birefringence (tests, known channels).
  ChannelState(const ChannelParams& params, const PolUnitary& initial_u);

  const PolUnitary& u() const { return u_; }
  std::int64_t slot_clock() const { return slot_clock_; }

 private:
  PolUnitary u_;
  std::int64_t slot_clock_ = 0;
  Rng rng_;

  friend void advance(ChannelState& state, std::int64_t slots, const ChannelParams& params);
};

// Applies per-slot drift `slots` times and bumps the slot clock.
// Deterministic given the channel seed and slot count.
void advance(ChannelState& state, std::int64_t slots, const ChannelParams& params);

// Attenuates mu by the transmittance and rotates the polarization by the
// current birefringence. Classical and quantum pulses transform identically.
PulseSlot propagate(const PulseSlot& pulse, const ChannelState& state, const ChannelParams& params);

// Same, with the transmittance precomputed (hot loop variant).
PulseSlot propagate(const PulseSlot& pulse, const ChannelState& state, double transmittance_factor);

// Bob's 90/10 splitter feeding the classical detector. When disabled (the
// demo configuration), everything stays on the quantum arm.
// Returns {classical_arm, quantum_arm}.
std::pair<PulseSlot, PulseSlot> tap_split(const PulseSlot& pulse, bool tap_enabled);

inline constexpr double kTapFraction = 0.1;

}  // namespace qframe

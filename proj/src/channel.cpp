#include "qframe/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace qframe {

void ChannelParams::validate() const {
  if (length_km < 0.0) throw std::invalid_argument("channel.length_km must be >= 0");
  if (loss_db_per_km < 0.0) throw std::invalid_argument("channel.loss_db_per_km must be >= 0");
  if (excess_loss_db < 0.0) throw std::invalid_argument("channel.excess_loss_db must be >= 0");
  if (drift_sigma_per_slot < 0.0)
    throw std::invalid_argument("channel.drift_sigma_per_slot must be >= 0");
}

double transmittance(const ChannelParams& params) {
  params.validate();
  return std::pow(10.0, -(params.length_km * params.loss_db_per_km + params.excess_loss_db) / 10.0);
}

ChannelState::ChannelState(const ChannelParams& params) : rng_(params.seed) {
  u_ = random_unitary(rng_);
}

ChannelState::ChannelState(const ChannelParams& params, const PolUnitary& initial_u)
    : u_(initial_u), rng_(params.seed) {}

void advance(ChannelState& state, std::int64_t slots, const ChannelParams& params) {
  if (slots < 0) throw std::invalid_argument("cannot advance by a negative slot count");
  if (params.drift_sigma_per_slot == 0.0) {
    state.slot_clock_ += slots;
    return;
  }
  for (std::int64_t i = 0; i < slots; ++i)
    state.u_ = drift_step(state.u_, params.drift_sigma_per_slot, state.rng_);
  state.slot_clock_ += slots;
}

PulseSlot propagate(const PulseSlot& pulse, const ChannelState& state, const ChannelParams& params) {
  return propagate(pulse, state, transmittance(params));
}

PulseSlot propagate(const PulseSlot& pulse, const ChannelState& state, double transmittance_factor) {
  if (pulse.mu < 0.0) throw std::invalid_argument("pulse mean photon number must be >= 0");
  PulseSlot out = pulse;
  out.mu = pulse.mu * transmittance_factor;
  out.pol = apply(state.u(), pulse.pol);
  return out;
}

std::pair<PulseSlot, PulseSlot> tap_split(const PulseSlot& pulse, bool tap_enabled) {
  PulseSlot classical_arm = pulse;
  PulseSlot quantum_arm = pulse;
  if (tap_enabled) {
    classical_arm.mu = pulse.mu * kTapFraction;
    quantum_arm.mu = pulse.mu * (1.0 - kTapFraction);
  } else {
    classical_arm.mu = 0.0;
    quantum_arm.mu = pulse.mu;
  }
  return {classical_arm, quantum_arm};
}

}  // namespace qframe

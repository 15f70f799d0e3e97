#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "qframe/pulse.hpp"
#include "qframe/rng.hpp"

namespace qframe {

struct AliceParams {
  double mu_signal = 0.5;
  double mu_decoy = 0.1;
  double mu_vacuum = 0.0;
  double p_signal = 0.8;
  double p_decoy = 0.15;
  double p_vacuum = 0.05;
  // Intrinsic preparation error: per-pulse chance of the photon exiting the
  // wrong port of the correct-basis PBS. Uniform unless per-state values are set.
  double e_prep = 0.03;
  std::optional<std::array<double, 4>> per_state_e_prep{};  // indexed by StateLabel
  double mu_classical = 1e6;  // strong symbol pulses
  std::uint64_t seed = 0;

  void validate() const;
  double e_prep_for(StateLabel s) const;
  double mu_for(Intensity i) const;
};

struct RandomDraw {
  int bit = 0;
  Basis basis = Basis::Z;
  Intensity intensity = Intensity::signal;
};

// Uniform bit and basis, intensity per the configured probabilities.
RandomDraw choose_randoms(const AliceParams& params, Rng& rng);

// Faint pulse: (Z,0)->H (Z,1)->V (X,0)->R (X,1)->L, mu from the intensity
// class, preparation-imperfection flag drawn per state, truth recorded.
PulseSlot prepare_pulse(int bit, Basis basis, Intensity intensity, const AliceParams& params,
                        Rng& rng);

// Strong framing symbol: H for 0, V for 1, mu_classical, no truth record.
PulseSlot emit_classical_symbol(int bit, const AliceParams& params);

}  // namespace qframe

#pragma once

#include <cstdint>
#include <optional>

#include "qframe/polmath.hpp"

namespace qframe {

enum class PulseClass : std::uint8_t { classical, signal, decoy, vacuum, idle };

enum class Intensity : std::uint8_t { signal, decoy, vacuum };

const char* to_string(Intensity i);

constexpr PulseClass pulse_class_of(Intensity i) {
  switch (i) {
    case Intensity::signal: return PulseClass::signal;
    case Intensity::decoy: return PulseClass::decoy;
    case Intensity::vacuum: return PulseClass::vacuum;
  }
  return PulseClass::idle;
}

// Alice's secret per-pulse record; shared with the analysis stage over the
// abstracted authenticated channel, never serialized onto the wire.
struct PulseTruth {
  int bit = 0;
  Basis basis = Basis::Z;
  Intensity intensity = Intensity::signal;
};

// One clock slot of the optical link.
struct PulseSlot {
  std::int64_t slot = 0;
  PulseClass klass = PulseClass::idle;
  double mu = 0.0;  // mean photon number
  JonesVector pol{};
  std::optional<PulseTruth> truth{};
  // Preparation imperfection: set at the source, consumed at detection by
  // swapping the correct-basis port probabilities.
  bool prep_error = false;
};

constexpr bool is_quantum(PulseClass k) {
  return k == PulseClass::signal || k == PulseClass::decoy || k == PulseClass::vacuum;
}

}  // namespace qframe

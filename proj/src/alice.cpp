#include "qframe/alice.hpp"

#include <cmath>
#include <stdexcept>

namespace qframe {

const char* to_string(Intensity i) {
  switch (i) {
    case Intensity::signal: return "signal";
    case Intensity::decoy: return "decoy";
    case Intensity::vacuum: return "vacuum";
  }
  return "?";
}

void AliceParams::validate() const {
  if (!(mu_decoy >= 0.0 && mu_decoy < mu_signal))
    throw std::invalid_argument("alice: requires 0 <= mu_decoy < mu_signal");
  if (mu_vacuum != 0.0) throw std::invalid_argument("alice.mu_vacuum must be 0");
  if (p_signal < 0.0 || p_decoy < 0.0 || p_vacuum < 0.0)
    throw std::invalid_argument("alice: intensity probabilities must be >= 0");
  if (std::abs(p_signal + p_decoy + p_vacuum - 1.0) > 1e-12)
    throw std::invalid_argument("alice: intensity probabilities must sum to 1");
  if (e_prep < 0.0 || e_prep > 1.0) throw std::invalid_argument("alice.e_prep must be in [0,1]");
  if (per_state_e_prep)
    for (double e : *per_state_e_prep)
      if (e < 0.0 || e > 1.0)
        throw std::invalid_argument("alice.per_state_e_prep entries must be in [0,1]");
  if (mu_classical <= 0.0) throw std::invalid_argument("alice.mu_classical must be > 0");
}

double AliceParams::e_prep_for(StateLabel s) const {
  if (per_state_e_prep) return (*per_state_e_prep)[static_cast<std::size_t>(s)];
  return e_prep;
}

double AliceParams::mu_for(Intensity i) const {
  switch (i) {
    case Intensity::signal: return mu_signal;
    case Intensity::decoy: return mu_decoy;
    case Intensity::vacuum: return mu_vacuum;
  }
  return 0.0;
}

RandomDraw choose_randoms(const AliceParams& params, Rng& rng) {
  RandomDraw d;
  d.bit = rng.uniform_bit();
  d.basis = rng.uniform_bit() ? Basis::X : Basis::Z;
  const double u = rng.uniform();
  if (u < params.p_signal)
    d.intensity = Intensity::signal;
  else if (u < params.p_signal + params.p_decoy)
    d.intensity = Intensity::decoy;
  else
    d.intensity = Intensity::vacuum;
  return d;
}

PulseSlot prepare_pulse(int bit, Basis basis, Intensity intensity, const AliceParams& params,
                        Rng& rng) {
  const StateLabel state = label_for(basis, bit & 1);
  PulseSlot p;
  p.klass = pulse_class_of(intensity);
  p.mu = params.mu_for(intensity);
  p.pol = jones_of(state);
  p.truth = PulseTruth{bit & 1, basis, intensity};
  // Drawn for every pulse, vacuum included, to keep the stream layout fixed.
  p.prep_error = rng.bernoulli(params.e_prep_for(state));
  return p;
}

PulseSlot emit_classical_symbol(int bit, const AliceParams& params) {
  if (bit != 0 && bit != 1) throw std::invalid_argument("classical symbol bit must be 0 or 1");
  PulseSlot p;
  p.klass = PulseClass::classical;
  p.mu = params.mu_classical;
  p.pol = jones_of(bit ? StateLabel::V : StateLabel::H);
  return p;
}

}  // namespace qframe

#include "qframe/bob.hpp"

#include <cmath>
#include <string>

namespace qframe {

namespace {

constexpr double kPi = 3.14159265358979323846;

PolUnitary rot_z(double t) {
  const double c = std::cos(t / 2), s = std::sin(t / 2);
  return unchecked_unitary({Complex{c, -s}, Complex{0, 0}, Complex{0, 0}, Complex{c, s}});
}

PolUnitary rot_y(double t) {
  const double c = std::cos(t / 2), s = std::sin(t / 2);
  return unchecked_unitary({Complex{c, 0}, Complex{-s, 0}, Complex{s, 0}, Complex{c, 0}});
}

// Three-angle waveplate stack.
PolUnitary waveplate_stack(const std::array<double, 3>& a) {
  return rot_z(a[0]) * rot_y(a[1]) * rot_z(a[2]);
}

}  // namespace

void BobParams::validate() const {
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("bob.eta must be in [0,1]");
  if (p_dark < 0.0 || p_dark > 1.0) throw std::invalid_argument("bob.p_dark must be in [0,1]");
  if (residual_error < 0.0 || residual_error > 0.5)
    throw std::invalid_argument("bob.residual_error must be in [0,0.5]");
  if (feedback_max_iters < 1) throw std::invalid_argument("bob.feedback_max_iters must be >= 1");
}

StabilizerState stabilize_oracle(const PolUnitary& channel_u, std::int64_t slot) {
  StabilizerState st;
  st.s1 = compensator_for(channel_u, StateLabel::H);
  st.s2 = compensator_for(channel_u, StateLabel::R);
  st.last_locked_slot = slot;
  st.iterations_used = 0;
  return st;
}

StabilizerState stabilize_feedback(const WrongPortProbe& probe, const BobParams& params, Rng& rng,
                                   std::int64_t slot) {
  params.validate();
  int iters = 0;
  const int budget = params.feedback_max_iters;

  auto lock_arm = [&](StateLabel anchor) -> PolUnitary {
    std::array<double, 3> angles{0.0, 0.0, 0.0};
    double current = probe(waveplate_stack(angles), anchor);
    ++iters;
    double best = current;
    std::array<double, 3> best_angles = angles;

    while (current > params.residual_error && iters + 3 <= budget) {
      const double before_sweep = current;
      for (std::size_t k = 0; k < 3 && iters + 3 <= budget; ++k) {
        // The wrong-port power is a single harmonic in each angle:
        // f(cur+d) = a + b cos d + c sin d. Three probes pin it; jump to
        // its minimum.
        auto at = [&](double delta) {
          auto a = angles;
          a[k] += delta;
          return probe(waveplate_stack(a), anchor);
        };
        const double f0 = current;
        const double fp = at(kPi / 2);
        const double fm = at(-kPi / 2);
        iters += 2;
        const double a_c = 0.5 * (fp + fm);
        const double b_c = f0 - a_c;
        const double c_c = 0.5 * (fp - fm);
        if (std::abs(b_c) < 1e-18 && std::abs(c_c) < 1e-18) continue;  // flat coordinate
        angles[k] += kPi + std::atan2(c_c, b_c);
        current = probe(waveplate_stack(angles), anchor);
        ++iters;
        if (current < best) {
          best = current;
          best_angles = angles;
        }
      }
      if (current > params.residual_error && current > before_sweep - 1e-15) {
        // stalled; restart from a random point
        for (auto& a : angles) a = (2.0 * rng.uniform() - 1.0) * kPi;
        if (iters < budget) {
          current = probe(waveplate_stack(angles), anchor);
          ++iters;
        } else {
          break;
        }
      }
    }
    if (current < best) {
      best = current;
      best_angles = angles;
    }
    if (best > params.residual_error)
      throw LockFailed(std::string("stabilizer lock failed on anchor ") + to_string(anchor) +
                           ": best wrong-port fraction " + std::to_string(best),
                       best, iters);
    return waveplate_stack(best_angles).orthonormalized();
  };

  StabilizerState st;
  st.s1 = lock_arm(StateLabel::H);
  st.s2 = lock_arm(StateLabel::R);
  st.last_locked_slot = slot;
  st.iterations_used = iters;
  return st;
}

StabilizerState stabilize(StabilizerMode mode, const PolUnitary& channel_u,
                          const WrongPortProbe& probe, const BobParams& params, Rng& rng,
                          std::int64_t slot) {
  if (mode == StabilizerMode::oracle) return stabilize_oracle(channel_u, slot);
  return stabilize_feedback(probe, params, rng, slot);
}

double click_probability(double mu, double q, double eta, double p_dark) {
  return 1.0 - (1.0 - p_dark) * std::exp(-mu * 0.5 * q * eta);
}

std::array<double, 4> click_probabilities(const PulseSlot& pulse, const StabilizerState& stab,
                                          const BobParams& params) {
  const JonesVector z_arm = apply(stab.s1, pulse.pol);
  const JonesVector x_arm = apply(stab.s2, pulse.pol);
  double q_h = std::norm(z_arm.h);
  double q_v = std::norm(z_arm.v);
  double q_r = std::norm(x_arm.h);
  double q_l = std::norm(x_arm.v);
  if (pulse.prep_error && pulse.truth) {
    if (pulse.truth->basis == Basis::Z)
      std::swap(q_h, q_v);
    else
      std::swap(q_r, q_l);
  }
  return {click_probability(pulse.mu, q_h, params.eta, params.p_dark),
          click_probability(pulse.mu, q_v, params.eta, params.p_dark),
          click_probability(pulse.mu, q_r, params.eta, params.p_dark),
          click_probability(pulse.mu, q_l, params.eta, params.p_dark)};
}

DetectionEvent sample_detection(std::int64_t slot, const std::array<double, 4>& probs, Rng& rng) {
  DetectionEvent ev;
  ev.slot = slot;
  for (std::size_t d = 0; d < 4; ++d) ev.clicks[d] = rng.bernoulli(probs[d]);

  const bool z_any = ev.clicks[kDH] || ev.clicks[kDV];
  const bool x_any = ev.clicks[kDR] || ev.clicks[kDL];
  if (!z_any && !x_any) return ev;

  Basis basis;
  if (z_any && x_any)
    basis = rng.uniform_bit() ? Basis::X : Basis::Z;
  else
    basis = z_any ? Basis::Z : Basis::X;

  const bool c0 = basis == Basis::Z ? ev.clicks[kDH] : ev.clicks[kDR];
  const bool c1 = basis == Basis::Z ? ev.clicks[kDV] : ev.clicks[kDL];
  int bit;
  if (c0 && c1) {
    bit = rng.uniform_bit();
    ev.squashed = true;
  } else {
    bit = c1 ? 1 : 0;
  }
  ev.resolved = Resolved{bit, basis};
  return ev;
}

DetectionEvent detect_pulse(const PulseSlot& pulse, const StabilizerState& stab,
                            const BobParams& params, Rng& rng) {
  return sample_detection(pulse.slot, click_probabilities(pulse, stab, params), rng);
}

SymbolStream threshold_symbols(std::span<const PulseSlot> pulses, const PolUnitary* s1) {
  SymbolStream out;
  out.reserve(pulses.size());
  for (const PulseSlot& p : pulses) {
    if (p.klass == PulseClass::classical) {
      const JonesVector seen = s1 ? apply(*s1, p.pol) : p.pol;
      out.push_back(classical_symbol(std::norm(seen.v) > 0.5 ? 1 : 0));
    } else if (is_quantum(p.klass)) {
      out.push_back(Symbol{SymbolKind::quantum, 0});
    } else {
      out.push_back(Symbol{SymbolKind::idle, 0});
    }
  }
  return out;
}

TapRead read_cframe_tap(std::span<const PulseSlot> classical_arm, const BobParams& params) {
  TapRead r;
  if (!params.tap_enabled) return r;  // tap not fitted; flag for fallback
  r.tap_used = true;
  const SymbolStream symbols = threshold_symbols(classical_arm, nullptr);
  r.decode = decode_cframe(symbols);
  return r;
}

}  // namespace qframe

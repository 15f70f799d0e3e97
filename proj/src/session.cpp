#include "qframe/session.hpp"

#include <cmath>
#include <string>

namespace qframe {

void SessionConfig::validate() const {
  alice.validate();
  bob.validate();
  channel.validate();
  if (frames < 1) throw std::invalid_argument("session.frames must be >= 1");
  if (quantum_slots_per_frame < 1)
    throw std::invalid_argument("session.quantum_slots_per_frame must be >= 1");
  if (guard_slots < 0) throw std::invalid_argument("session.guard_slots must be >= 0");
  if (desync_abort_after < 1)
    throw std::invalid_argument("session.desync_abort_after must be >= 1");
}

void SessionTallies::add(const SessionTallies& o) {
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < 2; ++i) {
      cell[s][i].sent += o.cell[s][i].sent;
      cell[s][i].sifted += o.cell[s][i].sifted;
      cell[s][i].errors += o.cell[s][i].errors;
    }
  vacuum_sent += o.vacuum_sent;
  vacuum_any_click += o.vacuum_any_click;
  vacuum_sifted += o.vacuum_sifted;
  vacuum_sift_errors += o.vacuum_sift_errors;
  mismatch_bit0 += o.mismatch_bit0;
  mismatch_bit1 += o.mismatch_bit1;
  quantum_slots += o.quantum_slots;
  resolved_total += o.resolved_total;
  squashed_total += o.squashed_total;
}

namespace {

void sift_one(const PulseSlot& a, const DetectionEvent& ev, SessionTallies& t,
              std::vector<SiftedPair>* pairs) {
  if (!is_quantum(a.klass) || !a.truth) return;
  const PulseTruth& truth = *a.truth;
  const StateLabel state = label_for(truth.basis, truth.bit);
  t.quantum_slots += 1;

  if (truth.intensity == Intensity::vacuum) {
    t.vacuum_sent += 1;
    if (ev.any_click()) t.vacuum_any_click += 1;
  } else {
    const int col = truth.intensity == Intensity::signal ? 0 : 1;
    t.cell[static_cast<int>(state)][col].sent += 1;
  }

  if (!ev.resolved) return;
  t.resolved_total += 1;
  if (ev.squashed) t.squashed_total += 1;

  if (ev.resolved->basis != truth.basis) {
    // Discarded by sifting; tallied to verify the 50/50 split.
    (ev.resolved->bit ? t.mismatch_bit1 : t.mismatch_bit0) += 1;
    return;
  }

  const bool error = ev.resolved->bit != truth.bit;
  if (truth.intensity == Intensity::vacuum) {
    t.vacuum_sifted += 1;
    if (error) t.vacuum_sift_errors += 1;
    return;
  }
  const int col = truth.intensity == Intensity::signal ? 0 : 1;
  CellTally& cell = t.cell[static_cast<int>(state)][col];
  cell.sifted += 1;
  if (error) cell.errors += 1;
  if (pairs) pairs->push_back(SiftedPair{a.slot, state, truth.intensity, truth.bit,
                                         ev.resolved->bit});
}

QberRecord make_record(std::optional<StateLabel> state, Intensity intensity, std::int64_t n,
                       std::int64_t errors, bool click_fraction = false) {
  QberRecord r;
  r.state = state;
  r.intensity = intensity;
  r.click_fraction = click_fraction;
  r.n_sifted = n;
  r.n_errors = errors;
  if (n > 0) {
    const double q = static_cast<double>(errors) / static_cast<double>(n);
    r.qber = q;
    r.stat_error = std::sqrt(q * (1.0 - q) / static_cast<double>(n));
  }
  return r;
}

}  // namespace

SiftResult sift(std::span<const PulseSlot> alice_slots, std::span<const DetectionEvent> events,
                bool keep_pairs) {
  if (alice_slots.size() != events.size())
    throw std::invalid_argument("sift requires slot-aligned records");
  SiftResult r;
  for (std::size_t i = 0; i < alice_slots.size(); ++i)
    sift_one(alice_slots[i], events[i], r.tallies, keep_pairs ? &r.pairs : nullptr);
  return r;
}

std::vector<QberRecord> qber_table(const SessionTallies& t) {
  std::vector<QberRecord> out;
  for (int col = 0; col < 2; ++col) {
    const Intensity inten = col == 0 ? Intensity::signal : Intensity::decoy;
    std::int64_t pooled_n = 0, pooled_e = 0;
    for (int s = 0; s < 4; ++s) {
      const CellTally& c = t.cell[s][col];
      out.push_back(make_record(static_cast<StateLabel>(s), inten, c.sifted, c.errors));
      pooled_n += c.sifted;
      pooled_e += c.errors;
    }
    out.push_back(make_record(std::nullopt, inten, pooled_n, pooled_e));
  }
  // Vacuum row: fraction of vacuum slots with any click (reported as a click
  // fraction, not a bit error rate).
  out.push_back(make_record(std::nullopt, Intensity::vacuum, t.vacuum_sent, t.vacuum_any_click,
                            /*click_fraction=*/true));
  return out;
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

DecoyEstimate decoy_bounds(double q_mu, double e_mu, double q_nu, double e_nu, double y0,
                           double mu, double nu) {
  if (!(nu > 0.0 && nu < mu))
    throw std::invalid_argument("decoy bounds require 0 < nu < mu");
  if (!(q_mu > 0.0 && q_mu <= 1.0 && q_nu > 0.0 && q_nu <= 1.0))
    throw std::invalid_argument("decoy bounds require gains in (0,1]");
  if (y0 < 0.0) throw std::invalid_argument("decoy bounds require Y0 >= 0");

  DecoyEstimate d;
  d.q_mu = q_mu;
  d.e_mu = e_mu;
  d.q_nu = q_nu;
  d.e_nu = e_nu;
  d.y0 = y0;

  const double mu2 = mu * mu;
  double y1 = (mu / (mu * nu - nu * nu)) *
              (q_nu * std::exp(nu) - q_mu * std::exp(mu) * (nu * nu) / mu2 -
               ((mu2 - nu * nu) / mu2) * y0);
  if (y1 < 0.0) {
    y1 = 0.0;
    d.degenerate = true;
  }
  d.y1_lower = y1;
  d.q1_lower = y1 * mu * std::exp(-mu);

  if (y1 > 0.0) {
    double e1 = (e_nu * q_nu * std::exp(nu) - 0.5 * y0) / (y1 * nu);
    e1 = std::min(std::max(e1, 0.0), 0.5);
    d.e1_upper = e1;
  }

  const double e1_term = d.e1_upper ? (1.0 - binary_entropy(*d.e1_upper)) : 0.0;
  d.rate_lower = kSiftingFactor * (-q_mu * kErrorCorrectionEfficiency * binary_entropy(e_mu) +
                                   d.q1_lower * e1_term);
  return d;
}

OracleResult analytic_qber_oracle(double mu, double t, double eta, double p_dark, double e_opt) {
  const double y0c = 1.0 - (1.0 - p_dark) * (1.0 - p_dark);
  const double sig = 1.0 - std::exp(-mu * t * 0.5 * eta);
  OracleResult r;
  r.gain = y0c + sig;
  r.qber = r.gain > 0.0 ? (0.5 * y0c + e_opt * sig) / r.gain : 0.0;
  return r;
}

std::optional<DecoyEstimate> decoy_from_tallies(const SessionTallies& t, double mu, double nu) {
  std::int64_t sent_mu = 0, sift_mu = 0, err_mu = 0;
  std::int64_t sent_nu = 0, sift_nu = 0, err_nu = 0;
  for (int s = 0; s < 4; ++s) {
    sent_mu += t.cell[s][0].sent;
    sift_mu += t.cell[s][0].sifted;
    err_mu += t.cell[s][0].errors;
    sent_nu += t.cell[s][1].sent;
    sift_nu += t.cell[s][1].sifted;
    err_nu += t.cell[s][1].errors;
  }
  if (sent_mu == 0 || sift_mu == 0 || sent_nu == 0 || sift_nu == 0 || t.vacuum_sent == 0 ||
      !(nu > 0.0 && nu < mu))
    return std::nullopt;
  const double q_mu = static_cast<double>(sift_mu) / (kSiftingFactor * sent_mu);
  const double e_mu = static_cast<double>(err_mu) / sift_mu;
  const double q_nu = static_cast<double>(sift_nu) / (kSiftingFactor * sent_nu);
  const double e_nu = static_cast<double>(err_nu) / sift_nu;
  const double y0 =
      static_cast<double>(t.vacuum_sifted) / (kSiftingFactor * t.vacuum_sent);
  return decoy_bounds(std::min(q_mu, 1.0), e_mu, std::min(q_nu, 1.0), e_nu, y0, mu, nu);
}

namespace {

// Click probabilities for the static-channel hot path: keyed by prepared
// state, prep-error flag, and intensity class. Valid while (U, stabilizer)
// are unchanged.
struct ClickProbCache {
  std::array<double, 4> p[4][2][3];

  void rebuild(const PolUnitary& u, const StabilizerState& stab, const AliceParams& alice,
               const BobParams& bob, double transmittance_factor) {
    for (int s = 0; s < 4; ++s)
      for (int f = 0; f < 2; ++f)
        for (int i = 0; i < 3; ++i) {
          const auto label = static_cast<StateLabel>(s);
          const auto inten = static_cast<Intensity>(i);
          PulseSlot pulse;
          pulse.klass = pulse_class_of(inten);
          pulse.mu = alice.mu_for(inten) * transmittance_factor;
          pulse.pol = apply(u, jones_of(label));
          pulse.truth = PulseTruth{bit_of(label), basis_of(label), inten};
          pulse.prep_error = f == 1;
          p[s][f][i] = click_probabilities(pulse, stab, bob);
        }
  }

  const std::array<double, 4>& lookup(StateLabel s, bool flag, Intensity i) const {
    return p[static_cast<int>(s)][flag ? 1 : 0][static_cast<int>(i)];
  }
};

}  // namespace

SessionResult run_session(const SessionConfig& config) {
  config.validate();

  AliceParams alice = config.alice;
  BobParams bob = config.bob;
  ChannelParams chan_params = config.channel;
  // Substreams derived from the session seed; module seeds reflect them.
  alice.seed = derive_seed(config.seed, 1);
  bob.seed = derive_seed(config.seed, 2);
  chan_params.seed = derive_seed(config.seed, 3);

  Rng alice_rng(alice.seed);
  Rng bob_rng(bob.seed);
  ChannelState channel(chan_params);
  const double trans = transmittance(chan_params);
  const double tap_factor = bob.tap_enabled ? (1.0 - kTapFraction) : 1.0;
  const bool static_channel = chan_params.drift_sigma_per_slot == 0.0;

  SessionResult result;
  result.seed = config.seed;

  CFrame cframe;
  cframe.dst_addr = config.dst_addr;
  cframe.src_addr = config.src_addr;
  cframe.encoding_id = kEncodingPolarization;
  cframe.protocol_id = kProtocolDecoyBb84;

  StabilizerState stab;
  bool locked = false;
  ClickProbCache cache;
  bool cache_valid = false;

  const WrongPortProbe probe = [&](const PolUnitary& candidate, StateLabel anchor) {
    return detection_prob(apply(candidate, apply(channel.u(), jones_of(anchor))),
                          jones_of(StateLabel::V));
  };
  auto wrong_port_now = [&]() {
    const double p1 = probe(stab.s1, StateLabel::H);
    const double p2 = probe(stab.s2, StateLabel::R);
    return std::max(p1, p2);
  };

  std::int64_t slot_index = 0;
  int consecutive_decode_failures = 0;

  std::vector<PulseSlot> quantum_sent;
  std::vector<DetectionEvent> quantum_events;
  quantum_sent.reserve(static_cast<std::size_t>(config.quantum_slots_per_frame));
  quantum_events.reserve(static_cast<std::size_t>(config.quantum_slots_per_frame));

  std::vector<PulseSlot> classical_arm_rx;
  std::vector<PulseSlot> quantum_arm_classical_rx;

  for (std::int64_t f = 0; f < config.frames; ++f) {
    cframe.seq = static_cast<std::uint16_t>(f & 0xFFFF);
    const SymbolStream classical_symbols = encode_cframe(cframe);
    result.frames.frames_sent += 1;

    // --- C-frame transmission -------------------------------------------
    classical_arm_rx.clear();
    quantum_arm_classical_rx.clear();
    for (const Symbol& sym : classical_symbols) {
      PulseSlot tx = emit_classical_symbol(sym.bit, alice);
      tx.slot = slot_index;
      const PulseSlot rx = propagate(tx, channel, trans);
      auto [c_arm, q_arm] = tap_split(rx, bob.tap_enabled);
      classical_arm_rx.push_back(c_arm);
      quantum_arm_classical_rx.push_back(q_arm);
      advance(channel, 1, chan_params);
      ++slot_index;
    }

    // --- stabilization (frame-start reference light) --------------------
    // The incoming C-frame provides the strong reference. Re-lock when the
    // wrong-port fraction has drifted past twice the residual target.
    const bool need_lock = !locked || wrong_port_now() > 2.0 * bob.residual_error + 1e-12;
    if (need_lock) {
      try {
        stab = stabilize(bob.stabilizer_mode, channel.u(), probe, bob, bob_rng, slot_index);
        result.frames.stabilizer_iterations += stab.iterations_used;
        if (locked) result.frames.restabilizations += 1;
        locked = true;
        cache_valid = false;
      } catch (const LockFailed&) {
        result.frames.lock_failures += 1;
        if (!locked)
          throw SessionAborted("initial stabilization failed within the iteration budget");
      }
    }

    // --- C-frame decoding -------------------------------------------------
    // Tap path reads raw polarization ahead of the stabilizers; without the
    // tap, symbols are read through the locked Z-arm compensator.
    DecodeResult decoded;
    const TapRead tap = read_cframe_tap(classical_arm_rx, bob);
    if (tap.tap_used) {
      decoded = tap.decode;
    } else {
      decoded = decode_cframe(threshold_symbols(quantum_arm_classical_rx, &stab.s1));
    }
    bool frame_ok = decoded.ok();
    if (frame_ok && (decoded.frame.dst_addr != config.dst_addr ||
                     decoded.frame.src_addr != config.src_addr)) {
      frame_ok = false;
      result.frames.address_mismatches += 1;
    }
    if (frame_ok) {
      result.frames.frames_decoded += 1;
      consecutive_decode_failures = 0;
    } else {
      result.frames.decode_errors += 1;
      if (++consecutive_decode_failures >= config.desync_abort_after)
        throw SessionAborted("framing desync: " + std::to_string(consecutive_decode_failures) +
                             " consecutive undecodable frames (last error: " +
                             to_string(decoded.error) + ") at frame " + std::to_string(f));
    }

    // --- guard slots -----------------------------------------------------
    advance(channel, config.guard_slots, chan_params);
    slot_index += config.guard_slots;

    // --- quantum payload ---------------------------------------------------
    quantum_sent.clear();
    quantum_events.clear();
    if (static_channel && !cache_valid) {
      cache.rebuild(channel.u(), stab, alice, bob, trans * tap_factor);
      cache_valid = true;
    }
    for (std::int64_t qs = 0; qs < config.quantum_slots_per_frame; ++qs) {
      const RandomDraw draw = choose_randoms(alice, alice_rng);
      PulseSlot tx = prepare_pulse(draw.bit, draw.basis, draw.intensity, alice, alice_rng);
      tx.slot = slot_index;

      DetectionEvent ev;
      if (static_channel) {
        const StateLabel label = label_for(draw.basis, draw.bit);
        ev = sample_detection(slot_index, cache.lookup(label, tx.prep_error, draw.intensity),
                              bob_rng);
      } else {
        const PulseSlot rx = propagate(tx, channel, trans);
        const auto arms = tap_split(rx, bob.tap_enabled);
        ev = detect_pulse(arms.second, stab, bob, bob_rng);
      }
      quantum_sent.push_back(std::move(tx));
      quantum_events.push_back(ev);
      advance(channel, 1, chan_params);
      ++slot_index;
    }

    const SiftResult sifted = sift(quantum_sent, quantum_events, config.record_sifted_bits);
    result.tallies.add(sifted.tallies);
    if (config.record_sifted_bits)
      result.sifted.insert(result.sifted.end(), sifted.pairs.begin(), sifted.pairs.end());
  }

  result.total_slots = slot_index;
  result.qber_records = qber_table(result.tallies);
  result.decoy = decoy_from_tallies(result.tallies, alice.mu_signal, alice.mu_decoy);
  return result;
}

}  // namespace qframe

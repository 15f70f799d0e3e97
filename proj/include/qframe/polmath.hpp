#pragma once

#include <array>
#include <complex>
#include <cstdint>

#include "qframe/rng.hpp"

namespace qframe {

using Complex = std::complex<double>;

enum class Basis : std::uint8_t { Z, X };

// The four protocol polarization states. H/V span the Z basis, R/L (circular) the X basis.
enum class StateLabel : std::uint8_t { H, V, R, L };

constexpr Basis basis_of(StateLabel s) {
  return (s == StateLabel::H || s == StateLabel::V) ? Basis::Z : Basis::X;
}

constexpr int bit_of(StateLabel s) {
  return (s == StateLabel::V || s == StateLabel::L) ? 1 : 0;
}

constexpr StateLabel label_for(Basis b, int bit) {
  if (b == Basis::Z) return bit ? StateLabel::V : StateLabel::H;
  return bit ? StateLabel::L : StateLabel::R;
}

const char* to_string(StateLabel s);
const char* to_string(Basis b);

// Pure polarization state (c_h, c_v). Factories and transforms keep it
// normalized to 1e-12; raw aggregate construction is possible for tests.
struct JonesVector {
  Complex h{1.0, 0.0};
  Complex v{0.0, 0.0};

  double norm_sq() const { return std::norm(h) + std::norm(v); }

  // Rescales to unit norm; throws on (near-)zero input.
  static JonesVector normalized(Complex h, Complex v);
};

// <a|b>
Complex inner(const JonesVector& a, const JonesVector& b);

// |<a|b>| — equality of states up to global phase means overlap == 1.
double overlap(const JonesVector& a, const JonesVector& b);

// 2x2 unitary acting on Jones vectors (channel birefringence, compensators).
class PolUnitary {
 public:
  PolUnitary() : m_{Complex{1, 0}, Complex{0, 0}, Complex{0, 0}, Complex{1, 0}} {}

  // Validates U†U = I and |det U| = 1 within 1e-12; throws std::invalid_argument.
  static PolUnitary from_matrix(Complex m00, Complex m01, Complex m10, Complex m11);

  static PolUnitary identity() { return PolUnitary(); }

  Complex at(int row, int col) const { return m_[static_cast<std::size_t>(row * 2 + col)]; }

  PolUnitary dagger() const;
  PolUnitary operator*(const PolUnitary& rhs) const;

  // Gram-Schmidt re-projection onto the unitary group; exact up to rounding.
  PolUnitary orthonormalized() const;

  // max elementwise |U†U - I|, for tests and invariant checks
  double unitarity_defect() const;

 private:
  struct Unchecked {};
  PolUnitary(Unchecked, const std::array<Complex, 4>& m) : m_(m) {}

  std::array<Complex, 4> m_;

  friend PolUnitary unchecked_unitary(const std::array<Complex, 4>& m);
};

PolUnitary unchecked_unitary(const std::array<Complex, 4>& m);

// Canonical Jones vectors: H=(1,0), V=(0,1), R=(1,-i)/sqrt2, L=(1,+i)/sqrt2.
JonesVector jones_of(StateLabel label);

// |<analyzer|state>|^2. Both inputs must be normalized within 1e-9.
double detection_prob(const JonesVector& state, const JonesVector& analyzer);

// U * state, renormalized.
JonesVector apply(const PolUnitary& u, const JonesVector& state);

// Haar-distributed SU(2) sample (global phase is unobservable here).
PolUnitary random_unitary(Rng& rng);

// One birefringence drift step: R·U with R = exp(-i θ n·σ), axis n uniform on
// the sphere, θ ~ Normal(0, sigma). sigma = 0 returns U unchanged. The result
// is re-orthonormalized, so arbitrarily long drift chains stay unitary.
PolUnitary drift_step(const PolUnitary& u, double sigma, Rng& rng);

// Compensator S with S·U·jones_of(anchor) = jones_of(H) up to global phase.
// anchor must be H (PBS2 arm) or R (PBS3 arm, circular reference light).
PolUnitary compensator_for(const PolUnitary& u, StateLabel anchor);

}  // namespace qframe

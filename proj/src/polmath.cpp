#include "qframe/polmath.hpp"

#include <cmath>
#include <stdexcept>

namespace qframe {

namespace {
constexpr double kNormTol = 1e-9;
constexpr double kUnitaryTol = 1e-12;
}  // namespace

const char* to_string(StateLabel s) {
  switch (s) {
    case StateLabel::H: return "H";
    case StateLabel::V: return "V";
    case StateLabel::R: return "R";
    case StateLabel::L: return "L";
  }
  return "?";
}

const char* to_string(Basis b) { return b == Basis::Z ? "Z" : "X"; }

JonesVector JonesVector::normalized(Complex h, Complex v) {
  const double n = std::sqrt(std::norm(h) + std::norm(v));
  if (n < 1e-15) throw std::invalid_argument("cannot normalize zero Jones vector");
  return JonesVector{h / n, v / n};
}

Complex inner(const JonesVector& a, const JonesVector& b) {
  return std::conj(a.h) * b.h + std::conj(a.v) * b.v;
}

double overlap(const JonesVector& a, const JonesVector& b) { return std::abs(inner(a, b)); }

PolUnitary unchecked_unitary(const std::array<Complex, 4>& m) {
  return PolUnitary(PolUnitary::Unchecked{}, m);
}

PolUnitary PolUnitary::from_matrix(Complex m00, Complex m01, Complex m10, Complex m11) {
  PolUnitary u = unchecked_unitary({m00, m01, m10, m11});
  if (u.unitarity_defect() > kUnitaryTol)
    throw std::invalid_argument("matrix is not unitary within 1e-12");
  const Complex det = m00 * m11 - m01 * m10;
  if (std::abs(std::abs(det) - 1.0) > kUnitaryTol)
    throw std::invalid_argument("matrix determinant does not have unit modulus");
  return u;
}

PolUnitary PolUnitary::dagger() const {
  return unchecked_unitary({std::conj(m_[0]), std::conj(m_[2]), std::conj(m_[1]), std::conj(m_[3])});
}

PolUnitary PolUnitary::operator*(const PolUnitary& rhs) const {
  const auto& a = m_;
  const auto& b = rhs.m_;
  return unchecked_unitary({a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
                            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]});
}

PolUnitary PolUnitary::orthonormalized() const {
  // columns c0 = (m00, m10), c1 = (m01, m11)
  Complex c00 = m_[0], c01 = m_[2];
  const double n0 = std::sqrt(std::norm(c00) + std::norm(c01));
  c00 /= n0;
  c01 /= n0;
  Complex c10 = m_[1], c11 = m_[3];
  const Complex proj = std::conj(c00) * c10 + std::conj(c01) * c11;
  c10 -= proj * c00;
  c11 -= proj * c01;
  const double n1 = std::sqrt(std::norm(c10) + std::norm(c11));
  c10 /= n1;
  c11 /= n1;
  return unchecked_unitary({c00, c10, c01, c11});
}

double PolUnitary::unitarity_defect() const {
  // U†U - I
  const auto& m = m_;
  const Complex g00 = std::conj(m[0]) * m[0] + std::conj(m[2]) * m[2] - 1.0;
  const Complex g01 = std::conj(m[0]) * m[1] + std::conj(m[2]) * m[3];
  const Complex g10 = std::conj(m[1]) * m[0] + std::conj(m[3]) * m[2];
  const Complex g11 = std::conj(m[1]) * m[1] + std::conj(m[3]) * m[3] - 1.0;
  double d = std::abs(g00);
  d = std::max(d, std::abs(g01));
  d = std::max(d, std::abs(g10));
  d = std::max(d, std::abs(g11));
  return d;
}

JonesVector jones_of(StateLabel label) {
  constexpr double s = 0.70710678118654752440;  // 1/sqrt(2)
  switch (label) {
    case StateLabel::H: return JonesVector{{1.0, 0.0}, {0.0, 0.0}};
    case StateLabel::V: return JonesVector{{0.0, 0.0}, {1.0, 0.0}};
    case StateLabel::R: return JonesVector{{s, 0.0}, {0.0, -s}};
    case StateLabel::L: return JonesVector{{s, 0.0}, {0.0, s}};
  }
  throw std::invalid_argument("invalid state label");
}

double detection_prob(const JonesVector& state, const JonesVector& analyzer) {
  if (std::abs(state.norm_sq() - 1.0) > kNormTol ||
      std::abs(analyzer.norm_sq() - 1.0) > kNormTol)
    throw std::invalid_argument("detection_prob requires normalized states");
  return std::norm(inner(analyzer, state));
}

JonesVector apply(const PolUnitary& u, const JonesVector& state) {
  return JonesVector::normalized(u.at(0, 0) * state.h + u.at(0, 1) * state.v,
                                 u.at(1, 0) * state.h + u.at(1, 1) * state.v);
}

PolUnitary random_unitary(Rng& rng) {
  // Haar on SU(2): uniform point on S^3 -> [[a, -b*],[b, a*]]
  double x0, x1, x2, x3, n;
  do {
    x0 = rng.gauss();
    x1 = rng.gauss();
    x2 = rng.gauss();
    x3 = rng.gauss();
    n = std::sqrt(x0 * x0 + x1 * x1 + x2 * x2 + x3 * x3);
  } while (n < 1e-12);
  const Complex a{x0 / n, x1 / n};
  const Complex b{x2 / n, x3 / n};
  return unchecked_unitary({a, -std::conj(b), b, std::conj(a)}).orthonormalized();
}

PolUnitary drift_step(const PolUnitary& u, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("drift sigma must be >= 0");
  if (sigma == 0.0) return u;
  double ax, ay, az, n;
  do {
    ax = rng.gauss();
    ay = rng.gauss();
    az = rng.gauss();
    n = std::sqrt(ax * ax + ay * ay + az * az);
  } while (n < 1e-12);
  ax /= n;
  ay /= n;
  az /= n;
  const double theta = rng.gauss(0.0, sigma);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  // R = cosθ·I - i sinθ·(n·σ)
  const PolUnitary r = unchecked_unitary({Complex{c, -s * az}, Complex{-s * ay, -s * ax},
                                          Complex{s * ay, -s * ax}, Complex{c, s * az}});
  return (r * u).orthonormalized();
}

PolUnitary compensator_for(const PolUnitary& u, StateLabel anchor) {
  constexpr double s = 0.70710678118654752440;
  PolUnitary b;
  switch (anchor) {
    case StateLabel::H:
      b = PolUnitary::identity();
      break;
    case StateLabel::R:
      // maps R -> H and L -> V: |H><R| + |V><L|
      b = unchecked_unitary({Complex{s, 0.0}, Complex{0.0, s}, Complex{s, 0.0}, Complex{0.0, -s}});
      break;
    default:
      throw std::invalid_argument("compensator anchor must be H or R");
  }
  return (b * u.dagger()).orthonormalized();
}

}  // namespace qframe

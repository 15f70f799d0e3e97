#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "qframe/pulse.hpp"

namespace qframe {

// Wire-format constants. Classical bits ride on the stabilization-anchor
// basis: bit 0 -> H, bit 1 -> V. Bytes are serialized MSB-first.
inline constexpr std::size_t kPreambleSymbols = 16;  // alternating, starting H
inline constexpr std::uint8_t kSfd = 0xD5;
inline constexpr std::size_t kHeaderBytes = 10;  // dst, src, enc, proto, seq, payload_len
inline constexpr std::size_t kFcsBytes = 4;
inline constexpr std::size_t kMaxPayload = 1024;

inline constexpr std::uint8_t kEncodingPolarization = 0x01;
inline constexpr std::uint8_t kEncodingTimeBin = 0x02;
inline constexpr std::uint8_t kProtocolBb84 = 0x01;
inline constexpr std::uint8_t kProtocolDecoyBb84 = 0x02;
inline constexpr std::uint8_t kProtocolB92 = 0x03;

// Classical control frame.
struct CFrame {
  std::uint16_t dst_addr = 0;
  std::uint16_t src_addr = 0;
  std::uint8_t encoding_id = kEncodingPolarization;
  std::uint8_t protocol_id = kProtocolDecoyBb84;
  std::uint16_t seq = 0;
  std::vector<std::uint8_t> payload{};
  std::uint32_t fcs = 0;  // CRC-32 over header+payload; recomputed by the encoder

  bool operator==(const CFrame&) const = default;
};

enum class SymbolKind : std::uint8_t { classical, quantum, idle };

// One wire slot: a strong classical symbol (H/V bit), a faint quantum
// placeholder, or an idle guard slot.
struct Symbol {
  SymbolKind kind = SymbolKind::idle;
  std::uint8_t bit = 0;  // valid iff kind == classical; 0 = H, 1 = V

  bool operator==(const Symbol&) const = default;
};

using SymbolStream = std::vector<Symbol>;

inline Symbol classical_symbol(int bit) {
  return Symbol{SymbolKind::classical, static_cast<std::uint8_t>(bit & 1)};
}

// CRC-32, IEEE polynomial, reflected, init 0xFFFFFFFF, final xor 0xFFFFFFFF.
std::uint32_t crc32_ieee(std::span<const std::uint8_t> data);

// Header + payload serialization (the CRC input).
std::vector<std::uint8_t> frame_bytes(const CFrame& frame);
std::uint32_t compute_fcs(const CFrame& frame);

struct EncodingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Preamble, SFD, header fields, payload, fcs as classical symbols.
// The fcs field of the input is ignored and recomputed.
SymbolStream encode_cframe(const CFrame& frame);

enum class DecodeError : std::uint8_t { ok, no_preamble, truncated_frame, bad_crc, bad_length };

const char* to_string(DecodeError e);

struct DecodeResult {
  DecodeError error = DecodeError::no_preamble;
  CFrame frame{};
  std::size_t frame_start = 0;  // offset of the first preamble symbol
  std::size_t end_offset = 0;   // one past the last fcs symbol; quantum slots start here + guards
  bool ok() const { return error == DecodeError::ok; }
};

// Total decoder: scans for preamble+SFD, delimits the frame by the contiguous
// classical-symbol run (falling back to the run tail for the fcs when the
// length field's claimed extent does not fit), validates CRC then length.
// Never throws; returns a typed error for any input.
DecodeResult decode_cframe(std::span<const Symbol> stream);

struct ScheduleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One quantum frame: encoded control frame, then guard slots, then the
// quantum payload slots. Classical symbols always precede quantum slots.
struct QFramePlan {
  CFrame cframe{};
  int guard_slots = 8;
  int quantum_slot_count = 0;
};

// payload_spec.size() must equal plan.quantum_slot_count and every descriptor
// must be a quantum-class pulse.
SymbolStream schedule_qframe(const QFramePlan& plan, std::span<const PulseSlot> payload_spec);

// Symbol count of an encoded frame with the given payload length.
constexpr std::size_t encoded_symbol_count(std::size_t payload_len) {
  return kPreambleSymbols + 8 + 8 * (kHeaderBytes + payload_len + kFcsBytes);
}

}  // namespace qframe

#include "qframe/framing.hpp"

#include <array>

namespace qframe {

namespace {

const std::array<std::uint32_t, 256>& crc_table() {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
      t[i] = c;
    }
    return t;
  }();
  return table;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void push_byte_symbols(SymbolStream& out, std::uint8_t byte) {
  for (int i = 7; i >= 0; --i) out.push_back(classical_symbol((byte >> i) & 1));
}

// Reads 8 classical bits MSB-first; caller guarantees bounds and kind.
std::uint8_t read_byte(std::span<const Symbol> s, std::size_t off) {
  std::uint8_t b = 0;
  for (std::size_t i = 0; i < 8; ++i) b = static_cast<std::uint8_t>((b << 1) | (s[off + i].bit & 1));
  return b;
}

bool preamble_matches(std::span<const Symbol> s, std::size_t off) {
  for (std::size_t i = 0; i < kPreambleSymbols; ++i) {
    const Symbol& sym = s[off + i];
    if (sym.kind != SymbolKind::classical || sym.bit != (i & 1)) return false;
  }
  for (std::size_t i = 0; i < 8; ++i)
    if (s[off + kPreambleSymbols + i].kind != SymbolKind::classical) return false;
  return read_byte(s, off + kPreambleSymbols) == kSfd;
}

}  // namespace

std::uint32_t crc32_ieee(std::span<const std::uint8_t> data) {
  const auto& t = crc_table();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t b : data) crc = t[(crc ^ b) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

std::vector<std::uint8_t> frame_bytes(const CFrame& frame) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(kHeaderBytes + frame.payload.size());
  put_u16(bytes, frame.dst_addr);
  put_u16(bytes, frame.src_addr);
  bytes.push_back(frame.encoding_id);
  bytes.push_back(frame.protocol_id);
  put_u16(bytes, frame.seq);
  put_u16(bytes, static_cast<std::uint16_t>(frame.payload.size()));
  bytes.insert(bytes.end(), frame.payload.begin(), frame.payload.end());
  return bytes;
}

std::uint32_t compute_fcs(const CFrame& frame) { return crc32_ieee(frame_bytes(frame)); }

SymbolStream encode_cframe(const CFrame& frame) {
  if (frame.payload.size() > kMaxPayload)
    throw EncodingError("payload exceeds 1024 bytes");
  SymbolStream out;
  out.reserve(encoded_symbol_count(frame.payload.size()));
  for (std::size_t i = 0; i < kPreambleSymbols; ++i)
    out.push_back(classical_symbol(static_cast<int>(i & 1)));
  push_byte_symbols(out, kSfd);
  const auto bytes = frame_bytes(frame);
  for (std::uint8_t b : bytes) push_byte_symbols(out, b);
  const std::uint32_t fcs = crc32_ieee(bytes);
  push_byte_symbols(out, static_cast<std::uint8_t>(fcs >> 24));
  push_byte_symbols(out, static_cast<std::uint8_t>(fcs >> 16));
  push_byte_symbols(out, static_cast<std::uint8_t>(fcs >> 8));
  push_byte_symbols(out, static_cast<std::uint8_t>(fcs));
  return out;
}

const char* to_string(DecodeError e) {
  switch (e) {
    case DecodeError::ok: return "ok";
    case DecodeError::no_preamble: return "no-preamble";
    case DecodeError::truncated_frame: return "truncated-frame";
    case DecodeError::bad_crc: return "bad-crc";
    case DecodeError::bad_length: return "bad-length";
  }
  return "?";
}

DecodeResult decode_cframe(std::span<const Symbol> stream) {
  DecodeResult res;
  const std::size_t sync_len = kPreambleSymbols + 8;
  if (stream.size() < sync_len) return res;  // no_preamble

  std::size_t start = 0;
  bool found = false;
  for (; start + sync_len <= stream.size(); ++start) {
    if (preamble_matches(stream, start)) {
      found = true;
      break;
    }
  }
  if (!found) return res;

  res.frame_start = start;
  const std::size_t body_off = start + sync_len;

  // The classical run after the SFD is the physical frame extent: strong
  // symbols end where guard/quantum slots begin.
  std::size_t run_bits = 0;
  while (body_off + run_bits < stream.size() &&
         stream[body_off + run_bits].kind == SymbolKind::classical)
    ++run_bits;

  constexpr std::size_t min_bits = 8 * (kHeaderBytes + kFcsBytes);
  if (run_bits < min_bits) {
    res.error = DecodeError::truncated_frame;
    return res;
  }

  const std::uint16_t claimed_len =
      static_cast<std::uint16_t>((read_byte(stream, body_off + 64) << 8) |
                                 read_byte(stream, body_off + 72));

  // Prefer the length-directed fcs position when it fits inside the run;
  // otherwise the run tail holds the fcs and the CRC covers the rest.
  std::size_t body_bytes;
  const std::size_t claimed_bits = 8 * (kHeaderBytes + std::size_t{claimed_len} + kFcsBytes);
  if (claimed_bits <= run_bits) {
    body_bytes = kHeaderBytes + claimed_len;
  } else {
    if (run_bits % 8 != 0) {
      res.error = DecodeError::truncated_frame;
      return res;
    }
    body_bytes = run_bits / 8 - kFcsBytes;
  }

  std::vector<std::uint8_t> body(body_bytes);
  for (std::size_t i = 0; i < body_bytes; ++i) body[i] = read_byte(stream, body_off + 8 * i);
  std::uint32_t fcs = 0;
  for (std::size_t i = 0; i < kFcsBytes; ++i)
    fcs = (fcs << 8) | read_byte(stream, body_off + 8 * (body_bytes + i));

  if (crc32_ieee(body) != fcs) {
    res.error = DecodeError::bad_crc;
    return res;
  }
  if (claimed_len > kMaxPayload || kHeaderBytes + claimed_len != body_bytes) {
    res.error = DecodeError::bad_length;
    return res;
  }

  CFrame f;
  f.dst_addr = static_cast<std::uint16_t>((body[0] << 8) | body[1]);
  f.src_addr = static_cast<std::uint16_t>((body[2] << 8) | body[3]);
  f.encoding_id = body[4];
  f.protocol_id = body[5];
  f.seq = static_cast<std::uint16_t>((body[6] << 8) | body[7]);
  f.payload.assign(body.begin() + kHeaderBytes, body.end());
  f.fcs = fcs;

  res.error = DecodeError::ok;
  res.frame = std::move(f);
  res.end_offset = body_off + 8 * (body_bytes + kFcsBytes);
  return res;
}

SymbolStream schedule_qframe(const QFramePlan& plan, std::span<const PulseSlot> payload_spec) {
  if (plan.guard_slots < 0 || plan.quantum_slot_count < 0)
    throw ScheduleError("guard_slots and quantum_slot_count must be >= 0");
  if (payload_spec.size() != static_cast<std::size_t>(plan.quantum_slot_count))
    throw ScheduleError("payload descriptor count does not match quantum_slot_count");
  for (const PulseSlot& p : payload_spec)
    if (!is_quantum(p.klass)) throw ScheduleError("payload descriptors must be quantum-class pulses");

  SymbolStream out = encode_cframe(plan.cframe);
  out.reserve(out.size() + static_cast<std::size_t>(plan.guard_slots + plan.quantum_slot_count));
  for (int i = 0; i < plan.guard_slots; ++i) out.push_back(Symbol{SymbolKind::idle, 0});
  for (int i = 0; i < plan.quantum_slot_count; ++i) out.push_back(Symbol{SymbolKind::quantum, 0});
  return out;
}

}  // namespace qframe

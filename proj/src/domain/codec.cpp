#include "rpm/domain/codec.hpp"

#include <zlib.h>

#include <fmt/format.h>

#include "rpm/domain/bytes.hpp"

namespace rpm {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; frames never approach that limit.
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::size_t encoded_size(const Frame& frame) { return kFrameOverhead + frame.payload.size(); }

void encode_frame_into(const Frame& frame, std::vector<std::uint8_t>& out) {
  if (frame.payload.size() > kMaxPayload) {
    throw OversizeError(fmt::format("payload of {} bytes exceeds {}", frame.payload.size(), kMaxPayload));
  }
  if (frame.total < 1 || frame.seq >= frame.total) {
    throw std::invalid_argument(fmt::format("bad segment index {}/{}", frame.seq, frame.total));
  }
  const std::size_t start = out.size();
  out.reserve(start + encoded_size(frame));
  bytes::put_u32(out, kFrameMagic);
  bytes::put_u8(out, frame.version);
  bytes::put_u8(out, static_cast<std::uint8_t>(frame.category));
  bytes::put_u32(out, frame.patient.value);
  bytes::put_u32(out, frame.seq);
  bytes::put_u32(out, frame.total);
  bytes::put_u32(out, static_cast<std::uint32_t>(frame.payload.size()));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  const auto crc = crc32(std::span(out).subspan(start));
  bytes::put_u32(out, crc);
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  std::vector<std::uint8_t> out;
  encode_frame_into(frame, out);
  return out;
}

std::optional<DecodedFrame> decode_frame(std::span<const std::uint8_t> buf) {
  if (buf.size() >= 4 && bytes::get_u32(buf, 0) != kFrameMagic) {
    throw ProtocolError("bad magic", 1);
  }
  if (buf.size() < kFrameHeaderSize) return std::nullopt;

  const std::uint32_t len = bytes::get_u32(buf, 18);
  if (len > kMaxPayload) throw ProtocolError(fmt::format("payload_len {} exceeds limit", len), 1);
  const std::size_t frame_size = kFrameOverhead + len;
  if (buf.size() < frame_size) return std::nullopt;

  const auto body = buf.first(kFrameHeaderSize + len);
  if (crc32(body) != bytes::get_u32(buf, kFrameHeaderSize + len)) {
    throw CorruptionError("CRC mismatch", frame_size);
  }

  const std::uint8_t version = buf[4];
  if (version != kProtocolVersion) {
    throw ProtocolError(fmt::format("unsupported version {}", version), frame_size);
  }
  const auto category = category_from_wire(buf[5]);
  if (!category) throw ProtocolError(fmt::format("unknown category {}", buf[5]), frame_size);

  DecodedFrame out;
  out.frame.version = version;
  out.frame.category = *category;
  out.frame.patient = PatientId{bytes::get_u32(buf, 6)};
  out.frame.seq = bytes::get_u32(buf, 10);
  out.frame.total = bytes::get_u32(buf, 14);
  if (out.frame.total < 1 || out.frame.seq >= out.frame.total) {
    throw ProtocolError(fmt::format("bad segment index {}/{}", out.frame.seq, out.frame.total), frame_size);
  }
  const auto payload = buf.subspan(kFrameHeaderSize, len);
  out.frame.payload.assign(payload.begin(), payload.end());
  out.consumed = frame_size;
  return out;
}

}  // namespace rpm

#include "rpm/domain/payloads.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "rpm/domain/bytes.hpp"

namespace rpm {

namespace {

void expect_size(std::span<const std::uint8_t> payload, std::size_t size, std::string_view what) {
  if (payload.size() != size) {
    throw PayloadError(fmt::format("{} payload must be {} bytes, got {}", what, size, payload.size()));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_vital(const VitalSample& v) {
  std::vector<std::uint8_t> out;
  out.reserve(kVitalPayloadSize);
  bytes::put_u32(out, v.patient.value);
  bytes::put_u64(out, v.timestamp_ms);
  bytes::put_u8(out, static_cast<std::uint8_t>(v.kind));
  bytes::put_f64(out, v.value);
  return out;
}

VitalSample decode_vital(std::span<const std::uint8_t> payload) {
  expect_size(payload, kVitalPayloadSize, "vital");
  bytes::Reader r(payload);
  VitalSample v;
  v.patient = PatientId{r.u32()};
  v.timestamp_ms = r.u64();
  const std::uint8_t kind = r.u8();
  if (kind > static_cast<std::uint8_t>(VitalKind::Temperature)) {
    throw PayloadError(fmt::format("unknown vital kind {}", kind));
  }
  v.kind = static_cast<VitalKind>(kind);
  v.value = r.f64();
  return v;
}

std::vector<std::uint8_t> encode_pcm(std::span<const std::int16_t> samples) {
  std::vector<std::uint8_t> out;
  out.reserve(samples.size() * 2);
  for (std::int16_t s : samples) bytes::put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

std::vector<std::int16_t> decode_pcm(std::span<const std::uint8_t> payload) {
  if (payload.size() % 2 != 0) throw PayloadError("PCM payload has odd length");
  std::vector<std::int16_t> out(payload.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::int16_t>(bytes::get_u16(payload, 2 * i));
  }
  return out;
}

std::vector<std::uint8_t> encode_identity(const IdentityRecord& r) {
  if (r.name.size() > kIdentityNameSize) throw PayloadError("identity name longer than 32 bytes");
  std::vector<std::uint8_t> out(kIdentityNameSize, 0);
  std::copy(r.name.begin(), r.name.end(), out.begin());
  bytes::put_u16(out, r.room);
  bytes::put_u16(out, r.bed);
  return out;
}

IdentityRecord decode_identity(std::span<const std::uint8_t> payload) {
  expect_size(payload, kIdentityPayloadSize, "identity");
  bytes::Reader r(payload);
  auto name = r.take(kIdentityNameSize);
  const auto end = std::find(name.begin(), name.end(), std::uint8_t{0});
  IdentityRecord out;
  out.name.assign(name.begin(), end);
  out.room = r.u16();
  out.bed = r.u16();
  return out;
}

std::vector<std::uint8_t> encode_keyword(const KeywordEvent& e) {
  std::vector<std::uint8_t> out;
  out.reserve(kKeywordPayloadSize);
  bytes::put_u32(out, e.label);
  bytes::put_f64(out, e.confidence);
  return out;
}

KeywordEvent decode_keyword(std::span<const std::uint8_t> payload) {
  expect_size(payload, kKeywordPayloadSize, "keyword");
  bytes::Reader r(payload);
  KeywordEvent e;
  e.label = r.u32();
  e.confidence = r.f64();
  return e;
}

Frame make_ack(const Frame& to, AckStatus status) {
  Frame ack;
  ack.category = DataCategory::Ack;
  ack.patient = to.patient;
  ack.seq = to.seq;
  ack.total = to.total;
  ack.payload = {static_cast<std::uint8_t>(to.category), static_cast<std::uint8_t>(status)};
  return ack;
}

AckInfo decode_ack(std::span<const std::uint8_t> payload) {
  expect_size(payload, 2, "ack");
  const auto cat = category_from_wire(payload[0]);
  if (!cat) throw PayloadError("ack names unknown category");
  if (payload[1] > 1) throw PayloadError("unknown ack status");
  return AckInfo{*cat, static_cast<AckStatus>(payload[1])};
}

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Device:
      return "device";
    case NodeRole::Fog:
      return "fog";
    case NodeRole::Cloud:
      return "cloud";
  }
  return "?";
}

std::vector<std::uint8_t> encode_control(const ControlMessage& m) {
  std::vector<std::uint8_t> out;
  bytes::put_u8(out, static_cast<std::uint8_t>(m.op));
  switch (m.op) {
    case ControlOp::Hello:
      bytes::put_u8(out, static_cast<std::uint8_t>(m.role));
      break;
    case ControlOp::CameraCommand:
      bytes::put_u8(out, static_cast<std::uint8_t>(m.command));
      break;
    case ControlOp::PolicyUpdate:
      out.insert(out.end(), m.policy_text.begin(), m.policy_text.end());
      break;
    case ControlOp::StreamHeartbeat:
      bytes::put_u16(out, m.resolution);
      break;
  }
  return out;
}

ControlMessage decode_control(std::span<const std::uint8_t> payload) {
  bytes::Reader r(payload);
  ControlMessage m;
  const std::uint8_t op = r.u8();
  switch (op) {
    case static_cast<std::uint8_t>(ControlOp::Hello): {
      m.op = ControlOp::Hello;
      const std::uint8_t role = r.u8();
      if (role > static_cast<std::uint8_t>(NodeRole::Cloud)) throw PayloadError("unknown role");
      m.role = static_cast<NodeRole>(role);
      break;
    }
    case static_cast<std::uint8_t>(ControlOp::CameraCommand): {
      m.op = ControlOp::CameraCommand;
      const std::uint8_t cmd = r.u8();
      if (cmd > static_cast<std::uint8_t>(CameraCommand::CheckupEnd)) throw PayloadError("unknown camera command");
      m.command = static_cast<CameraCommand>(cmd);
      break;
    }
    case static_cast<std::uint8_t>(ControlOp::PolicyUpdate): {
      m.op = ControlOp::PolicyUpdate;
      auto text = r.take(r.remaining());
      m.policy_text.assign(text.begin(), text.end());
      break;
    }
    case static_cast<std::uint8_t>(ControlOp::StreamHeartbeat):
      m.op = ControlOp::StreamHeartbeat;
      m.resolution = r.u16();
      break;
    default:
      throw PayloadError(fmt::format("unknown control op {}", op));
  }
  if (r.remaining() != 0) throw PayloadError("trailing bytes in control message");
  return m;
}

Frame make_control_frame(PatientId patient, const ControlMessage& m) {
  Frame f;
  f.category = DataCategory::CameraControl;
  f.patient = patient;
  f.payload = encode_control(m);
  return f;
}

}  // namespace rpm

#pragma once

// Payload schemas carried inside frames. Every multi-byte field is big-endian,
// matching the frame header.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rpm/domain/types.hpp"

namespace rpm {

class PayloadError : public Error {
 public:
  using Error::Error;
};

// Vitals: patient u32 | timestamp_ms u64 | kind u8 | value f64  (21 bytes)
inline constexpr std::size_t kVitalPayloadSize = 21;
std::vector<std::uint8_t> encode_vital(const VitalSample& v);
VitalSample decode_vital(std::span<const std::uint8_t> payload);

// AudioClip: raw 16 kHz mono signed 16-bit samples, big-endian.
std::vector<std::uint8_t> encode_pcm(std::span<const std::int16_t> samples);
std::vector<std::int16_t> decode_pcm(std::span<const std::uint8_t> payload);

// Identity: name [32 bytes, NUL padded] | room u16 | bed u16  (36 bytes)
inline constexpr std::size_t kIdentityNameSize = 32;
inline constexpr std::size_t kIdentityPayloadSize = 36;

struct IdentityRecord {
  std::string name;
  std::uint16_t room = 0;
  std::uint16_t bed = 0;

  bool operator==(const IdentityRecord&) const = default;
};

std::vector<std::uint8_t> encode_identity(const IdentityRecord& r);
IdentityRecord decode_identity(std::span<const std::uint8_t> payload);

// KeywordEvent: label u32 | confidence f64  (12 bytes)
inline constexpr std::size_t kKeywordPayloadSize = 12;

struct KeywordEvent {
  std::uint32_t label = 0;
  double confidence = 0.0;

  bool operator==(const KeywordEvent&) const = default;
};

std::vector<std::uint8_t> encode_keyword(const KeywordEvent& e);
KeywordEvent decode_keyword(std::span<const std::uint8_t> payload);

// Ack: acked category u8 | status u8
enum class AckStatus : std::uint8_t { Ok = 0, Rejected = 1 };

struct AckInfo {
  DataCategory acked = DataCategory::Ack;
  AckStatus status = AckStatus::Ok;
};

/// Builds the Ack answering `to`: same patient, seq and total.
Frame make_ack(const Frame& to, AckStatus status = AckStatus::Ok);
AckInfo decode_ack(std::span<const std::uint8_t> payload);

// Control channel (CameraControl category). First byte selects the message.
enum class ControlOp : std::uint8_t {
  Hello = 1,            // | role u8
  CameraCommand = 2,    // | command u8
  PolicyUpdate = 3,     // | policy text (key=value lines)
  StreamHeartbeat = 4,  // | vertical resolution u16
};

enum class NodeRole : std::uint8_t { Device = 0, Fog = 1, Cloud = 2 };

std::string_view to_string(NodeRole role);

enum class CameraCommand : std::uint8_t { CameraOn = 0, CameraOff = 1, CheckupStart = 2, CheckupEnd = 3 };

struct ControlMessage {
  ControlOp op = ControlOp::Hello;
  NodeRole role = NodeRole::Device;
  CameraCommand command = CameraCommand::CameraOn;
  std::string policy_text;
  std::uint16_t resolution = 720;
};

std::vector<std::uint8_t> encode_control(const ControlMessage& m);
ControlMessage decode_control(std::span<const std::uint8_t> payload);

/// Single-frame control message from patient.
Frame make_control_frame(PatientId patient, const ControlMessage& m);

}  // namespace rpm

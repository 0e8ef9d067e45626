#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rpm {

/// Base class for every error raised by the rpm libraries.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PatientId {
  std::uint32_t value = 0;

  constexpr bool valid() const { return value != 0; }
  friend constexpr bool operator==(PatientId, PatientId) = default;
  friend constexpr auto operator<=>(PatientId, PatientId) = default;
};

/// The filterable unit of data. Wire values are the enumerator values.
enum class DataCategory : std::uint8_t {
  Vitals = 0,
  AudioClip = 1,
  KeywordEvent = 2,
  CameraControl = 3,
  Identity = 4,
  Ack = 5,
};

inline constexpr std::size_t kCategoryCount = 6;

inline constexpr std::array<DataCategory, kCategoryCount> kAllCategories = {
    DataCategory::Vitals,        DataCategory::AudioClip, DataCategory::KeywordEvent,
    DataCategory::CameraControl, DataCategory::Identity,  DataCategory::Ack,
};

constexpr std::size_t index_of(DataCategory c) { return static_cast<std::size_t>(c); }

std::string_view to_string(DataCategory c);
std::optional<DataCategory> category_from_string(std::string_view name);
std::optional<DataCategory> category_from_wire(std::uint8_t v);

enum class VitalKind : std::uint8_t { HeartRate = 0, SpO2 = 1, Temperature = 2 };

struct VitalSample {
  PatientId patient;
  std::uint64_t timestamp_ms = 0;
  VitalKind kind = VitalKind::HeartRate;
  double value = 0.0;

  bool operator==(const VitalSample&) const = default;
};

/// True when value lies in the physiological range for its kind.
bool in_range(VitalKind kind, double value);

inline constexpr std::uint32_t kAudioSampleRate = 16000;
inline constexpr std::uint8_t kAudioBitDepth = 16;
inline constexpr std::size_t kClipSamples = 16000;

struct AudioClip {
  PatientId patient;
  std::uint32_t sample_rate = kAudioSampleRate;
  std::uint8_t bit_depth = kAudioBitDepth;
  std::vector<std::int16_t> samples;

  bool operator==(const AudioClip&) const = default;
};

/// Pads with trailing zeros or truncates so the clip holds exactly one second.
void fit_to_one_second(AudioClip& clip);

inline constexpr std::uint32_t kFrameMagic = 0x52504D31;
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kMaxPayload = 65536;

struct Frame {
  std::uint8_t version = kProtocolVersion;
  DataCategory category = DataCategory::Ack;
  PatientId patient;
  std::uint32_t seq = 0;
  std::uint32_t total = 1;
  std::vector<std::uint8_t> payload;

  bool operator==(const Frame&) const = default;
};

}  // namespace rpm

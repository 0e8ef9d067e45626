#include "rpm/domain/types.hpp"

#include <algorithm>

namespace rpm {

namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "Vitals", "AudioClip", "KeywordEvent", "CameraControl", "Identity", "Ack",
};

}  // namespace

std::string_view to_string(DataCategory c) { return kCategoryNames.at(index_of(c)); }

std::optional<DataCategory> category_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return kAllCategories[i];
  }
  return std::nullopt;
}

std::optional<DataCategory> category_from_wire(std::uint8_t v) {
  if (v >= kCategoryCount) return std::nullopt;
  return static_cast<DataCategory>(v);
}

bool in_range(VitalKind kind, double value) {
  switch (kind) {
    case VitalKind::HeartRate:
      return value >= 20.0 && value <= 250.0;
    case VitalKind::SpO2:
      return value >= 0.0 && value <= 100.0;
    case VitalKind::Temperature:
      return value >= 25.0 && value <= 45.0;
  }
  return false;
}

void fit_to_one_second(AudioClip& clip) { clip.samples.resize(kClipSamples, 0); }

}  // namespace rpm

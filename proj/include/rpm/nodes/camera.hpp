#pragma once

#include <cstdint>
#include <string_view>

#include "rpm/domain/payloads.hpp"

namespace rpm::nodes {

enum class CameraState : std::uint8_t { Sleep, Monitoring, Streaming };

inline constexpr std::uint16_t kDefaultStreamResolution = 720;

std::string_view to_string(CameraState s);
std::string_view to_string(CameraCommand c);

/// Sleep -CheckupStart-> Monitoring -CameraOn-> Streaming -CameraOff-> Monitoring
/// -CheckupEnd-> Sleep. Every other pair leaves the state unchanged.
constexpr CameraState handle_camera_command(CameraState state, CameraCommand cmd) {
  switch (state) {
    case CameraState::Sleep:
      return cmd == CameraCommand::CheckupStart ? CameraState::Monitoring : state;
    case CameraState::Monitoring:
      if (cmd == CameraCommand::CameraOn) return CameraState::Streaming;
      if (cmd == CameraCommand::CheckupEnd) return CameraState::Sleep;
      return state;
    case CameraState::Streaming:
      return cmd == CameraCommand::CameraOff ? CameraState::Monitoring : state;
  }
  return state;
}

}  // namespace rpm::nodes

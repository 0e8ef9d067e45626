#include "rpm/nodes/camera.hpp"

namespace rpm::nodes {

std::string_view to_string(CameraState s) {
  switch (s) {
    case CameraState::Sleep: return "Sleep";
    case CameraState::Monitoring: return "Monitoring";
    case CameraState::Streaming: return "Streaming";
  }
  return "?";
}

std::string_view to_string(CameraCommand c) {
  switch (c) {
    case CameraCommand::CameraOn: return "CameraOn";
    case CameraCommand::CameraOff: return "CameraOff";
    case CameraCommand::CheckupStart: return "CheckupStart";
    case CameraCommand::CheckupEnd: return "CheckupEnd";
  }
  return "?";
}

}  // namespace rpm::nodes

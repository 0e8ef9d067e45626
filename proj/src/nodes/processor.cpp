#include "rpm/nodes/processor.hpp"

#include <algorithm>

#include "rpm/domain/payloads.hpp"
#include "rpm/domain/segment.hpp"

namespace rpm::nodes {

Processor::Processor(filter::PolicyEngine& engine, std::shared_ptr<const kws::KeywordClassifier> classifier)
    : engine_(engine), classifier_(std::move(classifier)) {}

void Processor::forward_if_allowed(const Frame& frame, ProcessResult& out) {
  auto decision = engine_.evaluate(frame);
  if (decision.verdict != filter::Verdict::Drop) out.outbound.push_back(std::move(decision.frame));
}

ProcessResult Processor::process(const Frame& frame) {
  switch (frame.category) {
    case DataCategory::Ack:
      return {};
    case DataCategory::CameraControl:
      return handle_control(frame);
    case DataCategory::AudioClip:
      return handle_audio(frame);
    default: {
      ProcessResult out;
      forward_if_allowed(frame, out);
      return out;
    }
  }
}

ProcessResult Processor::handle_control(const Frame& frame) {
  ProcessResult out;
  ControlMessage msg;
  try {
    msg = decode_control(frame.payload);
  } catch (const PayloadError&) {
    std::lock_guard lock(mu_);
    ++malformed_;
    out.status = AckStatus::Rejected;
    return out;
  }
  switch (msg.op) {
    case ControlOp::Hello:
      return out;
    case ControlOp::PolicyUpdate: {
      try {
        const auto policy = filter::policy_from_text(msg.policy_text);
        // A patient may only change its own consent.
        if (policy.patient != frame.patient || !engine_.update_policy(policy).accepted) {
          out.status = AckStatus::Rejected;
        }
      } catch (const Error&) {
        out.status = AckStatus::Rejected;
      }
      return out;
    }
    case ControlOp::CameraCommand: {
      std::lock_guard lock(mu_);
      auto [it, inserted] = camera_.try_emplace(frame.patient, CameraState::Sleep);
      it->second = handle_camera_command(it->second, msg.command);
      break;
    }
    case ControlOp::StreamHeartbeat:
      break;
  }
  forward_if_allowed(frame, out);
  return out;
}

ProcessResult Processor::handle_audio(const Frame& frame) {
  ProcessResult out;
  forward_if_allowed(frame, out);

  std::optional<std::vector<std::uint8_t>> pcm;
  {
    std::lock_guard lock(mu_);
    auto& parts = partial_audio_[frame.patient];
    const bool restart = !parts.empty() && (parts.front().total != frame.total ||
                                            std::any_of(parts.begin(), parts.end(), [&](const Frame& f) {
                                              return f.seq == frame.seq;
                                            }));
    if (restart) {
      // A new clip began before the previous one completed.
      ++malformed_;
      parts.clear();
    }
    parts.push_back(frame);
    if (parts.size() == frame.total) {
      pcm = reassemble(parts).payload;
      parts.clear();
    }
  }
  if (!pcm) return out;

  AudioClip clip;
  clip.patient = frame.patient;
  try {
    clip.samples = decode_pcm(*pcm);
  } catch (const PayloadError&) {
    std::lock_guard lock(mu_);
    ++malformed_;
    out.status = AckStatus::Rejected;
    return out;
  }
  if (!classifier_) return out;

  const auto result = classifier_->classify(clip);
  {
    std::lock_guard lock(mu_);
    ++clips_;
  }
  Frame event;
  event.category = DataCategory::KeywordEvent;
  event.patient = frame.patient;
  event.payload = encode_keyword({static_cast<std::uint32_t>(result.label), result.confidence});
  forward_if_allowed(event, out);
  out.keyword = result;
  return out;
}

CameraState Processor::camera_state(PatientId patient) const {
  std::lock_guard lock(mu_);
  const auto it = camera_.find(patient);
  return it == camera_.end() ? CameraState::Sleep : it->second;
}

std::uint64_t Processor::clips_classified() const {
  std::lock_guard lock(mu_);
  return clips_;
}

std::uint64_t Processor::malformed_payloads() const {
  std::lock_guard lock(mu_);
  return malformed_;
}

}  // namespace rpm::nodes

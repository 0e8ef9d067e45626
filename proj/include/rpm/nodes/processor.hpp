#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "rpm/filter/policy.hpp"
#include "rpm/kws/classifier.hpp"
#include "rpm/nodes/camera.hpp"

namespace rpm::nodes {

struct ProcessResult {
  std::vector<Frame> outbound;  // frames cleared by the filter, in emission order
  AckStatus status = AckStatus::Ok;
  std::optional<kws::Classification> keyword;
};

/// The work a fog does (or the cloud in Cloud mode) on each inbound frame:
/// filtering, audio reassembly and keyword classification, camera state and
/// policy updates.
///
/// Raw AudioClip segments leave the processor only when the patient's policy
/// allows AudioClip; every completed clip is classified and the resulting
/// KeywordEvent goes through the filter like any other frame.
class Processor {
 public:
  Processor(filter::PolicyEngine& engine, std::shared_ptr<const kws::KeywordClassifier> classifier);

  ProcessResult process(const Frame& frame);

  CameraState camera_state(PatientId patient) const;
  std::uint64_t clips_classified() const;
  std::uint64_t malformed_payloads() const;

 private:
  ProcessResult handle_control(const Frame& frame);
  ProcessResult handle_audio(const Frame& frame);
  void forward_if_allowed(const Frame& frame, ProcessResult& out);

  filter::PolicyEngine& engine_;
  std::shared_ptr<const kws::KeywordClassifier> classifier_;

  mutable std::mutex mu_;
  std::map<PatientId, std::vector<Frame>> partial_audio_;
  std::map<PatientId, CameraState> camera_;
  std::uint64_t clips_ = 0;
  std::uint64_t malformed_ = 0;
};

}  // namespace rpm::nodes

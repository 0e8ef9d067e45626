#include "rpm/kws/classifier.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace rpm::kws {

KeywordClassifier::KeywordClassifier(nn::Model model, std::vector<std::string> vocabulary, dsp::DspConfig config)
    : model_(std::move(model)), vocabulary_(std::move(vocabulary)), config_(config) {
  config_.validate();
  const auto& arch = model_.architecture();
  if (vocabulary_.size() != arch.n_classes) {
    throw nn::ShapeError(
        fmt::format("vocabulary of {} words for a {}-class model", vocabulary_.size(), arch.n_classes));
  }
  if (arch.in_channels != 1 || arch.in_height != config_.n_mels ||
      arch.in_width != config_.frames_for(kClipSamples)) {
    throw nn::ShapeError(fmt::format("model input {}x{}x{} does not match {}x{} features", arch.in_channels,
                                     arch.in_height, arch.in_width, config_.n_mels, config_.frames_for(kClipSamples)));
  }
}

KeywordClassifier::KeywordClassifier(nn::Checkpoint checkpoint, dsp::DspConfig config)
    : KeywordClassifier(std::move(checkpoint.model), std::move(checkpoint.vocabulary), config) {}

Classification KeywordClassifier::classify(const AudioClip& clip) const {
  AudioClip fitted = clip;
  fit_to_one_second(fitted);
  const dsp::FeatureMap features = dsp::log_mel_features(fitted, config_);
  const nn::Tensor probs =
      model_.predict(nn::Tensor({1, 1, features.rows, features.cols}, features.values));
  const auto best = std::max_element(probs.values.begin(), probs.values.end());
  Classification out;
  out.label = static_cast<std::size_t>(best - probs.values.begin());
  out.word = vocabulary_[out.label];
  out.confidence = *best;
  return out;
}

}  // namespace rpm::kws

#pragma once

#include <string>
#include <vector>

#include "rpm/dsp/features.hpp"
#include "rpm/nn/checkpoint.hpp"

namespace rpm::kws {

struct Classification {
  std::size_t label = 0;
  std::string word;
  double confidence = 0.0;

  bool operator==(const Classification&) const = default;
};

/// A trained model bound to its vocabulary. classify() is const and safe to
/// call from several threads at once.
class KeywordClassifier {
 public:
  /// Throws nn::ShapeError when the vocabulary size differs from the model's
  /// class count or the model input does not match the feature shape.
  KeywordClassifier(nn::Model model, std::vector<std::string> vocabulary, dsp::DspConfig config = {});
  explicit KeywordClassifier(nn::Checkpoint checkpoint, dsp::DspConfig config = {});

  Classification classify(const AudioClip& clip) const;

  const nn::Model& model() const { return model_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }

 private:
  nn::Model model_;
  std::vector<std::string> vocabulary_;
  dsp::DspConfig config_;
};

}  // namespace rpm::kws

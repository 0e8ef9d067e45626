#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rpm/domain/types.hpp"
#include "rpm/dsp/features.hpp"
#include "rpm/nn/train.hpp"

namespace rpm::kws {

struct LabeledClip {
  AudioClip clip;
  std::size_t label = 0;
};

struct KwsDataset {
  std::vector<std::string> vocabulary;
  std::vector<LabeledClip> clips;

  /// Throws nn::DatasetError when a label falls outside the vocabulary.
  void validate() const;
};

using WarningSink = std::function<void(const std::string&)>;

/// One subdirectory per label, sorted by name; directories starting with '_'
/// (such as _background_noise_) are ignored. Each .wav is fitted to one second.
/// Unreadable files are skipped and reported through `warn` (stderr by
/// default). Throws nn::DatasetError when no clip could be loaded.
KwsDataset load_speech_commands(const std::filesystem::path& directory, const WarningSink& warn = {});

/// Class k is a tone pair at f = (300 + 150k) Hz and 1.5 f (amplitudes 1 and
/// 0.5, random phases, +-3% jitter on f) plus white Gaussian noise at 20 dB SNR.
/// Labels interleave class by class. Deterministic in seed.
KwsDataset synth_dataset(std::size_t n_classes, std::size_t n_per_class, std::uint64_t seed);

/// Fundamental frequency of synthetic class k before jitter.
double synth_base_frequency(std::size_t k);

/// Writes <dir>/<label>/<index>.wav for every clip.
void export_wav_tree(const KwsDataset& dataset, const std::filesystem::path& directory);

/// Log-mel features as (1, n_mels, n_frames) samples.
nn::Dataset build_feature_dataset(const KwsDataset& dataset, const dsp::DspConfig& config = {});

nn::Architecture architecture_for(std::size_t n_classes, const dsp::DspConfig& config = {});

}  // namespace rpm::kws

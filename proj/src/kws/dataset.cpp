#include "rpm/kws/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "rpm/domain/topology.hpp"
#include "rpm/kws/wav.hpp"

namespace rpm::kws {

namespace fs = std::filesystem;

void KwsDataset::validate() const {
  for (const auto& c : clips) {
    if (c.label >= vocabulary.size()) {
      throw nn::DatasetError(fmt::format("label {} outside vocabulary of {}", c.label, vocabulary.size()));
    }
  }
}

KwsDataset load_speech_commands(const fs::path& directory, const WarningSink& warn) {
  const WarningSink sink = warn ? warn : [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
  if (!fs::is_directory(directory)) throw nn::DatasetError(fmt::format("{} is not a directory", directory.string()));

  std::vector<fs::path> label_dirs;
  for (const auto& entry : fs::directory_iterator(directory)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name[0] != '_') label_dirs.push_back(entry.path());
  }
  std::sort(label_dirs.begin(), label_dirs.end());

  KwsDataset out;
  for (const auto& dir : label_dirs) {
    const std::size_t label = out.vocabulary.size();
    out.vocabulary.push_back(dir.filename().string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      try {
        AudioClip clip = read_wav(file);
        fit_to_one_second(clip);
        out.clips.push_back({std::move(clip), label});
      } catch (const std::exception& e) {
        sink(fmt::format("skipping {}", e.what()));
      }
    }
  }
  if (out.clips.empty()) throw nn::DatasetError(fmt::format("no clips found under {}", directory.string()));
  return out;
}

double synth_base_frequency(std::size_t k) { return 300.0 + 150.0 * static_cast<double>(k); }

KwsDataset synth_dataset(std::size_t n_classes, std::size_t n_per_class, std::uint64_t seed) {
  if (n_classes < 2) throw nn::DatasetError("synthetic dataset needs at least two classes");
  constexpr double kJitter = 0.03;
  const double nyquist = kAudioSampleRate / 2.0;
  if (1.5 * synth_base_frequency(n_classes - 1) * (1.0 + kJitter) >= nyquist) {
    throw ConfigError(fmt::format("{} synthetic classes exceed the Nyquist limit", n_classes));
  }

  KwsDataset out;
  for (std::size_t k = 0; k < n_classes; ++k) out.vocabulary.push_back(fmt::format("tone{}", k));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(1.0 - kJitter, 1.0 + kJitter);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Signal power of amplitudes 1 and 0.5 is (1 + 0.25) / 2; 20 dB SNR puts the
  // noise power a hundredth of that.
  const double noise_sigma = std::sqrt(0.625 / 100.0);
  constexpr double kPeak = 8000.0 / 1.5;  // tone pair peaks at 1.5 before noise

  std::vector<double> signal(kClipSamples);
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t k = 0; k < n_classes; ++k) {
      const double f1 = synth_base_frequency(k) * jitter(rng), f2 = 1.5 * f1;
      const double p1 = phase(rng), p2 = phase(rng);
      for (std::size_t n = 0; n < kClipSamples; ++n) {
        const double t = static_cast<double>(n) / kAudioSampleRate;
        signal[n] = std::sin(2 * std::numbers::pi * f1 * t + p1) + 0.5 * std::sin(2 * std::numbers::pi * f2 * t + p2) +
                    noise_sigma * gauss(rng);
      }
      AudioClip clip;
      clip.samples.resize(kClipSamples);
      for (std::size_t n = 0; n < kClipSamples; ++n) {
        clip.samples[n] = static_cast<std::int16_t>(std::clamp(std::lround(signal[n] * kPeak), -32768L, 32767L));
      }
      out.clips.push_back({std::move(clip), k});
    }
  }
  return out;
}

void export_wav_tree(const KwsDataset& dataset, const fs::path& directory) {
  dataset.validate();
  std::vector<std::size_t> counters(dataset.vocabulary.size(), 0);
  for (const auto& word : dataset.vocabulary) fs::create_directories(directory / word);
  for (const auto& c : dataset.clips) {
    write_wav(directory / dataset.vocabulary[c.label] / fmt::format("{:05}.wav", counters[c.label]++), c.clip);
  }
}

nn::Dataset build_feature_dataset(const KwsDataset& dataset, const dsp::DspConfig& config) {
  dataset.validate();
  nn::Dataset out({1, config.n_mels, config.frames_for(kClipSamples)});
  for (const auto& c : dataset.clips) {
    AudioClip clip = c.clip;
    fit_to_one_second(clip);
    out.add(dsp::log_mel_features(clip, config).values, c.label);
  }
  return out;
}

nn::Architecture architecture_for(std::size_t n_classes, const dsp::DspConfig& config) {
  nn::Architecture arch;
  arch.in_height = config.n_mels;
  arch.in_width = config.frames_for(kClipSamples);
  arch.n_classes = n_classes;
  return arch;
}

}  // namespace rpm::kws

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "rpm/domain/topology.hpp"
#include "rpm/kws/classifier.hpp"
#include "rpm/kws/dataset.hpp"
#include "rpm/kws/sweep.hpp"
#include "rpm/kws/wav.hpp"

namespace rpm::kws {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / fmt::format("rpm_kws_test_{}", ::testing::UnitTest::GetInstance()->random_seed());
    path_ += std::string("_") + ::testing::UnitTest::GetInstance()->current_test_info()->name();
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

AudioClip ramp_clip(std::size_t n) {
  AudioClip c;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.samples[i] = static_cast<std::int16_t>((i * 37) % 20000 - 10000);
  return c;
}

TEST(Wav, RoundTrip) {
  TempDir dir;
  const AudioClip clip = ramp_clip(1234);
  write_wav(dir.path() / "a.wav", clip);
  EXPECT_EQ(fs::file_size(dir.path() / "a.wav"), 44u + 2468u);
  EXPECT_EQ(read_wav(dir.path() / "a.wav").samples, clip.samples);
}

TEST(Wav, RejectsWrongFormat) {
  TempDir dir;
  AudioClip clip = ramp_clip(100);
  clip.sample_rate = 8000;
  write_wav(dir.path() / "slow.wav", clip);
  EXPECT_THROW(read_wav(dir.path() / "slow.wav"), WavError);
  std::ofstream(dir.path() / "junk.wav") << "not audio at all";
  EXPECT_THROW(read_wav(dir.path() / "junk.wav"), WavError);
  EXPECT_THROW(read_wav(dir.path() / "missing.wav"), WavError);
}

TEST(SpeechCommands, LabelsBySortedFolderAndFitsLength) {
  TempDir dir;
  for (const char* word : {"yes", "no", "down"}) fs::create_directories(dir.path() / word);
  fs::create_directories(dir.path() / "_background_noise_");
  write_wav(dir.path() / "_background_noise_" / "noise.wav", ramp_clip(16000));
  write_wav(dir.path() / "yes" / "short.wav", ramp_clip(12000));
  write_wav(dir.path() / "no" / "long.wav", ramp_clip(20000));
  write_wav(dir.path() / "down" / "exact.wav", ramp_clip(16000));
  std::ofstream(dir.path() / "down" / "broken.wav") << "RIFF";

  std::vector<std::string> warnings;
  const KwsDataset d = load_speech_commands(dir.path(), [&](const std::string& w) { warnings.push_back(w); });
  EXPECT_EQ(d.vocabulary, (std::vector<std::string>{"down", "no", "yes"}));
  ASSERT_EQ(d.clips.size(), 3u);
  EXPECT_EQ(warnings.size(), 1u);

  const auto by_label = [&](std::size_t label) {
    return *std::find_if(d.clips.begin(), d.clips.end(), [&](const LabeledClip& c) { return c.label == label; });
  };
  const AudioClip padded = by_label(2).clip;
  ASSERT_EQ(padded.samples.size(), 16000u);
  const AudioClip original = ramp_clip(12000);
  EXPECT_TRUE(std::equal(original.samples.begin(), original.samples.end(), padded.samples.begin()));
  EXPECT_TRUE(std::all_of(padded.samples.begin() + 12000, padded.samples.end(), [](auto s) { return s == 0; }));

  const AudioClip truncated = by_label(1).clip;
  ASSERT_EQ(truncated.samples.size(), 16000u);
  const AudioClip longer = ramp_clip(20000);
  EXPECT_TRUE(std::equal(truncated.samples.begin(), truncated.samples.end(), longer.samples.begin()));
}

TEST(SpeechCommands, ThirtyFoldersThirtyWords) {
  TempDir dir;
  for (int k = 0; k < 30; ++k) {
    const fs::path sub = dir.path() / fmt::format("word{:02}", k);
    fs::create_directories(sub);
    write_wav(sub / "0.wav", ramp_clip(800));
  }
  EXPECT_EQ(load_speech_commands(dir.path(), [](const std::string&) {}).vocabulary.size(), 30u);
}

TEST(SpeechCommands, EmptyDirectoryIsError) {
  TempDir dir;
  EXPECT_THROW(load_speech_commands(dir.path(), [](const std::string&) {}), nn::DatasetError);
  EXPECT_THROW(load_speech_commands(dir.path() / "nope"), nn::DatasetError);
}

TEST(Synth, SizeAndDeterminism) {
  const KwsDataset a = synth_dataset(8, 200, 3);
  EXPECT_EQ(a.clips.size(), 1600u);
  EXPECT_EQ(a.vocabulary.size(), 8u);
  const KwsDataset b = synth_dataset(8, 200, 3);
  ASSERT_EQ(a.clips.size(), b.clips.size());
  for (std::size_t i = 0; i < a.clips.size(); ++i) {
    EXPECT_EQ(a.clips[i].label, b.clips[i].label);
    ASSERT_EQ(a.clips[i].clip.samples, b.clips[i].clip.samples);
  }
  const KwsDataset c = synth_dataset(8, 2, 4);
  EXPECT_NE(c.clips[0].clip.samples, a.clips[0].clip.samples);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(std::count_if(a.clips.begin(), a.clips.end(), [&](auto& x) { return x.label == k; }), 200);
  }
}

TEST(Synth, RejectsDegenerateClassCount) {
  EXPECT_THROW(synth_dataset(1, 10, 1), nn::DatasetError);
  EXPECT_THROW(synth_dataset(40, 1, 1), ConfigError);
}

// Least-squares fit of sin/cos at f and 1.5 f; returns residual power over
// fitted power.
double residual_ratio(const std::vector<double>& x, double f) {
  const std::size_t n = x.size();
  std::vector<std::array<double, 4>> cols(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / 16000.0, w1 = 2 * M_PI * f * t, w2 = 1.5 * w1;
    cols[i] = {std::sin(w1), std::cos(w1), std::sin(w2), std::cos(w2)};
  }
  double a[4][5] = {};
  for (std::size_t i = 0; i < n; ++i)
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) a[r][c] += cols[i][r] * cols[i][c];
      a[r][4] += cols[i][r] * x[i];
    }
  for (int p = 0; p < 4; ++p)
    for (int r = 0; r < 4; ++r) {
      if (r == p) continue;
      const double m = a[r][p] / a[p][p];
      for (int c = 0; c < 5; ++c) a[r][c] -= m * a[p][c];
    }
  double fit = 0, res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0;
    for (int c = 0; c < 4; ++c) y += a[c][4] / a[c][c] * cols[i][c];
    fit += y * y;
    res += (x[i] - y) * (x[i] - y);
  }
  return res / fit;
}

TEST(Synth, NoiseLevelNearTwentyDecibels) {
  const KwsDataset d = synth_dataset(3, 2, 11);
  for (const auto& lc : d.clips) {
    std::vector<double> x(lc.clip.samples.begin(), lc.clip.samples.end());
    const double base = synth_base_frequency(lc.label);
    // Locate the jittered fundamental by peak-picking the DTFT, coarse then fine.
    const auto dtft = [&](double f) {
      double re = 0, im = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = 2 * M_PI * f * static_cast<double>(i) / 16000.0;
        re += x[i] * std::cos(w);
        im -= x[i] * std::sin(w);
      }
      return re * re + im * im;
    };
    double best = base;
    for (double f = base * 0.965; f <= base * 1.035; f += 0.25) {
      if (dtft(f) > dtft(best)) best = f;
    }
    const double centre = best;
    for (double f = centre - 0.25; f <= centre + 0.25; f += 0.005) {
      if (dtft(f) > dtft(best)) best = f;
    }
    EXPECT_NEAR(best / base, 1.0, 0.031);
    const double snr_db = -10.0 * std::log10(residual_ratio(x, best));
    EXPECT_NEAR(snr_db, 20.0, 0.5) << "class " << lc.label;
  }
}

// Mel band holding most of the energy, summed over all frames.
std::size_t dominant_band(const AudioClip& clip) {
  const dsp::FeatureMap f = dsp::log_mel_features(clip, dsp::DspConfig{});
  std::vector<double> energy(f.rows, 0.0);
  for (std::size_t r = 0; r < f.rows; ++r)
    for (std::size_t c = 0; c < f.cols; ++c) energy[r] += std::exp(f.at(r, c));
  return static_cast<std::size_t>(std::max_element(energy.begin(), energy.end()) - energy.begin());
}

TEST(Synth, AdjacentClassesHaveDisjointDominantBands) {
  const KwsDataset d = synth_dataset(2, 40, 5);
  const auto centers = dsp::mel_center_frequencies(dsp::DspConfig{});
  std::set<std::size_t> bands[2];
  for (const auto& lc : d.clips) bands[lc.label].insert(dominant_band(lc.clip));
  for (std::size_t k = 0; k < 2; ++k) {
    // Every dominant band must be a filter whose passband can hold the jittered fundamental.
    const double lo = synth_base_frequency(k) * 0.97, hi = synth_base_frequency(k) * 1.03;
    for (auto b : bands[k]) {
      const double left = b == 0 ? 20.0 : centers[b - 1], right = b + 1 < centers.size() ? centers[b + 1] : 8000.0;
      EXPECT_TRUE(right > lo && left < hi) << "class " << k << " band " << b;
    }
  }
  for (auto b : bands[0]) EXPECT_EQ(bands[1].count(b), 0u) << "shared band " << b;
}

TEST(Synth, ExportedTreeLoadsBack) {
  TempDir dir;
  const KwsDataset d = synth_dataset(3, 2, 6);
  export_wav_tree(d, dir.path());
  const KwsDataset back = load_speech_commands(dir.path(), [](const std::string&) {});
  EXPECT_EQ(back.vocabulary, d.vocabulary);
  ASSERT_EQ(back.clips.size(), d.clips.size());
  std::multiset<std::vector<std::int16_t>> a, b;
  for (const auto& c : d.clips) a.insert(c.clip.samples);
  for (const auto& c : back.clips) b.insert(c.clip.samples);
  EXPECT_EQ(a, b);
}

TEST(Features, DatasetShape) {
  const nn::Dataset f = build_feature_dataset(synth_dataset(2, 2, 1));
  EXPECT_EQ(f.size(), 4u);
  EXPECT_EQ(f.sample_shape(), (nn::Shape{1, 40, 98}));
  EXPECT_EQ(architecture_for(2).flattened_size(), 960u);
}

// Shared small trained model: 3 classes, 30 clips each.
struct Trained {
  KwsDataset clips = synth_dataset(3, 30, 21);
  nn::Dataset features = build_feature_dataset(clips);
  std::optional<TrainOutcome> outcome;

  Trained() {
    nn::TrainConfig c;
    c.seed = 9;
    c.batch_size = 16;
    outcome.emplace(train_and_evaluate(features, architecture_for(3), 0.7, c));
  }
};

const Trained& trained() {
  static const Trained t;
  return t;
}

TEST(Classifier, TrainingClipsClassifyAsOwnClass) {
  const auto& t = trained();
  const KeywordClassifier kc(t.outcome->model, t.clips.vocabulary);
  std::size_t confident = 0;
  for (const auto& lc : t.clips.clips) {
    const Classification c = kc.classify(lc.clip);
    EXPECT_EQ(c.label, lc.label);
    EXPECT_EQ(c.word, t.clips.vocabulary[lc.label]);
    confident += c.confidence > 0.5;
  }
  EXPECT_EQ(confident, t.clips.clips.size());
}

TEST(Classifier, SilenceStillYieldsAtLeastUniformConfidence) {
  const auto& t = trained();
  const KeywordClassifier kc(t.outcome->model, t.clips.vocabulary);
  AudioClip silence;
  silence.samples.assign(16000, 0);
  const Classification c = kc.classify(silence);
  EXPECT_LT(c.label, 3u);
  EXPECT_GE(c.confidence, 1.0 / 3.0);
}

TEST(Classifier, DeterministicAndLengthAgnostic) {
  const auto& t = trained();
  const KeywordClassifier kc(t.outcome->model, t.clips.vocabulary);
  const AudioClip clip = t.clips.clips[4].clip;
  EXPECT_EQ(kc.classify(clip), kc.classify(clip));
  AudioClip shorter = clip;
  shorter.samples.resize(12000);
  AudioClip padded = shorter;
  padded.samples.resize(16000, 0);
  EXPECT_EQ(kc.classify(shorter), kc.classify(padded));
}

TEST(Classifier, VocabularyMismatch) {
  const auto& t = trained();
  EXPECT_THROW(KeywordClassifier(t.outcome->model, {"a", "b"}), nn::ShapeError);
  nn::Architecture small;
  small.in_height = 8;
  small.in_width = 8;
  small.block_channels = {2};
  small.n_classes = 2;
  EXPECT_THROW(KeywordClassifier(nn::Model(small, 1), {"a", "b"}), nn::ShapeError);
}

TEST(Classifier, CheckpointRoundTrip) {
  const auto& t = trained();
  const auto bytes = nn::serialize_checkpoint(t.outcome->model, t.clips.vocabulary);
  const KeywordClassifier kc(nn::deserialize_checkpoint(bytes));
  const KeywordClassifier direct(t.outcome->model, t.clips.vocabulary);
  EXPECT_EQ(kc.vocabulary(), t.clips.vocabulary);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(kc.classify(t.clips.clips[i].clip), direct.classify(t.clips.clips[i].clip));
}

TEST(Sweep, RowsReproducibleAndSane) {
  const auto& t = trained();
  nn::TrainConfig c;
  c.seed = 3;
  c.epochs = 4;
  c.batch_size = 16;
  const SweepResult a = run_split_sweep(t.features, architecture_for(3), kDefaultSplits, c);
  ASSERT_EQ(a.rows.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& r = a.rows[i];
    EXPECT_EQ(r.train_fraction, kDefaultSplits[i]);
    EXPECT_GE(r.train_accuracy, 0.0);
    EXPECT_LE(r.train_accuracy, 1.0);
    EXPECT_GE(r.validation_accuracy, 0.0);
    EXPECT_LE(r.validation_accuracy, 1.0);
    EXPECT_GE(r.train_accuracy, r.validation_accuracy - 0.05);
  }
  const std::vector<double> some{0.5, 0.9};
  const SweepResult b = run_split_sweep(t.features, architecture_for(3), some, c);
  EXPECT_EQ(b.rows[0], a.rows[0]);
  EXPECT_EQ(b.rows[1], a.rows[4]);
}

TEST(Sweep, CsvFormatAndParseBack) {
  SweepResult r;
  r.rows = {{0.5, 1.0, 0.9583333}, {0.7, 0.99, 0.875}};
  std::ostringstream out;
  write_sweep_csv(r, out);
  EXPECT_EQ(out.str(), "split,train_acc,val_acc\n0.50,1.000000,0.958333\n0.70,0.990000,0.875000\n");
  std::istringstream in(out.str());
  const SweepResult back = read_sweep_csv(in);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[1], (SweepRow{0.7, 0.99, 0.875}));
}

TEST(Sweep, Errors) {
  const auto& t = trained();
  nn::TrainConfig c;
  const std::vector<double> none, bad{0.5, 1.0};
  EXPECT_THROW(run_split_sweep(t.features, architecture_for(3), none, c), nn::DatasetError);
  EXPECT_THROW(run_split_sweep(t.features, architecture_for(3), bad, c), nn::DatasetError);
}

}  // namespace
}  // namespace rpm::kws

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "rpm/domain/types.hpp"

namespace rpm::dsp {

class TooShortError : public Error {
 public:
  using Error::Error;
};

struct DspConfig {
  std::size_t frame_len = 400;  // 25 ms at 16 kHz
  std::size_t hop = 160;        // 10 ms
  std::size_t n_fft = 512;
  std::size_t n_mels = 40;
  double f_min = 20.0;
  double f_max = 8000.0;
  double sample_rate = 16000.0;
  double log_floor = 1e-10;

  std::size_t bins() const { return n_fft / 2 + 1; }
  std::size_t frames_for(std::size_t samples) const { return 1 + (samples - frame_len) / hop; }

  /// Throws ConfigError (from rpm/domain/topology.hpp) on a broken invariant.
  void validate() const;
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

/// n_mels rows, one column per analysis frame.
using FeatureMap = Matrix;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Hamming-windowed frames, each zero-padded to n_fft.
std::vector<std::vector<double>> frame_signal(std::span<const double> samples, const DspConfig& config);

/// |DFT_k|^2 / N for k = 0..N/2. N must be a power of two.
std::vector<double> power_spectrum(std::span<const double> frame);

/// Triangular filters, one per row, with apexes evenly spaced in mel between
/// f_min and f_max.
Matrix mel_filterbank(const DspConfig& config);

/// Apex frequency in Hz of each filter.
std::vector<double> mel_center_frequencies(const DspConfig& config);

FeatureMap log_mel_features(std::span<const double> samples, const DspConfig& config);
FeatureMap log_mel_features(const AudioClip& clip, const DspConfig& config);

/// Samples scaled to [-1, 1).
std::vector<double> to_unit_scale(std::span<const std::int16_t> samples);

/// Row-major CSV, one mel band per line, one frame per column.
void write_csv(const FeatureMap& features, std::ostream& out);

}  // namespace rpm::dsp

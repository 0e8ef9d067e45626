#include "rpm/dsp/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

#include "rpm/domain/topology.hpp"

namespace rpm::dsp {

namespace {

void fft_in_place(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  // Each twiddle is evaluated directly, never by repeated multiplication.
  std::vector<std::complex<double>> twiddle(n / 2);
  for (std::size_t k = 0; k < twiddle.size(); ++k) {
    twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * twiddle[k * stride];
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return w;
}

}  // namespace

void DspConfig::validate() const {
  if (frame_len == 0 || hop == 0) throw ConfigError("frame_len and hop must be positive");
  if (frame_len > n_fft) throw ConfigError("frame_len must not exceed n_fft");
  if (!std::has_single_bit(n_fft)) throw ConfigError("n_fft must be a power of two");
  if (n_mels < 2) throw ConfigError("n_mels must be at least 2");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw ConfigError("need 0 <= f_min < f_max <= sample_rate / 2");
  }
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> frame_signal(std::span<const double> samples, const DspConfig& config) {
  if (samples.size() < config.frame_len) {
    throw TooShortError(fmt::format("clip of {} samples is shorter than one frame ({})", samples.size(),
                                    config.frame_len));
  }
  const auto window = hamming(config.frame_len);
  const std::size_t count = config.frames_for(samples.size());
  std::vector<std::vector<double>> frames(count, std::vector<double>(config.n_fft, 0.0));
  for (std::size_t f = 0; f < count; ++f) {
    const double* src = samples.data() + f * config.hop;
    for (std::size_t i = 0; i < config.frame_len; ++i) frames[f][i] = src[i] * window[i];
  }
  return frames;
}

std::vector<double> power_spectrum(std::span<const double> frame) {
  const std::size_t n = frame.size();
  if (!std::has_single_bit(n)) throw std::invalid_argument("frame length must be a power of two");
  std::vector<std::complex<double>> a(frame.begin(), frame.end());
  fft_in_place(a);
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::norm(a[k]) / static_cast<double>(n);
  return out;
}

std::vector<double> mel_center_frequencies(const DspConfig& config) {
  const double lo = hz_to_mel(config.f_min);
  const double hi = hz_to_mel(config.f_max);
  const double step = (hi - lo) / static_cast<double>(config.n_mels + 1);
  std::vector<double> centers(config.n_mels);
  for (std::size_t m = 0; m < config.n_mels; ++m) centers[m] = mel_to_hz(lo + step * static_cast<double>(m + 1));
  return centers;
}

Matrix mel_filterbank(const DspConfig& config) {
  config.validate();
  const double lo = hz_to_mel(config.f_min);
  const double hi = hz_to_mel(config.f_max);
  const double step = (hi - lo) / static_cast<double>(config.n_mels + 1);
  std::vector<double> edges(config.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = mel_to_hz(lo + step * static_cast<double>(i));

  Matrix bank(config.n_mels, config.bins());
  const double bin_hz = config.sample_rate / static_cast<double>(config.n_fft);
  for (std::size_t m = 0; m < config.n_mels; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    for (std::size_t k = 0; k < bank.cols; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      bank.at(m, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return bank;
}

FeatureMap log_mel_features(std::span<const double> samples, const DspConfig& config) {
  config.validate();
  const auto frames = frame_signal(samples, config);
  const Matrix bank = mel_filterbank(config);
  FeatureMap out(config.n_mels, frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto power = power_spectrum(frames[f]);
    for (std::size_t m = 0; m < config.n_mels; ++m) {
      const auto weights = bank.row(m);
      double energy = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) energy += weights[k] * power[k];
      out.at(m, f) = std::log(std::max(energy, config.log_floor));
    }
  }
  return out;
}

std::vector<double> to_unit_scale(std::span<const std::int16_t> samples) {
  std::vector<double> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(),
                 [](std::int16_t s) { return static_cast<double>(s) / 32768.0; });
  return out;
}

FeatureMap log_mel_features(const AudioClip& clip, const DspConfig& config) {
  if (static_cast<double>(clip.sample_rate) != config.sample_rate) {
    throw ConfigError(fmt::format("clip sampled at {} Hz, features configured for {} Hz", clip.sample_rate,
                                  config.sample_rate));
  }
  const auto scaled = to_unit_scale(clip.samples);
  return log_mel_features(scaled, config);
}

void write_csv(const FeatureMap& features, std::ostream& out) {
  for (std::size_t r = 0; r < features.rows; ++r) {
    for (std::size_t c = 0; c < features.cols; ++c) {
      if (c) out << ',';
      out << fmt::format("{:.9g}", features.at(r, c));
    }
    out << '\n';
  }
}

}  // namespace rpm::dsp

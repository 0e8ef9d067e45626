#pragma once

#include <filesystem>

#include "rpm/domain/types.hpp"

namespace rpm::kws {

class WavError : public Error {
 public:
  using Error::Error;
};

/// Reads a RIFF/WAVE file holding 16 kHz mono 16-bit PCM. The clip is returned
/// at its stored length; callers fit it to one second.
AudioClip read_wav(const std::filesystem::path& path);

/// Writes 16-bit little-endian PCM, mono, at the clip's sample rate.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace rpm::kws

#include "rpm/kws/wav.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <vector>

#include <fmt/format.h>

namespace rpm::kws {

namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put_le(std::vector<std::uint8_t>& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(fmt::format("cannot open {}", path.string()));
  const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto fail = [&](const char* why) { return WavError(fmt::format("{}: {}", path.string(), why)); };

  if (buf.size() < 12 || std::string(buf.begin(), buf.begin() + 4) != "RIFF" ||
      std::string(buf.begin() + 8, buf.begin() + 12) != "WAVE") {
    throw fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::uint32_t rate = 0;
  AudioClip clip;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.begin() + static_cast<std::ptrdiff_t>(pos), buf.begin() + static_cast<std::ptrdiff_t>(pos + 4));
    const std::size_t size = le32(&buf[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > buf.size()) throw fail("chunk runs past end of file");
    if (id == "fmt ") {
      if (size < 16) throw fail("short fmt chunk");
      const auto format = le16(&buf[body]);
      const auto channels = le16(&buf[body + 2]);
      rate = le32(&buf[body + 4]);
      const auto bits = le16(&buf[body + 14]);
      if (format != 1) throw fail("not PCM");
      if (channels != 1) throw fail("not mono");
      if (bits != 16) throw fail("not 16-bit");
      if (rate != kAudioSampleRate) throw fail("sample rate is not 16 kHz");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        clip.samples[i] = static_cast<std::int16_t>(le16(&buf[body + 2 * i]));
      }
      clip.sample_rate = rate;
      return clip;
    }
    pos = body + size + (size & 1);
  }
  throw fail("no data chunk");
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  const auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  tag("RIFF");
  put_le(out, 36 + data_bytes, 4);
  tag("WAVE");
  tag("fmt ");
  put_le(out, 16, 4);
  put_le(out, 1, 2);  // PCM
  put_le(out, 1, 2);  // mono
  put_le(out, clip.sample_rate, 4);
  put_le(out, clip.sample_rate * 2, 4);
  put_le(out, 2, 2);
  put_le(out, 16, 2);
  tag("data");
  put_le(out, data_bytes, 4);
  for (auto s : clip.samples) put_le(out, static_cast<std::uint16_t>(s), 2);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw WavError(fmt::format("cannot open {} for writing", path.string()));
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw WavError(fmt::format("write to {} failed", path.string()));
}

}  // namespace rpm::kws

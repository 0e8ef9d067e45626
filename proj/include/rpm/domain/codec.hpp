#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rpm/domain/types.hpp"

namespace rpm {

// Wire layout, all integers big-endian:
//   [0..4) magic | [4] version | [5] category | [6..10) patient | [10..14) seq
//   [14..18) total | [18..22) payload_len | payload | CRC-32 of everything before it
inline constexpr std::size_t kFrameHeaderSize = 22;
inline constexpr std::size_t kFrameCrcSize = 4;
inline constexpr std::size_t kFrameOverhead = kFrameHeaderSize + kFrameCrcSize;

class OversizeError : public Error {
 public:
  using Error::Error;
};

/// Raised for bytes that cannot be a frame. resync_skip() is how many bytes a
/// stream reader should discard before trying again.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::size_t skip) : Error(what), skip_(skip) {}
  std::size_t resync_skip() const { return skip_; }

 private:
  std::size_t skip_;
};

class CorruptionError : public Error {
 public:
  CorruptionError(const std::string& what, std::size_t skip) : Error(what), skip_(skip) {}
  std::size_t resync_skip() const { return skip_; }

 private:
  std::size_t skip_;
};

struct DecodedFrame {
  Frame frame;
  std::size_t consumed = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Throws OversizeError when the payload exceeds kMaxPayload, and
/// std::invalid_argument when seq/total/patient invariants are broken.
std::vector<std::uint8_t> encode_frame(const Frame& frame);

/// Appends the encoding to an existing buffer.
void encode_frame_into(const Frame& frame, std::vector<std::uint8_t>& out);

/// Decodes the first frame in buf. Returns std::nullopt when buf does not yet
/// hold a complete frame.
std::optional<DecodedFrame> decode_frame(std::span<const std::uint8_t> buf);

std::size_t encoded_size(const Frame& frame);

}  // namespace rpm

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rpm/domain/types.hpp"

namespace rpm {

class DuplicateSegmentError : public Error {
 public:
  using Error::Error;
};

class MixedSegmentsError : public Error {
 public:
  using Error::Error;
};

/// Splits payload into ceil(len / chunk_size) frames (one empty frame for an
/// empty payload). chunk_size must be in [1, kMaxPayload].
std::vector<Frame> segment_payload(PatientId patient, DataCategory category,
                                   std::span<const std::uint8_t> payload, std::size_t chunk_size);

struct Reassembly {
  std::optional<std::vector<std::uint8_t>> payload;
  std::vector<std::uint32_t> missing;  // ascending; empty when complete

  bool complete() const { return payload.has_value(); }
};

/// Frames may arrive in any order. Throws DuplicateSegmentError on a repeated
/// seq and MixedSegmentsError when patient, category or total disagree.
Reassembly reassemble(std::span<const Frame> frames);

}  // namespace rpm

#include "rpm/domain/segment.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "rpm/domain/codec.hpp"

namespace rpm {

std::vector<Frame> segment_payload(PatientId patient, DataCategory category,
                                   std::span<const std::uint8_t> payload, std::size_t chunk_size) {
  if (chunk_size == 0) throw std::invalid_argument("chunk_size must be at least 1");
  if (chunk_size > kMaxPayload) throw OversizeError(fmt::format("chunk_size {} exceeds {}", chunk_size, kMaxPayload));

  const std::size_t count = payload.empty() ? 1 : (payload.size() + chunk_size - 1) / chunk_size;
  std::vector<Frame> frames;
  frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Frame f;
    f.category = category;
    f.patient = patient;
    f.seq = static_cast<std::uint32_t>(i);
    f.total = static_cast<std::uint32_t>(count);
    const std::size_t begin = i * chunk_size;
    const std::size_t end = std::min(payload.size(), begin + chunk_size);
    if (begin < end) f.payload.assign(payload.begin() + begin, payload.begin() + end);
    frames.push_back(std::move(f));
  }
  return frames;
}

Reassembly reassemble(std::span<const Frame> frames) {
  if (frames.empty()) throw std::invalid_argument("reassemble needs at least one frame");
  const Frame& first = frames.front();
  const std::uint32_t total = first.total;

  std::vector<const Frame*> slots(total, nullptr);
  for (const Frame& f : frames) {
    if (f.patient != first.patient || f.category != first.category || f.total != total) {
      throw MixedSegmentsError("segments from different messages");
    }
    if (f.seq >= total) throw MixedSegmentsError(fmt::format("seq {} outside total {}", f.seq, total));
    if (slots[f.seq] != nullptr) throw DuplicateSegmentError(fmt::format("duplicate seq {}", f.seq));
    slots[f.seq] = &f;
  }

  Reassembly out;
  for (std::uint32_t i = 0; i < total; ++i) {
    if (slots[i] == nullptr) out.missing.push_back(i);
  }
  if (!out.missing.empty()) return out;

  std::vector<std::uint8_t> joined;
  std::size_t size = 0;
  for (const Frame* f : slots) size += f->payload.size();
  joined.reserve(size);
  for (const Frame* f : slots) joined.insert(joined.end(), f->payload.begin(), f->payload.end());
  out.payload = std::move(joined);
  return out;
}

}  // namespace rpm

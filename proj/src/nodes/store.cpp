#include "rpm/nodes/store.hpp"

namespace rpm::nodes {

void CloudStore::append(const Frame& frame, NodeRole source, Clock::time_point received) {
  StoredFrame entry{received, source, frame.category, frame.patient, frame.seq, frame.total, frame.payload.size(), {}};
  if (retain_) entry.payload = frame.payload;
  std::lock_guard lock(mu_);
  log_.push_back(std::move(entry));
  ++counters_[index_of(frame.category)];
}

std::size_t CloudStore::size() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

std::array<std::uint64_t, kCategoryCount> CloudStore::counters() const {
  std::lock_guard lock(mu_);
  return counters_;
}

std::uint64_t CloudStore::count_between(DataCategory c, Clock::time_point from, Clock::time_point to) const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& e : log_) n += e.category == c && e.received >= from && e.received < to;
  return n;
}

std::vector<StoredFrame> CloudStore::snapshot() const {
  std::lock_guard lock(mu_);
  return log_;
}

}  // namespace rpm::nodes

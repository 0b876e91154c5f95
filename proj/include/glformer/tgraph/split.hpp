#pragma once

#include <cmath>
#include <cstddef>

#include "glformer/tgraph/event.hpp"

namespace glformer {

// Contiguous chronological slice of a stream. Element reads are tallied so
// callers can audit which partitions a procedure touched.
class EventSplit {
 public:
  EventSplit() = default;
  EventSplit(const EventStream* stream, std::size_t begin, std::size_t end)
      : stream_(stream), begin_(begin), end_(end) {}

  std::size_t size() const noexcept { return end_ - begin_; }
  bool empty() const noexcept { return begin_ == end_; }
  std::size_t offset() const noexcept { return begin_; }
  const EventStream& stream() const { return *stream_; }

  const Event& operator[](std::size_t i) const {
    ++reads_;
    return stream_->events[begin_ + i];
  }

  std::size_t reads() const noexcept { return reads_; }

 private:
  const EventStream* stream_ = nullptr;
  std::size_t begin_ = 0;
  std::size_t end_ = 0;
  mutable std::size_t reads_ = 0;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct ChronologicalSplit {
  EventSplit train;
  EventSplit val;
  EventSplit test;
};

inline SplitSizes split_sizes(std::size_t n, double r_train, double r_val) {
  if (!(r_train > 0.0) || !(r_val >= 0.0) || !(r_train + r_val < 1.0)) {
    throw ContractError("chronological_split: need r_train > 0, r_val >= 0 and r_train + r_val < 1");
  }
  if (n == 0) throw ProtocolError("chronological_split: empty stream");
  SplitSizes s;
  s.train = static_cast<std::size_t>(std::floor(r_train * static_cast<double>(n)));
  s.val = static_cast<std::size_t>(std::floor(r_val * static_cast<double>(n)));
  s.test = n - s.train - s.val;
  return s;
}

// First ⌊r_train·n⌋ events train, next ⌊r_val·n⌋ validation, rest test.
inline ChronologicalSplit chronological_split(const EventStream& stream, double r_train, double r_val) {
  const SplitSizes s = split_sizes(stream.size(), r_train, r_val);
  return {EventSplit(&stream, 0, s.train), EventSplit(&stream, s.train, s.train + s.val),
          EventSplit(&stream, s.train + s.val, stream.size())};
}

}  // namespace glformer

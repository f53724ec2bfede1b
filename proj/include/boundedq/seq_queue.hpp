#pragma once

#include <cstdint>
#include <vector>

#include "boundedq/memory.hpp"
#include "boundedq/word.hpp"

namespace boundedq {

// Sequential bounded FIFO of capacity C: a circular array plus two
// monotone counters. The reference model every concurrent implementation
// is checked against; also the specification the linearizability checker
// replays candidate orders on.
class SeqQueue {
 public:
  explicit SeqQueue(std::uint64_t capacity)
      : capacity_(capacity), cells_(capacity, word::kNull0) {}

  bool enq(Word x) {
    if (enqueues_ == dequeues_ + capacity_) return false;
    cells_[enqueues_ % capacity_] = x;
    ++enqueues_;
    return true;
  }

  // Returns bot(0) when empty.
  Word deq() {
    if (dequeues_ == enqueues_) return word::kNull0;
    Word x = cells_[dequeues_ % capacity_];
    cells_[dequeues_ % capacity_] = word::kNull0;
    ++dequeues_;
    return x;
  }

  std::uint64_t size() const { return enqueues_ - dequeues_; }
  std::uint64_t capacity() const { return capacity_; }
  bool empty() const { return size() == 0; }
  bool full() const { return size() == capacity_; }

  // Queue content oldest-first; the checker keys memoization on this.
  std::vector<Word> content() const {
    std::vector<Word> out;
    out.reserve(size());
    for (std::uint64_t i = dequeues_; i != enqueues_; ++i)
      out.push_back(cells_[i % capacity_]);
    return out;
  }

  // Space accounting on the same footing as the concurrent queues: C
  // element cells plus the two counters.
  OverheadReport account() const {
    OverheadReport r;
    r.value_locations = capacity_;
    r.metadata_locations = 2;
    return r;
  }

 private:
  std::uint64_t capacity_;
  std::vector<Word> cells_;
  std::uint64_t enqueues_ = 0;
  std::uint64_t dequeues_ = 0;
};

}  // namespace boundedq

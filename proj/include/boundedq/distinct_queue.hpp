#pragma once

#include <cstdint>
#include <vector>

#include "boundedq/memory.hpp"
#include "boundedq/word.hpp"

namespace boundedq {

// Bounded queue over a C-cell circular array with O(1) additional memory.
// Correct only when all enqueued values are distinct: a cell is reused
// across rounds (round r of cell j is position r*C+j) and the only guard
// against a stale CAS is that the expected value cannot reappear. Cleared
// cells are stamped with the round-versioned null bot(r), so an enqueue
// that slept through its round fails its CAS against the moved-on marker.
//
// With duplicate values this queue is knowingly unsound; the ABA
// demonstration scenario drives exactly that failure.
template <class M>
class DistinctQueue {
 public:
  DistinctQueue(M& mem, std::uint64_t capacity, int /*nprocs*/)
      : mem_(mem), capacity_(capacity) {
    enqueues_ = mem_.alloc(Kind::Metadata, 0);
    dequeues_ = mem_.alloc(Kind::Metadata, 0);
    cells_.reserve(capacity);
    for (std::uint64_t j = 0; j < capacity; ++j)
      cells_.push_back(mem_.alloc(Kind::Value, word::null(0)));
  }

  bool enq(Proc p, Word x) {
    for (;;) {
      // No locals survive a retry; declare the loop head for state merging.
      mem_.checkpoint(p, 5, {});
      Word e = mem_.read(p, enqueues_);
      Word d = mem_.read(p, dequeues_);
      // Revalidate at the point d was read: the counter is monotone, so
      // passing there proves the (e, d) pair was simultaneous, which is
      // all a later revalidation point would establish.
      if (mem_.read_quiet(p, enqueues_) != e) continue;
      if (e == d + capacity_) return false;
      std::uint64_t round = e / capacity_;
      bool done = mem_.cas(p, cells_[e % capacity_], word::null(round), x);
      mem_.cas(p, enqueues_, e, e + 1);
      if (done) return true;
    }
  }

  Word deq(Proc p) {
    for (;;) {
      mem_.checkpoint(p, 6, {});
      Word d = mem_.read(p, dequeues_);
      Word e = mem_.read(p, enqueues_);
      Word x = mem_.read(p, cells_[d % capacity_]);
      // The dequeue revalidates its own counter. Revalidating enqueues
      // instead is not enough: an enqueue installs its element before
      // incrementing the counter, so a dequeue whose d went stale can
      // pass that check, consume the just-installed element of a *later*
      // position through the shared cell, and regress the round marker.
      // (Checked at the cell read's observation point; d is monotone, so
      // that proves it was constant across all three reads above.)
      if (mem_.read_quiet(p, dequeues_) != d) continue;
      if (e == d) return word::kNull0;
      std::uint64_t round = d / capacity_ + 1;  // marker of the next round
      bool done =
          x != word::null(round) &&
          mem_.cas(p, cells_[d % capacity_], x, word::null(round));
      mem_.cas(p, dequeues_, d, d + 1);
      if (done) return x;
    }
  }

  OverheadReport account() const {
    OverheadReport r;
    r.value_locations = capacity_;
    r.metadata_locations = 2;
    return r;
  }

  std::uint64_t capacity() const { return capacity_; }
  LocId enqueues_loc() const { return enqueues_; }
  LocId dequeues_loc() const { return dequeues_; }
  const std::vector<LocId>& cell_locs() const { return cells_; }

  static constexpr const char* kName = "distinct";

 private:
  M& mem_;
  std::uint64_t capacity_;
  LocId enqueues_ = kNoLoc;
  LocId dequeues_ = kNoLoc;
  std::vector<LocId> cells_;
};

}  // namespace boundedq

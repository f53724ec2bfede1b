#pragma once

#include <cstdint>
#include <vector>

#include "boundedq/memory.hpp"
#include "boundedq/word.hpp"

namespace boundedq {

// Bounded queue with O(1) additional memory synchronized through LL/SC.
// Identical in structure to the distinct-elements queue, but cells and
// counters are updated with store-conditional, so a stale update fails
// whenever the location changed since the matching load-link — duplicate
// values are safe and plain bot(0) suffices as the empty-cell marker.
//
// LL/SC here is the ideal primitive (no spurious failures, failure only on
// an intervening modification); the substrate emulates it with a per-word
// modification counter, reported separately in the space accounting.
template <class M>
class LlScQueue {
 public:
  LlScQueue(M& mem, std::uint64_t capacity, int /*nprocs*/)
      : mem_(mem), capacity_(capacity) {
    enqueues_ = mem_.alloc(Kind::Metadata, 0, /*llsc_capable=*/true);
    dequeues_ = mem_.alloc(Kind::Metadata, 0, /*llsc_capable=*/true);
    cells_.reserve(capacity);
    for (std::uint64_t j = 0; j < capacity; ++j)
      cells_.push_back(mem_.alloc(Kind::Value, word::kNull0,
                                  /*llsc_capable=*/true));
  }

  bool enq(Proc p, Word x) {
    for (;;) {
      // No locals survive a retry (cell links are substrate state, not
      // fiber state); declare the loop head for state merging.
      mem_.checkpoint(p, 7, {});
      Word e = mem_.read(p, enqueues_);
      Word d = mem_.read(p, dequeues_);
      Word state = mem_.ll(p, cells_[e % capacity_]);
      // Revalidate at the link point: the counter is monotone, so passing
      // there proves (e, d, state) were simultaneous, which is all a later
      // revalidation point would establish.
      if (mem_.read_quiet(p, enqueues_) != e) continue;
      if (e == d + capacity_) return false;
      bool done = state == word::kNull0 && mem_.sc(p, cells_[e % capacity_], x);
      if (mem_.ll(p, enqueues_) == e) mem_.sc(p, enqueues_, e + 1);
      if (done) return true;
    }
  }

  Word deq(Proc p) {
    for (;;) {
      mem_.checkpoint(p, 8, {});
      Word d = mem_.read(p, dequeues_);
      Word e = mem_.read(p, enqueues_);
      Word x = mem_.ll(p, cells_[d % capacity_]);
      // Same monotone-counter argument as in enq, at the cell link point.
      if (mem_.read_quiet(p, dequeues_) != d) continue;
      if (e == d) return word::kNull0;
      bool done = x != word::kNull0 &&
                  mem_.sc(p, cells_[d % capacity_], word::kNull0);
      if (mem_.ll(p, dequeues_) == d) mem_.sc(p, dequeues_, d + 1);
      if (done) return x;
    }
  }

  OverheadReport account() const {
    OverheadReport r;
    r.value_locations = capacity_;
    r.metadata_locations = 2;
    r.emulation_locations = capacity_ + 2;
    return r;
  }

  std::uint64_t capacity() const { return capacity_; }
  LocId enqueues_loc() const { return enqueues_; }
  LocId dequeues_loc() const { return dequeues_; }
  const std::vector<LocId>& cell_locs() const { return cells_; }

  static constexpr const char* kName = "llsc";

 private:
  M& mem_;
  std::uint64_t capacity_;
  LocId enqueues_ = kNoLoc;
  LocId dequeues_ = kNoLoc;
  std::vector<LocId> cells_;
};

}  // namespace boundedq

#pragma once

#include <cstdint>
#include <vector>

#include "boundedq/dcss.hpp"
#include "boundedq/memory.hpp"
#include "boundedq/word.hpp"

namespace boundedq {

// Bounded queue over a C-cell circular array synchronized with DCSS:
// every cell update is conditioned on the corresponding counter still
// holding the value from the snapshot, so a stale update from a paused
// operation fails even when the cell has cycled back to an identical
// word. Duplicate values are safe and plain bot(0) marks an empty cell.
// Overhead is O(n): the two counters plus the 2n recyclable DCSS
// descriptors.
template <class M>
class DcssQueue {
 public:
  DcssQueue(M& mem, std::uint64_t capacity, int nprocs)
      : mem_(mem), capacity_(capacity), dcss_(mem, nprocs) {
    enqueues_ = mem_.alloc(Kind::Metadata, 0);
    dequeues_ = mem_.alloc(Kind::Metadata, 0);
    cells_.reserve(capacity);
    for (std::uint64_t j = 0; j < capacity; ++j)
      cells_.push_back(mem_.alloc(Kind::Value, word::kNull0));
  }

  bool enq(Proc p, Word x) {
    for (;;) {
      // Every iteration starts from scratch: the only live local besides
      // the operation's own argument is which pooled descriptor the next
      // dcss() will draw.
      mem_.checkpoint(p, 1, {{kNoLoc, static_cast<Word>(dcss_.toggle(p))}});
      Word e = mem_.read(p, enqueues_);
      Word d = mem_.read(p, dequeues_);
      // Revalidate at the point d was read: the counter is monotone, so if
      // it is unchanged there, the (e, d) pair was simultaneous then, which
      // is all the later revalidation point would establish.
      if (mem_.read_quiet(p, enqueues_) != e) continue;
      if (e == d + capacity_) return false;
      bool done = dcss_.dcss(p, cells_[e % capacity_], word::kNull0, x,
                             enqueues_, e);
      mem_.cas(p, enqueues_, e, e + 1);
      if (done) return true;
    }
  }

  Word deq(Proc p) {
    for (;;) {
      mem_.checkpoint(p, 2, {{kNoLoc, static_cast<Word>(dcss_.toggle(p))}});
      Word d = mem_.read(p, dequeues_);
      Word e = mem_.read(p, enqueues_);
      Word x = dcss_.read(p, cells_[d % capacity_]);
      // Same monotone-counter argument as in enq: checking d at the cell
      // read's observation point proves d was constant across the reads of
      // e and the cell, which is all that matters for the checks below.
      if (mem_.read_quiet(p, dequeues_) != d) continue;
      if (e == d) return word::kNull0;
      bool done = x != word::kNull0 &&
                  dcss_.dcss(p, cells_[d % capacity_], x, word::kNull0,
                             dequeues_, d);
      mem_.cas(p, dequeues_, d, d + 1);
      if (done) return x;
    }
  }

  OverheadReport account() const {
    OverheadReport r;
    r.value_locations = capacity_;
    // 2 counters + 7 words per pooled descriptor.
    r.metadata_locations = 2 + dcss_.pool_size() * 7;
    r.descriptor_pool_size = dcss_.pool_size();
    return r;
  }

  std::uint64_t capacity() const { return capacity_; }
  LocId enqueues_loc() const { return enqueues_; }
  LocId dequeues_loc() const { return dequeues_; }
  const std::vector<LocId>& cell_locs() const { return cells_; }

  static constexpr const char* kName = "dcss";

 private:
  M& mem_;
  std::uint64_t capacity_;
  LocId enqueues_ = kNoLoc;
  LocId dequeues_ = kNoLoc;
  std::vector<LocId> cells_;
  Dcss<M> dcss_;
};

}  // namespace boundedq

#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

#include "boundedq/memory.hpp"
#include "boundedq/word.hpp"

namespace boundedq {

// Bounded queue over an infinite array simulated by a linked list of
// K-cell segments, with segment recycling from a fixed pool. Memory
// overhead is Theta(C/K + K*n): list bookkeeping plus reclamation slack.
//
// Position i lives in cell i%K of the segment with id i/K. Segment ids
// grow forever; a pool slot that is recycled comes back with a strictly
// larger id, so the pair (pool index, id) names one segment incarnation
// and is what head/next references carry (encoded as desc(index, id)).
//
// Cell protocol. A fresh cell of segment id s holds bot(2s); an enqueue
// installs its value with CAS bot(2s) -> x and a dequeue consumes it with
// CAS x -> bot(2s+1). The consumed marker is essential: with a plain
// x -> bot scheme, an enqueuer that paused just before its CAS could
// revive the cell after the element was already taken and report success
// for a value no dequeue can ever reach. Markers are never reused across
// incarnations because ids are never reused.
//
// Reclamation. Before touching a cell, an operation publishes its target
// position in announce[p] and then revalidates the counter it is working
// against; a segment is returned to the pool only after it is observed
// fully consumed *and* a subsequent scan of the announce array finds no
// position inside it. The standard hazard-pointer argument applies: a
// protector that validates after publishing either is seen by the scan or
// fails its validation, so no protected cell is ever recycled.
template <class M>
class SegmentQueue {
 public:
  SegmentQueue(M& mem, std::uint64_t capacity, int nprocs,
               std::uint64_t seg_size = 16)
      : mem_(mem), capacity_(capacity), nprocs_(nprocs), k_(seg_size) {
    // Live positions span at most C, touching ceil(C/K)+1 segments, plus
    // up to two per process: one announce-pinned retired segment and one
    // claimed-but-unlinked segment.
    std::uint64_t pool = (capacity + k_ - 1) / k_ + 1 + 2 * nprocs;
    enqueues_ = mem_.alloc(Kind::Metadata, 0);
    dequeues_ = mem_.alloc(Kind::Metadata, 0);
    for (std::uint64_t s = 0; s < pool; ++s) {
      Seg seg;
      bool first = s == 0;
      seg.id = mem_.alloc(Kind::Metadata, 0);
      seg.next = mem_.alloc(Kind::Metadata, word::null(0));
      seg.state = mem_.alloc(Kind::Metadata, first ? kInList : kFree);
      seg.cells.reserve(k_);
      for (std::uint64_t j = 0; j < k_; ++j)
        seg.cells.push_back(mem_.alloc(Kind::Value, word::null(0)));
      segs_.push_back(std::move(seg));
    }
    head_ = mem_.alloc(Kind::Metadata, word::desc(0, 0));
    announce_.reserve(nprocs);
    for (int p = 0; p < nprocs; ++p)
      announce_.push_back(mem_.alloc(Kind::Metadata, 0));
  }

  bool enq(Proc p, Word x) {
    for (;;) {
      // No locals survive a retry; declare the loop head for state merging.
      mem_.checkpoint(p, 9, {});
      Word e = mem_.read(p, enqueues_);
      mem_.write(p, announce_[p], e + 1);  // protect position e
      Word d = mem_.read(p, dequeues_);
      if (mem_.read(p, enqueues_) != e) continue;
      if (e == d + capacity_) return finish_enq(p, false);
      std::uint32_t idx = find(p, 11, e);
      if (idx == kNotFound) continue;
      bool done =
          mem_.cas(p, segs_[idx].cells[e % k_], fresh(e / k_), x);
      mem_.cas(p, enqueues_, e, e + 1);
      if (done) return finish_enq(p, true);
    }
  }

  Word deq(Proc p) {
    for (;;) {
      mem_.checkpoint(p, 10, {});
      Word d = mem_.read(p, dequeues_);
      mem_.write(p, announce_[p], d + 1);  // protect position d
      Word e = mem_.read(p, enqueues_);
      if (mem_.read(p, dequeues_) != d) continue;
      if (e == d) return finish_deq(p, word::kNull0);
      std::uint32_t idx = find(p, 12, d);
      if (idx == kNotFound) continue;
      Word x = mem_.read(p, segs_[idx].cells[d % k_]);
      bool done = word::is_value(x) &&
                  mem_.cas(p, segs_[idx].cells[d % k_], x, consumed(d / k_));
      mem_.cas(p, dequeues_, d, d + 1);
      if (done) return finish_deq(p, x);
    }
  }

  OverheadReport account() const {
    OverheadReport r;
    r.value_locations = segs_.size() * k_;
    // 3 words per segment (id, next, state) + head + 2 counters +
    // announce array.
    r.metadata_locations = segs_.size() * 3 + 3 + nprocs_;
    return r;
  }

  std::uint64_t capacity() const { return capacity_; }
  std::uint64_t seg_size() const { return k_; }
  LocId enqueues_loc() const { return enqueues_; }
  LocId dequeues_loc() const { return dequeues_; }

  static constexpr const char* kName = "segment";

 private:
  static constexpr std::uint32_t kNotFound = ~std::uint32_t{0};
  static constexpr Word kFree = 0, kClaimed = 1, kInList = 2, kRetired = 3;

  struct Seg {
    std::vector<LocId> cells;
    LocId id = kNoLoc;
    LocId next = kNoLoc;
    LocId state = kNoLoc;
  };

  static constexpr Word fresh(std::uint64_t id) { return word::null(2 * id); }
  static constexpr Word consumed(std::uint64_t id) {
    return word::null(2 * id + 1);
  }

  bool finish_enq(Proc p, bool res) {
    mem_.write(p, announce_[p], 0);
    return res;
  }
  Word finish_deq(Proc p, Word res) {
    mem_.write(p, announce_[p], 0);
    return res;
  }

  // Locate (pool index of) the segment holding position pos, appending
  // missing segments at the tail and advancing the head past fully
  // consumed ones along the way. Returns kNotFound if the list has moved
  // past the target (the position was consumed; caller re-reads counters).
  std::uint32_t find(Proc p, std::uint64_t site, std::uint64_t pos) {
    std::uint64_t target = pos / k_;
    for (;;) {
      // On a restart only pos survives: the caller's other snapshot
      // locals are dead once find is entered (enq keeps just its position
      // and argument, deq just its position), and the walk state below is
      // rebuilt from shared memory. The site distinguishes the two
      // continuations that follow a successful return.
      mem_.checkpoint(p, site, {{kNoLoc, pos}});
      Word h = mem_.read(p, head_);
      std::uint32_t idx = word::desc_idx(h);
      std::uint64_t id = word::desc_stamp(h);
      bool at_head = true;
      for (;;) {
        if (mem_.read(p, segs_[idx].id) != id) break;  // recycled; restart
        if (id == target) return idx;
        if (id > target) return kNotFound;
        Word nxt = mem_.read(p, segs_[idx].next);
        if (word::is_null(nxt)) {
          if (word::null_round(nxt) != id) break;
          if (!append(p, idx, id)) break;
          nxt = mem_.read(p, segs_[idx].next);
        }
        if (!word::is_desc(nxt) || word::desc_stamp(nxt) != id + 1) break;
        if (at_head) {
          // Unlink the head segment once every position in it is taken.
          Word d = mem_.read(p, dequeues_);
          if (d >= (id + 1) * k_ && mem_.cas(p, head_, h, nxt)) {
            mem_.cas(p, segs_[idx].state, kInList, kRetired);
            try_free(p, idx, id);
            break;  // head moved; restart from the new head
          }
        }
        idx = word::desc_idx(nxt);
        ++id;
        at_head = false;
      }
    }
  }

  // Build the successor of segment (pred, pred_id) and link it in.
  bool append(Proc p, std::uint32_t pred, std::uint64_t pred_id) {
    std::uint64_t id = pred_id + 1;
    std::uint32_t idx = claim(p);
    mem_.write(p, segs_[idx].id, id);
    // The segment is claimed and unlinked: no other process validates
    // against it until the link CAS publishes it, so cell setup does not
    // need to be interleaved.
    for (std::uint64_t j = 0; j < k_; ++j)
      mem_.write_quiet(p, segs_[idx].cells[j], fresh(id));
    mem_.write(p, segs_[idx].next, word::null(id));
    mem_.write(p, segs_[idx].state, kInList);
    if (mem_.cas(p, segs_[pred].next, word::null(pred_id),
                 word::desc(idx, id)))
      return true;
    bool released = mem_.cas(p, segs_[idx].state, kInList, kFree);
    assert(released);
    (void)released;
    return false;
  }

  std::uint32_t claim(Proc p) {
    for (;;) {
      for (std::uint32_t s = 0; s < segs_.size(); ++s) {
        if (mem_.read(p, segs_[s].state) == kFree &&
            mem_.cas(p, segs_[s].state, kFree, kClaimed))
          return s;
      }
      // Pool exhausted: sweep retired segments whose protectors are gone.
      for (std::uint32_t s = 0; s < segs_.size(); ++s) {
        if (mem_.read(p, segs_[s].state) == kRetired)
          try_free(p, s, mem_.read(p, segs_[s].id));
      }
    }
  }

  // Return a retired segment to the pool unless some announced position
  // still lies inside it.
  void try_free(Proc p, std::uint32_t idx, std::uint64_t id) {
    for (int q = 0; q < nprocs_; ++q) {
      Word a = mem_.read(p, announce_[q]);
      if (a != 0 && (a - 1) / k_ == id) return;
    }
    mem_.cas(p, segs_[idx].state, kRetired, kFree);
  }

  M& mem_;
  std::uint64_t capacity_;
  int nprocs_;
  std::uint64_t k_;
  LocId enqueues_ = kNoLoc;
  LocId dequeues_ = kNoLoc;
  LocId head_ = kNoLoc;
  std::vector<Seg> segs_;
  std::vector<LocId> announce_;
};

}  // namespace boundedq

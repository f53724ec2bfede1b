#pragma once

#include <cassert>
#include <cstdint>
#include <functional>
#include <vector>

#include "boundedq/memory.hpp"
#include "boundedq/word.hpp"

namespace boundedq {

// Bounded queue with Theta(n) overhead using only read/write/CAS, and a
// strict split between the C value cells and the metadata. Enqueues are
// mediated by EnqOp descriptors: a descriptor in the n-slot ops array
// that reached the "successful" status covers its cell exclusively; the
// covering thread writes the element into the cell and releases the slot.
// Status decisions are serialized through the single activeOp reference,
// with helping for lock-freedom. Dequeues never write cells: they read
// through readOp/findOp (the element may still live only in a
// descriptor) and advance the dequeues counter by CAS.
//
// Descriptors are recycled from a fixed pool of 2n. Reuse bumps the
// per-descriptor stamp; references carry the stamp (desc(index, stamp)),
// the status word packs it ((stamp<<2)|state), and every helper
// revalidates the stamp after reading the immutable fields, so an
// operation that slept across a reuse fails all of its CASes and
// validations. A descriptor is free when its flags word is clear:
// INFLIGHT is held by the creating operation until it returns, PUBLISHED
// from just before the descriptor enters the ops array until whoever
// removes it from the slot clears it. At most n descriptors are
// published (one per slot) and at most n-1 other processes hold one
// in-flight, so an acquiring process always finds a free descriptor.
template <class M>
class OptimalQueue {
 public:
  struct DescLocs {
    LocId stamp, e, x, i, status, flags;
  };

  OptimalQueue(M& mem, std::uint64_t capacity, int nprocs)
      : mem_(mem), capacity_(capacity), nprocs_(nprocs) {
    enqueues_ = mem_.alloc(Kind::Metadata, 0);
    dequeues_ = mem_.alloc(Kind::Metadata, 0);
    active_op_ = mem_.alloc(Kind::Metadata, word::kNull0);
    for (int s = 0; s < nprocs; ++s)
      ops_.push_back(mem_.alloc(Kind::Metadata, word::kNull0));
    for (std::uint64_t j = 0; j < capacity; ++j)
      cells_.push_back(mem_.alloc(Kind::Value, word::kNull0));
    for (int s = 0; s < 2 * nprocs; ++s) {
      DescLocs d;
      d.stamp = mem_.alloc(Kind::Metadata, 0);
      d.e = mem_.alloc(Kind::Metadata, 0);
      d.x = mem_.alloc(Kind::Metadata, 0);
      d.i = mem_.alloc(Kind::Metadata, 0);
      d.status = mem_.alloc(Kind::Metadata, 0);
      d.flags = mem_.alloc(Kind::Metadata, 0);
      mem_.register_stamp_domain(static_cast<std::uint32_t>(s), d.stamp,
                                 d.status);
      pool_.push_back(d);
    }
    // Stamp 0 is the never-acquired state of every pool entry.
    stamp_ctr_.assign(pool_.size(), 1);
  }

  bool enq(Proc p, Word x) {
    for (;;) {
      // Every iteration starts from scratch: no locals survive a retry.
      mem_.checkpoint(p, 3, {});
      Word e = mem_.read(p, enqueues_);
      Word d = mem_.read(p, dequeues_);
      // Revalidate at the point d was read: the counter is monotone, so if
      // it is unchanged there, the (e, d) pair was simultaneous then, which
      // is all the later revalidation point would establish.
      if (mem_.read_quiet(p, enqueues_) != e) continue;
      if (e == d + capacity_) return false;
      Op op = acquire(p, e, x);
      apply(p, op);
      mem_.cas(p, enqueues_, e, e + 1);
      bool ok = mem_.read_quiet(p, pool_[op.idx].status) ==
                pack(op.st, kTrue);  // own op, decided and final
      clear_flag(p, op.idx, kInflight);
      if (ok) return true;
    }
  }

  Word deq(Proc p) {
    for (;;) {
      mem_.checkpoint(p, 4, {});
      Word d = mem_.read(p, dequeues_);
      Word e = mem_.read(p, enqueues_);
      Word x = read_elem(p, d % capacity_);
      // Same monotone-counter argument as in enq: checking d at the last
      // observation point of read_elem proves it was constant across the
      // reads above, which is all the checks below rely on.
      if (mem_.read_quiet(p, dequeues_) != d) continue;
      if (e == d) return word::kNull0;
      if (mem_.cas(p, dequeues_, d, d + 1)) return x;
    }
  }

  OverheadReport account() const {
    OverheadReport r;
    r.value_locations = capacity_;
    // 2 counters + activeOp + n ops slots + 6 words per descriptor.
    r.metadata_locations = 3 + ops_.size() + pool_.size() * 6;
    r.descriptor_pool_size = pool_.size();
    return r;
  }

  std::uint64_t capacity() const { return capacity_; }
  LocId enqueues_loc() const { return enqueues_; }
  LocId dequeues_loc() const { return dequeues_; }
  LocId active_op_loc() const { return active_op_; }
  const std::vector<LocId>& cell_locs() const { return cells_; }
  const std::vector<LocId>& ops_locs() const { return ops_; }
  const std::vector<DescLocs>& desc_locs() const { return pool_; }

  static constexpr const char* kName = "optimal";
  static constexpr Word kBot = 0, kFalse = 1, kTrue = 2;

  // Observation hook: fires when an enqueue takes ownership of a pool
  // descriptor, before any shared writes to it. Lets external validators
  // attribute descriptor incarnations to the operation that created them.
  std::function<void(Proc, std::uint32_t /*idx*/, std::uint64_t /*stamp*/)>
      on_acquire;

  static constexpr Word pack(std::uint64_t stamp, Word state) {
    return (stamp << 2) | state;
  }

 private:
  static constexpr Word kInflight = 1, kPublished = 2;

  // The owning operation's view of its descriptor: everything immutable
  // is kept locally, shared reads are needed only for the status.
  struct Op {
    std::uint32_t idx;
    std::uint64_t st;
    Word e, x;
    std::uint64_t i;
    Word dw;  // desc(idx, st)
  };

  // What a scan of an ops slot observed: a stamp-validated snapshot of
  // one descriptor incarnation.
  struct Found {
    Word dw = word::kNull0;  // kNull0: no covering op found
    int slot = -1;
    Word e = 0, x = 0;
    std::uint64_t i = 0;
  };

  Op acquire(Proc p, Word e, Word x) {
    std::uint32_t idx;
    for (;;) {
      bool got = false;
      for (idx = 0; idx < pool_.size(); ++idx) {
        if (mem_.read_quiet(p, pool_[idx].flags) == 0 &&
            mem_.cas_quiet(p, pool_[idx].flags, 0, kInflight)) {
          got = true;
          break;
        }
      }
      if (got) break;
      // A full pass found nothing: at most 2n-1 descriptors can be
      // unavailable, so another process must be mid-transition. Take a
      // scheduling point before rescanning.
      mem_.read(p, enqueues_);
    }
    const DescLocs& d = pool_[idx];
    std::uint64_t st = stamp_ctr_[idx]++;
    if (on_acquire) on_acquire(p, idx, st);
    // Invalidate first (the loud write is the reuse boundary stale
    // helpers race against), then fill in the new incarnation.
    mem_.write(p, d.stamp, st);
    mem_.write_quiet(p, d.e, e);
    mem_.write_quiet(p, d.x, x);
    mem_.write_quiet(p, d.i, e % capacity_);
    mem_.write_quiet(p, d.status, pack(st, kBot));
    return Op{idx, st, e, x, e % capacity_, word::desc(idx, st)};
  }

  void clear_flag(Proc p, std::uint32_t idx, Word bit) {
    for (;;) {
      Word f = mem_.read_quiet(p, pool_[idx].flags);
      if (!mem_.cas_quiet(p, pool_[idx].flags, f, f & ~bit)) continue;
      // Whoever drops the last flag retires the descriptor: scrub the
      // argument fields and the status so every free descriptor looks
      // alike. The stamp stays valid, so a stale reader that already
      // passed a stamp check sees status 0 -- not the packed state of any
      // incarnation -- and falls through to its recycled-meanwhile path
      // exactly as if it had slept across the next reuse.
      if ((f & ~bit) == 0) {
        const DescLocs& d = pool_[idx];
        mem_.write_quiet(p, d.status, 0);
        mem_.write_quiet(p, d.e, 0);
        mem_.write_quiet(p, d.x, 0);
        mem_.write_quiet(p, d.i, 0);
      }
      return;
    }
  }

  // Scan ops for a successful descriptor covering cell i. Each slot is
  // snapshotted with stamp validation; a failed validation means the
  // slot's occupant was replaced and recycled mid-scan, so re-read it.
  Found find_op(Proc p, std::uint64_t i) {
    for (int slot = 0; slot < static_cast<int>(ops_.size()); ++slot) {
      for (;;) {
        Word w = mem_.read(p, ops_[slot]);
        if (!word::is_desc(w)) break;
        std::uint32_t idx = word::desc_idx(w);
        std::uint64_t st = word::desc_stamp(w);
        const DescLocs& d = pool_[idx];
        Word fe = mem_.read_quiet(p, d.e);
        Word fx = mem_.read_quiet(p, d.x);
        std::uint64_t fi = mem_.read_quiet(p, d.i);
        Word status = mem_.read(p, d.status);
        // A descriptor cannot be recycled while it sits in a slot (it is
        // published), so the fields read above -- taken at the same
        // instant as the slot read -- are the observed incarnation's. The
        // stamp can only have moved if the occupant left the slot after
        // our slot read; validating it against the status read needs no
        // extra observation point.
        if (mem_.read_quiet(p, d.stamp) != st) continue;  // recycled: rescan
        if (status == pack(st, kTrue) && fi == i)
          return Found{w, slot, fe, fx, fi};
        break;
      }
    }
    return Found{};
  }

  Word read_elem(Proc p, std::uint64_t i) {
    Found f = find_op(p, i);
    if (f.dw != word::kNull0) return f.x;
    return mem_.read(p, cells_[i]);
  }

  // Decide the status of the descriptor referenced by dw. On the helper
  // path (own == false, dw taken from activeOp) the descriptor may have
  // been decided, detached and recycled since, so the fields must be
  // stamp-validated; the creator holds the in-flight flag, which pins the
  // stamp for the duration.
  void try_put(Proc p, Word dw, bool own) {
    std::uint32_t idx = word::desc_idx(dw);
    std::uint64_t st = word::desc_stamp(dw);
    const DescLocs& d = pool_[idx];
    Word e = mem_.read_quiet(p, d.e);
    std::uint64_t i = mem_.read_quiet(p, d.i);
    if (own) {
      assert(mem_.read_quiet(p, d.stamp) == st);
    } else if (mem_.read(p, d.stamp) != st) {
      return;  // already decided and gone
    }
    Found f = find_op(p, i);
    if (f.dw != word::kNull0 && f.dw != dw)
      mem_.cas(p, d.status, pack(st, kBot), pack(st, kFalse));
    bool e_valid = mem_.read(p, enqueues_) == e;
    mem_.cas(p, d.status, pack(st, kBot),
             pack(st, e_valid ? kTrue : kFalse));
  }

  // Install op into activeOp, helping whatever currently occupies it.
  void start_put_op(Proc p, const Op& op) {
    for (;;) {
      Word cur = mem_.read(p, active_op_);
      if (cur != word::kNull0) {
        try_put(p, cur, /*own=*/false);
        mem_.cas(p, active_op_, cur, word::kNull0);
      }
      if (mem_.cas(p, active_op_, word::kNull0, op.dw)) return;
    }
  }

  // Put op into a free ops slot and decide its status; returns the slot
  // on success, -1 if the operation failed (slot already cleaned).
  int put_op(Proc p, const Op& op) {
    set_flag(p, op.idx, kPublished);
    int slot;
    for (std::uint64_t j = 0;; ++j) {
      slot = static_cast<int>((p + j) % ops_.size());
      if (mem_.cas(p, ops_[slot], word::kNull0, op.dw)) break;
    }
    start_put_op(p, op);
    try_put(p, op.dw, /*own=*/true);
    mem_.cas(p, active_op_, op.dw, word::kNull0);
    // Decided by now (try_put always resolves kBot), and final.
    if (mem_.read_quiet(p, pool_[op.idx].status) != pack(op.st, kTrue)) {
      mem_.write(p, ops_[slot], word::kNull0);  // only we touch a red slot
      clear_flag(p, op.idx, kPublished);
      return -1;
    }
    return slot;
  }

  // Write the covered cell and release the slot; we own the covering
  // rights, but the slot's descriptor may be replaced by a next-round
  // enqueue mid-way, in which case we complete that one too.
  void complete_op(Proc p, int slot) {
    for (;;) {
      Word w = mem_.read(p, ops_[slot]);
      assert(word::is_desc(w));
      std::uint32_t idx = word::desc_idx(w);
      std::uint64_t st = word::desc_stamp(w);
      const DescLocs& d = pool_[idx];
      Word fe = mem_.read_quiet(p, d.e);
      Word fx = mem_.read_quiet(p, d.x);
      std::uint64_t fi = mem_.read_quiet(p, d.i);
      // Same-instant field reads of a slotted (hence unrecyclable)
      // descriptor: the stamp necessarily still matches.
      if (mem_.read_quiet(p, d.stamp) != st) continue;
      mem_.write(p, cells_[fi], fx);
      mem_.cas(p, enqueues_, fe, fe + 1);
      if (mem_.cas(p, ops_[slot], w, word::kNull0)) {
        clear_flag(p, idx, kPublished);
        return;
      }
    }
  }

  void apply(Proc p, const Op& op) {
    Found cur = find_op(p, op.i);
    if (cur.dw == word::kNull0) {
      int slot = put_op(p, op);
      if (slot != -1) complete_op(p, slot);
      return;
    }
    if (cur.e >= op.e) {  // op slept into a later round
      mem_.write_quiet(p, pool_[op.idx].status, pack(op.st, kFalse));
      return;
    }
    // cur is a previous-round leftover: replace it and let its covering
    // thread write our element.
    mem_.write_quiet(p, pool_[op.idx].status, pack(op.st, kTrue));
    set_flag(p, op.idx, kPublished);
    if (mem_.cas(p, ops_[cur.slot], cur.dw, op.dw)) {
      clear_flag(p, word::desc_idx(cur.dw), kPublished);
      return;
    }
    clear_flag(p, op.idx, kPublished);
    mem_.write_quiet(p, pool_[op.idx].status, pack(op.st, kFalse));
  }

  void set_flag(Proc p, std::uint32_t idx, Word bit) {
    for (;;) {
      Word f = mem_.read_quiet(p, pool_[idx].flags);
      if (mem_.cas_quiet(p, pool_[idx].flags, f, f | bit)) return;
    }
  }

  M& mem_;
  std::uint64_t capacity_;
  int nprocs_;
  LocId enqueues_ = kNoLoc;
  LocId dequeues_ = kNoLoc;
  LocId active_op_ = kNoLoc;
  std::vector<LocId> ops_;
  std::vector<LocId> cells_;
  std::vector<DescLocs> pool_;
  // Local bookkeeping, not simulated memory. Stamps distinguish
  // incarnations of the *same* pool entry (references pair index and
  // stamp), so a per-descriptor counter suffices; only the current owner
  // bumps it, and ownership is handed over through the flags CAS.
  std::vector<std::uint64_t> stamp_ctr_;
};

}  // namespace boundedq

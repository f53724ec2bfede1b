#pragma once

#include <cstdint>
#include <vector>

#include "boundedq/memory.hpp"
#include "boundedq/word.hpp"

namespace boundedq {

// Double-compare-single-set over the word substrate, descriptor-based:
// DCSS(&a, expA, newA, &b, expB) writes newA to a iff a == expA and
// b == expB, atomically. Location b ("the control word") never holds a
// descriptor; location a may transiently hold one and readers of a must
// go through read() below.
//
// Descriptors come from a fixed pool of 2 per process and are recycled.
// Every reuse bumps the descriptor's stamp; the stamp is embedded both in
// the cell word desc(index, stamp) and in the status word, so a helper
// that wakes up after the descriptor moved on fails every validation and
// every CAS it attempts. Helpers bracket their (quiet) reads of the
// argument fields between two stamp checks; reinitialization bumps the
// stamp before touching the fields, so passing both checks proves the
// fields belonged to the observed incarnation.
template <class M>
class Dcss {
 public:
  Dcss(M& mem, int nprocs)
      : mem_(mem), toggle_(nprocs, 0), stamp_ctr_(2 * nprocs, 1) {
    for (int i = 0; i < 2 * nprocs; ++i) {
      Desc d;
      d.stamp = mem_.alloc(Kind::Metadata, 0);
      d.addr_a = mem_.alloc(Kind::Metadata, 0);
      d.exp_a = mem_.alloc(Kind::Metadata, 0);
      d.new_a = mem_.alloc(Kind::Metadata, 0);
      d.addr_b = mem_.alloc(Kind::Metadata, 0);
      d.exp_b = mem_.alloc(Kind::Metadata, 0);
      d.status = mem_.alloc(Kind::Metadata, 0);
      mem_.register_stamp_domain(static_cast<std::uint32_t>(i), d.stamp,
                                 d.status);
      pool_.push_back(d);
    }
  }

  bool dcss(Proc p, LocId a, Word exp_a, Word new_a, LocId b, Word exp_b) {
    std::uint32_t idx = static_cast<std::uint32_t>(2 * p + toggle_[p]);
    toggle_[p] ^= 1;
    const Desc& d = pool_[idx];
    std::uint64_t st = stamp_ctr_[idx]++;
    // Invalidate first, then fill in: a stale helper that read the old
    // stamp before the bump rechecks it after reading the fields. The bump
    // itself need not be a separate scheduling point: the previous
    // incarnation of our own descriptor was decided and detached before we
    // returned from it, so a helper running just before the bump can only
    // read frozen state and attempt CASes that fail.
    mem_.write_quiet(p, d.stamp, st);
    mem_.write_quiet(p, d.addr_a, a);
    mem_.write_quiet(p, d.exp_a, exp_a);
    mem_.write_quiet(p, d.new_a, new_a);
    mem_.write_quiet(p, d.addr_b, b);
    mem_.write_quiet(p, d.exp_b, exp_b);
    mem_.write_quiet(p, d.status, pack(st, kUndecided));
    Word dw = word::desc(idx, st);
    for (;;) {
      if (mem_.cas(p, a, exp_a, dw)) break;
      // Diagnose the failure at the CAS's own observation point: this is
      // exactly the value that made it fail. A later read could only see
      // the cell after further changes, and those schedules reach the same
      // retry with nothing written in between.
      Word cur = mem_.read_quiet(p, a);
      if (word::is_desc(cur)) {
        help(p, cur);
        continue;
      }
      if (cur != exp_a) return false;
    }
    resolve(p, idx, st, dw);
    // Our own descriptor is decided and detached; its status is stable
    // until we reuse it.
    bool ok = mem_.read_quiet(p, d.status) == pack(st, kSucceeded);
    // Retire: scrub the argument fields and the decided status so every
    // retired descriptor looks alike. A helper that raced past the detach
    // still holding dw now fails its status match and takes the
    // recycled-meanwhile path, same as if it had slept a little longer.
    mem_.write_quiet(p, d.status, 0);
    mem_.write_quiet(p, d.addr_a, 0);
    mem_.write_quiet(p, d.exp_a, 0);
    mem_.write_quiet(p, d.new_a, 0);
    mem_.write_quiet(p, d.addr_b, 0);
    mem_.write_quiet(p, d.exp_b, 0);
    return ok;
  }

  // Read location a, helping any in-flight DCSS out of the way first.
  Word read(Proc p, LocId a) {
    for (;;) {
      Word cur = mem_.read(p, a);
      if (!word::is_desc(cur)) return cur;
      help(p, cur);
    }
  }

  void help(Proc p, Word dw) {
    std::uint32_t idx = word::desc_idx(dw);
    std::uint64_t st = word::desc_stamp(dw);
    const Desc& d = pool_[idx];
    // Every caller obtained dw from a read of the cell, and this check is
    // anchored at that read: while the cell held dw the incarnation was
    // live, so its stamp still matched. On real hardware the read happens
    // later and the check guards against recycling; either way, passing it
    // proves the field reads below belong to the incarnation named by dw,
    // because reinitialization bumps the stamp before touching the fields.
    if (mem_.read_quiet(p, d.stamp) != st) return;  // recycled; moved on
    LocId a = static_cast<LocId>(mem_.read_quiet(p, d.addr_a));
    Word exp_a = mem_.read_quiet(p, d.exp_a);
    Word new_a = mem_.read_quiet(p, d.new_a);
    LocId b = static_cast<LocId>(mem_.read_quiet(p, d.addr_b));
    Word exp_b = mem_.read_quiet(p, d.exp_b);
    // Acting on the status as of the same observation point is fine: if it
    // is decided it stays decided until retirement, and retirement cannot
    // have happened while the cell still held dw; if it is undecided here
    // but decided by the time we act, our decide CAS simply fails.
    Word status = mem_.read_quiet(p, d.status);
    if (status == pack(st, kUndecided)) {
      Word v = mem_.read(p, b);
      Word decided = pack(st, v == exp_b ? kSucceeded : kFailed);
      mem_.cas(p, d.status, pack(st, kUndecided), decided);
      // Re-read at the CAS's own observation point. If the CAS lost, the
      // status was already decided then; a later overwrite can only come
      // from recycling, in which case every CAS below fails anyway, so no
      // behavior is lost by not taking a separate step here.
      status = mem_.read_quiet(p, d.status);
    }
    if (status == pack(st, kSucceeded))
      mem_.cas(p, a, dw, new_a);
    else if (status == pack(st, kFailed))
      mem_.cas(p, a, dw, exp_a);
    // else: recycled meanwhile; nothing to do, the cell no longer holds dw
  }

  std::uint64_t pool_size() const { return pool_.size(); }

  // Which of the process's two pooled descriptors the next dcss() uses;
  // callers include it in retry-loop checkpoints because it is live
  // process-local state the shared memory does not reflect.
  int toggle(Proc p) const { return toggle_[p]; }

 private:
  static constexpr Word kUndecided = 0, kSucceeded = 1, kFailed = 2;

  static constexpr Word pack(std::uint64_t stamp, Word state) {
    return (stamp << 2) | state;
  }

  struct Desc {
    LocId stamp, addr_a, exp_a, new_a, addr_b, exp_b, status;
  };

  // Decide and detach our own installed descriptor. The owner knows all
  // argument fields, so only status and the control word need steps.
  void resolve(Proc p, std::uint32_t idx, std::uint64_t st, Word dw) {
    const Desc& d = pool_[idx];
    // No status pre-check: the descriptor was undecided when we installed
    // it (nobody had seen it yet), so go straight to deciding; the status
    // CAS arbitrates against helpers that got there first.
    LocId b = static_cast<LocId>(mem_.read_quiet(p, d.addr_b));
    Word exp_b = mem_.read_quiet(p, d.exp_b);
    Word v = mem_.read(p, b);
    Word decided = pack(st, v == exp_b ? kSucceeded : kFailed);
    mem_.cas(p, d.status, pack(st, kUndecided), decided);
    // Own descriptor: once decided, the status is frozen until we recycle
    // it, so the CAS-point value is the value from here on.
    Word status = mem_.read_quiet(p, d.status);
    LocId a = static_cast<LocId>(mem_.read_quiet(p, d.addr_a));
    if (status == pack(st, kSucceeded))
      mem_.cas(p, a, dw, mem_.read_quiet(p, d.new_a));
    else
      mem_.cas(p, a, dw, mem_.read_quiet(p, d.exp_a));
  }

  M& mem_;
  std::vector<Desc> pool_;
  std::vector<int> toggle_;
  // Local bookkeeping, not simulated memory. Stamps only distinguish
  // incarnations of the same pool entry, so per-descriptor counters
  // suffice; each is bumped only by the descriptor's owning process.
  std::vector<std::uint64_t> stamp_ctr_;
};

}  // namespace boundedq

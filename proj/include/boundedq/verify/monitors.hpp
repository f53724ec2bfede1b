#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "boundedq/optimal_queue.hpp"
#include "boundedq/verify/instrumented.hpp"
#include "boundedq/word.hpp"

namespace boundedq {

// Checks the counter sandwich dequeues <= enqueues <= dequeues + C after
// every mutation of either counter. Works against any of the queue
// implementations since they all expose the two counters.
class CounterMonitor final : public Monitor {
 public:
  CounterMonitor(const InstrumentedMemory& mem, LocId enqueues, LocId dequeues,
                 std::uint64_t capacity)
      : mem_(mem), enq_(enqueues), deq_(dequeues), capacity_(capacity) {}

  void on_mutation(Proc, LocId l, Word, Word) override {
    if (l != enq_ && l != deq_) return;
    Word e = mem_.peek(enq_);
    Word d = mem_.peek(deq_);
    if (d <= e && e <= d + capacity_) return;
    std::ostringstream os;
    os << "counter sandwich violated: dequeues=" << d << " enqueues=" << e
       << " capacity=" << capacity_;
    violation(os.str());
  }

 private:
  const InstrumentedMemory& mem_;
  LocId enq_, deq_;
  std::uint64_t capacity_;
};

// Life-cycle automaton for the descriptor slots of the optimal queue.
// Legal slot transitions, with yellow/red/green standing for a slotted
// descriptor whose status is undecided/failed/successful:
//
//   empty -> yellow          (publication of an undecided descriptor)
//   yellow -> red | green    (status decision, same incarnation)
//   red -> empty             (cleanup by the failed operation)
//   green -> empty           (release after the covered cell is written)
//   green -> green'          (replacement by a successful descriptor of a
//                             strictly later round)
//
// Anything else -- publishing a decided-but-failed descriptor, removing an
// undecided one, recycling a descriptor while it is still visible in a
// slot, the same incarnation occupying two slots -- is flagged.
class SlotMonitor final : public Monitor {
 public:
  using OQ = OptimalQueue<InstrumentedMemory>;

  struct EdgeCounts {
    std::uint64_t install = 0;     // empty -> yellow
    std::uint64_t decide_true = 0;   // yellow -> green
    std::uint64_t decide_false = 0;  // yellow -> red
    std::uint64_t clean = 0;       // red -> empty
    std::uint64_t detach = 0;      // green -> empty
    std::uint64_t replace = 0;     // green -> green'
  };

  SlotMonitor(const InstrumentedMemory& mem, const OQ& q) : mem_(mem) {
    const auto& slots = q.ops_locs();
    for (std::size_t s = 0; s < slots.size(); ++s) slot_of_[slots[s]] = s;
    slot_word_.assign(slots.size(), word::kNull0);
    const auto& pool = q.desc_locs();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      status_of_[pool[i].status] = i;
      stamp_of_[pool[i].stamp] = i;
      descs_.push_back(pool[i]);
    }
  }

  const EdgeCounts& edges() const { return edges_; }

  void on_mutation(Proc, LocId l, Word oldw, Word neww) override {
    if (auto it = slot_of_.find(l); it != slot_of_.end())
      on_slot(it->second, oldw, neww);
    else if (auto st = status_of_.find(l); st != status_of_.end())
      on_status(st->second, oldw, neww);
    else if (auto sp = stamp_of_.find(l); sp != stamp_of_.end())
      on_stamp(sp->second);
  }

 private:
  enum class Color { Yellow, Red, Green, Corrupt };

  Color color(Word dw) const {
    std::uint32_t idx = word::desc_idx(dw);
    std::uint64_t st = word::desc_stamp(dw);
    if (mem_.peek(descs_[idx].stamp) != st) return Color::Corrupt;
    Word status = mem_.peek(descs_[idx].status);
    if (status == OQ::pack(st, OQ::kBot)) return Color::Yellow;
    if (status == OQ::pack(st, OQ::kFalse)) return Color::Red;
    if (status == OQ::pack(st, OQ::kTrue)) return Color::Green;
    return Color::Corrupt;
  }

  void on_slot(std::size_t s, Word oldw, Word neww) {
    if (slot_word_[s] != oldw) {
      violation("slot " + std::to_string(s) + " changed without notification");
    }
    slot_word_[s] = neww;
    bool old_desc = word::is_desc(oldw);
    bool new_desc = word::is_desc(neww);
    if (!old_desc && !new_desc) {
      violation("slot " + std::to_string(s) + ": empty -> empty rewrite");
      return;
    }
    if (new_desc) {
      for (std::size_t t = 0; t < slot_word_.size(); ++t)
        if (t != s && slot_word_[t] == neww)
          violation("descriptor " + word::to_string(neww) + " in two slots");
    }
    if (!old_desc) {
      // empty -> occupied: only an undecided descriptor may be published.
      if (color(neww) != Color::Yellow)
        violation("slot " + std::to_string(s) + ": published " +
                  word::to_string(neww) + " is not undecided");
      ++edges_.install;
      return;
    }
    Color from = color(oldw);
    if (!new_desc) {
      // occupied -> empty: legal from red (cleanup) or green (release).
      if (from == Color::Red)
        ++edges_.clean;
      else if (from == Color::Green)
        ++edges_.detach;
      else
        violation("slot " + std::to_string(s) + ": removed " +
                  word::to_string(oldw) + " while undecided");
      return;
    }
    // occupied -> occupied: replacement; both sides successful, and the
    // incoming round strictly later.
    if (from != Color::Green || color(neww) != Color::Green) {
      violation("slot " + std::to_string(s) + ": replacement " +
                word::to_string(oldw) + " -> " + word::to_string(neww) +
                " between non-successful descriptors");
      return;
    }
    Word old_e = mem_.peek(descs_[word::desc_idx(oldw)].e);
    Word new_e = mem_.peek(descs_[word::desc_idx(neww)].e);
    if (new_e <= old_e)
      violation("slot " + std::to_string(s) +
                ": replacement does not advance the round (" +
                std::to_string(old_e) + " -> " + std::to_string(new_e) + ")");
    ++edges_.replace;
  }

  void on_status(std::size_t idx, Word oldw, Word neww) {
    int s = find_slot(idx);
    if (s < 0) return;  // not visible in any slot: reinitialization
    std::uint64_t st = word::desc_stamp(slot_word_[s]);
    if (oldw != OQ::pack(st, OQ::kBot)) {
      violation("descriptor in slot " + std::to_string(s) +
                ": status changed after decision");
      return;
    }
    if (neww == OQ::pack(st, OQ::kTrue))
      ++edges_.decide_true;
    else if (neww == OQ::pack(st, OQ::kFalse))
      ++edges_.decide_false;
    else
      violation("descriptor in slot " + std::to_string(s) +
                ": status decided to foreign incarnation");
  }

  void on_stamp(std::size_t idx) {
    if (find_slot(idx) >= 0)
      violation("descriptor " + std::to_string(idx) +
                " recycled while still in a slot");
  }

  int find_slot(std::size_t idx) const {
    for (std::size_t s = 0; s < slot_word_.size(); ++s)
      if (word::is_desc(slot_word_[s]) &&
          word::desc_idx(slot_word_[s]) == idx)
        return static_cast<int>(s);
    return -1;
  }

  const InstrumentedMemory& mem_;
  std::unordered_map<LocId, std::size_t> slot_of_, status_of_, stamp_of_;
  std::vector<OQ::DescLocs> descs_;
  std::vector<Word> slot_word_;  // shadow of the ops array
  EdgeCounts edges_;
};

// Uniqueness of successful descriptors in the optimal queue:
//  - every counter position is bound by at most one descriptor incarnation
//    that became successful while published, and
//  - every completed enqueue produced exactly one such descriptor when it
//    returned true and none when it returned false.
// Attribution of incarnations to operations uses the queue's acquire hook
// (call `wire` once after construction).
class UniquenessMonitor final : public Monitor {
 public:
  using OQ = OptimalQueue<InstrumentedMemory>;

  UniquenessMonitor(const InstrumentedMemory& mem, const OQ& q, int nprocs)
      : mem_(mem), acquired_(nprocs) {
    const auto& slots = q.ops_locs();
    for (std::size_t s = 0; s < slots.size(); ++s) slot_of_[slots[s]] = s;
    slot_word_.assign(slots.size(), word::kNull0);
    const auto& pool = q.desc_locs();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      status_of_[pool[i].status] = i;
      descs_.push_back(pool[i]);
    }
  }

  // Registers the acquire hook; the queue outlives the run, the monitor
  // must outlive the queue's operations.
  void wire(OQ& q) {
    q.on_acquire = [this](Proc p, std::uint32_t idx, std::uint64_t st) {
      acquired_[p].push_back(key(idx, st));
    };
  }

  void on_mutation(Proc, LocId l, Word oldw, Word neww) override {
    if (auto it = slot_of_.find(l); it != slot_of_.end()) {
      slot_word_[it->second] = neww;
      // Publication of an already-successful descriptor (replacement).
      if (word::is_desc(neww) && in_state(neww, OQ::kTrue)) success(neww);
      return;
    }
    if (auto st = status_of_.find(l); st != status_of_.end()) {
      // Decision to successful while published in some slot.
      (void)oldw;
      for (Word w : slot_word_) {
        if (word::is_desc(w) && descs_[word::desc_idx(w)].status == l &&
            neww == OQ::pack(word::desc_stamp(w), OQ::kTrue))
          success(w);
      }
    }
  }

  void on_respond(Proc p, int, OpKind kind, Word result) override {
    if (kind != OpKind::Enq) return;
    std::uint64_t succ = 0;
    for (std::uint64_t k : acquired_[p]) {
      auto it = successes_.find(k);
      if (it != successes_.end()) {
        succ += it->second;
        successes_.erase(it);
      }
    }
    acquired_[p].clear();
    std::uint64_t want = result != 0 ? 1 : 0;
    if (succ != want)
      violation("enqueue by process " + std::to_string(p) + " produced " +
                std::to_string(succ) + " successful descriptors, expected " +
                std::to_string(want));
  }

  std::uint64_t positions_bound() const { return bindings_.size(); }

 private:
  static std::uint64_t key(std::uint32_t idx, std::uint64_t st) {
    return (st << 16) | idx;
  }

  bool in_state(Word dw, Word state) const {
    std::uint32_t idx = word::desc_idx(dw);
    std::uint64_t st = word::desc_stamp(dw);
    return mem_.peek(descs_[idx].status) == OQ::pack(st, state);
  }

  void success(Word dw) {
    std::uint64_t k = key(word::desc_idx(dw), word::desc_stamp(dw));
    std::uint64_t n = ++successes_[k];
    if (n > 1) {
      violation("descriptor " + word::to_string(dw) +
                " became successful twice");
      return;
    }
    Word pos = mem_.peek(descs_[word::desc_idx(dw)].e);
    auto [it, fresh] = bindings_.emplace(pos, k);
    if (!fresh && it->second != k)
      violation("position " + std::to_string(pos) +
                " bound by two successful descriptors");
  }

  const InstrumentedMemory& mem_;
  std::unordered_map<LocId, std::size_t> slot_of_, status_of_;
  std::vector<OQ::DescLocs> descs_;
  std::vector<Word> slot_word_;
  std::vector<std::vector<std::uint64_t>> acquired_;  // per process, open op
  std::unordered_map<std::uint64_t, std::uint64_t> successes_;
  std::map<Word, std::uint64_t> bindings_;  // position -> incarnation
};

}  // namespace boundedq

#pragma once

#include <atomic>
#include <cassert>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <utility>
#include <vector>

#include "boundedq/word.hpp"

namespace boundedq {

using LocId = std::uint32_t;
using Proc = int;

inline constexpr LocId kNoLoc = ~LocId{0};

// Classification of a shared-memory location. Fixed at allocation time.
enum class Kind : std::uint8_t { Value, Metadata };

// What a queue instance allocated, split the way the overhead accounting
// wants it: cells reserved for elements vs. everything else. Emulation
// words are the per-location modification counters the LL/SC emulation
// needs; hardware LL/SC would not have them, so they are reported
// separately instead of being folded into metadata_locations.
struct OverheadReport {
  std::uint64_t value_locations = 0;
  std::uint64_t metadata_locations = 0;
  std::uint64_t descriptor_pool_size = 0;
  std::uint64_t emulation_locations = 0;

  bool operator==(const OverheadReport&) const = default;
};

// Shared-memory substrate backed by real atomics. Used for benchmarks and
// single-threaded oracle-equivalence runs. The instrumented substrate in
// instrumented.hpp exposes the same operation set; queue algorithms are
// templated over the substrate and compiled against both.
//
// All locations must be allocated before concurrent use begins (queues
// allocate everything in their constructors, including descriptor and
// segment pools).
class NativeMemory {
 public:
  explicit NativeMemory(int nprocs) : links_(nprocs) {}

  NativeMemory(const NativeMemory&) = delete;
  NativeMemory& operator=(const NativeMemory&) = delete;

  LocId alloc(Kind kind, Word init, bool llsc_capable = false) {
    if (llsc_capable) {
      ll_locs_.emplace_back(kind, init);
      bump(kind);
      ++emulation_words_;
      return kLlBit | static_cast<LocId>(ll_locs_.size() - 1);
    }
    locs_.emplace_back(kind, init);
    bump(kind);
    return static_cast<LocId>(locs_.size() - 1);
  }

  Word read(Proc, LocId l) {
    if (l & kLlBit) return ll_locs_[l & ~kLlBit].load().word;
    return locs_[l].word.load();
  }

  void write(Proc, LocId l, Word v) {
    if (l & kLlBit) {
      auto& loc = ll_locs_[l & ~kLlBit];
      Pair cur = loc.load();
      while (!loc.cas(cur, Pair{v, cur.ver + 1})) {
      }
      return;
    }
    locs_[l].word.store(v);
  }

  bool cas(Proc, LocId l, Word expected, Word desired) {
    if (l & kLlBit) {
      auto& loc = ll_locs_[l & ~kLlBit];
      for (;;) {
        Pair cur = loc.load();
        if (cur.word != expected) return false;
        if (loc.cas(cur, Pair{desired, cur.ver + 1})) return true;
      }
    }
    Word e = expected;
    return locs_[l].word.compare_exchange_strong(e, desired);
  }

  Word ll(Proc p, LocId l) {
    assert(l & kLlBit);
    Pair cur = ll_locs_[l & ~kLlBit].load();
    set_link(p, l, cur);
    return cur.word;
  }

  // Ideal SC: succeeds iff the location was not modified (by any write,
  // CAS or SC, including same-value rewrites) since this process's LL.
  bool sc(Proc p, LocId l, Word v) {
    assert(l & kLlBit);
    Link* link = find_link(p, l);
    assert(link != nullptr && "SC without a prior LL on this location");
    Pair expected = link->snapshot;
    link->loc = kNoLoc;  // the link is consumed either way
    return ll_locs_[l & ~kLlBit].cas(expected, Pair{v, expected.ver + 1});
  }

  // Stamp domains and retry-loop checkpoints matter only to the
  // instrumented substrate's state hashing; nothing to record here.
  void register_stamp_domain(std::uint32_t, LocId, LocId) {}
  void checkpoint(Proc, Word,
                  std::initializer_list<std::pair<LocId, Word>>) {}

  // Quiet variants: same semantics, but in the instrumented substrate they
  // do not form a scheduling point. Identical to the loud ones here.
  Word read_quiet(Proc p, LocId l) { return read(p, l); }
  void write_quiet(Proc p, LocId l, Word v) { write(p, l, v); }
  bool cas_quiet(Proc p, LocId l, Word e, Word d) { return cas(p, l, e, d); }

  std::uint64_t count(Kind k) const {
    return k == Kind::Value ? value_words_ : metadata_words_;
  }
  std::uint64_t emulation_count() const { return emulation_words_; }

  static constexpr bool kInstrumented = false;

 private:
  static constexpr LocId kLlBit = LocId{1} << 31;

  struct alignas(16) Pair {
    Word word = 0;
    std::uint64_t ver = 0;
  };

  struct PlainLoc {
    PlainLoc(Kind k, Word init) : word(init), kind(k) {}
    std::atomic<Word> word;
    Kind kind;
  };

  struct LlLoc {
    LlLoc(Kind k, Word init) : kind(k) { pair.store(Pair{init, 0}); }
    Word load_word() { return pair.load().word; }
    Pair load() { return pair.load(); }
    bool cas(Pair expected, Pair desired) {
      return pair.compare_exchange_strong(expected, desired);
    }
    std::atomic<Pair> pair;
    Kind kind;
  };

  struct Link {
    LocId loc = kNoLoc;
    Pair snapshot;
  };

  void bump(Kind k) {
    if (k == Kind::Value)
      ++value_words_;
    else
      ++metadata_words_;
  }

  Link* find_link(Proc p, LocId l) {
    for (auto& link : links_[p])
      if (link.loc == l) return &link;
    return nullptr;
  }

  void set_link(Proc p, LocId l, Pair snap) {
    if (Link* link = find_link(p, l)) {
      link->snapshot = snap;
      return;
    }
    for (auto& link : links_[p]) {
      if (link.loc == kNoLoc) {
        link = Link{l, snap};
        return;
      }
    }
    links_[p].push_back(Link{l, snap});
  }

  std::deque<PlainLoc> locs_;
  std::deque<LlLoc> ll_locs_;
  std::vector<std::vector<Link>> links_;
  std::uint64_t value_words_ = 0;
  std::uint64_t metadata_words_ = 0;
  std::uint64_t emulation_words_ = 0;
};

}  // namespace boundedq

#pragma once

#include <algorithm>
#include <cassert>
#include <cstring>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "boundedq/memory.hpp"
#include "boundedq/verify/fiber.hpp"
#include "boundedq/verify/history.hpp"
#include "boundedq/word.hpp"

namespace boundedq {

class Controller;

// Pseudo-location marking a checkpoint entry in an observation log;
// distinct from kNoLoc so checkpoint summaries can never alias the boolean
// CAS/SC outcomes logged under kNoLoc.
inline constexpr LocId kCkptLoc = kNoLoc - 1;

// The shared-memory primitive a parked process is poised to execute next.
struct PrimOp {
  enum class Type : std::uint8_t { None, Read, Write, Cas, LL, SC, Idle };
  Type type = Type::None;
  LocId loc = kNoLoc;
  Word a = 0;  // write value / cas expected / sc value
  Word b = 0;  // cas desired

  bool mutating() const {
    return type == Type::Write || type == Type::Cas || type == Type::SC;
  }
};

// Observer attached to an instrumented run. Monitors are passive: they may
// inspect memory but never mutate it.
class Monitor {
 public:
  virtual ~Monitor() = default;
  virtual void on_mutation(Proc, LocId, Word /*old*/, Word /*new*/) {}
  virtual void on_respond(Proc, int /*op_index*/, OpKind, Word /*result*/) {}

  const std::vector<std::string>& violations() const { return violations_; }
  void clear_violations() { violations_.clear(); }

 protected:
  void violation(std::string msg) {
    if (violations_.size() < 64) violations_.push_back(std::move(msg));
    else ++dropped_;
  }

 private:
  std::vector<std::string> violations_;
  std::uint64_t dropped_ = 0;
};

// Step-instrumented shared memory. Every loud primitive parks the calling
// process fiber at a scheduling point before executing; quiet variants
// execute immediately and are reserved for accesses whose outcome is
// derivable from already-observed state (immutable descriptor fields,
// decided statuses) so they cannot introduce unexplored nondeterminism.
class InstrumentedMemory {
 public:
  explicit InstrumentedMemory(int nprocs) : links_(nprocs) {}

  InstrumentedMemory(const InstrumentedMemory&) = delete;
  InstrumentedMemory& operator=(const InstrumentedMemory&) = delete;

  void attach(Controller* c) { ctl_ = c; }

  LocId alloc(Kind kind, Word init, bool /*llsc_capable*/ = false) {
    locs_.push_back(Loc{init, 0, kind});
    if (kind == Kind::Value)
      ++value_words_;
    else
      ++metadata_words_;
    return static_cast<LocId>(locs_.size() - 1);
  }

  // Declares that `stamp_loc` holds descriptor desc_idx's reuse stamp and
  // `status_loc` its status packed as (stamp << 2) | state. Stamps are
  // compared only for equality and grow monotonically, so the exploration
  // state key stores their per-descriptor rank order instead of their
  // magnitude (exactly how LL/SC modification counters are reduced to
  // link validity); otherwise every retry would look like a new state.
  void register_stamp_domain(std::uint32_t desc_idx, LocId stamp_loc,
                             LocId status_loc) {
    if (loc_domain_.size() < locs_.size())
      loc_domain_.resize(locs_.size(), Domain{});
    loc_domain_[stamp_loc] = Domain{desc_idx, Domain::Kind::Stamp};
    loc_domain_[status_loc] = Domain{desc_idx, Domain::Kind::Status};
    if (desc_registered_.size() <= desc_idx)
      desc_registered_.resize(desc_idx + 1, 0);
    desc_registered_[desc_idx] = 1;
  }

  Word read(Proc p, LocId l);
  void write(Proc p, LocId l, Word v);
  bool cas(Proc p, LocId l, Word expected, Word desired);
  Word ll(Proc p, LocId l);
  bool sc(Proc p, LocId l, Word v);

  Word read_quiet(Proc, LocId l) const { return locs_[l].word; }
  void write_quiet(Proc p, LocId l, Word v) { mutate(p, l, v); }
  bool cas_quiet(Proc p, LocId l, Word expected, Word desired) {
    if (locs_[l].word != expected) return false;
    mutate(p, l, desired);
    return true;
  }

  // Retry-loop convergence declaration. An algorithm calls this at the top
  // of a retry loop to assert that its continuation from here depends only
  // on the identified code site and the listed fiber-local values (plus
  // shared memory and the operation in flight, which the state key already
  // covers). The observation log accumulated getting here is then replaced
  // by that summary, so schedules that reach the same loop head through
  // different retry histories collapse into one exploration state. Each
  // local is tagged with a location so stamp-valued locals canonicalize
  // like stamp-valued observations; use kNoLoc for plain values. The
  // declaration must cover every live local, including externals like
  // descriptor toggles; completeness is validated by comparing memoized
  // and unmemoized exploration outcomes.
  void checkpoint(Proc p, Word site,
                  std::initializer_list<std::pair<LocId, Word>> locals);

  // Test-only fault injection: bypasses the step machinery but still
  // reports the mutation to monitors.
  void poke(Proc p, LocId l, Word v) { mutate(p, l, v); }

  Word peek(LocId l) const { return locs_[l].word; }
  std::size_t num_locations() const { return locs_.size(); }

  std::uint64_t count(Kind k) const {
    return k == Kind::Value ? value_words_ : metadata_words_;
  }
  std::uint64_t emulation_count() const { return 0; }

  void clear_links(Proc p) { links_[p].clear(); }

  // Memory portion of the exploration state key: location words plus, per
  // process, which LL links are still valid. Modification counters are
  // excluded: they only influence behavior through link validity.
  // Registered descriptor stamps are emitted as per-descriptor ranks via
  // `stamps` (see register_stamp_domain); pass an empty table to emit raw
  // words.
  using StampTable = std::vector<std::vector<std::uint64_t>>;

  StampTable make_stamp_table() const {
    return StampTable(desc_registered_.size());
  }

  // First pass: record every stamp the given word exposes.
  void canon_note(LocId l, Word w, StampTable& stamps) const {
    if (l != kNoLoc && l < loc_domain_.size()) {
      const Domain& d = loc_domain_[l];
      if (d.kind == Domain::Kind::Stamp) {
        if (w != 0) stamps[d.idx].push_back(w);
        return;
      }
      if (d.kind == Domain::Kind::Status) {
        if (w != 0) stamps[d.idx].push_back(w >> 2);
        return;
      }
    }
    if (word::is_desc(w)) {
      std::uint32_t i = word::desc_idx(w);
      if (i < desc_registered_.size() && desc_registered_[i])
        stamps[i].push_back(word::desc_stamp(w));
    }
  }

  static void canon_finish(StampTable& stamps) {
    for (auto& v : stamps) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  // Second pass: rewrite the word with stamps replaced by their rank.
  Word canon_word(LocId l, Word w, const StampTable& stamps) const {
    if (stamps.empty()) return w;
    auto rank = [&stamps](std::uint32_t i, std::uint64_t s) {
      const auto& v = stamps[i];
      return static_cast<std::uint64_t>(
                 std::lower_bound(v.begin(), v.end(), s) - v.begin()) +
             1;
    };
    if (l != kNoLoc && l < loc_domain_.size()) {
      const Domain& d = loc_domain_[l];
      if (d.kind == Domain::Kind::Stamp)
        return w == 0 ? 0 : rank(d.idx, w);
      if (d.kind == Domain::Kind::Status)
        return w == 0 ? 0 : (rank(d.idx, w >> 2) << 2) | (w & 3);
    }
    if (word::is_desc(w)) {
      std::uint32_t i = word::desc_idx(w);
      if (i < desc_registered_.size() && desc_registered_[i])
        return word::desc(i, rank(i, word::desc_stamp(w)));
    }
    return w;
  }

  void serialize(Proc nprocs, std::string& out, const StampTable& stamps) const {
    append_u64(out, locs_.size());
    for (LocId l = 0; l < static_cast<LocId>(locs_.size()); ++l)
      append_u64(out, canon_word(l, locs_[l].word, stamps));
    for (Proc p = 0; p < nprocs; ++p) {
      append_u64(out, links_[p].size());
      for (const auto& link : links_[p]) {
        append_u64(out, link.loc);
        out.push_back(link.ver == locs_[link.loc].ver ? 1 : 0);
      }
    }
  }

  static void append_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
  }

  static constexpr bool kInstrumented = true;

 private:
  struct Loc {
    Word word;
    std::uint64_t ver;
    Kind kind;
  };

  struct Link {
    LocId loc;
    std::uint64_t ver;
  };

  struct Domain {
    std::uint32_t idx = 0;
    enum class Kind : std::uint8_t { None, Stamp, Status } kind = Kind::None;
  };

  void mutate(Proc p, LocId l, Word v);

  inline void step(Proc p, PrimOp op);
  inline void log_obs(Proc p, LocId l, Word response);

  std::vector<Loc> locs_;
  std::vector<std::vector<Link>> links_;
  std::vector<Domain> loc_domain_;
  std::vector<char> desc_registered_;
  Controller* ctl_ = nullptr;
  std::uint64_t value_words_ = 0;
  std::uint64_t metadata_words_ = 0;

  friend class Controller;
};

struct ProgOp {
  OpKind kind;
  Word arg = 0;
};

// Deterministic single-threaded scheduler driving one instrumented run.
// Each simulated process executes on a fiber; step(p) lets process p
// execute exactly one shared-memory primitive and advance to the next one.
class Controller {
 public:
  using Program = std::function<void(Proc)>;

  Controller(InstrumentedMemory& mem, int nprocs)
      : mem_(mem), procs_(nprocs) {
    mem_.attach(this);
  }

  int num_procs() const { return static_cast<int>(procs_.size()); }

  void set_program(Proc p, Program prog) { procs_[p].program = std::move(prog); }

  void add_monitor(Monitor* m) { monitors_.push_back(m); }
  const std::vector<Monitor*>& monitors() const { return monitors_; }

  void set_recording(bool on) { recording_ = on; }

  // When off, state keys carry raw stamp values and checkpoints are
  // ignored, so states are distinguished strictly more finely. Exploring
  // with reduction off is slower but trivially sound; comparing its
  // outcomes against reduced runs validates the reduction. Must be set
  // before start().
  void set_key_reduction(bool on) { reduce_keys_ = on; }

  // Launch all fibers and advance each to its first scheduling point.
  void start() {
    started_ = true;
    for (Proc p = 0; p < num_procs(); ++p) {
      auto& st = procs_[p];
      Program prog = st.program;
      st.fiber.start([prog, p] { prog(p); });
      current_ = p;
      st.fiber.resume();
      current_ = -1;
    }
  }

  bool finished(Proc p) const { return procs_[p].fiber.done(); }
  bool paused(Proc p) const { return procs_[p].paused; }
  void set_paused(Proc p, bool v) { procs_[p].paused = v; }
  bool enabled(Proc p) const { return !finished(p) && !paused(p); }

  bool all_finished() const {
    for (Proc p = 0; p < num_procs(); ++p)
      if (!finished(p)) return false;
    return true;
  }

  const PrimOp& pending(Proc p) const { return procs_[p].pending; }

  // Execute process p's pending primitive; p then runs to its next
  // scheduling point (or to program completion).
  void step(Proc p) {
    assert(started_ && !finished(p));
    ++steps_;
    current_ = p;
    procs_[p].fiber.resume();
    current_ = -1;
  }

  std::uint64_t steps_taken() const { return steps_; }

  // --- called from fiber context -------------------------------------
  void park(Proc p, PrimOp op) {
    auto& st = procs_[p];
    st.pending = op;
    st.fiber.park();
    st.pending = PrimOp{};
  }

  // The location accompanies the response so the state key can interpret
  // stamp-bearing observations; kNoLoc marks boolean CAS/SC outcomes.
  void log_obs(Proc p, LocId l, Word response) {
    procs_[p].obs.push_back({l, response});
  }

  // See InstrumentedMemory::checkpoint.
  void checkpoint(Proc p, Word site,
                  std::initializer_list<std::pair<LocId, Word>> locals) {
    if (!reduce_keys_) return;
    auto& obs = procs_[p].obs;
    obs.clear();
    obs.push_back({kCkptLoc, site});
    for (const auto& [l, w] : locals) obs.push_back({l, w});
  }

  int begin_op(Proc p, OpKind kind, Word arg) {
    auto& st = procs_[p];
    int index = st.ops_invoked++;
    if (!recording_) return -1;
    return history_.invoke(p, index, kind, arg);
  }

  void end_op(Proc p, int op_id, Word result) {
    auto& st = procs_[p];
    int index = st.ops_invoked - 1;
    ++st.ops_completed;
    st.obs.clear();
    mem_.clear_links(p);
    if (recording_ && op_id >= 0) history_.respond(op_id, result);
    OpKind kind = st.last_kind;
    for (Monitor* m : monitors_) m->on_respond(p, index, kind, result);
  }

  void note_op_kind(Proc p, OpKind k) { procs_[p].last_kind = k; }

  void on_mutation(Proc p, LocId l, Word oldw, Word neww) {
    for (Monitor* m : monitors_) m->on_mutation(p, l, oldw, neww);
  }
  // --------------------------------------------------------------------

  int ops_completed(Proc p) const { return procs_[p].ops_completed; }
  int ops_invoked(Proc p) const { return procs_[p].ops_invoked; }

  const History& history() const { return history_; }

  // Full exploration state key: memory + per-process control state +
  // abstract history (results and real-time precedence). Two runs with
  // equal keys have identical future behavior for every schedule.
  std::string state_key() const {
    std::string out;
    out.reserve(mem_.locs_.size() * 8 + 128);
    InstrumentedMemory::StampTable stamps;
    if (reduce_keys_) {
      stamps = mem_.make_stamp_table();
      if (!stamps.empty()) {
        for (LocId l = 0; l < static_cast<LocId>(mem_.locs_.size()); ++l)
          mem_.canon_note(l, mem_.locs_[l].word, stamps);
        for (const auto& ps : procs_)
          for (const auto& [l, w] : ps.obs) mem_.canon_note(l, w, stamps);
        InstrumentedMemory::canon_finish(stamps);
      }
    }
    mem_.serialize(num_procs(), out, stamps);
    for (Proc p = 0; p < num_procs(); ++p) {
      const auto& st = procs_[p];
      out.push_back(st.fiber.done() ? 1 : 0);
      InstrumentedMemory::append_u64(out, st.ops_invoked);
      InstrumentedMemory::append_u64(out, st.obs.size());
      for (const auto& [l, w] : st.obs) {
        InstrumentedMemory::append_u64(out, l);
        InstrumentedMemory::append_u64(out, mem_.canon_word(l, w, stamps));
      }
    }
    // Canonical order: by (proc, index), independent of invocation order.
    std::vector<const Operation*> sorted;
    sorted.reserve(history_.ops.size());
    for (const auto& op : history_.ops) sorted.push_back(&op);
    std::sort(sorted.begin(), sorted.end(),
              [](const Operation* a, const Operation* b) {
                return a->canon_id() < b->canon_id();
              });
    for (const Operation* op : sorted) {
      out.push_back(static_cast<char>(op->kind));
      out.push_back(op->completed ? 1 : 0);
      InstrumentedMemory::append_u64(out, op->arg);
      InstrumentedMemory::append_u64(out, op->completed ? op->result : 0);
      InstrumentedMemory::append_u64(out, op->inv_mask);
    }
    return out;
  }

  InstrumentedMemory& memory() { return mem_; }

 private:
  struct ProcState {
    Program program;
    Fiber fiber;
    PrimOp pending;
    bool paused = false;
    int ops_invoked = 0;
    int ops_completed = 0;
    OpKind last_kind = OpKind::Enq;
    std::vector<std::pair<LocId, Word>> obs;
  };

  InstrumentedMemory& mem_;
  std::vector<ProcState> procs_;
  std::vector<Monitor*> monitors_;
  History history_;
  bool recording_ = true;
  bool reduce_keys_ = true;
  bool started_ = false;
  std::uint64_t steps_ = 0;
  Proc current_ = -1;
};

// --- InstrumentedMemory primitive bodies ------------------------------

inline void InstrumentedMemory::step(Proc p, PrimOp op) {
  if (ctl_ != nullptr) ctl_->park(p, op);
}

inline void InstrumentedMemory::log_obs(Proc p, LocId l, Word response) {
  if (ctl_ != nullptr) ctl_->log_obs(p, l, response);
}

inline void InstrumentedMemory::checkpoint(
    Proc p, Word site, std::initializer_list<std::pair<LocId, Word>> locals) {
  if (ctl_ != nullptr) ctl_->checkpoint(p, site, locals);
}

inline void InstrumentedMemory::mutate(Proc p, LocId l, Word v) {
  Word old = locs_[l].word;
  locs_[l].word = v;
  ++locs_[l].ver;
  if (ctl_ != nullptr) ctl_->on_mutation(p, l, old, v);
}

inline Word InstrumentedMemory::read(Proc p, LocId l) {
  step(p, PrimOp{PrimOp::Type::Read, l, 0, 0});
  Word v = locs_[l].word;
  log_obs(p, l, v);
  return v;
}

inline void InstrumentedMemory::write(Proc p, LocId l, Word v) {
  step(p, PrimOp{PrimOp::Type::Write, l, v, 0});
  mutate(p, l, v);
}

inline bool InstrumentedMemory::cas(Proc p, LocId l, Word expected,
                                    Word desired) {
  step(p, PrimOp{PrimOp::Type::Cas, l, expected, desired});
  bool ok = locs_[l].word == expected;
  if (ok) mutate(p, l, desired);
  log_obs(p, kNoLoc, ok ? 1 : 0);
  return ok;
}

inline Word InstrumentedMemory::ll(Proc p, LocId l) {
  step(p, PrimOp{PrimOp::Type::LL, l, 0, 0});
  Word v = locs_[l].word;
  for (auto& link : links_[p]) {
    if (link.loc == l) {
      link.ver = locs_[l].ver;
      log_obs(p, l, v);
      return v;
    }
  }
  links_[p].push_back(Link{l, locs_[l].ver});
  log_obs(p, l, v);
  return v;
}

inline bool InstrumentedMemory::sc(Proc p, LocId l, Word v) {
  step(p, PrimOp{PrimOp::Type::SC, l, v, 0});
  bool found = false;
  std::uint64_t linked_ver = 0;
  for (auto it = links_[p].begin(); it != links_[p].end(); ++it) {
    if (it->loc == l) {
      found = true;
      linked_ver = it->ver;
      links_[p].erase(it);  // SC consumes the link
      break;
    }
  }
  assert(found && "SC without a prior LL on this location");
  if (!found) return false;
  bool ok = linked_ver == locs_[l].ver;
  if (ok) mutate(p, l, v);
  log_obs(p, kNoLoc, ok ? 1 : 0);
  return ok;
}

// Run one queue operation under the controller, recording it in the history.
template <class Q>
void run_recorded_op(Controller& c, Q& q, Proc p, ProgOp op) {
  c.note_op_kind(p, op.kind);
  int id = c.begin_op(p, op.kind, op.arg);
  Word res = op.kind == OpKind::Enq ? (q.enq(p, op.arg) ? 1 : 0) : q.deq(p);
  c.end_op(p, id, res);
}

// Fixed straight-line workload for one process.
template <class Q>
Controller::Program make_program(Controller& c, Q& q, std::vector<ProgOp> ops) {
  return [&c, &q, ops = std::move(ops)](Proc p) {
    for (const ProgOp& op : ops) run_recorded_op(c, q, p, op);
  };
}

}  // namespace boundedq

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "boundedq/queue_iface.hpp"
#include "boundedq/verify/checker.hpp"
#include "boundedq/verify/instrumented.hpp"
#include "boundedq/verify/monitors.hpp"

namespace boundedq {

// One instrumented execution: memory, scheduler and whatever objects the
// factory built on top (queue, monitors). The payload keeps them alive
// for the lifetime of the run.
struct Run {
  std::unique_ptr<InstrumentedMemory> mem;
  std::unique_ptr<Controller> ctl;
  std::shared_ptr<void> payload;
};

// Builds the system under test inside a fresh instrumented memory and
// registers each process's program; called once per (re-)execution, so
// anything stateful it creates must be per-run.
using RunFactory =
    std::function<std::shared_ptr<void>(InstrumentedMemory&, Controller&)>;

// 128-bit FNV-1a, folded into a set-friendly pair. Exploration stores
// these instead of full state keys: 16 bytes per visited state instead of
// hundreds, at a collision probability that is negligible for the state
// counts involved (< 2^-40 at 10^8 states).
struct KeyHash {
  std::uint64_t lo = 0, hi = 0;
  bool operator==(const KeyHash&) const = default;
};

struct KeyHashHasher {
  std::size_t operator()(const KeyHash& k) const { return k.lo ^ k.hi; }
};

inline KeyHash hash_key(const std::string& s) {
  std::uint64_t a = 0xcbf29ce484222325ull;
  std::uint64_t b = 0x84222325cbf29ce4ull;
  for (unsigned char c : s) {
    a = (a ^ c) * 0x100000001b3ull;
    b = (b ^ c) * 0x100000001b3ull;
    b ^= b >> 29;
  }
  return KeyHash{a, b};
}

inline Run make_run(const RunFactory& factory, int nprocs,
                    bool recording = true, bool reduce_keys = true) {
  Run r;
  r.mem = std::make_unique<InstrumentedMemory>(nprocs);
  r.ctl = std::make_unique<Controller>(*r.mem, nprocs);
  r.ctl->set_recording(recording);
  r.ctl->set_key_reduction(reduce_keys);
  r.payload = factory(*r.mem, *r.ctl);
  r.ctl->start();
  return r;
}

// ---------------------------------------------------------------------
// Ready-made factory for the five queue implementations with fixed
// per-process workloads and optional monitors. Violations and slot edge
// counts survive the run via the caller-owned sinks.

struct FactoryOptions {
  std::string impl;
  std::uint64_t capacity = 1;
  int nprocs = 1;
  std::uint64_t seg_size = 16;
  std::vector<std::vector<ProgOp>> programs;  // one straight-line list per proc
  bool monitor_counters = false;
  bool monitor_slots = false;       // optimal queue only
  bool monitor_uniqueness = false;  // optimal queue only
  std::vector<std::string>* violation_sink = nullptr;
  SlotMonitor::EdgeCounts* edge_totals = nullptr;
};

namespace detail {

struct QueueRun {
  std::unique_ptr<IQueue<InstrumentedMemory>> queue;
  std::vector<std::unique_ptr<Monitor>> monitors;
  std::vector<std::string>* violation_sink = nullptr;
  SlotMonitor::EdgeCounts* edge_totals = nullptr;
  SlotMonitor* slot_monitor = nullptr;

  ~QueueRun() {
    if (violation_sink != nullptr) {
      for (const auto& m : monitors)
        for (const auto& v : m->violations())
          if (violation_sink->size() < 64) violation_sink->push_back(v);
    }
    if (edge_totals != nullptr && slot_monitor != nullptr) {
      const auto& e = slot_monitor->edges();
      edge_totals->install += e.install;
      edge_totals->decide_true += e.decide_true;
      edge_totals->decide_false += e.decide_false;
      edge_totals->clean += e.clean;
      edge_totals->detach += e.detach;
      edge_totals->replace += e.replace;
    }
  }
};

}  // namespace detail

inline RunFactory queue_run_factory(FactoryOptions o) {
  return [o](InstrumentedMemory& mem, Controller& ctl) -> std::shared_ptr<void> {
    auto run = std::make_shared<detail::QueueRun>();
    run->violation_sink = o.violation_sink;
    run->edge_totals = o.edge_totals;
    run->queue = make_queue<InstrumentedMemory>(o.impl, mem, o.capacity,
                                                o.nprocs, o.seg_size);
    IQueue<InstrumentedMemory>& q = *run->queue;
    if (o.monitor_counters) {
      run->monitors.push_back(std::make_unique<CounterMonitor>(
          mem, q.enqueues_loc(), q.dequeues_loc(), o.capacity));
    }
    if (o.monitor_slots || o.monitor_uniqueness) {
      auto* adapter = dynamic_cast<
          QueueAdapter<InstrumentedMemory, OptimalQueue<InstrumentedMemory>>*>(
          &q);
      if (adapter != nullptr) {
        auto& oq = adapter->impl();
        if (o.monitor_slots) {
          auto sm = std::make_unique<SlotMonitor>(mem, oq);
          run->slot_monitor = sm.get();
          run->monitors.push_back(std::move(sm));
        }
        if (o.monitor_uniqueness) {
          auto um = std::make_unique<UniquenessMonitor>(mem, oq, o.nprocs);
          um->wire(oq);
          run->monitors.push_back(std::move(um));
        }
      }
    }
    for (auto& m : run->monitors) ctl.add_monitor(m.get());
    for (Proc p = 0; p < o.nprocs; ++p) {
      std::vector<ProgOp> ops =
          p < static_cast<int>(o.programs.size()) ? o.programs[p]
                                                  : std::vector<ProgOp>{};
      ctl.set_program(p, make_program(ctl, q, std::move(ops)));
    }
    return run;
  };
}

// ---------------------------------------------------------------------
// Exhaustive schedule exploration at shared-memory-primitive granularity.
//
// Depth-first search over the schedule tree with state memoization: two
// prefixes reaching the same state key (memory contents, per-process
// control state, abstract history) have identical futures, so the subtree
// is explored once. Since fibers cannot be forked, backtracking replays
// the prefix on a fresh run; soundness rests on determinism of a run
// under a fixed schedule, which is tested separately.

struct ExploreOptions {
  std::uint64_t capacity = 1;   // sequential capacity for history checking
  bool check_histories = true;
  bool memoize = true;
  bool reduce_keys = true;  // see Controller::set_key_reduction
  bool record_paths = false;    // keep one witness schedule per state
  bool collect_histories = false;  // gather distinct terminal histories
  std::uint64_t max_depth = 100000;     // per-schedule stall guard
  std::uint64_t max_states = 200000000;  // global budget
  // Obstruction-freedom analysis folded into the exploration. For every
  // explored state the search already takes each unfinished process's next
  // step once; with solo_graph on, those (state, process) -> successor
  // edges are retained, together with whether the step completed an
  // operation. After the search, walking a process's edges from any state
  // replays exactly the run it would take in isolation (the steps of a
  // fixed process from a fixed state are deterministic), so requiring a
  // completing edge within solo_budget steps from every state checks that
  // every process finishes its current operation alone -- without any
  // per-state replays. Requires memoize; supports up to 4 processes.
  bool solo_graph = false;
  std::uint64_t solo_budget = 10000;
  // Invoked once per newly discovered state with the live run and the
  // schedule that reached it; lets callers probe every reachable state
  // (e.g. for progress properties) without retaining every path.
  const std::function<void(const Run&, const std::vector<std::uint8_t>&)>*
      on_state = nullptr;
};

struct ExploreResult {
  std::uint64_t states = 0;     // distinct states visited
  std::uint64_t runs = 0;       // executions (initial + replays)
  std::uint64_t terminals = 0;  // schedules driven to completion
  std::uint64_t checked = 0;    // terminal histories checked for
                                // linearizability (deduplicated)
  bool budget_exhausted = false;
  bool stalled = false;  // some schedule exceeded max_depth: the
                         // implementation may not terminate
  std::vector<std::string> failures;  // non-linearizable history dumps
  std::vector<std::vector<std::uint8_t>> paths;  // if record_paths
  std::vector<std::string> histories;  // if collect_histories: distinct
                                       // canon_string() forms, sorted
  std::uint64_t solo_pairs = 0;         // (state, active process) pairs
  std::uint64_t solo_failed_pairs = 0;  // pairs without solo completion
  std::vector<std::string> solo_failures;  // descriptions, capped

  bool clean() const {
    return failures.empty() && solo_failures.empty() && !budget_exhausted &&
           !stalled;
  }
};

class Explorer {
 public:
  Explorer(RunFactory factory, int nprocs, ExploreOptions opt = {})
      : factory_(std::move(factory)), nprocs_(nprocs), opt_(opt) {}

  Run replay(const std::vector<std::uint8_t>& path) const {
    Run r = make_run(factory_, nprocs_, true, opt_.reduce_keys);
    for (std::uint8_t p : path) r.ctl->step(p);
    return r;
  }

  ExploreResult explore() const {
    ExploreResult res;
    struct Frame {
      std::vector<std::uint8_t> enabled;
      std::size_t next = 0;
      std::uint32_t node = 0;  // graph id of the expanded state
    };
    std::vector<Frame> stack;
    std::vector<std::uint8_t> path;
    // Visited states, mapped to their graph index when solo_graph is on
    // (the mapped value is unused otherwise; the node size is the same).
    std::unordered_map<KeyHash, std::uint32_t, KeyHashHasher> visited;
    std::vector<SoloNode> graph;
    std::set<std::string> history_set;
    LinChecker checker(opt_.capacity);

    const bool solo = opt_.solo_graph && opt_.memoize;
    if (solo && nprocs_ > kSoloProcs)
      throw std::invalid_argument("solo_graph supports at most 4 processes");
    if (solo && opt_.solo_budget >= kSoloOpen)
      throw std::invalid_argument("solo_budget must fit the step memo");

    // One step was just taken from `edge_from` by `edge_proc`; committed
    // into the graph once the destination state's id is known.
    bool edge_pending = false;
    std::uint32_t edge_from = 0;
    std::uint8_t edge_proc = 0;
    bool edge_completing = false;

    Run run = make_run(factory_, nprocs_, true, opt_.reduce_keys);
    ++res.runs;

    bool done = false;
    while (!done) {
      // Expand the current state (the run sits at the end of `path`).
      bool revisit = false;
      std::uint32_t cur = 0;
      if (path.size() > opt_.max_depth) {
        res.stalled = true;
        edge_pending = false;
      } else {
        if (opt_.memoize) {
          auto [it, fresh] = visited.emplace(
              hash_key(run.ctl->state_key()),
              static_cast<std::uint32_t>(graph.size()));
          revisit = !fresh;
          cur = it->second;
          if (solo) {
            if (fresh) {
              graph.emplace_back();
              for (Proc p = 0; p < nprocs_; ++p)
                if (run.ctl->finished(p))
                  graph.back().finished |= std::uint8_t{1} << p;
            }
            if (edge_pending) {
              SoloNode& from = graph[edge_from];
              from.child[edge_proc] = cur;
              from.has_edge |= std::uint8_t{1} << edge_proc;
              if (edge_completing)
                from.completing |= std::uint8_t{1} << edge_proc;
              edge_pending = false;
            }
          }
        }
        if (revisit) {
          if (run.ctl->all_finished()) ++res.terminals;
        } else {
          ++res.states;
          if (res.states > opt_.max_states) {
            res.budget_exhausted = true;
            break;
          }
          if (opt_.record_paths) res.paths.push_back(path);
          if (opt_.on_state != nullptr) (*opt_.on_state)(run, path);
          if (run.ctl->all_finished()) {
            ++res.terminals;
            if (opt_.collect_histories)
              history_set.insert(run.ctl->history().canon_string());
            if (opt_.check_histories) {
              ++res.checked;
              Verdict v = checker.check(run.ctl->history());
              if (v.kind == Verdict::Kind::NotLinearizable &&
                  res.failures.size() < 16) {
                res.failures.push_back(run.ctl->history().to_string());
              } else if (v.kind == Verdict::Kind::Inconclusive) {
                res.budget_exhausted = true;
              }
            }
          } else {
            Frame f;
            for (Proc p = 0; p < nprocs_; ++p)
              if (run.ctl->enabled(p)) f.enabled.push_back(
                  static_cast<std::uint8_t>(p));
            f.node = cur;
            if (!f.enabled.empty()) {
              std::uint8_t p = f.enabled[0];
              stack.push_back(std::move(f));
              int before = run.ctl->ops_completed(p);
              run.ctl->step(p);
              if (solo) {
                edge_pending = true;
                edge_from = cur;
                edge_proc = p;
                edge_completing = run.ctl->ops_completed(p) > before;
              }
              path.push_back(p);
              continue;
            }
            // No process can run (everything paused): dead schedule.
          }
        }
      }
      // Backtrack to the deepest frame with an untried choice and replay.
      for (;;) {
        if (stack.empty()) {
          done = true;
          break;
        }
        Frame& f = stack.back();
        ++f.next;
        if (f.next < f.enabled.size()) {
          path.resize(stack.size() - 1);
          run = replay(path);
          ++res.runs;
          std::uint8_t p = f.enabled[f.next];
          int before = run.ctl->ops_completed(p);
          run.ctl->step(p);
          if (solo) {
            edge_pending = true;
            edge_from = f.node;
            edge_proc = p;
            edge_completing = run.ctl->ops_completed(p) > before;
          }
          path.push_back(p);
          break;
        }
        stack.pop_back();
      }
    }
    res.histories.assign(history_set.begin(), history_set.end());
    // A stalled or truncated search leaves edges dangling; the graph walk
    // would report those as missing rather than as genuine progress
    // failures, and the result is already not clean().
    if (solo && !res.stalled && !res.budget_exhausted)
      solo_walk(graph, res);
    return res;
  }

  int num_procs() const { return nprocs_; }

 private:
  static constexpr int kSoloProcs = 4;
  static constexpr std::uint16_t kSoloFail = 0xFFFF;
  static constexpr std::uint16_t kSoloOpen = 0xFFFE;  // walk in progress

  // Per-state record of each process's next step: destination state and
  // whether the step completed an operation. steps[] memoizes the walk
  // below: 0 = not computed yet, kSoloFail = no completion within budget.
  struct SoloNode {
    std::uint32_t child[kSoloProcs] = {0, 0, 0, 0};
    std::uint16_t steps[kSoloProcs] = {0, 0, 0, 0};
    std::uint8_t has_edge = 0;
    std::uint8_t completing = 0;
    std::uint8_t finished = 0;
  };

  // For every state and every process still running there, follow that
  // process's edges until a step completes an operation. Since each
  // state's per-process successor is unique, the edges form a functional
  // graph per process; a chain that revisits an open node is a solo
  // livelock. Results memoize backwards along the chain, so the whole
  // analysis is linear in (states x processes).
  void solo_walk(std::vector<SoloNode>& graph, ExploreResult& res) const {
    const std::uint64_t budget = opt_.solo_budget;
    std::vector<std::uint32_t> chain;
    for (std::uint32_t s0 = 0; s0 < graph.size(); ++s0) {
      for (int p = 0; p < nprocs_; ++p) {
        if (graph[s0].finished >> p & 1) continue;
        ++res.solo_pairs;
        if (graph[s0].steps[p] == 0) {
          chain.clear();
          std::uint32_t s = s0;
          std::uint32_t tail;  // steps needed after the end of the chain
          for (;;) {
            SoloNode& n = graph[s];
            if (n.finished >> p & 1) {
              tail = 0;  // the last step also ended the program
              break;
            }
            if (n.steps[p] == kSoloOpen) {
              tail = kSoloFail;  // cycle: running alone never completes
              break;
            }
            if (n.steps[p] != 0) {
              tail = n.steps[p];
              break;
            }
            if (!(n.has_edge >> p & 1)) {
              tail = kSoloFail;  // dangling edge (truncated search)
              break;
            }
            n.steps[p] = kSoloOpen;
            chain.push_back(s);
            if (n.completing >> p & 1) {
              tail = 0;
              break;
            }
            s = n.child[p];
          }
          std::uint64_t acc = tail;
          for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            if (acc != kSoloFail && ++acc > budget) acc = kSoloFail;
            graph[*it].steps[p] = static_cast<std::uint16_t>(acc);
          }
        }
        if (graph[s0].steps[p] == kSoloFail) {
          ++res.solo_failed_pairs;
          if (res.solo_failures.size() < 8)
            res.solo_failures.push_back(
                "process " + std::to_string(p) +
                " does not complete its operation alone within " +
                std::to_string(budget) + " steps from explored state " +
                std::to_string(s0));
        }
      }
    }
  }

  RunFactory factory_;
  int nprocs_;
  ExploreOptions opt_;
};

// ---------------------------------------------------------------------
// Progress probes.

struct ProbeResult {
  std::uint64_t states_probed = 0;
  std::uint64_t probes_run = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

// Obstruction freedom: from every recorded reachable state, each process
// that still has work must finish its current operation within `budget`
// steps when run alone. States along a successful solo run are certified
// for that process as a side effect (their solo run is a suffix of the
// observed one), which keeps the number of replays close to the number of
// distinct (state, process) pairs.
inline ProbeResult solo_completion_probe(const Explorer& ex,
                                         const ExploreResult& explored,
                                         std::uint64_t budget = 10000) {
  ProbeResult res;
  std::unordered_set<std::string> certified;  // hashed state key + proc
  auto tag = [](const std::string& key, Proc p) {
    KeyHash h = hash_key(key);
    std::string t(reinterpret_cast<const char*>(&h), sizeof h);
    t.push_back(static_cast<char>(p));
    return t;
  };
  for (const auto& path : explored.paths) {
    ++res.states_probed;
    Run probe = ex.replay(path);
    std::string key0 = probe.ctl->state_key();
    std::vector<std::uint8_t> todo;
    for (Proc p = 0; p < ex.num_procs(); ++p) {
      if (!probe.ctl->finished(p) && !certified.count(tag(key0, p)))
        todo.push_back(static_cast<std::uint8_t>(p));
    }
    for (std::uint8_t pb : todo) {
      Proc p = pb;
      Run solo = ex.replay(path);
      ++res.probes_run;
      int before = solo.ctl->ops_completed(p);
      std::vector<std::string> chain;
      chain.push_back(key0);
      bool completed = false;
      for (std::uint64_t s = 0; s < budget; ++s) {
        solo.ctl->step(p);
        if (solo.ctl->finished(p) || solo.ctl->ops_completed(p) > before) {
          completed = true;
          break;
        }
        chain.push_back(solo.ctl->state_key());
      }
      if (completed) {
        for (const auto& k : chain) certified.insert(tag(k, p));
      } else if (res.failures.size() < 8) {
        res.failures.push_back(
            "process " + std::to_string(p) + " failed to finish its " +
            "operation alone within " + std::to_string(budget) +
            " steps from a state at depth " + std::to_string(path.size()));
      }
    }
  }
  return res;
}

// Lock freedom under a crashed process: freeze one process at an
// arbitrary point of its execution and require that the others keep
// completing operations in every window of `window` steps, until their
// programs run out. Returns false (with a description) on starvation.
inline bool starvation_probe(const RunFactory& factory, int nprocs,
                             Proc frozen, std::uint64_t seed,
                             std::uint64_t window = 10000,
                             std::uint64_t windows = 10,
                             std::string* err = nullptr) {
  std::mt19937_64 rng(seed);
  Run run = make_run(factory, nprocs, /*recording=*/false);
  // Let everything (the victim included) run a little so the freeze hits
  // a random point inside an operation.
  std::uint64_t warm = rng() % 500;
  for (std::uint64_t s = 0; s < warm; ++s) {
    std::vector<Proc> en;
    for (Proc p = 0; p < nprocs; ++p)
      if (run.ctl->enabled(p)) en.push_back(p);
    if (en.empty()) return true;  // programs exhausted before the freeze
    run.ctl->step(en[rng() % en.size()]);
  }
  run.ctl->set_paused(frozen, true);
  for (std::uint64_t w = 0; w < windows; ++w) {
    int before = 0;
    for (Proc p = 0; p < nprocs; ++p) before += run.ctl->ops_completed(p);
    for (std::uint64_t s = 0; s < window; ++s) {
      std::vector<Proc> en;
      for (Proc p = 0; p < nprocs; ++p)
        if (run.ctl->enabled(p)) en.push_back(p);
      if (en.empty()) return true;  // survivors finished all their work
      run.ctl->step(en[rng() % en.size()]);
    }
    int after = 0;
    for (Proc p = 0; p < nprocs; ++p) after += run.ctl->ops_completed(p);
    if (after == before) {
      if (err != nullptr)
        *err = "no operation completed in a " + std::to_string(window) +
               "-step window with process " + std::to_string(frozen) +
               " frozen (seed " + std::to_string(seed) + ")";
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------
// Seeded random schedule: picks a uniformly random enabled process for
// each step. Deterministic for a fixed factory and seed.

struct StressResult {
  std::uint64_t steps = 0;
  bool completed = false;  // all programs ran to completion
};

inline StressResult random_stress(const RunFactory& factory, int nprocs,
                                  std::uint64_t seed, std::uint64_t max_steps,
                                  bool recording = false,
                                  History* out_history = nullptr) {
  std::mt19937_64 rng(seed);
  Run run = make_run(factory, nprocs, recording);
  StressResult res;
  while (res.steps < max_steps) {
    std::vector<Proc> en;
    for (Proc p = 0; p < nprocs; ++p)
      if (run.ctl->enabled(p)) en.push_back(p);
    if (en.empty()) {
      res.completed = true;
      break;
    }
    run.ctl->step(en[rng() % en.size()]);
    ++res.steps;
  }
  if (out_history != nullptr) *out_history = run.ctl->history();
  return res;
}

}  // namespace boundedq

#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "boundedq/queue_iface.hpp"
#include "boundedq/verify/checker.hpp"
#include "boundedq/verify/instrumented.hpp"

namespace boundedq {

// Declarative interleaving scenarios: a small line-oriented text format
// naming the implementation under test and a sequence of scheduling
// directives. The interesting directive is `begin ... poise k`, which
// starts an operation and advances it until its k-th mutating shared
// memory primitive is pending, leaving the process poised immediately
// before the commit step; other processes then run to completion between
// `begin` and the matching `resume`. The recorded history is checked for
// linearizability at the end.
//
// Grammar (one directive per line, `#` starts a comment):
//   queue <impl>             implementation name (see make_queue)
//   capacity <C>
//   procs <n>
//   segsize <K>              segment length, segment queue only
//   run <p> enq <v>          run one operation to completion on process p
//   run <p> deq
//   begin <p> enq <v> [poise <k>]   start, pause before k-th mutation (default 1)
//   begin <p> deq [poise <k>]
//   resume <p>               let p finish its poised operation
//   fill <p> [dup <v>]       C enqueues on p; fresh values, or v repeated
//   empty <p>                C dequeues on p

struct ScenarioCmd {
  enum class Kind : std::uint8_t { Run, Begin, Resume, Fill, Empty };
  Kind kind = Kind::Run;
  Proc proc = 0;
  OpKind op = OpKind::Enq;
  Word arg = 0;
  int poise = 1;
  bool dup = false;
};

struct Scenario {
  std::string impl;
  std::uint64_t capacity = 1;
  int nprocs = 2;
  std::uint64_t seg_size = 16;
  std::vector<ScenarioCmd> cmds;

  static Scenario parse(const std::string& text) {
    Scenario sc;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto fail = [&lineno](const std::string& msg) {
      throw std::runtime_error("scenario line " + std::to_string(lineno) +
                               ": " + msg);
    };
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      std::istringstream ls(line);
      std::string word;
      if (!(ls >> word)) continue;
      auto next_u64 = [&](const char* what) {
        std::uint64_t v;
        if (!(ls >> v)) fail(std::string("expected ") + what);
        return v;
      };
      auto next_proc = [&] { return static_cast<Proc>(next_u64("process id")); };
      auto next_opkind = [&](ScenarioCmd& c) {
        std::string k;
        if (!(ls >> k)) fail("expected enq or deq");
        if (k == "enq") {
          c.op = OpKind::Enq;
          c.arg = word::value(next_u64("enqueue value"));
        } else if (k == "deq") {
          c.op = OpKind::Deq;
        } else {
          fail("expected enq or deq, got '" + k + "'");
        }
      };
      if (word == "queue") {
        if (!(ls >> sc.impl)) fail("expected implementation name");
      } else if (word == "capacity") {
        sc.capacity = next_u64("capacity");
      } else if (word == "procs") {
        sc.nprocs = static_cast<int>(next_u64("process count"));
      } else if (word == "segsize") {
        sc.seg_size = next_u64("segment size");
      } else if (word == "run" || word == "begin") {
        ScenarioCmd c;
        c.kind = word == "run" ? ScenarioCmd::Kind::Run
                               : ScenarioCmd::Kind::Begin;
        c.proc = next_proc();
        next_opkind(c);
        std::string opt;
        if (ls >> opt) {
          if (opt == "poise" && c.kind == ScenarioCmd::Kind::Begin)
            c.poise = static_cast<int>(next_u64("poise index"));
          else
            fail("unexpected token '" + opt + "'");
        }
        sc.cmds.push_back(c);
      } else if (word == "resume") {
        ScenarioCmd c;
        c.kind = ScenarioCmd::Kind::Resume;
        c.proc = next_proc();
        sc.cmds.push_back(c);
      } else if (word == "fill") {
        ScenarioCmd c;
        c.kind = ScenarioCmd::Kind::Fill;
        c.proc = next_proc();
        std::string opt;
        if (ls >> opt) {
          if (opt != "dup") fail("unexpected token '" + opt + "'");
          c.dup = true;
          c.arg = word::value(next_u64("duplicate value"));
        }
        sc.cmds.push_back(c);
      } else if (word == "empty") {
        ScenarioCmd c;
        c.kind = ScenarioCmd::Kind::Empty;
        c.proc = next_proc();
        c.op = OpKind::Deq;
        sc.cmds.push_back(c);
      } else {
        fail("unknown directive '" + word + "'");
      }
    }
    if (sc.impl.empty())
      throw std::runtime_error("scenario: missing 'queue' directive");
    for (const auto& c : sc.cmds)
      if (c.proc < 0 || c.proc >= sc.nprocs)
        throw std::runtime_error("scenario: directive references process " +
                                 std::to_string(c.proc) + " of " +
                                 std::to_string(sc.nprocs));
    return sc;
  }
};

struct ScenarioResult {
  std::string impl;
  std::uint64_t capacity = 0;
  History history;
  Verdict verdict;

  bool linearizable() const {
    return verdict.kind == Verdict::Kind::Linearizable;
  }

  // Machine-readable report: verdict plus the full event trace.
  nlohmann::json report() const {
    nlohmann::json j;
    j["impl"] = impl;
    j["capacity"] = capacity;
    switch (verdict.kind) {
      case Verdict::Kind::Linearizable: j["verdict"] = "linearizable"; break;
      case Verdict::Kind::NotLinearizable:
        j["verdict"] = "not-linearizable";
        break;
      case Verdict::Kind::Inconclusive: j["verdict"] = "inconclusive"; break;
    }
    nlohmann::json events = nlohmann::json::array();
    for (const Event& e : history.events) {
      nlohmann::json ev;
      ev["proc"] = e.p;
      ev["type"] = e.is_invoke ? "call" : "return";
      ev["op"] = e.kind == OpKind::Enq ? "enq" : "deq";
      if (e.kind == OpKind::Enq) ev["arg"] = word::to_string(e.arg);
      if (!e.is_invoke) ev["result"] = word::to_string(e.result);
      events.push_back(std::move(ev));
    }
    j["events"] = std::move(events);
    return j;
  }
};

// Executes a parsed scenario on a fresh instrumented run. The
// implementation name can be overridden so one script discriminates
// between algorithms. Throws std::runtime_error on directive misuse
// (resuming a process with nothing poised, an operation finishing before
// its poise point, a poised process asked to run again).
inline ScenarioResult run_scenario(const Scenario& sc,
                                   const std::string& impl_override = "") {
  const std::string impl = impl_override.empty() ? sc.impl : impl_override;
  const int n = sc.nprocs;

  struct Feed {
    std::deque<ProgOp> ops;
    bool stop = false;
  };
  std::vector<Feed> feeds(n);

  InstrumentedMemory mem(n);
  Controller ctl(mem, n);
  auto queue = make_queue<InstrumentedMemory>(impl, mem, sc.capacity, n,
                                              sc.seg_size);
  IQueue<InstrumentedMemory>& q = *queue;
  for (Proc p = 0; p < n; ++p) {
    Feed* f = &feeds[p];
    ctl.set_program(p, [&ctl, &q, f](Proc self) {
      for (;;) {
        while (f->ops.empty()) {
          if (f->stop) return;
          ctl.park(self, PrimOp{PrimOp::Type::Idle, kNoLoc, 0, 0});
        }
        ProgOp op = f->ops.front();
        f->ops.pop_front();
        run_recorded_op(ctl, q, self, op);
      }
    });
  }
  ctl.start();

  std::vector<bool> poised(n, false);
  constexpr std::uint64_t kStepCap = 1000000;
  auto fail = [](const std::string& msg) {
    throw std::runtime_error("scenario execution: " + msg);
  };
  auto complete = [&](Proc p) {
    int before = ctl.ops_completed(p);
    for (std::uint64_t s = 0; ctl.ops_completed(p) == before; ++s) {
      if (s >= kStepCap) fail("operation exceeded the step cap");
      ctl.step(p);
    }
  };
  auto run_one = [&](Proc p, ProgOp op) {
    if (poised[p]) fail("process " + std::to_string(p) + " is poised");
    feeds[p].ops.push_back(op);
    complete(p);
  };

  std::uint64_t fresh = 100;  // fill values disjoint from script literals
  for (const ScenarioCmd& c : sc.cmds) {
    switch (c.kind) {
      case ScenarioCmd::Kind::Run:
        run_one(c.proc, ProgOp{c.op, c.arg});
        break;
      case ScenarioCmd::Kind::Fill:
        for (std::uint64_t i = 0; i < sc.capacity; ++i)
          run_one(c.proc,
                  ProgOp{OpKind::Enq, c.dup ? c.arg : word::value(fresh++)});
        break;
      case ScenarioCmd::Kind::Empty:
        for (std::uint64_t i = 0; i < sc.capacity; ++i)
          run_one(c.proc, ProgOp{OpKind::Deq, 0});
        break;
      case ScenarioCmd::Kind::Begin: {
        Proc p = c.proc;
        if (poised[p]) fail("process " + std::to_string(p) + " is poised");
        feeds[p].ops.push_back(ProgOp{c.op, c.arg});
        int before = ctl.ops_completed(p);
        int seen = 0;
        for (std::uint64_t s = 0;; ++s) {
          if (s >= kStepCap) fail("poise point not reached within step cap");
          if (ctl.ops_completed(p) > before)
            fail("operation completed before its poise point");
          const PrimOp& pend = ctl.pending(p);
          if (pend.mutating() && ++seen == c.poise) break;
          ctl.step(p);
        }
        poised[p] = true;
        break;
      }
      case ScenarioCmd::Kind::Resume: {
        Proc p = c.proc;
        if (!poised[p]) fail("process " + std::to_string(p) + " not poised");
        poised[p] = false;
        complete(p);
        break;
      }
    }
  }

  ScenarioResult res;
  res.impl = impl;
  res.capacity = sc.capacity;
  res.history = ctl.history();
  res.verdict = LinChecker(sc.capacity).check(res.history);
  return res;
}

inline ScenarioResult run_scenario_text(const std::string& text,
                                        const std::string& impl_override = "") {
  return run_scenario(Scenario::parse(text), impl_override);
}

}  // namespace boundedq

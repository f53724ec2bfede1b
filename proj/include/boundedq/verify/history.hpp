#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "boundedq/word.hpp"

namespace boundedq {

using Proc = int;

enum class OpKind : std::uint8_t { Enq, Deq };

// One invocation or response event, in harness observation order.
struct Event {
  Proc p = 0;
  bool is_invoke = false;
  OpKind kind = OpKind::Enq;
  Word arg = 0;     // enq argument (invoke events)
  Word result = 0;  // response events; enq: 1/0, deq: value or bot(0)
  int op_id = -1;   // index into History::ops
};

// One high-level operation extracted from the event log.
struct Operation {
  Proc p = 0;
  int index_in_proc = 0;  // 0-based per-process sequence number
  OpKind kind = OpKind::Enq;
  Word arg = 0;
  bool completed = false;
  Word result = 0;
  // Bit i set: operation with canonical id i completed before this one was
  // invoked (the real-time precedence the checker must respect).
  std::uint64_t inv_mask = 0;

  // Canonical id, stable across interleavings that produce the same
  // abstract history.
  int canon_id() const { return p * 8 + index_in_proc; }
};

struct History {
  std::vector<Event> events;
  std::vector<Operation> ops;

  int invoke(Proc p, int index_in_proc, OpKind kind, Word arg) {
    std::uint64_t mask = 0;
    for (const auto& op : ops)
      if (op.completed && op.canon_id() < 64)
        mask |= std::uint64_t{1} << op.canon_id();
    Operation op;
    op.p = p;
    op.index_in_proc = index_in_proc;
    op.kind = kind;
    op.arg = arg;
    op.inv_mask = mask;
    ops.push_back(op);
    int id = static_cast<int>(ops.size()) - 1;
    events.push_back(Event{p, true, kind, arg, 0, id});
    return id;
  }

  void respond(int op_id, Word result) {
    ops[op_id].completed = true;
    ops[op_id].result = result;
    events.push_back(
        Event{ops[op_id].p, false, ops[op_id].kind, ops[op_id].arg, result, op_id});
  }

  // True iff a precedes b in real time (a responded before b was invoked).
  bool precedes(int a, int b) const {
    return (ops[b].inv_mask >> ops[a].canon_id()) & 1;
  }

  std::string to_string() const;

  // Abstraction-level identity: two histories are the same concurrent
  // behavior iff they have the same operations with the same results and
  // the same real-time precedence. Event order beyond that (e.g. which of
  // two concurrent responses was logged first) is not part of it, so this
  // form is the right one for comparing explored history sets.
  std::string canon_string() const;
};

inline std::string History::to_string() const {
  std::string s;
  for (const auto& e : events) {
    s += "p" + std::to_string(e.p);
    s += e.is_invoke ? " call " : " ret  ";
    if (e.kind == OpKind::Enq) {
      s += "enq(" + word::to_string(e.arg) + ")";
      if (!e.is_invoke) s += e.result ? " -> true" : " -> false";
    } else {
      s += "deq()";
      if (!e.is_invoke) s += " -> " + word::to_string(e.result);
    }
    s += "\n";
  }
  return s;
}

inline std::string History::canon_string() const {
  std::vector<const Operation*> sorted;
  sorted.reserve(ops.size());
  for (const auto& op : ops) sorted.push_back(&op);
  std::sort(sorted.begin(), sorted.end(),
            [](const Operation* a, const Operation* b) {
              return a->canon_id() < b->canon_id();
            });
  std::string s;
  for (const Operation* op : sorted) {
    s += "p" + std::to_string(op->p) + "." + std::to_string(op->index_in_proc);
    s += op->kind == OpKind::Enq ? " enq(" + word::to_string(op->arg) + ")"
                                 : " deq()";
    if (op->completed) {
      s += op->kind == OpKind::Enq
               ? (op->result ? " -> true" : " -> false")
               : " -> " + word::to_string(op->result);
    } else {
      s += " -> ?";
    }
    s += " after=" + std::to_string(op->inv_mask);
    s += "\n";
  }
  return s;
}

}  // namespace boundedq

#pragma once

// Independent reference implementation of the linearizability decision:
// enumerate every subset of incomplete operations to take effect, and
// every permutation of the chosen operations, filter by real-time order,
// and replay each candidate against the sequential queue. Exponential;
// only for short histories, used to cross-validate the search-based
// checker.

#include <algorithm>
#include <vector>

#include "boundedq/seq_queue.hpp"
#include "boundedq/verify/history.hpp"

namespace boundedq {

inline bool brute_force_linearizable(const History& h,
                                     std::uint64_t capacity) {
  int n = static_cast<int>(h.ops.size());
  std::vector<int> incomplete, completed;
  for (int i = 0; i < n; ++i)
    (h.ops[i].completed ? completed : incomplete).push_back(i);

  for (std::uint64_t sub = 0;
       sub < (std::uint64_t{1} << incomplete.size()); ++sub) {
    std::vector<int> chosen = completed;
    for (std::size_t b = 0; b < incomplete.size(); ++b)
      if (sub & (std::uint64_t{1} << b)) chosen.push_back(incomplete[b]);
    std::sort(chosen.begin(), chosen.end());
    do {
      bool order_ok = true;
      for (std::size_t a = 0; a < chosen.size() && order_ok; ++a)
        for (std::size_t b = a + 1; b < chosen.size() && order_ok; ++b)
          if (h.precedes(chosen[b], chosen[a])) order_ok = false;
      // Dropped incomplete ops must not be required predecessors of
      // anything; incomplete ops never precede others, so nothing to do.
      if (!order_ok) continue;
      SeqQueue model(capacity);
      bool ok = true;
      for (int idx : chosen) {
        const Operation& op = h.ops[idx];
        if (op.kind == OpKind::Enq) {
          bool r = model.enq(op.arg);
          if (op.completed && (op.result != 0) != r) ok = false;
        } else {
          Word r = model.deq();
          if (op.completed && op.result != r) ok = false;
        }
        if (!ok) break;
      }
      if (ok) return true;
    } while (std::next_permutation(chosen.begin(), chosen.end()));
  }
  return false;
}

}  // namespace boundedq

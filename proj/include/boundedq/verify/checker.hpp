#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "boundedq/verify/history.hpp"
#include "boundedq/word.hpp"

namespace boundedq {

// Linearizability verdict for one history. The witness, when present, is
// a legal linearization order (indices into History::ops; incomplete
// operations that never took effect are omitted).
struct Verdict {
  enum class Kind { Linearizable, NotLinearizable, Inconclusive };
  Kind kind = Kind::Inconclusive;
  std::vector<int> witness;

  explicit operator bool() const { return kind == Kind::Linearizable; }
};

// Wing&Gong-style linearizability check against the sequential bounded
// queue of the given capacity. Depth-first search over linearization
// prefixes: a not-yet-linearized operation is eligible when every
// operation that precedes it in real time is already placed; the
// sequential spec is deterministic, so placing an operation fixes its
// result, which must match the observed response of completed
// operations. Incomplete operations may be placed (taking effect, any
// result) or dropped. States are memoized on (placed-set, queue
// content): two prefixes reaching the same pair have identical futures.
class LinChecker {
 public:
  explicit LinChecker(std::uint64_t capacity,
                      std::uint64_t node_budget = 50'000'000)
      : capacity_(capacity), budget_(node_budget) {}

  Verdict check(const History& h) {
    n_ = static_cast<int>(h.ops.size());
    if (n_ > 62) return Verdict{Verdict::Kind::Inconclusive, {}};
    h_ = &h;
    visited_.clear();
    nodes_ = 0;
    witness_.clear();
    completed_mask_ = 0;
    for (int i = 0; i < n_; ++i)
      if (h.ops[i].completed) completed_mask_ |= std::uint64_t{1} << i;
    std::vector<Word> content;
    Outcome out = dfs(0, content);
    if (out == Outcome::Found) {
      std::vector<int> w(witness_.rbegin(), witness_.rend());
      return Verdict{Verdict::Kind::Linearizable, std::move(w)};
    }
    if (out == Outcome::Budget) return Verdict{Verdict::Kind::Inconclusive, {}};
    return Verdict{Verdict::Kind::NotLinearizable, {}};
  }

 private:
  enum class Outcome { Found, Exhausted, Budget };

  // True iff op a must be placed before op b (a completed before b began).
  bool precedes(int a, int b) const { return h_->precedes(a, b); }

  Outcome dfs(std::uint64_t placed, std::vector<Word>& content) {
    if ((placed & completed_mask_) == completed_mask_) return Outcome::Found;
    if (++nodes_ > budget_) return Outcome::Budget;
    if (!visited_.insert(key(placed, content)).second)
      return Outcome::Exhausted;

    for (int i = 0; i < n_; ++i) {
      std::uint64_t bit = std::uint64_t{1} << i;
      if (placed & bit) continue;
      bool eligible = true;
      for (int j = 0; j < n_ && eligible; ++j)
        if (!(placed & (std::uint64_t{1} << j)) && j != i && precedes(j, i))
          eligible = false;
      if (!eligible) continue;

      const Operation& op = h_->ops[i];
      if (op.kind == OpKind::Enq) {
        bool fits = content.size() < capacity_;
        if (op.completed && (op.result != 0) != fits) continue;
        if (fits) content.push_back(op.arg);
        Outcome out = dfs(placed | bit, content);
        if (fits) content.pop_back();
        if (out != Outcome::Exhausted) {
          if (out == Outcome::Found) witness_.push_back(i);
          return out;
        }
      } else {
        Word res = content.empty() ? word::kNull0 : content.front();
        if (op.completed && op.result != res) continue;
        if (!content.empty()) content.erase(content.begin());
        Outcome out = dfs(placed | bit, content);
        if (res != word::kNull0) content.insert(content.begin(), res);
        if (out != Outcome::Exhausted) {
          if (out == Outcome::Found) witness_.push_back(i);
          return out;
        }
      }
    }
    return Outcome::Exhausted;
  }

  std::string key(std::uint64_t placed, const std::vector<Word>& content) {
    std::string k(reinterpret_cast<const char*>(&placed), 8);
    k.append(reinterpret_cast<const char*>(content.data()),
             content.size() * sizeof(Word));
    return k;
  }

  std::uint64_t capacity_;
  std::uint64_t budget_;
  const History* h_ = nullptr;
  int n_ = 0;
  std::uint64_t completed_mask_ = 0;
  std::uint64_t nodes_ = 0;
  std::unordered_set<std::string> visited_;
  std::vector<int> witness_;
};

inline Verdict check_linearizable(const History& h, std::uint64_t capacity) {
  return LinChecker(capacity).check(h);
}

}  // namespace boundedq

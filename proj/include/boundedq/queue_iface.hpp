#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "boundedq/dcss_queue.hpp"
#include "boundedq/distinct_queue.hpp"
#include "boundedq/llsc_queue.hpp"
#include "boundedq/memory.hpp"
#include "boundedq/optimal_queue.hpp"
#include "boundedq/segment_queue.hpp"

namespace boundedq {

// Type-erased queue over a fixed substrate, for harness and benchmark
// code that selects the implementation by name at runtime.
template <class M>
class IQueue {
 public:
  virtual ~IQueue() = default;
  virtual bool enq(Proc p, Word x) = 0;
  virtual Word deq(Proc p) = 0;
  virtual OverheadReport account() const = 0;
  virtual const std::string& name() const = 0;
  virtual std::uint64_t capacity() const = 0;
  virtual LocId enqueues_loc() const = 0;
  virtual LocId dequeues_loc() const = 0;
};

template <class M, class Q>
class QueueAdapter final : public IQueue<M> {
 public:
  template <class... Args>
  explicit QueueAdapter(Args&&... args)
      : q_(std::forward<Args>(args)...), name_(Q::kName) {}

  bool enq(Proc p, Word x) override { return q_.enq(p, x); }
  Word deq(Proc p) override { return q_.deq(p); }
  OverheadReport account() const override { return q_.account(); }
  const std::string& name() const override { return name_; }
  std::uint64_t capacity() const override { return q_.capacity(); }
  LocId enqueues_loc() const override { return q_.enqueues_loc(); }
  LocId dequeues_loc() const override { return q_.dequeues_loc(); }

  Q& impl() { return q_; }

 private:
  Q q_;
  std::string name_;
};

inline const std::vector<std::string>& queue_names() {
  static const std::vector<std::string> names = {"segment", "distinct",
                                                 "llsc", "dcss", "optimal"};
  return names;
}

template <class M>
std::unique_ptr<IQueue<M>> make_queue(const std::string& name, M& mem,
                                      std::uint64_t capacity, int nprocs,
                                      std::uint64_t seg_size = 16) {
  if (name == "segment")
    return std::make_unique<QueueAdapter<M, SegmentQueue<M>>>(mem, capacity,
                                                              nprocs, seg_size);
  if (name == "distinct")
    return std::make_unique<QueueAdapter<M, DistinctQueue<M>>>(mem, capacity,
                                                               nprocs);
  if (name == "llsc")
    return std::make_unique<QueueAdapter<M, LlScQueue<M>>>(mem, capacity,
                                                           nprocs);
  if (name == "dcss")
    return std::make_unique<QueueAdapter<M, DcssQueue<M>>>(mem, capacity,
                                                           nprocs);
  if (name == "optimal")
    return std::make_unique<QueueAdapter<M, OptimalQueue<M>>>(mem, capacity,
                                                              nprocs);
  throw std::invalid_argument("unknown queue implementation: " + name);
}

}  // namespace boundedq

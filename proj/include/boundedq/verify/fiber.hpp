#pragma once

#include <boost/context/fiber.hpp>
#include <functional>
#include <utility>

namespace boundedq {

// Cooperative fiber: the controller resumes it, the fiber parks itself at
// scheduling points. One fiber per simulated process.
class Fiber {
 public:
  Fiber() = default;

  void start(std::function<void()> body) {
    done_ = false;
    fiber_ = boost::context::fiber(
        [this, body = std::move(body)](boost::context::fiber&& main) {
          main_ = std::move(main);
          body();
          done_ = true;
          return std::move(main_);
        });
  }

  // Switch into the fiber until it parks or finishes.
  void resume() {
    fiber_ = std::move(fiber_).resume();
  }

  // Called from inside the fiber: park and return control to the resumer.
  void park() {
    main_ = std::move(main_).resume();
  }

  bool done() const { return done_; }

 private:
  boost::context::fiber fiber_;
  boost::context::fiber main_;
  bool done_ = true;
};

}  // namespace boundedq

#include <string>
#include <vector>

#include "boundedq/verify/script.hpp"
#include "doctest.h"

using namespace boundedq;

namespace {

// Cross-round poised-dequeue scenario on a one-cell queue: a dequeue is
// paused immediately before its commit step while the other processes
// drain the cell and refill it with the same value. An implementation
// whose commit step cannot tell the two incarnations of the value apart
// consumes the wrong one.
const char* kCrossRoundDeq = R"(
queue distinct
capacity 1
procs 3
fill 0 dup 5
begin 1 deq poise 1
empty 2
fill 2 dup 5
resume 1
empty 0
)";

// Enqueue poised across a full fill/empty cycle: its commit targets a
// position that has moved on, so every implementation must fail it and
// retry at the fresh position.
const char* kCrossRoundEnq = R"(
queue distinct
capacity 1
procs 3
begin 1 enq 5 poise 1
fill 2
empty 2
resume 1
empty 0
)";

std::vector<Word> deq_results(const History& h) {
  std::vector<Word> out;
  for (const Event& e : h.events)
    if (!e.is_invoke && e.kind == OpKind::Deq) out.push_back(e.result);
  return out;
}

}  // namespace

TEST_CASE("scenario text parses into directives") {
  Scenario sc = Scenario::parse(kCrossRoundDeq);
  CHECK(sc.impl == "distinct");
  CHECK(sc.capacity == 1);
  CHECK(sc.nprocs == 3);
  REQUIRE(sc.cmds.size() == 6);
  CHECK(sc.cmds[0].kind == ScenarioCmd::Kind::Fill);
  CHECK(sc.cmds[0].dup);
  CHECK(sc.cmds[1].kind == ScenarioCmd::Kind::Begin);
  CHECK(sc.cmds[1].proc == 1);
  CHECK(sc.cmds[1].op == OpKind::Deq);
  CHECK(sc.cmds[1].poise == 1);
  CHECK(sc.cmds[4].kind == ScenarioCmd::Kind::Resume);
}

TEST_CASE("malformed scenarios are rejected") {
  CHECK_THROWS_AS(Scenario::parse("queue llsc\nfrobnicate 1\n"),
                  std::runtime_error);
  CHECK_THROWS_AS(Scenario::parse("capacity 2\nrun 0 enq 1\n"),
                  std::runtime_error);  // no queue directive
  CHECK_THROWS_AS(Scenario::parse("queue llsc\nprocs 2\nrun 5 deq\n"),
                  std::runtime_error);  // process out of range
  CHECK_THROWS_AS(Scenario::parse("queue llsc\nrun 0 pop\n"),
                  std::runtime_error);  // unknown operation
}

TEST_CASE("fill then empty returns the values in order") {
  for (const char* impl : {"segment", "distinct", "llsc", "dcss", "optimal"}) {
    CAPTURE(impl);
    ScenarioResult r = run_scenario_text(
        "queue x\ncapacity 3\nprocs 1\nsegsize 2\nfill 0\nempty 0\n", impl);
    CHECK(r.linearizable());
    CHECK(deq_results(r.history) ==
          std::vector<Word>{word::value(100), word::value(101),
                            word::value(102)});
  }
}

TEST_CASE("cross-round poised dequeue separates the implementations") {
  Scenario sc = Scenario::parse(kCrossRoundDeq);

  // With duplicate values the distinct-elements queue commits against the
  // wrong incarnation of the value and the history cannot be linearized.
  ScenarioResult broken = run_scenario(sc);
  CHECK(broken.impl == "distinct");
  CHECK_FALSE(broken.linearizable());
  CHECK(broken.verdict.kind == Verdict::Kind::NotLinearizable);

  // Version-validated commits survive the same schedule.
  for (const char* impl : {"llsc", "dcss", "optimal", "segment"}) {
    CAPTURE(impl);
    ScenarioResult r = run_scenario(sc, impl);
    CHECK(r.linearizable());
  }
}

TEST_CASE("cross-round poised enqueue is safe everywhere") {
  Scenario sc = Scenario::parse(kCrossRoundEnq);
  for (const char* impl : {"distinct", "llsc", "dcss", "optimal", "segment"}) {
    CAPTURE(impl);
    ScenarioResult r = run_scenario(sc, impl);
    CHECK(r.linearizable());
  }
}

TEST_CASE("scenario misuse faults at run time") {
  // Resuming a process that is not poised.
  CHECK_THROWS_AS(
      run_scenario_text("queue llsc\nprocs 1\nresume 0\n"),
      std::runtime_error);
  // The operation finishes before reaching its poise point: an enqueue on
  // a full queue returns false without mutating anything.
  CHECK_THROWS_AS(run_scenario_text("queue llsc\ncapacity 1\nprocs 2\n"
                                    "fill 0\nbegin 1 enq 9 poise 1\n"),
                  std::runtime_error);
}

TEST_CASE("scenario report is machine readable") {
  ScenarioResult r = run_scenario(Scenario::parse(kCrossRoundDeq));
  nlohmann::json j = r.report();
  CHECK(j["impl"] == "distinct");
  CHECK(j["verdict"] == "not-linearizable");
  CHECK(j["events"].is_array());
  CHECK(j["events"].size() == 2 * r.history.ops.size());
  // Round-trips through text.
  nlohmann::json back = nlohmann::json::parse(j.dump());
  CHECK(back == j);
}

#include <doctest.h>

#include "boundedq/memory.hpp"
#include "boundedq/verify/instrumented.hpp"
#include "boundedq/word.hpp"

using namespace boundedq;

TEST_CASE("word encoding round-trips and hand-checked constants") {
  // Hand-computed: tag in bits 63..62, so null(5) = 2^62 + 5.
  CHECK(word::null(5) == (std::uint64_t{1} << 62) + 5);
  CHECK(word::value(17) == 17);
  // desc(3, 9): tag 2 -> bit pattern 10 in the top bits, stamp at bit 16.
  CHECK(word::desc(3, 9) ==
        (std::uint64_t{2} << 62) + (std::uint64_t{9} << 16) + 3);

  CHECK(word::is_value(word::value(0)));
  CHECK(word::is_null(word::kNull0));
  CHECK(!word::is_value(word::kNull0));
  CHECK(word::null_round(word::null(42)) == 42);
  CHECK(word::desc_idx(word::desc(65535, 1)) == 65535);
  CHECK(word::desc_stamp(word::desc(7, (std::uint64_t{1} << 45))) ==
        (std::uint64_t{1} << 45));
  CHECK(word::null(3) != word::value(3));
  CHECK(word::desc(3, 0) != word::null(3));
}

TEST_CASE("native memory: read/write/cas and kind accounting") {
  NativeMemory mem(2);
  LocId a = mem.alloc(Kind::Value, word::kNull0);
  LocId b = mem.alloc(Kind::Metadata, 7);
  CHECK(mem.count(Kind::Value) == 1);
  CHECK(mem.count(Kind::Metadata) == 1);
  CHECK(mem.emulation_count() == 0);

  CHECK(mem.read(0, a) == word::kNull0);
  mem.write(0, a, word::value(5));
  CHECK(mem.read(1, a) == word::value(5));
  CHECK(!mem.cas(0, a, word::value(6), word::value(7)));
  CHECK(mem.cas(0, a, word::value(5), word::value(7)));
  CHECK(mem.read(0, a) == word::value(7));
  CHECK(mem.read(0, b) == 7);
}

TEST_CASE("native memory: ideal LL/SC fails after any modification") {
  NativeMemory mem(2);
  LocId a = mem.alloc(Kind::Metadata, 10, /*llsc_capable=*/true);
  CHECK(mem.emulation_count() == 1);

  SUBCASE("undisturbed SC succeeds") {
    CHECK(mem.ll(0, a) == 10);
    CHECK(mem.sc(0, a, 11));
    CHECK(mem.read(0, a) == 11);
  }
  SUBCASE("SC fails after an intervening write, even of the same value") {
    CHECK(mem.ll(0, a) == 10);
    mem.write(1, a, 10);  // ABA write: value unchanged
    CHECK(!mem.sc(0, a, 11));
    CHECK(mem.read(0, a) == 10);
  }
  SUBCASE("SC fails after a competing SC") {
    CHECK(mem.ll(0, a) == 10);
    CHECK(mem.ll(1, a) == 10);
    CHECK(mem.sc(1, a, 12));
    CHECK(!mem.sc(0, a, 13));
    CHECK(mem.read(0, a) == 12);
  }
  SUBCASE("links are per-location") {
    LocId b = mem.alloc(Kind::Metadata, 0, true);
    CHECK(mem.ll(0, a) == 10);
    CHECK(mem.ll(0, b) == 0);
    mem.write(1, b, 5);
    CHECK(mem.sc(0, a, 11));   // a untouched
    CHECK(!mem.sc(0, b, 6));   // b modified
  }
}

TEST_CASE("history records real-time precedence") {
  History h;
  int a = h.invoke(0, 0, OpKind::Enq, word::value(1));
  int b = h.invoke(1, 0, OpKind::Deq, 0);
  h.respond(a, 1);
  int c = h.invoke(0, 1, OpKind::Deq, 0);
  h.respond(c, word::value(1));
  h.respond(b, word::kNull0);

  CHECK(h.precedes(a, c));
  CHECK(!h.precedes(b, c));  // b overlapped c
  CHECK(!h.precedes(a, b));
  CHECK(h.ops.size() == 3);
  CHECK(h.events.size() == 6);
}

namespace {

// Two processes CAS the same location; exercises announce-then-park:
// each step executes exactly one poised primitive.
void run_cas_race(int first) {
  InstrumentedMemory mem(2);
  Controller ctl(mem, 2);
  LocId loc = mem.alloc(Kind::Metadata, 0);
  std::vector<bool> result(2, false);
  for (Proc p = 0; p < 2; ++p)
    ctl.set_program(p, [&mem, &result, loc](Proc me) {
      result[me] = mem.cas(me, loc, 0, 100 + me);
    });
  ctl.start();
  CHECK(ctl.pending(0).type == PrimOp::Type::Cas);
  CHECK(ctl.pending(1).type == PrimOp::Type::Cas);
  ctl.step(first);
  ctl.step(1 - first);
  CHECK(ctl.all_finished());
  CHECK(result[first]);
  CHECK(!result[1 - first]);
  CHECK(mem.peek(loc) == static_cast<Word>(100 + first));
}

struct CountingMonitor : Monitor {
  int mutations = 0;
  void on_mutation(Proc, LocId, Word, Word) override { ++mutations; }
};

}  // namespace

TEST_CASE("controller: poised CAS executes on step, loser fails") {
  run_cas_race(0);
  run_cas_race(1);
}

TEST_CASE("controller: state keys distinguish states and match on replay") {
  auto run = [](int first) {
    InstrumentedMemory mem(2);
    Controller ctl(mem, 2);
    LocId loc = mem.alloc(Kind::Metadata, 0);
    for (Proc p = 0; p < 2; ++p)
      ctl.set_program(p, [&mem, loc](Proc me) {
        mem.cas(me, loc, 0, 100 + me);
        mem.read(me, loc);
      });
    ctl.start();
    ctl.step(first);
    return ctl.state_key();
  };
  CHECK(run(0) == run(0));
  CHECK(run(0) != run(1));
}

TEST_CASE("instrumented memory reports mutations to monitors") {
  InstrumentedMemory mem(1);
  Controller ctl(mem, 1);
  CountingMonitor mon;
  ctl.add_monitor(&mon);
  LocId loc = mem.alloc(Kind::Metadata, 0);
  ctl.set_program(0, [&mem, loc](Proc me) {
    mem.write(me, loc, 1);
    mem.cas(me, loc, 1, 2);
    mem.cas(me, loc, 1, 3);  // fails: no mutation
    mem.write_quiet(me, loc, 4);
  });
  ctl.start();
  while (!ctl.all_finished()) ctl.step(0);
  CHECK(mon.mutations == 3);
  CHECK(mem.peek(loc) == 4);
}

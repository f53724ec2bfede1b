#include <doctest.h>

#include <deque>
#include <random>

#include "boundedq/seq_queue.hpp"

using namespace boundedq;

TEST_CASE("sequential queue: FIFO order, fullness, emptiness") {
  SeqQueue q(2);
  CHECK(q.deq() == word::kNull0);
  CHECK(q.enq(word::value(1)));
  CHECK(q.enq(word::value(2)));
  CHECK(!q.enq(word::value(3)));  // full
  CHECK(q.deq() == word::value(1));
  CHECK(q.enq(word::value(4)));
  CHECK(q.deq() == word::value(2));
  CHECK(q.deq() == word::value(4));
  CHECK(q.deq() == word::kNull0);
}

TEST_CASE("sequential queue agrees with an independent std::deque model") {
  // The oracle for the oracle: a textbook bounded buffer on std::deque.
  SeqQueue q(5);
  std::deque<Word> model;
  std::mt19937_64 rng(12345);
  for (int step = 0; step < 100000; ++step) {
    if (rng() % 2 == 0) {
      Word x = word::value(rng() % 1000);
      bool want = model.size() < 5;
      if (want) model.push_back(x);
      CHECK(q.enq(x) == want);
    } else {
      Word want = word::kNull0;
      if (!model.empty()) {
        want = model.front();
        model.pop_front();
      }
      CHECK(q.deq() == want);
    }
    CHECK(q.size() == model.size());
  }
}

TEST_CASE("sequential queue space accounting") {
  SeqQueue q(7);
  OverheadReport r = q.account();
  CHECK(r.value_locations == 7);
  CHECK(r.metadata_locations == 2);
  CHECK(r.descriptor_pool_size == 0);
  CHECK(r.emulation_locations == 0);
}

TEST_CASE("sequential queue content snapshot") {
  SeqQueue q(3);
  q.enq(word::value(9));
  q.enq(word::value(8));
  q.deq();
  q.enq(word::value(7));
  auto c = q.content();
  REQUIRE(c.size() == 2);
  CHECK(c[0] == word::value(8));
  CHECK(c[1] == word::value(7));
}

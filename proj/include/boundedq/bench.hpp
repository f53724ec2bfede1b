#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "boundedq/queue_iface.hpp"
#include "boundedq/seq_queue.hpp"
#include "boundedq/verify/instrumented.hpp"

namespace boundedq {

// Throughput/latency benchmark over the native substrate, plus the static
// space-overhead grid. Used by the command-line tool; kept as a library so
// the acceptance tests can drive it directly.

struct BenchConfig {
  std::string impl;
  std::uint64_t capacity = 64;
  int threads = 1;
  std::uint64_t ops = 0;       // per-thread measured op count; 0 = timed run
  double duration_s = 0.0;     // measured wall-clock seconds when ops == 0
  double ratio = 0.5;          // probability that an operation is an enqueue
  std::uint64_t seed = 1;
  std::uint64_t warmup = 1000;  // unmeasured ops per thread
  std::string workload = "distinct";  // "distinct" | "duplicate"
  std::uint64_t seg_size = 16;
};

struct BenchResult {
  std::string impl;
  std::uint64_t capacity = 0;
  int threads = 0;
  std::uint64_t total_ops = 0;
  std::uint64_t successes = 0;
  std::uint64_t full_failures = 0;   // enq returned false
  std::uint64_t empty_failures = 0;  // deq returned bot(0)
  double seconds = 0.0;
  double ops_per_sec = 0.0;
  double p50_ns = 0.0;
  double p99_ns = 0.0;
  OverheadReport overhead;

  bool operator==(const BenchResult&) const = default;
};

namespace bench_detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Deterministic per-thread operation stream. Distinct workloads embed the
// thread id in the value so no two enqueues anywhere collide; duplicate
// workloads draw from a four-value set.
struct OpStream {
  std::mt19937_64 rng;
  double ratio;
  bool duplicate;
  std::uint64_t tid;
  std::uint64_t next_val = 0;

  OpStream(std::uint64_t seed, std::uint64_t tid, double ratio, bool dup)
      : rng(seed ^ (0x9e3779b97f4a7c15ull * (tid + 1))),
        ratio(ratio),
        duplicate(dup),
        tid(tid) {}

  ProgOp next() {
    bool enq = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < ratio;
    if (!enq) return ProgOp{OpKind::Deq, 0};
    Word v = duplicate ? word::value(1 + rng() % 4)
                       : word::value((tid << 44) | ++next_val);
    return ProgOp{OpKind::Enq, v};
  }
};

struct ThreadTally {
  std::uint64_t ops = 0;
  std::uint64_t successes = 0;
  std::uint64_t full = 0;
  std::uint64_t empty = 0;
  std::vector<double> latencies_ns;
};

}  // namespace bench_detail

inline void validate(const BenchConfig& c) {
  auto reject = [](const std::string& msg) {
    throw std::invalid_argument("benchmark config: " + msg);
  };
  bool known = false;
  for (const auto& n : queue_names()) known = known || n == c.impl;
  if (!known) reject("unknown implementation '" + c.impl + "'");
  if (c.capacity < 1) reject("capacity must be at least 1");
  if (c.threads < 1) reject("thread count must be at least 1");
  if (c.ratio < 0.0 || c.ratio > 1.0) reject("ratio must be in [0,1]");
  if (c.workload != "distinct" && c.workload != "duplicate")
    reject("unknown workload '" + c.workload + "'");
  if (c.impl == "distinct" && c.workload == "duplicate")
    reject(
        "the distinct-elements queue is correct only for distinct values; "
        "a duplicate-generating workload would violate its contract");
  if (c.ops == 0 && c.duration_s <= 0.0)
    reject("either an op count or a duration is required");
}

// Multi-threaded run on real atomics.
inline BenchResult run_bench(const BenchConfig& cfg) {
  validate(cfg);
  using Clock = std::chrono::steady_clock;
  const int n = cfg.threads;

  NativeMemory mem(n);
  auto queue = make_queue<NativeMemory>(cfg.impl, mem, cfg.capacity, n,
                                        cfg.seg_size);
  IQueue<NativeMemory>& q = *queue;

  // Sample every op for short runs, every 64th above a million total.
  const std::uint64_t expected = cfg.ops * static_cast<std::uint64_t>(n);
  const std::uint64_t stride = (cfg.ops != 0 && expected <= 1000000) ? 1 : 64;

  std::atomic<bool> stop{false};
  std::atomic<int> ready{0};
  std::atomic<bool> go{false};
  std::vector<bench_detail::ThreadTally> tallies(n);
  std::vector<std::thread> workers;

  for (int t = 0; t < n; ++t) {
    workers.emplace_back([&, t] {
      bench_detail::OpStream stream(cfg.seed, static_cast<std::uint64_t>(t),
                                    cfg.ratio, cfg.workload == "duplicate");
      auto exec = [&](const ProgOp& op, bench_detail::ThreadTally* tally) {
        bool timed = tally != nullptr && tally->ops % stride == 0;
        Clock::time_point t0;
        if (timed) t0 = Clock::now();
        bool success;
        if (op.kind == OpKind::Enq) {
          success = q.enq(t, op.arg);
        } else {
          success = q.deq(t) != word::kNull0;
        }
        if (timed) {
          double ns = std::chrono::duration<double, std::nano>(Clock::now() -
                                                               t0)
                          .count();
          tally->latencies_ns.push_back(ns);
        }
        if (tally != nullptr) {
          ++tally->ops;
          if (success)
            ++tally->successes;
          else if (op.kind == OpKind::Enq)
            ++tally->full;
          else
            ++tally->empty;
        }
      };
      for (std::uint64_t i = 0; i < cfg.warmup; ++i) exec(stream.next(), nullptr);
      ready.fetch_add(1);
      while (!go.load()) std::this_thread::yield();
      if (cfg.ops != 0) {
        for (std::uint64_t i = 0; i < cfg.ops; ++i)
          exec(stream.next(), &tallies[t]);
      } else {
        while (!stop.load(std::memory_order_relaxed))
          exec(stream.next(), &tallies[t]);
      }
    });
  }

  while (ready.load() < n) std::this_thread::yield();
  Clock::time_point start = Clock::now();
  go.store(true);
  if (cfg.ops == 0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(cfg.duration_s));
    stop.store(true);
  }
  for (auto& w : workers) w.join();
  double seconds = std::chrono::duration<double>(Clock::now() - start).count();

  BenchResult r;
  r.impl = cfg.impl;
  r.capacity = cfg.capacity;
  r.threads = n;
  std::vector<double> lats;
  for (const auto& t : tallies) {
    r.total_ops += t.ops;
    r.successes += t.successes;
    r.full_failures += t.full;
    r.empty_failures += t.empty;
    lats.insert(lats.end(), t.latencies_ns.begin(), t.latencies_ns.end());
  }
  r.seconds = seconds;
  r.ops_per_sec = seconds > 0 ? static_cast<double>(r.total_ops) / seconds : 0;
  if (!lats.empty()) {
    auto pct = [&lats](double p) {
      std::size_t k = static_cast<std::size_t>(p * (lats.size() - 1));
      std::nth_element(lats.begin(), lats.begin() + k, lats.end());
      return lats[k];
    };
    r.p50_ns = pct(0.50);
    r.p99_ns = pct(0.99);
  }
  r.overhead = q.account();
  return r;
}

// Single-threaded run on the instrumented substrate with a seeded
// scheduler: the same workload machinery reused under the harness (no
// wall-clock latency; simulated processes take turns at primitive
// granularity). Requires an op count.
inline BenchResult run_bench_instrumented(const BenchConfig& cfg) {
  validate(cfg);
  if (cfg.ops == 0)
    throw std::invalid_argument(
        "benchmark config: instrumented runs need an op count, not a duration");
  const int n = cfg.threads;
  InstrumentedMemory mem(n);
  Controller ctl(mem, n);
  ctl.set_recording(false);
  auto queue = make_queue<InstrumentedMemory>(cfg.impl, mem, cfg.capacity, n,
                                              cfg.seg_size);
  IQueue<InstrumentedMemory>& q = *queue;

  BenchResult r;
  r.impl = cfg.impl;
  r.capacity = cfg.capacity;
  r.threads = n;
  for (int t = 0; t < n; ++t) {
    bench_detail::OpStream stream(cfg.seed, static_cast<std::uint64_t>(t),
                                  cfg.ratio, cfg.workload == "duplicate");
    std::vector<ProgOp> prog;
    for (std::uint64_t i = 0; i < cfg.ops; ++i) prog.push_back(stream.next());
    ctl.set_program(t, [&ctl, &q, prog, &r](Proc p) {
      for (const ProgOp& op : prog) {
        ctl.note_op_kind(p, op.kind);
        int id = ctl.begin_op(p, op.kind, op.arg);
        bool success;
        if (op.kind == OpKind::Enq) {
          success = q.enq(p, op.arg);
          ctl.end_op(p, id, success ? 1 : 0);
          if (!success) ++r.full_failures;
        } else {
          Word v = q.deq(p);
          ctl.end_op(p, id, v);
          success = v != word::kNull0;
          if (!success) ++r.empty_failures;
        }
        ++r.total_ops;
        if (success) ++r.successes;
      }
    });
  }
  ctl.start();
  std::mt19937_64 rng(cfg.seed);
  auto t0 = std::chrono::steady_clock::now();
  for (;;) {
    std::vector<Proc> en;
    for (Proc p = 0; p < n; ++p)
      if (ctl.enabled(p)) en.push_back(p);
    if (en.empty()) break;
    ctl.step(en[rng() % en.size()]);
  }
  r.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  r.ops_per_sec =
      r.seconds > 0 ? static_cast<double>(r.total_ops) / r.seconds : 0;
  r.overhead = q.account();
  return r;
}

// --- serialization ----------------------------------------------------

inline const char* kBenchCsvHeader =
    "impl,capacity,threads,total_ops,successes,full_failures,empty_failures,"
    "seconds,ops_per_sec,p50_ns,p99_ns,value_locations,metadata_locations,"
    "descriptor_pool_size,emulation_locations";

inline std::string to_csv_row(const BenchResult& r) {
  using bench_detail::fmt_double;
  std::ostringstream os;
  os << r.impl << ',' << r.capacity << ',' << r.threads << ',' << r.total_ops
     << ',' << r.successes << ',' << r.full_failures << ','
     << r.empty_failures << ',' << fmt_double(r.seconds) << ','
     << fmt_double(r.ops_per_sec) << ',' << fmt_double(r.p50_ns) << ','
     << fmt_double(r.p99_ns) << ',' << r.overhead.value_locations << ','
     << r.overhead.metadata_locations << ','
     << r.overhead.descriptor_pool_size << ','
     << r.overhead.emulation_locations;
  return os.str();
}

inline std::string to_csv(const std::vector<BenchResult>& rs) {
  std::string out = kBenchCsvHeader;
  out += '\n';
  for (const auto& r : rs) {
    out += to_csv_row(r);
    out += '\n';
  }
  return out;
}

inline nlohmann::json to_json(const BenchResult& r) {
  nlohmann::json j;
  j["impl"] = r.impl;
  j["capacity"] = r.capacity;
  j["threads"] = r.threads;
  j["ops"] = {{"total", r.total_ops},
              {"successes", r.successes},
              {"full_failures", r.full_failures},
              {"empty_failures", r.empty_failures}};
  j["throughput"] = {{"seconds", r.seconds}, {"ops_per_sec", r.ops_per_sec}};
  j["latency_ns"] = {{"p50", r.p50_ns}, {"p99", r.p99_ns}};
  j["overhead"] = {{"value_locations", r.overhead.value_locations},
                   {"metadata_locations", r.overhead.metadata_locations},
                   {"descriptor_pool_size", r.overhead.descriptor_pool_size},
                   {"emulation_locations", r.overhead.emulation_locations}};
  return j;
}

inline nlohmann::json to_json(const std::vector<BenchResult>& rs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rs) arr.push_back(to_json(r));
  return nlohmann::json{{"results", arr}};
}

inline BenchResult from_json(const nlohmann::json& j) {
  BenchResult r;
  r.impl = j.at("impl").get<std::string>();
  r.capacity = j.at("capacity").get<std::uint64_t>();
  r.threads = j.at("threads").get<int>();
  r.total_ops = j.at("ops").at("total").get<std::uint64_t>();
  r.successes = j.at("ops").at("successes").get<std::uint64_t>();
  r.full_failures = j.at("ops").at("full_failures").get<std::uint64_t>();
  r.empty_failures = j.at("ops").at("empty_failures").get<std::uint64_t>();
  r.seconds = j.at("throughput").at("seconds").get<double>();
  r.ops_per_sec = j.at("throughput").at("ops_per_sec").get<double>();
  r.p50_ns = j.at("latency_ns").at("p50").get<double>();
  r.p99_ns = j.at("latency_ns").at("p99").get<double>();
  r.overhead.value_locations =
      j.at("overhead").at("value_locations").get<std::uint64_t>();
  r.overhead.metadata_locations =
      j.at("overhead").at("metadata_locations").get<std::uint64_t>();
  r.overhead.descriptor_pool_size =
      j.at("overhead").at("descriptor_pool_size").get<std::uint64_t>();
  r.overhead.emulation_locations =
      j.at("overhead").at("emulation_locations").get<std::uint64_t>();
  return r;
}

inline std::vector<BenchResult> from_csv(const std::string& text) {
  std::vector<BenchResult> out;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line != kBenchCsvHeader)
        throw std::runtime_error("unexpected benchmark CSV header");
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 15)
      throw std::runtime_error("malformed benchmark CSV row: " + line);
    BenchResult r;
    r.impl = f[0];
    r.capacity = std::stoull(f[1]);
    r.threads = std::stoi(f[2]);
    r.total_ops = std::stoull(f[3]);
    r.successes = std::stoull(f[4]);
    r.full_failures = std::stoull(f[5]);
    r.empty_failures = std::stoull(f[6]);
    r.seconds = std::stod(f[7]);
    r.ops_per_sec = std::stod(f[8]);
    r.p50_ns = std::stod(f[9]);
    r.p99_ns = std::stod(f[10]);
    r.overhead.value_locations = std::stoull(f[11]);
    r.overhead.metadata_locations = std::stoull(f[12]);
    r.overhead.descriptor_pool_size = std::stoull(f[13]);
    r.overhead.emulation_locations = std::stoull(f[14]);
    out.push_back(std::move(r));
  }
  return out;
}

// --- space-overhead grid ----------------------------------------------

struct OverheadGrid {
  struct Row {
    std::string impl;
    std::uint64_t capacity;
    int nprocs;
    OverheadReport rep;
  };
  // Metadata growth per unit of capacity (at the smallest process count)
  // and per process (at the smallest capacity), from the grid endpoints.
  struct Slope {
    std::string impl;
    double vs_capacity = 0.0;
    double vs_procs = 0.0;
  };
  std::vector<Row> rows;
  std::vector<Slope> slopes;
};

inline OverheadReport account_one(const std::string& impl,
                                  std::uint64_t capacity, int nprocs,
                                  std::uint64_t seg_size = 16) {
  if (impl == "seq") return SeqQueue(capacity).account();
  NativeMemory mem(nprocs);
  return make_queue<NativeMemory>(impl, mem, capacity, nprocs, seg_size)
      ->account();
}

inline OverheadGrid report_overhead(const std::vector<std::uint64_t>& caps,
                                    const std::vector<int>& procs,
                                    std::uint64_t seg_size = 16) {
  if (caps.empty() || procs.empty())
    throw std::invalid_argument("overhead grid needs capacities and counts");
  OverheadGrid g;
  std::vector<std::string> impls = {"seq"};
  for (const auto& n : queue_names()) impls.push_back(n);
  for (const auto& impl : impls) {
    for (std::uint64_t c : caps)
      for (int n : procs)
        g.rows.push_back({impl, c, n, account_one(impl, c, n, seg_size)});
    OverheadGrid::Slope s;
    s.impl = impl;
    if (caps.size() > 1) {
      auto lo = account_one(impl, caps.front(), procs.front(), seg_size);
      auto hi = account_one(impl, caps.back(), procs.front(), seg_size);
      s.vs_capacity =
          (static_cast<double>(hi.metadata_locations) -
           static_cast<double>(lo.metadata_locations)) /
          (static_cast<double>(caps.back()) - static_cast<double>(caps.front()));
    }
    if (procs.size() > 1) {
      auto lo = account_one(impl, caps.front(), procs.front(), seg_size);
      auto hi = account_one(impl, caps.front(), procs.back(), seg_size);
      s.vs_procs = (static_cast<double>(hi.metadata_locations) -
                    static_cast<double>(lo.metadata_locations)) /
                   (procs.back() - procs.front());
    }
    g.slopes.push_back(s);
  }
  return g;
}

inline std::string to_csv(const OverheadGrid& g) {
  using bench_detail::fmt_double;
  std::string out =
      "impl,capacity,procs,value_locations,metadata_locations,"
      "descriptor_pool_size,emulation_locations\n";
  for (const auto& r : g.rows) {
    std::ostringstream os;
    os << r.impl << ',' << r.capacity << ',' << r.nprocs << ','
       << r.rep.value_locations << ',' << r.rep.metadata_locations << ','
       << r.rep.descriptor_pool_size << ',' << r.rep.emulation_locations
       << '\n';
    out += os.str();
  }
  out += "impl,slope_metadata_vs_capacity,slope_metadata_vs_procs\n";
  for (const auto& s : g.slopes)
    out += s.impl + "," + fmt_double(s.vs_capacity) + "," +
           fmt_double(s.vs_procs) + "\n";
  return out;
}

inline nlohmann::json to_json(const OverheadGrid& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : g.rows) {
    rows.push_back({{"impl", r.impl},
                    {"capacity", r.capacity},
                    {"procs", r.nprocs},
                    {"value_locations", r.rep.value_locations},
                    {"metadata_locations", r.rep.metadata_locations},
                    {"descriptor_pool_size", r.rep.descriptor_pool_size},
                    {"emulation_locations", r.rep.emulation_locations}});
  }
  nlohmann::json slopes = nlohmann::json::array();
  for (const auto& s : g.slopes)
    slopes.push_back({{"impl", s.impl},
                      {"metadata_vs_capacity", s.vs_capacity},
                      {"metadata_vs_procs", s.vs_procs}});
  return nlohmann::json{{"grid", rows}, {"slopes", slopes}};
}

}  // namespace boundedq

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "boundedq/bench.hpp"

namespace {

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw std::runtime_error("cannot open output file: " + out_path);
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Bounded lock-free queue benchmarks: throughput/latency runs and "
      "space-overhead reports"};
  app.require_subcommand(1);

  // --- bench ----------------------------------------------------------
  boundedq::BenchConfig cfg;
  std::string format = "csv";
  std::string out_path;
  auto* bench = app.add_subcommand("bench", "run a throughput benchmark");
  bench->add_option("--impl", cfg.impl, "queue implementation")
      ->required()
      ->check(CLI::IsMember(boundedq::queue_names()));
  bench->add_option("--capacity", cfg.capacity, "queue capacity");
  bench->add_option("--threads", cfg.threads, "worker thread count");
  bench->add_option("--ops", cfg.ops, "measured operations per thread");
  bench->add_option("--duration", cfg.duration_s,
                    "measured wall-clock seconds (alternative to --ops)");
  bench->add_option("--ratio", cfg.ratio, "enqueue probability in [0,1]");
  bench->add_option("--seed", cfg.seed, "workload seed");
  bench->add_option("--warmup", cfg.warmup, "warmup operations per thread");
  bench->add_option("--workload", cfg.workload,
                    "value stream: distinct or duplicate")
      ->check(CLI::IsMember({"distinct", "duplicate"}));
  bench->add_option("--segsize", cfg.seg_size, "segment length (segment impl)");
  bench->add_option("--format", format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  bench->add_option("--out", out_path, "output file (default stdout)");

  // --- overhead -------------------------------------------------------
  std::vector<std::uint64_t> caps = {16, 256, 4096};
  std::vector<int> procs = {2, 4, 8, 16};
  std::uint64_t grid_seg = 16;
  std::string grid_format = "csv";
  std::string grid_out;
  auto* overhead =
      app.add_subcommand("overhead", "static space-overhead grid");
  overhead->add_option("--capacity", caps, "capacities to sample");
  overhead->add_option("--procs", procs, "process counts to sample");
  overhead->add_option("--segsize", grid_seg, "segment length (segment impl)");
  overhead->add_option("--format", grid_format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  overhead->add_option("--out", grid_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench->parsed()) {
      // Fall back to a short timed run when neither bound was given.
      if (cfg.ops == 0 && cfg.duration_s <= 0.0) cfg.duration_s = 1.0;
      const char* mode = std::getenv("BOUNDEDQ_MODE");
      boundedq::BenchResult r =
          (mode != nullptr && std::string(mode) == "instrumented")
              ? boundedq::run_bench_instrumented(cfg)
              : boundedq::run_bench(cfg);
      std::vector<boundedq::BenchResult> rs = {r};
      emit(format == "json" ? boundedq::to_json(rs).dump(2) + "\n"
                            : boundedq::to_csv(rs),
           out_path);
    } else {
      boundedq::OverheadGrid g =
          boundedq::report_overhead(caps, procs, grid_seg);
      emit(grid_format == "json" ? boundedq::to_json(g).dump(2) + "\n"
                                 : boundedq::to_csv(g),
           grid_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include <benchmark/benchmark.h>

#include <string>

#include "sidelink/simulation.hpp"

using namespace sidelink;

static void bm_catalog_run(benchmark::State& state, const char* name) {
  const auto s = load_scenario(std::string(SIDELINK_SCENARIO_DIR) + "/catalog/" + name + ".yaml");
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_scenario(s));
  }
  state.counters["slots"] = static_cast<double>(s.duration_slots);
}
BENCHMARK_CAPTURE(bm_catalog_run, sync_abuse_on, "sync_abuse_on")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_catalog_run, resource_blocking_on, "resource_blocking_on")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_catalog_run, harq_spoofing_on, "harq_spoofing_on")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_catalog_run, pc5_exploitation_on, "pc5_exploitation_on")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_catalog_run, l2_tracking_on, "l2_tracking_on")->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();

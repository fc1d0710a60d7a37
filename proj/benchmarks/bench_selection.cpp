#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sidelink/resources.hpp"

using namespace sidelink;

namespace {

std::vector<ReceivedSci> heard(const ResourcePool& pool, int n, Slot now, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> sc(0, pool.num_subchannels - 1);
  std::uniform_int_distribution<Slot> back(1, pool.sensing_window_slots);
  std::uniform_real_distribution<double> rsrp(-120.0, -60.0);
  std::vector<ReceivedSci> out;
  for (int i = 0; i < n; ++i) {
    Selection s;
    s.subchannels = {sc(rng), 1};
    s.slot = now - back(rng);
    ReceivedSci r;
    r.bits = encode_sci1a(announce(s, 100, 3, pool), pool);
    r.rsrp_dbm = rsrp(rng);
    r.slot = s.slot;
    r.emitter = NodeId{static_cast<std::uint32_t>(i + 1)};
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

static void bm_select_resources(benchmark::State& state) {
  ResourcePool pool;
  pool.num_subchannels = 10;
  pool.slots_per_selection_window = 100;
  const Slot now = 5000;
  const auto history = heard(pool, static_cast<int>(state.range(0)), now, 42);
  std::mt19937_64 rng(1);
  const SlotWindow w{now + 1, now + 1 + pool.slots_per_selection_window};
  for (auto _ : state) {
    benchmark::DoNotOptimize(select_resources(pool, history, w, Demand{2}, rng));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_select_resources)->Arg(0)->Arg(50)->Arg(500)->Arg(2000);

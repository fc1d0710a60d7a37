#include <benchmark/benchmark.h>

#include "sidelink/defense.hpp"
#include "sidelink/frames.hpp"

using namespace sidelink;

static void bm_mib_round_trip(benchmark::State& state) {
  MibSl m;
  m.tdd_config = 0x5a5;
  m.direct_frame_number = 1000;
  m.slot_index = 77;
  for (auto _ : state) {
    auto bits = encode_mib_sl(m);
    benchmark::DoNotOptimize(decode_mib_sl(bits));
  }
}
BENCHMARK(bm_mib_round_trip);

static void bm_sci1a_round_trip(benchmark::State& state) {
  ResourcePool pool;
  pool.num_subchannels = static_cast<int>(state.range(0));
  pool.sl_max_num_per_reserve = static_cast<int>(state.range(1));
  Sci1A s;
  s.frequency_resource_assignment = encode_frequency_allocation({1, 0, 0}, pool);
  for (auto _ : state) {
    auto bits = encode_sci1a(s, pool);
    benchmark::DoNotOptimize(decode_sci1a(bits, pool));
  }
}
BENCHMARK(bm_sci1a_round_trip)->Args({4, 2})->Args({20, 3})->Args({27, 3});

static void bm_signed_ssb(benchmark::State& state) {
  crypto::Key256 key{};
  key[0] = 7;
  SsbFrame f;
  f.slss = slss_from_id(10);
  const auto tag_bits = static_cast<unsigned>(state.range(0));
  for (auto _ : state) {
    f.mib.direct_frame_number = (f.mib.direct_frame_number + 1) % 1024;
    const auto signed_frame = sign_ssb(f, key, tag_bits);
    benchmark::DoNotOptimize(verify_ssb(signed_frame, key, tag_bits));
  }
}
BENCHMARK(bm_signed_ssb)->Arg(16)->Arg(32);

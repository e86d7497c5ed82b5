#include <benchmark/benchmark.h>

#include <random>

#include "qpower/analog_chain.hpp"
#include "qpower/instrument.hpp"
#include "qpower/metrology.hpp"
#include "qpower/noise.hpp"
#include "qpower/qubit.hpp"

namespace {

using namespace qpower;

void BM_SynthesizeNoise(benchmark::State& state) {
  const auto model = noise::default_output_noise();
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(noise::synthesize_noise(model, 50e6, n, ++seed));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SynthesizeNoise)->RangeMultiplier(4)->Range(1 << 14, 1 << 20)->Unit(benchmark::kMillisecond);

void BM_WelchAsd(benchmark::State& state) {
  const auto trace = noise::synthesize_noise(noise::default_output_noise(), 1e6, std::size_t{1} << 20, 1);
  const auto nperseg = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(metrology::welch_asd(trace, nperseg));
}
BENCHMARK(BM_WelchAsd)->Arg(1 << 12)->Arg(1 << 15)->Unit(benchmark::kMillisecond);

void BM_Bandlimit(benchmark::State& state) {
  const auto trace = noise::synthesize_noise(noise::default_output_noise(), 50e6, 50000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(metrology::bandlimit(trace, 20e6));
}
BENCHMARK(BM_Bandlimit)->Unit(benchmark::kMicrosecond);

void BM_StabilityReport(benchmark::State& state) {
  const auto loop = analog::canonical_loop();
  for (auto _ : state) benchmark::DoNotOptimize(analog::stability_report(loop));
}
BENCHMARK(BM_StabilityReport);

void BM_TuneCompensation(benchmark::State& state) {
  const auto loop = analog::canonical_loop();
  for (auto _ : state) benchmark::DoNotOptimize(analog::tune_compensation(loop, 64.8, 8.12e6));
}
BENCHMARK(BM_TuneCompensation)->Unit(benchmark::kMillisecond);

void BM_FitRamsey(benchmark::State& state) {
  const auto model = qubit::default_qubit_model();
  const auto delays = qubit::linspace(0.0, 10e-6, 41);
  std::vector<double> ideal;
  for (double t : delays) {
    ideal.push_back(qubit::coherence_population(qubit::Coherence::kRamsey, t, {model, 250e3, 0.0}));
  }
  std::mt19937_64 rng(1);
  const auto probs = qubit::sample_shots(ideal, 1000, rng);
  for (auto _ : state) benchmark::DoNotOptimize(qubit::fit_ramsey(delays, probs));
}
BENCHMARK(BM_FitRamsey)->Unit(benchmark::kMicrosecond);

void BM_ApplyCommand(benchmark::State& state) {
  auto s = twin::InstrumentState::power_on(twin::InstrumentConfig{});
  int i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(twin::apply_command(s, (++i & 1) ? "SET 1 3.3" : "GET 1"));
  }
}
BENCHMARK(BM_ApplyCommand);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "pathosyn/lattice.hpp"
#include "pathosyn/substrate.hpp"
#include "pathosyn/toyworld.hpp"

using namespace pathosyn;

static void BM_SmoothMask(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  const auto subject = generate_subject(ToyParams::for_resolution(res), RngKey(1), "s");
  for (auto _ : state) benchmark::DoNotOptimize(smooth_mask<float>(subject.mask));
  state.SetItemsProcessed(state.iterations() * res * res);
}
BENCHMARK(BM_SmoothMask)->Arg(32)->Arg(64)->Arg(128);

static void BM_InpaintReference(benchmark::State& state) {
  const auto subject = generate_subject(ToyParams{}, RngKey(2), "s");
  for (auto _ : state) benchmark::DoNotOptimize(inpaint_reference(subject.x, subject.mask, {}));
}
BENCHMARK(BM_InpaintReference)->Unit(benchmark::kMillisecond);

static void BM_GenerateSubject(benchmark::State& state) {
  const ToyParams p;
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_subject(p, RngKey(3).fold(i++), "s"));
}
BENCHMARK(BM_GenerateSubject)->Unit(benchmark::kMillisecond);

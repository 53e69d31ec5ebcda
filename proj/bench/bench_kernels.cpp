// Parallel kernels against their serial references. Pass --benchmark_filter
// to narrow the run; thread count follows OMP_NUM_THREADS.

#include <random>

#include <benchmark/benchmark.h>

#include "spinecurate/dataset_filter.hpp"
#include "spinecurate/loss_math.hpp"
#include "spinecurate/mask_restore.hpp"
#include "spinecurate/seg_metrics.hpp"
#include "spinecurate/synth.hpp"

using namespace spinecurate;

namespace {

RgbMask defective(int side) {
  const auto labels = synth::spine_labels(side, side, 11, 0.8);
  return synth::render_defective(labels, 11, synth::Defect::shaded);
}

LabelMask labels(int side) { return synth::spine_labels(side, side, 12, 0.8); }

void BM_Apta(benchmark::State& state) {
  const auto mask = defective(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(apta(mask, PaletteRules{}, Neighborhood{}));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void BM_AptaSerial(benchmark::State& state) {
  const auto mask = defective(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(serial::apta(mask, PaletteRules{}, Neighborhood{}));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <bool Parallel>
void BM_NearestDistances(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto gt = labels(side);
  const auto pred = synth::perturb_labels(gt, 3, 0.05);
  const auto from = extract_surface(pred, 1, {});
  const auto to = extract_surface(gt, 1, {});
  for (auto _ : state) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(nearest_distances(from, to));
    } else {
      benchmark::DoNotOptimize(serial::nearest_distances(from, to));
    }
  }
  state.counters["points"] = static_cast<double>(from.points.size());
}

template <bool Parallel>
void BM_ClassCensus(benchmark::State& state) {
  const auto mask = labels(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(class_census(mask));
    } else {
      benchmark::DoNotOptimize(serial::class_census(mask));
    }
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <bool Parallel>
void BM_FocalDice(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto pred = random_prob_tensor(21, side, side);
  const auto target = random_one_hot(22, side, side);
  const LossParams p;
  for (auto _ : state) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(focal_loss(pred, target, p) + dice_loss(pred, target, p));
    } else {
      benchmark::DoNotOptimize(serial::focal_loss(pred, target, p) + serial::dice_loss(pred, target, p));
    }
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}

}  // namespace

BENCHMARK(BM_Apta)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AptaSerial)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NearestDistances<true>)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_NearestDistances<false>)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ClassCensus<true>)->Arg(256)->Arg(1024);
BENCHMARK(BM_ClassCensus<false>)->Arg(256)->Arg(1024);
BENCHMARK(BM_FocalDice<true>)->Arg(128)->Arg(512);
BENCHMARK(BM_FocalDice<false>)->Arg(128)->Arg(512);

BENCHMARK_MAIN();

#include <random>

#include <benchmark/benchmark.h>

#include "motionseg/egomotion.hpp"
#include "motionseg/inference.hpp"
#include "motionseg/init.hpp"
#include "motionseg/pipeline.hpp"
#include "motionseg/superpixels.hpp"
#include "motionseg/synth.hpp"

using namespace motionseg;

namespace {

const SyntheticSequence& scene() {
  static const SyntheticSequence seq = generate(standard_scene("lateral-car", 0, 0.05));
  return seq;
}

void BM_EstimateMotion(benchmark::State& state) {
  const auto& seq = scene();
  const auto pixels = WeightedPixelSet::from_field(seq.flows[0], seq.intrinsics, nullptr, 0.0,
                                                   static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_motion(pixels, seq.intrinsics));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pixels.size()));
}
BENCHMARK(BM_EstimateMotion)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_ScoreModel(benchmark::State& state) {
  const auto& seq = scene();
  const MotionScorer scorer(seq.flows[0], seq.intrinsics);
  for (auto _ : state) {
    benchmark::DoNotOptimize(scorer.count_outliers_both_signs(seq.motions[0], 0.1));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(scorer.size()));
}
BENCHMARK(BM_ScoreModel);

void BM_SlicOnFlowMagnitude(benchmark::State& state) {
  const auto features = flow_magnitude_features(scene().flows[0]);
  for (auto _ : state) benchmark::DoNotOptimize(slic(features));
}
BENCHMARK(BM_SlicOnFlowMagnitude)->Unit(benchmark::kMillisecond);

void BM_ConstrainedRansac(benchmark::State& state) {
  const auto& seq = scene();
  const auto map = slic(flow_magnitude_features(seq.flows[0]));
  RansacConfig config;
  config.trials = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(constrained_ransac(seq.flows[0], map, seq.intrinsics, config));
  }
}
BENCHMARK(BM_ConstrainedRansac)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_PropagatePrior(benchmark::State& state) {
  const auto& seq = scene();
  const auto prior = prior_from_labels(seq.truth[0].labels, 2, 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(propagate_prior(prior, seq.flows[0], 10.0));
}
BENCHMARK(BM_PropagatePrior)->Unit(benchmark::kMillisecond);

void BM_TrackingFrame(benchmark::State& state) {
  const auto& seq = scene();
  PipelineConfig config;
  config.ransac.trials = 200;
  for (auto _ : state) {
    state.PauseTiming();
    MotionSegmenter segmenter(config);
    segmenter.process(seq.flows[0]);
    state.ResumeTiming();
    benchmark::DoNotOptimize(segmenter.process(seq.flows[1]));
  }
}
BENCHMARK(BM_TrackingFrame)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <memory>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "locret/estimator.hpp"
#include "locret/harness.hpp"
#include "locret/policy.hpp"
#include "locret/simworld.hpp"

namespace {

using namespace locret;

const World& bench_world() {
  static const World world = World::generate(WorldConfig{}, 7);
  return world;
}

// A briefly trained full-width model on one day of world-box traffic.
const Estimator& bench_model() {
  static const Estimator model = [] {
    const FixedBoxPolicy logging(FixedBoxPolicy::Kind::kWorld);
    const auto log = generate_event_log(bench_world(), logging, 1, 1, 11);
    TrainConfig tc;
    tc.epochs = 1;
    return fit_estimator(tc, attribute(log.searches, log.bookings)).estimator;
  }();
  return model;
}

std::vector<SearchRequest> bench_requests(std::size_t n) {
  std::vector<SearchRequest> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_search(bench_world(), 2, i, 11));
  return out;
}

void BM_Forward(benchmark::State& state) {
  const auto& model = bench_model();
  const auto fv = model.encode(bench_requests(1).front());
  for (auto _ : state) benchmark::DoNotOptimize(forward(model.params, fv));
}
BENCHMARK(BM_Forward);

void BM_ForwardWithDropout(benchmark::State& state) {
  const auto& model = bench_model();
  const auto fv = model.encode(bench_requests(1).front());
  const auto mask = scoring_mask(model.version_hash(), fv.canonical_hash(), 0,
                                 model.params.shape.hidden, model.config.dropout_rate);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model.params, fv, &mask));
}
BENCHMARK(BM_ForwardWithDropout);

void BM_McDropoutScore(benchmark::State& state) {
  const auto& model = bench_model();
  const auto fv = model.encode(bench_requests(1).front());
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mc_dropout_score(model, fv, n));
}
BENCHMARK(BM_McDropoutScore)->Arg(8)->Arg(32);

void BM_UcbBoundsFromRequest(benchmark::State& state) {
  const auto& model = bench_model();
  const auto reqs = bench_requests(64);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(ucb_bounds(model, reqs[i++ % reqs.size()]));
}
BENCHMARK(BM_UcbBoundsFromRequest);

void BM_CountInBox(benchmark::State& state) {
  const auto& world = bench_world();
  const double half = static_cast<double>(state.range(0)) / 100.0;
  std::mt19937_64 rng(3);
  std::vector<BoundingBox> boxes;
  for (int i = 0; i < 256; ++i) {
    const auto& c = world.listings()[rng() % world.listings().size()].location;
    boxes.push_back({{c.lat - half, c.lng - half}, {c.lat + half, c.lng + half}});
  }
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(count_in_box(world.index(), boxes[i++ % boxes.size()]));
}
BENCHMARK(BM_CountInBox)->Arg(5)->Arg(50)->Arg(300);

void BM_BruteForceCount(benchmark::State& state) {
  const auto& world = bench_world();
  const auto& c = world.listings().front().location;
  const BoundingBox box{{c.lat - 0.5, c.lng - 0.5}, {c.lat + 0.5, c.lng + 0.5}};
  for (auto _ : state) {
    std::size_t n = 0;
    for (const auto& l : world.listings()) n += contains(box, l.location) ? 1 : 0;
    benchmark::DoNotOptimize(n);
  }
}
BENCHMARK(BM_BruteForceCount);

}  // namespace

BENCHMARK_MAIN();

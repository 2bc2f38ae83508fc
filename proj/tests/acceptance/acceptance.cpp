// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: locret_acceptance [config.json] [criterion numbers...]

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "locret/config.hpp"
#include "locret/estimator.hpp"
#include "locret/harness.hpp"
#include "locret/model.hpp"
#include "locret/policy.hpp"
#include "locret/simworld.hpp"
#include "locret/train.hpp"

#ifndef LOCRET_REFERENCE_CONFIG
#define LOCRET_REFERENCE_CONFIG "configs/reference.json"
#endif

namespace {

using namespace locret;

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Context {
  ExperimentConfig config;
  std::filesystem::path scratch;
  std::optional<World> world;
  std::optional<ExperimentReport> loop_report;

  const World& reference_world() {
    if (!world) world = World::generate(config.world, config.world_seed);
    return *world;
  }
};

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same_bits(const ExtentOffsets& a, const ExtentOffsets& b) {
  return same_bits(a.sw_lat, b.sw_lat) && same_bits(a.ne_lat, b.ne_lat) &&
         same_bits(a.sw_lng, b.sw_lng) && same_bits(a.ne_lng, b.ne_lng);
}

// ---------------------------------------------------------------------------
// 1. Analytic gradients against central differences.

ModelShape small_shape(std::mt19937_64& rng, bool nonnegative) {
  ModelShape s;
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    s.vocab_sizes[f] = 2 + rng() % 4;
    s.embed_dims[f] = 1 + rng() % 3;
  }
  s.hidden = 6 + rng() % 5;
  s.nonnegative_output = nonnegative;
  return s;
}

TrainingExample random_example(const ModelShape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  TrainingExample ex;
  for (std::size_t f = 0; f < kNumCategorical; ++f) {
    ex.features.categorical[f] = static_cast<std::int32_t>(rng() % shape.vocab_sizes[f]);
  }
  for (auto& v : ex.features.continuous) v = n(rng);
  ex.center = {35.0 + 5.0 * n(rng), -95.0 + 5.0 * n(rng)};
  ex.label = {ex.center.lat + n(rng), ex.center.lng + n(rng)};
  return ex;
}

Outcome gradient_oracle(Context&) {
  constexpr int kSeeds = 24;
  constexpr double kEps = 1e-4;
  constexpr double kTol = 1e-4;
  std::size_t checked = 0, kinks = 0, failures = 0, total = 0;
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const bool nonnegative = seed % 3 != 2;
    const auto shape = small_shape(rng, nonnegative);
    auto params = ModelParams::init(shape, static_cast<std::uint64_t>(seed));
    std::normal_distribution<double> jitter(0.0, 0.05);
    for (auto& v : params.values) v += jitter(rng);

    std::vector<TrainingExample> batch;
    std::vector<DropoutMask> masks;
    for (int i = 0; i < 4; ++i) {
      batch.push_back(random_example(shape, rng));
      DropoutMask m = DropoutMask::all_keep(shape.hidden, 0.5);
      for (auto& k : m.keep) k = rng() % 2;
      masks.push_back(m);
    }
    LossSpec spec;
    spec.mode = seed % 2 == 0 ? BlLossMode::kHinge : BlLossMode::kAbsolute;

    const auto lg = backward(params, batch, masks, spec);
    const auto f = [&](std::size_t k, double delta) {
      const double orig = params.values[k];
      params.values[k] = orig + delta;
      const double v = batch_loss(params, batch, masks, spec);
      params.values[k] = orig;
      return v;
    };
    const double f0 = batch_loss(params, batch, masks, spec);
    for (std::size_t k = 0; k < params.size(); ++k) {
      ++total;
      const double up = f(k, kEps), down = f(k, -kEps);
      const double fd = (up - down) / (2.0 * kEps);
      // Second differences at eps and eps/2 scale by 4 for a smooth function;
      // a slope jump inside the stencil breaks that ratio.
      const double d1 = up - 2.0 * f0 + down;
      const double d2 = f(k, kEps / 2) - 2.0 * f0 + f(k, -kEps / 2);
      const double noise = 1e3 * 2.2e-16 * std::max(1.0, std::abs(f0));
      if (std::abs(d1) > noise) {
        const double ratio = d2 / d1;
        if (ratio < 0.15 || ratio > 0.35) {
          ++kinks;
          continue;
        }
      }
      ++checked;
      const double g = lg.gradient[k];
      const double denom = std::max({std::abs(g), std::abs(fd), 1e-6});
      const double rel = std::abs(g - fd) / denom;
      worst = std::max(worst, rel);
      if (rel > kTol) ++failures;
    }
  }
  const bool enough = checked * 10 >= total * 9;
  return {failures == 0 && enough,
          fmt("%d seeds, %zu coordinates checked, %zu skipped at kinks, max rel err %.2e, %zu "
              "above %.0e",
              kSeeds, checked, kinks, worst, failures, kTol)};
}

// ---------------------------------------------------------------------------
// 2 and 3. Single-context training against per-axis oracles.

struct SoloData {
  SearchRequest request;
  std::vector<LabeledSearch> examples;
  std::vector<double> lats, lngs;
};

SoloData solo_data() {
  SoloData d;
  auto& r = d.request;
  r.location_id = "solo";
  r.metro_id = "solo-metro";
  r.country_code = "US";
  r.location_type = LocationType::kCity;
  r.guests = 2;
  r.device_type = "web";
  r.lead_days = 14;
  r.trip_length_nights = 3;
  r.checkin_day_of_year = 134;
  r.checkout_day_of_year = 137;
  r.search_day_of_year = 120;
  r.center = {40.0, -100.0};
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> lat(r.center.lat, 0.3), lng(r.center.lng, 0.5);
  for (int i = 0; i < 10'000; ++i) {
    const GeoPoint p{lat(rng), lng(rng)};
    d.examples.push_back({r, p});
    d.lats.push_back(p.lat);
    d.lngs.push_back(p.lng);
  }
  std::sort(d.lats.begin(), d.lats.end());
  std::sort(d.lngs.begin(), d.lngs.end());
  return d;
}

TrainConfig solo_train_config(BlLossMode mode) {
  TrainConfig tc;
  tc.train_dropout_rate = 0.0;
  tc.batch_size = 256;
  tc.epochs = 40;
  tc.lr_final_fraction = 0.01;
  tc.seed = 5;
  tc.loss.mode = mode;
  return tc;
}

BoundingBox solo_fit(const SoloData& d, BlLossMode mode) {
  const auto fit = fit_estimator(solo_train_config(mode), d.examples);
  const auto& est = fit.estimator;
  return to_box(d.request.center, forward(est.params, est.encode(d.request)));
}

// Empirical quantile by sorting: the ceil(q * n)-th smallest value.
double sorted_quantile(const std::vector<double>& sorted, double q) {
  const auto n = static_cast<double>(sorted.size());
  const auto rank = static_cast<std::size_t>(std::ceil(q * n));
  return sorted[std::max<std::size_t>(rank, 1) - 1];
}

Outcome quantile_oracle(Context&) {
  const auto d = solo_data();
  const auto box = solo_fit(d, BlLossMode::kHinge);
  const double q_hi = 1.0 - 1.0 / 250.0, q_lo = 1.0 / 250.0;
  struct Check {
    const char* name;
    double got, want, range;
  };
  const double lat_range = d.lats.back() - d.lats.front();
  const double lng_range = d.lngs.back() - d.lngs.front();
  const Check checks[] = {
      {"sw.lat", box.sw.lat, sorted_quantile(d.lats, q_lo), lat_range},
      {"ne.lat", box.ne.lat, sorted_quantile(d.lats, q_hi), lat_range},
      {"sw.lng", box.sw.lng, sorted_quantile(d.lngs, q_lo), lng_range},
      {"ne.lng", box.ne.lng, sorted_quantile(d.lngs, q_hi), lng_range},
  };
  bool pass = true;
  double worst = 0.0;
  for (const auto& c : checks) {
    const double err = std::abs(c.got - c.want) / c.range;
    worst = std::max(worst, err);
    pass = pass && err <= 0.005;
  }
  return {pass, fmt("max |bound - quantile| = %.3f%% of range (limit 0.5%%); ne.lat %.4f vs %.4f",
                    100.0 * worst, box.ne.lat, checks[1].want)};
}

// Minimizes alpha * sum |x - b| + sign * beta * n * b over a uniform grid.
double grid_search_bound(const std::vector<double>& xs, double sign, double alpha, double beta) {
  constexpr int kSteps = 4000;
  const double lo = xs.front(), hi = xs.back();
  double best = lo, best_loss = INFINITY;
  for (int i = 0; i <= kSteps; ++i) {
    const double b = lo + (hi - lo) * i / kSteps;
    double loss = sign * beta * static_cast<double>(xs.size()) * b;
    for (double x : xs) loss += alpha * std::abs(x - b);
    if (loss < best_loss) {
      best_loss = loss;
      best = b;
    }
  }
  return best;
}

Outcome absolute_degeneracy(Context&) {
  const auto d = solo_data();
  const auto box = solo_fit(d, BlLossMode::kAbsolute);
  const double lat_median = grid_search_bound(d.lats, 0.0, 1.0, 0.0);
  const double lng_median = grid_search_bound(d.lngs, 0.0, 1.0, 0.0);
  const double lat_range = d.lats.back() - d.lats.front();
  const double lng_range = d.lngs.back() - d.lngs.front();
  const double errs[] = {
      std::abs(box.sw.lat - lat_median) / lat_range, std::abs(box.ne.lat - lat_median) / lat_range,
      std::abs(box.sw.lng - lng_median) / lng_range, std::abs(box.ne.lng - lng_median) / lng_range};
  const double worst = *std::max_element(std::begin(errs), std::end(errs));
  // Unconstrained per-bound optima of the absolute loss, for the record.
  const double ne_opt = grid_search_bound(d.lats, 1.0, 250.0, 1.0);
  const double sw_opt = grid_search_bound(d.lats, -1.0, 250.0, 1.0);
  return {worst <= 0.01,
          fmt("max |bound - median| = %.3f%% of range (limit 1%%); lat box %.4f..%.4f, median "
              "%.4f, 1-D optima sw %.4f ne %.4f",
              100.0 * worst, box.sw.lat, box.ne.lat, lat_median, sw_opt, ne_opt)};
}

// ---------------------------------------------------------------------------
// 4. Confidence arithmetic.

Outcome confidence_arithmetic(Context&) {
  std::vector<std::string> failed;
  const auto uniform = [](double v) { return ExtentOffsets{v, v, v, v}; };
  {
    const std::vector<ExtentOffsets> s{uniform(0.0), uniform(2.0)};
    const auto u = summarize_samples(s);
    if (!(u.mu == uniform(1.0) && u.sigma == uniform(1.0))) failed.push_back("{0,2}");
  }
  {
    const std::vector<ExtentOffsets> s{uniform(0.0), uniform(0.0), uniform(3.0)};
    const auto mad = summarize_samples(s, Dispersion::kMeanAbsDeviation);
    const auto sd = summarize_samples(s, Dispersion::kStdDev);
    if (std::abs(mad.sigma.ne_lat - 4.0 / 3.0) > 1e-15) failed.push_back("mad {0,0,3}");
    if (std::abs(sd.sigma.ne_lat - std::sqrt(2.0)) > 1e-15) failed.push_back("std {0,0,3}");
  }
  {
    const std::vector<ExtentOffsets> s(5, ExtentOffsets{0.25, 1.5, 0.125, 3.0});
    const auto u = summarize_samples(s);
    if (!(u.sigma == ExtentOffsets{} && u.mu == s[0])) failed.push_back("identical");
  }
  {
    UncertaintyEstimate u;
    u.mu = uniform(1.0);
    u.sigma = uniform(0.1);
    if (!(ucb_offsets(u, 2.0) == uniform(1.2))) failed.push_back("ucb 1+2*0.1");
  }
  // sigma == 0 exactly when every sample is equal, per component.
  std::mt19937_64 rng(77);
  std::size_t iff_violations = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng() % 31;
    std::vector<ExtentOffsets> s(n, uniform(0.5 + 0.001 * (rng() % 1000)));
    if (trial % 2 == 1) {
      auto& v = s[rng() % n];
      v.sw_lng = std::nextafter(v.sw_lng, 10.0);
    }
    const bool all_equal = std::all_of(s.begin(), s.end(), [&](const auto& x) { return x == s[0]; });
    const auto u = summarize_samples(s);
    if (all_equal != (u.sigma.sw_lng == 0.0)) ++iff_violations;
    if (u.sigma.sw_lat != 0.0) ++iff_violations;
  }
  if (iff_violations > 0) failed.push_back(fmt("%zu iff violations", iff_violations));
  std::string detail = "{0,2} -> mu 1 sigma 1; MAD/std fixtures; sigma=0 iff equal over 2000 sets";
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

// ---------------------------------------------------------------------------
// 5. Determinism and UCB geometry on a trained model.

std::shared_ptr<const Estimator> quick_model(const World& world, std::uint64_t seed) {
  const FixedBoxPolicy logging(FixedBoxPolicy::Kind::kWorld);
  const auto log = generate_event_log(world, logging, 1, 3, seed);
  const auto examples = attribute(log.searches, log.bookings);
  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 64;
  tc.seed = seed;
  return std::make_shared<const Estimator>(fit_estimator(tc, examples).estimator);
}

Outcome ucb_geometry(Context& ctx) {
  const auto& world = ctx.reference_world();
  const auto model = quick_model(world, 31);
  std::mt19937_64 rng(55);
  constexpr int kRequests = 1000;
  const double lambdas[] = {0.0, 1.0, 2.0, 4.0};
  int nondeterministic = 0, not_containing = 0, not_monotone = 0;
  for (int i = 0; i < kRequests; ++i) {
    const auto req = sample_search(world, 1 + static_cast<int>(rng() % 60), rng() % 5000, 97);
    const auto fv = model->encode(req);
    const auto a = mc_dropout_score(*model, fv);
    const auto b = mc_dropout_score(*model, model->encode(req));
    if (!same_bits(a.mu, b.mu) || !same_bits(a.sigma, b.sigma)) ++nondeterministic;
    std::vector<BoundingBox> boxes;
    for (double lambda : lambdas) boxes.push_back(ucb_bounds(*model, req, lambda));
    if (!contains(boxes[2], boxes[0])) ++not_containing;
    for (std::size_t k = 1; k < boxes.size(); ++k) {
      if (!contains(boxes[k], boxes[k - 1])) {
        ++not_monotone;
        break;
      }
    }
  }
  return {nondeterministic == 0 && not_containing == 0 && not_monotone == 0,
          fmt("%d requests: %d nondeterministic, %d UCB boxes missing the mean box, %d "
              "non-monotone in lambda",
              kRequests, nondeterministic, not_containing, not_monotone)};
}

// ---------------------------------------------------------------------------
// 6. Grid index against a brute-force scan.

Outcome index_oracle(Context& ctx) {
  const auto& world = ctx.reference_world();
  const auto& listings = world.listings();
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& region = world.config().region;
  constexpr int kBoxes = 1000;
  int mismatches = 0;
  std::size_t nonempty = 0;
  for (int i = 0; i < kBoxes; ++i) {
    BoundingBox box;
    const auto& a = listings[rng() % listings.size()].location;
    const auto& b = listings[rng() % listings.size()].location;
    switch (i % 5) {
      case 0:  // corners on listing coordinates
        box = {{std::min(a.lat, b.lat), std::min(a.lng, b.lng)},
               {std::max(a.lat, b.lat), std::max(a.lng, b.lng)}};
        break;
      case 1:  // degenerate box on a listing
        box = {a, a};
        break;
      case 2:  // whole world or whole region
        box = i % 2 == 0 ? world_box() : region;
        break;
      default: {  // random center, log-uniform half extents
        const GeoPoint c{region.sw.lat + u(rng) * (region.ne.lat - region.sw.lat),
                         region.sw.lng + u(rng) * (region.ne.lng - region.sw.lng)};
        const double h_lat = std::pow(10.0, -3.0 + 4.0 * u(rng));
        const double h_lng = std::pow(10.0, -3.0 + 4.0 * u(rng));
        box = clamp(BoundingBox{{c.lat - h_lat, c.lng - h_lng}, {c.lat + h_lat, c.lng + h_lng}});
      }
    }
    std::size_t brute = 0;
    for (const auto& l : listings) brute += contains(box, l.location) ? 1 : 0;
    if (count_in_box(world.index(), box) != brute) ++mismatches;
    nonempty += brute > 0 ? 1 : 0;
  }
  return {mismatches == 0 && listings.size() == 10'000,
          fmt("%d boxes over %zu listings (%zu non-empty): %d mismatches", kBoxes, listings.size(),
              nonempty, mismatches)};
}

// ---------------------------------------------------------------------------
// 7. Heuristic constants.

double round4(double v) { return std::round(v * 1e4) / 1e4; }

Outcome heuristic_values(Context&) {
  std::vector<std::string> failed;
  if (expansion_factor(0.0) != 2.9) failed.push_back("expansion(0)");
  const double threshold = std::exp(3.8) - 1.0;
  if (std::abs(threshold - 43.7) > 0.05) failed.push_back("threshold");
  if (std::abs(expansion_factor(threshold) - 1.0) > 1e-12) failed.push_back("expansion(threshold)");
  for (double d : {threshold + 1e-6, 44.0, 100.0, 1e4}) {
    if (expansion_factor(d) != 1.0) failed.push_back(fmt("expansion(%g)", d));
  }
  if (!(expansion_factor(threshold - 0.1) > 1.0)) failed.push_back("below threshold");

  SearchRequest req;
  req.location_id = "equator-city";
  req.location_type = LocationType::kCity;
  req.center = {0.0, 0.0};
  const auto box = heuristic_bounds(req);
  // 25 miles = 40.2336 km; one degree of arc on a 6371.0088 km sphere.
  const double km_per_deg = 2.0 * 3.14159265358979323846 * 6371.0088 / 360.0;
  const double expected = 25.0 * 1.609344 / km_per_deg;
  for (double half : {box.ne.lat, -box.sw.lat, box.ne.lng, -box.sw.lng}) {
    if (round4(half) != 0.3618 || round4(expected) != 0.3618) {
      failed.push_back(fmt("city half extent %.6f", half));
      break;
    }
  }
  std::string detail = fmt("expansion(0)=2.9, clamps from d=%.4f km; city half extent %.4f deg",
                           threshold, box.ne.lat);
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

// ---------------------------------------------------------------------------
// 8. Offline policy ladder.

Outcome policy_ladder(Context& ctx) {
  const auto& cfg = ctx.config;
  const auto& world = ctx.reference_world();
  const FixedBoxPolicy logging(FixedBoxPolicy::Kind::kWorld);
  const auto log = generate_event_log(world, logging, 1, cfg.offline_days, cfg.loop.stream_seed);
  const auto split = split_event_log(log, cfg.offline_heldout_days);

  const HeuristicPolicy heuristic;
  const StatsPolicy stats(std::make_shared<const StatsTable>(StatsTable::build(stats_bookings(split.train))));
  const auto fit = fit_estimator(cfg.offline_train, split.train);
  const MlMeanPolicy ml(std::make_shared<const Estimator>(fit.estimator));

  const auto mh = evaluate_offline(heuristic, split.heldout, &world.index());
  const auto ms = evaluate_offline(stats, split.heldout, &world.index());
  const auto mm = evaluate_offline(ml, split.heldout, &world.index());
  const bool pass = mm.booked_location_recall > ms.booked_location_recall &&
                    ms.booked_location_recall > mh.booked_location_recall &&
                    mm.mean_bounds_size_km <= ms.mean_bounds_size_km;
  return {pass, fmt("recall ml %.4f > stats %.4f > heuristic %.4f; size ml %.2f km <= stats %.2f km "
                    "(heuristic %.2f km); %zu train / %zu held-out",
                    mm.booked_location_recall, ms.booked_location_recall, mh.booked_location_recall,
                    mm.mean_bounds_size_km, ms.mean_bounds_size_km, mh.mean_bounds_size_km,
                    split.train.size(), split.heldout.size())};
}

// ---------------------------------------------------------------------------
// 9. Closed-loop exploration.

const ArmResult* ucb_arm(const ExperimentReport& report, double lambda) {
  for (const auto& a : report.arms) {
    if (a.spec.kind == ArmKind::kUcb && a.spec.lambda == lambda) return &a;
  }
  return nullptr;
}

std::optional<double> sigma_on_day(const ArmResult& arm, int day) {
  for (const auto& d : arm.days) {
    if (d.day == day) return d.metrics.mean_sigma;
  }
  return std::nullopt;
}

Outcome exploration_lift(Context& ctx) {
  const auto& cfg = ctx.config;
  ctx.loop_report = compare_policies(ctx.reference_world(), cfg.arms, cfg.loop);
  const auto& report = *ctx.loop_report;
  const auto* mean = ucb_arm(report, 0.0);
  const auto* ucb = ucb_arm(report, 2.0);
  if (mean == nullptr || ucb == nullptr) return {false, "config lacks UCB arms with lambda 0 and 2"};
  if (mean->aborted || ucb->aborted) return {false, "arm aborted: " + mean->abort_reason + ucb->abort_reason};
  const auto s5 = sigma_on_day(*ucb, 5);
  const auto s_end = sigma_on_day(*ucb, cfg.loop.days);
  if (!s5 || !s_end) return {false, "missing sigma series"};
  const bool more_tail = ucb->tail_bookings > mean->tail_bookings;
  const bool sigma_drop = *s_end <= 0.95 * *s5;
  return {more_tail && sigma_drop,
          fmt("tail bookings lambda=2 %zu vs lambda=0 %zu (%zu tail destinations); sigma day 5 "
              "%.4f -> day %d %.4f (%.1f%% change)",
              ucb->tail_bookings, mean->tail_bookings, report.tail_destinations.size(), *s5,
              cfg.loop.days, *s_end, 100.0 * (*s_end / *s5 - 1.0))};
}

// ---------------------------------------------------------------------------
// 10. Uncertainty of head vs tail destinations.

Outcome uncertainty_ordering(Context& ctx) {
  const auto& cfg = ctx.config;
  const auto& world = ctx.reference_world();
  // One logged day keeps both abundant and nearly unseen destinations in the
  // training set; the epoch count gives about the offline run's step budget.
  const FixedBoxPolicy logging(FixedBoxPolicy::Kind::kWorld);
  const auto log = generate_event_log(world, logging, 1, 1, cfg.loop.stream_seed);
  const auto examples = attribute(log.searches, log.bookings);
  auto tc = cfg.offline_train;
  tc.epochs = 2000;
  const auto model = fit_estimator(tc, examples).estimator;

  std::map<std::string, std::size_t> counts;
  for (const auto& e : examples) ++counts[e.request.location_id];
  std::map<std::string, std::pair<double, std::size_t>> sigma;
  for (int day = 2; day <= 4; ++day) {
    for (const auto& req : sample_day_searches(world, day, cfg.loop.stream_seed)) {
      auto& s = sigma[req.location_id];
      s.first += mc_dropout_score(model, model.encode(req)).mean_sigma();
      ++s.second;
    }
  }
  double head = 0.0, tail = 0.0;
  std::size_t n_head = 0, n_tail = 0;
  for (const auto& d : world.destinations()) {
    const auto it = sigma.find(d.location_id);
    if (it == sigma.end()) continue;
    const double mean = it->second.first / static_cast<double>(it->second.second);
    const std::size_t c = counts[d.location_id];
    if (c >= 100) {
      head += mean;
      ++n_head;
    } else if (c <= 2) {
      tail += mean;
      ++n_tail;
    }
  }
  if (n_head == 0 || n_tail == 0) {
    return {false, fmt("empty group: %zu head, %zu tail destinations", n_head, n_tail)};
  }
  head /= static_cast<double>(n_head);
  tail /= static_cast<double>(n_tail);
  return {head < tail, fmt("mean sigma head %.4f deg (%zu destinations) vs tail %.4f deg (%zu "
                           "destinations), %zu training examples",
                           head, n_head, tail, n_tail, examples.size())};
}

// ---------------------------------------------------------------------------
// 11. Round trips.

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_metrics(const DayRecord& a, const DayRecord& b) {
  const auto opt_eq = [](const std::optional<double>& x, const std::optional<double>& y) {
    return x.has_value() == y.has_value() && (!x || same_bits(*x, *y));
  };
  return a.day == b.day && a.arm == b.arm &&
         same_bits(a.metrics.booked_location_recall, b.metrics.booked_location_recall) &&
         same_bits(a.metrics.mean_bounds_size_km, b.metrics.mean_bounds_size_km) &&
         same_bits(a.metrics.mean_listings_retrieved, b.metrics.mean_listings_retrieved) &&
         opt_eq(a.metrics.booking_conversion, b.metrics.booking_conversion) &&
         opt_eq(a.metrics.mean_sigma, b.metrics.mean_sigma);
}

Outcome round_trips(Context& ctx) {
  std::vector<std::string> failed;
  const auto& cfg = ctx.config;
  const auto& world = ctx.reference_world();

  const auto model = quick_model(world, 41);
  const auto ckpt = ctx.scratch / "model.ckpt";
  const auto ckpt2 = ctx.scratch / "model2.ckpt";
  save_checkpoint(*model, ckpt);
  const auto loaded = load_checkpoint(ckpt, model->vocab.fingerprint());
  bool params_equal = loaded.params.size() == model->params.size() &&
                      std::memcmp(loaded.params.values.data(), model->params.values.data(),
                                  model->params.size() * sizeof(double)) == 0;
  save_checkpoint(loaded, ckpt2);
  if (!params_equal || loaded.version != model->version || !(loaded.stats == model->stats)) {
    failed.push_back("checkpoint contents");
  }
  if (read_bytes(ckpt) != read_bytes(ckpt2)) failed.push_back("checkpoint bytes");

  const auto text = world.serialize();
  if (World::generate(cfg.world, cfg.world_seed).serialize() != text) failed.push_back("world regen");
  const auto world_file = ctx.scratch / "world.jsonl";
  world.save(world_file);
  if (World::load(world_file).serialize() != text) failed.push_back("world load");

  std::vector<DayRecord> rows;
  if (ctx.loop_report) {
    for (const auto& a : ctx.loop_report->arms) rows.insert(rows.end(), a.days.begin(), a.days.end());
  } else {
    auto loop = cfg.loop;
    loop.days = 3;
    loop.warmup_days = 2;
    loop.train.epochs = 1;
    for (const auto& a : compare_policies(world, cfg.arms, loop).arms) {
      rows.insert(rows.end(), a.days.begin(), a.days.end());
    }
  }
  const auto csv = metrics_csv(rows);
  const auto parsed = parse_metrics_csv(csv);
  bool csv_equal = parsed.size() == rows.size();
  for (std::size_t i = 0; csv_equal && i < rows.size(); ++i) csv_equal = same_metrics(rows[i], parsed[i]);
  if (!csv_equal) failed.push_back("csv values");
  if (metrics_csv(parsed) != csv) failed.push_back("csv text");

  std::string detail = fmt("checkpoint bit-exact (%zu params), world bytes stable (%zu bytes), %zu CSV "
                           "rows re-parse exactly",
                           model->params.size(), text.size(), rows.size());
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime limit
  std::function<Outcome(Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path config_path = LOCRET_REFERENCE_CONFIG;
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (!arg.empty() && std::isdigit(static_cast<unsigned char>(arg[0]))) {
      selected.insert(std::stoi(arg));
    } else {
      config_path = arg;
    }
  }

  Context ctx;
  try {
    ctx.config = load_experiment_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cannot load %s: %s\n", config_path.string().c_str(), e.what());
    return 2;
  }
  ctx.scratch = std::filesystem::temp_directory_path() /
                fmt("locret-acceptance-%llu",
                    static_cast<unsigned long long>(
                        std::chrono::steady_clock::now().time_since_epoch().count()));
  std::filesystem::create_directories(ctx.scratch);

  const std::vector<Criterion> criteria = {
      {1, "gradient oracle", 60, gradient_oracle},
      {2, "quantile oracle", 300, quantile_oracle},
      {3, "absolute-mode degeneracy", 300, absolute_degeneracy},
      {4, "confidence arithmetic", 0, confidence_arithmetic},
      {5, "determinism and UCB geometry", 0, ucb_geometry},
      {6, "index oracle", 10, index_oracle},
      {7, "heuristic values", 0, heuristic_values},
      {8, "policy ladder", 900, policy_ladder},
      {9, "exploration lift", 1800, exploration_lift},
      {10, "uncertainty ordering", 0, uncertainty_ordering},
      {11, "round trips", 0, round_trips},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(ctx);
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.1f s", secs);
    if (c.budget_s > 0) {
      timing += fmt(" of %.0f s", c.budget_s);
      if (secs > c.budget_s) out.pass = false;
    }
    if (!out.pass) ++failures;
    std::printf("%s criterion %d %s: %s [%s]\n", out.pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::filesystem::remove_all(ctx.scratch);
  return failures == 0 ? 0 : 1;
}

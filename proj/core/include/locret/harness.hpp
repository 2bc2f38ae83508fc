#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "locret/estimator.hpp"
#include "locret/policy.hpp"
#include "locret/simworld.hpp"
#include "locret/train.hpp"

namespace locret {

struct Metrics {
  /// Fraction of observed bookings (offline) or realizable demand (online) inside the bounds.
  double booked_location_recall = 0.0;
  /// Mean width + height of the bounds, km.
  double mean_bounds_size_km = 0.0;
  double mean_listings_retrieved = 0.0;
  /// Bookings per search; online only.
  std::optional<double> booking_conversion;
  /// Mean MC-dropout sigma over the four offsets (degrees); uncertainty-aware policies only.
  std::optional<double> mean_sigma;
  std::size_t n_observations = 0;
};

/// Scores a policy on held-out labeled searches. `index` enables the listings metric.
/// Throws std::invalid_argument on an empty held-out set.
Metrics evaluate_offline(const Policy& policy, std::span<const LabeledSearch> heldout,
                         const GridIndex* index = nullptr);

// ---------------------------------------------------------------------------
// Event logs

struct EventLog {
  int first_day = 0;
  int days = 0;
  std::vector<ServedSearch> searches;
  std::vector<BookingEvent> bookings;
};

/// Serves `days` consecutive days of the search stream with a fixed policy.
EventLog generate_event_log(const World& world, const Policy& policy, int first_day, int days,
                            std::uint64_t stream_seed);

/// JSON-lines: {"type": "search", request, served} and {"type": "booking", ...}.
void save_event_log(const EventLog& log, const std::filesystem::path& path);
EventLog load_event_log(const std::filesystem::path& path);

struct DataSplit {
  std::vector<LabeledSearch> train;
  std::vector<LabeledSearch> heldout;
};

/// Attributed examples; bookings from the final `heldout_days` days form the held-out set.
DataSplit split_event_log(const EventLog& log, int heldout_days);

std::vector<StatsBooking> stats_bookings(std::span<const LabeledSearch> examples);

// ---------------------------------------------------------------------------
// Closed loop and paired comparison

enum class ArmKind { kHeuristic, kStats, kUcb, kWorld, kDegenerate };

std::string_view to_string(ArmKind k);
ArmKind arm_kind_from_string(std::string_view s);

struct ArmSpec {
  std::string name;
  ArmKind kind = ArmKind::kUcb;
  double lambda = 2.0;
  std::size_t n_samples = 32;
  Dispersion dispersion = Dispersion::kMeanAbsDeviation;
  double containment = 0.96;
  double expansion = 1.1;

  /// Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const ArmSpec& a);
void from_json(const nlohmann::json& j, ArmSpec& a);

struct LoopConfig {
  int days = 60;
  /// Heuristic-served days before day 1, shared by all arms.
  int warmup_days = 14;
  /// Sliding training window, in simulated days.
  int window_days = 365;
  std::uint64_t stream_seed = 1;
  std::uint64_t train_seed = 1;
  TrainConfig train;
  /// A destination is "tail" if it had at most this many bookings during warm-up.
  std::size_t tail_max_prior_bookings = 2;
  /// (request, bounds) pairs kept per arm per day for plotting.
  std::size_t samples_per_day = 4;

  void validate() const;
};

void to_json(nlohmann::json& j, const LoopConfig& c);
void from_json(const nlohmann::json& j, LoopConfig& c);

struct DayRecord {
  int day = 0;
  std::string arm;
  Metrics metrics;
  std::size_t searches = 0;
  std::size_t bookings = 0;
  std::size_t tail_bookings = 0;
  std::size_t training_examples = 0;
  std::uint64_t stream_hash = 0;
};

struct BoundsSample {
  int day = 0;
  std::string arm;
  SearchRequest request;
  BoundingBox bounds;
  std::optional<UncertaintyEstimate> uncertainty;
};

struct ArmResult {
  ArmSpec spec;
  std::vector<DayRecord> days;
  Metrics overall;
  std::size_t total_bookings = 0;
  std::size_t tail_bookings = 0;
  bool aborted = false;
  std::string abort_reason;
};

struct MetricDelta {
  std::string arm;
  std::string metric;
  double baseline = 0.0;
  double value = 0.0;
  double absolute = 0.0;
  /// Relative change in percent; nullopt when the baseline is 0.
  std::optional<double> percent;
};

struct ExperimentReport {
  nlohmann::json config_echo;
  std::uint64_t world_seed = 0;
  std::uint64_t stream_seed = 0;
  std::uint64_t train_seed = 0;
  std::vector<ArmResult> arms;
  /// Per-day stream hash, identical across arms by construction.
  std::vector<std::uint64_t> stream_hashes;
  std::vector<std::string> tail_destinations;
  std::vector<MetricDelta> deltas;
  std::vector<BoundsSample> samples;

  const ArmResult* arm(const std::string& name) const;
};

using DayCallback = std::function<void(const DayRecord&)>;

/// Warm-up with the heuristic, then for each day: serve, book, mature, attribute,
/// retrain, log. A training failure aborts the arm with a partial record.
ExperimentReport run_closed_loop(const World& world, const ArmSpec& arm, const LoopConfig& config,
                                 const DayCallback& on_day = {});

/// All arms replay the same searches and demand draws; deltas are against arms[0].
/// Throws ConfigError for fewer than two arms.
ExperimentReport compare_policies(const World& world, std::span<const ArmSpec> arms,
                                  const LoopConfig& config, const DayCallback& on_day = {});

std::vector<MetricDelta> compute_deltas(std::span<const ArmResult> arms);

// ---------------------------------------------------------------------------
// Output

inline constexpr std::string_view kMetricsCsvHeader =
    "day,arm,recall,size_km,listings,conversion,mean_sigma";

std::string metrics_csv(std::span<const DayRecord> rows);
/// Parses CSV written by metrics_csv (empty cells read as missing values).
std::vector<DayRecord> parse_metrics_csv(const std::string& text);

/// Writes metrics.csv, bounds_samples.jsonl and report.json under `dir`.
/// Throws DataError if the directory cannot be written.
void emit_plot_data(const ExperimentReport& report, const std::filesystem::path& dir);

nlohmann::json report_json(const ExperimentReport& report);
nlohmann::json metrics_json(const Metrics& m);

}  // namespace locret

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "locret/estimator.hpp"
#include "locret/featurizer.hpp"
#include "locret/geo.hpp"

namespace locret {

// ---------------------------------------------------------------------------
// Uncertainty from MC dropout

/// How the per-component dispersion of the MC samples is summarized.
///   kMeanAbsDeviation - sum_i sqrt((y_i - mu)^2) / N, the printed form of the
///                       confidence formula (default).
///   kStdDev           - population standard deviation, for comparison.
enum class Dispersion { kMeanAbsDeviation, kStdDev };

std::string_view to_string(Dispersion d);
Dispersion dispersion_from_string(std::string_view s);

struct UncertaintyEstimate {
  ExtentOffsets mu;
  ExtentOffsets sigma;
  std::size_t n_samples = 0;

  double mean_sigma() const;
};

/// mu and sigma of a sample set, componentwise.
UncertaintyEstimate summarize_samples(std::span<const ExtentOffsets> samples,
                                      Dispersion dispersion = Dispersion::kMeanAbsDeviation);

/// Mask for MC sample `sample`, keyed by (model version, feature encoding, sample index).
DropoutMask scoring_mask(std::uint64_t model_version_hash, std::uint64_t feature_hash,
                         std::size_t sample, std::size_t hidden, double rate);

/// n forward passes with independent, deterministic dropout masks.
/// Throws std::invalid_argument for n < 2.
UncertaintyEstimate mc_dropout_score(const Estimator& model, const FeatureVector& fv,
                                     std::size_t n = 32,
                                     Dispersion dispersion = Dispersion::kMeanAbsDeviation);

/// max(0, mu + lambda * sigma), componentwise.
ExtentOffsets ucb_offsets(const UncertaintyEstimate& u, double lambda);

/// to_box(center, ucb_offsets(...)). lambda = 0 gives the MC-mean box.
BoundingBox ucb_bounds(const Estimator& model, const SearchRequest& req, double lambda = 2.0,
                       std::size_t n = 32, Dispersion dispersion = Dispersion::kMeanAbsDeviation);

// ---------------------------------------------------------------------------
// Cold-start heuristics

/// country/state/neighborhood: admin bounds as-is. city: box around a 25-mile
/// circle. street/address/poi/building: admin bounds scaled by
/// expansion_factor(diagonal). Missing admin bounds fall back to the city rule.
BoundingBox heuristic_bounds(const SearchRequest& req);

/// Square box circumscribing a circle of `radius_km` about `center`.
BoundingBox radius_box(const GeoPoint& center, double radius_km);

// ---------------------------------------------------------------------------
// Per-destination booking statistics

struct StatsBooking {
  std::string location_id;
  GeoPoint booked;
  GeoPoint center;
};

struct StatsPoint {
  GeoPoint point;
  double distance_km = 0.0;
  friend bool operator==(const StatsPoint&, const StatsPoint&) = default;
};

struct StatsEntry {
  GeoPoint center;
  /// Sorted by distance to center; ties keep insertion order.
  std::vector<StatsPoint> points;
  friend bool operator==(const StatsEntry&, const StatsEntry&) = default;
};

class StatsTable {
 public:
  static StatsTable build(std::span<const StatsBooking> bookings);

  const StatsEntry* find(const std::string& location_id) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, StatsEntry>& entries() const { return entries_; }

  /// One JSON object per destination: {"location_id", "center", "points": [...]}.
  void save_jsonl(const std::filesystem::path& path) const;
  static StatsTable load_jsonl(const std::filesystem::path& path);

  friend bool operator==(const StatsTable&, const StatsTable&) = default;

 private:
  std::map<std::string, StatsEntry> entries_;
};

/// Axis-consistent planar km distance using the center's latitude for longitude.
double stats_distance_km(const GeoPoint& center, const GeoPoint& p);

/// Number of nearest points kept: ceil(containment * n).
std::size_t containment_count(double containment, std::size_t n);

/// Minimal box over the nearest points, before expansion. nullopt for unknown destinations.
std::optional<BoundingBox> stats_core_box(const StatsTable& table, const std::string& location_id,
                                          double containment);

/// Stats bounds with heuristic fallback for destinations not in the table.
BoundingBox stats_bounds(const StatsTable& table, const SearchRequest& req,
                         double containment = 0.96, double expansion = 1.1);

// ---------------------------------------------------------------------------
// Policy interface

struct Decision {
  BoundingBox box;
  std::optional<UncertaintyEstimate> uncertainty;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Decision decide(const SearchRequest& req) const = 0;
  virtual std::string name() const = 0;
};

class HeuristicPolicy final : public Policy {
 public:
  Decision decide(const SearchRequest& req) const override;
  std::string name() const override { return "heuristic"; }
};

class StatsPolicy final : public Policy {
 public:
  StatsPolicy(std::shared_ptr<const StatsTable> table, double containment = 0.96,
              double expansion = 1.1);
  Decision decide(const SearchRequest& req) const override;
  std::string name() const override { return "stats"; }

 private:
  std::shared_ptr<const StatsTable> table_;
  double containment_;
  double expansion_;
};

/// MC-dropout UCB. With lambda = 0 this is the mean policy.
class McDropoutUcbPolicy : public Policy {
 public:
  McDropoutUcbPolicy(std::shared_ptr<const Estimator> model, double lambda = 2.0,
                     std::size_t n_samples = 32,
                     Dispersion dispersion = Dispersion::kMeanAbsDeviation);
  Decision decide(const SearchRequest& req) const override;
  std::string name() const override;

  const Estimator& model() const { return *model_; }
  double lambda() const { return lambda_; }

 private:
  std::shared_ptr<const Estimator> model_;
  double lambda_;
  std::size_t n_samples_;
  Dispersion dispersion_;
};

class MlMeanPolicy final : public McDropoutUcbPolicy {
 public:
  explicit MlMeanPolicy(std::shared_ptr<const Estimator> model, std::size_t n_samples = 32,
                        Dispersion dispersion = Dispersion::kMeanAbsDeviation)
      : McDropoutUcbPolicy(std::move(model), 0.0, n_samples, dispersion) {}
  std::string name() const override { return "ml_mean"; }
};

/// Serves the same box for every request (world or degenerate baselines).
class FixedBoxPolicy final : public Policy {
 public:
  enum class Kind { kWorld, kDegenerate };
  explicit FixedBoxPolicy(Kind kind) : kind_(kind) {}
  Decision decide(const SearchRequest& req) const override;
  std::string name() const override { return kind_ == Kind::kWorld ? "world" : "degenerate"; }

 private:
  Kind kind_;
};

}  // namespace locret

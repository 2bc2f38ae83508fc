#include "locret/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "locret/errors.hpp"
#include "locret/hashing.hpp"
#include "locret/json_io.hpp"
#include "locret/logging.hpp"

namespace locret {

namespace {

// Running sums behind a Metrics value.
struct MetricsAccumulator {
  std::size_t n = 0;
  std::size_t recall_den = 0;
  std::size_t recall_num = 0;
  double size_sum = 0.0;
  double listings_sum = 0.0;
  std::size_t bookings = 0;
  std::size_t sigma_n = 0;
  double sigma_sum = 0.0;
  bool online = false;

  void add_decision(const Decision& d, const GridIndex* index) {
    ++n;
    const auto size = box_size_km(d.box);
    size_sum += size.wh_sum_km;
    if (index) listings_sum += static_cast<double>(index->count_in_box(d.box));
    if (d.uncertainty) {
      ++sigma_n;
      sigma_sum += d.uncertainty->mean_sigma();
    }
  }

  void merge(const MetricsAccumulator& o) {
    n += o.n;
    recall_den += o.recall_den;
    recall_num += o.recall_num;
    size_sum += o.size_sum;
    listings_sum += o.listings_sum;
    bookings += o.bookings;
    sigma_n += o.sigma_n;
    sigma_sum += o.sigma_sum;
    online = online || o.online;
  }

  Metrics finish() const {
    Metrics m;
    m.n_observations = n;
    if (n == 0) return m;
    const double dn = static_cast<double>(n);
    m.booked_location_recall =
        recall_den ? static_cast<double>(recall_num) / static_cast<double>(recall_den) : 0.0;
    m.mean_bounds_size_km = size_sum / dn;
    m.mean_listings_retrieved = listings_sum / dn;
    if (online) m.booking_conversion = static_cast<double>(bookings) / dn;
    if (sigma_n) m.mean_sigma = sigma_sum / static_cast<double>(sigma_n);
    return m;
  }
};

std::unique_ptr<Policy> fixed_policy(ArmKind kind) {
  switch (kind) {
    case ArmKind::kWorld:
      return std::make_unique<FixedBoxPolicy>(FixedBoxPolicy::Kind::kWorld);
    case ArmKind::kDegenerate:
      return std::make_unique<FixedBoxPolicy>(FixedBoxPolicy::Kind::kDegenerate);
    default:
      return std::make_unique<HeuristicPolicy>();
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::optional<double> parse_cell(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (r.ec != std::errc{} || r.ptr != cell.data() + cell.size()) {
    throw DataError("bad numeric cell '" + cell + "'");
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

// Everything an arm needs to rebuild its policy from the current training data.
class ArmState {
 public:
  ArmState(const ArmSpec& spec, const LoopConfig& config) : spec_(spec), config_(config) {
    policy_ = fixed_policy(spec.kind);
  }

  const Policy& policy() const { return *policy_; }

  // Returns false if training diverged.
  bool retrain(std::span<const LabeledSearch> data, int day, std::string* error) {
    if (spec_.kind == ArmKind::kStats) {
      if (data.empty()) return true;
      auto table = std::make_shared<StatsTable>(StatsTable::build(stats_bookings(data)));
      policy_ = std::make_unique<StatsPolicy>(std::move(table), spec_.containment,
                                              spec_.expansion);
      return true;
    }
    if (spec_.kind != ArmKind::kUcb) return true;
    if (data.empty()) return true;
    TrainConfig tc = config_.train;
    tc.seed = hash_combine(config_.train_seed, static_cast<std::uint64_t>(day));
    try {
      auto fit = fit_estimator(tc, data);
      auto model = std::make_shared<const Estimator>(std::move(fit.estimator));
      policy_ = std::make_unique<McDropoutUcbPolicy>(std::move(model), spec_.lambda,
                                                     spec_.n_samples, spec_.dispersion);
    } catch (const NumericalError& e) {
      *error = e.what();
      return false;
    }
    return true;
  }

 private:
  const ArmSpec& spec_;
  const LoopConfig& config_;
  std::unique_ptr<Policy> policy_;
};

struct WarmupState {
  std::vector<ServedSearch> searches;
  std::vector<BookingEvent> bookings;
  std::vector<std::string> tail;
};

WarmupState run_warmup(const World& world, const LoopConfig& config) {
  WarmupState w;
  if (config.warmup_days == 0) {
    for (const auto& d : world.destinations()) w.tail.push_back(d.location_id);
    return w;
  }
  const auto log = generate_event_log(world, HeuristicPolicy{}, 1 - config.warmup_days,
                                      config.warmup_days, config.stream_seed);
  w.searches = log.searches;
  w.bookings = log.bookings;
  std::map<std::string, std::size_t> counts;
  for (const auto& b : w.bookings) {
    if (!b.cancelled) ++counts[b.request.location_id];
  }
  for (const auto& d : world.destinations()) {
    const auto it = counts.find(d.location_id);
    const std::size_t c = it == counts.end() ? 0 : it->second;
    if (c <= config.tail_max_prior_bookings) w.tail.push_back(d.location_id);
  }
  return w;
}

std::vector<LabeledSearch> training_window(const World& world, const LoopConfig& config,
                                           std::span<const ServedSearch> searches,
                                           std::span<const BookingEvent> bookings,
                                           int as_of_day) {
  const int first = as_of_day - config.window_days + 1;
  std::vector<ServedSearch> s;
  for (const auto& x : searches) {
    if (x.request.search_day_index >= first - 1) s.push_back(x);
  }
  std::vector<BookingEvent> b;
  for (const auto& x : matured(bookings, as_of_day, world.config().maturation_days)) {
    if (x.search_day_index >= first) b.push_back(x);
  }
  return attribute(s, b);
}

ArmResult run_arm(const World& world, const ArmSpec& spec, const LoopConfig& config,
                  const WarmupState& warmup, std::vector<std::uint64_t>* hashes,
                  std::vector<BoundsSample>* samples, const DayCallback& on_day) {
  ArmResult result;
  result.spec = spec;
  const std::set<std::string> tail(warmup.tail.begin(), warmup.tail.end());
  std::vector<ServedSearch> searches = warmup.searches;
  std::vector<BookingEvent> bookings = warmup.bookings;
  ArmState state(spec, config);
  MetricsAccumulator overall;
  overall.online = true;

  std::string error;
  auto data = training_window(world, config, searches, bookings, 0);
  if (!state.retrain(data, 0, &error)) {
    result.aborted = true;
    result.abort_reason = "day 0: " + error;
    return result;
  }

  for (int day = 1; day <= config.days; ++day) {
    const auto day_searches = sample_day_searches(world, day, config.stream_seed);
    const std::uint64_t hash = stream_hash(day_searches);
    if (hashes && hashes->size() < static_cast<std::size_t>(day)) hashes->push_back(hash);

    DayRecord rec;
    rec.day = day;
    rec.arm = spec.name;
    rec.stream_hash = hash;
    rec.searches = day_searches.size();
    rec.training_examples = data.size();
    MetricsAccumulator acc;
    acc.online = true;
    for (std::size_t i = 0; i < day_searches.size(); ++i) {
      const auto& req = day_searches[i];
      const Decision d = state.policy().decide(req);
      acc.add_decision(d, &world.index());
      const Demand demand = draw_demand(world, req, demand_seed(config.stream_seed, day, i));
      if (demand.wants_to_book && demand.listing) {
        ++acc.recall_den;
        if (contains(d.box, world.listings()[*demand.listing].location)) ++acc.recall_num;
      }
      if (auto booking = booking_from_demand(world, req, d.box, demand)) {
        ++acc.bookings;
        ++rec.bookings;
        if (tail.contains(req.location_id)) ++rec.tail_bookings;
        bookings.push_back(std::move(*booking));
      }
      searches.push_back({req, d.box});
      if (samples && i < config.samples_per_day) {
        samples->push_back({day, spec.name, req, d.box, d.uncertainty});
      }
    }
    rec.metrics = acc.finish();
    overall.merge(acc);
    result.total_bookings += rec.bookings;
    result.tail_bookings += rec.tail_bookings;

    data = training_window(world, config, searches, bookings, day);
    const bool ok = state.retrain(data, day, &error);
    result.days.push_back(rec);
    if (on_day) on_day(rec);
    log::info(spec.name + " day " + std::to_string(day) + " recall " +
              format_double(rec.metrics.booked_location_recall) + " examples " +
              std::to_string(data.size()));
    if (!ok) {
      result.aborted = true;
      result.abort_reason = "day " + std::to_string(day) + ": " + error;
      log::error(spec.name + " aborted: " + result.abort_reason);
      break;
    }
  }
  result.overall = overall.finish();
  return result;
}

ExperimentReport make_report(const World& world, const LoopConfig& config) {
  ExperimentReport r;
  r.world_seed = world.seed();
  r.stream_seed = config.stream_seed;
  r.train_seed = config.train_seed;
  nlohmann::json echo;
  echo["loop"] = config;
  echo["world"] = world.config();
  echo["world_seed"] = world.seed();
  r.config_echo = echo;
  return r;
}

}  // namespace

Metrics evaluate_offline(const Policy& policy, std::span<const LabeledSearch> heldout,
                         const GridIndex* index) {
  if (heldout.empty()) throw std::invalid_argument("empty held-out set");
  MetricsAccumulator acc;
  for (const auto& ex : heldout) {
    const Decision d = policy.decide(ex.request);
    acc.add_decision(d, index);
    ++acc.recall_den;
    if (contains(d.box, ex.booked)) ++acc.recall_num;
  }
  return acc.finish();
}

EventLog generate_event_log(const World& world, const Policy& policy, int first_day, int days,
                            std::uint64_t stream_seed) {
  if (days < 0) throw std::invalid_argument("negative day count");
  EventLog log;
  log.first_day = first_day;
  log.days = days;
  for (int day = first_day; day < first_day + days; ++day) {
    const auto reqs = sample_day_searches(world, day, stream_seed);
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      const Decision d = policy.decide(reqs[i]);
      log.searches.push_back({reqs[i], d.box});
      if (auto b = simulate_booking(world, reqs[i], d.box, demand_seed(stream_seed, day, i))) {
        log.bookings.push_back(std::move(*b));
      }
    }
  }
  return log;
}

void save_event_log(const EventLog& log, const std::filesystem::path& path) {
  std::vector<json> rows;
  rows.push_back({{"type", "header"}, {"first_day", log.first_day}, {"days", log.days}});
  for (const auto& s : log.searches) {
    rows.push_back({{"type", "search"}, {"request", s.request}, {"served", s.served}});
  }
  for (const auto& b : log.bookings) {
    json j = b;
    j["type"] = "booking";
    rows.push_back(std::move(j));
  }
  write_jsonl(path, rows);
}

EventLog load_event_log(const std::filesystem::path& path) {
  EventLog log;
  bool header = false;
  try {
    for (const auto& row : read_jsonl(path)) {
      const auto type = row.at("type").get<std::string>();
      if (type == "header") {
        log.first_day = row.at("first_day").get<int>();
        log.days = row.at("days").get<int>();
        header = true;
      } else if (type == "search") {
        log.searches.push_back(
            {row.at("request").get<SearchRequest>(), row.at("served").get<BoundingBox>()});
      } else if (type == "booking") {
        log.bookings.push_back(row.get<BookingEvent>());
      } else {
        throw DataError("unknown event type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!header) throw DataError(path.string() + ": missing event log header");
  return log;
}

DataSplit split_event_log(const EventLog& log, int heldout_days) {
  if (heldout_days < 0 || heldout_days > log.days) {
    throw std::invalid_argument("held-out days out of range");
  }
  const int split_day = log.first_day + log.days - heldout_days;
  DataSplit out;
  for (auto& ex : attribute(log.searches, log.bookings)) {
    (ex.request.search_day_index >= split_day ? out.heldout : out.train).push_back(ex);
  }
  return out;
}

std::vector<StatsBooking> stats_bookings(std::span<const LabeledSearch> examples) {
  std::vector<StatsBooking> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({ex.request.location_id, ex.booked, ex.request.center});
  }
  return out;
}

std::string_view to_string(ArmKind k) {
  switch (k) {
    case ArmKind::kHeuristic: return "heuristic";
    case ArmKind::kStats: return "stats";
    case ArmKind::kUcb: return "ucb";
    case ArmKind::kWorld: return "world";
    case ArmKind::kDegenerate: return "degenerate";
  }
  return "?";
}

ArmKind arm_kind_from_string(std::string_view s) {
  for (auto k : {ArmKind::kHeuristic, ArmKind::kStats, ArmKind::kUcb, ArmKind::kWorld,
                 ArmKind::kDegenerate}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown arm kind '" + std::string(s) + "'");
}

void ArmSpec::validate() const {
  if (name.empty()) throw ConfigError("arm name must not be empty");
  if (name.find(',') != std::string::npos) throw ConfigError("arm name must not contain ','");
  if (kind == ArmKind::kUcb) {
    if (!std::isfinite(lambda) || lambda < 0) throw ConfigError("lambda must be >= 0");
    if (n_samples < 2) throw ConfigError("n_samples must be >= 2");
  }
  if (kind == ArmKind::kStats) {
    if (!(containment > 0 && containment <= 1)) throw ConfigError("containment must be in (0, 1]");
    if (!(expansion > 0) || !std::isfinite(expansion)) throw ConfigError("expansion must be > 0");
  }
}

void to_json(nlohmann::json& j, const ArmSpec& a) {
  j = {{"name", a.name}, {"kind", std::string(to_string(a.kind))}};
  if (a.kind == ArmKind::kUcb) {
    j["lambda"] = a.lambda;
    j["n_samples"] = a.n_samples;
    j["dispersion"] = std::string(to_string(a.dispersion));
  }
  if (a.kind == ArmKind::kStats) {
    j["containment"] = a.containment;
    j["expansion"] = a.expansion;
  }
}

void from_json(const nlohmann::json& j, ArmSpec& a) {
  a.kind = arm_kind_from_string(j.at("kind").get<std::string>());
  a.name = j.value("name", std::string(to_string(a.kind)));
  a.lambda = j.value("lambda", a.lambda);
  a.n_samples = j.value("n_samples", a.n_samples);
  if (j.contains("dispersion")) {
    a.dispersion = dispersion_from_string(j.at("dispersion").get<std::string>());
  }
  a.containment = j.value("containment", a.containment);
  a.expansion = j.value("expansion", a.expansion);
}

void LoopConfig::validate() const {
  if (days < 0) throw ConfigError("days must be >= 0");
  if (warmup_days < 0) throw ConfigError("warmup_days must be >= 0");
  if (window_days < 1) throw ConfigError("window_days must be >= 1");
  train.validate();
}

void to_json(nlohmann::json& j, const LoopConfig& c) {
  j = {{"days", c.days},
       {"warmup_days", c.warmup_days},
       {"window_days", c.window_days},
       {"stream_seed", c.stream_seed},
       {"train_seed", c.train_seed},
       {"train", c.train},
       {"tail_max_prior_bookings", c.tail_max_prior_bookings},
       {"samples_per_day", c.samples_per_day}};
}

void from_json(const nlohmann::json& j, LoopConfig& c) {
  c.days = j.value("days", c.days);
  c.warmup_days = j.value("warmup_days", c.warmup_days);
  c.window_days = j.value("window_days", c.window_days);
  c.stream_seed = j.value("stream_seed", c.stream_seed);
  c.train_seed = j.value("train_seed", c.train_seed);
  if (j.contains("train")) j.at("train").get_to(c.train);
  c.tail_max_prior_bookings = j.value("tail_max_prior_bookings", c.tail_max_prior_bookings);
  c.samples_per_day = j.value("samples_per_day", c.samples_per_day);
}

const ArmResult* ExperimentReport::arm(const std::string& name) const {
  for (const auto& a : arms) {
    if (a.spec.name == name) return &a;
  }
  return nullptr;
}

ExperimentReport run_closed_loop(const World& world, const ArmSpec& arm, const LoopConfig& config,
                                 const DayCallback& on_day) {
  arm.validate();
  config.validate();
  auto report = make_report(world, config);
  const auto warmup = run_warmup(world, config);
  report.tail_destinations = warmup.tail;
  report.arms.push_back(
      run_arm(world, arm, config, warmup, &report.stream_hashes, &report.samples, on_day));
  report.config_echo["arms"] = nlohmann::json::array({arm});
  return report;
}

ExperimentReport compare_policies(const World& world, std::span<const ArmSpec> arms,
                                  const LoopConfig& config, const DayCallback& on_day) {
  if (arms.size() < 2) throw ConfigError("comparison needs at least two arms");
  std::set<std::string> names;
  for (const auto& a : arms) {
    a.validate();
    if (!names.insert(a.name).second) throw ConfigError("duplicate arm name '" + a.name + "'");
  }
  config.validate();
  auto report = make_report(world, config);
  const auto warmup = run_warmup(world, config);
  report.tail_destinations = warmup.tail;
  nlohmann::json echo = nlohmann::json::array();
  for (const auto& a : arms) {
    std::vector<std::uint64_t> hashes;
    report.arms.push_back(run_arm(world, a, config, warmup, &hashes, &report.samples, on_day));
    for (std::size_t d = 0; d < hashes.size(); ++d) {
      if (d >= report.stream_hashes.size()) {
        report.stream_hashes.push_back(hashes[d]);
      } else if (report.stream_hashes[d] != hashes[d]) {
        throw std::logic_error("search streams diverged between arms");
      }
    }
    echo.push_back(a);
  }
  report.config_echo["arms"] = echo;
  report.deltas = compute_deltas(report.arms);
  return report;
}

std::vector<MetricDelta> compute_deltas(std::span<const ArmResult> arms) {
  std::vector<MetricDelta> out;
  if (arms.empty()) return out;
  const Metrics& base = arms[0].overall;
  auto add = [&](const std::string& arm, const std::string& metric, double b, double v) {
    MetricDelta d{arm, metric, b, v, v - b, std::nullopt};
    if (b != 0.0) d.percent = 100.0 * (v - b) / std::abs(b);
    out.push_back(d);
  };
  for (std::size_t i = 1; i < arms.size(); ++i) {
    const auto& m = arms[i].overall;
    const auto& name = arms[i].spec.name;
    add(name, "recall", base.booked_location_recall, m.booked_location_recall);
    add(name, "size_km", base.mean_bounds_size_km, m.mean_bounds_size_km);
    add(name, "listings", base.mean_listings_retrieved, m.mean_listings_retrieved);
    add(name, "conversion", base.booking_conversion.value_or(0.0),
        m.booking_conversion.value_or(0.0));
    add(name, "bookings", static_cast<double>(arms[0].total_bookings),
        static_cast<double>(arms[i].total_bookings));
    add(name, "tail_bookings", static_cast<double>(arms[0].tail_bookings),
        static_cast<double>(arms[i].tail_bookings));
  }
  return out;
}

std::string metrics_csv(std::span<const DayRecord> rows) {
  std::string out(kMetricsCsvHeader);
  out += '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : rows) {
    out += std::to_string(r.day) + ',' + r.arm + ',' +
           format_double(r.metrics.booked_location_recall) + ',' +
           format_double(r.metrics.mean_bounds_size_km) + ',' +
           format_double(r.metrics.mean_listings_retrieved) + ',' +
           opt(r.metrics.booking_conversion) + ',' + opt(r.metrics.mean_sigma) + '\n';
  }
  return out;
}

std::vector<DayRecord> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != split_csv_line(std::string(kMetricsCsvHeader))) {
    throw DataError("metrics CSV: unexpected header");
  }
  std::vector<DayRecord> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 7) {
      throw DataError("metrics CSV line " + std::to_string(lineno) + ": expected 7 cells");
    }
    try {
      DayRecord r;
      r.day = static_cast<int>(parse_cell(cells[0]).value());
      r.arm = cells[1];
      r.metrics.booked_location_recall = parse_cell(cells[2]).value();
      r.metrics.mean_bounds_size_km = parse_cell(cells[3]).value();
      r.metrics.mean_listings_retrieved = parse_cell(cells[4]).value();
      r.metrics.booking_conversion = parse_cell(cells[5]);
      r.metrics.mean_sigma = parse_cell(cells[6]);
      rows.push_back(std::move(r));
    } catch (const std::bad_optional_access&) {
      throw DataError("metrics CSV line " + std::to_string(lineno) + ": missing value");
    }
  }
  return rows;
}

nlohmann::json metrics_json(const Metrics& m) {
  nlohmann::json j = {{"recall", m.booked_location_recall},
                      {"size_km", m.mean_bounds_size_km},
                      {"listings", m.mean_listings_retrieved},
                      {"n", m.n_observations}};
  j["conversion"] = m.booking_conversion ? nlohmann::json(*m.booking_conversion) : nlohmann::json();
  j["mean_sigma"] = m.mean_sigma ? nlohmann::json(*m.mean_sigma) : nlohmann::json();
  return j;
}

nlohmann::json report_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["config"] = report.config_echo;
  j["seeds"] = {{"world", report.world_seed},
                {"stream", report.stream_seed},
                {"train", report.train_seed}};
  j["stream_hashes"] = report.stream_hashes;
  j["tail_destinations"] = report.tail_destinations;
  auto& arms = j["arms"] = nlohmann::json::array();
  for (const auto& a : report.arms) {
    arms.push_back({{"arm", a.spec},
                    {"overall", metrics_json(a.overall)},
                    {"bookings", a.total_bookings},
                    {"tail_bookings", a.tail_bookings},
                    {"days", a.days.size()},
                    {"aborted", a.aborted},
                    {"abort_reason", a.abort_reason}});
  }
  auto& deltas = j["deltas"] = nlohmann::json::array();
  for (const auto& d : report.deltas) {
    deltas.push_back({{"arm", d.arm},
                      {"metric", d.metric},
                      {"baseline", d.baseline},
                      {"value", d.value},
                      {"absolute", d.absolute},
                      {"percent", d.percent ? nlohmann::json(*d.percent) : nlohmann::json()}});
  }
  return j;
}

void emit_plot_data(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::vector<DayRecord> rows;
  for (const auto& a : report.arms) rows.insert(rows.end(), a.days.begin(), a.days.end());
  write_text_file(dir / "metrics.csv", metrics_csv(rows));
  std::vector<json> samples;
  samples.reserve(report.samples.size());
  for (const auto& s : report.samples) {
    json j = {{"day", s.day}, {"arm", s.arm}, {"request", s.request}, {"bounds", s.bounds}};
    if (s.uncertainty) {
      j["mu"] = s.uncertainty->mu;
      j["sigma"] = s.uncertainty->sigma;
    }
    samples.push_back(std::move(j));
  }
  write_jsonl(dir / "bounds_samples.jsonl", samples);
  write_text_file(dir / "report.json", report_json(report).dump(2) + "\n");
}

}  // namespace locret

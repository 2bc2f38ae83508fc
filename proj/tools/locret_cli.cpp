// locret: command-line driver for worlds, training, evaluation and closed-loop runs.
// Logs and the effective config go to stderr; data goes to stdout.
// Exit codes: 0 success, 1 usage/config, 2 data, 3 numerical failure.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "locret/config.hpp"
#include "locret/errors.hpp"
#include "locret/estimator.hpp"
#include "locret/harness.hpp"
#include "locret/json_io.hpp"
#include "locret/logging.hpp"
#include "locret/policy.hpp"
#include "locret/simworld.hpp"

namespace {

using namespace locret;
using nlohmann::json;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

void print_effective(const std::string& command, const json& effective) {
  json j{{"command", command}, {"effective", effective}};
  std::cerr << "effective config: " << j.dump() << "\n";
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string world_path;
  std::optional<int> days;
};

ExperimentConfig load_config(const Common& c) {
  auto cfg = load_experiment_config(c.config_path);
  if (c.seed) cfg.world_seed = *c.seed;
  if (c.days) cfg.loop.days = *c.days;
  cfg.validate();
  return cfg;
}

World load_world(const Common& c, const ExperimentConfig& cfg) {
  if (!c.world_path.empty()) return World::load(c.world_path);
  return World::generate(cfg.world, cfg.world_seed);
}

// The offline log is served by the world box, so every feasible booking is observed.
EventLog offline_log(const World& world, const ExperimentConfig& cfg) {
  const FixedBoxPolicy logging(FixedBoxPolicy::Kind::kWorld);
  return generate_event_log(world, logging, 1, cfg.offline_days, cfg.loop.stream_seed);
}

json inputs_json(const Common& c, const World* world) {
  json j{{"config", c.config_path}};
  if (!c.world_path.empty()) j["world_file"] = c.world_path;
  if (world) j["world_seed"] = world->seed();
  return j;
}

// ---------------------------------------------------------------------------

struct GenWorldArgs {
  Common common;
  std::string out;
  std::string log_out;
};

int gen_world(const GenWorldArgs& a) {
  const auto cfg = load_config(a.common);
  auto eff = to_json(cfg);
  eff["out"] = a.out;
  if (!a.log_out.empty()) eff["log_out"] = a.log_out;
  print_effective("gen-world", eff);
  const auto world = World::generate(cfg.world, cfg.world_seed);
  world.save(a.out);
  std::cout << "world," << a.out << "," << world.destinations().size() << ","
            << world.listings().size() << "\n";
  if (!a.log_out.empty()) {
    const auto log = offline_log(world, cfg);
    save_event_log(log, a.log_out);
    std::cout << "log," << a.log_out << "," << log.searches.size() << "," << log.bookings.size()
              << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string dataset;
  std::string out_checkpoint;
  std::string resume;
  std::optional<std::size_t> epochs;
};

EventLog log_for(const Common& c, const std::string& dataset, const ExperimentConfig& cfg) {
  if (!dataset.empty()) return load_event_log(dataset);
  const auto world = load_world(c, cfg);
  return offline_log(world, cfg);
}

int train_cmd(const TrainArgs& a) {
  auto cfg = load_config(a.common);
  if (a.epochs) cfg.offline_train.epochs = *a.epochs;
  cfg.offline_train.validate();
  json eff{{"offline", to_json(cfg)["offline"]},
           {"inputs", inputs_json(a.common, nullptr)},
           {"out_checkpoint", a.out_checkpoint}};
  if (!a.dataset.empty()) eff["inputs"]["dataset"] = a.dataset;
  if (!a.resume.empty()) eff["inputs"]["resume"] = a.resume;
  print_effective("train", eff);

  const auto log = log_for(a.common, a.dataset, cfg);
  const auto split = split_event_log(log, cfg.offline_heldout_days);
  log::info("training on " + std::to_string(split.train.size()) + " examples");
  std::cout << "epoch,loss\n";
  const auto on_epoch = [](std::size_t epoch, double loss) {
    std::cout << epoch << "," << num(loss) << "\n" << std::flush;
  };
  Estimator est;
  if (a.resume.empty()) {
    est = fit_estimator(cfg.offline_train, split.train, on_epoch).estimator;
  } else {
    // Continue from a checkpoint with its vocabulary and feature stats.
    const auto start = load_checkpoint(a.resume);
    const auto examples = encode_examples(split.train, start.vocab, start.stats);
    auto result = train_from(cfg.offline_train, start.params, examples, on_epoch);
    est = Estimator::assemble(std::move(result.params), start.vocab, start.stats, cfg.offline_train);
  }
  save_checkpoint(est, a.out_checkpoint);
  std::cerr << "wrote " << a.out_checkpoint << " (version " << est.version << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string heldout;
  std::string checkpoint;
  std::string policy;
  double lambda = 0.0;
  std::size_t samples = 32;
  std::string out_report;
};

int eval_cmd(const EvalArgs& a) {
  const auto cfg = load_config(a.common);
  json eff{{"offline", {{"days", cfg.offline_days}, {"heldout_days", cfg.offline_heldout_days}}},
           {"inputs", inputs_json(a.common, nullptr)},
           {"lambda", a.lambda},
           {"samples", a.samples}};
  if (!a.heldout.empty()) eff["inputs"]["heldout"] = a.heldout;
  if (!a.checkpoint.empty()) eff["checkpoint"] = a.checkpoint;
  if (!a.policy.empty()) eff["policy"] = a.policy;
  print_effective("eval", eff);

  const auto world = load_world(a.common, cfg);
  const auto log = a.heldout.empty() ? offline_log(world, cfg) : load_event_log(a.heldout);
  const auto split = split_event_log(log, cfg.offline_heldout_days);

  std::unique_ptr<Policy> policy;
  if (!a.checkpoint.empty()) {
    auto model = std::make_shared<const Estimator>(load_checkpoint(a.checkpoint));
    policy = std::make_unique<McDropoutUcbPolicy>(model, a.lambda, a.samples);
  } else if (a.policy == "heuristic") {
    policy = std::make_unique<HeuristicPolicy>();
  } else if (a.policy == "stats") {
    policy = std::make_unique<StatsPolicy>(
        std::make_shared<const StatsTable>(StatsTable::build(stats_bookings(split.train))));
  } else if (a.policy == "world") {
    policy = std::make_unique<FixedBoxPolicy>(FixedBoxPolicy::Kind::kWorld);
  } else if (a.policy == "degenerate") {
    policy = std::make_unique<FixedBoxPolicy>(FixedBoxPolicy::Kind::kDegenerate);
  } else {
    throw ConfigError("eval: need --checkpoint or --policy heuristic|stats|world|degenerate");
  }

  const auto m = evaluate_offline(*policy, split.heldout, &world.index());
  std::ostringstream csv;
  csv << "policy,recall,size_km,listings,mean_sigma,n\n"
      << policy->name() << "," << num(m.booked_location_recall) << ","
      << num(m.mean_bounds_size_km) << "," << num(m.mean_listings_retrieved) << ","
      << opt_num(m.mean_sigma) << "," << m.n_observations << "\n";
  std::cout << csv.str();
  if (!a.out_report.empty()) write_text_file(a.out_report, csv.str());
  return kOk;
}

// ---------------------------------------------------------------------------

struct LoopArgs {
  Common common;
  std::string arm;
  std::string out;
};

void print_day(const DayRecord& d) {
  std::cout << d.day << "," << d.arm << "," << num(d.metrics.booked_location_recall) << ","
            << num(d.metrics.mean_bounds_size_km) << "," << num(d.metrics.mean_listings_retrieved)
            << "," << opt_num(d.metrics.booking_conversion) << ","
            << opt_num(d.metrics.mean_sigma) << "\n"
            << std::flush;
}

void print_hashes(const ExperimentReport& r) {
  std::uint64_t combined = 0;
  for (auto h : r.stream_hashes) combined = combined * 1099511628211ULL ^ h;
  std::cerr << "paired stream hash: " << std::hex << combined << std::dec << " over "
            << r.stream_hashes.size() << " days\n";
}

int simulate_cmd(const LoopArgs& a) {
  const auto cfg = load_config(a.common);
  const ArmSpec* arm = nullptr;
  for (const auto& s : cfg.arms) {
    if (a.arm.empty() || s.name == a.arm) {
      arm = &s;
      break;
    }
  }
  if (arm == nullptr) throw ConfigError("simulate: no arm named '" + a.arm + "'");
  const auto world = load_world(a.common, cfg);
  json eff{{"loop", cfg.loop}, {"arm", *arm}, {"inputs", inputs_json(a.common, &world)}};
  if (!a.out.empty()) eff["out"] = a.out;
  print_effective("simulate", eff);

  std::cout << kMetricsCsvHeader << "\n";
  const auto report = run_closed_loop(world, *arm, cfg.loop, print_day);
  print_hashes(report);
  for (const auto& r : report.arms) {
    if (r.aborted) std::cerr << "arm " << r.spec.name << " aborted: " << r.abort_reason << "\n";
  }
  if (!a.out.empty()) emit_plot_data(report, a.out);
  return report.arms.front().aborted ? kNumerical : kOk;
}

int compare_cmd(const LoopArgs& a) {
  const auto cfg = load_config(a.common);
  const auto world = load_world(a.common, cfg);
  json eff{{"loop", cfg.loop}, {"arms", cfg.arms}, {"inputs", inputs_json(a.common, &world)}};
  if (!a.out.empty()) eff["out"] = a.out;
  print_effective("compare", eff);

  std::cout << kMetricsCsvHeader << "\n";
  const auto report = compare_policies(world, cfg.arms, cfg.loop, print_day);
  print_hashes(report);
  std::cerr << "tail destinations: " << report.tail_destinations.size() << "\n";
  for (const auto& r : report.arms) {
    std::cerr << "arm " << r.spec.name << ": bookings " << r.total_bookings << ", tail bookings "
              << r.tail_bookings << ", overall " << metrics_json(r.overall).dump()
              << (r.aborted ? " (aborted: " + r.abort_reason + ")" : "") << "\n";
  }
  for (const auto& d : report.deltas) {
    std::cerr << "delta " << d.arm << " " << d.metric << ": " << num(d.absolute)
              << (d.percent ? " (" + num(*d.percent) + "%)" : "") << "\n";
  }
  if (!a.out.empty()) emit_plot_data(report, a.out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string checkpoint;
  std::string request;
  double lambda = 2.0;
  std::size_t samples = 32;
  std::string dispersion = "mad";
};

int inspect_cmd(const InspectArgs& a) {
  print_effective("inspect", {{"checkpoint", a.checkpoint},
                              {"request_json", a.request},
                              {"lambda", a.lambda},
                              {"samples", a.samples},
                              {"dispersion", a.dispersion}});
  const auto model = load_checkpoint(a.checkpoint);
  json raw;
  try {
    if (a.request == "-") {
      raw = json::parse(std::cin);
    } else {
      raw = read_json_file(a.request);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed request: ") + e.what());
  }
  SearchRequest req;
  try {
    req = raw.get<SearchRequest>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed request: ") + e.what());
  }
  if (!req.valid()) throw DataError("malformed request: invariants violated");

  const auto dispersion = dispersion_from_string(a.dispersion);
  const auto u = mc_dropout_score(model, model.encode(req), a.samples, dispersion);
  const auto mean_box = to_box(req.center, u.mu);
  const auto ucb_box = to_box(req.center, ucb_offsets(u, a.lambda));
  const json out{{"location_id", req.location_id},
                 {"mu", u.mu},
                 {"sigma", u.sigma},
                 {"mean_sigma", u.mean_sigma()},
                 {"mean_box", mean_box},
                 {"ucb_box", ucb_box},
                 {"mean_box_km", box_size_km(mean_box).wh_sum_km},
                 {"ucb_box_km", box_size_km(ucb_box).wh_sum_km},
                 {"lambda", a.lambda},
                 {"n_samples", u.n_samples}};
  std::cout << out.dump(2) << "\n";
  return kOk;
}

void add_common(CLI::App* cmd, Common& c, bool with_world, bool with_days) {
  cmd->add_option("--config", c.config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override seeds.world");
  if (with_world) cmd->add_option("--world", c.world_path, "world file from gen-world")->check(CLI::ExistingFile);
  if (with_days) cmd->add_option("--days", c.days, "override loop.days")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locret: learned retrieval bounds with MC-dropout exploration"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "info-level logs on stderr");

  GenWorldArgs gw;
  auto* gen = app.add_subcommand("gen-world", "generate a seeded world (and optionally an event log)");
  add_common(gen, gw.common, false, false);
  gen->add_option("--out", gw.out, "world file")->required();
  gen->add_option("--log", gw.log_out, "also write the offline event log");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train the bounds model and write a checkpoint");
  add_common(train, ta.common, true, false);
  train->add_option("--dataset", ta.dataset, "event log from gen-world --log")->check(CLI::ExistingFile);
  train->add_option("--out-checkpoint", ta.out_checkpoint, "checkpoint path")->required();
  train->add_option("--resume", ta.resume, "continue from this checkpoint")->check(CLI::ExistingFile);
  train->add_option("--epochs", ta.epochs, "override offline.train.epochs");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "offline metrics on the held-out days");
  add_common(eval, ea.common, true, false);
  eval->add_option("--heldout", ea.heldout, "event log from gen-world --log")->check(CLI::ExistingFile);
  auto* ck = eval->add_option("--checkpoint", ea.checkpoint, "model checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--policy", ea.policy, "heuristic|stats|world|degenerate")->excludes(ck);
  eval->add_option("--lambda", ea.lambda, "UCB lambda for --checkpoint (0 = mean)");
  eval->add_option("--samples", ea.samples, "MC dropout samples")->check(CLI::Range(2, 100000));
  eval->add_option("--out-report", ea.out_report, "also write the CSV here");

  LoopArgs sa;
  auto* simulate = app.add_subcommand("simulate", "closed loop for one arm");
  add_common(simulate, sa.common, true, true);
  simulate->add_option("--arm", sa.arm, "arm name from the config (default: first)");
  simulate->add_option("--out", sa.out, "report directory");

  LoopArgs ca;
  auto* compare = app.add_subcommand("compare", "paired closed loop over all configured arms");
  add_common(compare, ca.common, true, true);
  compare->add_option("--out", ca.out, "report directory");

  InspectArgs ia;
  auto* inspect = app.add_subcommand("inspect", "mu, sigma, mean box and UCB box for one request");
  inspect->add_option("--checkpoint", ia.checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  inspect->add_option("--request-json", ia.request, "request JSON file, or - for stdin")->required();
  inspect->add_option("--lambda", ia.lambda, "UCB lambda");
  inspect->add_option("--samples", ia.samples, "MC dropout samples")->check(CLI::Range(2, 100000));
  inspect->add_option("--dispersion", ia.dispersion, "mad|std");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  log::set_level(verbose ? log::Level::kInfo : log::Level::kWarn);

  try {
    if (*gen) return gen_world(gw);
    if (*train) return train_cmd(ta);
    if (*eval) return eval_cmd(ea);
    if (*simulate) return simulate_cmd(sa);
    if (*compare) return compare_cmd(ca);
    if (*inspect) return inspect_cmd(ia);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

#include "healrt/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <charconv>
#include <cctype>
#include <mutex>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "healrt/grid.hpp"
#include "healrt/monitoring.hpp"
#include "healrt/network.hpp"
#include "healrt/qlearn.hpp"
#include "healrt/recovery.hpp"

namespace healrt::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("bad seed '" + std::string(s) + "'");
  }
  return v;
}

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

/// Runs `job(i)` for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& job) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Output directory: --out, else HEAL_RT_OUT, else the config/default value.
fs::path output_dir(const CLI::Option* out_opt, const std::string& out_value, bool out_from_config) {
  if (out_opt->count() && !out_from_config) return out_value;
  if (const char* env = std::getenv("HEAL_RT_OUT"); env && *env) return env;
  return out_value;
}

/// Expands `--config FILE` into `--key=value` arguments placed before the
/// user's own flags, so that explicit flags win under the take-last policy.
std::vector<std::string> expand_config(const std::vector<std::string>& args, bool& out_in_config,
                                       bool& out_on_cli) {
  out_in_config = false;
  out_on_cli = false;
  std::vector<std::string> rest;
  std::vector<std::string> injected;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string file;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      if (args[i] == "--out" || args[i].rfind("--out=", 0) == 0) out_on_cli = true;
      rest.push_back(args[i]);
      continue;
    }
    std::map<std::string, std::string> entries;
    try {
      entries = read_config_file(file);
    } catch (const std::runtime_error& e) {
      throw UsageError(e.what());
    }
    for (const auto& [key, v] : entries) {
      std::string k = key;
      std::replace(k.begin(), k.end(), '_', '-');
      if (k == "out") out_in_config = true;
      injected.push_back("--" + k + "=" + v);
    }
  }
  if (injected.empty() || rest.empty()) return rest;
  std::vector<std::string> merged{rest.front()};
  merged.insert(merged.end(), injected.begin(), injected.end());
  merged.insert(merged.end(), rest.begin() + 1, rest.end());
  return merged;
}

// ---------------------------------------------------------------------------
// grid

struct GridOptions {
  std::string predicate = "prime";
  std::uint64_t steps = 100000;
  std::string seeds = "1..5";
  double alpha = 0.5;
  double gamma = 0.9;
  double epsilon = 0.2;
  int sum_offset = 0;
  std::string behavior = "uniform";
  bool count_only = false;
  std::size_t max_len = 0;
  bool fallback = false;
  unsigned jobs = 1;
  std::string out = "results";
};

int cmd_grid(const GridOptions& o, const fs::path& out_dir, std::ostream& out) {
  const auto kind = grid::parse_predicate(o.predicate);
  if (!kind) throw UsageError("unknown predicate '" + o.predicate + "' (expected or, or_text, prime)");
  grid::Behavior behavior;
  if (o.behavior == "uniform") behavior = grid::Behavior::Uniform;
  else if (o.behavior == "epsilon-greedy") behavior = grid::Behavior::EpsilonGreedy;
  else throw UsageError("unknown behavior '" + o.behavior + "' (expected uniform, epsilon-greedy)");
  const auto seeds = parse_seeds(o.seeds);

  grid::GridExperimentConfig base;
  base.predicate = *kind;
  base.steps = o.steps;
  base.agent.alpha = o.alpha;
  base.agent.gamma = o.gamma;
  base.agent.epsilon = o.epsilon;
  base.sum_offset = o.sum_offset;
  base.behavior = behavior;
  base.count_only = o.count_only;
  base.max_strategy_len = o.max_len;
  base.fallback_second_best = o.fallback;
  try {
    base.agent.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::vector<grid::ExperimentReport> reports(seeds.size());
  std::vector<grid::GridArtifacts> artifacts(seeds.size());
  parallel_for(seeds.size(), o.jobs, [&](std::size_t i) {
    auto cfg = base;
    cfg.seed = seeds[i];
    reports[i] = grid::run_grid_experiment(cfg, &artifacts[i]);
  });

  const std::string pred = std::string(grid::predicate_name(*kind));
  const fs::path dir = out_dir / "grid";
  {
    auto csv = open_out(dir / (pred + "_runs.csv"));
    csv << grid::report_csv_header() << '\n';
    out << grid::report_csv_header() << '\n';
    for (const auto& r : reports) {
      csv << grid::report_csv_row(r) << '\n';
      out << grid::report_csv_row(r) << '\n';
    }
  }

  std::ostringstream summary;
  summary << "predicate " << pred << ", " << o.steps << " steps, fault states " << reports.front().fault_states
          << ", alpha " << o.alpha << " gamma " << o.gamma << " epsilon " << o.epsilon << '\n';
  char line[200];
  std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %14s\n", "seed", "faults", "proportion", "correct",
                "effectiveness");
  summary << line;
  std::vector<double> faults, prop, correct, eff;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-8llu %10llu %9.2f%% %10llu %13.2f%%\n", static_cast<unsigned long long>(r.seed),
                  static_cast<unsigned long long>(r.faults_detected), 100 * r.fault_proportion,
                  static_cast<unsigned long long>(r.correct_strategies), 100 * r.healing_effectiveness);
    summary << line;
    faults.push_back(static_cast<double>(r.faults_detected));
    prop.push_back(r.fault_proportion);
    correct.push_back(static_cast<double>(r.correct_strategies));
    eff.push_back(r.healing_effectiveness);
  }
  const MeanSd f = mean_sd(faults), p = mean_sd(prop), c = mean_sd(correct), e = mean_sd(eff);
  std::snprintf(line, sizeof line, "%-8s %10.1f %9.2f%% %10.1f %13.2f%%\n", "mean", f.mean, 100 * p.mean, c.mean,
                100 * e.mean);
  summary << line;
  std::snprintf(line, sizeof line, "%-8s %10.1f %9.2f%% %10.1f %13.2f%%\n", "stddev", f.sd, 100 * p.sd, c.sd,
                100 * e.sd);
  summary << line;
  out << '\n' << summary.str();
  open_out(dir / (pred + "_summary.txt")) << summary.str();

  std::vector<monitoring::MonitorStats> monitors;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto m = artifacts[i].monitor;
    m.label = pred + "@seed" + std::to_string(seeds[i]);
    monitors.push_back(m);
    if (!artifacts[i].table) continue;
    const std::string stem = pred + "_seed" + std::to_string(seeds[i]);
    auto agent_cfg = reports[i].agent;
    auto q = open_out(dir / (stem + "_qtable.tsv"));
    qlearn::write_qtable(q, *artifacts[i].table, agent_cfg);
    auto s = open_out(dir / (stem + "_strategies.tsv"));
    recovery::write_strategy_map(s, artifacts[i].build.map, grid::move_names());
    auto fl = open_out(dir / (stem + "_failures.tsv"));
    recovery::write_failures(fl, artifacts[i].build.failures);
  }
  auto mon = open_out(dir / (pred + "_monitors.csv"));
  monitoring::write_stats_csv(mon, monitors);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// network

struct NetworkOptions {
  std::uint64_t train = 96;
  std::uint64_t eval = 54;
  std::uint64_t long_run = 0;
  std::string teacher = "scripted";
  std::string controller = "both";
  std::string seeds = "1";
  std::string topology;
  std::string params;
  double alpha = 0.5;
  double gamma = 0.9;
  std::size_t max_len = 10;
  bool fallback = false;
  std::string out = "results";
};

int cmd_network(const NetworkOptions& o, const fs::path& out_dir, std::istream& in, std::ostream& out,
                std::ostream& err) {
  if (o.teacher != "scripted" && o.teacher != "interactive") {
    throw UsageError("unknown teacher '" + o.teacher + "' (expected scripted, interactive)");
  }
  const bool run_learned = o.controller == "learned" || o.controller == "both";
  const bool run_baseline = o.controller == "baseline" || o.controller == "both";
  if (!run_learned && !run_baseline) {
    throw UsageError("unknown controller '" + o.controller + "' (expected learned, baseline, both)");
  }
  const auto seeds = parse_seeds(o.seeds);

  network::NetworkConfig base;
  base.train_steps = o.train;
  base.eval_steps = o.long_run ? o.long_run : o.eval;
  base.agent.alpha = o.alpha;
  base.agent.gamma = o.gamma;
  base.max_strategy_len = o.max_len;
  base.fallback_second_best = o.fallback;
  try {
    base.agent.validate();
    if (!o.topology.empty()) {
      std::ifstream f(o.topology);
      if (!f) throw UsageError("cannot read topology " + o.topology);
      base.topology = network::parse_topology(f);
    }
    if (!o.params.empty()) {
      std::ifstream f(o.params);
      if (!f) throw UsageError("cannot read model parameters " + o.params);
      base.params = network::parse_model_params(f);
    }
  } catch (const network::TopologyError& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const fs::path dir = out_dir / "network";
  std::ostringstream totals;
  for (std::uint64_t seed : seeds) {
    auto cfg = base;
    cfg.seed = seed;
    std::optional<network::NetworkReport> learned, baseline;
    if (run_learned) {
      network::ScriptedTeacher scripted(network::Thresholds{cfg.params.loss_threshold});
      network::InteractiveTeacher interactive(in, err);
      network::Teacher* teacher = o.teacher == "interactive" ? static_cast<network::Teacher*>(&interactive) : &scripted;
      network::NetworkArtifacts art;
      cfg.controller = network::Controller::Learned;
      learned = network::run_network_experiment(cfg, teacher, &art);
      const std::string stem = "seed" + std::to_string(seed);
      auto m = open_out(dir / (stem + "_learned_metrics.csv"));
      network::write_metrics_csv(m, *learned);
      if (art.table) {
        auto q = open_out(dir / (stem + "_qtable.tsv"));
        qlearn::write_qtable(q, *art.table, cfg.agent);
      }
      auto s = open_out(dir / (stem + "_strategies.tsv"));
      recovery::write_strategy_map(s, art.build.map, network::action_names());
      auto fl = open_out(dir / (stem + "_failures.tsv"));
      recovery::write_failures(fl, art.build.failures);
    }
    if (run_baseline) {
      cfg.controller = network::Controller::Baseline;
      baseline = network::run_network_experiment(cfg, nullptr);
      auto m = open_out(dir / ("seed" + std::to_string(seed) + "_baseline_metrics.csv"));
      network::write_metrics_csv(m, *baseline);
    }

    char line[200];
    totals << "seed " << seed << " (train " << cfg.train_steps << ", eval " << cfg.eval_steps << ")\n";
    std::snprintf(line, sizeof line, "%-22s %12s %12s\n", "", "learned", "baseline");
    totals << line;
    auto row = [&](const char* name, auto get, const char* f) {
      auto cell = [&](const std::optional<network::NetworkReport>& r) {
        return r ? fmt(f, static_cast<double>(get(*r))) : std::string("-");
      };
      std::snprintf(line, sizeof line, "%-22s %12s %12s\n", name, cell(learned).c_str(), cell(baseline).c_str());
      totals << line;
    };
    using R = network::NetworkReport;
    row("total events", [](const R& r) { return r.total_events; }, "%.0f");
    row("correct strategies", [](const R& r) { return r.correct_strategies; }, "%.0f");
    row("correct ratio", [](const R& r) { return r.correct_ratio(); }, "%.3f");
    row("adaptations", [](const R& r) { return r.adaptations; }, "%.0f");
    row("train mean loss", [](const R& r) { return r.train_mean_loss; }, "%.4f");
    row("eval mean loss", [](const R& r) { return r.eval_mean_loss; }, "%.4f");
    row("train mean energy", [](const R& r) { return r.train_mean_energy; }, "%.1f");
    row("eval mean energy", [](const R& r) { return r.eval_mean_energy; }, "%.1f");
    if (learned) {
      std::snprintf(line, sizeof line, "%-22s %12llu %12s\n", "strategies built",
                    static_cast<unsigned long long>(learned->strategies_built), "-");
      totals << line;
      std::snprintf(line, sizeof line, "%-22s %12llu %12s\n", "extraction failures",
                    static_cast<unsigned long long>(learned->extraction_failures), "-");
      totals << line;
    }
    totals << '\n';
  }
  out << totals.str();
  open_out(dir / "totals.txt") << totals.str();
  return kExitOk;
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string item = trim(std::string(rest.substr(0, comma)));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (const auto dots = item.find(".."); dots != std::string::npos) {
      const auto lo = parse_u64(item.substr(0, dots));
      const auto hi = parse_u64(item.substr(dots + 2));
      if (hi < lo) throw std::invalid_argument("empty seed range '" + item + "'");
      if (hi - lo > 1000000) throw std::invalid_argument("seed range too large '" + item + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_u64(item));
    }
  }
  if (seeds.empty()) throw std::invalid_argument("no seeds given");
  return seeds;
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

int run(const std::vector<std::string>& raw_args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-healing runtime experiments"};
  app.name("healrt");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  GridOptions g;
  auto* grid_cmd = app.add_subcommand("grid", "Mouse-tessellation grid experiment");
  grid_cmd->add_option("--predicate", g.predicate, "or | or_text | prime")->capture_default_str();
  grid_cmd->add_option("--steps", g.steps, "Random-walk steps per seed")->capture_default_str();
  grid_cmd->add_option("--seeds", g.seeds, "Seed list, e.g. 1..5 or 1,4,9")->capture_default_str();
  grid_cmd->add_option("--alpha", g.alpha)->capture_default_str();
  grid_cmd->add_option("--gamma", g.gamma)->capture_default_str();
  grid_cmd->add_option("--epsilon", g.epsilon)->capture_default_str();
  grid_cmd->add_option("--sum-offset", g.sum_offset, "Added to x + y before the predicate")->capture_default_str();
  grid_cmd->add_option("--behavior", g.behavior, "uniform | epsilon-greedy")->capture_default_str();
  grid_cmd->add_flag("--count-only", g.count_only, "Walk and count faults without learning");
  grid_cmd->add_option("--max-len", g.max_len, "Strategy length limit, 0 = 4 x diameter")->capture_default_str();
  grid_cmd->add_flag("--fallback", g.fallback, "Retry extraction with the second-best action");
  grid_cmd->add_option("--jobs", g.jobs, "Seeds run in parallel")->capture_default_str();
  auto* grid_out = grid_cmd->add_option("--out", g.out, "Output directory")->capture_default_str();
  grid_cmd->add_option("--config", "key=value config file; flags take precedence");

  NetworkOptions n;
  auto* net_cmd = app.add_subcommand("network", "Multi-hop IoT network experiment");
  net_cmd->add_option("--train", n.train, "Training steps")->capture_default_str();
  net_cmd->add_option("--eval", n.eval, "Evaluation steps")->capture_default_str();
  net_cmd->add_option("--long-run", n.long_run, "Evaluation steps for a long run (overrides --eval)");
  net_cmd->add_option("--teacher", n.teacher, "scripted | interactive")->capture_default_str();
  net_cmd->add_option("--controller", n.controller, "learned | baseline | both")->capture_default_str();
  net_cmd->add_option("--seeds", n.seeds)->capture_default_str();
  net_cmd->add_option("--topology", n.topology, "Topology file");
  net_cmd->add_option("--params", n.params, "Model parameter file");
  net_cmd->add_option("--alpha", n.alpha)->capture_default_str();
  net_cmd->add_option("--gamma", n.gamma)->capture_default_str();
  net_cmd->add_option("--max-len", n.max_len)->capture_default_str();
  net_cmd->add_flag("--fallback", n.fallback);
  auto* net_out = net_cmd->add_option("--out", n.out, "Output directory")->capture_default_str();
  net_cmd->add_option("--config", "key=value config file; flags take precedence");

  std::string report_dir;
  bool report_svg = false;
  auto* report_cmd = app.add_subcommand("report", "Summarize result CSVs");
  report_cmd->add_option("dir", report_dir, "Directory with result CSVs")->required();
  report_cmd->add_flag("--svg", report_svg, "Write one SVG chart per metric");

  try {
    bool out_in_config = false, out_on_cli = false;
    std::vector<std::string> args = expand_config(raw_args, out_in_config, out_on_cli);
    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitUsage;
    }
    const bool out_from_config = out_in_config && !out_on_cli;
    if (grid_cmd->parsed()) return cmd_grid(g, output_dir(grid_out, g.out, out_from_config), out);
    if (net_cmd->parsed()) return cmd_network(n, output_dir(net_out, n.out, out_from_config), in, out, err);
    if (report_cmd->parsed()) return cmd_report(report_dir, report_svg, out, err);
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace healrt::cli

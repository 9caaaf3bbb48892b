#include "healrt/grid.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "healrt/monitoring.hpp"
#include "healrt/reactive.hpp"

namespace healrt::grid {

const std::vector<std::string>& move_names() {
  static const std::vector<std::string> names{"Up", "Down", "Left", "Right"};
  return names;
}

int sum_of(GridState s) noexcept { return s.x + s.y; }

bool or_faults(int s) noexcept { return (40 < s && s < 50) || 200 < s; }

bool or_faults_text(int s) noexcept { return (10 < s && s < 50) || 200 < s; }

bool prime_faults(int s) noexcept {
  if (s < 2) return false;
  for (int d = 2; d * d <= s; ++d) {
    if (s % d == 0) return false;
  }
  return true;
}

std::optional<PredicateKind> parse_predicate(std::string_view name) {
  if (name == "or" || name == "or_listing" || name == "or_faults_listing") return PredicateKind::OrListing;
  if (name == "or_text" || name == "or_faults_text") return PredicateKind::OrText;
  if (name == "prime" || name == "prime_faults") return PredicateKind::Prime;
  return std::nullopt;
}

std::string_view predicate_name(PredicateKind k) {
  switch (k) {
    case PredicateKind::OrListing: return "or_faults_listing";
    case PredicateKind::OrText: return "or_faults_text";
    case PredicateKind::Prime: return "prime_faults";
  }
  return "?";
}

std::function<bool(int)> predicate_fn(PredicateKind k) {
  switch (k) {
    case PredicateKind::OrListing: return or_faults;
    case PredicateKind::OrText: return or_faults_text;
    case PredicateKind::Prime: return prime_faults;
  }
  throw std::invalid_argument("unknown predicate kind");
}

GridState apply_action(GridState s, Move a, GridSize size) {
  switch (a) {
    case Move::Up: s.y = std::max(0, s.y - 1); break;
    case Move::Down: s.y = std::min(size.height - 1, s.y + 1); break;
    case Move::Left: s.x = std::max(0, s.x - 1); break;
    case Move::Right: s.x = std::min(size.width - 1, s.x + 1); break;
  }
  return s;
}

StateKey to_key(GridState s) { return StateKey{s.x, s.y}; }

GridState from_key(const StateKey& k) {
  if (k.size() != 2) throw std::invalid_argument("grid key must have two components: " + k.to_string());
  return GridState{k[0], k[1]};
}

std::vector<GridState> enumerate_fault_states(const std::function<bool(int)>& predicate, GridSize size,
                                              int sum_offset) {
  std::vector<GridState> out;
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      if (predicate(x + y + sum_offset)) out.push_back(GridState{x, y});
    }
  }
  return out;
}

recovery::TransitionModel transition_model(GridSize size) {
  return [size](const StateKey& k, ActionId a) {
    return to_key(apply_action(from_key(k), static_cast<Move>(a), size));
  };
}

recovery::FaultTest fault_test(PredicateKind k, int sum_offset) {
  return [pred = predicate_fn(k), sum_offset](const StateKey& key) { return pred(sum_of(from_key(key)) + sum_offset); };
}

ExperimentReport run_grid_experiment(const GridExperimentConfig& cfg, GridArtifacts* artifacts) {
  if (cfg.size.width <= 0 || cfg.size.height <= 0) throw std::invalid_argument("grid size must be positive");
  cfg.agent.validate();

  const auto pred = predicate_fn(cfg.predicate);
  const int offset = cfg.sum_offset;
  const std::size_t max_len = cfg.max_strategy_len ? cfg.max_strategy_len : 4 * static_cast<std::size_t>(cfg.size.diameter());

  ExperimentReport report;
  report.predicate = std::string(predicate_name(cfg.predicate));
  report.seed = cfg.seed;
  report.steps = cfg.steps;
  report.agent = cfg.agent;
  report.agent.seed = cfg.seed;
  report.agent.learning_steps_limit = std::max<std::uint64_t>(cfg.steps, 1);
  report.max_strategy_len = max_len;
  report.sum_offset = offset;

  std::mt19937_64 walk_rng(cfg.seed);
  std::uniform_int_distribution<int> pick_x(0, cfg.size.width - 1);
  std::uniform_int_distribution<int> pick_y(0, cfg.size.height - 1);
  std::uniform_int_distribution<ActionId> pick_move(0, kMoveCount - 1);

  reactive::Engine engine;
  const GridState start{pick_x(walk_rng), pick_y(walk_rng)};
  auto position = engine.source(start);
  auto sum = engine.derive([](const GridState& p) { return sum_of(p); }, position);

  monitoring::Predicate<GridState> predicate{report.predicate,
                                             [pred, offset](const GridState& s) { return pred(sum_of(s) + offset); }};
  monitoring::Monitor<GridState> monitor(engine, {sum.id()}, [&] { return engine.get(position); }, predicate);

  qlearn::QAgent agent(move_names(), report.agent);

  // Phase 1: walk and learn. The verdict observer plays the role of the
  // learning hook: each update of the observed position is one transition.
  struct PendingMove {
    GridState from;
    Move move;
  };
  std::optional<PendingMove> pending;
  bool phase_two = false;
  monitor.on_verdict([&](const GridState& s, bool fault) {
    if (phase_two || cfg.count_only || !pending) return;
    agent.learning_step(to_key(pending->from), static_cast<ActionId>(pending->move), to_key(s), fault);
  });

  for (std::uint64_t step = 0; step < cfg.steps; ++step) {
    const GridState from = engine.get(position);
    Move move;
    if (cfg.behavior == Behavior::EpsilonGreedy && !cfg.count_only && agent.learning()) {
      move = static_cast<Move>(agent.act(to_key(from)));
    } else {
      move = static_cast<Move>(pick_move(walk_rng));
    }
    pending = PendingMove{from, move};
    engine.set(position, apply_action(from, move, cfg.size));
  }
  pending.reset();

  report.faults_detected = monitor.stats().faults_detected;
  report.fault_proportion = cfg.steps ? static_cast<double>(report.faults_detected) / static_cast<double>(cfg.steps) : 0.0;
  if (artifacts) artifacts->monitor = monitor.stats();

  const auto fault_cells = enumerate_fault_states(pred, cfg.size, offset);
  report.fault_states = fault_cells.size();
  if (cfg.count_only) return report;

  // Strategy map over the fault states the agent actually visited.
  const auto model = transition_model(cfg.size);
  const auto is_fault = fault_test(cfg.predicate, offset);
  std::vector<StateKey> visited_faults;
  for (const auto& k : agent.table().states()) {
    if (is_fault(k)) visited_faults.push_back(k);
  }
  report.states_visited = agent.table().states().size();
  const recovery::ExtractionOptions opts{max_len, cfg.fallback_second_best};

  // Phase 2: put the pointer on every fault cell and let the runtime react.
  recovery::Healer healer(
      [&](ActionId a) {
        const GridState next = apply_action(engine.get(position), static_cast<Move>(a), cfg.size);
        engine.set(position, next);
        return to_key(next);
      },
      [](const StateKey&) {},
      [&](std::function<void()> task) { engine.defer(std::move(task)); });
  auto build = healer.rebuild(agent.table(), visited_faults, model, is_fault, opts);
  report.strategies_built = build.map.size();
  report.extraction_failures = build.failures.size();

  healer.on_chain_done([&](const StateKey&, const recovery::ChainOutcome& outcome) {
    if (!outcome.aborted && !is_fault(outcome.terminal)) ++report.correct_strategies;
  });
  monitor.on_verdict([&](const GridState& s, bool fault) {
    if (phase_two) healer.take_action(fault, to_key(s));
  });
  phase_two = true;
  for (const auto& cell : fault_cells) engine.set(position, cell);

  report.healing_effectiveness =
      fault_cells.empty() ? 0.0 : static_cast<double>(report.correct_strategies) / static_cast<double>(fault_cells.size());

  if (artifacts) {
    artifacts->table = agent.table();
    artifacts->build = std::move(build);
  }
  return report;
}

std::string report_csv_header() {
  return "predicate,seed,steps,faults_detected,fault_proportion,correct_strategies,healing_effectiveness";
}

std::string report_csv_row(const ExperimentReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%llu,%.6f,%llu,%.6f", r.predicate.c_str(),
                static_cast<unsigned long long>(r.seed), static_cast<unsigned long long>(r.steps),
                static_cast<unsigned long long>(r.faults_detected), r.fault_proportion,
                static_cast<unsigned long long>(r.correct_strategies), r.healing_effectiveness);
  return buf;
}

}  // namespace healrt::grid

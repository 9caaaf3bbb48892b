#include "healrt/recovery.hpp"

#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace healrt::recovery {

std::string_view to_string(ExtractionFailure f) {
  switch (f) {
    case ExtractionFailure::Loop: return "Loop";
    case ExtractionFailure::TooLong: return "TooLong";
  }
  return "?";
}

ExtractionResult extract_strategy(const qlearn::QTable& table, const StateKey& start, const TransitionModel& model,
                                  const FaultTest& is_fault, const ExtractionOptions& opts) {
  if (!is_fault(start)) throw std::invalid_argument("extract_strategy: start state " + start.to_string() + " is valid");

  std::set<StateKey> visited{start};
  RecoveryStrategy strategy{start, {}, start};
  StateKey current = start;
  bool fallback_used = !opts.fallback_second_best;

  while (true) {
    if (strategy.actions.size() >= opts.max_len) return ExtractionFailure::TooLong;
    ActionId action = qlearn::greedy_action(table, current);
    StateKey next = model(current, action);
    if (visited.count(next)) {
      if (fallback_used || table.action_count() < 2) return ExtractionFailure::Loop;
      fallback_used = true;
      action = table.ranked_actions(current)[1];
      next = model(current, action);
      if (visited.count(next)) return ExtractionFailure::Loop;
    }
    strategy.actions.push_back(action);
    if (!is_fault(next)) {
      strategy.terminal = next;
      return strategy;
    }
    visited.insert(next);
    current = next;
  }
}

const RecoveryStrategy* StrategyMap::find(const StateKey& s) const {
  auto it = entries_.find(s);
  return it == entries_.end() ? nullptr : &it->second;
}

BuildResult build_strategy_map(const qlearn::QTable& table, std::span<const StateKey> fault_states,
                               const TransitionModel& model, const FaultTest& is_fault,
                               const ExtractionOptions& opts) {
  BuildResult out;
  for (const auto& s : fault_states) {
    if (!is_fault(s)) continue;
    auto result = extract_strategy(table, s, model, is_fault, opts);
    if (auto* strategy = std::get_if<RecoveryStrategy>(&result)) {
      out.map.insert(std::move(*strategy));
    } else {
      out.failures.emplace_back(s, std::get<ExtractionFailure>(result));
    }
  }
  return out;
}

void write_strategy_map(std::ostream& out, const StrategyMap& map, std::span<const std::string> action_names) {
  for (const auto& [key, strategy] : map) {
    out << key.to_string() << '\t';
    for (std::size_t i = 0; i < strategy.actions.size(); ++i) {
      if (i) out << ',';
      out << action_names[strategy.actions[i]];
    }
    out << '\n';
  }
}

StrategyMap read_strategy_map(std::istream& in, std::span<const std::string> action_names,
                              const TransitionModel& model) {
  auto lookup = [&](const std::string& name) {
    for (std::size_t i = 0; i < action_names.size(); ++i) {
      if (action_names[i] == name) return static_cast<ActionId>(i);
    }
    throw std::runtime_error("strategy map: unknown action '" + name + "'");
  };
  StrategyMap map;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("strategy map: malformed line '" + line + "'");
    RecoveryStrategy s;
    s.origin = StateKey::parse(std::string_view(line).substr(0, tab));
    s.terminal = s.origin;
    std::stringstream ss(line.substr(tab + 1));
    std::string name;
    while (std::getline(ss, name, ',')) {
      s.actions.push_back(lookup(name));
      s.terminal = model(s.terminal, s.actions.back());
    }
    map.insert(std::move(s));
  }
  return map;
}

void write_failures(std::ostream& out, std::span<const std::pair<StateKey, ExtractionFailure>> failures) {
  for (const auto& [key, why] : failures) out << key.to_string() << '\t' << to_string(why) << '\n';
}

void VariationManager::set_active_variations(std::vector<Variation> list) {
  active_ = std::move(list);
  busy_ = true;
}

ChainOutcome VariationManager::execute_chain(const StateKey& start, const Effector& effector) {
  ChainOutcome outcome{start, 0, false, {}};
  busy_ = true;
  ++chains_;
  // Each variation runs, then passes control to its successor.
  for (std::size_t i = 0; i < active_.size(); ++i) {
    try {
      outcome.terminal = effector(active_[i].action);
    } catch (const std::exception& e) {
      outcome.aborted = true;
      outcome.error = e.what();
      break;
    }
    ++outcome.executed;
  }
  active_.clear();
  busy_ = false;
  return outcome;
}

std::vector<Variation> to_variations(const RecoveryStrategy& s) {
  std::vector<Variation> out;
  out.reserve(s.actions.size());
  for (auto a : s.actions) out.push_back(Variation{a});
  return out;
}

Healer::Healer(Effector effector, Base base, Scheduler schedule)
    : effector_(std::move(effector)), base_(std::move(base)), schedule_(std::move(schedule)) {
  if (!schedule_) schedule_ = [](std::function<void()> task) { task(); };
}

Dispatch Healer::take_action(bool fault, const StateKey& state) {
  if (mgr_.busy()) {
    ++stats_.suppressed;
    return Dispatch::Suppressed;
  }
  const RecoveryStrategy* strategy = fault ? map_.find(state) : nullptr;
  if (!strategy) {
    ++stats_.base_calls;
    if (base_) base_(state);
    return Dispatch::Base;
  }
  ++stats_.recoveries;
  mgr_.set_active_variations(to_variations(*strategy));
  schedule_([this, origin = state] {
    const ChainOutcome outcome = mgr_.execute_chain(origin, effector_);
    if (outcome.aborted) ++stats_.aborted;
    if (chain_done_) chain_done_(origin, outcome);
  });
  return Dispatch::Recovered;
}

BuildResult Healer::rebuild(const qlearn::QTable& table, std::span<const StateKey> fault_states,
                            const TransitionModel& model, const FaultTest& is_fault, const ExtractionOptions& opts) {
  BuildResult result = build_strategy_map(table, fault_states, model, is_fault, opts);
  map_ = result.map;
  return result;
}

}  // namespace healrt::recovery

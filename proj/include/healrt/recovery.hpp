#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "healrt/qlearn.hpp"
#include "healrt/state_key.hpp"

namespace healrt::recovery {

using TransitionModel = std::function<StateKey(const StateKey&, ActionId)>;
using FaultTest = std::function<bool(const StateKey&)>;

struct RecoveryStrategy {
  StateKey origin;
  std::vector<ActionId> actions;
  StateKey terminal;

  friend bool operator==(const RecoveryStrategy&, const RecoveryStrategy&) = default;
};

enum class ExtractionFailure { Loop, TooLong };

std::string_view to_string(ExtractionFailure f);

struct ExtractionOptions {
  std::size_t max_len = 10;
  /// On a greedy cycle, retry once with the second-best action at the state
  /// that closed the cycle.
  bool fallback_second_best = false;
};

using ExtractionResult = std::variant<RecoveryStrategy, ExtractionFailure>;

/// Follows the greedy policy of `table` through `model` from the fault state
/// `start` until a non-fault state is reached. Fails with Loop when a state
/// recurs and TooLong when `max_len` actions do not suffice. Performs at most
/// max_len + 1 model applications.
/// Throws std::invalid_argument if `start` is not a fault state.
ExtractionResult extract_strategy(const qlearn::QTable& table, const StateKey& start, const TransitionModel& model,
                                  const FaultTest& is_fault, const ExtractionOptions& opts);

/// Fault state -> recovery strategy, iterated in key order.
class StrategyMap {
 public:
  const RecoveryStrategy* find(const StateKey& s) const;
  void insert(RecoveryStrategy s) { entries_.insert_or_assign(s.origin, std::move(s)); }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  void clear() { entries_.clear(); }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const StrategyMap&, const StrategyMap&) = default;

 private:
  std::map<StateKey, RecoveryStrategy> entries_;
};

struct BuildResult {
  StrategyMap map;
  std::vector<std::pair<StateKey, ExtractionFailure>> failures;
};

/// Extracts a strategy for every state in `fault_states`. States that are not
/// faults under `is_fault` are skipped; failed extractions are itemized.
BuildResult build_strategy_map(const qlearn::QTable& table, std::span<const StateKey> fault_states,
                               const TransitionModel& model, const FaultTest& is_fault,
                               const ExtractionOptions& opts);

/// `state_key<TAB>action1,action2,...` lines.
void write_strategy_map(std::ostream& out, const StrategyMap& map, std::span<const std::string> action_names);
/// Reads what write_strategy_map wrote. Terminal states are recomputed with `model`.
StrategyMap read_strategy_map(std::istream& in, std::span<const std::string> action_names,
                              const TransitionModel& model);
/// `state_key<TAB>Loop|TooLong` lines.
void write_failures(std::ostream& out, std::span<const std::pair<StateKey, ExtractionFailure>> failures);

// ---------------------------------------------------------------------------
// Variation dispatch

/// One replaceable unit of behavior: performing `action`, then handing control
/// to the next variation of the active list.
struct Variation {
  ActionId action = 0;
};

/// Applies an action to the running system and reports the resulting state.
/// Throwing aborts the chain.
using Effector = std::function<StateKey(ActionId)>;

struct ChainOutcome {
  StateKey terminal;
  std::size_t executed = 0;
  bool aborted = false;
  std::string error;
};

/// Holds the active variation list. While a list is active the manager is busy;
/// once the chain finishes or aborts it reverts to base behavior (empty list).
class VariationManager {
 public:
  void set_active_variations(std::vector<Variation> list);
  ChainOutcome execute_chain(const StateKey& start, const Effector& effector);

  bool busy() const noexcept { return busy_; }
  std::span<const Variation> active() const noexcept { return active_; }
  std::uint64_t chains_run() const noexcept { return chains_; }

 private:
  std::vector<Variation> active_;
  bool busy_ = false;
  std::uint64_t chains_ = 0;
};

std::vector<Variation> to_variations(const RecoveryStrategy& s);

enum class Dispatch { Recovered, Base, Suppressed };

struct HealerStats {
  std::uint64_t recoveries = 0;
  std::uint64_t base_calls = 0;
  std::uint64_t suppressed = 0;
  std::uint64_t aborted = 0;
};

/// Routes each monitored update either to base behavior or to a recovery chain.
///
/// A fault whose state is in the strategy map interrupts base behavior and runs
/// the strategy as a variation chain; unmapped faults and valid updates go to
/// base behavior. Updates that arrive while a chain is pending or running are
/// suppressed. The chain itself runs through `schedule`, which lets a reactive
/// host defer it until the current propagation has finished.
class Healer {
 public:
  using Scheduler = std::function<void(std::function<void()>)>;
  using Base = std::function<void(const StateKey&)>;
  using ChainObserver = std::function<void(const StateKey& origin, const ChainOutcome&)>;

  Healer(Effector effector, Base base, Scheduler schedule = {});

  Dispatch take_action(bool fault, const StateKey& state);

  void set_strategies(StrategyMap map) { map_ = std::move(map); }
  const StrategyMap& strategies() const noexcept { return map_; }

  /// Rebuilds the strategy map from a (possibly further trained) table.
  BuildResult rebuild(const qlearn::QTable& table, std::span<const StateKey> fault_states,
                      const TransitionModel& model, const FaultTest& is_fault, const ExtractionOptions& opts);

  void on_chain_done(ChainObserver cb) { chain_done_ = std::move(cb); }

  const VariationManager& manager() const noexcept { return mgr_; }
  const HealerStats& stats() const noexcept { return stats_; }

 private:
  Effector effector_;
  Base base_;
  Scheduler schedule_;
  ChainObserver chain_done_;
  StrategyMap map_;
  VariationManager mgr_;
  HealerStats stats_;
};

}  // namespace healrt::recovery

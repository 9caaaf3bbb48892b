#pragma once

// Mouse-tessellation exemplar: a pointer random-walks a W x H grid, a monitor
// watches x + y against a tessellation predicate, and an agent learns which of
// the four moves takes the pointer out of fault regions.

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "healrt/monitoring.hpp"
#include "healrt/qlearn.hpp"
#include "healrt/recovery.hpp"
#include "healrt/state_key.hpp"

namespace healrt::grid {

struct GridSize {
  int width = 100;
  int height = 100;

  int diameter() const noexcept { return (width - 1) + (height - 1); }
  std::size_t cells() const noexcept { return static_cast<std::size_t>(width) * height; }
};

/// Zero-indexed pointer position.
struct GridState {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const GridState&, const GridState&) = default;
};

/// Screen orientation: Up decreases y. The order is the tie-break order.
enum class Move : ActionId { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr std::size_t kMoveCount = 4;
const std::vector<std::string>& move_names();

int sum_of(GridState s) noexcept;

/// (40 < s < 50) or 200 < s
bool or_faults(int s) noexcept;
/// (10 < s < 50) or 200 < s; the bounds quoted for the (17, 28) walkthrough.
bool or_faults_text(int s) noexcept;
/// Trial-division primality; s < 2 is not prime.
bool prime_faults(int s) noexcept;

enum class PredicateKind { OrListing, OrText, Prime };

/// Accepts "or", "or_listing", "or_faults_listing", "or_text", "or_faults_text",
/// "prime", "prime_faults".
std::optional<PredicateKind> parse_predicate(std::string_view name);
std::string_view predicate_name(PredicateKind k);
std::function<bool(int)> predicate_fn(PredicateKind k);

/// One-cell move, clamped at the border.
GridState apply_action(GridState s, Move a, GridSize size = {});

StateKey to_key(GridState s);
GridState from_key(const StateKey& k);

/// Brute-force scan of every cell; `sum_offset` is added to x + y before the
/// predicate is applied.
std::vector<GridState> enumerate_fault_states(const std::function<bool(int)>& predicate, GridSize size = {},
                                              int sum_offset = 0);

enum class Behavior { Uniform, EpsilonGreedy };

struct GridExperimentConfig {
  PredicateKind predicate = PredicateKind::Prime;
  std::uint64_t steps = 100000;
  std::uint64_t seed = 1;
  qlearn::AgentConfig agent{};
  GridSize size{};
  int sum_offset = 0;
  Behavior behavior = Behavior::Uniform;
  /// Walk and count faults only: no learning, no strategy phase.
  bool count_only = false;
  /// 0 selects 4 x grid diameter.
  std::size_t max_strategy_len = 0;
  bool fallback_second_best = false;
};

struct ExperimentReport {
  std::string predicate;
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;
  std::uint64_t faults_detected = 0;
  double fault_proportion = 0.0;
  std::uint64_t correct_strategies = 0;
  double healing_effectiveness = 0.0;
  std::uint64_t fault_states = 0;
  std::uint64_t strategies_built = 0;
  std::uint64_t extraction_failures = 0;
  std::uint64_t states_visited = 0;
  qlearn::AgentConfig agent{};
  std::size_t max_strategy_len = 0;
  int sum_offset = 0;

  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

/// Optional by-products of a run, for serialization.
struct GridArtifacts {
  std::optional<qlearn::QTable> table;
  recovery::BuildResult build;
  monitoring::MonitorStats monitor;
};

/// Phase 1 walks the pointer `steps` times (uniformly, or epsilon-greedily
/// from the agent) while the monitor counts faults and the agent learns from
/// every step. Phase 2 builds the strategy map for the visited fault states,
/// then places the pointer on every enumerated fault state and counts the
/// recoveries that end on a valid cell.
ExperimentReport run_grid_experiment(const GridExperimentConfig& cfg, GridArtifacts* artifacts = nullptr);

recovery::TransitionModel transition_model(GridSize size);
recovery::FaultTest fault_test(PredicateKind k, int sum_offset = 0);

/// `predicate,seed,steps,faults_detected,fault_proportion,correct_strategies,healing_effectiveness`
std::string report_csv_header();
std::string report_csv_row(const ExperimentReport& r);

}  // namespace healrt::grid

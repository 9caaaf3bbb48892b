#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "healrt/state_key.hpp"

namespace healrt::qlearn {

struct AgentConfig {
  double alpha = 0.5;    // learning rate, (0, 1]
  double gamma = 0.9;    // discount, [0, 1)
  double epsilon = 0.2;  // exploration probability while learning, [0, 1]
  std::uint64_t learning_steps_limit = 100000;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;

  friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

struct Transition {
  StateKey old_state;
  ActionId action = 0;
  StateKey new_state;
  double reward = 0.0;
};

/// Sparse Q(s, a) table over an ordered action set. Unvisited entries read as 0.
class QTable {
 public:
  explicit QTable(std::vector<std::string> action_names);

  std::span<const std::string> actions() const noexcept { return actions_; }
  std::size_t action_count() const noexcept { return actions_.size(); }
  ActionId action_id(std::string_view name) const;

  double q(const StateKey& s, ActionId a) const;
  void set(const StateKey& s, ActionId a, double value);
  bool contains(const StateKey& s, ActionId a) const;
  bool has_state(const StateKey& s) const { return rows_.count(s) != 0; }
  double max_q(const StateKey& s) const;

  /// Number of stored (state, action) pairs.
  std::size_t size() const noexcept { return stored_; }
  /// Visited states, sorted.
  std::vector<StateKey> states() const;

  /// Actions of s ordered by q descending; ties keep action-set order.
  std::vector<ActionId> ranked_actions(const StateKey& s) const;

  friend bool operator==(const QTable& a, const QTable& b);

 private:
  struct Row {
    std::vector<double> q;
    std::uint64_t stored = 0;  // bit i set when action i has an entry
  };

  void check_action(ActionId a) const;

  std::vector<std::string> actions_;
  std::unordered_map<StateKey, Row, StateKeyHash> rows_;
  std::size_t stored_ = 0;
};

/// Q(s,a) <- Q(s,a) + alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)).
/// Only the (old_state, action) entry changes. Returns the new value.
/// Throws std::invalid_argument on a non-finite reward.
double q_update(QTable& table, const Transition& t, const AgentConfig& cfg);

/// Argmax over the action set; ties go to the earliest action.
ActionId greedy_action(const QTable& table, const StateKey& s);

/// Uniform random action with probability epsilon, otherwise greedy.
ActionId select_action(const QTable& table, const StateKey& s, const AgentConfig& cfg, std::mt19937_64& rng);

/// Learning-phase driver: turns fault verdicts into rewards (valid state = 1,
/// fault = 0), applies q_update, and closes the learning phase after
/// `learning_steps_limit` updates.
class QAgent {
 public:
  QAgent(std::vector<std::string> action_names, AgentConfig cfg);

  void learning_step(const StateKey& old_state, ActionId action, const StateKey& new_state, bool new_state_fault);

  bool learning() const noexcept { return learning_; }
  std::uint64_t steps() const noexcept { return steps_; }
  /// learning_step calls made after the phase closed.
  std::uint64_t late_calls() const noexcept { return late_calls_; }

  /// Called once, when the learning phase closes.
  void on_learning_finished(std::function<void()> cb) { finished_ = std::move(cb); }
  /// Closes the learning phase early; no-op when already closed.
  void finish();
  /// Reopens learning for another `extra_steps` updates.
  void resume(std::uint64_t extra_steps);

  ActionId act(const StateKey& s) { return select_action(table_, s, cfg_, rng_); }

  const QTable& table() const noexcept { return table_; }
  QTable& table() noexcept { return table_; }
  const AgentConfig& config() const noexcept { return cfg_; }
  std::mt19937_64& rng() noexcept { return rng_; }
  const std::vector<Transition>& history() const noexcept { return history_; }
  void keep_history(bool on) { keep_history_ = on; }

 private:
  QTable table_;
  AgentConfig cfg_;
  std::mt19937_64 rng_;
  std::uint64_t steps_ = 0;
  std::uint64_t limit_;
  std::uint64_t late_calls_ = 0;
  bool learning_ = true;
  bool keep_history_ = false;
  std::vector<Transition> history_;
  std::function<void()> finished_;
};

/// Text format: `#` header lines with the config and action set, then one
/// `state_key<TAB>action<TAB>q` line per stored entry, sorted. Doubles are
/// written with 17 significant digits so a round trip is lossless.
void write_qtable(std::ostream& out, const QTable& table, const AgentConfig& cfg);
QTable read_qtable(std::istream& in, AgentConfig* cfg_out = nullptr);

}  // namespace healrt::qlearn

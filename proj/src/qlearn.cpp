#include "healrt/qlearn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace healrt::qlearn {

void AgentConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in [0, 1)");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in [0, 1]");
  if (learning_steps_limit == 0) throw std::invalid_argument("learning_steps_limit must be positive");
}

QTable::QTable(std::vector<std::string> action_names) : actions_(std::move(action_names)) {
  if (actions_.empty()) throw std::invalid_argument("QTable: empty action set");
  if (actions_.size() > 64) throw std::invalid_argument("QTable: at most 64 actions");
}

ActionId QTable::action_id(std::string_view name) const {
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    if (actions_[i] == name) return static_cast<ActionId>(i);
  }
  throw std::invalid_argument("unknown action '" + std::string(name) + "'");
}

void QTable::check_action(ActionId a) const {
  if (a >= actions_.size()) throw std::out_of_range("action id out of range");
}

double QTable::q(const StateKey& s, ActionId a) const {
  check_action(a);
  auto it = rows_.find(s);
  return it == rows_.end() ? 0.0 : it->second.q[a];
}

bool QTable::contains(const StateKey& s, ActionId a) const {
  check_action(a);
  auto it = rows_.find(s);
  return it != rows_.end() && (it->second.stored >> a & 1U);
}

void QTable::set(const StateKey& s, ActionId a, double value) {
  check_action(a);
  if (!std::isfinite(value)) throw std::invalid_argument("QTable: non-finite q value");
  auto [it, inserted] = rows_.try_emplace(s);
  Row& row = it->second;
  if (inserted) row.q.assign(actions_.size(), 0.0);
  const std::uint64_t bit = std::uint64_t{1} << a;
  if (!(row.stored & bit)) {
    row.stored |= bit;
    ++stored_;
  }
  row.q[a] = value;
}

double QTable::max_q(const StateKey& s) const {
  auto it = rows_.find(s);
  if (it == rows_.end()) return 0.0;
  return *std::max_element(it->second.q.begin(), it->second.q.end());
}

std::vector<StateKey> QTable::states() const {
  std::vector<StateKey> out;
  out.reserve(rows_.size());
  for (const auto& [k, row] : rows_) out.push_back(k);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ActionId> QTable::ranked_actions(const StateKey& s) const {
  std::vector<ActionId> order(actions_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<ActionId>(i);
  auto it = rows_.find(s);
  if (it == rows_.end()) return order;
  const auto& q = it->second.q;
  std::stable_sort(order.begin(), order.end(), [&](ActionId a, ActionId b) { return q[a] > q[b]; });
  return order;
}

bool operator==(const QTable& a, const QTable& b) {
  if (a.actions_ != b.actions_ || a.stored_ != b.stored_ || a.rows_.size() != b.rows_.size()) return false;
  for (const auto& [k, row] : a.rows_) {
    auto it = b.rows_.find(k);
    if (it == b.rows_.end() || it->second.stored != row.stored) return false;
    for (std::size_t i = 0; i < row.q.size(); ++i) {
      if ((row.stored >> i & 1U) && row.q[i] != it->second.q[i]) return false;
    }
  }
  return true;
}

double q_update(QTable& table, const Transition& t, const AgentConfig& cfg) {
  if (!std::isfinite(t.reward)) throw std::invalid_argument("q_update: non-finite reward");
  const double current = table.q(t.old_state, t.action);
  const double target = t.reward + cfg.gamma * table.max_q(t.new_state);
  const double updated = current + cfg.alpha * (target - current);
  table.set(t.old_state, t.action, updated);
  return updated;
}

ActionId greedy_action(const QTable& table, const StateKey& s) {
  ActionId best = 0;
  double best_q = table.q(s, 0);
  for (ActionId a = 1; a < table.action_count(); ++a) {
    const double v = table.q(s, a);
    if (v > best_q) {
      best_q = v;
      best = a;
    }
  }
  return best;
}

ActionId select_action(const QTable& table, const StateKey& s, const AgentConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (cfg.epsilon > 0.0 && coin(rng) < cfg.epsilon) {
    std::uniform_int_distribution<ActionId> pick(0, static_cast<ActionId>(table.action_count() - 1));
    return pick(rng);
  }
  return greedy_action(table, s);
}

QAgent::QAgent(std::vector<std::string> action_names, AgentConfig cfg)
    : table_(std::move(action_names)), cfg_(cfg), rng_(cfg.seed), limit_(cfg.learning_steps_limit) {
  cfg_.validate();
}

void QAgent::learning_step(const StateKey& old_state, ActionId action, const StateKey& new_state,
                           bool new_state_fault) {
  if (!learning_) {
    ++late_calls_;
    return;
  }
  Transition t{old_state, action, new_state, new_state_fault ? 0.0 : 1.0};
  q_update(table_, t, cfg_);
  if (keep_history_) history_.push_back(t);
  ++steps_;
  if (steps_ >= limit_) {
    learning_ = false;
    if (finished_) finished_();
  }
}

void QAgent::finish() {
  if (!learning_) return;
  learning_ = false;
  if (finished_) finished_();
}

void QAgent::resume(std::uint64_t extra_steps) {
  limit_ = steps_ + extra_steps;
  learning_ = extra_steps > 0;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_qtable(std::ostream& out, const QTable& table, const AgentConfig& cfg) {
  out << "# healrt-qtable v1\n";
  out << "# alpha=" << format_double(cfg.alpha) << '\n';
  out << "# gamma=" << format_double(cfg.gamma) << '\n';
  out << "# epsilon=" << format_double(cfg.epsilon) << '\n';
  out << "# learning_steps_limit=" << cfg.learning_steps_limit << '\n';
  out << "# seed=" << cfg.seed << '\n';
  out << "# actions=";
  for (std::size_t i = 0; i < table.action_count(); ++i) {
    if (i) out << ',';
    out << table.actions()[i];
  }
  out << '\n';
  for (const auto& s : table.states()) {
    const std::string key = s.to_string();
    for (ActionId a = 0; a < table.action_count(); ++a) {
      if (!table.contains(s, a)) continue;
      out << key << '\t' << table.actions()[a] << '\t' << format_double(table.q(s, a)) << '\n';
    }
  }
}

QTable read_qtable(std::istream& in, AgentConfig* cfg_out) {
  AgentConfig cfg;
  std::vector<std::string> actions;
  std::vector<std::string> body;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] != '#') {
      body.push_back(line);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = line.substr(2, eq - 2);
    const std::string value = line.substr(eq + 1);
    if (name == "alpha") cfg.alpha = std::stod(value);
    else if (name == "gamma") cfg.gamma = std::stod(value);
    else if (name == "epsilon") cfg.epsilon = std::stod(value);
    else if (name == "learning_steps_limit") cfg.learning_steps_limit = std::stoull(value);
    else if (name == "seed") cfg.seed = std::stoull(value);
    else if (name == "actions") {
      std::stringstream ss(value);
      std::string a;
      while (std::getline(ss, a, ',')) actions.push_back(a);
    }
  }
  if (actions.empty()) throw std::runtime_error("qtable: missing '# actions=' header");
  QTable table(std::move(actions));
  for (const auto& row : body) {
    const auto t1 = row.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : row.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw std::runtime_error("qtable: malformed line '" + row + "'");
    const auto key = StateKey::parse(std::string_view(row).substr(0, t1));
    const auto action = table.action_id(std::string_view(row).substr(t1 + 1, t2 - t1 - 1));
    table.set(key, action, std::strtod(row.c_str() + t2 + 1, nullptr));
  }
  if (cfg_out) *cfg_out = cfg;
  return table;
}

}  // namespace healrt::qlearn

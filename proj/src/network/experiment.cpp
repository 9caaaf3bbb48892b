#include <cstdio>
#include <vector>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "healrt/monitoring.hpp"
#include "healrt/network.hpp"
#include "healrt/reactive.hpp"

namespace healrt::network {

std::optional<ActionKind> ScriptedTeacher::choose(const Network& net, const LinkObservation& obs) {
  if (auto a = baseline_adaptation(net, obs, t_)) return a->kind;
  return std::nullopt;
}

std::optional<ActionKind> InteractiveTeacher::choose(const Network& net, const LinkObservation& obs) {
  char head[160];
  std::snprintf(head, sizeof head, "step %llu link %d: loss=%.3f power=%d min_power=%d dist=%d\n",
                static_cast<unsigned long long>(net.step_index()), obs.link, obs.loss_estimate, obs.power,
                obs.min_power, obs.distribution);
  out_ << head;
  const auto& names = action_names();
  const auto sib = net.sibling(obs.link);
  std::vector<std::size_t> legal;
  if (obs.power < kMaxPower) legal.push_back(to_action_id(ActionKind::PowerUp));
  if (obs.power > 0) legal.push_back(to_action_id(ActionKind::PowerDown));
  if (sib && obs.distribution < 100) legal.push_back(to_action_id(ActionKind::ShiftUp));
  if (sib && obs.distribution > 0) legal.push_back(to_action_id(ActionKind::ShiftDown));
  for (std::size_t i : legal) out_ << "  " << i + 1 << ") " << names[i] << '\n';
  for (int attempt = 0; attempt < 3; ++attempt) {
    out_ << "action (number or name, empty to skip): " << std::flush;
    std::string line;
    if (!std::getline(in_, line)) return std::nullopt;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) return std::nullopt;
    for (std::size_t i : legal) {
      if (word == names[i] || word == std::to_string(i + 1)) return static_cast<ActionKind>(i);
    }
    out_ << "not a legal action: '" << word << "'\n";
  }
  return std::nullopt;
}

NetworkReport run_network_experiment(const NetworkConfig& cfg, Teacher* teacher, NetworkArtifacts* artifacts) {
  if (cfg.controller == Controller::Learned && !teacher && cfg.train_steps > 0) {
    throw std::invalid_argument("the learned controller needs a teacher for its training phase");
  }
  const Thresholds thresholds{cfg.params.loss_threshold};
  Network net(cfg.topology, cfg.params, cfg.seed);

  reactive::Engine engine;
  auto event = engine.source(LinkObservation{});
  monitoring::Monitor<LinkObservation> monitor(
      engine, {event.id()}, [&] { return engine.get(event); },
      monitoring::Predicate<LinkObservation>{"analyzeLinkSettings", [thresholds](const LinkObservation& o) {
                                               return analyze_link_settings(o, thresholds);
                                             }});

  qlearn::AgentConfig agent_cfg = cfg.agent;
  agent_cfg.seed = cfg.seed;
  agent_cfg.learning_steps_limit = std::numeric_limits<std::uint64_t>::max();
  qlearn::QAgent agent(action_names(), agent_cfg);

  NetworkReport report;
  bool training = cfg.train_steps > 0;
  int acting_link = 0;
  std::uint64_t step_events = 0;
  std::uint64_t step_recoveries = 0;

  struct Pending {
    StateKey key;
    ActionId action;
  };
  std::map<int, Pending> to_learn;  // link -> teacher action awaiting its outcome
  std::map<int, bool> to_judge;     // link -> adaptation awaiting its next evaluation

  recovery::Healer healer(
      [&](ActionId a) {
        net.apply(LinkAction{to_kind(a), acting_link});
        return to_key(net.observe(acting_link));
      },
      [](const StateKey&) {}, [&](std::function<void()> task) { engine.defer(std::move(task)); });

  auto adapted = [&](int link) {
    ++report.adaptations;
    ++step_recoveries;
    to_judge[link] = true;
  };

  monitor.on_verdict([&](const LinkObservation& obs, bool fault) {
    const StateKey key = to_key(obs);
    if (auto it = to_judge.find(obs.link); it != to_judge.end()) {
      if (!fault) ++report.correct_strategies;
      to_judge.erase(it);
    }
    if (auto it = to_learn.find(obs.link); it != to_learn.end()) {
      if (agent.learning()) agent.learning_step(it->second.key, it->second.action, key, fault);
      to_learn.erase(it);
    }
    if (!fault) return;
    ++report.total_events;
    ++step_events;

    if (cfg.controller == Controller::Baseline) {
      if (auto a = baseline_adaptation(net, obs, thresholds)) {
        net.apply(*a);
        adapted(obs.link);
      }
    } else if (training) {
      if (auto kind = teacher->choose(net, obs)) {
        net.apply(LinkAction{*kind, obs.link});
        to_learn[obs.link] = Pending{key, to_action_id(*kind)};
        adapted(obs.link);
      }
    } else {
      acting_link = obs.link;
      if (healer.take_action(true, key) == recovery::Dispatch::Recovered) adapted(obs.link);
    }
  });

  auto close_training = [&] {
    training = false;
    agent.finish();
    to_learn.clear();
    if (cfg.controller != Controller::Learned) return;
    const auto is_fault = key_fault_test(thresholds);
    std::vector<StateKey> faults;
    for (const auto& k : agent.table().states()) {
      if (is_fault(k)) faults.push_back(k);
    }
    auto build = healer.rebuild(agent.table(), faults, key_model(cfg.params), is_fault,
                                recovery::ExtractionOptions{cfg.max_strategy_len, cfg.fallback_second_best});
    report.strategies_built = build.map.size();
    report.extraction_failures = build.failures.size();
    if (artifacts) artifacts->build = std::move(build);
  };

  double train_loss = 0, train_energy = 0, eval_loss = 0, eval_energy = 0;
  const std::uint64_t total = cfg.train_steps + cfg.eval_steps;
  for (std::uint64_t step = 0; step < total; ++step) {
    if (training && step == cfg.train_steps) close_training();
    step_events = 0;
    step_recoveries = 0;
    const StepResult r = net.simulate_step();
    report.packets_generated += static_cast<std::uint64_t>(r.generated);
    report.packets_delivered += static_cast<std::uint64_t>(r.delivered);
    report.packets_lost += static_cast<std::uint64_t>(r.lost);
    for (const auto& l : net.topology().links) engine.set(event, net.observe(l.id));

    report.series.push_back(StepRecord{step, r.metrics.packet_loss, r.metrics.energy_consumption, step_events,
                                       step_recoveries, training});
    if (training) {
      train_loss += r.metrics.packet_loss;
      train_energy += r.metrics.energy_consumption;
    } else {
      eval_loss += r.metrics.packet_loss;
      eval_energy += r.metrics.energy_consumption;
    }
  }
  if (training) close_training();

  if (cfg.train_steps) {
    report.train_mean_loss = train_loss / static_cast<double>(cfg.train_steps);
    report.train_mean_energy = train_energy / static_cast<double>(cfg.train_steps);
  }
  if (cfg.eval_steps) {
    report.eval_mean_loss = eval_loss / static_cast<double>(cfg.eval_steps);
    report.eval_mean_energy = eval_energy / static_cast<double>(cfg.eval_steps);
  }
  if (artifacts) artifacts->table = agent.table();
  return report;
}

void write_metrics_csv(std::ostream& out, const NetworkReport& r) {
  out << "step,packet_loss,energy_consumption,events,recoveries\n";
  char buf[160];
  for (const auto& s : r.series) {
    std::snprintf(buf, sizeof buf, "%llu,%.6f,%.6f,%llu,%llu\n", static_cast<unsigned long long>(s.step),
                  s.packet_loss, s.energy_consumption, static_cast<unsigned long long>(s.events),
                  static_cast<unsigned long long>(s.recoveries));
    out << buf;
  }
}

}  // namespace healrt::network

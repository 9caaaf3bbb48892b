#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <tuple>

#include "healrt/cli.hpp"
#include "healrt/grid.hpp"
#include "healrt/network.hpp"
#include "healrt/qlearn.hpp"

namespace py = pybind11;
using namespace healrt;

namespace {

grid::PredicateKind predicate_or_throw(const std::string& name) {
  auto k = grid::parse_predicate(name);
  if (!k) throw py::value_error("unknown predicate '" + name + "'");
  return *k;
}

py::dict grid_report_dict(const grid::ExperimentReport& r) {
  py::dict d;
  d["predicate"] = r.predicate;
  d["seed"] = r.seed;
  d["steps"] = r.steps;
  d["faults_detected"] = r.faults_detected;
  d["fault_proportion"] = r.fault_proportion;
  d["correct_strategies"] = r.correct_strategies;
  d["healing_effectiveness"] = r.healing_effectiveness;
  d["fault_states"] = r.fault_states;
  d["strategies_built"] = r.strategies_built;
  d["extraction_failures"] = r.extraction_failures;
  d["states_visited"] = r.states_visited;
  d["max_strategy_len"] = r.max_strategy_len;
  return d;
}

py::dict run_grid(const std::string& predicate, std::uint64_t steps, std::uint64_t seed, double alpha, double gamma,
                  double epsilon, bool count_only, int sum_offset, const std::string& behavior, std::size_t max_len,
                  bool fallback) {
  grid::GridExperimentConfig cfg;
  cfg.predicate = predicate_or_throw(predicate);
  cfg.steps = steps;
  cfg.seed = seed;
  cfg.agent.alpha = alpha;
  cfg.agent.gamma = gamma;
  cfg.agent.epsilon = epsilon;
  cfg.count_only = count_only;
  cfg.sum_offset = sum_offset;
  if (behavior == "uniform") cfg.behavior = grid::Behavior::Uniform;
  else if (behavior == "epsilon-greedy") cfg.behavior = grid::Behavior::EpsilonGreedy;
  else throw py::value_error("unknown behavior '" + behavior + "'");
  cfg.max_strategy_len = max_len;
  cfg.fallback_second_best = fallback;
  grid::ExperimentReport r;
  {
    py::gil_scoped_release release;
    r = grid::run_grid_experiment(cfg);
  }
  return grid_report_dict(r);
}

py::dict run_network(const std::string& controller, std::uint64_t train, std::uint64_t eval, std::uint64_t seed,
                     double alpha, double gamma, std::size_t max_len, bool fallback) {
  network::NetworkConfig cfg;
  if (controller == "learned") cfg.controller = network::Controller::Learned;
  else if (controller == "baseline") cfg.controller = network::Controller::Baseline;
  else throw py::value_error("unknown controller '" + controller + "'");
  cfg.train_steps = train;
  cfg.eval_steps = eval;
  cfg.seed = seed;
  cfg.agent.alpha = alpha;
  cfg.agent.gamma = gamma;
  cfg.agent.validate();
  cfg.max_strategy_len = max_len;
  cfg.fallback_second_best = fallback;
  network::ScriptedTeacher teacher({cfg.params.loss_threshold});
  network::NetworkReport r;
  {
    py::gil_scoped_release release;
    r = network::run_network_experiment(cfg, &teacher);
  }
  py::dict d;
  d["controller"] = controller;
  d["seed"] = seed;
  d["total_events"] = r.total_events;
  d["adaptations"] = r.adaptations;
  d["correct_strategies"] = r.correct_strategies;
  d["correct_ratio"] = r.correct_ratio();
  d["strategies_built"] = r.strategies_built;
  d["extraction_failures"] = r.extraction_failures;
  d["packets_generated"] = r.packets_generated;
  d["packets_delivered"] = r.packets_delivered;
  d["packets_lost"] = r.packets_lost;
  d["train_mean_loss"] = r.train_mean_loss;
  d["eval_mean_loss"] = r.eval_mean_loss;
  d["train_mean_energy"] = r.train_mean_energy;
  d["eval_mean_energy"] = r.eval_mean_energy;
  std::vector<double> loss, energy;
  std::vector<std::uint64_t> events;
  for (const auto& s : r.series) {
    loss.push_back(s.packet_loss);
    energy.push_back(s.energy_consumption);
    events.push_back(s.events);
  }
  d["packet_loss"] = loss;
  d["energy_consumption"] = energy;
  d["events"] = events;
  return d;
}

double q_update_value(double q, double reward, double max_next, double alpha, double gamma) {
  qlearn::QTable t(grid::move_names());
  t.set({0}, 0, q);
  for (ActionId a = 0; a < grid::kMoveCount; ++a) t.set({1}, a, max_next);
  qlearn::AgentConfig c;
  c.alpha = alpha;
  c.gamma = gamma;
  return qlearn::q_update(t, qlearn::Transition{{0}, 0, {1}, reward}, c);
}

std::vector<std::pair<int, int>> enumerate_faults(const std::string& predicate, int width, int height, int sum_offset) {
  const auto pred = grid::predicate_fn(predicate_or_throw(predicate));
  std::vector<std::pair<int, int>> out;
  for (const auto& s : grid::enumerate_fault_states(pred, {width, height}, sum_offset)) out.emplace_back(s.x, s.y);
  return out;
}

std::tuple<int, std::string, std::string> run_cli(const std::vector<std::string>& args, const std::string& input) {
  std::istringstream in(input);
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = cli::run(args, in, out, err);
  }
  return {code, out.str(), err.str()};
}

}  // namespace

PYBIND11_MODULE(_healrt, m) {
  m.doc() = "Self-healing runtime: grid and network experiments";

  m.def("run_grid", &run_grid, py::arg("predicate") = "prime", py::arg("steps") = 100000, py::arg("seed") = 1,
        py::arg("alpha") = 0.5, py::arg("gamma") = 0.9, py::arg("epsilon") = 0.2, py::arg("count_only") = false,
        py::arg("sum_offset") = 0, py::arg("behavior") = "uniform", py::arg("max_len") = 0,
        py::arg("fallback") = false, "Run one seeded grid experiment and return its report as a dict.");
  m.def("run_network", &run_network, py::arg("controller") = "learned", py::arg("train") = 96, py::arg("eval") = 54,
        py::arg("seed") = 1, py::arg("alpha") = 0.5, py::arg("gamma") = 0.9, py::arg("max_len") = 10,
        py::arg("fallback") = false,
        "Run one seeded network experiment (scripted teacher) and return totals and per-step series.");
  m.def("q_update", &q_update_value, py::arg("q"), py::arg("reward"), py::arg("max_next"), py::arg("alpha"),
        py::arg("gamma"), "One Q-learning update of a single entry; returns the new value.");
  m.def("or_faults", &grid::or_faults, py::arg("s"));
  m.def("or_faults_text", &grid::or_faults_text, py::arg("s"));
  m.def("prime_faults", &grid::prime_faults, py::arg("s"));
  m.def("enumerate_fault_states", &enumerate_faults, py::arg("predicate"), py::arg("width") = 100,
        py::arg("height") = 100, py::arg("sum_offset") = 0, "All (x, y) cells whose coordinate sum is a fault.");
  m.def("run_cli", &run_cli, py::arg("args"), py::arg("input") = "",
        "Run the command-line interface in-process; returns (exit_code, stdout, stderr).");

  py::register_exception<network::TopologyError>(m, "TopologyError", PyExc_ValueError);
}

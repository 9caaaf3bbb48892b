#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "healrt/qlearn.hpp"
#include "oracles.hpp"

using namespace healrt;
using namespace healrt::qlearn;

namespace {

const std::vector<std::string> kMoves{"Up", "Down", "Left", "Right"};

AgentConfig cfg(double alpha = 0.5, double gamma = 0.9, double epsilon = 0.2) {
  AgentConfig c;
  c.alpha = alpha;
  c.gamma = gamma;
  c.epsilon = epsilon;
  return c;
}

}  // namespace

TEST_CASE("state keys print, parse and order") {
  const StateKey k{17, 28};
  CHECK(k.to_string() == "17,28");
  CHECK(StateKey::parse("17,28") == k);
  CHECK(StateKey::parse("-3") == StateKey{-3});
  CHECK(StateKey{1, 2} < StateKey{1, 3});
  CHECK(StateKey{1} < StateKey{1, 0});
  CHECK_THROWS(StateKey::parse("1,,2"));
  CHECK_THROWS(StateKey::parse("x"));
  CHECK(StateKeyHash{}(k) == StateKeyHash{}(StateKey{17, 28}));
}

TEST_CASE("update from an empty table") {
  QTable t(kMoves);
  const double v = q_update(t, Transition{{0}, 0, {1}, 1.0}, cfg());
  CHECK(v == doctest::Approx(0.5));
  CHECK(t.q({0}, 0) == 0.5);
}

TEST_CASE("update with a discounted successor") {
  QTable t(kMoves);
  t.set({0}, 0, 0.5);
  t.set({1}, 2, 0.5);
  const double v = q_update(t, Transition{{0}, 0, {1}, 0.0}, cfg());
  CHECK(v == doctest::Approx(0.475));
}

TEST_CASE("a zero learning rate leaves the table unchanged") {
  QTable t(kMoves);
  t.set({0}, 1, 0.3);
  auto c = cfg(1.0);
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);  // alpha must be in (0, 1]
  // q_update itself does not validate, so the degenerate rate still applies cleanly
  q_update(t, Transition{{0}, 1, {2}, 1.0}, c);
  CHECK(t.q({0}, 1) == 0.3);
}

TEST_CASE("only the updated entry changes") {
  QTable t(kMoves);
  t.set({1}, 3, 0.25);
  q_update(t, Transition{{0}, 2, {1}, 1.0}, cfg());
  CHECK(t.size() == 2);
  CHECK(t.q({0}, 0) == 0.0);
  CHECK(t.q({1}, 3) == 0.25);
}

TEST_CASE("non-finite values are rejected") {
  QTable t(kMoves);
  CHECK_THROWS_AS(q_update(t, Transition{{0}, 0, {1}, std::nan("")}, cfg()), std::invalid_argument);
  CHECK_THROWS_AS(t.set({0}, 0, std::numeric_limits<double>::infinity()), std::invalid_argument);
  CHECK_THROWS(t.set({0}, 7, 1.0));
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(cfg().validate());
  CHECK_THROWS_AS(cfg(1.5).validate(), std::invalid_argument);
  CHECK_THROWS_AS(cfg(0.5, 1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(cfg(0.5, 0.9, -0.1).validate(), std::invalid_argument);
  auto c = cfg();
  c.learning_steps_limit = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("greedy selection and tie-breaks") {
  QTable t(kMoves);
  CHECK(greedy_action(t, {9, 9}) == 0);  // unseen state
  t.set({0}, 0, 0.2);
  t.set({0}, 1, 0.7);
  t.set({0}, 2, 0.7);
  t.set({0}, 3, 0.1);
  CHECK(greedy_action(t, {0}) == 1);  // Down precedes Left
  for (ActionId a = 0; a < 4; ++a) t.set({0}, a, 2 * t.q({0}, a));
  CHECK(greedy_action(t, {0}) == 1);
  CHECK(t.ranked_actions({0}) == std::vector<ActionId>{1, 2, 0, 3});

  QTable u(kMoves);
  u.set({0}, 0, 1.0);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) CHECK(select_action(u, {0}, cfg(0.5, 0.9, 0.0), rng) == 0);
}

TEST_CASE("epsilon 1 selects uniformly") {
  QTable t(kMoves);
  t.set({0}, 2, 5.0);
  std::mt19937_64 rng(11);
  const int n = 10000;
  std::vector<int> hits(4, 0);
  for (int i = 0; i < n; ++i) ++hits[select_action(t, {0}, cfg(0.5, 0.9, 1.0), rng)];
  const double p = 0.25, sigma = std::sqrt(n * p * (1 - p));
  for (int h : hits) CHECK(std::abs(h - n * p) <= 3 * sigma);
}

TEST_CASE("agent rewards and learning limit") {
  auto c = cfg();
  c.learning_steps_limit = 3;
  QAgent agent(kMoves, c);
  int finished = 0;
  agent.on_learning_finished([&] { ++finished; });

  agent.learning_step({0}, 3, {1}, false);  // valid successor: reward 1
  CHECK(agent.table().q({0}, 3) == doctest::Approx(0.5));
  agent.learning_step({2}, 0, {3}, true);  // fault successor: reward 0
  CHECK(agent.table().q({2}, 0) == 0.0);
  CHECK(agent.table().contains({2}, 0));
  CHECK(agent.learning());
  agent.learning_step({2}, 1, {3}, true);
  CHECK_FALSE(agent.learning());
  CHECK(finished == 1);

  agent.learning_step({0}, 3, {1}, false);
  CHECK(agent.late_calls() == 1);
  CHECK(agent.steps() == 3);
  CHECK(agent.table().q({0}, 3) == doctest::Approx(0.5));

  agent.resume(1);
  CHECK(agent.learning());
  agent.learning_step({0}, 3, {1}, false);
  CHECK(agent.table().q({0}, 3) == doctest::Approx(0.75));
  CHECK_FALSE(agent.learning());
  CHECK(finished == 2);
}

TEST_CASE("finish closes learning once") {
  QAgent agent(kMoves, cfg());
  int finished = 0;
  agent.on_learning_finished([&] { ++finished; });
  agent.finish();
  agent.finish();
  CHECK(finished == 1);
  CHECK_FALSE(agent.learning());
}

TEST_CASE("history records applied transitions") {
  QAgent agent(kMoves, cfg());
  agent.keep_history(true);
  agent.learning_step({0}, 1, {1}, false);
  agent.learning_step({1}, 2, {2}, true);
  REQUIRE(agent.history().size() == 2);
  CHECK(agent.history()[0].reward == 1.0);
  CHECK(agent.history()[1].reward == 0.0);
}

TEST_CASE("q values stay within [0, 1 / (1 - gamma)] for 0/1 rewards") {
  std::mt19937_64 rng(5);
  QTable t(kMoves);
  const auto c = cfg(0.7, 0.9);
  for (int i = 0; i < 20000; ++i) {
    const StateKey s{static_cast<int>(rng() % 20)};
    const StateKey n{static_cast<int>(rng() % 20)};
    q_update(t, Transition{s, static_cast<ActionId>(rng() % 4), n, static_cast<double>(rng() % 2)}, c);
  }
  for (const auto& s : t.states()) {
    for (ActionId a = 0; a < 4; ++a) {
      CHECK(t.q(s, a) >= 0.0);
      CHECK(t.q(s, a) <= 1.0 / (1.0 - c.gamma) + 1e-12);
    }
  }
}

TEST_CASE("random updates match the reference formula exactly") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QTable t(kMoves);
  for (int i = 0; i < 1000; ++i) {
    const auto c = cfg(0.01 + 0.99 * u(rng), 0.99 * u(rng));
    const Transition tr{{static_cast<int>(rng() % 7)}, static_cast<ActionId>(rng() % 4),
                        {static_cast<int>(rng() % 7)}, u(rng) * 2 - 1};
    const double before = t.q(tr.old_state, tr.action);
    double max_next = t.q(tr.new_state, 0);
    for (ActionId a = 1; a < 4; ++a) max_next = std::max(max_next, t.q(tr.new_state, a));
    const double expected = oracle::q_formula(before, tr.reward, max_next, c.alpha, c.gamma);
    CHECK(q_update(t, tr, c) == expected);
  }
}

TEST_CASE("q-learning on a 5x5 grid converges to the value-iteration values") {
  oracle::SmallGrid g;
  g.fault.assign(25, true);
  g.fault[24] = false;  // single valid corner
  // reward 1 on entering the valid cell; episodes restart from a fault cell
  const double gamma = 0.9;
  const auto v = oracle::value_iteration(g, 200, gamma);

  AgentConfig c = cfg(0.5, gamma);
  c.learning_steps_limit = 1000000;
  QAgent agent(kMoves, c);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200000; ++i) {
    int s = static_cast<int>(rng() % 24);
    const int a = static_cast<int>(rng() % 4);
    const int n = g.step(s, a);
    agent.learning_step({s}, static_cast<ActionId>(a), {n}, g.fault[n]);
  }
  for (int s = 0; s < 24; ++s) {
    CHECK(agent.table().max_q({s}) == doctest::Approx(v[s]).epsilon(1e-3));
  }
}

TEST_CASE("q-table text round trip is lossless") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-10, 10);
  QTable t(kMoves);
  for (int i = 0; i < 200; ++i) t.set({static_cast<int>(rng() % 30), -5}, static_cast<ActionId>(rng() % 4), u(rng));
  t.set({1000}, 0, 1.0 / 3.0);
  auto c = cfg(0.3, 0.7, 0.05);
  c.seed = 77;
  std::stringstream ss;
  write_qtable(ss, t, c);
  AgentConfig back_cfg;
  const QTable back = read_qtable(ss, &back_cfg);
  CHECK(back == t);
  CHECK(back_cfg == c);
}

TEST_CASE("malformed q-table text is rejected") {
  std::istringstream no_header("0\tUp\t0.5\n");
  CHECK_THROWS(read_qtable(no_header));
  std::istringstream bad_action("# actions=Up,Down\n0\tSideways\t0.5\n");
  CHECK_THROWS(read_qtable(bad_action));
}

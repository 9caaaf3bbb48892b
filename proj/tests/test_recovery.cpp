#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "healrt/grid.hpp"
#include "healrt/reactive.hpp"
#include "healrt/recovery.hpp"

using namespace healrt;
using namespace healrt::recovery;

namespace {

const std::vector<std::string> kStrip{"Left", "Right"};

// 1 x 3 strip: cells 0, 1, 2; Left/Right clamp.
StateKey strip_step(const StateKey& k, ActionId a) {
  const int c = k[0];
  return StateKey{a == 0 ? std::max(0, c - 1) : std::min(2, c + 1)};
}

}  // namespace

TEST_CASE("single-step strategy on a strip") {
  qlearn::QTable t(kStrip);
  t.set({1}, 1, 1.0);
  const FaultTest fault = [](const StateKey& k) { return k[0] == 1; };
  auto r = extract_strategy(t, {1}, strip_step, fault, {});
  REQUIRE(std::holds_alternative<RecoveryStrategy>(r));
  const auto& s = std::get<RecoveryStrategy>(r);
  CHECK(s.actions == std::vector<ActionId>{1});
  CHECK(s.terminal == StateKey{2});
  CHECK(s.origin == StateKey{1});
}

TEST_CASE("greedy actions pointing at each other form a loop") {
  qlearn::QTable t(kStrip);
  t.set({0}, 1, 1.0);  // 0 -> Right -> 1
  t.set({1}, 0, 1.0);  // 1 -> Left -> 0
  const FaultTest fault = [](const StateKey& k) { return k[0] < 2; };
  auto r = extract_strategy(t, {0}, strip_step, fault, {});
  REQUIRE(std::holds_alternative<ExtractionFailure>(r));
  CHECK(std::get<ExtractionFailure>(r) == ExtractionFailure::Loop);

  // the second-best action at the closing state escapes the cycle
  auto fb = extract_strategy(t, {0}, strip_step, fault, {10, true});
  REQUIRE(std::holds_alternative<RecoveryStrategy>(fb));
  CHECK(std::get<RecoveryStrategy>(fb).actions == std::vector<ActionId>{1, 1});
}

TEST_CASE("a clamped self-loop is a loop") {
  qlearn::QTable t(kStrip);
  const FaultTest fault = [](const StateKey& k) { return k[0] == 0; };
  auto r = extract_strategy(t, {0}, strip_step, fault, {});  // greedy Left at the wall
  CHECK(std::get<ExtractionFailure>(r) == ExtractionFailure::Loop);
}

TEST_CASE("paths longer than the limit fail") {
  // counter model: action 0 increments; valid at 5
  qlearn::QTable t({"inc"});
  const TransitionModel inc = [](const StateKey& k, ActionId) { return StateKey{k[0] + 1}; };
  const FaultTest fault = [](const StateKey& k) { return k[0] < 5; };
  CHECK(std::get<ExtractionFailure>(extract_strategy(t, {0}, inc, fault, {4, false})) == ExtractionFailure::TooLong);
  auto ok = extract_strategy(t, {0}, inc, fault, {5, false});
  REQUIRE(std::holds_alternative<RecoveryStrategy>(ok));
  CHECK(std::get<RecoveryStrategy>(ok).actions.size() == 5);
  CHECK_THROWS_AS(extract_strategy(t, {7}, inc, fault, {}), std::invalid_argument);
}

TEST_CASE("building maps skips valid states and itemizes failures") {
  qlearn::QTable t(kStrip);
  t.set({1}, 1, 1.0);
  const FaultTest fault = [](const StateKey& k) { return k[0] <= 1; };
  const std::vector<StateKey> states{{0}, {1}, {2}};
  auto b = build_strategy_map(t, states, strip_step, fault, {});
  CHECK(b.map.size() == 1);
  REQUIRE(b.failures.size() == 1);
  CHECK(b.failures[0].first == StateKey{0});
  CHECK(b.failures[0].second == ExtractionFailure::Loop);

  auto empty = build_strategy_map(t, std::vector<StateKey>{}, strip_step, fault, {});
  CHECK(empty.map.empty());
  CHECK(empty.failures.empty());
}

TEST_CASE("strategy map and failures text round trip") {
  const auto model = grid::transition_model({});
  StrategyMap m;
  m.insert({{5, 5}, {0, 0, 2}, {4, 3}});
  m.insert({{1, 0}, {3}, {2, 0}});
  std::stringstream ss;
  write_strategy_map(ss, m, grid::move_names());
  CHECK(ss.str() == "1,0\tRight\n5,5\tUp,Up,Left\n");
  CHECK(read_strategy_map(ss, grid::move_names(), model) == m);

  std::ostringstream f;
  const std::vector<std::pair<StateKey, ExtractionFailure>> fails{{{0, 0}, ExtractionFailure::Loop},
                                                                  {{3, 1}, ExtractionFailure::TooLong}};
  write_failures(f, fails);
  CHECK(f.str() == "0,0\tLoop\n3,1\tTooLong\n");
}

TEST_CASE("variation chains call the effector in order and revert") {
  VariationManager mgr;
  std::vector<ActionId> calls;
  grid::GridState pos{5, 5};
  const Effector eff = [&](ActionId a) {
    calls.push_back(a);
    pos = grid::apply_action(pos, static_cast<grid::Move>(a), {});
    return grid::to_key(pos);
  };
  mgr.set_active_variations({{0}, {0}, {2}});
  CHECK(mgr.busy());
  const auto out = mgr.execute_chain({5, 5}, eff);
  CHECK(calls == std::vector<ActionId>{0, 0, 2});
  CHECK(out.terminal == StateKey{4, 3});
  CHECK(out.executed == 3);
  CHECK_FALSE(mgr.busy());
  CHECK(mgr.active().empty());
  CHECK(mgr.chains_run() == 1);
}

TEST_CASE("an empty chain makes no effector calls") {
  VariationManager mgr;
  int calls = 0;
  mgr.set_active_variations({});
  const auto out = mgr.execute_chain({1, 1}, [&](ActionId) {
    ++calls;
    return StateKey{};
  });
  CHECK(calls == 0);
  CHECK(out.terminal == StateKey{1, 1});
  CHECK_FALSE(mgr.busy());
}

TEST_CASE("a throwing effector aborts the chain") {
  VariationManager mgr;
  int calls = 0;
  mgr.set_active_variations({{0}, {1}, {2}});
  const auto out = mgr.execute_chain({0}, [&](ActionId a) -> StateKey {
    ++calls;
    if (a == 1) throw std::runtime_error("effector offline");
    return StateKey{static_cast<int>(a) + 10};
  });
  CHECK(calls == 2);
  CHECK(out.aborted);
  CHECK(out.executed == 1);
  CHECK(out.terminal == StateKey{10});
  CHECK(out.error == "effector offline");
  CHECK_FALSE(mgr.busy());
}

TEST_CASE("healer dispatch") {
  reactive::Engine engine;
  std::vector<StateKey> base_calls;
  std::vector<ActionId> effects;
  Healer healer(
      [&](ActionId a) {
        effects.push_back(a);
        return StateKey{99};
      },
      [&](const StateKey& k) { base_calls.push_back(k); },
      [&](std::function<void()> task) { engine.defer(std::move(task)); });
  StrategyMap m;
  m.insert({{1}, {3, 3}, {99}});
  healer.set_strategies(m);

  SUBCASE("mapped fault runs the chain and skips base") {
    CHECK(healer.take_action(true, {1}) == Dispatch::Recovered);
    CHECK(base_calls.empty());
    CHECK(effects == std::vector<ActionId>{3, 3});
    CHECK(healer.stats().recoveries == 1);
  }
  SUBCASE("unmapped fault falls through to base") {
    CHECK(healer.take_action(true, {2}) == Dispatch::Base);
    CHECK(base_calls == std::vector<StateKey>{{2}});
    CHECK(healer.manager().chains_run() == 0);
  }
  SUBCASE("valid updates never touch the manager") {
    CHECK(healer.take_action(false, {1}) == Dispatch::Base);
    CHECK(base_calls.size() == 1);
    CHECK(healer.manager().chains_run() == 0);
    CHECK(effects.empty());
  }
}

TEST_CASE("faults raised by the chain's own updates are suppressed") {
  reactive::Engine engine;
  auto pos = engine.source(grid::GridState{5, 5});
  std::vector<Dispatch> dispatches;
  Healer* hp = nullptr;
  Healer healer(
      [&](ActionId a) {
        const auto next = grid::apply_action(engine.get(pos), static_cast<grid::Move>(a), {});
        engine.set(pos, next);
        return grid::to_key(next);
      },
      [](const StateKey&) {}, [&](std::function<void()> task) { engine.defer(std::move(task)); });
  hp = &healer;
  StrategyMap m;
  m.insert({{5, 5}, {0, 0, 2}, {4, 3}});
  healer.set_strategies(m);
  engine.observe(pos, [&](const grid::GridState& s) { dispatches.push_back(hp->take_action(true, grid::to_key(s))); });

  engine.set(pos, grid::GridState{5, 5});
  CHECK(engine.get(pos) == grid::GridState{4, 3});
  REQUIRE(dispatches.size() == 4);
  CHECK(dispatches[0] == Dispatch::Recovered);
  for (std::size_t i = 1; i < 4; ++i) CHECK(dispatches[i] == Dispatch::Suppressed);
  CHECK(healer.stats().suppressed == 3);
}

TEST_CASE("extraction terminates on random tables") {
  std::mt19937_64 rng(21);
  const auto model = grid::transition_model({6, 6});
  for (int trial = 0; trial < 300; ++trial) {
    qlearn::QTable t(grid::move_names());
    std::set<StateKey> faults;
    for (int x = 0; x < 6; ++x)
      for (int y = 0; y < 6; ++y) {
        if (rng() % 3) faults.insert({x, y});
        for (ActionId a = 0; a < 4; ++a) t.set({x, y}, a, static_cast<double>(rng() % 1000) / 1000.0);
      }
    const FaultTest fault = [&](const StateKey& k) { return faults.count(k) > 0; };
    for (const auto& s : faults) {
      auto r = extract_strategy(t, s, model, fault, {12, trial % 2 == 0});
      if (auto* ok = std::get_if<RecoveryStrategy>(&r)) {
        CHECK(ok->actions.size() <= 12);
        StateKey cur = s;
        for (ActionId a : ok->actions) cur = model(cur, a);
        CHECK(cur == ok->terminal);
        CHECK_FALSE(fault(cur));
      }
    }
  }
}

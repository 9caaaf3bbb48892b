#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "healrt/reactive.hpp"

using healrt::reactive::CycleError;
using healrt::reactive::Engine;
using healrt::reactive::NodeId;
using healrt::reactive::Signal;
using healrt::reactive::SignalError;

TEST_CASE("source holds its initial value") {
  Engine e;
  auto s = e.source(5);
  CHECK(e.get(s) == 5);
  CHECK_FALSE(e.is_derived(s));
}

TEST_CASE("setting an equal value still notifies once") {
  Engine e;
  auto s = e.source(0);
  int calls = 0;
  e.observe(s, [&](int) { ++calls; });
  e.set(s, 0);
  CHECK(calls == 1);
}

TEST_CASE("independent signals do not notify each other") {
  Engine e;
  auto a = e.source(1);
  auto b = e.source(2);
  int b_calls = 0;
  e.observe(b, [&](int) { ++b_calls; });
  e.set(a, 10);
  e.set(a, 11);
  CHECK(b_calls == 0);
}

TEST_CASE("derived sum tracks its inputs") {
  Engine e;
  auto x = e.source(17);
  auto y = e.source(28);
  auto sum = e.derive([](int a, int b) { return a + b; }, x, y);
  CHECK(e.get(sum) == 45);
  CHECK(e.is_derived(sum));
  e.set(x, 30);
  CHECK(e.get(sum) == 58);
}

TEST_CASE("identity derivation equals the source after every set") {
  Engine e;
  auto s = e.source(std::string("a"));
  auto id = e.derive([](const std::string& v) { return v; }, s);
  for (const char* v : {"b", "", "ccc"}) {
    e.set(s, std::string(v));
    CHECK(e.get(id) == v);
  }
}

TEST_CASE("diamond evaluates the join once per propagation") {
  Engine e;
  auto a = e.source(1);
  auto b = e.derive([](int v) { return v + 1; }, a);
  auto c = e.derive([](int v) { return v * 2; }, a);
  int joins = 0;
  auto d = e.derive(
      [&](int l, int r) {
        ++joins;
        return l + r;
      },
      b, c);
  joins = 0;
  std::vector<int> seen;
  e.observe(d, [&](int v) { seen.push_back(v); });
  e.set(a, 5);
  CHECK(joins == 1);
  CHECK(e.get(d) == 16);
  CHECK(seen == std::vector<int>{16});  // no intermediate (glitched) value
}

TEST_CASE("a signal used twice as an input still recomputes") {
  Engine e;
  auto a = e.source(2);
  int calls = 0;
  auto sq = e.derive(
      [&](int l, int r) {
        ++calls;
        return l * r;
      },
      a, a);
  calls = 0;
  e.set(a, 5);
  CHECK(calls == 1);
  CHECK(e.get(sq) == 25);
}

TEST_CASE("derived signals cannot be set") {
  Engine e;
  auto a = e.source(1);
  auto b = e.derive([](int v) { return v; }, a);
  CHECK_THROWS_AS(e.set(b, 3), SignalError);
}

TEST_CASE("sets from an observer are queued until the propagation ends") {
  Engine e;
  auto a = e.source(0);
  auto b = e.source(0);
  std::vector<std::string> log;
  e.observe(a, [&](int v) {
    log.push_back("a" + std::to_string(v));
    if (v == 1) {
      e.set(b, 7);
      CHECK(e.get(b) == 0);  // not applied yet
      log.push_back("queued");
    }
  });
  e.observe(b, [&](int v) { log.push_back("b" + std::to_string(v)); });
  e.set(a, 1);
  CHECK(log == std::vector<std::string>{"a1", "queued", "b7"});
  CHECK_FALSE(e.propagating());
}

TEST_CASE("queued sets apply in FIFO order") {
  Engine e;
  auto trigger = e.source(0);
  auto s = e.source(0);
  std::vector<int> values;
  e.observe(trigger, [&](int) {
    e.set(s, 1);
    e.set(s, 2);
    e.set(s, 3);
  });
  e.observe(s, [&](int v) { values.push_back(v); });
  e.set(trigger, 1);
  CHECK(values == std::vector<int>{1, 2, 3});
}

TEST_CASE("observers fire once each, in registration order") {
  Engine e;
  auto x = e.source(1);
  auto y = e.source(2);
  auto sum = e.derive([](int a, int b) { return a + b; }, x, y);
  std::vector<std::string> order;
  e.observe(sum, [&](int v) { order.push_back("first:" + std::to_string(v)); });
  e.observe(sum, [&](int v) { order.push_back("second:" + std::to_string(v)); });
  e.set(x, 10);
  CHECK(order == std::vector<std::string>{"first:12", "second:12"});
}

TEST_CASE("observers registered after a set are not called retroactively") {
  Engine e;
  auto x = e.source(1);
  e.set(x, 2);
  int calls = 0;
  e.observe(x, [&](int) { ++calls; });
  CHECK(calls == 0);
  e.set(x, 3);
  CHECK(calls == 1);
}

TEST_CASE("observe_any fires once even when several targets change") {
  Engine e;
  auto a = e.source(1);
  auto b = e.derive([](int v) { return v + 1; }, a);
  auto c = e.derive([](int v) { return v + 2; }, a);
  int calls = 0;
  const NodeId ids[] = {b.id(), c.id()};
  e.observe_any(ids, [&] { ++calls; });
  e.set(a, 3);
  CHECK(calls == 1);
}

TEST_CASE("unobserve is idempotent and stops notifications") {
  Engine e;
  auto a = e.source(1);
  int calls = 0;
  auto id = e.observe(a, [&](int) { ++calls; });
  e.set(a, 2);
  e.unobserve(id);
  e.unobserve(id);
  e.set(a, 3);
  CHECK(calls == 1);
  CHECK(e.observer_count() == 0);
}

TEST_CASE("an observer removed by an earlier observer in the same propagation is skipped") {
  Engine e;
  auto a = e.source(1);
  int second_calls = 0;
  healrt::reactive::ObserverId second{};
  e.observe(a, [&](int) { e.unobserve(second); });
  second = e.observe(a, [&](int) { ++second_calls; });
  e.set(a, 2);
  CHECK(second_calls == 0);
}

TEST_CASE("defer runs after the propagation, or at once when idle") {
  Engine e;
  auto a = e.source(0);
  std::vector<std::string> log;
  e.observe(a, [&](int) {
    e.defer([&] { log.push_back("deferred"); });
    log.push_back("observer");
  });
  e.set(a, 1);
  CHECK(log == std::vector<std::string>{"observer", "deferred"});
  bool ran = false;
  e.defer([&] { ran = true; });
  CHECK(ran);
}

TEST_CASE("redefine rewires inputs and rejects cycles") {
  Engine e;
  auto a = e.source(1);
  auto b = e.derive([](int v) { return v + 1; }, a);
  auto c = e.derive([](int v) { return v * 10; }, b);
  CHECK(e.get(c) == 20);

  auto z = e.source(100);
  e.redefine(b, [](int v) { return v + 2; }, z);
  CHECK(e.get(b) == 102);
  CHECK(e.get(c) == 1020);
  e.set(a, 5);  // no longer an input
  CHECK(e.get(b) == 102);

  CHECK_THROWS_AS(e.redefine(b, [](int v) { return v; }, c), CycleError);
  CHECK_THROWS_AS(e.redefine(b, [](int v) { return v; }, b), CycleError);
  e.set(z, 0);  // unchanged definition after the rejected rewire
  CHECK(e.get(b) == 2);
  CHECK(e.get(c) == 20);
}

TEST_CASE("derive_all over a list of inputs") {
  Engine e;
  std::vector<Signal<int>> inputs;
  for (int i = 1; i <= 4; ++i) inputs.push_back(e.source(i));
  auto total = e.derive_all(std::span<const Signal<int>>(inputs), [](std::span<const int> v) {
    int s = 0;
    for (int x : v) s += x;
    return s;
  });
  CHECK(e.get(total) == 10);
  e.set(inputs[2], 30);
  CHECK(e.get(total) == 37);
}

TEST_CASE("identical operation sequences give identical traces") {
  auto trace = [] {
    Engine e;
    auto a = e.source(0);
    auto b = e.source(0);
    auto s = e.derive([](int x, int y) { return x * 3 + y; }, a, b);
    std::vector<int> out;
    e.observe(s, [&](int v) { out.push_back(v); });
    std::mt19937 rng(42);
    for (int i = 0; i < 200; ++i) e.set(i % 2 ? a : b, static_cast<int>(rng() % 100));
    return out;
  };
  CHECK(trace() == trace());
}

TEST_CASE("random DAGs evaluate exactly the affected derived nodes once") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Engine e;
    std::vector<Signal<long>> nodes;
    std::vector<bool> affected;
    std::vector<int> calls;
    const int sources = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < sources; ++i) {
      nodes.push_back(e.source(static_cast<long>(i)));
      affected.push_back(i == 0);
    }
    const int derived = 2 + static_cast<int>(rng() % 12);
    calls.assign(static_cast<std::size_t>(derived), 0);
    for (int d = 0; d < derived; ++d) {
      const auto l = rng() % nodes.size(), r = rng() % nodes.size();
      affected.push_back(affected[l] || affected[r]);
      nodes.push_back(e.derive(
          [&calls, d](long x, long y) {
            ++calls[static_cast<std::size_t>(d)];
            return x + y + 1;
          },
          nodes[l], nodes[r]));
    }
    std::fill(calls.begin(), calls.end(), 0);
    e.set(nodes[0], 100L);
    for (int d = 0; d < derived; ++d) {
      CHECK(calls[static_cast<std::size_t>(d)] == (affected[static_cast<std::size_t>(sources + d)] ? 1 : 0));
    }
  }
}

#include "healrt/reactive.hpp"

#include <algorithm>
#include <queue>
#include <unordered_set>

namespace healrt::reactive {

namespace {

struct FlagGuard {
  bool& flag;
  explicit FlagGuard(bool& f) : flag(f) { flag = true; }
  ~FlagGuard() { flag = false; }
};

}  // namespace

NodeId Engine::add_node(std::any initial, bool derived, std::vector<NodeId> inputs, Compute compute) {
  for (auto in : inputs) check_node(in);
  const NodeId id{static_cast<std::uint32_t>(nodes_.size())};
  Node node;
  node.value = std::move(initial);
  node.derived = derived;
  node.inputs = inputs;
  node.compute = std::move(compute);
  nodes_.push_back(std::move(node));
  for (auto in : inputs) {
    auto& deps = nodes_[in.value].dependents;
    if (std::find(deps.begin(), deps.end(), id) == deps.end()) deps.push_back(id);
  }
  return id;
}

void Engine::check_node(NodeId id) const {
  if (id.value >= nodes_.size()) throw SignalError("unknown signal");
}

bool Engine::is_derived(NodeId id) const {
  check_node(id);
  return nodes_[id.value].derived;
}

void Engine::rewire(NodeId target, std::vector<NodeId> inputs, Compute compute) {
  check_node(target);
  if (!nodes_[target.value].derived) throw SignalError("cannot redefine a source signal");
  for (auto in : inputs) check_node(in);

  // The new edges in -> target close a cycle iff some input is target itself
  // or is reachable from target along dependent edges.
  std::unordered_set<std::uint32_t> wanted;
  for (auto in : inputs) wanted.insert(in.value);
  std::vector<NodeId> stack{target};
  std::unordered_set<std::uint32_t> seen{target.value};
  while (!stack.empty()) {
    const NodeId n = stack.back();
    stack.pop_back();
    if (wanted.count(n.value)) throw CycleError("derivation would create a cycle");
    for (auto d : nodes_[n.value].dependents) {
      if (seen.insert(d.value).second) stack.push_back(d);
    }
  }

  auto& node = nodes_[target.value];
  for (auto old : node.inputs) {
    auto& deps = nodes_[old.value].dependents;
    deps.erase(std::remove(deps.begin(), deps.end(), target), deps.end());
  }
  node.inputs = inputs;
  node.compute = std::move(compute);
  for (auto in : inputs) {
    auto& deps = nodes_[in.value].dependents;
    if (std::find(deps.begin(), deps.end(), target) == deps.end()) deps.push_back(target);
  }

  if (propagating_) {
    pending_.emplace_back([this, target] { propagate_from(target, true); });
    return;
  }
  propagate_from(target, true);
  drain();
}

ObserverId Engine::observe_any(std::span<const NodeId> signals, std::function<void()> callback) {
  if (signals.empty()) throw SignalError("observer needs at least one signal");
  for (auto s : signals) check_node(s);
  const ObserverId id{next_observer_++};
  Observer obs;
  obs.callback = std::move(callback);
  for (auto s : signals) {
    if (std::find(obs.targets.begin(), obs.targets.end(), s) != obs.targets.end()) continue;
    obs.targets.push_back(s);
    nodes_[s.value].observers.push_back(id);
  }
  observers_.emplace(id.value, std::move(obs));
  return id;
}

void Engine::unobserve(ObserverId id) {
  auto it = observers_.find(id.value);
  if (it == observers_.end()) return;
  for (auto s : it->second.targets) {
    auto& list = nodes_[s.value].observers;
    list.erase(std::remove(list.begin(), list.end(), id), list.end());
  }
  observers_.erase(it);
}

void Engine::defer(std::function<void()> task) {
  if (propagating_ || draining_) {
    pending_.push_back(std::move(task));
    return;
  }
  task();
  drain();
}

void Engine::assign_and_propagate(NodeId source, std::any value) {
  nodes_[source.value].value = std::move(value);
  propagate_from(source, false);
  drain();
}

std::vector<NodeId> Engine::topo_order_from(NodeId root) const {
  // Reachable subgraph, then Kahn's algorithm restricted to it. Ready nodes
  // are taken in id order so the schedule is deterministic.
  std::unordered_set<std::uint32_t> reach{root.value};
  std::vector<NodeId> stack{root};
  while (!stack.empty()) {
    const NodeId n = stack.back();
    stack.pop_back();
    for (auto d : nodes_[n.value].dependents) {
      if (reach.insert(d.value).second) stack.push_back(d);
    }
  }

  std::unordered_map<std::uint32_t, std::size_t> indegree;
  for (auto v : reach) {
    if (v == root.value) continue;
    // distinct inputs: dependents lists hold each edge once even when a node
    // takes the same signal twice
    std::unordered_set<std::uint32_t> ins;
    for (auto in : nodes_[v].inputs) {
      if (reach.count(in.value)) ins.insert(in.value);
    }
    indegree[v] = ins.size();
  }

  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> ready;
  ready.push(root.value);
  std::vector<NodeId> order;
  order.reserve(reach.size());
  while (!ready.empty()) {
    const auto v = ready.top();
    ready.pop();
    order.push_back(NodeId{v});
    for (auto d : nodes_[v].dependents) {
      if (--indegree[d.value] == 0) ready.push(d.value);
    }
  }
  return order;
}

void Engine::propagate_from(NodeId root, bool recompute_root) {
  const auto order = topo_order_from(root);
  {
    FlagGuard guard(propagating_);
    ++propagations_;
    for (auto id : order) {
      if (id == root && !recompute_root) continue;
      auto& node = nodes_[id.value];
      node.value = node.compute(*this);
    }

    // Observers of updated signals, in topological order of their signals and
    // registration order within a signal; each observer at most once.
    std::vector<ObserverId> to_call;
    std::unordered_set<std::uint64_t> queued;
    for (auto id : order) {
      for (auto obs : nodes_[id.value].observers) {
        if (queued.insert(obs.value).second) to_call.push_back(obs);
      }
    }
    for (auto obs : to_call) {
      auto it = observers_.find(obs.value);
      if (it == observers_.end()) continue;  // removed by an earlier callback
      auto cb = it->second.callback;         // callback may unobserve itself
      cb();
    }
  }
}

void Engine::drain() {
  if (draining_) return;
  FlagGuard guard(draining_);
  while (!pending_.empty()) {
    auto task = std::move(pending_.front());
    pending_.pop_front();
    task();
  }
}

}  // namespace healrt::reactive

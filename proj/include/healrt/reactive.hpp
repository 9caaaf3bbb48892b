#pragma once

/*
 * Minimal synchronous reactive value system.
 *
 * An Engine owns a graph of signals. Source signals are set from outside;
 * derived signals recompute from their inputs. A set runs one propagation:
 * every transitive dependent is recomputed exactly once in topological order,
 * then observers of every updated signal are called. Sets issued while a
 * propagation is running are queued and applied, in order, once it finishes.
 *
 * Observers fire on every set, including sets to an equal value.
 *
 * An Engine is confined to a single thread.
 */

#include <any>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

namespace healrt::reactive {

struct NodeId {
  std::uint32_t value = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

struct ObserverId {
  std::uint64_t value = 0;
  friend bool operator==(ObserverId, ObserverId) = default;
};

class SignalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class CycleError : public SignalError {
 public:
  using SignalError::SignalError;
};

/// Typed handle to a signal owned by an Engine. Cheap to copy.
template <class T>
class Signal {
 public:
  Signal() = default;
  NodeId id() const noexcept { return id_; }
  operator NodeId() const noexcept { return id_; }

 private:
  friend class Engine;
  explicit Signal(NodeId id) : id_(id) {}
  NodeId id_{};
};

class Engine {
 public:
  Engine() = default;
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  template <class T>
  Signal<std::decay_t<T>> source(T initial) {
    return Signal<std::decay_t<T>>(add_node(std::any(std::decay_t<T>(std::move(initial))), false, {}, {}));
  }

  /// Derived signal computed as f(inputs...).
  template <class F, class... Ts>
  auto derive(F f, Signal<Ts>... inputs) {
    using R = std::decay_t<std::invoke_result_t<F&, const Ts&...>>;
    auto compute = make_compute<R>(std::move(f), inputs...);
    std::any initial(compute_value<R>(compute));
    return Signal<R>(add_node(std::move(initial), true, {inputs.id()...}, std::move(compute)));
  }

  /// Derived signal over a homogeneous list of inputs; f receives their values in order.
  template <class T, class F>
  auto derive_all(std::span<const Signal<T>> inputs, F f) {
    using R = std::decay_t<std::invoke_result_t<F&, std::span<const T>>>;
    auto compute = make_list_compute<R, T>(std::move(f), {inputs.begin(), inputs.end()});
    std::vector<NodeId> ids;
    for (const auto& s : inputs) ids.push_back(s.id());
    std::any initial(compute_value<R>(compute));
    return Signal<R>(add_node(std::move(initial), true, std::move(ids), std::move(compute)));
  }

  /// Replaces the inputs and function of an existing derived signal.
  /// Throws CycleError if the new inputs would make the graph cyclic; the
  /// signal is left unchanged in that case.
  template <class R, class F, class... Ts>
  void redefine(Signal<R> target, F f, Signal<Ts>... inputs) {
    static_assert(std::is_convertible_v<std::invoke_result_t<F&, const Ts&...>, R>);
    rewire(target.id(), {inputs.id()...}, make_compute<R>(std::move(f), inputs...));
  }

  template <class T>
  void set(Signal<T> s, std::type_identity_t<T> value) {
    const NodeId id = s.id();
    check_node(id);
    if (nodes_[id.value].derived) throw SignalError("cannot set a derived signal");
    if (propagating_) {
      pending_.emplace_back([this, id, v = std::move(value)]() mutable { assign_and_propagate(id, std::any(std::move(v))); });
      return;
    }
    assign_and_propagate(id, std::any(std::move(value)));
  }

  template <class T>
  const T& get(Signal<T> s) const {
    check_node(s.id());
    return std::any_cast<const T&>(nodes_[s.id().value].value);
  }

  template <class T, class F>
  ObserverId observe(Signal<T> s, F callback) {
    const NodeId id = s.id();
    return observe_any(std::span<const NodeId>(&id, 1),
                       [this, s, cb = std::move(callback)]() mutable { cb(get(s)); });
  }

  /// One callback attached to several signals; called at most once per
  /// propagation, when any of them was updated.
  ObserverId observe_any(std::span<const NodeId> signals, std::function<void()> callback);

  /// Idempotent.
  void unobserve(ObserverId id);

  /// Runs task after the current propagation, or immediately when idle.
  void defer(std::function<void()> task);

  bool propagating() const noexcept { return propagating_; }
  bool is_derived(NodeId id) const;
  std::uint64_t propagations() const noexcept { return propagations_; }
  std::size_t signal_count() const noexcept { return nodes_.size(); }
  std::size_t observer_count() const noexcept { return observers_.size(); }

 private:
  using Compute = std::function<std::any(const Engine&)>;

  struct Node {
    std::any value;
    bool derived = false;
    std::vector<NodeId> inputs;
    std::vector<NodeId> dependents;
    Compute compute;
    std::vector<ObserverId> observers;
  };

  struct Observer {
    std::vector<NodeId> targets;
    std::function<void()> callback;
  };

  template <class R, class F, class... Ts>
  Compute make_compute(F f, Signal<Ts>... inputs) {
    return [f = std::move(f), inputs...](const Engine& e) mutable -> std::any {
      return std::any(R(f(e.get(inputs)...)));
    };
  }

  template <class R, class T, class F>
  Compute make_list_compute(F f, std::vector<Signal<T>> inputs) {
    return [f = std::move(f), inputs = std::move(inputs)](const Engine& e) mutable -> std::any {
      std::vector<T> values;
      values.reserve(inputs.size());
      for (const auto& s : inputs) values.push_back(e.get(s));
      return std::any(R(f(std::span<const T>(values))));
    };
  }

  template <class R>
  R compute_value(Compute& compute) const {
    return std::any_cast<R>(compute(*this));
  }

  NodeId add_node(std::any initial, bool derived, std::vector<NodeId> inputs, Compute compute);
  void rewire(NodeId target, std::vector<NodeId> inputs, Compute compute);
  void check_node(NodeId id) const;
  void assign_and_propagate(NodeId source, std::any value);
  void propagate_from(NodeId root, bool recompute_root);
  std::vector<NodeId> topo_order_from(NodeId root) const;
  void drain();

  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, Observer> observers_;
  std::uint64_t next_observer_ = 1;
  std::deque<std::function<void()>> pending_;
  bool propagating_ = false;
  bool draining_ = false;
  std::uint64_t propagations_ = 0;
};

}  // namespace healrt::reactive

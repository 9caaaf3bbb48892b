#pragma once

// Declarative fault detection over reactive signals.
//
// Polarity: a predicate returning true means the projected state is a FAULT.

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "healrt/reactive.hpp"

namespace healrt::monitoring {

template <class State>
struct Predicate {
  std::string label;
  std::function<bool(const State&)> eval;

  bool operator()(const State& s) const { return eval(s); }
};

enum class RefineMode { Overwrite, Complement };

struct MonitorStats {
  std::string label;
  std::uint64_t evaluations = 0;
  std::uint64_t faults_detected = 0;
};

/// Writes `monitor_label,evaluations,faults_detected` rows (with header).
void write_stats_csv(std::ostream& out, std::span<const MonitorStats> rows);

/// Binds a fault predicate and a state projector to a set of observed signals.
///
/// The projector is evaluated, then the predicate, once per propagation that
/// updates any observable. Monitors only read signals. A monitor registers an
/// engine observer pointing at itself, so it is neither copyable nor movable;
/// it must not outlive its engine.
template <class State>
class Monitor {
 public:
  using Projector = std::function<State()>;
  using FaultHandler = std::function<void(const State&)>;
  using VerdictHandler = std::function<void(const State&, bool fault)>;

  Monitor(reactive::Engine& engine, std::vector<reactive::NodeId> observables, Projector projector,
          Predicate<State> predicate)
      : engine_(engine), projector_(std::move(projector)), predicate_(std::move(predicate)) {
    if (observables.empty()) throw std::invalid_argument("monitor needs at least one observable");
    observer_ = engine_.observe_any(observables, [this] { evaluate(); });
    attached_ = true;
  }

  Monitor(const Monitor&) = delete;
  Monitor& operator=(const Monitor&) = delete;

  ~Monitor() { detach(); }

  void detach() {
    if (attached_) engine_.unobserve(observer_);
    attached_ = false;
  }
  bool attached() const noexcept { return attached_; }

  /// Overwrite replaces the predicate; Complement flags a fault when either
  /// the current or the new predicate does.
  void refine(Predicate<State> p, RefineMode mode) {
    if (mode == RefineMode::Overwrite) {
      predicate_ = std::move(p);
      return;
    }
    Predicate<State> combined;
    combined.label = predicate_.label + "|" + p.label;
    combined.eval = [old = std::move(predicate_.eval), add = std::move(p.eval)](const State& s) {
      // both branches are pure, so evaluation order does not matter
      return old(s) || add(s);
    };
    predicate_ = std::move(combined);
  }

  void on_fault(FaultHandler h) { fault_handlers_.push_back(std::move(h)); }
  void on_verdict(VerdictHandler h) { verdict_handlers_.push_back(std::move(h)); }

  const Predicate<State>& predicate() const noexcept { return predicate_; }
  bool last_verdict() const noexcept { return last_verdict_; }

  MonitorStats stats() const {
    return MonitorStats{predicate_.label, evaluations_, faults_};
  }

 private:
  void evaluate() {
    const State state = projector_();
    const bool fault = predicate_(state);
    ++evaluations_;
    last_verdict_ = fault;
    if (fault) ++faults_;
    // Handlers registered from inside a handler only see later evaluations.
    const std::size_t nv = verdict_handlers_.size();
    for (std::size_t i = 0; i < nv; ++i) verdict_handlers_[i](state, fault);
    if (!fault) return;
    const std::size_t nf = fault_handlers_.size();
    for (std::size_t i = 0; i < nf; ++i) fault_handlers_[i](state);
  }

  reactive::Engine& engine_;
  Projector projector_;
  Predicate<State> predicate_;
  std::vector<FaultHandler> fault_handlers_;
  std::vector<VerdictHandler> verdict_handlers_;
  reactive::ObserverId observer_{};
  bool attached_ = false;
  bool last_verdict_ = false;
  std::uint64_t evaluations_ = 0;
  std::uint64_t faults_ = 0;
};

}  // namespace healrt::monitoring

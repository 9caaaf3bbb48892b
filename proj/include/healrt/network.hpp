#pragma once

// Simplified multi-hop IoT network (DeltaIoT-style) with per-link transmission
// power and traffic distribution, plus the self-healing experiment built on it.
//
// Radio model (all constants in ModelParams, versioned):
//   snr(link, power)   = snr_base + power_gain_db * power
//   measured snr       = snr(link, power) + noise_t       (noise: per-link AR(1))
//   delivery prob.     = sigmoid(slope * measured snr)
//   energy per packet  = energy_base + energy_per_power * power

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "healrt/qlearn.hpp"
#include "healrt/recovery.hpp"
#include "healrt/state_key.hpp"

namespace healrt::network {

inline constexpr int kMaxPower = 15;
inline constexpr int kGateway = 1;

struct Mote {
  int id = 0;
  double battery = 0.0;
  int traffic = 10;         // packets generated per step
  std::vector<int> parents; // outgoing link ids
};

struct Link {
  int id = 0;
  int from = 0;
  int to = 0;
  double snr_base = 0.0;
  int power = -1;         // -1: use the model's initial power
  int distribution = -1;  // percent of the sender's packets; -1: split evenly
};

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Topology {
  std::vector<Mote> motes;  // sorted by id
  std::vector<Link> links;  // sorted by id

  const Mote& mote(int id) const;
  const Link& link(int id) const;
  /// Checks ids, the gateway, parent counts, distribution sums and that the
  /// parent graph is a DAG draining into the gateway. Throws TopologyError.
  void validate() const;
};

/// Line format: `mote <id> battery=<n> [traffic=<n>]` and
/// `link <id> <from>-><to> snr=<f> [power=<n>] [dist=<n>]`; `#` starts a comment.
Topology parse_topology(std::istream& in);
void write_topology(std::ostream& out, const Topology& t);
/// 25 motes, 30 links; the topology shipped as data/deltaiot25.topo.
Topology default_topology();

struct ModelParams {
  int version = 1;
  double slope = 1.0;           // per dB
  double power_gain_db = 1.0;   // SNR gain per power level
  double noise_sd = 2.0;        // stationary SD of the per-link noise, dB
  double noise_rho = 0.9;       // AR(1) coefficient
  double energy_base = 1.0;     // per packet
  double energy_per_power = 0.2;
  double loss_threshold = 0.2;
  double snr_margin_db = 3.0;   // headroom above the loss threshold that counts as "enough"
  int initial_power = 4;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// key=value lines; unknown keys are rejected.
ModelParams parse_model_params(std::istream& in);
void write_model_params(std::ostream& out, const ModelParams& p);

double sigmoid(double x) noexcept;
/// Loss probability of one transmission at the given measured SNR.
double loss_probability(const ModelParams& p, double measured_snr) noexcept;
double link_snr(const ModelParams& p, double snr_base, int power) noexcept;
double energy_per_packet(const ModelParams& p, int power) noexcept;
/// Smallest power whose SNR meets the loss threshold plus the margin under
/// `noise`; kMaxPower + 1 when no power does.
int min_power_for(const ModelParams& p, double snr_base, double noise) noexcept;

struct LinkObservation {
  int link = 0;
  double loss_estimate = 0.0;
  int power = 0;
  int min_power = 0;
  int distribution = 100;
};

struct Thresholds {
  double loss = 0.2;
};

/// Fault iff the link carries traffic and either its estimated loss exceeds the
/// threshold (strictly) or its power is above the minimum meeting the margin.
bool analyze_link_settings(const LinkObservation& obs, const Thresholds& t) noexcept;

struct NetMetrics {
  double packet_loss = 0.0;         // lost / generated, this step
  double energy_consumption = 0.0;  // transmission energy, this step
};

struct LinkStep {
  int link = 0;
  int sent = 0;
  int delivered = 0;
  int lost = 0;
  double noise = 0.0;
  double energy = 0.0;
};

struct StepResult {
  NetMetrics metrics;
  int generated = 0;
  int delivered = 0;  // reached the gateway
  int lost = 0;
  std::vector<LinkStep> links;  // by link id order
};

enum class ActionKind { PowerUp, PowerDown, ShiftUp, ShiftDown };

/// Link-relative adaptation. Shift moves 10 points of the sender's traffic
/// onto (ShiftUp) or off (ShiftDown) this link, from/to its sibling link.
struct LinkAction {
  ActionKind kind = ActionKind::PowerUp;
  int link = 0;
  friend bool operator==(const LinkAction&, const LinkAction&) = default;
};

inline constexpr std::size_t kActionCount = 4;
const std::vector<std::string>& action_names();
std::string describe(const LinkAction& a);

class Network {
 public:
  Network(Topology topology, ModelParams params, std::uint64_t seed);

  /// Advances the noise processes and routes one step of traffic.
  StepResult simulate_step();

  LinkObservation observe(int link_id) const;
  /// Applies an adaptation; results are clamped to the legal ranges.
  void apply(const LinkAction& a);

  const Topology& topology() const noexcept { return topo_; }
  const ModelParams& params() const noexcept { return params_; }
  const Link& link(int id) const { return topo_.link(id); }
  double noise(int link_id) const;
  /// Overrides a link's current noise; for tests.
  void set_noise(int link_id, double noise);
  std::uint64_t step_index() const noexcept { return step_; }
  double battery(int mote_id) const;
  /// Sibling link (other parent of the same sender), if any.
  std::optional<int> sibling(int link_id) const;

 private:
  std::size_t link_index(int id) const;
  std::uint64_t packet_seed(int link_id) const;

  Topology topo_;
  ModelParams params_;
  std::uint64_t seed_;
  std::uint64_t step_ = 0;
  std::vector<double> noise_;
  std::vector<std::mt19937_64> noise_rng_;
  std::vector<int> send_order_;  // mote ids, farthest from the gateway first
  std::map<int, double> battery_;
  bool noise_primed_ = false;
};

/// Sends `sent` packets over a link and returns how many arrive. Each packet
/// consumes one uniform draw from `rng`, so for a fixed rng state delivery is
/// monotone in the measured SNR.
int deliver(const ModelParams& p, double measured_snr, int sent, std::mt19937_64& rng);

/// Predefined controller: PowerUp on high loss (shifting traffic to the
/// sibling when power is maxed and the sibling is better), PowerDown when the
/// margin is exceeded, otherwise shift toward the lower-loss parent. Returns
/// nothing when no rule applies (e.g. both parents have equal loss).
std::optional<LinkAction> baseline_adaptation(const Network& net, const LinkObservation& obs, const Thresholds& t);

// ---------------------------------------------------------------------------
// Learning state space

/// Bucket b holds losses in (b/10, (b+1)/10]; bucket 0 also holds 0.
int loss_bucket(double loss) noexcept;
/// 1 at maximum power, -1 at zero power, 0 otherwise.
int power_limit(int power) noexcept;
/// (loss bucket, power - min_power, power_limit(power)). The link id is left
/// out so experience on one link carries over to the others.
StateKey to_key(const LinkObservation& obs);
/// Deterministic key-level dynamics used for strategy extraction: power steps
/// move the headroom by one and re-estimate the loss bucket; shifts and steps
/// against a power limit leave the key unchanged.
recovery::TransitionModel key_model(const ModelParams& p);
recovery::FaultTest key_fault_test(const Thresholds& t);

ActionKind to_kind(ActionId a);
ActionId to_action_id(ActionKind k);

// ---------------------------------------------------------------------------
// Experiment

/// Supplies corrective actions while the agent is learning.
class Teacher {
 public:
  virtual ~Teacher() = default;
  virtual std::optional<ActionKind> choose(const Network& net, const LinkObservation& obs) = 0;
};

class ScriptedTeacher final : public Teacher {
 public:
  explicit ScriptedTeacher(Thresholds t) : t_(t) {}
  std::optional<ActionKind> choose(const Network& net, const LinkObservation& obs) override;

 private:
  Thresholds t_;
};

/// Prompts on `out` and reads an action number or name from `in`; an empty
/// line or EOF skips the event.
class InteractiveTeacher final : public Teacher {
 public:
  InteractiveTeacher(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  std::optional<ActionKind> choose(const Network& net, const LinkObservation& obs) override;

 private:
  std::istream& in_;
  std::ostream& out_;
};

enum class Controller { Learned, Baseline };

struct NetworkConfig {
  std::uint64_t train_steps = 96;
  std::uint64_t eval_steps = 54;
  std::uint64_t seed = 1;
  Controller controller = Controller::Learned;
  Topology topology = default_topology();
  ModelParams params{};
  qlearn::AgentConfig agent{};
  std::size_t max_strategy_len = 10;
  bool fallback_second_best = false;
};

struct StepRecord {
  std::uint64_t step = 0;
  double packet_loss = 0.0;
  double energy_consumption = 0.0;
  std::uint64_t events = 0;
  std::uint64_t recoveries = 0;
  bool training = false;
};

struct NetworkReport {
  std::vector<StepRecord> series;
  std::uint64_t total_events = 0;
  std::uint64_t adaptations = 0;        // actions or chains applied
  std::uint64_t correct_strategies = 0; // adaptations whose link was valid at its next evaluation
  std::uint64_t strategies_built = 0;
  std::uint64_t extraction_failures = 0;
  std::uint64_t packets_generated = 0;
  std::uint64_t packets_delivered = 0;
  std::uint64_t packets_lost = 0;
  double train_mean_loss = 0.0;
  double eval_mean_loss = 0.0;
  double train_mean_energy = 0.0;
  double eval_mean_energy = 0.0;

  double correct_ratio() const noexcept {
    return total_events ? static_cast<double>(correct_strategies) / static_cast<double>(total_events) : 0.0;
  }
};

struct NetworkArtifacts {
  std::optional<qlearn::QTable> table;
  recovery::BuildResult build;
};

/// Learned controller: during training every monitor trigger asks the teacher
/// for an action and the agent learns from the link's next evaluation
/// (reward 1 iff it is no longer faulty); afterwards the extracted strategy map
/// acts alone. Baseline controller: baseline_adaptation on every trigger.
/// `teacher` may be null for the baseline controller.
NetworkReport run_network_experiment(const NetworkConfig& cfg, Teacher* teacher, NetworkArtifacts* artifacts = nullptr);

/// `step,packet_loss,energy_consumption,events,recoveries`
void write_metrics_csv(std::ostream& out, const NetworkReport& r);

}  // namespace healrt::network

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

#include "healrt/network.hpp"

namespace healrt::network {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

/// Measured SNR at which the loss probability equals the threshold.
double threshold_snr(const ModelParams& p) { return logit(1.0 - p.loss_threshold) / p.slope; }

}  // namespace

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

double loss_probability(const ModelParams& p, double measured_snr) noexcept {
  return 1.0 - sigmoid(p.slope * measured_snr);
}

double link_snr(const ModelParams& p, double snr_base, int power) noexcept {
  return snr_base + p.power_gain_db * power;
}

double energy_per_packet(const ModelParams& p, int power) noexcept {
  return p.energy_base + p.energy_per_power * power;
}

int min_power_for(const ModelParams& p, double snr_base, double noise) noexcept {
  const double target = threshold_snr(p) + p.snr_margin_db;
  for (int power = 0; power <= kMaxPower; ++power) {
    if (link_snr(p, snr_base, power) + noise >= target) return power;
  }
  return kMaxPower + 1;
}

bool analyze_link_settings(const LinkObservation& obs, const Thresholds& t) noexcept {
  if (obs.distribution <= 0) return false;
  return obs.loss_estimate > t.loss || obs.power > obs.min_power;
}

int deliver(const ModelParams& p, double measured_snr, int sent, std::mt19937_64& rng) {
  const double success = sigmoid(p.slope * measured_snr);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int delivered = 0;
  for (int i = 0; i < sent; ++i) {
    if (u(rng) < success) ++delivered;
  }
  return delivered;
}

const std::vector<std::string>& action_names() {
  static const std::vector<std::string> names{"PowerUp", "PowerDown", "ShiftUp", "ShiftDown"};
  return names;
}

std::string describe(const LinkAction& a) {
  return action_names()[to_action_id(a.kind)] + "(" + std::to_string(a.link) + ")";
}

ActionKind to_kind(ActionId a) {
  if (a >= kActionCount) throw std::out_of_range("network action id out of range");
  return static_cast<ActionKind>(a);
}

ActionId to_action_id(ActionKind k) { return static_cast<ActionId>(k); }

Network::Network(Topology topology, ModelParams params, std::uint64_t seed)
    : topo_(std::move(topology)), params_(params), seed_(seed) {
  topo_.validate();
  for (auto& l : topo_.links) {
    if (l.power < 0) l.power = params_.initial_power;
  }
  for (const auto& m : topo_.motes) {
    if (m.parents.empty()) continue;
    int assigned = 0;
    std::vector<std::size_t> unset;
    for (int lid : m.parents) {
      auto& l = topo_.links[link_index(lid)];
      if (l.distribution < 0) unset.push_back(link_index(lid));
      else assigned += l.distribution;
    }
    if (unset.empty()) continue;
    const int rest = 100 - assigned;
    if (rest < 0) throw TopologyError("invalid distribution sum on mote " + std::to_string(m.id));
    const int share = rest / static_cast<int>(unset.size());
    for (std::size_t i = 0; i < unset.size(); ++i) {
      topo_.links[unset[i]].distribution = share + (i == 0 ? rest - share * static_cast<int>(unset.size()) : 0);
    }
  }

  // Farthest-first send order: a mote forwards only after all its children.
  std::map<int, int> depth;
  std::function<int(int)> hops = [&](int id) -> int {
    if (auto it = depth.find(id); it != depth.end()) return it->second;
    int d = 0;
    for (int lid : topo_.mote(id).parents) d = std::max(d, 1 + hops(topo_.link(lid).to));
    depth[id] = d;
    return d;
  };
  for (const auto& m : topo_.motes) {
    hops(m.id);
    if (m.id != kGateway) send_order_.push_back(m.id);
    battery_[m.id] = m.battery;
  }
  std::stable_sort(send_order_.begin(), send_order_.end(), [&](int a, int b) { return depth[a] > depth[b]; });

  noise_.assign(topo_.links.size(), 0.0);
  for (const auto& l : topo_.links) {
    noise_rng_.emplace_back(splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(l.id))));
  }
}

std::size_t Network::link_index(int id) const {
  auto it = std::lower_bound(topo_.links.begin(), topo_.links.end(), id, [](const Link& l, int v) { return l.id < v; });
  if (it == topo_.links.end() || it->id != id) throw TopologyError("unknown link " + std::to_string(id));
  return static_cast<std::size_t>(it - topo_.links.begin());
}

std::uint64_t Network::packet_seed(int link_id) const {
  return splitmix64(seed_ * 0x100000001B3ULL ^ splitmix64(step_ * 4099 + static_cast<std::uint64_t>(link_id)));
}

double Network::noise(int link_id) const { return noise_[link_index(link_id)]; }

void Network::set_noise(int link_id, double v) {
  noise_[link_index(link_id)] = v;
  noise_primed_ = true;
}

double Network::battery(int mote_id) const {
  auto it = battery_.find(mote_id);
  if (it == battery_.end()) throw TopologyError("unknown mote " + std::to_string(mote_id));
  return it->second;
}

std::optional<int> Network::sibling(int link_id) const {
  const auto& l = topo_.link(link_id);
  for (int other : topo_.mote(l.from).parents) {
    if (other != link_id) return other;
  }
  return std::nullopt;
}

StepResult Network::simulate_step() {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double innovation = params_.noise_sd * std::sqrt(1.0 - params_.noise_rho * params_.noise_rho);
  for (std::size_t i = 0; i < noise_.size(); ++i) {
    const double z = gauss(noise_rng_[i]);
    noise_[i] = noise_primed_ ? params_.noise_rho * noise_[i] + innovation * z : params_.noise_sd * z;
  }
  noise_primed_ = true;

  StepResult result;
  result.links.resize(topo_.links.size());
  for (std::size_t i = 0; i < topo_.links.size(); ++i) {
    result.links[i].link = topo_.links[i].id;
    result.links[i].noise = noise_[i];
  }

  std::map<int, int> inflow;
  for (int mote_id : send_order_) {
    const Mote& m = topo_.mote(mote_id);
    result.generated += m.traffic;
    const int total = m.traffic + inflow[mote_id];

    // Integer split by distribution; leftover packets go one each to the
    // parents that carry traffic, in link order.
    std::vector<int> share(m.parents.size(), 0);
    int given = 0;
    for (std::size_t j = 0; j < m.parents.size(); ++j) {
      share[j] = total * topo_.links[link_index(m.parents[j])].distribution / 100;
      given += share[j];
    }
    for (std::size_t j = 0; given < total; j = (j + 1) % m.parents.size()) {
      if (topo_.links[link_index(m.parents[j])].distribution > 0) {
        ++share[j];
        ++given;
      }
    }

    for (std::size_t j = 0; j < m.parents.size(); ++j) {
      const std::size_t li = link_index(m.parents[j]);
      const Link& l = topo_.links[li];
      std::mt19937_64 rng(packet_seed(l.id));
      const double snr = link_snr(params_, l.snr_base, l.power) + noise_[li];
      const int delivered = deliver(params_, snr, share[j], rng);
      auto& rec = result.links[li];
      rec.sent = share[j];
      rec.delivered = delivered;
      rec.lost = share[j] - delivered;
      rec.energy = share[j] * energy_per_packet(params_, l.power);
      result.lost += rec.lost;
      result.metrics.energy_consumption += rec.energy;
      battery_[m.id] = std::max(0.0, battery_[m.id] - rec.energy);
      if (l.to == kGateway) result.delivered += delivered;
      else inflow[l.to] += delivered;
    }
  }
  result.metrics.packet_loss = result.generated ? static_cast<double>(result.lost) / result.generated : 0.0;
  ++step_;
  return result;
}

LinkObservation Network::observe(int link_id) const {
  const std::size_t li = link_index(link_id);
  const Link& l = topo_.links[li];
  LinkObservation obs;
  obs.link = l.id;
  obs.power = l.power;
  obs.distribution = l.distribution;
  obs.loss_estimate = loss_probability(params_, link_snr(params_, l.snr_base, l.power) + noise_[li]);
  obs.min_power = min_power_for(params_, l.snr_base, noise_[li]);
  return obs;
}

void Network::apply(const LinkAction& a) {
  Link& l = topo_.links[link_index(a.link)];
  switch (a.kind) {
    case ActionKind::PowerUp: l.power = std::min(kMaxPower, l.power + 1); break;
    case ActionKind::PowerDown: l.power = std::max(0, l.power - 1); break;
    case ActionKind::ShiftUp:
    case ActionKind::ShiftDown: {
      const auto sib = sibling(a.link);
      if (!sib) break;
      Link& other = topo_.links[link_index(*sib)];
      const int want = a.kind == ActionKind::ShiftUp ? 10 : -10;
      // Clamp so that both shares stay in [0, 100] and keep summing to 100.
      const int delta = std::clamp(want, std::max(-l.distribution, other.distribution - 100),
                                   std::min(100 - l.distribution, other.distribution));
      l.distribution += delta;
      other.distribution -= delta;
      break;
    }
  }
}

std::optional<LinkAction> baseline_adaptation(const Network& net, const LinkObservation& obs, const Thresholds& t) {
  const auto sib = net.sibling(obs.link);
  if (obs.loss_estimate > t.loss) {
    if (obs.power < kMaxPower) return LinkAction{ActionKind::PowerUp, obs.link};
    if (sib && obs.distribution > 0 && net.observe(*sib).loss_estimate < obs.loss_estimate) {
      return LinkAction{ActionKind::ShiftDown, obs.link};
    }
    return std::nullopt;
  }
  if (obs.power > obs.min_power) return LinkAction{ActionKind::PowerDown, obs.link};
  if (!sib) return std::nullopt;
  const double other = net.observe(*sib).loss_estimate;
  if (obs.loss_estimate < other && obs.distribution < 100) return LinkAction{ActionKind::ShiftUp, obs.link};
  if (obs.loss_estimate > other && obs.distribution > 0) return LinkAction{ActionKind::ShiftDown, obs.link};
  return std::nullopt;
}

int loss_bucket(double loss) noexcept {
  int b = 0;
  for (int k = 1; k <= 9; ++k) {
    if (loss > k / 10.0) b = k;
  }
  return b;
}

int power_limit(int power) noexcept { return power >= kMaxPower ? 1 : (power <= 0 ? -1 : 0); }

StateKey to_key(const LinkObservation& obs) {
  return StateKey{loss_bucket(obs.loss_estimate), obs.power - obs.min_power, power_limit(obs.power)};
}

recovery::TransitionModel key_model(const ModelParams& p) {
  return [p](const StateKey& k, ActionId a) -> StateKey {
    if (k.size() != 3) throw std::invalid_argument("network key must have three components: " + k.to_string());
    const int bucket = k[0], headroom = k[1], limit = k[2];
    int step = 0;
    switch (to_kind(a)) {
      case ActionKind::PowerUp: step = limit == 1 ? 0 : 1; break;
      case ActionKind::PowerDown: step = limit == -1 ? 0 : -1; break;
      case ActionKind::ShiftUp:
      case ActionKind::ShiftDown: break;
    }
    if (step == 0) return k;
    // Recover the measured SNR from the middle of the loss bucket, then move it
    // by the power step. The absolute power is not part of the key, so a step
    // is assumed to land strictly inside the power range.
    const double mid = bucket == 0 ? 0.05 : std::min(0.95, (bucket + 0.5) / 10.0);
    const double snr = logit(1.0 - mid) / p.slope + p.power_gain_db * step;
    int next_bucket = loss_bucket(loss_probability(p, snr));
    if (headroom + step >= 0) {
      // At or above the margin power the loss is at most the loss at the target SNR.
      next_bucket = std::min(next_bucket, loss_bucket(loss_probability(p, threshold_snr(p) + p.snr_margin_db)));
    }
    return StateKey{next_bucket, headroom + step, 0};
  };
}

recovery::FaultTest key_fault_test(const Thresholds& t) {
  return [t](const StateKey& k) {
    if (k.size() != 3) throw std::invalid_argument("network key must have three components: " + k.to_string());
    // bucket b only holds losses above b/10
    return k[0] / 10.0 >= t.loss || k[1] > 0;
  };
}

}  // namespace healrt::network

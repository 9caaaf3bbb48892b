#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "healrt/network.hpp"

namespace healrt::network {

namespace {

// Shipped as data/deltaiot25.topo.
constexpr std::string_view kDefaultTopology = R"(# 25-mote multi-hop network, mote 1 is the gateway
mote 1 battery=11880
mote 2 battery=11880
mote 3 battery=11880
mote 4 battery=11880
mote 5 battery=11880
mote 6 battery=11880
mote 7 battery=11880
mote 8 battery=11880
mote 9 battery=11880
mote 10 battery=11880
mote 11 battery=11880
mote 12 battery=11880
mote 13 battery=11880
mote 14 battery=11880
mote 15 battery=11880
mote 16 battery=11880
mote 17 battery=11880
mote 18 battery=11880
mote 19 battery=11880
mote 20 battery=11880
mote 21 battery=11880
mote 22 battery=11880
mote 23 battery=11880
mote 24 battery=11880
mote 25 battery=11880
link 1 2->1 snr=-3.0
link 2 3->1 snr=-4.5
link 3 4->1 snr=-2.5
link 4 5->1 snr=-5.0
link 5 6->2 snr=-4.0
link 6 7->2 snr=-6.5
link 7 7->3 snr=-3.5
link 8 8->3 snr=-5.5
link 9 9->4 snr=-4.0
link 10 10->4 snr=-7.0
link 11 10->5 snr=-3.0
link 12 11->5 snr=-4.5
link 13 12->6 snr=-5.0
link 14 13->6 snr=-3.5
link 15 13->7 snr=-8.0
link 16 14->7 snr=-4.0
link 17 15->8 snr=-6.0
link 18 16->8 snr=-2.5
link 19 16->9 snr=-5.5
link 20 17->9 snr=-4.5
link 21 18->10 snr=-3.5
link 22 19->11 snr=-5.0
link 23 20->12 snr=-4.0
link 24 21->13 snr=-6.0
link 25 22->14 snr=-3.0
link 26 22->15 snr=-9.5
link 27 23->16 snr=-4.5
link 28 24->17 snr=-5.0
link 29 24->18 snr=-12.5
link 30 25->19 snr=-4.0
)";

int parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw TopologyError("bad " + what + " '" + s + "'");
  }
  if (used != s.size()) throw TopologyError("bad " + what + " '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw TopologyError("bad " + what + " '" + s + "'");
  }
  if (used != s.size()) throw TopologyError("bad " + what + " '" + s + "'");
  return v;
}

std::pair<std::string, std::string> split_kv(const std::string& token) {
  const auto eq = token.find('=');
  if (eq == std::string::npos) throw TopologyError("expected key=value, got '" + token + "'");
  return {token.substr(0, eq), token.substr(eq + 1)};
}

}  // namespace

const Mote& Topology::mote(int id) const {
  auto it = std::lower_bound(motes.begin(), motes.end(), id, [](const Mote& m, int v) { return m.id < v; });
  if (it == motes.end() || it->id != id) throw TopologyError("unknown mote " + std::to_string(id));
  return *it;
}

const Link& Topology::link(int id) const {
  auto it = std::lower_bound(links.begin(), links.end(), id, [](const Link& l, int v) { return l.id < v; });
  if (it == links.end() || it->id != id) throw TopologyError("unknown link " + std::to_string(id));
  return *it;
}

void Topology::validate() const {
  if (motes.empty()) throw TopologyError("no motes");
  std::set<int> mote_ids;
  for (const auto& m : motes) {
    if (!mote_ids.insert(m.id).second) throw TopologyError("duplicate mote " + std::to_string(m.id));
    if (m.battery < 0) throw TopologyError("negative battery on mote " + std::to_string(m.id));
    if (m.traffic < 0) throw TopologyError("negative traffic on mote " + std::to_string(m.id));
  }
  if (!mote_ids.count(kGateway)) throw TopologyError("gateway mote 1 missing");
  std::set<int> link_ids;
  for (const auto& l : links) {
    if (!link_ids.insert(l.id).second) throw TopologyError("duplicate link " + std::to_string(l.id));
    if (!mote_ids.count(l.from) || !mote_ids.count(l.to)) {
      throw TopologyError("link " + std::to_string(l.id) + " references an unknown mote");
    }
    if (l.from == l.to) throw TopologyError("self link " + std::to_string(l.id));
    if (l.power > kMaxPower) throw TopologyError("power out of range on link " + std::to_string(l.id));
    if (l.distribution > 100) throw TopologyError("distribution out of range on link " + std::to_string(l.id));
  }
  for (const auto& m : motes) {
    if (m.id == kGateway) {
      if (!m.parents.empty()) throw TopologyError("the gateway cannot have parents");
      continue;
    }
    if (m.parents.empty()) throw TopologyError("mote " + std::to_string(m.id) + " has no route");
    int sum = 0;
    bool all_set = true;
    for (int lid : m.parents) {
      const auto& l = link(lid);
      if (l.distribution < 0) all_set = false;
      else sum += l.distribution;
    }
    if (all_set && sum != 100) {
      throw TopologyError("invalid distribution sum " + std::to_string(sum) + " on mote " + std::to_string(m.id));
    }
  }
  // Acyclic, and every mote drains into the gateway.
  std::map<int, int> state;  // 0 new, 1 on stack, 2 done
  std::function<void(int)> visit = [&](int id) {
    auto& st = state[id];
    if (st == 2) return;
    if (st == 1) throw TopologyError("routing cycle through mote " + std::to_string(id));
    st = 1;
    for (int lid : mote(id).parents) visit(link(lid).to);
    state[id] = 2;
  };
  for (const auto& m : motes) visit(m.id);
}

Topology parse_topology(std::istream& in) {
  Topology t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind)) continue;
    try {
      if (kind == "mote") {
        std::string id;
        ss >> id;
        Mote m;
        m.id = parse_int(id, "mote id");
        bool has_battery = false;
        for (std::string tok; ss >> tok;) {
          auto [k, v] = split_kv(tok);
          if (k == "battery") {
            m.battery = parse_double(v, "battery");
            has_battery = true;
          } else if (k == "traffic") {
            m.traffic = parse_int(v, "traffic");
          } else {
            throw TopologyError("unknown mote attribute '" + k + "'");
          }
        }
        if (!has_battery) throw TopologyError("mote without battery=");
        t.motes.push_back(m);
      } else if (kind == "link") {
        std::string id, edge;
        ss >> id >> edge;
        Link l;
        l.id = parse_int(id, "link id");
        const auto arrow = edge.find("->");
        if (arrow == std::string::npos) throw TopologyError("expected <from>-><to>, got '" + edge + "'");
        l.from = parse_int(edge.substr(0, arrow), "mote id");
        l.to = parse_int(edge.substr(arrow + 2), "mote id");
        bool has_snr = false;
        for (std::string tok; ss >> tok;) {
          auto [k, v] = split_kv(tok);
          if (k == "snr") {
            l.snr_base = parse_double(v, "snr");
            has_snr = true;
          } else if (k == "power") {
            l.power = parse_int(v, "power");
          } else if (k == "dist") {
            l.distribution = parse_int(v, "dist");
          } else {
            throw TopologyError("unknown link attribute '" + k + "'");
          }
        }
        if (!has_snr) throw TopologyError("link without snr=");
        t.links.push_back(l);
      } else {
        throw TopologyError("unknown record '" + kind + "'");
      }
    } catch (const TopologyError& e) {
      throw TopologyError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::sort(t.motes.begin(), t.motes.end(), [](const Mote& a, const Mote& b) { return a.id < b.id; });
  std::sort(t.links.begin(), t.links.end(), [](const Link& a, const Link& b) { return a.id < b.id; });
  for (auto& m : t.motes) m.parents.clear();
  for (const auto& l : t.links) {
    auto it = std::find_if(t.motes.begin(), t.motes.end(), [&](const Mote& m) { return m.id == l.from; });
    if (it != t.motes.end()) it->parents.push_back(l.id);
  }
  t.validate();
  return t;
}

void write_topology(std::ostream& out, const Topology& t) {
  for (const auto& m : t.motes) {
    out << "mote " << m.id << " battery=" << m.battery;
    if (m.traffic != 10) out << " traffic=" << m.traffic;
    out << '\n';
  }
  for (const auto& l : t.links) {
    std::ostringstream snr;
    snr << std::fixed << std::setprecision(1) << l.snr_base;
    out << "link " << l.id << ' ' << l.from << "->" << l.to << " snr=" << snr.str();
    if (l.power >= 0) out << " power=" << l.power;
    if (l.distribution >= 0) out << " dist=" << l.distribution;
    out << '\n';
  }
}

Topology default_topology() {
  std::istringstream in{std::string(kDefaultTopology)};
  return parse_topology(in);
}

ModelParams parse_model_params(std::istream& in) {
  ModelParams p;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }), line.end());
    if (line.empty()) continue;
    auto [k, v] = split_kv(line);
    if (k == "version") p.version = parse_int(v, k);
    else if (k == "slope") p.slope = parse_double(v, k);
    else if (k == "power_gain_db") p.power_gain_db = parse_double(v, k);
    else if (k == "noise_sd") p.noise_sd = parse_double(v, k);
    else if (k == "noise_rho") p.noise_rho = parse_double(v, k);
    else if (k == "energy_base") p.energy_base = parse_double(v, k);
    else if (k == "energy_per_power") p.energy_per_power = parse_double(v, k);
    else if (k == "loss_threshold") p.loss_threshold = parse_double(v, k);
    else if (k == "snr_margin_db") p.snr_margin_db = parse_double(v, k);
    else if (k == "initial_power") p.initial_power = parse_int(v, k);
    else throw TopologyError("unknown model parameter '" + k + "'");
  }
  if (p.version != 1) throw TopologyError("unsupported model-params version " + std::to_string(p.version));
  if (p.slope <= 0 || p.power_gain_db <= 0) throw TopologyError("slope and power_gain_db must be positive");
  if (p.noise_sd < 0 || p.noise_rho < 0 || p.noise_rho >= 1) throw TopologyError("bad noise parameters");
  if (p.energy_base < 0 || p.energy_per_power < 0) throw TopologyError("energy costs must be non-negative");
  if (!(p.loss_threshold > 0 && p.loss_threshold < 1)) throw TopologyError("loss_threshold must be in (0, 1)");
  if (p.initial_power < 0 || p.initial_power > kMaxPower) throw TopologyError("initial_power out of range");
  return p;
}

void write_model_params(std::ostream& out, const ModelParams& p) {
  // Shortest representation that reads back to the same double.
  auto num = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  out << "version=" << p.version << '\n'
      << "slope=" << num(p.slope) << '\n'
      << "power_gain_db=" << num(p.power_gain_db) << '\n'
      << "noise_sd=" << num(p.noise_sd) << '\n'
      << "noise_rho=" << num(p.noise_rho) << '\n'
      << "energy_base=" << num(p.energy_base) << '\n'
      << "energy_per_power=" << num(p.energy_per_power) << '\n'
      << "loss_threshold=" << num(p.loss_threshold) << '\n'
      << "snr_margin_db=" << num(p.snr_margin_db) << '\n'
      << "initial_power=" << p.initial_power << '\n';
}

}  // namespace healrt::network

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "healrt/cli.hpp"

namespace healrt::cli {

namespace fs = std::filesystem;

namespace {

const std::string kGridHeader =
    "predicate,seed,steps,faults_detected,fault_proportion,correct_strategies,healing_effectiveness";
const std::string kMetricsHeader = "step,packet_loss,energy_consumption,events,recoveries";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  return out;
}

struct GridRow {
  std::string source;
  std::string seed;
  double proportion = 0;
  double effectiveness = 0;
};

struct MetricsFile {
  std::string name;
  std::vector<double> loss;
  std::vector<double> energy;
  double events = 0;
  double recoveries = 0;
};

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double to_double(const std::string& s, const fs::path& file) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw std::runtime_error(file.string() + ": bad number '" + s + "'");
}

}  // namespace

int cmd_report(const fs::path& dir, bool svg, std::ostream& out, std::ostream& err) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    err << "error: " << dir.string() << " is not a directory\n";
    return kExitUsage;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::map<std::string, std::vector<GridRow>> grid;  // by predicate
  std::vector<MetricsFile> metrics;
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string header;
    if (!std::getline(in, header)) continue;
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const std::string name = fs::relative(file, dir).generic_string();
    if (header == kGridHeader) {
      for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto c = split(line);
        if (c.size() != 7) throw std::runtime_error(name + ": expected 7 columns");
        grid[c[0]].push_back(GridRow{name, c[1], to_double(c[4], file), to_double(c[6], file)});
      }
    } else if (header == kMetricsHeader) {
      MetricsFile m;
      m.name = fs::path(name).replace_extension().generic_string();
      for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto c = split(line);
        if (c.size() != 5) throw std::runtime_error(name + ": expected 5 columns");
        m.loss.push_back(to_double(c[1], file));
        m.energy.push_back(to_double(c[2], file));
        m.events += to_double(c[3], file);
        m.recoveries += to_double(c[4], file);
      }
      metrics.push_back(std::move(m));
    }
  }
  if (grid.empty() && metrics.empty()) {
    err << "error: no result CSVs under " << dir.string() << '\n';
    return kExitUsage;
  }

  std::ostringstream text;
  char line[256];
  for (const auto& [pred, rows] : grid) {
    std::vector<double> prop, eff;
    for (const auto& r : rows) {
      prop.push_back(r.proportion);
      eff.push_back(r.effectiveness);
    }
    std::snprintf(line, sizeof line,
                  "grid %s: %zu runs, fault proportion %.4f (sd %.4f), healing effectiveness %.4f (sd %.4f)\n",
                  pred.c_str(), rows.size(), mean(prop), stddev(prop), mean(eff), stddev(eff));
    text << line;
  }
  for (const auto& m : metrics) {
    std::snprintf(line, sizeof line,
                  "network %s: %zu steps, mean packet loss %.4f, mean energy %.2f, events %.0f, recoveries %.0f\n",
                  m.name.c_str(), m.loss.size(), mean(m.loss), mean(m.energy), m.events, m.recoveries);
    text << line;
  }
  out << text.str();

  if (svg) {
    auto write = [&](const std::string& file, const std::string& body) {
      std::ofstream f(dir / file, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + (dir / file).string());
      f << body;
      out << "wrote " << (dir / file).generic_string() << '\n';
    };
    if (!metrics.empty()) {
      std::vector<Series> loss, energy;
      for (const auto& m : metrics) {
        loss.push_back(Series{m.name, m.loss});
        energy.push_back(Series{m.name, m.energy});
      }
      write("packet_loss.svg", svg_line_chart("Packet loss per step", "step", "packet loss", loss));
      write("energy_consumption.svg", svg_line_chart("Energy consumption per step", "step", "energy", energy));
    }
    if (!grid.empty()) {
      std::vector<Series> eff, prop;
      for (const auto& [pred, rows] : grid) {
        Series e{pred, {}}, p{pred, {}};
        for (const auto& r : rows) {
          e.y.push_back(r.effectiveness);
          p.y.push_back(r.proportion);
        }
        eff.push_back(std::move(e));
        prop.push_back(std::move(p));
      }
      write("healing_effectiveness.svg", svg_line_chart("Healing effectiveness per run", "run", "effectiveness", eff));
      write("fault_proportion.svg", svg_line_chart("Fault proportion per run", "run", "proportion", prop));
    }
  }
  return kExitOk;
}

}  // namespace healrt::cli

#include "healrt/monitoring.hpp"

namespace healrt::monitoring {

void write_stats_csv(std::ostream& out, std::span<const MonitorStats> rows) {
  out << "monitor_label,evaluations,faults_detected\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.evaluations << ',' << r.faults_detected << '\n';
  }
}

}  // namespace healrt::monitoring

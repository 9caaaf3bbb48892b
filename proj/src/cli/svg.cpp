#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "healrt/cli.hpp"

namespace healrt::cli {

namespace {

constexpr double kWidth = 720, kHeight = 400;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  std::size_t n = 0;
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& s : series) {
    n = std::max(n, s.y.size());
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
  }
  lo = std::min(lo, 0.0);
  if (hi <= lo) hi = lo + 1.0;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](std::size_t i) { return kLeft + (n > 1 ? pw * static_cast<double>(i) / static_cast<double>(n - 1) : pw / 2); };
  auto py = [&](double v) { return kTop + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">" << tick(v)
      << "</text>\n";
    o << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(v)) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << num(py(v))
      << "\" stroke=\"#ddd\"/>\n";
  }
  if (n > 0) {
    o << "<text x=\"" << kLeft << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">0</text>\n";
    o << "<text x=\"" << kLeft + pw << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">" << n - 1
      << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(x_label)
    << "</text>\n";
  o << "<text transform=\"translate(16," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < series[k].y.size(); ++i) {
      if (!std::isfinite(series[k].y[i])) continue;
      o << (first ? "" : " ") << num(px(i)) << ',' << num(py(series[k].y[i]));
      first = false;
    }
    o << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(k) + 6;
    o << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kLeft + pw + 34 << "\" y=\"" << ly + 4 << "\">" << escape(series[k].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace healrt::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace healrt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the executable and the tests.
/// Subcommands: grid, network, report.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

/// "1..5" or "1,2,7" (ranges and lists may be mixed: "1..3,9").
/// Throws std::invalid_argument on malformed or empty input.
std::vector<std::uint64_t> parse_seeds(std::string_view text);

/// Flat `key=value` lines; `#` starts a comment. Throws std::runtime_error.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

struct Series {
  std::string name;
  std::vector<double> y;
};

/// Minimal SVG line chart; x is the sample index.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

/// Aggregates every CSV under `dir` into a text summary on `out`; with `svg`,
/// writes one chart per metric next to the inputs. Returns an exit code.
int cmd_report(const std::filesystem::path& dir, bool svg, std::ostream& out, std::ostream& err);

}  // namespace healrt::cli

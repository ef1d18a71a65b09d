#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hzsl {

struct ReportRow {
  std::string method;  // crf-native | lifted:<base> | direct:<base>
  std::string rule;    // decision rule actually applied
  std::optional<int> level;
  double accuracy = 0.0;
  std::optional<double> mean_upl;
  std::optional<double> mean_usd;
  std::size_t count = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct EvalReport {
  std::string task;
  std::string split;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;  // echo of the eval inputs
  std::vector<ReportRow> rows;
  std::optional<double> wall_clock_seconds;   // only when timing requested

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// CSV with "# key=value" header lines:
//   # format: report v1
//   # task=<task>
//   # split=<split>
//   # seed=<seed>
//   # config.<key>=<value>
//   # wall_clock_seconds=<s>         (optional)
//   method,rule,level,accuracy,mean_upl,mean_usd,count
// Empty cells stand for absent values.
void write_report(std::ostream& out, const EvalReport& report);
EvalReport read_report(std::istream& in, const std::string& name);
void save_report(const std::string& path, const EvalReport& report);
EvalReport load_report(const std::string& path);

// Fixed-width text table for terminals.
std::string render_table(const EvalReport& report);

}  // namespace hzsl

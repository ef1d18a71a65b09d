#include "core/report.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "core/error.hpp"
#include "core/text.hpp"

namespace hzsl {

namespace {

constexpr const char* kHeader = "method,rule,level,accuracy,mean_upl,mean_usd,count";

void check_value(const std::string& v, const std::string& what) {
  if (v.find_first_of("\n\r") != std::string::npos) {
    fail(ErrorCode::kInvalidArgument, what + " contains a line break");
  }
}

void check_cell(const std::string& v, const std::string& what) {
  check_value(v, what);
  if (v.find(',') != std::string::npos) {
    fail(ErrorCode::kInvalidArgument, what + " contains a comma");
  }
}

std::string opt(const std::optional<double>& v) {
  return v ? text::format_double(*v) : std::string();
}

}  // namespace

void write_report(std::ostream& out, const EvalReport& r) {
  check_value(r.task, "task");
  check_value(r.split, "split");
  text::write_format_line(out, "report");
  out << "# task=" << r.task << '\n';
  out << "# split=" << r.split << '\n';
  out << "# seed=" << r.seed << '\n';
  for (const auto& [k, v] : r.config) {
    check_value(k, "config key");
    check_value(v, "config value");
    if (k.find('=') != std::string::npos) {
      fail(ErrorCode::kInvalidArgument, "config key contains '='");
    }
    out << "# config." << k << '=' << v << '\n';
  }
  if (r.wall_clock_seconds) {
    out << "# wall_clock_seconds=" << text::format_double(*r.wall_clock_seconds)
        << '\n';
  }
  out << kHeader << '\n';
  for (const auto& row : r.rows) {
    check_cell(row.method, "method");
    check_cell(row.rule, "rule");
    out << row.method << ',' << row.rule << ','
        << (row.level ? std::to_string(*row.level) : "") << ','
        << text::format_double(row.accuracy) << ',' << opt(row.mean_upl) << ','
        << opt(row.mean_usd) << ',' << row.count << '\n';
  }
}

EvalReport read_report(std::istream& in, const std::string& name) {
  EvalReport r;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  auto bad = [&](const std::string& msg) {
    fail(ErrorCode::kParse, text::where(name, line_no) + ": " + msg);
  };
  auto number = [&](std::string_view tok) -> std::optional<double> {
    if (tok.empty()) return std::nullopt;
    auto v = text::parse_double(tok);
    if (!v) bad("bad number '" + std::string(tok) + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 &&
        text::check_format_line(line, "report", text::where(name, line_no))) {
      continue;
    }
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto body = line.substr(2);
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;  // free comment
      const auto key = body.substr(0, eq);
      const auto value = body.substr(eq + 1);
      if (key == "task") {
        r.task = value;
      } else if (key == "split") {
        r.split = value;
      } else if (key == "seed") {
        auto v = text::parse_int(value);
        if (!v || *v < 0) bad("bad seed");
        r.seed = static_cast<std::uint64_t>(*v);
      } else if (key == "wall_clock_seconds") {
        r.wall_clock_seconds = number(value);
      } else if (key.rfind("config.", 0) == 0) {
        r.config[key.substr(7)] = value;
      } else {
        bad("unknown header key '" + key + "'");
      }
      continue;
    }
    if (line.front() == '#') continue;
    if (!header_seen) {
      if (line != kHeader) bad("expected column header '" + std::string(kHeader) + "'");
      header_seen = true;
      continue;
    }
    auto cells = text::split(line, ',');
    if (cells.size() != 7) bad("expected 7 columns");
    ReportRow row;
    row.method = std::string(cells[0]);
    row.rule = std::string(cells[1]);
    if (!cells[2].empty()) {
      auto l = text::parse_int(cells[2]);
      if (!l) bad("bad level");
      row.level = static_cast<int>(*l);
    }
    auto acc = number(cells[3]);
    if (!acc) bad("missing accuracy");
    row.accuracy = *acc;
    row.mean_upl = number(cells[4]);
    row.mean_usd = number(cells[5]);
    auto count = text::parse_int(cells[6]);
    if (!count || *count < 0) bad("bad count");
    row.count = static_cast<std::size_t>(*count);
    r.rows.push_back(std::move(row));
  }
  if (!header_seen) fail(ErrorCode::kParse, name + ": missing column header");
  return r;
}

void save_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  write_report(out, report);
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return read_report(in, path);
}

std::string render_table(const EvalReport& r) {
  std::ostringstream out;
  out << "task " << r.task << "  split " << r.split << "  seed " << r.seed;
  if (r.wall_clock_seconds) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *r.wall_clock_seconds);
    out << "  wall " << buf << "s";
  }
  out << '\n';
  std::size_t mw = 6, rw = 4;
  for (const auto& row : r.rows) {
    mw = std::max(mw, row.method.size());
    rw = std::max(rw, row.rule.size());
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-*s  %5s  %8s  %8s  %8s  %6s\n",
                static_cast<int>(mw), "method", static_cast<int>(rw), "rule",
                "level", "accuracy", "U_PL", "U_SD", "count");
  out << buf;
  auto cell = [](const std::optional<double>& v) {
    char b[32];
    if (v) {
      std::snprintf(b, sizeof b, "%.4f", *v);
    } else {
      std::snprintf(b, sizeof b, "-");
    }
    return std::string(b);
  };
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %-*s  %5s  %8.4f  %8s  %8s  %6zu\n",
                  static_cast<int>(mw), row.method.c_str(),
                  static_cast<int>(rw), row.rule.c_str(),
                  row.level ? std::to_string(*row.level).c_str() : "-",
                  row.accuracy, cell(row.mean_upl).c_str(),
                  cell(row.mean_usd).c_str(), row.count);
    out << buf;
  }
  return out.str();
}

}  // namespace hzsl

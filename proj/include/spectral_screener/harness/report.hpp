#pragma once

// Trial reports: a per-experiment column schema, boolean flags defined as
// `lhs op rhs` over columns or earlier flags, CSV emission with a versioned
// header, parsing, and the self-consistency audit.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectral_screener/error.hpp"

namespace spectral::harness {

inline constexpr int kSchemaVersion = 1;

// name = lhs op rhs. Operands are column names, earlier flag names (0/1) or
// numeric literals. Ops: <= < >= > == and or implies.
struct FlagSpec {
  std::string name;
  std::string lhs;
  std::string op;
  std::string rhs;
};

struct ReportSchema {
  std::string experiment;
  std::vector<std::string> columns;  // after the fixed trial,seed,n,p prefix
  std::vector<FlagSpec> flags;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw InvalidArgument("report: unknown column " + name);
  }
};

struct TrialReport {
  std::int64_t trial = 0;
  std::uint64_t seed = 0;
  std::int64_t n = 0;
  std::int64_t p = 0;  // p, or m for functional experiments
  std::vector<double> values;  // one per schema column
  std::vector<int> flags;      // one per schema flag, 0 or 1
};

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InvalidArgument("report: malformed number '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(' ');
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(' ');
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Evaluates every flag of `schema` for the given column values.
inline std::vector<int> evaluate_flags(const ReportSchema& schema, const std::vector<double>& values) {
  if (values.size() != schema.columns.size()) throw InvalidArgument("report: value count mismatch");
  std::vector<int> out;
  const auto operand = [&](const std::string& token) -> double {
    for (std::size_t i = 0; i < schema.columns.size(); ++i)
      if (schema.columns[i] == token) return values[i];
    for (std::size_t i = 0; i < out.size(); ++i)
      if (schema.flags[i].name == token) return out[i];
    return detail::parse_double(token);
  };
  for (const FlagSpec& f : schema.flags) {
    const double a = operand(f.lhs);
    const double b = operand(f.rhs);
    bool r = false;
    if (f.op == "<=") r = a <= b;
    else if (f.op == "<") r = a < b;
    else if (f.op == ">=") r = a >= b;
    else if (f.op == ">") r = a > b;
    else if (f.op == "==") r = a == b;
    else if (f.op == "and") r = a != 0.0 && b != 0.0;
    else if (f.op == "or") r = a != 0.0 || b != 0.0;
    else if (f.op == "implies") r = a == 0.0 || b != 0.0;
    else throw InvalidArgument("report: unknown flag operator " + f.op);
    out.push_back(r ? 1 : 0);
  }
  return out;
}

// Builds a row and fills its flags from the values.
inline TrialReport make_row(const ReportSchema& schema, std::int64_t trial, std::uint64_t seed, std::int64_t n,
                            std::int64_t p, std::vector<double> values) {
  TrialReport row{trial, seed, n, p, std::move(values), {}};
  row.flags = evaluate_flags(schema, row.values);
  return row;
}

inline std::string to_csv(const ReportSchema& schema, const std::vector<TrialReport>& rows) {
  std::ostringstream out;
  out << "# schema=" << kSchemaVersion << '\n';
  out << "# experiment=" << schema.experiment << '\n';
  out << "# flags:";
  for (std::size_t i = 0; i < schema.flags.size(); ++i) {
    const FlagSpec& f = schema.flags[i];
    out << (i == 0 ? " " : "; ") << f.name << " = " << f.lhs << ' ' << f.op << ' ' << f.rhs;
  }
  out << '\n';
  out << "trial,seed,n,p";
  for (const auto& c : schema.columns) out << ',' << c;
  for (const auto& f : schema.flags) out << ',' << f.name;
  out << '\n';
  for (const TrialReport& row : rows) {
    out << row.trial << ',' << row.seed << ',' << row.n << ',' << row.p;
    for (double v : row.values) out << ',' << detail::format_double(v);
    for (int f : row.flags) out << ',' << f;
    out << '\n';
  }
  return out.str();
}

struct ParsedReport {
  ReportSchema schema;
  std::vector<TrialReport> rows;
};

inline ParsedReport parse_csv(std::istream& in) {
  ParsedReport out;
  std::string line;
  if (!std::getline(in, line) || line != "# schema=" + std::to_string(kSchemaVersion)) {
    throw InvalidArgument("report: missing or unsupported schema line");
  }
  if (!std::getline(in, line) || line.rfind("# experiment=", 0) != 0) {
    throw InvalidArgument("report: missing experiment line");
  }
  out.schema.experiment = line.substr(13);
  if (!std::getline(in, line) || line.rfind("# flags:", 0) != 0) throw InvalidArgument("report: missing flags line");
  for (const std::string& part : detail::split(line.substr(8), ';')) {
    const std::string def = detail::trim(part);
    if (def.empty()) continue;
    std::istringstream tok(def);
    FlagSpec f;
    std::string eq;
    if (!(tok >> f.name >> eq >> f.lhs >> f.op >> f.rhs) || eq != "=") {
      throw InvalidArgument("report: malformed flag definition '" + def + "'");
    }
    out.schema.flags.push_back(f);
  }
  if (!std::getline(in, line)) throw InvalidArgument("report: missing column header");
  const auto header = detail::split(line, ',');
  const std::size_t nflags = out.schema.flags.size();
  if (header.size() < 4 + nflags) throw InvalidArgument("report: header too short");
  out.schema.columns.assign(header.begin() + 4, header.end() - static_cast<std::ptrdiff_t>(nflags));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size()) throw InvalidArgument("report: row width mismatch");
    TrialReport row;
    row.trial = std::stoll(cells[0]);
    row.seed = std::stoull(cells[1]);
    row.n = std::stoll(cells[2]);
    row.p = std::stoll(cells[3]);
    for (std::size_t i = 4; i < cells.size() - nflags; ++i) row.values.push_back(detail::parse_double(cells[i]));
    for (std::size_t i = cells.size() - nflags; i < cells.size(); ++i) row.flags.push_back(std::stoi(cells[i]));
    out.rows.push_back(std::move(row));
  }
  return out;
}

// Mean of each flag over the rows, keyed by flag name.
inline std::map<std::string, double> flag_frequencies(const ReportSchema& schema,
                                                      const std::vector<TrialReport>& rows) {
  std::map<std::string, double> out;
  for (std::size_t f = 0; f < schema.flags.size(); ++f) {
    double sum = 0.0;
    for (const auto& row : rows) sum += row.flags[f];
    out[schema.flags[f].name] = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
  }
  return out;
}

struct AuditResult {
  std::size_t rows = 0;
  std::size_t flag_mismatches = 0;
  std::size_t summary_mismatches = 0;
  std::vector<std::string> messages;

  bool ok() const noexcept { return flag_mismatches == 0 && summary_mismatches == 0; }
};

// Re-evaluates every stored flag from the stored columns, and, when a summary
// is given, checks its "frequencies" block against the flag means.
inline AuditResult audit(const ParsedReport& report, const nlohmann::json* summary = nullptr) {
  AuditResult out;
  out.rows = report.rows.size();
  for (const auto& row : report.rows) {
    const auto expect = evaluate_flags(report.schema, row.values);
    for (std::size_t f = 0; f < expect.size(); ++f) {
      if (expect[f] != row.flags[f]) {
        ++out.flag_mismatches;
        out.messages.push_back("trial " + std::to_string(row.trial) + ": flag " + report.schema.flags[f].name +
                               " stored " + std::to_string(row.flags[f]) + ", recomputed " +
                               std::to_string(expect[f]));
      }
    }
  }
  if (summary != nullptr && summary->contains("frequencies")) {
    const auto freq = flag_frequencies(report.schema, report.rows);
    for (const auto& [name, value] : (*summary)["frequencies"].items()) {
      const auto it = freq.find(name);
      if (it == freq.end() || std::abs(it->second - value.get<double>()) > 1e-12) {
        ++out.summary_mismatches;
        out.messages.push_back("summary frequency " + name + " does not match the CSV flags");
      }
    }
  }
  return out;
}

inline AuditResult audit_files(const std::string& csv_path, const std::optional<std::string>& summary_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw InvalidArgument("audit: cannot open " + csv_path);
  const ParsedReport report = parse_csv(csv);
  if (!summary_path) return audit(report);
  std::ifstream js(*summary_path);
  if (!js) throw InvalidArgument("audit: cannot open " + *summary_path);
  const nlohmann::json summary = nlohmann::json::parse(js);
  return audit(report, &summary);
}

}  // namespace spectral::harness

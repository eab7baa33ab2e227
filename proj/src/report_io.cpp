#include "rdsens/report_io.hpp"

#include <charconv>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "rdsens/errors.hpp"

namespace rdsens {

const char* const kReportCsvHeader =
    "method,m,alpha,delta,t,trials,epsilon,mean,variance,ci95,seed,seconds";

std::string report_csv_header() { return kReportCsvHeader; }

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string join_alpha(const Eigen::VectorXd& alpha) {
  std::string s;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (i) s += ';';
    s += format_double(alpha(i));
  }
  return s;
}

std::string format_seconds(double s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", s);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_num(const std::string& s, const char* what) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("report csv: bad ") + what + " field '" + s + "'");
  }
}

uint64_t parse_u64(const std::string& s, const char* what) {
  try {
    size_t pos = 0;
    const uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("report csv: bad ") + what + " field '" + s + "'");
  }
}

}  // namespace

std::string report_csv_rows(const EstimateReport& report, int only_m,
                            const std::function<std::string(int)>& extra_field) {
  std::string rows;
  const std::string alpha = join_alpha(report.alpha);
  const std::string eps =
      report.epsilon ? format_double(*report.epsilon) : std::string();
  for (Eigen::Index m = 0; m < report.mean.size(); ++m) {
    if (only_m > 0 && m + 1 != only_m) continue;
    rows += method_name(report.method);
    rows += ',';
    rows += std::to_string(m + 1);
    rows += ',';
    rows += alpha;
    rows += ',';
    rows += format_double(report.delta);
    rows += ',';
    rows += format_double(report.horizon);
    rows += ',';
    rows += std::to_string(report.trials);
    rows += ',';
    rows += eps;
    rows += ',';
    rows += format_double(report.mean(m));
    rows += ',';
    rows += format_double(report.variance(m));
    rows += ',';
    rows += format_double(report.ci95(m));
    rows += ',';
    rows += std::to_string(report.seed);
    rows += ',';
    rows += format_seconds(report.seconds);
    if (extra_field) {
      rows += ',';
      rows += extra_field(static_cast<int>(m) + 1);
    }
    rows += '\n';
  }
  return rows;
}

std::string report_csv_rows(const EstimateReport& report) {
  return report_csv_rows(report, 0, nullptr);
}

void write_reports_csv(const std::vector<EstimateReport>& reports,
                       std::ostream& os) {
  os << kReportCsvHeader << "\n";
  for (const auto& r : reports) os << report_csv_rows(r);
}

std::string report_json(const EstimateReport& report) {
  nlohmann::ordered_json j;
  j["method"] = method_name(report.method);
  j["alpha"] = std::vector<double>(report.alpha.begin(), report.alpha.end());
  j["delta"] = report.delta;
  j["t"] = report.horizon;
  j["trials"] = report.trials;
  if (report.epsilon) j["epsilon"] = *report.epsilon;
  j["mean"] = std::vector<double>(report.mean.begin(), report.mean.end());
  j["variance"] =
      std::vector<double>(report.variance.begin(), report.variance.end());
  j["ci95"] = std::vector<double>(report.ci95.begin(), report.ci95.end());
  j["seed"] = report.seed;
  j["seconds"] = report.seconds;
  return j.dump(2);
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line))
    throw ConfigError("report csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportCsvHeader)
    throw ConfigError("report csv: unexpected header '" + line + "'");

  std::vector<ReportRow> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 12)
      throw ConfigError("report csv: expected 12 fields, got " +
                        std::to_string(f.size()));
    ReportRow r;
    r.method = f[0];
    r.m = static_cast<int>(parse_num(f[1], "m"));
    for (const auto& a : split(f[2], ';'))
      r.alpha.push_back(parse_num(a, "alpha"));
    r.delta = parse_num(f[3], "delta");
    r.t = parse_num(f[4], "t");
    r.trials = static_cast<long>(parse_u64(f[5], "trials"));
    if (!f[6].empty()) r.epsilon = parse_num(f[6], "epsilon");
    r.mean = parse_num(f[7], "mean");
    r.variance = parse_num(f[8], "variance");
    r.ci95 = parse_num(f[9], "ci95");
    r.seed = parse_u64(f[10], "seed");
    r.seconds = parse_num(f[11], "seconds");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace rdsens

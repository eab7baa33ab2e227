#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rdsens/estimators.hpp"

namespace rdsens {

/// Fixed report CSV header. One data row per parameter coordinate m
/// (1-based in the file); `alpha` is the full parameter vector joined with
/// ';'. Numeric fields other than `seconds` use round-trip precision.
extern const char* const kReportCsvHeader;

std::string report_csv_header();
std::string report_csv_rows(const EstimateReport& report);

/// Rows restricted to one 1-based coordinate (0 keeps all), optionally with
/// one extra trailing field per row (the caller extends the header).
std::string report_csv_rows(const EstimateReport& report, int only_m,
                            const std::function<std::string(int)>& extra_field);

/// Header plus rows of all reports.
void write_reports_csv(const std::vector<EstimateReport>& reports,
                       std::ostream& os);

/// JSON object form of a report (arrays over coordinates).
std::string report_json(const EstimateReport& report);

/// One parsed CSV data row.
struct ReportRow {
  std::string method;
  int m = 0;
  std::vector<double> alpha;
  double delta = 0.0, t = 0.0;
  long trials = 0;
  std::optional<double> epsilon;
  double mean = 0.0, variance = 0.0, ci95 = 0.0;
  uint64_t seed = 0;
  double seconds = 0.0;
};

/// Parses report CSV text (header required). Throws ConfigError on schema
/// mismatch.
std::vector<ReportRow> parse_report_csv(const std::string& text);

/// Formats a double with enough digits to round-trip exactly.
std::string format_double(double v);

}  // namespace rdsens

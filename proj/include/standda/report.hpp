#pragma once

#include "standda/inference.hpp"

#include <string>

namespace standda {

inline constexpr const char* kReportVersion = "stand-da-report/1";

struct ReportContext {
    Index ns = 0, nt = 0, d = 0;
    double rate = 0.05;
    double alpha = 0.05;
};

/// Deterministic JSON document (no timings) for one run. Anomaly indices are
/// 1-based within the target domain.
std::string report_json(const StandDaResult& result, const ReportContext& ctx);

/// Human-readable table: index, T_j, p-values, reject at alpha.
std::string summary_table(const StandDaResult& result, double alpha);

/// Throws std::runtime_error naming the first missing or mistyped key.
void validate_report_json(const std::string& text);

}  // namespace standda

#include "standda/report.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace standda {

using nlohmann::json;

namespace {

json number(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

json interval_json(const Interval& iv) {
    if (iv.empty()) return nullptr;
    return json::array({number(iv.lower()), number(iv.upper())});
}

}  // namespace

std::string report_json(const StandDaResult& result, const ReportContext& ctx) {
    json doc;
    doc["schema"] = kReportVersion;
    doc["n_s"] = ctx.ns;
    doc["n_t"] = ctx.nt;
    doc["d"] = ctx.d;
    doc["rate"] = ctx.rate;
    doc["alpha"] = ctx.alpha;
    doc["flagged_total"] = result.detection.flagged.size();
    json detected = json::array();
    for (Index j : result.detection.target) detected.push_back(j + 1);
    doc["detected"] = detected;

    json anomalies = json::array();
    for (const auto& r : result.reports) {
        json a;
        a["index"] = r.anomaly + 1;
        a["z_obs"] = number(r.direction.zObs);
        a["variance"] = number(r.direction.variance);
        json signs = json::array();
        for (Index k = 0; k < r.direction.signs.size(); ++k) signs.push_back(static_cast<int>(r.direction.signs(k)));
        a["signs"] = signs;
        json region = json::array();
        for (const auto& p : r.region.pieces()) region.push_back(interval_json(p));
        a["region"] = region;
        a["sign_region"] = interval_json(r.signRegion);
        a["oc_window"] = r.ocWindow ? interval_json(*r.ocWindow) : json(nullptr);
        a["p_selective"] = number(r.pSelective);
        a["p_oc"] = number(r.pOc);
        a["p_naive"] = number(r.pNaive);
        a["p_bonferroni"] = number(r.pBonferroni);
        a["reject"] = !r.error && r.pSelective <= ctx.alpha;
        const auto& s = r.diagnostics.search;
        a["diagnostics"] = {{"windows", s.windows},
                            {"accepted_windows", s.accepted},
                            {"empty_windows", s.emptyWindows},
                            {"stalls", s.stalls},
                            {"pattern_errors", s.patternErrors}};
        a["error"] = r.error ? json(*r.error) : json(nullptr);
        anomalies.push_back(std::move(a));
    }
    doc["anomalies"] = anomalies;
    return doc.dump(2);
}

std::string summary_table(const StandDaResult& result, double alpha) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%6s %12s %12s %12s %12s %12s %8s\n", "index", "T_j", "p_selective",
                  "p_naive", "p_bonf", "p_oc", "reject");
    os << line;
    for (const auto& r : result.reports) {
        if (r.error) {
            std::snprintf(line, sizeof line, "%6ld  untestable: %s\n", static_cast<long>(r.anomaly + 1),
                          r.error->c_str());
        } else {
            std::snprintf(line, sizeof line, "%6ld %12.6g %12.6g %12.6g %12.6g %12.6g %8s\n",
                          static_cast<long>(r.anomaly + 1), r.direction.zObs, r.pSelective, r.pNaive,
                          r.pBonferroni, r.pOc, r.pSelective <= alpha ? "yes" : "no");
        }
        os << line;
    }
    if (result.reports.empty()) os << "(no anomalies detected in the target domain)\n";
    return os.str();
}

void validate_report_json(const std::string& text) {
    const json doc = json::parse(text);
    auto need = [](const json& obj, const char* key, json::value_t type, const std::string& where) {
        if (!obj.contains(key)) throw std::runtime_error(where + ": missing key \"" + key + "\"");
        const auto t = obj[key].type();
        const bool numeric = type == json::value_t::number_float &&
                             (t == json::value_t::number_float || t == json::value_t::number_integer ||
                              t == json::value_t::number_unsigned);
        const bool integral = type == json::value_t::number_unsigned &&
                              (t == json::value_t::number_integer || t == json::value_t::number_unsigned);
        if (!(t == type || numeric || integral))
            throw std::runtime_error(where + ": key \"" + key + "\" has the wrong type");
    };
    need(doc, "schema", json::value_t::string, "report");
    if (doc["schema"] != kReportVersion) throw std::runtime_error("report: unknown schema version");
    need(doc, "n_s", json::value_t::number_unsigned, "report");
    need(doc, "n_t", json::value_t::number_unsigned, "report");
    need(doc, "d", json::value_t::number_unsigned, "report");
    need(doc, "detected", json::value_t::array, "report");
    need(doc, "anomalies", json::value_t::array, "report");
    for (const auto& a : doc["anomalies"]) {
        const std::string where = "anomaly record";
        need(a, "index", json::value_t::number_unsigned, where);
        need(a, "region", json::value_t::array, where);
        need(a, "diagnostics", json::value_t::object, where);
        if (a["error"].is_null()) {
            for (const char* k : {"z_obs", "variance", "p_selective", "p_oc", "p_naive", "p_bonferroni"}) {
                need(a, k, json::value_t::number_float, where);
                const double p = a[k].get<double>();
                if (std::string(k).rfind("p_", 0) == 0 && !(p >= 0.0 && p <= 1.0))
                    throw std::runtime_error(where + ": " + k + " outside [0, 1]");
            }
        }
    }
}

}  // namespace standda

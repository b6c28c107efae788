#pragma once

#include <cstdio>
#include <sstream>
#include <string>

#include <json.hpp>

#include "svymix/simharness.hpp"

namespace svymix {

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace detail

/// Machine-readable report; key order and double formatting are fixed so the
/// same study yields byte-identical output regardless of worker count.
inline std::string report_json(const StudyReport& rep) {
    nlohmann::ordered_json j;
    j["study"] = rep.study;
    j["metadata"] = {
        {"seed", rep.seed},
        {"replicates", rep.replicates},
        {"confidence_level", rep.confidence_level},
        {"aborted_replicates", rep.aborted_replicates},
        {"discarded_replicates", rep.discarded_replicates},
        {"config", rep.config_echo},
    };
    j["estimators"] = nlohmann::ordered_json::array();
    for (const auto& r : rep.rows) {
        j["estimators"].push_back({
            {"name", r.name},
            {"replicates", r.replicates},
            {"mean", r.mean},
            {"relative_bias", r.relative_bias},
            {"variance", r.variance},
            {"standardized_variance", r.standardized_variance},
            {"coverage", r.coverage},
            {"fallback_rate", r.fallback_rate},
            {"discarded", r.discarded},
        });
    }
    j["mse"] = {{"preliminary", rep.mse_preliminary}, {"improved", rep.mse_improved}};
    j["scatter_rows"] = rep.scatter.size();
    return j.dump(2) + "\n";
}

/// Human-readable aligned table.
inline std::string report_table(const StudyReport& rep) {
    std::ostringstream out;
    out << "study: " << rep.study << "  seed: " << rep.seed
        << "  replicates: " << rep.replicates
        << "  confidence: " << detail::fmt(rep.confidence_level) << "\n";
    if (rep.aborted_replicates > 0) out << "aborted replicates: " << rep.aborted_replicates << "\n";
    if (rep.discarded_replicates > 0)
        out << "discarded replicates (nu < 2): " << rep.discarded_replicates << "\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-34s %12s %12s %12s %10s %10s %9s\n", "estimator", "mean",
                  "rel.bias", "variance", "std.var", "coverage", "fallback");
    out << line;
    for (const auto& r : rep.rows) {
        std::snprintf(line, sizeof line, "%-34s %12s %12s %12s %10s %10s %9s\n", r.name.c_str(),
                      detail::fmt(r.mean).c_str(), detail::fmt(r.relative_bias).c_str(),
                      detail::fmt(r.variance).c_str(), detail::fmt(r.standardized_variance).c_str(),
                      detail::fmt(r.coverage).c_str(), detail::fmt(r.fallback_rate).c_str());
        out << line;
    }
    if (rep.mse_preliminary > 0.0 || rep.mse_improved > 0.0)
        out << "mse vs true value: preliminary " << detail::fmt(rep.mse_preliminary)
            << ", improved " << detail::fmt(rep.mse_improved) << "\n";
    return out.str();
}

inline std::string scatter_csv(const StudyReport& rep) {
    std::ostringstream out;
    out << "replicate,design,preliminary,improved\n";
    char buf[40];
    for (const auto& s : rep.scatter) {
        out << s.replicate << "," << s.design << ",";
        std::snprintf(buf, sizeof buf, "%.17g", s.preliminary);
        out << buf << ",";
        std::snprintf(buf, sizeof buf, "%.17g", s.improved);
        out << buf << "\n";
    }
    return out.str();
}

}  // namespace svymix

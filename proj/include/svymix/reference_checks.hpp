#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "svymix/errors.hpp"
#include "svymix/simharness.hpp"

namespace svymix {

/// One tolerance-checked comparison against an embedded reference value.
struct CheckItem {
    std::string row;       // estimator row name
    std::string field;     // standardized_variance | coverage | relative_bias | variance
    double expected;
    double tol_abs;        // pass iff |actual - expected| <= tol_abs + tol_rel*|expected|
    double tol_rel;
};

/// Strict inequality between two rows on one field.
struct CheckLess {
    std::string row_lo;
    std::string row_hi;
    std::string field;
};

struct ReferenceCheck {
    std::string name;
    std::vector<CheckItem> items;
    std::vector<CheckLess> strict_less;
};

struct CheckResult {
    std::string description;
    double actual = 0.0;
    double expected = 0.0;
    double allowed = 0.0;
    bool pass = false;
};

/// Reference targets for the bundled mixture study (influenza fixture,
/// n = 5, priors 0.1/0.9, reference = the PPSWR Hansen-Hurwitz row).
inline const ReferenceCheck& table1_check() {
    static const ReferenceCheck c = {
        "table1",
        {
            {"srswr+expansion_total", "standardized_variance", 1.330, 0.03, 0.0},
            {"ppswr+hansen_hurwitz_total", "standardized_variance", 1.000, 0.03, 0.0},
            {"preliminary", "standardized_variance", 1.033, 0.03, 0.0},
            {"improved", "standardized_variance", 0.961, 0.03, 0.0},
            {"srswr+expansion_total", "coverage", 0.971, 0.01, 0.0},
            {"ppswr+hansen_hurwitz_total", "coverage", 0.886, 0.01, 0.0},
            {"preliminary", "coverage", 0.895, 0.01, 0.0},
            {"improved", "coverage", 0.913, 0.02, 0.0},
        },
        {},
    };
    return c;
}

/// Reference targets for the bundled retrospective study (trees fixture,
/// sizes 5..14 with reciprocal-size prior). Responses map to reference rows
/// in the order girth, height, volume.
inline const ReferenceCheck& table2_check() {
    static const ReferenceCheck c = {
        "table2",
        {
            {"girth/naive", "relative_bias", 0.138, 0.015, 0.0},
            {"girth/preliminary", "relative_bias", 0.0, 0.01, 0.0},
            {"girth/improved", "relative_bias", 0.0, 0.01, 0.0},
            {"girth/naive", "variance", 0.783, 0.0, 0.10},
            {"girth/preliminary", "variance", 0.593, 0.0, 0.10},
            {"girth/improved", "variance", 0.563, 0.0, 0.10},
            {"girth/naive", "coverage", 0.904, 0.01, 0.0},
            {"girth/preliminary", "coverage", 0.889, 0.01, 0.0},
            {"girth/improved", "coverage", 0.890, 0.01, 0.0},

            {"height/naive", "relative_bias", 0.131, 0.015, 0.0},
            {"height/preliminary", "relative_bias", 0.0, 0.01, 0.0},
            {"height/improved", "relative_bias", 0.0, 0.01, 0.0},
            {"height/naive", "variance", 13.00, 0.0, 0.10},
            {"height/preliminary", "variance", 9.94, 0.0, 0.10},
            {"height/improved", "variance", 9.46, 0.0, 0.10},
            {"height/naive", "coverage", 0.911, 0.01, 0.0},
            {"height/preliminary", "coverage", 0.894, 0.01, 0.0},
            {"height/improved", "coverage", 0.895, 0.01, 0.0},

            {"volume/naive", "relative_bias", 0.131, 0.015, 0.0},
            {"volume/preliminary", "relative_bias", 0.0, 0.01, 0.0},
            {"volume/improved", "relative_bias", 0.0, 0.01, 0.0},
            {"volume/naive", "variance", 826.0, 0.0, 0.10},
            {"volume/preliminary", "variance", 626.0, 0.0, 0.10},
            {"volume/improved", "variance", 601.0, 0.0, 0.10},
            {"volume/naive", "coverage", 0.882, 0.01, 0.0},
            {"volume/preliminary", "coverage", 0.866, 0.01, 0.0},
            {"volume/improved", "coverage", 0.868, 0.01, 0.0},
        },
        {
            {"girth/improved", "girth/preliminary", "variance"},
            {"height/improved", "height/preliminary", "variance"},
            {"volume/improved", "volume/preliminary", "variance"},
        },
    };
    return c;
}

inline const ReferenceCheck& reference_check(const std::string& name) {
    if (name == "table1") return table1_check();
    if (name == "table2") return table2_check();
    throw SchemaError("unknown reference check '" + name + "'");
}

namespace detail {

inline double row_field(const StudyReport& rep, const std::string& row, const std::string& field) {
    for (const auto& r : rep.rows) {
        if (r.name != row) continue;
        if (field == "standardized_variance") return r.standardized_variance;
        if (field == "coverage") return r.coverage;
        if (field == "relative_bias") return r.relative_bias;
        if (field == "variance") return r.variance;
        if (field == "mean") return r.mean;
        throw SchemaError("reference check: unknown field '" + field + "'");
    }
    throw SchemaError("reference check: report has no row '" + row + "'");
}

}  // namespace detail

inline std::vector<CheckResult> run_reference_check(const ReferenceCheck& check,
                                                    const StudyReport& rep) {
    std::vector<CheckResult> out;
    for (const auto& item : check.items) {
        CheckResult r;
        r.actual = detail::row_field(rep, item.row, item.field);
        r.expected = item.expected;
        r.allowed = item.tol_abs + item.tol_rel * std::fabs(item.expected);
        r.pass = std::fabs(r.actual - r.expected) <= r.allowed;
        r.description = item.row + " " + item.field;
        out.push_back(r);
    }
    for (const auto& item : check.strict_less) {
        CheckResult r;
        r.actual = detail::row_field(rep, item.row_lo, item.field);
        r.expected = detail::row_field(rep, item.row_hi, item.field);
        r.allowed = 0.0;
        r.pass = r.actual < r.expected;
        r.description = item.row_lo + " " + item.field + " < " + item.row_hi;
        out.push_back(r);
    }
    return out;
}

}  // namespace svymix

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "svymix/errors.hpp"
#include "svymix/simharness.hpp"

namespace svymix {

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline long long parse_int(const std::string& v, const std::string& key) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ParseError("config: key '" + key + "': cannot parse integer '" + v + "'");
    return out;
}

inline double parse_real(const std::string& v, const std::string& key) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ParseError("config: key '" + key + "': cannot parse number '" + v + "'");
    return out;
}

/// "5:14" (inclusive range) or "5,7,9".
inline std::vector<int> parse_sizes(const std::string& v, const std::string& key) {
    std::vector<int> out;
    auto colon = v.find(':');
    if (colon != std::string::npos) {
        const int lo = static_cast<int>(parse_int(trim(v.substr(0, colon)), key));
        const int hi = static_cast<int>(parse_int(trim(v.substr(colon + 1)), key));
        if (lo > hi) throw ParseError("config: key '" + key + "': empty range '" + v + "'");
        for (int i = lo; i <= hi; ++i) out.push_back(i);
        return out;
    }
    for (const auto& tok : split_list(v)) out.push_back(static_cast<int>(parse_int(tok, key)));
    return out;
}

inline std::vector<double> parse_prior(const std::string& v, const std::vector<int>& sizes,
                                       const std::string& key) {
    std::vector<double> w;
    if (v == "reciprocal") {
        for (int n : sizes) w.push_back(1.0 / static_cast<double>(n));
    } else if (v == "uniform") {
        w.assign(sizes.size(), 1.0);
    } else {
        for (const auto& tok : split_list(v)) w.push_back(parse_real(tok, key));
        if (w.size() != sizes.size())
            throw SchemaError("config: key '" + key + "': expected " +
                              std::to_string(sizes.size()) + " weights");
    }
    double s = 0.0;
    for (double x : w) {
        if (x < 0.0) throw SchemaError("config: key '" + key + "': negative weight");
        s += x;
    }
    if (s <= 0.0) throw SchemaError("config: key '" + key + "': zero total weight");
    for (double& x : w) x /= s;
    return w;
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Parse `key = value` lines ('#' comments). Duplicate keys are rejected.
inline std::map<std::string, std::string> parse_flat_keys(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("config: line " + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(t.substr(0, eq));
        std::string val = detail::trim(t.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ParseError("config: line " + std::to_string(lineno) + ": empty key or value");
        if (!kv.emplace(key, val).second)
            throw ParseError("config: line " + std::to_string(lineno) + ": duplicate key '" +
                             key + "'");
    }
    return kv;
}

inline std::string canonical_echo(const StudyConfig& cfg);

/// Validate keys against the study's schema and build the study config.
inline StudyConfig parse_study_config(const std::string& text) {
    auto kv = parse_flat_keys(text);
    auto take = [&](const std::string& key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) return {};
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto require = [&](const std::string& key) {
        std::string v = take(key);
        if (v.empty()) throw SchemaError("config: missing required key '" + key + "'");
        return v;
    };

    StudyConfig cfg;
    const std::string study = require("study");
    if (study == "mixture") cfg.study = StudyKind::mixture;
    else if (study == "retrospective") cfg.study = StudyKind::retrospective;
    else if (study == "generic") cfg.study = StudyKind::generic;
    else throw SchemaError("config: unknown study '" + study + "'");

    cfg.dataset = require("dataset");
    if (auto v = take("response"); !v.empty()) cfg.responses = {v};
    if (auto v = take("responses"); !v.empty()) {
        if (!cfg.responses.empty())
            throw SchemaError("config: give either 'response' or 'responses', not both");
        cfg.responses = detail::split_list(v);
    }
    if (cfg.responses.empty()) throw SchemaError("config: missing 'response' or 'responses'");
    if (auto v = take("size_column"); !v.empty()) cfg.size_column = v;
    if (auto v = take("label_column"); !v.empty()) cfg.label_column = v;

    if (auto v = take("replicates"); !v.empty()) cfg.replicates = detail::parse_int(v, "replicates");
    if (cfg.replicates < 1) throw SchemaError("config: replicates must be >= 1");
    if (auto v = take("seed"); !v.empty())
        cfg.master_seed = static_cast<std::uint64_t>(detail::parse_int(v, "seed"));
    if (auto v = take("confidence_level"); !v.empty())
        cfg.confidence_level = detail::parse_real(v, "confidence_level");
    if (!(cfg.confidence_level > 0.0 && cfg.confidence_level < 1.0))
        throw SchemaError("config: confidence_level must lie in (0,1)");
    cfg.scatter_sample = cfg.study == StudyKind::retrospective ? 0 : 2000;
    if (auto v = take("scatter_sample"); !v.empty())
        cfg.scatter_sample = detail::parse_int(v, "scatter_sample");
    if (cfg.scatter_sample < 0) throw SchemaError("config: scatter_sample must be >= 0");

    if (cfg.study == StudyKind::retrospective) {
        cfg.sizes = detail::parse_sizes(require("sizes"), "sizes");
        for (int n : cfg.sizes)
            if (n < 1) throw SchemaError("config: sizes must be >= 1");
        std::string prior = take("size_prior");
        cfg.size_prior = detail::parse_prior(prior.empty() ? "reciprocal" : prior, cfg.sizes,
                                             "size_prior");
        if (auto v = take("posited_sizes"); !v.empty())
            cfg.posited_sizes = detail::parse_sizes(v, "posited_sizes");
        if (auto v = take("posited_prior"); !v.empty()) {
            const auto& base = cfg.posited_sizes.empty() ? cfg.sizes : cfg.posited_sizes;
            cfg.posited_prior = detail::parse_prior(v, base, "posited_prior");
        }
        if (auto v = take("true_size"); !v.empty())
            cfg.true_size = static_cast<int>(detail::parse_int(v, "true_size"));
        if (auto v = take("posited_scale_max"); !v.empty())
            cfg.posited_scale_max = detail::parse_real(v, "posited_scale_max");
    } else {
        if (auto v = take("n_draws"); !v.empty())
            cfg.n_draws = static_cast<int>(detail::parse_int(v, "n_draws"));
        if (cfg.n_draws < 1) throw SchemaError("config: n_draws must be >= 1");
        if (auto v = take("conditioning"); !v.empty()) {
            if (v == "ordered") cfg.level = ConditioningLevel::ordered_sample;
            else if (v == "reduced") cfg.level = ConditioningLevel::reduced_set;
            else throw SchemaError("config: conditioning must be 'ordered' or 'reduced'");
        }
        if (auto v = take("std_reference"); !v.empty())
            cfg.std_reference = static_cast<int>(detail::parse_int(v, "std_reference"));
        double prior_sum = 0.0;
        for (int k = 1;; ++k) {
            const std::string base = "strategy." + std::to_string(k) + ".";
            std::string design = take(base + "design");
            if (design.empty()) break;
            StrategySpec spec;
            if (design == "srswr") spec.design = DesignKind::srswr;
            else if (design == "ppswr") spec.design = DesignKind::ppswr;
            else throw SchemaError("config: unknown design '" + design + "'");
            spec.estimator = estimator_from_string(require(base + "estimator"));
            spec.prior = detail::parse_real(require(base + "prior"), base + "prior");
            if (spec.prior < 0.0) throw SchemaError("config: negative strategy prior");
            if (auto v = take(base + "n_draws"); !v.empty())
                spec.n_draws = static_cast<int>(detail::parse_int(v, base + "n_draws"));
            prior_sum += spec.prior;
            cfg.strategies.push_back(spec);
        }
        if (cfg.strategies.empty()) throw SchemaError("config: no strategies configured");
        if (std::fabs(prior_sum - 1.0) > 1e-9)
            throw SchemaError("config: strategy priors sum to " + std::to_string(prior_sum) +
                              ", expected 1 within 1e-9");
    }

    if (!kv.empty()) {
        std::string keys;
        for (const auto& [k, v] : kv) keys += (keys.empty() ? "" : ", ") + k;
        throw SchemaError("config: unknown key(s): " + keys);
    }

    cfg.echo = canonical_echo(cfg);
    return cfg;
}

/// Canonical flat form of the effective configuration (sorted keys).
inline std::string canonical_echo(const StudyConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["study"] = to_string(cfg.study);
    kv["dataset"] = cfg.dataset;
    {
        std::string r;
        for (const auto& s : cfg.responses) r += (r.empty() ? "" : ",") + s;
        kv[cfg.responses.size() == 1 ? "response" : "responses"] = r;
    }
    if (cfg.size_column) kv["size_column"] = *cfg.size_column;
    if (cfg.label_column) kv["label_column"] = *cfg.label_column;
    kv["replicates"] = std::to_string(cfg.replicates);
    kv["seed"] = std::to_string(cfg.master_seed);
    kv["confidence_level"] = detail::format_real(cfg.confidence_level);
    kv["scatter_sample"] = std::to_string(cfg.scatter_sample);
    if (cfg.study == StudyKind::retrospective) {
        auto join_i = [](const std::vector<int>& v) {
            std::string s;
            for (int x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
            return s;
        };
        auto join_d = [](const std::vector<double>& v) {
            std::string s;
            for (double x : v) s += (s.empty() ? "" : ",") + detail::format_real(x);
            return s;
        };
        kv["sizes"] = join_i(cfg.sizes);
        kv["size_prior"] = join_d(cfg.size_prior);
        if (!cfg.posited_sizes.empty()) kv["posited_sizes"] = join_i(cfg.posited_sizes);
        if (!cfg.posited_prior.empty()) kv["posited_prior"] = join_d(cfg.posited_prior);
        if (cfg.true_size) kv["true_size"] = std::to_string(*cfg.true_size);
        if (cfg.posited_scale_max) kv["posited_scale_max"] = detail::format_real(*cfg.posited_scale_max);
    } else {
        kv["n_draws"] = std::to_string(cfg.n_draws);
        kv["conditioning"] = to_string(cfg.level);
        if (cfg.std_reference > 0) kv["std_reference"] = std::to_string(cfg.std_reference);
        for (std::size_t k = 0; k < cfg.strategies.size(); ++k) {
            const std::string base = "strategy." + std::to_string(k + 1) + ".";
            kv[base + "design"] = to_string(cfg.strategies[k].design);
            kv[base + "estimator"] = to_string(cfg.strategies[k].estimator);
            kv[base + "prior"] = detail::format_real(cfg.strategies[k].prior);
            if (cfg.strategies[k].n_draws > 0)
                kv[base + "n_draws"] = std::to_string(cfg.strategies[k].n_draws);
        }
    }
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

}  // namespace svymix

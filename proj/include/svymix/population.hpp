#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "svymix/csv.hpp"
#include "svymix/errors.hpp"

namespace svymix {

/// Normalized single-draw selection probabilities for PPSWR.
struct DrawProbabilities {
    std::vector<double> probs;

    explicit DrawProbabilities(std::vector<double> p) : probs(std::move(p)) {
        if (probs.empty()) throw DomainError("draw probabilities: empty vector");
        double sum = 0.0;
        for (double v : probs) {
            if (!(v > 0.0) || v > 1.0)
                throw DomainError("draw probabilities: entries must lie in (0, 1]");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            throw DomainError("draw probabilities: entries sum to " + std::to_string(sum) +
                              ", expected 1 within 1e-12");
    }

    std::size_t size() const { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }
};

struct CsvSchema {
    std::vector<std::string> responses;        // numeric columns to load
    std::optional<std::string> size_column;    // positive size measure
    std::optional<std::string> label_column;   // validated for distinctness, then dropped
};

/// Fixed finite population; unit labels are positional (1..N in file order).
class Population {
  public:
    struct Column {
        std::string name;
        std::vector<double> values;
    };

    Population(std::vector<Column> responses, std::optional<Column> size_measure)
        : responses_(std::move(responses)), size_(std::move(size_measure)) {
        if (responses_.empty() && !size_)
            throw SchemaError("population: no columns");
        n_ = responses_.empty() ? size_->values.size() : responses_.front().values.size();
        if (n_ < 1) throw DomainError("population: N must be >= 1");
        for (const auto& c : responses_)
            if (c.values.size() != n_)
                throw DomainError("population: response '" + c.name + "' length mismatch");
        if (size_) {
            if (size_->values.size() != n_)
                throw DomainError("population: size column length mismatch");
            for (double v : size_->values)
                if (!(v > 0.0))
                    throw DomainError("population: size column '" + size_->name +
                                      "' has a non-positive entry");
        }
    }

    std::size_t n() const { return n_; }

    bool has_response(std::string_view name) const {
        for (const auto& c : responses_)
            if (c.name == name) return true;
        return false;
    }

    const std::vector<double>& response(std::string_view name) const {
        for (const auto& c : responses_)
            if (c.name == name) return c.values;
        throw SchemaError("population: unknown response '" + std::string(name) + "'");
    }

    const std::vector<Column>& responses() const { return responses_; }

    bool has_size_measure() const { return size_.has_value(); }

    const std::vector<double>& size_measure() const {
        if (!size_) throw SchemaError("population: no size measure loaded");
        return size_->values;
    }

    const std::string& size_column_name() const {
        if (!size_) throw SchemaError("population: no size measure loaded");
        return size_->name;
    }

  private:
    std::vector<Column> responses_;
    std::optional<Column> size_;
    std::size_t n_ = 0;
};

inline Population load_population(std::istream& in, const CsvSchema& schema) {
    csv::Table t = csv::read(in);
    if (t.rows.empty()) throw DomainError("population: no data rows");

    if (schema.label_column) {
        std::size_t li = t.column_index(*schema.label_column);
        std::set<std::string> seen;
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            if (!seen.insert(t.rows[r][li]).second)
                throw DomainError("population: duplicate label '" + t.rows[r][li] +
                                  "' at row " + std::to_string(r + 1));
        // labels are positional from here on; the column itself is dropped
    }

    auto load_column = [&](const std::string& name) {
        std::size_t ci = t.column_index(name);
        Population::Column col{name, {}};
        col.values.reserve(t.rows.size());
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            col.values.push_back(csv::parse_number(t.rows[r][ci], r, name));
        return col;
    };

    std::vector<Population::Column> resp;
    for (const auto& name : schema.responses) resp.push_back(load_column(name));
    std::optional<Population::Column> size;
    if (schema.size_column) size = load_column(*schema.size_column);
    return Population(std::move(resp), std::move(size));
}

/// Re-serialize loaded columns (15 significant digits, bit-faithful for
/// fixtures written with at most that precision).
inline void save_population(const Population& pop, std::ostream& out) {
    std::vector<const Population::Column*> cols;
    for (const auto& c : pop.responses()) cols.push_back(&c);
    Population::Column size_col{"", {}};
    if (pop.has_size_measure()) {
        size_col = {pop.size_column_name(), pop.size_measure()};
        cols.push_back(&size_col);
    }
    for (std::size_t i = 0; i < cols.size(); ++i)
        out << (i ? "," : "") << cols[i]->name;
    out << "\n";
    char buf[64];
    for (std::size_t r = 0; r < pop.n(); ++r) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.15g", cols[i]->values[r]);
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    }
}

inline double population_total(const Population& pop, std::string_view response) {
    const auto& y = pop.response(response);
    double s = 0.0;
    for (double v : y) s += v;
    return s;
}

inline double population_mean(const Population& pop, std::string_view response) {
    return population_total(pop, response) / static_cast<double>(pop.n());
}

inline DrawProbabilities draw_probabilities(const Population& pop) {
    const auto& x = pop.size_measure();
    double sum = 0.0;
    for (double v : x) sum += v;
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = x[i] / sum;
    return DrawProbabilities(std::move(p));
}

}  // namespace svymix

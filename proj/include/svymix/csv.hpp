#pragma once

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "svymix/errors.hpp"

namespace svymix::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;   // raw cells, header excluded

    std::size_t column_index(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw SchemaError("csv: no column named '" + std::string(name) + "'");
    }
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

/// Strict comma-separated reader: header row, fixed width, no quoting.
inline Table read(std::istream& in) {
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("csv: empty input");
    t.header = split_line(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = split_line(line);
        if (cells.size() != t.header.size())
            throw ParseError("csv: line " + std::to_string(lineno) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

/// Parse one cell as a finite double ('.' decimal point, no separators).
inline double parse_number(const std::string& cell, std::size_t row, std::string_view col) {
    const char* first = cell.data();
    const char* last = first + cell.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (last[-1] == ' ' || last[-1] == '\t')) --last;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("csv: row " + std::to_string(row + 1) + ", column '" +
                         std::string(col) + "': cannot parse '" + cell + "' as a number");
    if (!(value == value) || value == __builtin_huge_val() || value == -__builtin_huge_val())
        throw ParseError("csv: row " + std::to_string(row + 1) + ", column '" +
                         std::string(col) + "': non-finite value");
    return value;
}

}  // namespace svymix::csv

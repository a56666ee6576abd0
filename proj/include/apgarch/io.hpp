#pragma once

// CSV ingestion of price/return columns and CSV output of simulated paths.

#include "apgarch/errors.hpp"
#include "apgarch/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace apgarch::io {

enum class Transform { None, LogReturns, PctReturns };

inline Transform parse_transform(const std::string& s) {
    if (s == "none") return Transform::None;
    if (s == "log_returns") return Transform::LogReturns;
    if (s == "pct_returns") return Transform::PctReturns;
    throw PreconditionError("unknown transform '" + s + "' (expected none, log_returns, pct_returns)");
}

inline std::string to_string(Transform t) {
    switch (t) {
        case Transform::None: return "none";
        case Transform::LogReturns: return "log_returns";
        case Transform::PctReturns: return "pct_returns";
    }
    return "unknown";
}

struct DatasetSpec {
    std::string path;
    std::string column = "0";   // header name, or zero-based index
    Transform transform = Transform::LogReturns;
    double scale = 100.0;
    char delimiter = ',';
    std::size_t min_length = 50;
};

/// Raw numeric column plus the 1-based file row of each value.
struct Column {
    std::vector<double> values;
    std::vector<std::size_t> rows;
    bool had_header = false;
};

namespace detail {

inline std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, delim)) out.push_back(cell);
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

inline std::string strip(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\"");
    return s.substr(b, e - b + 1);
}

inline bool parse_number(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* b = s.data();
    if (*b == '+') ++b;
    const auto res = std::from_chars(b, s.data() + s.size(), v);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(v);
}

inline bool is_missing(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null" || s == ".";
}

}  // namespace detail

/// Reads one column. The header is detected when the first non-empty row's
/// selected field is not numeric (or the column is selected by name).
inline Column read_column(const DatasetSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) throw DataError(spec.path + ": cannot open file");
    std::string line;
    std::size_t row = 0;
    Column col;
    long index = -1;
    {
        const auto& c = spec.column;
        long v = 0;
        const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
        if (!c.empty() && res.ec == std::errc() && res.ptr == c.data() + c.size() && v >= 0) index = v;
    }
    std::vector<std::size_t> missing_rows;
    bool first = true;
    while (std::getline(in, line)) {
        ++row;
        if (detail::strip(line).empty()) continue;
        const auto fields = detail::split(line, spec.delimiter);
        if (first) {
            first = false;
            if (index < 0) {
                for (std::size_t i = 0; i < fields.size(); ++i)
                    if (detail::strip(fields[i]) == spec.column) index = static_cast<long>(i);
                if (index < 0) throw DataError(spec.path + ": column '" + spec.column + "' not found in header");
                col.had_header = true;
                continue;
            }
            double probe = 0.0;
            if (static_cast<std::size_t>(index) < fields.size() &&
                !detail::parse_number(detail::strip(fields[index]), probe) &&
                !detail::is_missing(detail::strip(fields[index]))) {
                col.had_header = true;
                continue;
            }
        }
        if (static_cast<std::size_t>(index) >= fields.size()) {
            missing_rows.push_back(row);
            continue;
        }
        const std::string cell = detail::strip(fields[index]);
        double v = 0.0;
        if (detail::is_missing(cell)) {
            missing_rows.push_back(row);
            continue;
        }
        if (!detail::parse_number(cell, v))
            throw DataError(spec.path + ": row " + std::to_string(row) + ": '" + cell + "' is not a finite number");
        col.values.push_back(v);
        col.rows.push_back(row);
    }
    if (!missing_rows.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing_rows.size() && i < 20; ++i)
            list += (i ? ", " : "") + std::to_string(missing_rows[i]);
        if (missing_rows.size() > 20) list += ", ...";
        throw DataError(spec.path + ": missing values at rows " + list);
    }
    if (col.values.empty()) throw DataError(spec.path + ": no data rows");
    return col;
}

/// Applies the transform; log and percentage returns drop the first row.
inline std::vector<double> transform_column(const Column& col, Transform transform, double scale,
                                            const std::string& source = "data") {
    std::vector<double> out;
    if (transform == Transform::None) {
        out.reserve(col.values.size());
        for (double v : col.values) out.push_back(v * scale);
        return out;
    }
    for (std::size_t i = 0; i < col.values.size(); ++i)
        if (!(col.values[i] > 0.0))
            throw DataError(source + ": row " + std::to_string(col.rows[i]) + ": price " +
                            std::to_string(col.values[i]) + " is not positive");
    for (std::size_t i = 1; i < col.values.size(); ++i) {
        const double prev = col.values[i - 1];
        const double cur = col.values[i];
        out.push_back(transform == Transform::LogReturns ? scale * (std::log(cur) - std::log(prev))
                                                         : scale * (cur / prev - 1.0));
    }
    return out;
}

inline Series load_series(const DatasetSpec& spec) {
    const Column col = read_column(spec);
    auto values = transform_column(col, spec.transform, spec.scale, spec.path);
    if (values.size() < spec.min_length)
        throw DataError(spec.path + ": only " + std::to_string(values.size()) +
                        " observations after transform (need " + std::to_string(spec.min_length) + ")");
    return Series(std::move(values));
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes columns (t, epsilon, zeta) with 17 significant digits.
inline void write_simulation_csv(const std::string& path, const Series& series, const VolatilityPath& vol) {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << "t,epsilon,zeta\n";
    for (std::size_t t = 0; t < series.size(); ++t)
        out << (t + 1) << ',' << format_double(series[t]) << ',' << format_double(vol.zeta[t]) << '\n';
    if (!out) throw DataError(path + ": write failed");
}

}  // namespace apgarch::io

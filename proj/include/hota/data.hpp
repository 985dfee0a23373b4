#pragma once

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hota/errors.hpp"
#include "hota/random.hpp"

namespace hota {

/// Four multinomial cell counts of the genetic linkage experiment.
struct LinkageData {
    std::array<int, 4> counts{};
    int n() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
};

struct CensoredRow {
    double time = 0.0;       // log10 failure or censoring time
    double x = 0.0;          // covariate
    bool censored = false;
};

/// Normal linear regression with right censoring.
struct CensoredRegData {
    std::vector<CensoredRow> rows;
    std::size_t uncensored() const {
        return static_cast<std::size_t>(
            std::count_if(rows.begin(), rows.end(), [](const CensoredRow& r) { return !r.censored; }));
    }
};

/// Binary regression data; the first column of X is the intercept.
struct LogisticData {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> covariate_names;
};

enum class Schema { linkage, censreg, logistic };

using Dataset = std::variant<LinkageData, CensoredRegData, LogisticData>;

inline LinkageData reference_linkage_data() { return LinkageData{{14, 0, 1, 5}}; }

/// Covariate x from a temperature in degrees Celsius.
inline double arrhenius_covariate(double celsius) { return 1000.0 / (celsius + 273.2); }

// Validation --------------------------------------------------------------

inline void validate(const LinkageData& d) {
    for (int c : d.counts)
        if (c < 0) throw ValidationError("linkage: counts must be nonnegative");
    if (d.n() <= 0) throw ValidationError("linkage: total count n must be positive");
}

inline void validate(const CensoredRegData& d) {
    if (d.rows.empty()) throw ValidationError("censreg: no rows");
    for (const auto& r : d.rows)
        if (!std::isfinite(r.time) || !std::isfinite(r.x))
            throw ValidationError("censreg: non-finite value");
    if (d.uncensored() == 0)
        throw ValidationError("censreg: invariant m >= 1 violated (all rows censored)");
}

inline void validate(const LogisticData& d) {
    if (d.X.rows() == 0) throw ValidationError("logistic: no rows");
    if (d.X.rows() != d.y.size()) throw ValidationError("logistic: X and y row counts differ");
    if (!d.X.allFinite()) throw ValidationError("logistic: non-finite covariate");
    if ((d.X.col(0).array() != 1.0).any())
        throw ValidationError("logistic: first design column must be the intercept");
    for (Eigen::Index i = 0; i < d.y.size(); ++i)
        if (d.y[i] != 0.0 && d.y[i] != 1.0) throw ValidationError("logistic: response must be 0 or 1");
}

// CSV ingestion ------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_number(const std::string& field, std::size_t line) {
    if (field.empty()) throw ParseError("empty field", line);
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v))
        throw ParseError("not a finite number: '" + field + "'", line);
    return v;
}

/// Header-mapped table: one numeric row per data line, columns reordered to
/// the requested names.
struct Table {
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> line_numbers;
};

inline Table read_table(std::istream& in, const std::vector<std::string>& columns) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) {
            header = split_fields(line);
            break;
        }
    }
    if (header.empty()) throw ParseError("missing header row", std::max<std::size_t>(lineno, 1));
    std::vector<std::size_t> index;
    for (const auto& name : columns) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError("header is missing column '" + name + "'", lineno);
        index.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    Table table;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             lineno);
        std::vector<double> row;
        for (auto k : index) row.push_back(parse_number(fields[k], lineno));
        table.rows.push_back(std::move(row));
        table.line_numbers.push_back(lineno);
    }
    return table;
}

inline bool is_integer(double v) { return std::floor(v) == v; }

}  // namespace detail

inline LinkageData read_linkage(std::istream& in) {
    const auto t = detail::read_table(in, {"y1", "y2", "y3", "y4"});
    if (t.rows.size() != 1)
        throw ParseError("linkage data must have exactly one data row, found " + std::to_string(t.rows.size()),
                         t.line_numbers.empty() ? 1 : t.line_numbers.back());
    LinkageData d;
    for (int k = 0; k < 4; ++k) {
        const double v = t.rows[0][k];
        if (!detail::is_integer(v) || v < 0) throw ParseError("counts must be nonnegative integers", t.line_numbers[0]);
        d.counts[k] = static_cast<int>(v);
    }
    validate(d);
    return d;
}

inline CensoredRegData read_censreg(std::istream& in) {
    const auto t = detail::read_table(in, {"time", "x", "censored"});
    CensoredRegData d;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        if (r[2] != 0.0 && r[2] != 1.0) throw ParseError("censored must be 0 or 1", t.line_numbers[i]);
        d.rows.push_back({r[0], r[1], r[2] == 1.0});
    }
    validate(d);
    return d;
}

inline const std::vector<std::string>& logistic_columns() {
    static const std::vector<std::string> cols{"gravity", "ph", "osmo", "conduct", "urea", "calc"};
    return cols;
}

inline LogisticData read_logistic(std::istream& in) {
    auto cols = logistic_columns();
    cols.push_back("y");
    const auto t = detail::read_table(in, cols);
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    const auto p = static_cast<Eigen::Index>(logistic_columns().size());
    LogisticData d;
    d.X.resize(n, p + 1);
    d.y.resize(n);
    d.covariate_names = logistic_columns();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = t.rows[static_cast<std::size_t>(i)];
        d.X(i, 0) = 1.0;
        for (Eigen::Index j = 0; j < p; ++j) d.X(i, j + 1) = r[static_cast<std::size_t>(j)];
        const double y = r[static_cast<std::size_t>(p)];
        if (y != 0.0 && y != 1.0)
            throw ParseError("response y must be 0 or 1", t.line_numbers[static_cast<std::size_t>(i)]);
        d.y[i] = y;
    }
    validate(d);
    return d;
}

namespace detail {

template <class F>
auto with_file(const std::string& path, F&& reader) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset file '" + path + "'");
    return reader(in);
}

}  // namespace detail

inline LinkageData load_linkage(const std::string& path) { return detail::with_file(path, read_linkage); }
inline CensoredRegData load_censreg(const std::string& path) { return detail::with_file(path, read_censreg); }
inline LogisticData load_logistic(const std::string& path) { return detail::with_file(path, read_logistic); }

inline Dataset load_dataset(const std::string& path, Schema schema) {
    switch (schema) {
        case Schema::linkage: return load_linkage(path);
        case Schema::censreg: return load_censreg(path);
        case Schema::logistic: return load_logistic(path);
    }
    throw ValidationError("unknown schema");
}

// Synthetic stand-ins ------------------------------------------------------

/// Multinomial linkage counts with cell probabilities
/// (1/2 + theta/4, (1 - theta)/4, (1 - theta)/4, theta/4).
inline LinkageData synthetic_linkage(int n, double theta, std::uint64_t seed) {
    if (n < 1 || !(theta > 0.0 && theta < 1.0)) throw ValidationError("synthetic_linkage: need n >= 1 and 0 < theta < 1");
    const std::array<double, 4> p{0.5 + theta / 4.0, (1.0 - theta) / 4.0, (1.0 - theta) / 4.0, theta / 4.0};
    std::mt19937_64 eng(seed);
    LinkageData d{{0, 0, 0, 0}};
    for (int i = 0; i < n; ++i) {
        double u = open_uniform(eng);
        std::size_t k = 0;
        while (k < 3 && u >= p[k]) u -= p[k++];
        ++d.counts[k];
    }
    validate(d);
    return d;
}

/// Censored normal regression y = b0 + b1 x + sigma e with x ~ U(-1, 1).
/// Observations above the (1 - censor_fraction) sample quantile are censored
/// at that quantile, so the censored share is exact.
inline CensoredRegData synthetic_censreg(std::size_t n, double censor_fraction, std::uint64_t seed,
                                         double beta0 = 1.0, double beta1 = 2.0, double sigma = 0.5) {
    std::mt19937_64 eng(seed);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = 2.0 * open_uniform(eng) - 1.0;
        y[i] = beta0 + beta1 * x[i] + sigma * standard_normal(eng);
    }
    const auto n_cens = static_cast<std::size_t>(std::llround(censor_fraction * static_cast<double>(n)));
    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - beta1 * x[i];
    auto sorted = residual;
    std::sort(sorted.begin(), sorted.end());
    CensoredRegData d;
    const double cut = n_cens == 0 ? std::numeric_limits<double>::infinity() : sorted[n - n_cens];
    for (std::size_t i = 0; i < n; ++i) {
        // Censoring limit is expressed on the residual scale so that the
        // censored rows are spread across x.
        const bool cens = residual[i] >= cut;
        d.rows.push_back({cens ? cut + beta1 * x[i] : y[i], x[i], cens});
    }
    validate(d);
    return d;
}

/// Logistic regression with an intercept and six standard normal covariates.
inline LogisticData synthetic_logistic(std::size_t n, std::uint64_t seed) {
    static const std::array<double, 7> beta{-0.3, 0.8, -0.6, 0.4, 0.0, 0.3, -0.7};
    std::mt19937_64 eng(seed);
    LogisticData d;
    const auto rows = static_cast<Eigen::Index>(n);
    d.X.resize(rows, 7);
    d.y.resize(rows);
    d.covariate_names = logistic_columns();
    for (Eigen::Index i = 0; i < rows; ++i) {
        d.X(i, 0) = 1.0;
        double eta = beta[0];
        for (int j = 1; j < 7; ++j) {
            d.X(i, j) = standard_normal(eng);
            eta += beta[static_cast<std::size_t>(j)] * d.X(i, j);
        }
        d.y[i] = open_uniform(eng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    }
    validate(d);
    return d;
}

}  // namespace hota

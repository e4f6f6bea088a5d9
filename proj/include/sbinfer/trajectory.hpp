#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sbinfer/env.hpp"
#include "sbinfer/policy.hpp"

namespace sbinfer {

/// One step of a run: context, exploration rate, propensities, action, reward.
struct LogRow {
    std::size_t t = 0;
    Vector x;
    double eps = 0.0;
    std::vector<double> pv;
    std::size_t a = 0;
    double y = 0.0;
    // Present only when ground truth is known.
    std::optional<std::size_t> optimal_arm;
    std::optional<double> regret;
};

/// Append-only record of a single run.
class TrajectoryLog {
public:
    TrajectoryLog() = default;
    TrajectoryLog(std::size_t K, std::size_t d) : K_(K), d_(d) {}

    void append(LogRow row) {
        if (row.t != rows_.size() + 1) throw ConfigError("log rows must have t = 1, 2, ...");
        if (static_cast<std::size_t>(row.x.size()) != d_) throw DimensionMismatch("log row context length != d");
        if (row.pv.size() != K_) throw DimensionMismatch("log row propensity length != K");
        if (row.a >= K_) throw ConfigError("log row action out of range");
        double sum = 0.0;
        for (double p : row.pv) sum += p;
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("log row propensities do not sum to 1");
        rows_.push_back(std::move(row));
    }

    std::size_t arms() const noexcept { return K_; }
    std::size_t dim() const noexcept { return d_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }
    const std::vector<LogRow>& rows() const noexcept { return rows_; }
    const LogRow& operator[](std::size_t i) const { return rows_[i]; }
    void reserve(std::size_t n) { rows_.reserve(n); }

private:
    std::size_t K_ = 0;
    std::size_t d_ = 0;
    std::vector<LogRow> rows_;
};

namespace detail {

/// Shortest round-trip representation.
inline std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

// CSV layout: t,eps,p0..p{K-1},a,y,opt_arm,regret,x1..xd
inline void write_log_csv(const TrajectoryLog& log, std::ostream& out) {
    out << "t,eps";
    for (std::size_t i = 0; i < log.arms(); ++i) out << ",p" << i;
    out << ",a,y,opt_arm,regret";
    for (std::size_t j = 1; j <= log.dim(); ++j) out << ",x" << j;
    out << '\n';
    for (const auto& r : log.rows()) {
        out << r.t << ',' << detail::fmt_double(r.eps);
        for (double p : r.pv) out << ',' << detail::fmt_double(p);
        out << ',' << r.a << ',' << detail::fmt_double(r.y) << ',';
        if (r.optimal_arm) out << *r.optimal_arm;
        out << ',';
        if (r.regret) out << detail::fmt_double(*r.regret);
        for (Eigen::Index j = 0; j < r.x.size(); ++j) out << ',' << detail::fmt_double(r.x(j));
        out << '\n';
    }
}

inline void write_log_csv(const TrajectoryLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write log: " + path);
    write_log_csv(log, out);
    if (!out) throw IoError("write failed: " + path);
}

inline TrajectoryLog read_log_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    const auto header = detail::split_csv(detail::trim(line));
    std::size_t K = 0;
    while (2 + K < header.size() && header[2 + K].size() > 1 && header[2 + K][0] == 'p') ++K;
    if (header.size() < 6 + K) throw ParseError(1, "log header too short");
    const std::size_t d = header.size() - 6 - K;
    TrajectoryLog log(K, d);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        const auto c = detail::split_csv(trimmed);
        if (c.size() != header.size()) throw ParseError(lineno, "wrong column count");
        LogRow r;
        std::size_t col = 0;
        auto num = [&](std::size_t k) {
            double v = 0.0;
            if (!detail::parse_double(c[k], v)) throw ParseError(lineno, "bad number in column " + std::to_string(k + 1));
            return v;
        };
        auto idx = [&](std::size_t k) {
            std::size_t v = 0;
            if (!detail::parse_index(c[k], v)) throw ParseError(lineno, "bad index in column " + std::to_string(k + 1));
            return v;
        };
        r.t = idx(col++);
        r.eps = num(col++);
        for (std::size_t i = 0; i < K; ++i) r.pv.push_back(num(col++));
        r.a = idx(col++);
        r.y = num(col++);
        if (!detail::trim(c[col]).empty()) r.optimal_arm = idx(col);
        ++col;
        if (!detail::trim(c[col]).empty()) r.regret = num(col);
        ++col;
        r.x.resize(static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j) r.x(static_cast<Eigen::Index>(j)) = num(col++);
        try {
            log.append(std::move(r));
        } catch (const Error& e) {
            throw ParseError(lineno, e.what());
        }
    }
    return log;
}

inline TrajectoryLog read_log_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open log: " + path);
    return read_log_csv(in);
}

}  // namespace sbinfer

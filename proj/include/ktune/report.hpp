#pragma once

#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "ktune/errors.hpp"
#include "ktune/format.hpp"
#include "ktune/stats.hpp"
#include "ktune/tuner.hpp"

namespace ktune {

/// RFC 4180 field quoting: fields containing a comma, quote or line break
/// are wrapped in quotes with inner quotes doubled; everything else passes
/// through untouched.
inline std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\r\n") == std::string::npos) {
        return text;
    }
    std::string out = "\"";
    for (char c: text) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

namespace detail {

inline void csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out << ',';
        }
        out << csv_field(fields[i]);
    }
    out << "\r\n";  // RFC 4180 rows end in CRLF
}

inline std::string join_sizes(const std::vector<size_t>& sizes) {
    std::string out;
    for (size_t i = 0; i < sizes.size(); ++i) {
        if (i > 0) {
            out += 'x';
        }
        out += std::to_string(sizes[i]);
    }
    return out;
}

}  // namespace detail

/// One row per evaluated configuration, in trace order. Times use the
/// shortest round-trip decimal form, so rewriting the same outcome is
/// byte-identical.
inline void write_results_csv(std::ostream& out,
                              const TuningOutcome& outcome) {
    detail::csv_row(out, {"step", "config", "status", "time_ms", "global",
                          "local", "best_so_far", "verified"});
    for (const TuningRow& row: outcome.rows) {
        detail::csv_row(
            out,
            {std::to_string(row.step), row.config.canonical(),
             to_string(row.status),
             row.time_ms ? format_double(*row.time_ms) : "",
             detail::join_sizes(row.sizes.global),
             detail::join_sizes(row.sizes.local),
             row.best_so_far ? format_double(*row.best_so_far) : "",
             to_string(row.verification)});
    }
}

/// The best-of-run record behind each violin-plot sample.
struct RunSummary {
    size_t run = 0;
    uint64_t seed = 0;
    double best_time_ms = 0.0;
    std::string best_config;
};

inline void write_runs_csv(std::ostream& out,
                           const std::vector<RunSummary>& runs) {
    detail::csv_row(out, {"run", "seed", "best_time_ms", "best_config"});
    for (const RunSummary& run: runs) {
        detail::csv_row(out, {std::to_string(run.run),
                              std::to_string(run.seed),
                              format_double(run.best_time_ms),
                              run.best_config});
    }
}

/// Two-column stats layout: a block of summary statistics, then a marker row
/// `density_x,density_y` followed by the 256 density samples.
inline void write_stats_csv(std::ostream& out, const ExperimentStats& stats) {
    detail::csv_row(out, {"statistic", "value"});
    detail::csv_row(out, {"count", std::to_string(stats.summary.count)});
    detail::csv_row(out, {"mean", format_double(stats.summary.mean)});
    detail::csv_row(out, {"std", format_double(stats.summary.stddev)});
    detail::csv_row(out, {"min", format_double(stats.summary.min)});
    detail::csv_row(out, {"max", format_double(stats.summary.max)});
    detail::csv_row(out, {"density_x", "density_y"});
    for (size_t i = 0; i < stats.density.x.size(); ++i) {
        detail::csv_row(out, {format_double(stats.density.x[i]),
                              format_double(stats.density.y[i])});
    }
}

/// Opens `path` in binary mode (report bytes must not vary by platform) and
/// hands the stream to `write`.
template <typename Write>
inline void save_report(const std::string& path, Write&& write) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open \"" + path + "\" for writing");
    }
    write(out);
    out.flush();
    if (!out) {
        throw Error("failed while writing \"" + path + "\"");
    }
}

}  // namespace ktune

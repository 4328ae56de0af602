#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ktune/errors.hpp"

namespace ktune {

// =============================================================================
// Summary statistics
// =============================================================================

struct Summary {
    size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single value
    double min = 0.0;
    double max = 0.0;
};

inline Summary summarize(const std::vector<double>& values) {
    if (values.empty()) {
        throw Error("cannot summarize an empty sample");
    }
    Summary summary;
    summary.count = values.size();
    summary.min = values.front();
    summary.max = values.front();
    double sum = 0.0;
    for (double v: values) {
        sum += v;
        summary.min = std::min(summary.min, v);
        summary.max = std::max(summary.max, v);
    }
    summary.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double squares = 0.0;
        for (double v: values) {
            squares += (v - summary.mean) * (v - summary.mean);
        }
        summary.stddev =
            std::sqrt(squares / static_cast<double>(values.size() - 1));
    }
    return summary;
}

namespace detail {

/// Linear-interpolation quantile (the common "type 7" definition) over an
/// already sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    double index = p * static_cast<double>(sorted.size() - 1);
    size_t lo = static_cast<size_t>(index);
    size_t hi = std::min(lo + 1, sorted.size() - 1);
    double weight = index - static_cast<double>(lo);
    return sorted[lo] * (1.0 - weight) + sorted[hi] * weight;
}

}  // namespace detail

// =============================================================================
// Kernel density estimation
// =============================================================================

/// A Gaussian kernel density estimate sampled on an even grid spanning the
/// sample range. The density is renormalized so its trapezoid-rule integral
/// over the grid is exactly 1 (a raw Gaussian KDE leaks tail mass beyond
/// [min, max]).
struct Kde {
    std::vector<double> x;
    std::vector<double> y;
    double bandwidth = 0.0;
};

/// Silverman's rule-of-thumb bandwidth: 0.9 * min(sd, iqr/1.34) * n^(-1/5).
/// When one of the two spread measures degenerates to zero the other is
/// used; when both do (all samples equal) the estimate falls back to a fixed
/// bump of width 0.25 centered on the common value.
inline Kde kde(const std::vector<double>& samples, size_t points = 256) {
    if (samples.empty()) {
        throw Error("cannot estimate a density from an empty sample");
    }
    if (points < 2) {
        throw Error("a density grid needs at least two points");
    }
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    const double n = static_cast<double>(sorted.size());

    Summary summary = summarize(samples);
    double iqr = detail::quantile_sorted(sorted, 0.75)
                 - detail::quantile_sorted(sorted, 0.25);
    double spread = 0.0;
    if (summary.stddev > 0.0 && iqr > 0.0) {
        spread = std::min(summary.stddev, iqr / 1.34);
    } else if (summary.stddev > 0.0) {
        spread = summary.stddev;
    } else if (iqr > 0.0) {
        spread = iqr / 1.34;
    }

    Kde estimate;
    double left = lo;
    double right = hi;
    if (spread > 0.0) {
        estimate.bandwidth = 0.9 * spread * std::pow(n, -0.2);
    } else {
        estimate.bandwidth = 0.25;
        left = lo - 1.0;
        right = hi + 1.0;
    }

    const double dx = (right - left) / static_cast<double>(points - 1);
    const double scale =
        1.0 / (n * estimate.bandwidth * std::sqrt(2.0 * 3.14159265358979323846));
    estimate.x.resize(points);
    estimate.y.resize(points);
    for (size_t i = 0; i < points; ++i) {
        double xi = left + dx * static_cast<double>(i);
        double density = 0.0;
        for (double s: sorted) {
            double z = (xi - s) / estimate.bandwidth;
            density += std::exp(-0.5 * z * z);
        }
        estimate.x[i] = xi;
        estimate.y[i] = density * scale;
    }

    double integral = 0.0;
    for (size_t i = 0; i + 1 < points; ++i) {
        integral += 0.5 * (estimate.y[i] + estimate.y[i + 1]) * dx;
    }
    for (double& y: estimate.y) {
        y /= integral;
    }
    return estimate;
}

/// The distribution of best-of-run times across repeated searches (or of all
/// times across a fully enumerated space), summarized and density-estimated
/// for violin plots.
struct ExperimentStats {
    std::vector<double> values;
    Summary summary;
    Kde density;
};

inline ExperimentStats make_experiment_stats(std::vector<double> values,
                                             size_t points = 256) {
    ExperimentStats stats;
    stats.summary = summarize(values);
    stats.density = kde(values, points);
    stats.values = std::move(values);
    return stats;
}

}  // namespace ktune

#pragma once

// KPSS level-stationarity test, constant-only ADF test and the chunked
// stationarity-fraction analysis.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "plnoise/parallel.hpp"

namespace plnoise {

enum class TestId { kpss_level, adf, ljung_box };
enum class Decision { reject, fail_to_reject };

struct TestOutcome {
    double statistic = 0.0;
    double critical_value = 0.0;
    double alpha = 0.05;
    Decision decision = Decision::fail_to_reject;
    TestId test_id = TestId::kpss_level;
    bool degenerate = false; ///< zero-variance input, decision by convention
};

/// KPSS critical values for alpha in {0.10, 0.05, 0.025, 0.01}.
/// Verified against a Monte Carlo of the limiting integral of the squared
/// Brownian bridge before being hard-coded (see test suite).
inline double kpss_critical_value(double alpha) {
    if (alpha == 0.10) return 0.347;
    if (alpha == 0.05) return 0.463;
    if (alpha == 0.025) return 0.574;
    if (alpha == 0.01) return 0.739;
    throw std::invalid_argument("kpss_critical_value: alpha must be one of 0.10/0.05/0.025/0.01");
}

/// Newey-West bandwidth for the KPSS long-run variance. The short-lag rule
/// floor(4*(T/100)^(1/4)) is floored at 8: short chunks need the wider kernel
/// to keep near-random-walk data from blowing up the statistic, and at
/// T >= 1000 the floor leaves size and power untouched.
inline int kpss_auto_bandwidth(std::size_t n) {
    const int l = static_cast<int>(4.0 * std::pow(static_cast<double>(n) / 100.0, 0.25));
    return std::max(8, l);
}

inline constexpr int kpss_bandwidth_auto = -1;

/// KPSS test of level stationarity (null: stationary around a constant).
/// statistic = T^-2 sum S_t^2 / s^2(l) with Bartlett-kernel long-run variance;
/// rejects when statistic > critical value.
inline TestOutcome kpss_level(std::span<const double> series, double alpha = 0.05,
                              int bandwidth = kpss_bandwidth_auto) {
    const std::size_t n = series.size();
    if (n < 10) throw std::invalid_argument("kpss_level: need at least 10 samples");
    TestOutcome out;
    out.test_id = TestId::kpss_level;
    out.alpha = alpha;
    out.critical_value = kpss_critical_value(alpha);

    double mean = 0.0;
    for (double x : series) mean += x;
    mean /= static_cast<double>(n);

    std::vector<double> e(n);
    double g0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        e[i] = series[i] - mean;
        g0 += e[i] * e[i];
    }
    if (g0 == 0.0) { // constant series: stationary by convention, flagged
        out.degenerate = true;
        out.decision = Decision::fail_to_reject;
        return out;
    }

    double s = 0.0, num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += e[i];
        num += s * s;
    }
    num /= static_cast<double>(n) * static_cast<double>(n);

    const int l = bandwidth == kpss_bandwidth_auto ? kpss_auto_bandwidth(n) : bandwidth;
    if (l < 0) throw std::invalid_argument("kpss_level: negative bandwidth");
    double s2 = g0;
    for (int j = 1; j <= l && static_cast<std::size_t>(j) < n; ++j) {
        double g = 0.0;
        for (std::size_t i = static_cast<std::size_t>(j); i < n; ++i)
            g += e[i] * e[i - static_cast<std::size_t>(j)];
        s2 += 2.0 * (1.0 - static_cast<double>(j) / (l + 1.0)) * g;
    }
    s2 /= static_cast<double>(n);
    if (s2 <= 0.0) { // kernel sum can cancel on pathological input
        out.degenerate = true;
        out.decision = Decision::fail_to_reject;
        return out;
    }

    out.statistic = num / s2;
    out.decision = out.statistic > out.critical_value ? Decision::reject
                                                      : Decision::fail_to_reject;
    return out;
}

/// Finite-sample ADF critical value, constant-only regression. MacKinnon
/// (2010) response surface for alpha in {0.01, 0.05, 0.10}; the 0.025 entry
/// is the asymptotic Dickey-Fuller value.
inline double adf_critical_value(double alpha, std::size_t n) {
    const double T = static_cast<double>(n);
    if (alpha == 0.01) return -3.43035 - 6.5393 / T - 16.786 / (T * T) - 79.433 / (T * T * T);
    if (alpha == 0.025) return -3.12;
    if (alpha == 0.05) return -2.86154 - 2.8903 / T - 4.234 / (T * T) - 40.040 / (T * T * T);
    if (alpha == 0.10) return -2.56677 - 1.5384 / T - 2.809 / (T * T);
    throw std::invalid_argument("adf_critical_value: alpha must be one of 0.10/0.05/0.025/0.01");
}

namespace detail {

// Solve A x = b for a small symmetric positive definite A (in-place Cholesky).
// Returns false if A is (numerically) singular.
inline bool solve_spd(std::vector<double>& a, std::vector<double>& b, int k) {
    for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) {
            double sum = a[static_cast<std::size_t>(i) * k + j];
            for (int m = 0; m < i; ++m)
                sum -= a[static_cast<std::size_t>(i) * k + m] * a[static_cast<std::size_t>(j) * k + m];
            if (i == j) {
                if (sum <= 0.0) return false;
                a[static_cast<std::size_t>(i) * k + i] = std::sqrt(sum);
            } else {
                a[static_cast<std::size_t>(j) * k + i] = sum / a[static_cast<std::size_t>(i) * k + i];
            }
        }
    }
    for (int i = 0; i < k; ++i) {
        double sum = b[static_cast<std::size_t>(i)];
        for (int m = 0; m < i; ++m) sum -= a[static_cast<std::size_t>(i) * k + m] * b[m];
        b[static_cast<std::size_t>(i)] = sum / a[static_cast<std::size_t>(i) * k + i];
    }
    for (int i = k - 1; i >= 0; --i) {
        double sum = b[static_cast<std::size_t>(i)];
        for (int m = i + 1; m < k; ++m) sum -= a[static_cast<std::size_t>(m) * k + i] * b[m];
        b[static_cast<std::size_t>(i)] = sum / a[static_cast<std::size_t>(i) * k + i];
    }
    return true;
}

} // namespace detail

/// Augmented Dickey-Fuller test, constant-only regression
///   dy_t = a + rho*y_{t-1} + sum_i g_i dy_{t-i} + e_t
/// Null: unit root (rho = 0); rejects when the t-statistic on rho is below
/// the critical value.
inline TestOutcome adf(std::span<const double> series, int lag_order, double alpha = 0.05) {
    if (lag_order < 0) throw std::invalid_argument("adf: negative lag order");
    const std::size_t n = series.size();
    if (n < static_cast<std::size_t>(lag_order) + 10)
        throw std::invalid_argument("adf: series too short for lag order");

    TestOutcome out;
    out.test_id = TestId::adf;
    out.alpha = alpha;
    out.critical_value = adf_critical_value(alpha, n);

    const std::size_t rows = n - 1 - static_cast<std::size_t>(lag_order);
    const int k = 2 + lag_order; // intercept, y_{t-1}, lagged diffs
    // regressor order: [1, y_{t-1}, dy_{t-1}, ..., dy_{t-p}]
    std::vector<double> xtx(static_cast<std::size_t>(k) * k, 0.0);
    std::vector<double> xty(static_cast<std::size_t>(k), 0.0);
    std::vector<double> row(static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + 1 + static_cast<std::size_t>(lag_order); // index of y_t
        const double dy = series[t] - series[t - 1];
        row[0] = 1.0;
        row[1] = series[t - 1];
        for (int i = 1; i <= lag_order; ++i)
            row[static_cast<std::size_t>(1 + i)] =
                series[t - static_cast<std::size_t>(i)] - series[t - static_cast<std::size_t>(i) - 1];
        for (int i = 0; i < k; ++i) {
            for (int j = i; j < k; ++j)
                xtx[static_cast<std::size_t>(i) * k + j] += row[static_cast<std::size_t>(i)] * row[static_cast<std::size_t>(j)];
            xty[static_cast<std::size_t>(i)] += row[static_cast<std::size_t>(i)] * dy;
        }
    }
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < i; ++j)
            xtx[static_cast<std::size_t>(i) * k + j] = xtx[static_cast<std::size_t>(j) * k + i];

    std::vector<double> beta = xty;
    std::vector<double> chol = xtx;
    if (!detail::solve_spd(chol, beta, k)) {
        out.degenerate = true;
        out.decision = Decision::fail_to_reject;
        return out;
    }

    // residual variance and se(rho): s^2 * [(X'X)^-1]_{11}
    double rss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + 1 + static_cast<std::size_t>(lag_order);
        double pred = beta[0] + beta[1] * series[t - 1];
        for (int i = 1; i <= lag_order; ++i)
            pred += beta[static_cast<std::size_t>(1 + i)] *
                    (series[t - static_cast<std::size_t>(i)] - series[t - static_cast<std::size_t>(i) - 1]);
        const double resid = (series[t] - series[t - 1]) - pred;
        rss += resid * resid;
    }
    if (rows <= static_cast<std::size_t>(k)) {
        out.degenerate = true;
        out.decision = Decision::fail_to_reject;
        return out;
    }
    const double s2 = rss / static_cast<double>(rows - static_cast<std::size_t>(k));
    // column of (X'X)^-1 for the rho coefficient
    std::vector<double> unit(static_cast<std::size_t>(k), 0.0);
    unit[1] = 1.0;
    std::vector<double> chol2 = xtx;
    if (!detail::solve_spd(chol2, unit, k) || unit[1] <= 0.0 || s2 <= 0.0) {
        out.degenerate = true;
        out.decision = Decision::fail_to_reject;
        return out;
    }
    out.statistic = beta[1] / std::sqrt(s2 * unit[1]);
    out.decision = out.statistic < out.critical_value ? Decision::reject
                                                      : Decision::fail_to_reject;
    return out;
}

struct ChunkedResult {
    double fraction_stationary = 0.0; ///< (#fail-to-reject) / (#chunks)
    std::size_t chunk_count = 0;
    std::size_t degenerate_count = 0; ///< zero-variance chunks (counted stationary)
};

/// Disjoint consecutive chunks of chunk_len, KPSS on each; the trailing
/// partial chunk is dropped.
inline ChunkedResult chunked_stationarity(std::span<const double> series,
                                          std::size_t chunk_len, double alpha = 0.05,
                                          int bandwidth = kpss_bandwidth_auto) {
    if (chunk_len < 10 || chunk_len > series.size())
        throw std::invalid_argument("chunked_stationarity: chunk_len out of [10, length]");
    const std::size_t chunks = series.size() / chunk_len;
    if (chunks == 0) throw std::invalid_argument("chunked_stationarity: zero complete chunks");

    std::vector<TestOutcome> results(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        results[c] = kpss_level(series.subspan(c * chunk_len, chunk_len), alpha, bandwidth);
    });
    ChunkedResult out;
    out.chunk_count = chunks;
    for (const auto& r : results) {
        if (r.decision == Decision::fail_to_reject) ++out.fraction_stationary;
        if (r.degenerate) ++out.degenerate_count;
    }
    out.fraction_stationary /= static_cast<double>(chunks);
    return out;
}

struct StationarityCurve {
    std::vector<std::size_t> chunk_lengths;
    std::vector<ChunkedResult> results; ///< parallel to chunk_lengths
};

inline StationarityCurve stationarity_curve(std::span<const double> series,
                                            const std::vector<std::size_t>& lengths,
                                            double alpha = 0.05,
                                            int bandwidth = kpss_bandwidth_auto) {
    StationarityCurve out;
    out.chunk_lengths = lengths;
    for (std::size_t len : lengths)
        out.results.push_back(chunked_stationarity(series, len, alpha, bandwidth));
    return out;
}

} // namespace plnoise

#pragma once

// Autocorrelation with Bartlett significance bounds and the Ljung-Box
// portmanteau test. Long-lag ACF goes through the spectral route.

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "plnoise/math.hpp"
#include "plnoise/stationarity.hpp" // TestOutcome

namespace plnoise {

namespace detail {

// In-place iterative radix-2 FFT (inverse via conjugation). Power-of-two n.
inline void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * math::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

// Autocovariances g(0..max_lag) (sums, not normalized) via zero-padded FFT.
inline std::vector<double> autocov_fft(std::span<const double> e, std::size_t max_lag) {
    std::size_t n = 1;
    while (n < 2 * e.size()) n <<= 1;
    std::vector<std::complex<double>> a(n);
    for (std::size_t i = 0; i < e.size(); ++i) a[i] = e[i];
    fft(a, false);
    for (auto& x : a) x = std::norm(x);
    fft(a, true);
    std::vector<double> g(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) g[k] = a[k].real();
    return g;
}

} // namespace detail

struct AcfResult {
    std::vector<int> lags;      ///< 1..max_lag
    std::vector<double> values; ///< rho(k)
    double bartlett_bound = 0.0;
    std::size_t n = 0;
};

/// Two-sided Bartlett significance bound b = z_{1-alpha/2} / sqrt(n).
inline double bartlett_bound(std::size_t n, double alpha = 0.05) {
    if (n < 2) throw std::invalid_argument("bartlett_bound: n >= 2");
    return math::normal_quantile(1.0 - alpha / 2.0) / std::sqrt(static_cast<double>(n));
}

/// Sample ACF rho(k) = sum (x_t - m)(x_{t+k} - m) / sum (x_t - m)^2, biased
/// denominator, full-sample mean. Direct summation up to 64 lags, FFT beyond.
inline AcfResult acf(std::span<const double> series, int max_lag, double alpha = 0.05) {
    const std::size_t n = series.size();
    if (max_lag < 1 || static_cast<std::size_t>(max_lag) >= n)
        throw std::invalid_argument("acf: need length > max_lag >= 1");

    double mean = 0.0;
    for (double x : series) mean += x;
    mean /= static_cast<double>(n);

    std::vector<double> e(n);
    double g0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        e[i] = series[i] - mean;
        g0 += e[i] * e[i];
    }
    if (g0 == 0.0) throw std::invalid_argument("acf: zero-variance series");

    AcfResult out;
    out.n = n;
    out.bartlett_bound = bartlett_bound(n, alpha);
    out.lags.resize(static_cast<std::size_t>(max_lag));
    out.values.resize(static_cast<std::size_t>(max_lag));
    if (max_lag <= 64) {
        for (int k = 1; k <= max_lag; ++k) {
            double g = 0.0;
            for (std::size_t i = static_cast<std::size_t>(k); i < n; ++i)
                g += e[i] * e[i - static_cast<std::size_t>(k)];
            out.lags[static_cast<std::size_t>(k - 1)] = k;
            out.values[static_cast<std::size_t>(k - 1)] = g / g0;
        }
    } else {
        const auto g = detail::autocov_fft(e, static_cast<std::size_t>(max_lag));
        for (int k = 1; k <= max_lag; ++k) {
            out.lags[static_cast<std::size_t>(k - 1)] = k;
            out.values[static_cast<std::size_t>(k - 1)] = g[static_cast<std::size_t>(k)] / g[0];
        }
    }
    return out;
}

/// Ljung-Box Q = T(T+2) sum_{k=1..L} rho(k)^2/(T-k); rejects independence
/// when Q exceeds the chi-square(1-alpha, L) quantile.
inline TestOutcome ljung_box(std::span<const double> series, int lag_count,
                             double alpha = 0.05) {
    const std::size_t n = series.size();
    if (lag_count < 1 || static_cast<std::size_t>(lag_count) >= n)
        throw std::invalid_argument("ljung_box: need length > L >= 1");
    const auto rho = acf(series, lag_count);
    double q = 0.0;
    const double T = static_cast<double>(n);
    for (int k = 1; k <= lag_count; ++k)
        q += rho.values[static_cast<std::size_t>(k - 1)] * rho.values[static_cast<std::size_t>(k - 1)] /
             (T - static_cast<double>(k));
    q *= T * (T + 2.0);

    TestOutcome out;
    out.test_id = TestId::ljung_box;
    out.statistic = q;
    out.alpha = alpha;
    out.critical_value = math::chi_square_quantile(1.0 - alpha, static_cast<double>(lag_count));
    out.decision = q > out.critical_value ? Decision::reject : Decision::fail_to_reject;
    return out;
}

} // namespace plnoise

#pragma once

// Special functions used by the statistical tests and fitters. Everything is
// self-contained so test decisions do not depend on platform libm quirks
// beyond std::lgamma/std::erf.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace plnoise::math {

inline constexpr double pi = 3.14159265358979323846;

/// Standard normal CDF.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Standard normal quantile (inverse CDF), Wichura's AS241 algorithm.
/// Accurate to ~1e-15 over p in (0, 1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::abs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double v;
    if (r <= 5.0) {
        r -= 1.6;
        v = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -v : v;
}

/// Digamma function (derivative of log Gamma), real x > 0.
inline double digamma(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("digamma: x must be > 0");
    double result = 0.0;
    while (x < 10.0) {  // recurrence into the asymptotic range
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x, inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
                      inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    return result;
}

namespace detail {

// Lower regularized incomplete gamma by series, for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma by Lentz continued fraction, x >= a + 1.
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace detail

/// Lower regularized incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    return x < a + 1.0 ? detail::gamma_p_series(a, x) : 1.0 - detail::gamma_q_cf(a, x);
}

/// Chi-square CDF with k degrees of freedom.
inline double chi_square_cdf(double x, double k) {
    if (x <= 0.0) return 0.0;
    return gamma_p(0.5 * k, 0.5 * x);
}

/// Chi-square quantile via Newton on the regularized incomplete gamma with a
/// bisection fallback; no external tables.
inline double chi_square_quantile(double p, double k) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi_square_quantile: p in (0,1)");
    if (!(k > 0.0)) throw std::invalid_argument("chi_square_quantile: k > 0");
    // Wilson-Hilferty start
    const double z = normal_quantile(p);
    const double c = 2.0 / (9.0 * k);
    double x = k * std::pow(1.0 - c + z * std::sqrt(c), 3);
    if (!(x > 0.0)) x = 1e-8;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200; ++it) {
        const double f = chi_square_cdf(x, k) - p;
        if (f > 0.0) hi = x; else lo = x;
        const double pdf = std::exp((0.5 * k - 1.0) * std::log(0.5 * x) - 0.5 * x -
                                    std::lgamma(0.5 * k)) * 0.5;
        double step = pdf > 0.0 ? f / pdf : 0.0;
        double next = x - step;
        if (!(next > lo) || !(next < hi) || pdf <= 0.0)
            next = std::isinf(hi) ? x * 2.0 : 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-12 * std::max(1.0, x)) { x = next; break; }
        x = next;
    }
    return x;
}

namespace detail {

// Continued fraction for the incomplete beta function (Lentz).
inline double beta_cf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d; if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c; if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d; if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c; if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double beta_inc(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
    if (x < (a + 1.0) / (a + b + 2.0))
        return std::exp(ln) * detail::beta_cf(a, b, x) / a;
    return 1.0 - std::exp(ln) * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Student-t CDF with nu degrees of freedom (location 0, scale 1).
inline double student_t_cdf(double x, double nu) {
    if (!(nu > 0.0)) throw std::invalid_argument("student_t_cdf: nu > 0");
    const double half = 0.5 * beta_inc(0.5 * nu, 0.5, nu / (nu + x * x));
    return x >= 0.0 ? 1.0 - half : half;
}

} // namespace plnoise::math

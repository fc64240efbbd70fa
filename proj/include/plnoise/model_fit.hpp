#pragma once

// Differencing, maximum-likelihood fitting of the level-change distribution
// (t location-scale against the usual suspects) and the steady-state burst
// analysis with its geometric run-length law.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "plnoise/math.hpp"

namespace plnoise {

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// d(t) = n(t) - n(t-1).
inline std::vector<double> difference(std::span<const double> series) {
    if (series.size() < 2) throw std::invalid_argument("difference: need length >= 2");
    std::vector<double> d(series.size() - 1);
    for (std::size_t i = 1; i < series.size(); ++i) d[i - 1] = series[i] - series[i - 1];
    return d;
}

/// Inverse of difference() given the anchor n(1).
inline std::vector<double> cumulative_sum(std::span<const double> d, double anchor) {
    std::vector<double> out(d.size() + 1);
    out[0] = anchor;
    for (std::size_t i = 0; i < d.size(); ++i) out[i + 1] = out[i] + d[i];
    return out;
}

struct TLocationScale {
    double mu = 0.0;
    double sigma = 1.0;
    double nu = 4.0;
    double loglik = 0.0;

    double log_pdf(double x) const {
        const double z = (x - mu) / sigma;
        return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
               0.5 * std::log(nu * math::pi) - std::log(sigma) -
               0.5 * (nu + 1.0) * std::log1p(z * z / nu);
    }

    double pdf(double x) const { return std::exp(log_pdf(x)); }

    double cdf(double x) const {
        return math::student_t_cdf((x - mu) / sigma, nu);
    }
};

namespace detail {

struct Weighted {
    std::span<const double> x;
    std::span<const double> w; // empty = unit weights
    double weight(std::size_t i) const { return w.empty() ? 1.0 : w[i]; }
    double total() const {
        if (w.empty()) return static_cast<double>(x.size());
        double s = 0.0;
        for (double v : w) s += v;
        return s;
    }
};

inline double t_loglik(const Weighted& data, double mu, double sigma, double nu) {
    const double c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                     0.5 * std::log(nu * math::pi) - std::log(sigma);
    double s = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        const double z = (data.x[i] - mu) / sigma;
        s += data.weight(i) * (c - 0.5 * (nu + 1.0) * std::log1p(z * z / nu));
    }
    return s;
}

// Weighted median / MAD for robust initialization.
inline double weighted_median(std::vector<std::pair<double, double>>& xv) {
    std::sort(xv.begin(), xv.end());
    double total = 0.0;
    for (const auto& p : xv) total += p.second;
    double cum = 0.0;
    for (const auto& p : xv) {
        cum += p.second;
        if (cum >= 0.5 * total) return p.first;
    }
    return xv.back().first;
}

/// Nelder-Mead with restarts. Returns best point; fills best_value.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> start, double scale,
                                       double& best_value, int max_iter = 4000,
                                       int restarts = 2, double tol = 1e-10) {
    const std::size_t n = start.size();
    auto run = [&](std::vector<double> x0, double h) {
        std::vector<std::vector<double>> simplex(n + 1, x0);
        for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += h;
        std::vector<double> fv(n + 1);
        for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);
        for (int it = 0; it < max_iter; ++it) {
            // order
            std::vector<std::size_t> idx(n + 1);
            for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
            std::vector<std::vector<double>> s2(n + 1);
            std::vector<double> f2(n + 1);
            for (std::size_t i = 0; i <= n; ++i) { s2[i] = simplex[idx[i]]; f2[i] = fv[idx[i]]; }
            simplex = std::move(s2);
            fv = std::move(f2);

            double diam = 0.0;
            for (std::size_t i = 1; i <= n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    diam = std::max(diam, std::abs(simplex[i][j] - simplex[0][j]) /
                                              std::max(1.0, std::abs(simplex[0][j])));
            if (diam < 1e-8 && std::abs(fv[n] - fv[0]) < tol * std::max(1.0, std::abs(fv[0])))
                break;

            std::vector<double> centroid(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
            auto point = [&](double coef) {
                std::vector<double> p(n);
                for (std::size_t j = 0; j < n; ++j)
                    p[j] = centroid[j] + coef * (simplex[n][j] - centroid[j]);
                return p;
            };
            auto xr = point(-1.0);
            const double fr = f(xr);
            if (fr < fv[0]) {
                auto xe = point(-2.0);
                const double fe = f(xe);
                if (fe < fr) { simplex[n] = xe; fv[n] = fe; }
                else { simplex[n] = xr; fv[n] = fr; }
            } else if (fr < fv[n - 1]) {
                simplex[n] = xr; fv[n] = fr;
            } else {
                auto xc = point(fr < fv[n] ? -0.5 : 0.5);
                const double fc = f(xc);
                if (fc < std::min(fr, fv[n])) { simplex[n] = xc; fv[n] = fc; }
                else { // shrink
                    for (std::size_t i = 1; i <= n; ++i) {
                        for (std::size_t j = 0; j < n; ++j)
                            simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                        fv[i] = f(simplex[i]);
                    }
                }
            }
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i <= n; ++i)
            if (fv[i] < fv[best]) best = i;
        return std::make_pair(simplex[best], fv[best]);
    };

    auto [x, fx] = run(start, scale);
    for (int r = 0; r < restarts; ++r) {
        auto [x2, fx2] = run(x, scale * 0.1);
        if (fx2 >= fx - 1e-12 * std::max(1.0, std::abs(fx))) { x = x2; fx = std::min(fx, fx2); break; }
        x = x2;
        fx = fx2;
    }
    best_value = fx;
    return x;
}

} // namespace detail

/// Analytic gradient of the t location-scale log-likelihood in (mu, sigma, nu).
inline std::array<double, 3> t_loglik_gradient(std::span<const double> data,
                                               double mu, double sigma, double nu,
                                               std::span<const double> weights = {}) {
    double gmu = 0.0, gsigma = 0.0, gnu = 0.0;
    const double dig = math::digamma(0.5 * (nu + 1.0)) - math::digamma(0.5 * nu);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        const double z = (data[i] - mu) / sigma;
        const double denom = nu + z * z;
        gmu += w * (nu + 1.0) * z / (sigma * denom);
        gsigma += w * (-1.0 / sigma + (nu + 1.0) * z * z / (sigma * denom));
        gnu += w * 0.5 * (dig - 1.0 / nu - std::log1p(z * z / nu) +
                          (nu + 1.0) * z * z / (nu * denom));
    }
    return {gmu, gsigma, gnu};
}

/// MLE of the t location-scale parameters. Optimizes (mu, log sigma, log nu)
/// by simplex with restart, initialized from median and MAD.
inline TLocationScale fit_t_location_scale(std::span<const double> data,
                                           std::span<const double> weights = {}) {
    detail::Weighted wd{data, weights};
    if (!weights.empty() && weights.size() != data.size())
        throw std::invalid_argument("fit_t_location_scale: weight/value size mismatch");
    if (wd.total() < 100.0)
        throw std::invalid_argument("fit_t_location_scale: need >= 100 samples");
    for (double x : data)
        if (!std::isfinite(x)) throw std::invalid_argument("fit_t_location_scale: non-finite value");

    std::vector<std::pair<double, double>> xv(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) xv[i] = {data[i], wd.weight(i)};
    const double med = detail::weighted_median(xv);
    for (auto& p : xv) p.first = std::abs(p.first - med);
    const double mad = detail::weighted_median(xv);
    if (mad == 0.0) {
        // fall back to the weighted sd; all-equal data has no spread to fit
        double m = 0.0, s2 = 0.0, tw = wd.total();
        for (std::size_t i = 0; i < data.size(); ++i) m += wd.weight(i) * data[i];
        m /= tw;
        for (std::size_t i = 0; i < data.size(); ++i)
            s2 += wd.weight(i) * (data[i] - m) * (data[i] - m);
        if (s2 == 0.0) throw FitError("fit_t_location_scale: zero-spread data");
    }
    const double sigma0 = mad > 0.0 ? 1.4826 * mad : 1.0;

    auto neg = [&](const std::vector<double>& p) {
        return -detail::t_loglik(wd, p[0], std::exp(p[1]), std::exp(p[2]));
    };
    double best = 0.0;
    const auto p = detail::nelder_mead(neg, {med, std::log(sigma0), std::log(4.0)}, 0.25, best);

    TLocationScale fit;
    fit.mu = p[0];
    fit.sigma = std::exp(p[1]);
    fit.nu = std::exp(p[2]);
    fit.loglik = -best;
    if (!std::isfinite(fit.loglik))
        throw FitError("fit_t_location_scale: optimizer failed to converge");
    return fit;
}

enum class Family { gaussian, laplace, logistic, cauchy, t_location_scale };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::laplace: return "laplace";
        case Family::logistic: return "logistic";
        case Family::cauchy: return "cauchy";
        case Family::t_location_scale: return "t-location-scale";
    }
    return "?";
}

struct FittedFamily {
    Family family = Family::gaussian;
    std::vector<double> params; ///< family-specific, location first
    double loglik = 0.0;
    double aic = 0.0;
    bool ok = false;
    std::string error;
};

struct ModelSelection {
    std::vector<FittedFamily> candidates;
    std::size_t winner = 0; ///< index into candidates, max loglik
    bool near_tie = false;  ///< runner-up loglik within 0.1% of the winner
};

namespace detail {

inline FittedFamily fit_family(Family fam, const Weighted& wd) {
    FittedFamily out;
    out.family = fam;
    const double n = wd.total();
    try {
        double m0 = 0.0, spread = 0.0;
        for (std::size_t i = 0; i < wd.x.size(); ++i) m0 += wd.weight(i) * wd.x[i];
        m0 /= n;
        for (std::size_t i = 0; i < wd.x.size(); ++i)
            spread += wd.weight(i) * std::abs(wd.x[i] - m0);
        if (spread <= 0.0) throw FitError("zero-spread data");
        switch (fam) {
            case Family::gaussian: {
                double m = 0.0, s2 = 0.0;
                for (std::size_t i = 0; i < wd.x.size(); ++i) m += wd.weight(i) * wd.x[i];
                m /= n;
                for (std::size_t i = 0; i < wd.x.size(); ++i)
                    s2 += wd.weight(i) * (wd.x[i] - m) * (wd.x[i] - m);
                s2 /= n;
                if (s2 <= 0.0) throw FitError("zero spread");
                out.params = {m, std::sqrt(s2)};
                out.loglik = -0.5 * n * (std::log(2.0 * math::pi * s2) + 1.0);
                out.aic = 2.0 * 2.0 - 2.0 * out.loglik;
                break;
            }
            case Family::laplace: {
                std::vector<std::pair<double, double>> xv(wd.x.size());
                for (std::size_t i = 0; i < wd.x.size(); ++i) xv[i] = {wd.x[i], wd.weight(i)};
                const double m = weighted_median(xv);
                double b = 0.0;
                for (std::size_t i = 0; i < wd.x.size(); ++i)
                    b += wd.weight(i) * std::abs(wd.x[i] - m);
                b /= n;
                if (b <= 0.0) throw FitError("zero spread");
                out.params = {m, b};
                out.loglik = -n * (std::log(2.0 * b) + 1.0);
                out.aic = 4.0 - 2.0 * out.loglik;
                break;
            }
            case Family::logistic: {
                double m0 = 0.0, s2 = 0.0;
                for (std::size_t i = 0; i < wd.x.size(); ++i) m0 += wd.weight(i) * wd.x[i];
                m0 /= n;
                for (std::size_t i = 0; i < wd.x.size(); ++i)
                    s2 += wd.weight(i) * (wd.x[i] - m0) * (wd.x[i] - m0);
                s2 /= n;
                if (s2 <= 0.0) throw FitError("zero spread");
                const double s0 = std::sqrt(3.0 * s2) / math::pi;
                auto ll = [&](double mu, double s) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < wd.x.size(); ++i) {
                        const double z = (wd.x[i] - mu) / s;
                        acc += wd.weight(i) * (-std::log(s) - z - 2.0 * std::log1p(std::exp(-z)));
                    }
                    return acc;
                };
                auto negf = [&](const std::vector<double>& p) { return -ll(p[0], std::exp(p[1])); };
                double best = 0.0;
                const auto p = nelder_mead(negf, {m0, std::log(s0)}, 0.25, best);
                out.params = {p[0], std::exp(p[1])};
                out.loglik = -best;
                out.aic = 4.0 - 2.0 * out.loglik;
                break;
            }
            case Family::cauchy: {
                std::vector<std::pair<double, double>> xv(wd.x.size());
                for (std::size_t i = 0; i < wd.x.size(); ++i) xv[i] = {wd.x[i], wd.weight(i)};
                const double m0 = weighted_median(xv);
                for (auto& pr : xv) pr.first = std::abs(pr.first - m0);
                const double s0 = std::max(weighted_median(xv), 1e-12);
                auto ll = [&](double mu, double s) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < wd.x.size(); ++i) {
                        const double z = (wd.x[i] - mu) / s;
                        acc += wd.weight(i) * (-std::log(math::pi * s) - std::log1p(z * z));
                    }
                    return acc;
                };
                auto negf = [&](const std::vector<double>& p) { return -ll(p[0], std::exp(p[1])); };
                double best = 0.0;
                const auto p = nelder_mead(negf, {m0, std::log(s0)}, 0.25, best);
                out.params = {p[0], std::exp(p[1])};
                out.loglik = -best;
                out.aic = 4.0 - 2.0 * out.loglik;
                break;
            }
            case Family::t_location_scale: {
                const auto fit = fit_t_location_scale(wd.x, wd.w);
                out.params = {fit.mu, fit.sigma, fit.nu};
                out.loglik = fit.loglik;
                out.aic = 6.0 - 2.0 * out.loglik;
                break;
            }
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

} // namespace detail

/// Fit every candidate family by MLE and pick the max-likelihood winner.
/// Per-family failures are recorded; selection proceeds over survivors.
inline ModelSelection best_fit(std::span<const double> data,
                               const std::vector<Family>& families =
                                   {Family::gaussian, Family::laplace, Family::logistic,
                                    Family::cauchy, Family::t_location_scale},
                               std::span<const double> weights = {}) {
    if (families.empty()) throw std::invalid_argument("best_fit: empty candidate set");
    detail::Weighted wd{data, weights};
    ModelSelection sel;
    for (Family f : families) sel.candidates.push_back(detail::fit_family(f, wd));

    double best = -std::numeric_limits<double>::infinity();
    double second = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < sel.candidates.size(); ++i) {
        if (!sel.candidates[i].ok) continue;
        any = true;
        if (sel.candidates[i].loglik > best) {
            second = best;
            best = sel.candidates[i].loglik;
            sel.winner = i;
        } else if (sel.candidates[i].loglik > second) {
            second = sel.candidates[i].loglik;
        }
    }
    if (!any) throw FitError("best_fit: every candidate family failed");
    if (std::isfinite(second))
        sel.near_tie = std::abs(best - second) <= 1e-3 * std::abs(best);
    return sel;
}

/// Run-length histogram of steady-state bursts: maximal runs of consecutive
/// steps with |d(t)| <= D.
struct BurstHistogram {
    double threshold = 0.0; ///< D, dBuV
    std::map<std::uint64_t, std::uint64_t> counts; ///< run length -> occurrences
    std::uint64_t total_runs = 0;
    std::uint64_t total_steps_in_runs = 0;
    bool censored = false; ///< a run touches the series boundary
};

inline BurstHistogram burst_lengths(std::span<const double> series, double threshold) {
    if (series.size() < 2) throw std::invalid_argument("burst_lengths: need length >= 2");
    BurstHistogram out;
    out.threshold = threshold;
    const double tol = 1e-9; // quantized levels compare exactly up to rounding
    std::uint64_t run = 0;
    for (std::size_t i = 1; i < series.size(); ++i) {
        const bool steady = std::abs(series[i] - series[i - 1]) <= threshold + tol;
        if (steady) {
            ++run;
        } else if (run > 0) {
            ++out.counts[run];
            ++out.total_runs;
            out.total_steps_in_runs += run;
            run = 0;
        }
    }
    if (run > 0) {
        ++out.counts[run];
        ++out.total_runs;
        out.total_steps_in_runs += run;
        out.censored = true;
    }
    return out;
}

struct GeometricFit {
    double p = 0.0;        ///< success probability on {1, 2, ...}
    double chi2 = 0.0;
    double p_value = 0.0;  ///< chi-square goodness over pooled bins
    int dof = 0;
    bool unreliable = false; ///< degenerate histogram, goodness not meaningful
};

/// MLE p_hat = runs / total_length; goodness-of-fit pools tail bins until
/// every expected count is >= 5.
inline GeometricFit geometric_fit(const BurstHistogram& hist) {
    if (hist.total_runs < 30)
        throw std::invalid_argument("geometric_fit: need at least 30 runs");
    GeometricFit out;
    out.p = static_cast<double>(hist.total_runs) /
            static_cast<double>(hist.total_steps_in_runs);
    if (hist.counts.size() < 2 || out.p >= 1.0) {
        out.unreliable = true;
        out.p_value = 0.0;
        return out;
    }

    const double n = static_cast<double>(hist.total_runs);
    const double q = 1.0 - out.p;
    const std::uint64_t max_len = hist.counts.rbegin()->first;

    // expected counts per length, then pool from the right so each bin >= 5
    std::vector<double> expected;
    std::vector<double> observed;
    double tail_exp = 0.0, tail_obs = 0.0;
    for (std::uint64_t k = 1; k <= max_len; ++k) {
        const double e = n * std::pow(q, static_cast<double>(k - 1)) * out.p;
        const auto it = hist.counts.find(k);
        const double o = it == hist.counts.end() ? 0.0 : static_cast<double>(it->second);
        expected.push_back(e);
        observed.push_back(o);
    }
    // mass beyond max_len folds into the last bin
    tail_exp = n * std::pow(q, static_cast<double>(max_len));
    expected.back() += tail_exp;
    (void)tail_obs;

    std::vector<double> pe, po;
    double accE = 0.0, accO = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        accE += expected[i];
        accO += observed[i];
        const double remaining = [&] {
            double r = 0.0;
            for (std::size_t j = i + 1; j < expected.size(); ++j) r += expected[j];
            return r;
        }();
        if (accE >= 5.0 && (remaining >= 5.0 || i + 1 == expected.size())) {
            pe.push_back(accE);
            po.push_back(accO);
            accE = accO = 0.0;
        }
    }
    if (accE > 0.0 || accO > 0.0) {
        if (pe.empty()) { pe.push_back(accE); po.push_back(accO); }
        else { pe.back() += accE; po.back() += accO; }
    }

    out.dof = static_cast<int>(pe.size()) - 2; // one estimated parameter
    if (out.dof < 1) {
        out.unreliable = true;
        return out;
    }
    for (std::size_t i = 0; i < pe.size(); ++i)
        out.chi2 += (po[i] - pe[i]) * (po[i] - pe[i]) / pe[i];
    out.p_value = 1.0 - math::chi_square_cdf(out.chi2, out.dof);
    return out;
}

/// R^2 of log10(survival) regressed on run length over lengths [2, 100]
/// present in the histogram: the straight-line signature of a geometric law.
/// Lengths whose surviving-run count falls below min_count are excluded; the
/// log of a handful of Poisson counts is noise, not signal.
inline double survival_loglinearity(const BurstHistogram& hist,
                                    std::uint64_t lo = 2, std::uint64_t hi = 100,
                                    std::uint64_t min_count = 10) {
    std::vector<double> xs, ys;
    const double n = static_cast<double>(hist.total_runs);
    for (std::uint64_t k = lo; k <= hi; ++k) {
        std::uint64_t ge = 0;
        for (auto it = hist.counts.lower_bound(k); it != hist.counts.end(); ++it)
            ge += it->second;
        if (ge < min_count) break;
        xs.push_back(static_cast<double>(k));
        ys.push_back(std::log10(static_cast<double>(ge) / n));
    }
    if (xs.size() < 3) throw std::invalid_argument("survival_loglinearity: too few points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (syy == 0.0) return 1.0;
    return sxy * sxy / (sxx * syy);
}

struct DerivativeMass {
    double p_zero = 0.0;       ///< P(d = 0)
    double p_within_1 = 0.0;   ///< P(|d| <= 1)
    double p_within_3 = 0.0;   ///< P(|d| <= 3)
};

inline DerivativeMass derivative_mass_report(std::span<const double> d_series) {
    if (d_series.empty()) throw std::invalid_argument("derivative_mass_report: empty input");
    const double tol = 1e-9;
    std::uint64_t z = 0, w1 = 0, w3 = 0;
    for (double d : d_series) {
        const double a = std::abs(d);
        if (a <= tol) ++z;
        if (a <= 1.0 + tol) ++w1;
        if (a <= 3.0 + tol) ++w3;
    }
    const double n = static_cast<double>(d_series.size());
    return {static_cast<double>(z) / n, static_cast<double>(w1) / n,
            static_cast<double>(w3) / n};
}

} // namespace plnoise

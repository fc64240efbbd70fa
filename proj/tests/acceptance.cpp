// Acceptance suite: ten end-to-end checks covering test calibration, ACF and
// MLE correctness, model selection, the geometric burst law, synthesis
// round-trips, accumulator exactness, throughput and determinism. Prints one
// PASS/FAIL line per criterion; exit status is the number of failures.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plnoise/config.hpp"
#include "plnoise/dependence.hpp"
#include "plnoise/math.hpp"
#include "plnoise/model_fit.hpp"
#include "plnoise/parallel.hpp"
#include "plnoise/pipeline.hpp"
#include "plnoise/rng.hpp"
#include "plnoise/spectral.hpp"
#include "plnoise/stationarity.hpp"
#include "plnoise/synthesis.hpp"

using namespace plnoise;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("criterion %2d [%s]: %s (%s)\n", id, name, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

long vm_hwm_kb() {
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("VmHWM:", 0) == 0) return std::strtol(line.c_str() + 6, nullptr, 10);
    return -1;
}

fs::path work_dir() {
    const fs::path p = fs::temp_directory_path() / "plnoise_acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---- criteria -------------------------------------------------------------

void criterion_1() {
    const auto t0 = clock_type::now();
    const int R = 10000;
    const std::size_t T = 1000;
    std::atomic<int> rej_iid{0}, rej_rw{0};
    parallel_for(R, [&](std::size_t r) {
        Rng rng = Rng::derive(1001, r);
        std::vector<double> x(T);
        for (auto& v : x) v = rng.normal();
        if (kpss_level(x).decision == Decision::reject) ++rej_iid;
        double s = 0.0;
        for (auto& v : x) {
            s += rng.normal();
            v = s;
        }
        if (kpss_level(x).decision == Decision::reject) ++rej_rw;
    });
    const double iid = rej_iid / static_cast<double>(R);
    const double rw = rej_rw / static_cast<double>(R);
    const double el = seconds_since(t0);
    report(1, "kpss calibration",
           iid >= 0.04 && iid <= 0.06 && rw >= 0.99 && el <= 60.0,
           fmt("iid rejection %.4f, random-walk rejection %.4f, %.1fs", iid, rw, el));
}

void criterion_2() {
    const int R = 10000, L = 10;
    const std::size_t T = 10000;
    std::atomic<int> rej{0};
    parallel_for(R, [&](std::size_t r) {
        Rng rng = Rng::derive(2002, r);
        std::vector<double> x(T);
        for (auto& v : x) v = rng.normal();
        if (ljung_box(x, L).decision == Decision::reject) ++rej;
    });
    const double rate = rej / static_cast<double>(R);
    const double cv = math::chi_square_quantile(0.95, 10.0);
    report(2, "ljung-box calibration",
           rate >= 0.04 && rate <= 0.06 && std::abs(cv - 18.307) <= 1e-3,
           fmt("rejection %.4f, chi2(0.95,10) = %.5f", rate, cv));
}

void criterion_3() {
    const std::vector<double> tiny = {1, 2, 3, 4, 5};
    const double rho1 = acf(tiny, 1).values[0];
    bool ok = rho1 == 0.4;
    std::string detail = fmt("rho(1) = %.17g", rho1);

    Rng rng(3003);
    const std::size_t T = 100000;
    std::vector<double> x(T);
    double prev = 0.0;
    for (auto& v : x) {
        prev = 0.7 * prev + rng.normal();
        v = prev;
    }
    const auto r = acf(x, 5);
    double worst = 0.0;
    for (int k = 1; k <= 5; ++k)
        worst = std::max(worst, std::abs(r.values[k - 1] - std::pow(0.7, k)));
    ok = ok && worst <= 0.02;
    detail += fmt(", AR(1) worst |err| = %.4f", worst);

    const double b = bartlett_bound(639000, 0.05);
    ok = ok && std::abs(b - 0.00245) <= 1e-5;
    detail += fmt(", bound(639000) = %.7f", b);
    report(3, "acf correctness", ok, detail);
}

void criterion_4() {
    Rng rng(4004);
    std::vector<double> x(100000);
    for (auto& v : x) v = rng.student_t(3.0);
    const auto fit = fit_t_location_scale(x);
    bool ok = std::abs(fit.mu) <= 0.02 && std::abs(fit.sigma - 1.0) <= 0.03 &&
              std::abs(fit.nu - 3.0) <= 0.21;
    std::string detail =
        fmt("mu %.4f, sigma %.4f, nu %.4f", fit.mu, fit.sigma, fit.nu);

    // analytic vs central-difference gradients at 20 random parameter points
    std::vector<double> small(x.begin(), x.begin() + 500);
    double worst = 0.0;
    for (int p = 0; p < 20; ++p) {
        const double mu = 2.0 * rng.uniform() - 1.0;
        const double sigma = 0.5 + 2.5 * rng.uniform();
        const double nu = 1.0 + 9.0 * rng.uniform();
        const auto g = t_loglik_gradient(small, mu, sigma, nu);
        auto ll = [&](double m, double s, double n) {
            double acc = 0.0;
            TLocationScale t{m, s, n, 0.0};
            for (double v : small) acc += t.log_pdf(v);
            return acc;
        };
        const double h = 1e-5;
        const std::array<double, 3> fd = {
            (ll(mu + h, sigma, nu) - ll(mu - h, sigma, nu)) / (2 * h),
            (ll(mu, sigma + h, nu) - ll(mu, sigma - h, nu)) / (2 * h),
            (ll(mu, sigma, nu + h) - ll(mu, sigma, nu - h)) / (2 * h)};
        for (int i = 0; i < 3; ++i)
            worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max(1.0, std::abs(g[i])));
    }
    ok = ok && worst <= 1e-5;
    detail += fmt(", gradient worst rel err = %.2e", worst);
    report(4, "mle recovery", ok, detail);
}

void criterion_5() {
    Rng rng(5005);
    const TLocationScale params{1.8e-3, 3.47, 2.87, 0.0};
    std::vector<double> x(1000000);
    for (auto& v : x) v = sample_t_location_scale(params, rng);
    const auto sel = best_fit(x);
    const auto& win = sel.candidates[sel.winner];
    report(5, "model selection", win.family == Family::t_location_scale,
           fmt("winner = %s, loglik = %.1f", family_name(win.family), win.loglik));
}

void criterion_6() {
    bool ok = true;
    std::string detail;
    for (double p : {0.3, 0.5, 0.8}) {
        Rng rng(6006 + static_cast<std::uint64_t>(p * 10));
        BurstHistogram h;
        std::uint64_t cur = 0;
        while (h.total_runs < 100000) {
            if (rng.uniform() < p) {
                ++cur;
            } else if (cur > 0) {
                ++h.counts[cur];
                ++h.total_runs;
                h.total_steps_in_runs += cur;
                cur = 0;
            }
        }
        const auto g = geometric_fit(h);
        ok = ok && !g.unreliable && g.p_value > 0.01;
        detail += fmt("p=%.1f: pval %.3f; ", p, g.p_value);
    }

    const auto model =
        NoiseModel::with_uniform_anchor({1.8e-3, 3.47, 2.87, 0.0}, 1, 68.0, 6006, 0.01);
    const auto series = synthesize(model, 1000000, 0);
    const auto hist = burst_lengths(series, 3.0);
    const double r2 = survival_loglinearity(hist, 2, 100);
    ok = ok && r2 >= 0.98;
    detail += fmt("survival R^2 = %.4f", r2);
    report(6, "geometric burst law", ok, detail);
}

RunConfig roundtrip_config(const fs::path& dir) {
    RunConfig c;
    c.freq_count = 8;
    c.synth_freq_count = 8;
    c.synth_length = 125000;
    c.seed = 7007;
    c.input = (dir / "roundtrip.bin").string();
    c.output_dir = (dir / "roundtrip_reports").string();
    return c;
}

void criterion_7(const fs::path& dir) {
    auto c = roundtrip_config(dir);
    write_synthetic_trace(c, c.input);
    const auto res = run_pipeline(c);
    if (res.exit_code != 0) {
        report(7, "synthesis roundtrip", false, fmt("pipeline exit %d", res.exit_code));
        return;
    }
    const auto j = nlohmann::json::parse(slurp(fs::path(c.output_dir) / "fit.json"));
    const double sigma = j["t_fit"]["sigma"].get<double>();
    const double nu = j["t_fit"]["nu"].get<double>();

    // mean stationary fraction across channel rows at chunk length 30
    double frac = 0.0;
    int rows = 0;
    std::istringstream ss(slurp(fs::path(c.output_dir) / "stationarity.csv"));
    std::string line;
    std::getline(ss, line);
    while (std::getline(ss, line)) {
        double len, channel, f, degen;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &len, &channel, &f, &degen) == 4 &&
            len == 30.0) {
            frac += f;
            ++rows;
        }
    }
    frac = rows > 0 ? frac / rows : 0.0;
    const bool ok = std::abs(sigma - 3.47) <= 0.05 * 3.47 &&
                    std::abs(nu - 2.87) <= 0.10 * 2.87 && frac >= 0.90;
    report(7, "synthesis roundtrip", ok,
           fmt("sigma %.3f, nu %.3f, stationary fraction @30 = %.3f", sigma, nu, frac));
}

void criterion_8() {
    const auto grid = FrequencyGrid::prime_default();
    const QuantizationPolicy q;
    SpectralAccumulator full(grid, q), a(grid, q), b(grid, q);
    Rng rng(8008);
    std::set<std::uint32_t> freqs;
    while (freqs.size() < 50)
        freqs.insert(static_cast<std::uint32_t>(rng.uniform() * grid.count()));

    std::vector<std::vector<double>> snapped(grid.count());
    for (std::uint32_t f : freqs) {
        auto& vals = snapped[f];
        vals.reserve(100000);
        for (int i = 0; i < 100000; ++i) {
            double level = 68.0 + 8.0 * rng.normal();
            level = std::min(std::max(level, q.min()), q.max());
            full.add(f, level);
            (i % 2 == 0 ? a : b).add(f, level);
            vals.push_back(q.dequantize(q.quantize(level)));
        }
        std::sort(vals.begin(), vals.end());
    }
    a.merge(b);

    bool ok = true;
    std::string detail = "quantiles exact";
    for (std::uint32_t f : freqs) {
        const auto& vals = snapped[f];
        for (double p : {0.1, 0.25, 0.5, 0.9, 0.99}) {
            const auto idx = static_cast<std::size_t>(
                std::max<std::uint64_t>(
                    1, static_cast<std::uint64_t>(std::ceil(p * vals.size()))) - 1);
            if (full.quantile(f, p) != vals[idx] || a.quantile(f, p) != vals[idx]) {
                ok = false;
                detail = fmt("quantile mismatch at freq %u p %.2f", f, p);
            }
        }
        const auto sf = full.summary(f);
        const auto sm = a.summary(f);
        const double dm = std::abs(sf->mean - sm->mean) / std::max(1.0, std::abs(sf->mean));
        const double dv =
            std::abs(sf->variance - sm->variance) / std::max(1.0, sf->variance);
        if (dm > 1e-9 || dv > 1e-9) {
            ok = false;
            detail = fmt("merge moment drift %g / %g at freq %u", dm, dv, f);
        }
    }
    report(8, "accumulator exactness", ok, detail);
}

void criterion_9(const fs::path& dir) {
    RunConfig c;
    c.synth_freq_count = c.freq_count; // 776
    c.synth_length = 12887;            // 776 * 12887 = 10,000,312 samples
    c.seed = 9009;
    c.input = (dir / "big.bin").string();
    c.output_dir = (dir / "big_reports").string();
    write_synthetic_trace(c, c.input);

    auto t0 = clock_type::now();
    TraceReader reader(c.input, TraceFormat::packed_binary);
    NoiseSample s;
    std::uint64_t n = 0;
    double checksum = 0.0;
    while (reader.next(s)) {
        ++n;
        checksum += s.level;
    }
    const double read_s = seconds_since(t0);
    const double rate = static_cast<double>(n) / read_s;

    t0 = clock_type::now();
    const auto res = run_pipeline(c);
    const double pipe_s = seconds_since(t0);
    const long hwm = vm_hwm_kb();

    const bool ok = res.exit_code == 0 && pipe_s <= 60.0 && hwm > 0 &&
                    hwm <= 512 * 1024 && rate >= 1e7 && checksum != 0.0;
    report(9, "throughput", ok,
           fmt("ingest %.1fM samples/s, pipeline %.1fs on %llu samples, peak %ld MB",
               rate / 1e6, pipe_s, static_cast<unsigned long long>(n), hwm / 1024));
}

void criterion_10(const fs::path& dir) {
    auto c1 = roundtrip_config(dir); // trace already written by criterion 7
    c1.output_dir = (dir / "det1").string();
    auto c2 = c1;
    c2.output_dir = (dir / "det2").string();
    const auto r1 = run_pipeline(c1);
    const auto r2 = run_pipeline(c2);
    bool ok = r1.exit_code == 0 && r2.exit_code == 0;
    std::string detail = "all reports byte-identical";
    for (const char* f :
         {"gap_report.csv", "frequency_summary.csv", "regions.json",
          "global_distribution.csv", "moving_stats.csv", "stationarity.csv", "acf.csv",
          "fit.json", "bursts.json"}) {
        if (slurp(fs::path(c1.output_dir) / f) != slurp(fs::path(c2.output_dir) / f)) {
            ok = false;
            detail = fmt("%s differs between runs", f);
        }
    }
    report(10, "determinism", ok, detail);
}

} // namespace

int main() {
    const auto dir = work_dir();
    auto guarded = [&](int id, const char* name, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(id, name, false, std::string("exception: ") + e.what());
        }
    };
    guarded(1, "kpss calibration", [&] { criterion_1(); });
    guarded(2, "ljung-box calibration", [&] { criterion_2(); });
    guarded(3, "acf correctness", [&] { criterion_3(); });
    guarded(4, "mle recovery", [&] { criterion_4(); });
    guarded(5, "model selection", [&] { criterion_5(); });
    guarded(6, "geometric burst law", [&] { criterion_6(); });
    guarded(7, "synthesis roundtrip", [&] { criterion_7(dir); });
    guarded(8, "accumulator exactness", [&] { criterion_8(); });
    guarded(9, "throughput", [&] { criterion_9(dir); });
    guarded(10, "determinism", [&] { criterion_10(dir); });
    fs::remove_all(dir);
    std::printf("%s (%d/10 passed)\n", g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
                10 - g_failures);
    return g_failures;
}

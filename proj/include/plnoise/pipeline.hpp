#pragma once

// End-to-end run: one ingest pass feeding every analysis stage, each stage
// writing its report file. Stage failures are recorded in the manifest and
// do not stop independent stages. All report files are byte-reproducible
// under a fixed seed and config; wall-clock timings live only in the
// manifest.

#include <chrono>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "plnoise/config.hpp"
#include "plnoise/dependence.hpp"
#include "plnoise/ingest.hpp"
#include "plnoise/model_fit.hpp"
#include "plnoise/parallel.hpp"
#include "plnoise/spectral.hpp"
#include "plnoise/stationarity.hpp"
#include "plnoise/synthesis.hpp"
#include "plnoise/trace.hpp"

namespace plnoise {

inline constexpr const char* kToolkitVersion = "1.0.0";

struct StageReport {
    std::string name;
    bool ran = false;
    bool ok = false;
    std::string error;
    double seconds = 0.0;
};

struct PipelineResult {
    std::vector<StageReport> stages;
    bool ingest_ok = false;
    std::uint64_t total_samples = 0;
    int exit_code = 0; ///< 0 ok, 3 ingest error, 4 stage failure
    std::string manifest_path;
};

namespace detail {

inline void appendf(std::string& out, const char* fmt, ...) {
    char buf[256];
    va_list args;
    va_start(args, fmt);
    const int n = std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    if (n > 0) out.append(buf, static_cast<std::size_t>(n));
}

inline void write_file(const std::string& path, const std::string& content) {
    FilePtr f = open_file(path, "wb");
    if (std::fwrite(content.data(), 1, content.size(), f.get()) != content.size())
        throw std::runtime_error("short write to " + path);
}

} // namespace detail

/// The synthesis model implied by a run configuration.
inline NoiseModel model_from_config(const RunConfig& c) {
    return NoiseModel::with_uniform_anchor(
        {c.synth_mu, c.synth_sigma, c.synth_nu, 0.0}, c.synth_freq_count, c.synth_anchor,
        c.seed, c.synth_kappa, c.synth_half_band, c.quantization());
}

/// Generates a trace file from the configured model: synth_length ticks of
/// synth_freq_count frequencies, time-major, timestamps on the nominal grid.
inline void write_synthetic_trace(const RunConfig& c, const std::string& path) {
    const NoiseModel model = model_from_config(c);
    std::vector<std::vector<double>> series(c.synth_freq_count);
    parallel_for(c.synth_freq_count, [&](std::size_t f) {
        series[f] = synthesize(model, c.synth_length, static_cast<std::uint32_t>(f));
    });
    TraceWriter w(path, c.format == "csv" ? TraceFormat::csv : TraceFormat::packed_binary);
    NoiseSample s;
    for (std::size_t t = 0; t < c.synth_length; ++t) {
        s.timestamp = static_cast<double>(t) * c.nominal_period;
        for (std::uint32_t f = 0; f < c.synth_freq_count; ++f) {
            s.freq_index = f;
            s.level = series[f][t];
            w.write(s);
        }
    }
    w.close();
}

namespace detail {

struct IngestData {
    GapReport gaps;
    std::map<std::uint32_t, RegularSeries> series; ///< regular per-frequency levels
};

// One pass: histogram/moment accumulation, gap analysis, regularization.
inline IngestData ingest_pass(const RunConfig& c, SpectralAccumulator& acc) {
    TraceReader reader(c.input,
                       c.format == "csv" ? TraceFormat::csv : TraceFormat::packed_binary);
    GapAnalyzer gaps(c.nominal_period);
    const GapPolicy policy = c.gap_policy == "skip"    ? GapPolicy::skip
                             : c.gap_policy == "error" ? GapPolicy::error_above
                                                       : GapPolicy::hold_last;
    Regularizer reg(c.nominal_period, policy);
    NoiseSample s;
    while (reader.next(s)) {
        acc.accumulate(s);
        gaps.add(s);
        reg.add(s);
    }
    if (acc.total_count() == 0) throw IngestError(c.input + ": empty input");
    IngestData out;
    out.gaps = gaps.finish();
    out.series = reg.take();
    return out;
}

} // namespace detail

/// Runs the requested stages ("qa", "spectrum", "stationarity", "dependence",
/// "fit", "bursts"; empty = all) and writes the report bundle plus
/// manifest.json into config.output_dir.
inline PipelineResult run_pipeline(const RunConfig& c,
                                   std::vector<std::string> stages = {}) {
    using clock = std::chrono::steady_clock;
    using detail::appendf;
    using nlohmann::json;

    c.validate();
    if (stages.empty())
        stages = {"qa", "spectrum", "stationarity", "dependence", "fit", "bursts"};
    auto enabled = [&](const char* name) {
        for (const auto& s : stages)
            if (s == name) return true;
        return false;
    };

    std::filesystem::create_directories(c.output_dir);
    const auto out_path = [&](const char* file) {
        return (std::filesystem::path(c.output_dir) / file).string();
    };

    PipelineResult res;
    const FrequencyGrid grid = c.grid();
    SpectralAccumulator acc(grid, c.quantization());
    detail::IngestData data;

    auto run_stage = [&](const char* name, bool run, auto&& fn) {
        StageReport st;
        st.name = name;
        if (run) {
            st.ran = true;
            const auto t0 = clock::now();
            try {
                fn();
                st.ok = true;
            } catch (const std::exception& e) {
                st.error = e.what();
            }
            st.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        }
        res.stages.push_back(std::move(st));
    };

    run_stage("ingest", true, [&] {
        data = detail::ingest_pass(c, acc);
        res.total_samples = acc.total_count();
    });
    res.ingest_ok = res.stages.back().ok;

    auto series_of = [&](std::uint32_t f) -> std::span<const double> {
        const auto it = data.series.find(f);
        if (it == data.series.end()) return {};
        return it->second.values;
    };

    run_stage("qa", res.ingest_ok && enabled("qa"), [&] {
        std::string out = "gap_s,count\n";
        for (const auto& [ms, n] : data.gaps.gap_histogram)
            appendf(out, "%.3f,%llu\n", static_cast<double>(ms) / 1000.0,
                    static_cast<unsigned long long>(n));
        detail::write_file(out_path("gap_report.csv"), out);
    });

    run_stage("spectrum", res.ingest_ok && enabled("spectrum"), [&] {
        const auto summary = acc.frequency_summary();
        std::string out = "hz,min,q10,q50,q90,max,mean,var,count\n";
        for (std::uint32_t f = 0; f < grid.count(); ++f) {
            if (!summary[f]) continue;
            const auto& s = *summary[f];
            appendf(out, "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%llu\n",
                    grid.frequency_hz(f), s.min, s.q10, s.q50, s.q90, s.max, s.mean,
                    s.variance, static_cast<unsigned long long>(s.count));
        }
        detail::write_file(out_path("frequency_summary.csv"), out);

        const auto regions = segment_regions(grid, summary, c.region_boundaries_hz);
        json jr = json::array();
        for (const auto& r : regions)
            jr.push_back({{"id", r.id},
                          {"low_hz", r.low_hz},
                          {"high_hz", r.high_hz},
                          {"median_level", r.median_level},
                          {"spread_q90_q10", r.spread_q90_q10},
                          {"freq_count", r.freq_count}});
        detail::write_file(out_path("regions.json"), jr.dump(2) + "\n");

        std::vector<double> pdf, cdf;
        acc.global_distribution(pdf, cdf);
        std::string gd = "level_dbuv,pdf,cdf\n";
        const auto& q = acc.policy();
        for (std::uint32_t b = 0; b < q.bin_count(); ++b)
            appendf(gd, "%.10g,%.10g,%.10g\n", q.dequantize(b), pdf[b], cdf[b]);
        detail::write_file(out_path("global_distribution.csv"), gd);

        const auto sv = series_of(c.moving_freq_index);
        if (sv.size() < c.moving_window)
            throw std::runtime_error("moving stats: series for frequency index " +
                                     std::to_string(c.moving_freq_index) +
                                     " shorter than the window");
        const auto ms = moving_stats(sv, c.moving_window);
        std::string mv = "tick,mean,stddev,variance\n";
        for (std::size_t i = 0; i < ms.mean.size(); ++i)
            appendf(mv, "%zu,%.10g,%.10g,%.10g\n", i, ms.mean[i], ms.stddev[i],
                    ms.variance[i]);
        detail::write_file(out_path("moving_stats.csv"), mv);
    });

    run_stage("stationarity", res.ingest_ok && enabled("stationarity"), [&] {
        std::string out = "chunk_len_s,channel,fraction,degenerate_count\n";
        for (std::size_t len : c.chunk_lengths) {
            std::vector<ChunkedResult> per_freq(grid.count());
            std::vector<char> has(grid.count(), 0);
            parallel_for(grid.count(), [&](std::size_t f) {
                const auto sv = series_of(static_cast<std::uint32_t>(f));
                if (sv.size() < len) return;
                ChunkedResult r;
                r.chunk_count = sv.size() / len;
                for (std::size_t ch = 0; ch < r.chunk_count; ++ch) {
                    const auto o =
                        kpss_level(sv.subspan(ch * len, len), c.alpha, c.kpss_bandwidth);
                    if (o.decision == Decision::fail_to_reject) ++r.fraction_stationary;
                    if (o.degenerate) ++r.degenerate_count;
                }
                r.fraction_stationary /= static_cast<double>(r.chunk_count);
                per_freq[f] = r;
                has[f] = 1;
            });
            for (std::size_t ch = 1; ch <= grid.channel_count(); ++ch) {
                double frac = 0.0;
                std::size_t n = 0, degen = 0;
                for (std::uint32_t f = 0; f < grid.count(); ++f) {
                    if (!has[f] || grid.channel_of(f) != static_cast<int>(ch)) continue;
                    frac += per_freq[f].fraction_stationary;
                    degen += per_freq[f].degenerate_count;
                    ++n;
                }
                if (n == 0) continue;
                appendf(out, "%.10g,%zu,%.10g,%zu\n",
                        static_cast<double>(len) * c.nominal_period, ch,
                        frac / static_cast<double>(n), degen);
            }
        }
        detail::write_file(out_path("stationarity.csv"), out);
    });

    run_stage("dependence", res.ingest_ok && enabled("dependence"), [&] {
        std::vector<std::string> rows(grid.count());
        parallel_for(grid.count(), [&](std::size_t f) {
            const auto sv = series_of(static_cast<std::uint32_t>(f));
            if (sv.size() < 2) return;
            const int max_lag =
                std::min<int>(c.acf_max_lag, static_cast<int>(sv.size()) - 1);
            AcfResult r;
            try {
                r = acf(sv, max_lag, c.alpha);
            } catch (const std::exception&) {
                return; // constant series has no ACF
            }
            std::string& out = rows[f];
            const double hz = grid.frequency_hz(static_cast<std::uint32_t>(f));
            for (std::size_t k = 0; k < r.values.size(); ++k)
                appendf(out, "%.10g,%d,%.10g,%.10g,%d\n", hz, r.lags[k], r.values[k],
                        r.bartlett_bound, std::abs(r.values[k]) > r.bartlett_bound ? 1 : 0);
        });
        std::string out = "hz,lag,rho,bound,significant\n";
        for (auto& r : rows) out += r;
        detail::write_file(out_path("acf.csv"), out);
    });

    // pooled step histogram shared by fit and bursts
    std::map<std::int64_t, std::uint64_t> step_hist; ///< key: round(d / bin_width)
    std::uint64_t step_total = 0;
    auto pooled_steps = [&] {
        if (step_total > 0) return;
        const double w = c.level_bin_width;
        for (const auto& [f, rs] : data.series) {
            const auto& v = rs.values;
            for (std::size_t i = 1; i < v.size(); ++i)
                ++step_hist[std::llround((v[i] - v[i - 1]) / w)];
        }
        for (const auto& [k, n] : step_hist) step_total += n;
        if (step_total == 0) throw std::runtime_error("fit: no level changes in input");
    };

    run_stage("fit", res.ingest_ok && enabled("fit"), [&] {
        pooled_steps();
        std::vector<double> values, weights;
        values.reserve(step_hist.size());
        for (const auto& [k, n] : step_hist) {
            values.push_back(static_cast<double>(k) * c.level_bin_width);
            weights.push_back(static_cast<double>(n));
        }
        const auto sel = best_fit(values, {Family::gaussian, Family::laplace,
                                           Family::logistic, Family::cauchy,
                                           Family::t_location_scale},
                                  weights);

        double z = 0.0, w1 = 0.0, w3 = 0.0;
        const double n = static_cast<double>(step_total);
        for (const auto& [k, cnt] : step_hist) {
            const double a = std::abs(static_cast<double>(k) * c.level_bin_width);
            if (a <= 1e-9) z += static_cast<double>(cnt);
            if (a <= 1.0 + 1e-9) w1 += static_cast<double>(cnt);
            if (a <= 3.0 + 1e-9) w3 += static_cast<double>(cnt);
        }

        json j;
        j["n"] = step_total;
        j["near_tie"] = sel.near_tie;
        j["winner"] = family_name(sel.candidates[sel.winner].family);
        json cands = json::array();
        for (const auto& f : sel.candidates) {
            json jc = {{"family", family_name(f.family)}, {"ok", f.ok}};
            if (f.ok) {
                jc["params"] = f.params;
                jc["loglik"] = f.loglik;
                jc["aic"] = f.aic;
            } else {
                jc["error"] = f.error;
            }
            cands.push_back(jc);
        }
        j["candidates"] = cands;
        for (const auto& f : sel.candidates)
            if (f.family == Family::t_location_scale && f.ok)
                j["t_fit"] = {{"mu", f.params[0]},
                              {"sigma", f.params[1]},
                              {"nu", f.params[2]},
                              {"loglik", f.loglik}};
        j["derivative_mass"] = {{"p_zero", z / n}, {"p_within_1", w1 / n},
                                {"p_within_3", w3 / n}};
        j["quantization"] = {{"bin_width", c.level_bin_width},
                             {"min", c.level_min},
                             {"max", c.level_max}};
        if (j.contains("t_fit")) {
            // everything synthesis needs to regenerate a comparable trace
            const double anchor = acc.quantile(c.moving_freq_index, 0.5);
            j["model"] = {{"mu", j["t_fit"]["mu"]},
                          {"sigma", j["t_fit"]["sigma"]},
                          {"nu", j["t_fit"]["nu"]},
                          {"anchor", anchor},
                          {"band_low", std::max(c.level_min, anchor - c.synth_half_band)},
                          {"band_high", std::min(c.level_max, anchor + c.synth_half_band)},
                          {"kappa", c.synth_kappa},
                          {"seed", c.seed}};
        }
        detail::write_file(out_path("fit.json"), j.dump(2) + "\n");
    });

    run_stage("bursts", res.ingest_ok && enabled("bursts"), [&] {
        json jt = json::array();
        for (double threshold : c.burst_thresholds) {
            BurstHistogram merged;
            merged.threshold = threshold;
            for (const auto& [f, rs] : data.series) {
                if (rs.values.size() < 2) continue;
                const auto h = burst_lengths(rs.values, threshold);
                for (const auto& [len, cnt] : h.counts) merged.counts[len] += cnt;
                merged.total_runs += h.total_runs;
                merged.total_steps_in_runs += h.total_steps_in_runs;
                merged.censored = merged.censored || h.censored;
            }
            json jb = {{"threshold", threshold},
                       {"total_runs", merged.total_runs},
                       {"censored", merged.censored}};
            json hist = json::array();
            // survival = #runs with length >= L, raw counts for log-log plots
            std::uint64_t ge = merged.total_runs;
            for (const auto& [len, cnt] : merged.counts) {
                hist.push_back({{"length", len}, {"count", cnt}, {"survival", ge}});
                ge -= cnt;
            }
            jb["histogram"] = hist;
            try {
                const auto g = geometric_fit(merged);
                jb["geometric"] = {{"p", g.p},
                                   {"chi2", g.chi2},
                                   {"p_value", g.p_value},
                                   {"dof", g.dof},
                                   {"unreliable", g.unreliable}};
            } catch (const std::exception& e) {
                jb["geometric"] = {{"error", e.what()}};
            }
            jt.push_back(jb);
        }
        detail::write_file(out_path("bursts.json"), jt.dump(2) + "\n");
    });

    // manifest: versions, seed, exact counts, stage status and timings
    json manifest;
    manifest["toolkit_version"] = kToolkitVersion;
    manifest["trace_format_version"] = 1;
    manifest["seed"] = c.seed;
    manifest["input"] = c.input;
    manifest["total_samples"] = res.total_samples;
    if (res.ingest_ok) {
        json counts = json::array();
        for (std::uint32_t f = 0; f < grid.count(); ++f) counts.push_back(acc.count(f));
        manifest["per_frequency_counts"] = counts;
        manifest["gap_mode_s"] = data.gaps.mode_gap;
        manifest["gap_q95_abs_error_s"] = data.gaps.q95_abs_error;
        manifest["gap_pair_count"] = data.gaps.pair_count;
    }
    json jstages = json::array();
    bool any_failed = false;
    for (const auto& st : res.stages) {
        json js = {{"name", st.name}, {"ran", st.ran}, {"ok", st.ok},
                   {"seconds", st.seconds}};
        if (!st.error.empty()) js["error"] = st.error;
        jstages.push_back(js);
        if (st.ran && !st.ok) any_failed = true;
    }
    manifest["stages"] = jstages;
    manifest["status"] = !res.ingest_ok ? "ingest-error" : any_failed ? "stage-failure" : "ok";
    res.manifest_path = out_path("manifest.json");
    detail::write_file(res.manifest_path, manifest.dump(2) + "\n");

    res.exit_code = !res.ingest_ok ? 3 : any_failed ? 4 : 0;
    return res;
}

} // namespace plnoise

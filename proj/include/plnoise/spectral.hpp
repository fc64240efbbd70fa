#pragma once

// Mergeable per-frequency accumulators: exact histogram quantiles at the
// quantization resolution, Welford moments, region segmentation and sliding
// window statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "plnoise/trace.hpp"

namespace plnoise {

struct FrequencySummary {
    double min = 0.0, q10 = 0.0, q50 = 0.0, q90 = 0.0, max = 0.0;
    double mean = 0.0, variance = 0.0; ///< sample variance (n-1)
    std::uint64_t count = 0;
};

/// Shard-per-worker accumulator; merge() is the only cross-thread step.
class SpectralAccumulator {
public:
    SpectralAccumulator(const FrequencyGrid& grid, const QuantizationPolicy& policy)
        : grid_(&grid), policy_(policy),
          hist_(static_cast<std::size_t>(grid.count()) * policy.bin_count(), 0),
          per_freq_(grid.count()) {}

    const QuantizationPolicy& policy() const { return policy_; }
    const FrequencyGrid& grid() const { return *grid_; }

    void accumulate(const NoiseSample& s) {
        validate_sample(s, *grid_, policy_);
        add(s.freq_index, s.level);
    }

    /// Fast path for pre-validated data.
    void add(std::uint32_t freq_index, double level) {
        auto& f = per_freq_[freq_index];
        ++hist_[static_cast<std::size_t>(freq_index) * policy_.bin_count() +
                policy_.quantize(level)];
        ++f.count;
        if (level < f.min) f.min = level;
        if (level > f.max) f.max = level;
        const double d = level - f.mean;
        f.mean += d / static_cast<double>(f.count);
        f.m2 += d * (level - f.mean);
        ++total_;
    }

    void merge(const SpectralAccumulator& other) {
        if (other.grid_->count() != grid_->count() ||
            other.policy_.bin_count() != policy_.bin_count())
            throw std::invalid_argument("SpectralAccumulator::merge: incompatible layout");
        for (std::size_t i = 0; i < hist_.size(); ++i) hist_[i] += other.hist_[i];
        for (std::uint32_t f = 0; f < grid_->count(); ++f) {
            auto& a = per_freq_[f];
            const auto& b = other.per_freq_[f];
            if (b.count == 0) continue;
            if (a.count == 0) {
                a = b;
                continue;
            }
            const double na = static_cast<double>(a.count);
            const double nb = static_cast<double>(b.count);
            const double delta = b.mean - a.mean;
            a.m2 += b.m2 + delta * delta * na * nb / (na + nb);
            a.mean = (na * a.mean + nb * b.mean) / (na + nb);
            a.count += b.count;
            a.min = std::min(a.min, b.min);
            a.max = std::max(a.max, b.max);
        }
        total_ += other.total_;
    }

    std::uint64_t total_count() const { return total_; }
    std::uint64_t count(std::uint32_t freq_index) const { return per_freq_[freq_index].count; }

    /// Exact histogram quantile, lower interpolation at bin centers: the
    /// center of the first bin whose CDF reaches p.
    double quantile(std::uint32_t freq_index, double p) const {
        const auto& f = per_freq_[freq_index];
        if (f.count == 0)
            throw std::invalid_argument("SpectralAccumulator: empty frequency");
        const auto target =
            std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(p * static_cast<double>(f.count))));
        const std::uint64_t* h = hist_.data() +
                                 static_cast<std::size_t>(freq_index) * policy_.bin_count();
        std::uint64_t cum = 0;
        for (std::uint32_t b = 0; b < policy_.bin_count(); ++b) {
            cum += h[b];
            if (cum >= target) return policy_.dequantize(b);
        }
        return policy_.dequantize(policy_.bin_count() - 1);
    }

    /// Per-frequency {min,q10,q50,q90,max,mean,var,count}; empty frequencies
    /// come back as nullopt.
    std::optional<FrequencySummary> summary(std::uint32_t freq_index) const {
        const auto& f = per_freq_[freq_index];
        if (f.count == 0) return std::nullopt;
        FrequencySummary s;
        s.min = f.min;
        s.max = f.max;
        s.q10 = quantile(freq_index, 0.10);
        s.q50 = quantile(freq_index, 0.50);
        s.q90 = quantile(freq_index, 0.90);
        s.mean = f.mean;
        s.variance = f.count > 1 ? f.m2 / static_cast<double>(f.count - 1) : 0.0;
        s.count = f.count;
        return s;
    }

    std::vector<std::optional<FrequencySummary>> frequency_summary() const {
        std::vector<std::optional<FrequencySummary>> out(grid_->count());
        for (std::uint32_t f = 0; f < grid_->count(); ++f) out[f] = summary(f);
        return out;
    }

    /// PDF/CDF over bins of all samples pooled across frequencies.
    void global_distribution(std::vector<double>& pdf, std::vector<double>& cdf) const {
        if (total_ == 0)
            throw std::invalid_argument("SpectralAccumulator: no samples");
        pdf.assign(policy_.bin_count(), 0.0);
        for (std::uint32_t f = 0; f < grid_->count(); ++f) {
            const std::uint64_t* h = hist_.data() +
                                     static_cast<std::size_t>(f) * policy_.bin_count();
            for (std::uint32_t b = 0; b < policy_.bin_count(); ++b)
                pdf[b] += static_cast<double>(h[b]);
        }
        cdf.resize(policy_.bin_count());
        double cum = 0.0;
        const double inv = 1.0 / static_cast<double>(total_);
        for (std::uint32_t b = 0; b < policy_.bin_count(); ++b) {
            pdf[b] *= inv;
            cum += pdf[b];
            cdf[b] = cum;
        }
        cdf[policy_.bin_count() - 1] = 1.0;
    }

    std::span<const std::uint64_t> histogram(std::uint32_t freq_index) const {
        return {hist_.data() + static_cast<std::size_t>(freq_index) * policy_.bin_count(),
                policy_.bin_count()};
    }

private:
    struct PerFreq {
        std::uint64_t count = 0;
        double min = std::numeric_limits<double>::infinity();
        double max = -std::numeric_limits<double>::infinity();
        double mean = 0.0;
        double m2 = 0.0;
    };

    const FrequencyGrid* grid_;
    QuantizationPolicy policy_;
    std::vector<std::uint64_t> hist_;
    std::vector<PerFreq> per_freq_;
    std::uint64_t total_ = 0;
};

/// Splits the grid at the given boundaries (Hz) and reports per-region
/// median-of-medians level and mean q90-q10 spread.
inline std::vector<Region> segment_regions(
    const FrequencyGrid& grid,
    const std::vector<std::optional<FrequencySummary>>& summary,
    const std::vector<double>& boundaries_hz) {
    for (double b : boundaries_hz)
        if (b <= grid.start_hz() || b >= grid.end_hz())
            throw std::invalid_argument("segment_regions: boundary outside grid span");
    std::vector<double> edges;
    edges.push_back(grid.start_hz());
    edges.insert(edges.end(), boundaries_hz.begin(), boundaries_hz.end());
    edges.push_back(grid.end_hz());
    if (!std::is_sorted(edges.begin(), edges.end()))
        throw std::invalid_argument("segment_regions: boundaries must be increasing");

    std::vector<Region> out;
    for (std::size_t r = 0; r + 1 < edges.size(); ++r) {
        Region reg;
        reg.id = static_cast<int>(r + 1);
        reg.low_hz = edges[r];
        reg.high_hz = edges[r + 1];
        std::vector<double> medians;
        double spread_sum = 0.0;
        for (std::uint32_t f = 0; f < grid.count(); ++f) {
            const double hz = grid.frequency_hz(f);
            const bool last = (r + 2 == edges.size());
            if (hz < reg.low_hz || (last ? hz > reg.high_hz : hz >= reg.high_hz)) continue;
            ++reg.freq_count;
            if (summary[f]) {
                medians.push_back(summary[f]->q50);
                spread_sum += summary[f]->q90 - summary[f]->q10;
            }
        }
        if (!medians.empty()) {
            std::sort(medians.begin(), medians.end());
            reg.median_level = medians[(medians.size() - 1) / 2];
            reg.spread_q90_q10 = spread_sum / static_cast<double>(medians.size());
        }
        out.push_back(reg);
    }
    return out;
}

struct MovingStats {
    std::size_t window = 0;
    std::vector<double> mean, stddev, variance; ///< one entry per window position
};

/// Sliding mean/std/variance with step 1. Running sums are re-derived from a
/// compensated pass every 2^20 steps to stop drift on long series.
inline MovingStats moving_stats(std::span<const double> series, std::size_t window) {
    if (window < 2) throw std::invalid_argument("moving_stats: window must be >= 2");
    if (series.size() < window) throw std::invalid_argument("moving_stats: window > length");

    MovingStats out;
    out.window = window;
    const std::size_t positions = series.size() - window + 1;
    out.mean.resize(positions);
    out.stddev.resize(positions);
    out.variance.resize(positions);

    auto exact_sums = [&](std::size_t start, double& sum, double& sumsq) {
        double s = 0.0, cs = 0.0, s2 = 0.0, cs2 = 0.0;
        for (std::size_t i = start; i < start + window; ++i) {
            const double x = series[i];
            double y = x - cs, t = s + y;
            cs = (t - s) - y;
            s = t;
            const double xx = x * x;
            y = xx - cs2;
            t = s2 + y;
            cs2 = (t - s2) - y;
            s2 = t;
        }
        sum = s;
        sumsq = s2;
    };

    double sum = 0.0, sumsq = 0.0;
    exact_sums(0, sum, sumsq);
    const double n = static_cast<double>(window);
    for (std::size_t i = 0;; ++i) {
        const double mean = sum / n;
        double var = (sumsq - n * mean * mean) / (n - 1.0);
        if (var < 0.0) var = 0.0;
        out.mean[i] = mean;
        out.variance[i] = var;
        out.stddev[i] = std::sqrt(var);
        if (i + 1 >= positions) break;
        if ((i + 1) % (1u << 20) == 0) {
            exact_sums(i + 1, sum, sumsq);
        } else {
            const double leave = series[i], enter = series[i + window];
            sum += enter - leave;
            sumsq += enter * enter - leave * leave;
        }
    }
    return out;
}

} // namespace plnoise

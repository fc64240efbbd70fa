#pragma once

// Core domain types: samples, the PRIME-band frequency layout, level
// quantization and the frequency regions. Immutable after construction.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace plnoise {

struct NoiseSample {
    double timestamp = 0.0;   ///< seconds since trace epoch
    std::uint32_t freq_index = 0;
    double level = 0.0;       ///< dBuV
};

/// Linear grid of measurement frequencies split into PRIME channels.
class FrequencyGrid {
public:
    /// Equal-width channel plan over [start, end], the default layout:
    /// 776 points spanning 41,992 .. 471,680 Hz in 8 channels.
    static FrequencyGrid prime_default() {
        return FrequencyGrid(776, 41992.0, 471680.0, equal_channels(41992.0, 471680.0, 8));
    }

    FrequencyGrid(std::uint32_t count, double start_hz, double end_hz,
                  std::vector<std::pair<double, double>> channel_bounds)
        : count_(count), start_hz_(start_hz),
          step_hz_(count > 1 ? (end_hz - start_hz) / (count - 1) : 0.0),
          channels_(std::move(channel_bounds)) {
        if (count_ < 1) throw std::invalid_argument("FrequencyGrid: count must be >= 1");
        if (count_ > 1 && step_hz_ <= 0.0)
            throw std::invalid_argument("FrequencyGrid: frequencies must be increasing");
        if (channels_.empty()) throw std::invalid_argument("FrequencyGrid: no channels");
        for (std::size_t c = 0; c < channels_.size(); ++c) {
            if (channels_[c].first >= channels_[c].second)
                throw std::invalid_argument("FrequencyGrid: empty channel");
            if (c > 0 && channels_[c].first != channels_[c - 1].second)
                throw std::invalid_argument("FrequencyGrid: channels must be contiguous");
        }
        // every grid point must fall inside the plan
        if (frequency_hz(0) < channels_.front().first ||
            frequency_hz(count_ - 1) > channels_.back().second)
            throw std::invalid_argument("FrequencyGrid: grid exceeds channel plan");
    }

    std::uint32_t count() const { return count_; }
    double start_hz() const { return start_hz_; }
    double step_hz() const { return step_hz_; }
    double end_hz() const { return frequency_hz(count_ - 1); }
    std::size_t channel_count() const { return channels_.size(); }
    const std::vector<std::pair<double, double>>& channel_bounds() const { return channels_; }

    double frequency_hz(std::uint32_t freq_index) const {
        if (freq_index >= count_)
            throw std::invalid_argument("FrequencyGrid: freq_index out of range");
        return start_hz_ + step_hz_ * freq_index;
    }

    /// Channel index in [1, channel_count()] containing the given grid point.
    /// Channels are [low, high) intervals; the last one is closed at the top.
    int channel_of(std::uint32_t freq_index) const {
        const double hz = frequency_hz(freq_index);
        return channel_of_hz(hz);
    }

    int channel_of_hz(double hz) const {
        for (std::size_t c = 0; c < channels_.size(); ++c) {
            const bool last = (c + 1 == channels_.size());
            if (hz >= channels_[c].first &&
                (hz < channels_[c].second || (last && hz <= channels_[c].second)))
                return static_cast<int>(c + 1);
        }
        throw std::invalid_argument("FrequencyGrid: frequency outside channel plan");
    }

    static std::vector<std::pair<double, double>> equal_channels(double lo, double hi, int n) {
        std::vector<std::pair<double, double>> out;
        const double w = (hi - lo) / n;
        for (int c = 0; c < n; ++c)
            out.emplace_back(lo + w * c, c + 1 == n ? hi : lo + w * (c + 1));
        return out;
    }

private:
    std::uint32_t count_;
    double start_hz_;
    double step_hz_;
    std::vector<std::pair<double, double>> channels_;
};

/// Fixed-width binning of levels; makes histogram quantiles exact.
class QuantizationPolicy {
public:
    QuantizationPolicy(double bin_width = 0.1, double min = -20.0, double max = 120.0)
        : bin_width_(bin_width), min_(min), max_(max) {
        if (!(bin_width_ > 0.0)) throw std::invalid_argument("QuantizationPolicy: bin_width > 0");
        const double n = (max_ - min_) / bin_width_;
        bins_ = static_cast<std::uint32_t>(std::llround(n));
        if (!(max_ > min_) || std::abs(n - bins_) > 1e-9)
            throw std::invalid_argument("QuantizationPolicy: range must be an integer bin count");
    }

    double bin_width() const { return bin_width_; }
    double min() const { return min_; }
    double max() const { return max_; }
    std::uint32_t bin_count() const { return bins_; }

    bool in_range(double level) const {
        return std::isfinite(level) && level >= min_ && level <= max_;
    }

    /// bin = floor((level - min)/bin_width); the exact top boundary maps to
    /// the last bin.
    std::uint32_t quantize(double level) const {
        if (!std::isfinite(level))
            throw std::invalid_argument("QuantizationPolicy: non-finite level");
        if (level < min_ || level > max_)
            throw std::invalid_argument("QuantizationPolicy: level out of range");
        if (level >= max_) return bins_ - 1;
        // the small bias keeps exact decimal boundaries (e.g. 47.3 at width
        // 0.1) from landing one bin low through rounding of the division
        auto b = static_cast<std::uint32_t>((level - min_) / bin_width_ + 1e-7);
        return b >= bins_ ? bins_ - 1 : b;
    }

    /// Bin center.
    double dequantize(std::uint32_t bin) const {
        if (bin >= bins_) throw std::invalid_argument("QuantizationPolicy: bad bin");
        return min_ + (bin + 0.5) * bin_width_;
    }

private:
    double bin_width_;
    double min_;
    double max_;
    std::uint32_t bins_;
};

/// One of the frequency regions R1..R4 of the quantile spectrum.
struct Region {
    int id = 0;               ///< 1-based (R1..)
    double low_hz = 0.0;
    double high_hz = 0.0;
    double median_level = 0.0;       ///< median of per-frequency medians, dBuV
    double spread_q90_q10 = 0.0;     ///< mean q90-q10 across the region, dBuV
    std::uint32_t freq_count = 0;
};

inline void validate_sample(const NoiseSample& s, const FrequencyGrid& grid,
                            const QuantizationPolicy& q) {
    if (!(s.timestamp >= 0.0) || !std::isfinite(s.timestamp))
        throw std::invalid_argument("NoiseSample: bad timestamp");
    if (s.freq_index >= grid.count())
        throw std::invalid_argument("NoiseSample: freq_index out of range");
    if (!q.in_range(s.level))
        throw std::invalid_argument("NoiseSample: level outside representable range");
}

} // namespace plnoise

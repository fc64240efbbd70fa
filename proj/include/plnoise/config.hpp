#pragma once

// Run configuration: every pipeline knob in one struct, serialized as a flat
// key = value text file. Parsing and serialization round-trip losslessly.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "plnoise/trace.hpp"

namespace plnoise {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // input / output
    std::string input;
    std::string format = "binary";        ///< "csv" or "binary"
    std::string output_dir = "reports";

    // frequency grid and level quantization
    std::uint32_t freq_count = 776;
    double freq_start_hz = 41992.0;
    double freq_end_hz = 471680.0;
    int channels = 8;                     ///< equal-width plan when edges empty
    std::vector<double> channel_edges_hz; ///< optional explicit interior edges
    double level_bin_width = 0.1;
    double level_min = -20.0;
    double level_max = 120.0;

    // timing QA / regularization
    double nominal_period = 1.0;          ///< seconds
    std::string gap_policy = "hold_last"; ///< hold_last | skip | error

    // spectrum
    std::vector<double> region_boundaries_hz = {95000.0, 200000.0, 300000.0};
    std::size_t moving_window = 60;
    std::uint32_t moving_freq_index = 0;

    // stationarity
    std::vector<std::size_t> chunk_lengths = {30, 60, 120, 300, 600};
    double alpha = 0.05;
    int kpss_bandwidth = -1;              ///< -1 = automatic

    // dependence
    int acf_max_lag = 50;
    int ljung_box_lags = 10;

    // model fit / bursts
    std::vector<double> burst_thresholds = {1.0, 3.0};

    // synthesis
    std::size_t synth_length = 1000000;
    std::uint32_t synth_freq_count = 8;
    double synth_mu = 1.8e-3;
    double synth_sigma = 3.47;
    double synth_nu = 2.87;
    double synth_anchor = 68.0;
    double synth_kappa = 0.01;
    double synth_half_band = 35.0;
    std::uint64_t seed = 1;

    FrequencyGrid grid() const {
        auto edges = channel_edges_hz;
        std::vector<std::pair<double, double>> bounds;
        if (edges.empty()) {
            bounds = FrequencyGrid::equal_channels(freq_start_hz, freq_end_hz, channels);
        } else {
            double lo = freq_start_hz;
            for (double e : edges) {
                bounds.emplace_back(lo, e);
                lo = e;
            }
            bounds.emplace_back(lo, freq_end_hz);
        }
        return FrequencyGrid(freq_count, freq_start_hz, freq_end_hz, std::move(bounds));
    }

    QuantizationPolicy quantization() const {
        return QuantizationPolicy(level_bin_width, level_min, level_max);
    }

    void validate() const {
        if (format != "csv" && format != "binary")
            throw ConfigError("config: format must be csv or binary");
        if (gap_policy != "hold_last" && gap_policy != "skip" && gap_policy != "error")
            throw ConfigError("config: gap_policy must be hold_last, skip or error");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw ConfigError("config: alpha must be in (0, 1)");
        if (acf_max_lag < 1) throw ConfigError("config: acf_max_lag must be >= 1");
        if (ljung_box_lags < 1) throw ConfigError("config: ljung_box_lags must be >= 1");
        if (moving_window < 2) throw ConfigError("config: moving_window must be >= 2");
        if (chunk_lengths.empty()) throw ConfigError("config: chunk_lengths is empty");
        for (auto l : chunk_lengths)
            if (l < 10) throw ConfigError("config: chunk lengths must be >= 10");
        if (!(nominal_period > 0.0))
            throw ConfigError("config: nominal_period must be > 0");
        if (synth_freq_count < 1 || synth_length < 1)
            throw ConfigError("config: synthesis shape must be positive");
        try {
            (void)grid();
            (void)quantization();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_floating_point_v<T>) out += fmt_double(v[i]);
        else out += std::to_string(v[i]);
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw ConfigError("config: bad numeric value for " + key + ": '" + s + "'");
    }
}

template <typename T>
T parse_int(const std::string& s, const std::string& key) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ConfigError("config: bad integer value for " + key + ": '" + s + "'");
    return v;
}

inline std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace detail

/// Flat key = value text form, keys in a fixed order.
inline std::string serialize_config(const RunConfig& c) {
    using detail::fmt_double;
    using detail::join;
    std::string out;
    auto kv = [&](const char* k, const std::string& v) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    };
    kv("input", c.input);
    kv("format", c.format);
    kv("output_dir", c.output_dir);
    kv("freq_count", std::to_string(c.freq_count));
    kv("freq_start_hz", fmt_double(c.freq_start_hz));
    kv("freq_end_hz", fmt_double(c.freq_end_hz));
    kv("channels", std::to_string(c.channels));
    kv("channel_edges_hz", join(c.channel_edges_hz));
    kv("level_bin_width", fmt_double(c.level_bin_width));
    kv("level_min", fmt_double(c.level_min));
    kv("level_max", fmt_double(c.level_max));
    kv("nominal_period", fmt_double(c.nominal_period));
    kv("gap_policy", c.gap_policy);
    kv("region_boundaries_hz", join(c.region_boundaries_hz));
    kv("moving_window", std::to_string(c.moving_window));
    kv("moving_freq_index", std::to_string(c.moving_freq_index));
    kv("chunk_lengths", join(c.chunk_lengths));
    kv("alpha", fmt_double(c.alpha));
    kv("kpss_bandwidth", std::to_string(c.kpss_bandwidth));
    kv("acf_max_lag", std::to_string(c.acf_max_lag));
    kv("ljung_box_lags", std::to_string(c.ljung_box_lags));
    kv("burst_thresholds", join(c.burst_thresholds));
    kv("synth_length", std::to_string(c.synth_length));
    kv("synth_freq_count", std::to_string(c.synth_freq_count));
    kv("synth_mu", fmt_double(c.synth_mu));
    kv("synth_sigma", fmt_double(c.synth_sigma));
    kv("synth_nu", fmt_double(c.synth_nu));
    kv("synth_anchor", fmt_double(c.synth_anchor));
    kv("synth_kappa", fmt_double(c.synth_kappa));
    kv("synth_half_band", fmt_double(c.synth_half_band));
    kv("seed", std::to_string(c.seed));
    return out;
}

/// Applies one key/value pair onto a config. Unknown keys are errors.
inline void apply_config_key(RunConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    auto doubles = [&] {
        std::vector<double> out;
        for (const auto& s : split_csv(value)) out.push_back(parse_double(trim(s), key));
        return out;
    };
    if (key == "input") c.input = value;
    else if (key == "format") c.format = value;
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "freq_count") c.freq_count = parse_int<std::uint32_t>(value, key);
    else if (key == "freq_start_hz") c.freq_start_hz = parse_double(value, key);
    else if (key == "freq_end_hz") c.freq_end_hz = parse_double(value, key);
    else if (key == "channels") c.channels = parse_int<int>(value, key);
    else if (key == "channel_edges_hz") c.channel_edges_hz = doubles();
    else if (key == "level_bin_width") c.level_bin_width = parse_double(value, key);
    else if (key == "level_min") c.level_min = parse_double(value, key);
    else if (key == "level_max") c.level_max = parse_double(value, key);
    else if (key == "nominal_period") c.nominal_period = parse_double(value, key);
    else if (key == "gap_policy") c.gap_policy = value;
    else if (key == "region_boundaries_hz") c.region_boundaries_hz = doubles();
    else if (key == "moving_window") c.moving_window = parse_int<std::size_t>(value, key);
    else if (key == "moving_freq_index") c.moving_freq_index = parse_int<std::uint32_t>(value, key);
    else if (key == "chunk_lengths") {
        c.chunk_lengths.clear();
        for (const auto& s : split_csv(value))
            c.chunk_lengths.push_back(parse_int<std::size_t>(trim(s), key));
    } else if (key == "alpha") c.alpha = parse_double(value, key);
    else if (key == "kpss_bandwidth") c.kpss_bandwidth = parse_int<int>(value, key);
    else if (key == "acf_max_lag") c.acf_max_lag = parse_int<int>(value, key);
    else if (key == "ljung_box_lags") c.ljung_box_lags = parse_int<int>(value, key);
    else if (key == "burst_thresholds") c.burst_thresholds = doubles();
    else if (key == "synth_length") c.synth_length = parse_int<std::size_t>(value, key);
    else if (key == "synth_freq_count") c.synth_freq_count = parse_int<std::uint32_t>(value, key);
    else if (key == "synth_mu") c.synth_mu = parse_double(value, key);
    else if (key == "synth_sigma") c.synth_sigma = parse_double(value, key);
    else if (key == "synth_nu") c.synth_nu = parse_double(value, key);
    else if (key == "synth_anchor") c.synth_anchor = parse_double(value, key);
    else if (key == "synth_kappa") c.synth_kappa = parse_double(value, key);
    else if (key == "synth_half_band") c.synth_half_band = parse_double(value, key);
    else if (key == "seed") c.seed = parse_int<std::uint64_t>(value, key);
    else throw ConfigError("config: unknown key '" + key + "'");
}

/// Parses the flat key = value format. '#' starts a comment; blank lines are
/// skipped. Later keys override earlier ones.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        apply_config_key(base, key, value);
    }
    return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw ConfigError("config: cannot open " + path);
    std::string text;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, got);
    std::fclose(f);
    return parse_config(text, std::move(base));
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

} // namespace plnoise

#pragma once

// Trace file I/O (CSV and packed binary), the sampling-gap quality report and
// optional timing regularization. Readers are single-pass with constant
// memory in the trace length.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "plnoise/trace.hpp"

namespace plnoise {

enum class TraceFormat { csv, packed_binary };

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline constexpr char kMagic[4] = {'P', 'L', 'N', 'Z'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kRecordSize = 12; // f64 ts, u16 freq, i16 level*10

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IngestError("cannot open " + path);
    return f;
}

} // namespace detail

/// Pull-based sample stream; next() yields samples in file order.
class TraceReader {
public:
    TraceReader(const std::string& path, TraceFormat format)
        : path_(path), format_(format), file_(detail::open_file(path, "rb")) {
        if (format_ == TraceFormat::csv) {
            read_csv_header();
        } else {
            read_binary_header();
        }
    }

    /// Returns false at end of stream. Throws IngestError on malformed input.
    bool next(NoiseSample& out) {
        return format_ == TraceFormat::csv ? next_csv(out) : next_binary(out);
    }

    std::uint64_t samples_read() const { return samples_read_; }

    /// Record count promised by a packed-binary header (0 for CSV).
    std::uint64_t declared_count() const { return declared_count_; }

private:
    void read_csv_header() {
        std::string line;
        if (!read_line(line))
            throw IngestError(path_ + ": missing CSV header");
        if (line != "timestamp_s,freq_index,level_dbuv")
            throw IngestError(path_ + ": unexpected CSV header '" + line + "'");
    }

    void read_binary_header() {
        char magic[4];
        std::uint32_t version = 0;
        if (std::fread(magic, 1, 4, file_.get()) != 4 ||
            std::memcmp(magic, detail::kMagic, 4) != 0)
            throw IngestError(path_ + ": bad magic");
        if (std::fread(&version, 4, 1, file_.get()) != 1 || version != detail::kVersion)
            throw IngestError(path_ + ": unsupported version");
        if (std::fread(&declared_count_, 8, 1, file_.get()) != 1)
            throw IngestError(path_ + ": truncated header");
    }

    bool next_csv(NoiseSample& out) {
        std::string line;
        if (!read_line(line)) return false;
        ++line_no_;
        const char* b = line.data();
        const char* e = b + line.size();
        auto fail = [&] {
            throw IngestError(path_ + ":" + std::to_string(line_no_ + 1) + ": malformed record");
        };
        auto parse_f64 = [&](const char*& p) {
            double v;
            auto r = std::from_chars(p, e, v);
            if (r.ec != std::errc{}) fail();
            p = r.ptr;
            return v;
        };
        const char* p = b;
        out.timestamp = parse_f64(p);
        if (p >= e || *p != ',') fail();
        ++p;
        std::uint32_t fi;
        auto r = std::from_chars(p, e, fi);
        if (r.ec != std::errc{}) fail();
        p = r.ptr;
        out.freq_index = fi;
        if (p >= e || *p != ',') fail();
        ++p;
        out.level = parse_f64(p);
        if (p != e) fail();
        ++samples_read_;
        return true;
    }

    bool next_binary(NoiseSample& out) {
        if (buf_pos_ >= buf_len_) {
            if (trailing_partial_)
                throw IngestError(path_ + ": truncated record at byte offset " +
                                  std::to_string(16 + samples_read_ * detail::kRecordSize));
            const std::size_t got = std::fread(buf_.data(), 1, buf_.size(), file_.get());
            buf_pos_ = 0;
            buf_len_ = got - got % detail::kRecordSize;
            trailing_partial_ = (got % detail::kRecordSize) != 0;
            if (got == 0) return false;
            if (buf_len_ == 0) // nothing but a partial record left
                throw IngestError(path_ + ": truncated record at byte offset " +
                                  std::to_string(16 + samples_read_ * detail::kRecordSize));
        }
        const unsigned char* p = buf_.data() + buf_pos_;
        double ts;
        std::uint16_t fi;
        std::int16_t lvl;
        std::memcpy(&ts, p, 8);
        std::memcpy(&fi, p + 8, 2);
        std::memcpy(&lvl, p + 10, 2);
        buf_pos_ += detail::kRecordSize;
        out.timestamp = ts;
        out.freq_index = fi;
        out.level = lvl * 0.1;
        ++samples_read_;
        return true;
    }

    bool read_line(std::string& line) {
        line.clear();
        int c;
        while ((c = std::fgetc(file_.get())) != EOF) {
            if (c == '\n') return true;
            line.push_back(static_cast<char>(c));
        }
        return !line.empty();
    }

    std::string path_;
    TraceFormat format_;
    detail::FilePtr file_;
    std::uint64_t samples_read_ = 0;
    std::uint64_t declared_count_ = 0;
    std::uint64_t line_no_ = 0;
    std::vector<unsigned char> buf_ = std::vector<unsigned char>(detail::kRecordSize * 4096);
    std::size_t buf_pos_ = 0;
    std::size_t buf_len_ = 0;
    bool trailing_partial_ = false;
};

class TraceWriter {
public:
    TraceWriter(const std::string& path, TraceFormat format)
        : format_(format), file_(detail::open_file(path, "wb")) {
        if (format_ == TraceFormat::csv) {
            std::fputs("timestamp_s,freq_index,level_dbuv\n", file_.get());
        } else {
            std::fwrite(detail::kMagic, 1, 4, file_.get());
            std::fwrite(&detail::kVersion, 4, 1, file_.get());
            std::uint64_t zero = 0; // patched in close()
            std::fwrite(&zero, 8, 1, file_.get());
        }
    }

    void write(const NoiseSample& s) {
        if (format_ == TraceFormat::csv) {
            char line[96];
            const int n = std::snprintf(line, sizeof line, "%.6f,%u,%.1f\n",
                                        s.timestamp, s.freq_index, s.level);
            std::fwrite(line, 1, static_cast<std::size_t>(n), file_.get());
        } else {
            unsigned char rec[detail::kRecordSize];
            const auto fi = static_cast<std::uint16_t>(s.freq_index);
            const auto lvl = static_cast<std::int16_t>(std::llround(s.level * 10.0));
            std::memcpy(rec, &s.timestamp, 8);
            std::memcpy(rec + 8, &fi, 2);
            std::memcpy(rec + 10, &lvl, 2);
            std::fwrite(rec, 1, detail::kRecordSize, file_.get());
        }
        ++count_;
    }

    /// Finalizes the file (packed-binary: patches the header record count).
    void close() {
        if (!file_) return;
        if (format_ == TraceFormat::packed_binary) {
            std::fseek(file_.get(), 8, SEEK_SET);
            std::fwrite(&count_, 8, 1, file_.get());
        }
        file_.reset();
    }

    ~TraceWriter() { close(); }

private:
    TraceFormat format_;
    detail::FilePtr file_;
    std::uint64_t count_ = 0;
};

/// Fig.-3-style timing QA: distribution of consecutive-sample gaps.
struct GapReport {
    std::map<std::int64_t, std::uint64_t> gap_histogram; ///< key: gap in ms
    double mode_gap = 0.0;        ///< seconds
    double q95_abs_error = 0.0;   ///< seconds, 95th pct of |gap - nominal|
    std::uint64_t pair_count = 0;
    double nominal_period = 1.0;
};

/// Streaming gap accumulator; feed samples in file order, then finish().
class GapAnalyzer {
public:
    explicit GapAnalyzer(double nominal_period) : nominal_(nominal_period) {}

    void add(const NoiseSample& s) {
        auto [it, fresh] = last_ts_.try_emplace(s.freq_index, s.timestamp);
        if (!fresh) {
            const double gap = s.timestamp - it->second;
            if (gap < 0.0)
                throw IngestError("timestamps not non-decreasing for frequency " +
                                  std::to_string(s.freq_index));
            ++hist_[std::llround(gap * 1000.0)];
            ++pairs_;
            it->second = s.timestamp;
        }
    }

    GapReport finish() const {
        if (pairs_ == 0)
            throw IngestError("gap report: fewer than 2 samples for every frequency");
        GapReport r;
        r.gap_histogram = hist_;
        r.pair_count = pairs_;
        r.nominal_period = nominal_;
        std::uint64_t best = 0;
        for (const auto& [ms, n] : hist_) {
            if (n > best) {
                best = n;
                r.mode_gap = ms / 1000.0;
            }
        }
        // 95th percentile of |gap - nominal|, lower interpolation:
        // smallest value whose CDF reaches 0.95.
        std::map<std::int64_t, std::uint64_t> abs_err;
        const auto nominal_ms = std::llround(nominal_ * 1000.0);
        for (const auto& [ms, n] : hist_) abs_err[std::llabs(ms - nominal_ms)] += n;
        const auto target = static_cast<std::uint64_t>(std::ceil(0.95 * pairs_));
        std::uint64_t cum = 0;
        for (const auto& [ms, n] : abs_err) {
            cum += n;
            if (cum >= target) {
                r.q95_abs_error = ms / 1000.0;
                break;
            }
        }
        return r;
    }

private:
    double nominal_;
    std::unordered_map<std::uint32_t, double> last_ts_;
    std::map<std::int64_t, std::uint64_t> hist_;
    std::uint64_t pairs_ = 0;
};

enum class GapPolicy { hold_last, skip, error_above };

/// One regular per-frequency series plus the regularization audit.
struct RegularSeries {
    double start_time = 0.0;
    std::vector<double> values;
    std::uint64_t ticks_filled = 0;
    std::uint64_t ticks_dropped = 0;
};

/// Snaps samples to the nominal tick grid per frequency. Jitter below half a
/// period never creates fills. hold_last repeats the previous value across
/// missing ticks; skip drops them; error_above(k) throws on gaps > k*period.
class Regularizer {
public:
    Regularizer(double nominal_period, GapPolicy policy, double error_factor = 4.0)
        : period_(nominal_period), policy_(policy), factor_(error_factor) {
        if (!(period_ > 0.0)) throw IngestError("regularize: period must be > 0");
    }

    void add(const NoiseSample& s) {
        auto& rs = series_[s.freq_index];
        if (rs.values.empty()) {
            rs.start_time = s.timestamp;
            rs.values.push_back(s.level);
            return;
        }
        const double span = s.timestamp - rs.start_time;
        const auto tick = static_cast<std::int64_t>(std::llround(span / period_));
        const auto last = static_cast<std::int64_t>(rs.values.size()) - 1;
        if (tick <= last) return; // duplicate/backward tick: keep first value
        const std::int64_t missing = tick - last - 1;
        if (missing > 0) {
            if (policy_ == GapPolicy::error_above &&
                (missing + 1) * period_ > factor_ * period_)
                throw IngestError("regularize: gap exceeds " + std::to_string(factor_) +
                                  " periods for frequency " + std::to_string(s.freq_index));
            if (policy_ == GapPolicy::hold_last) {
                rs.values.insert(rs.values.end(), static_cast<std::size_t>(missing),
                                 rs.values.back());
                rs.ticks_filled += static_cast<std::uint64_t>(missing);
            } else {
                rs.ticks_dropped += static_cast<std::uint64_t>(missing);
            }
        }
        rs.values.push_back(s.level);
    }

    std::map<std::uint32_t, RegularSeries> take() { return std::move(series_); }

private:
    double period_;
    GapPolicy policy_;
    double factor_;
    std::map<std::uint32_t, RegularSeries> series_;
};

} // namespace plnoise

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "blsacd/model.hpp"

namespace blsacd {

/// Trading session as seconds after midnight, e.g. 09:30-16:00.
struct Session {
    std::int64_t open_s = 9 * 3600 + 30 * 60;
    std::int64_t close_s = 16 * 3600;

    static Session parse(std::string_view text);  // "HH:MM-HH:MM"; throws DataError
    std::int64_t length_ns() const { return (close_s - open_s) * 1'000'000'000LL; }
};

struct TradeRecord {
    std::int64_t time_ns = 0;  // since session open
    double bid = 0.0;
    double ask = 0.0;
};

struct TradeTape {
    std::vector<TradeRecord> records;
    /// Records dropped for falling outside the session.
    std::size_t outside_session = 0;

    /// Throws DataError unless times are nondecreasing and 0 < bid <= ask.
    void validate() const;
};

/// CSV with header `timestamp,bid,ask`. Timestamps are ISO-8601 date-times
/// (one date per tape) or seconds since the session open. Errors carry line numbers.
TradeTape read_tape(std::istream& is, const Session& session = {});
TradeTape read_tape_file(const std::string& path, const Session& session = {});

/// 100 (log ask - log bid) per record.
std::vector<double> bid_ask_range(const TradeTape& tape);

enum class CountMode { All, ChangesOnly };
CountMode parse_count_mode(std::string_view token);
std::string_view count_mode_token(CountMode mode);

/// Duration / count pairs between consecutive range changes.
struct PairSeries {
    BiSeries series;                        // y1 seconds, y2 counts, timestamps = spell ends (s)
    std::vector<std::int64_t> duration_ns;  // exact y1
    std::vector<std::int64_t> end_ns;       // spell ends since session open
    std::int64_t first_change_ns = 0;
    std::size_t changes = 0;                // distinct change instants
};

/// An event is a change of the range against the previous record (tolerance
/// 1e-12); changes sharing a timestamp form one event. y2 counts the records
/// in (X_{t-1}, X_t] (All) or only the change records there (ChangesOnly).
PairSeries build_pairs(const TradeTape& tape, CountMode mode = CountMode::All);

/// Natural cubic spline through (knot, log value), evaluated as exp(spline);
/// constant beyond the end knots.
struct SeasonalCurve {
    std::vector<double> knots_s;  // time of day since session open
    std::vector<double> values;   // knot values (positive)

    double operator()(double t_s) const;
};

struct DiurnalResult {
    BiSeries adjusted;
    SeasonalCurve curve1;
    SeasonalCurve curve2;
};

/// Hourly (or `bin_minutes`) mean knots per margin, then y / curve(time of day).
/// Empty bins are merged into their neighbour.
DiurnalResult diurnal_adjust(const BiSeries& series, const Session& session = {}, double bin_minutes = 60.0);

struct Describe {
    std::size_t n = 0;
    double min = 0, p10 = 0, mean = 0, median = 0, p90 = 0, max = 0;
    double sd = 0;              // n - 1
    double cv_percent = 0;
    double skewness = 0;        // NaN for constant data
    double excess_kurtosis = 0; // NaN for constant data
};

/// Summary row set; percentiles use the median-unbiased definition.
Describe describe(const std::vector<double>& x);

/// `t,timestamp,y1_raw,y2_raw,y1_adj,y2_adj`
void write_pairs_csv(const PairSeries& raw, const BiSeries& adjusted, std::ostream& os);

/// Pairs from CSV by header name: y1_adj/y2_adj (or y1_raw/y2_raw when `raw`)
/// from an ingest file, otherwise y1/y2. A `timestamp` column is kept.
BiSeries read_series_csv(std::istream& is, bool raw = false);
BiSeries read_series_file(const std::string& path, bool raw = false);

/// `t,y1,y2`, plus `eta1,eta2` when paths are given.
void write_series_csv(const BiSeries& series, const MedianPaths* paths, std::ostream& os);

}  // namespace blsacd

#include "blsacd/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "blsacd/errors.hpp"
#include "blsacd/format.hpp"
#include "blsacd/stats.hpp"

namespace blsacd {

namespace {

constexpr std::int64_t kNs = 1'000'000'000LL;

std::string at_line(std::size_t line, const std::string& msg) {
    return "line " + std::to_string(line) + ": " + msg;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_uint(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size() && out >= 0;
}

// "SSS[.fffffffff]" to nanoseconds, without going through a double.
bool parse_seconds(std::string_view s, std::int64_t& ns) {
    const auto dot = s.find('.');
    std::int64_t whole = 0;
    if (!parse_uint(s.substr(0, dot), whole)) return false;
    std::int64_t frac = 0;
    if (dot != std::string_view::npos) {
        std::string_view f = s.substr(dot + 1);
        if (f.empty() || f.size() > 9) return false;
        if (!parse_uint(f, frac)) return false;
        for (std::size_t k = f.size(); k < 9; ++k) frac *= 10;
    }
    if (whole > std::numeric_limits<std::int64_t>::max() / kNs - 1) return false;
    ns = whole * kNs + frac;
    return true;
}

// YYYY-MM-DD[T ]HH:MM:SS[.f][Z]: date and nanoseconds since midnight.
bool parse_iso(std::string_view s, std::string& date, std::int64_t& tod_ns) {
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':') {
        return false;
    }
    if (s.back() == 'Z') s.remove_suffix(1);
    std::int64_t y, mo, d, hh, mm;
    if (!parse_uint(s.substr(0, 4), y) || !parse_uint(s.substr(5, 2), mo) || !parse_uint(s.substr(8, 2), d) ||
        !parse_uint(s.substr(11, 2), hh) || !parse_uint(s.substr(14, 2), mm)) {
        return false;
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mm > 59) return false;
    std::int64_t sec_ns = 0;
    if (!parse_seconds(s.substr(17), sec_ns) || sec_ns >= 61 * kNs) return false;
    date = std::string(s.substr(0, 10));
    tod_ns = (hh * 3600 + mm * 60) * kNs + sec_ns;
    return true;
}

bool parse_price(std::string_view s, double& v) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(v);
}

// Natural cubic spline second derivatives.
std::vector<double> spline_m(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> m(n, 0.0);
    if (n < 3) return m;
    std::vector<double> c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x[i] - x[i - 1];
        const double h1 = x[i + 1] - x[i];
        const double a = h0 / 6.0;
        const double b = (h0 + h1) / 3.0;
        const double cc = h1 / 6.0;
        const double r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        const double denom = b - a * c[i - 1];
        c[i] = cc / denom;
        d[i] = (r - a * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
        m[i] = d[i] - c[i] * m[i + 1];
        if (i == 1) break;
    }
    return m;
}

}  // namespace

Session Session::parse(std::string_view text) {
    const auto hm = [&](std::string_view s) -> std::int64_t {
        std::int64_t h, m;
        if (s.size() != 5 || s[2] != ':' || !parse_uint(s.substr(0, 2), h) || !parse_uint(s.substr(3, 2), m) ||
            h > 24 || m > 59) {
            throw DataError("session must look like 09:30-16:00");
        }
        return h * 3600 + m * 60;
    };
    const auto dash = text.find('-');
    if (dash == std::string_view::npos) throw DataError("session must look like 09:30-16:00");
    Session s;
    s.open_s = hm(trim(text.substr(0, dash)));
    s.close_s = hm(trim(text.substr(dash + 1)));
    if (s.close_s <= s.open_s) throw DataError("session close must follow its open");
    return s;
}

void TradeTape::validate() const {
    for (std::size_t k = 0; k < records.size(); ++k) {
        const TradeRecord& r = records[k];
        if (!(r.bid > 0.0) || !(r.ask >= r.bid) || !std::isfinite(r.ask)) {
            throw DataError("record " + std::to_string(k + 1) + ": need 0 < bid <= ask");
        }
        if (k > 0 && r.time_ns < records[k - 1].time_ns) {
            throw DataError("record " + std::to_string(k + 1) + ": timestamps must be nondecreasing");
        }
    }
}

TradeTape read_tape(std::istream& is, const Session& session) {
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!trim(line).empty()) {
            have_header = true;
            break;
        }
    }
    if (!have_header) throw DataError("empty file: expected header timestamp,bid,ask");
    {
        std::string h;
        for (char c : trim(line)) {
            if (c != ' ') h.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        if (h != "timestamp,bid,ask") throw DataError(at_line(lineno, "header must be timestamp,bid,ask"));
    }

    TradeTape tape;
    std::string date;
    bool numeric = false;
    const std::int64_t open_ns = session.open_s * kNs;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string_view row = trim(line);
        if (row.empty()) continue;
        std::string_view f[3];
        std::size_t start = 0;
        int nf = 0;
        for (;;) {
            const auto comma = row.find(',', start);
            if (nf == 3) throw DataError(at_line(lineno, "expected 3 fields"));
            f[nf++] = trim(row.substr(start, comma == std::string_view::npos ? comma : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (nf != 3) throw DataError(at_line(lineno, "expected 3 fields"));

        TradeRecord r;
        std::string d;
        std::int64_t tod = 0;
        if (parse_iso(f[0], d, tod)) {
            if (numeric) throw DataError(at_line(lineno, "mixed timestamp formats"));
            if (date.empty()) date = d;
            if (d != date) throw DataError(at_line(lineno, "tape spans more than one date"));
            r.time_ns = tod - open_ns;
        } else if (parse_seconds(f[0], r.time_ns)) {
            if (!date.empty()) throw DataError(at_line(lineno, "mixed timestamp formats"));
            numeric = true;
        } else {
            throw DataError(at_line(lineno, "bad timestamp '" + std::string(f[0]) + "'"));
        }
        if (!parse_price(f[1], r.bid) || !parse_price(f[2], r.ask)) {
            throw DataError(at_line(lineno, "bad price"));
        }
        if (!(r.bid > 0.0) || !(r.ask >= r.bid)) throw DataError(at_line(lineno, "need 0 < bid <= ask"));
        if (!tape.records.empty() && r.time_ns < tape.records.back().time_ns) {
            throw DataError(at_line(lineno, "timestamps must be nondecreasing"));
        }
        if (r.time_ns < 0 || r.time_ns > session.length_ns()) {
            ++tape.outside_session;
            continue;
        }
        tape.records.push_back(r);
    }
    return tape;
}

TradeTape read_tape_file(const std::string& path, const Session& session) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_tape(in, session);
}

std::vector<double> bid_ask_range(const TradeTape& tape) {
    std::vector<double> r;
    r.reserve(tape.records.size());
    for (const TradeRecord& rec : tape.records) {
        if (!(rec.bid > 0.0) || !(rec.ask > 0.0)) throw DataError("prices must be positive");
        r.push_back(100.0 * std::log(rec.ask / rec.bid));
    }
    return r;
}

CountMode parse_count_mode(std::string_view token) {
    if (token == "all") return CountMode::All;
    if (token == "changes-only") return CountMode::ChangesOnly;
    throw DomainError("count mode must be all or changes-only");
}

std::string_view count_mode_token(CountMode mode) {
    return mode == CountMode::All ? "all" : "changes-only";
}

PairSeries build_pairs(const TradeTape& tape, CountMode mode) {
    tape.validate();
    const std::vector<double> range = bid_ask_range(tape);
    const auto& rec = tape.records;
    const std::size_t n = rec.size();

    PairSeries out;
    bool started = false;
    std::int64_t last_event = 0;
    std::size_t count = 0;
    std::size_t k = 0;
    while (k < n) {
        // Records sharing a timestamp form one group.
        std::size_t end = k;
        bool changed = false;
        std::size_t changed_records = 0;
        while (end < n && rec[end].time_ns == rec[k].time_ns) {
            if (end > 0 && std::abs(range[end] - range[end - 1]) > 1e-12) {
                changed = true;
                ++changed_records;
            }
            ++end;
        }
        if (started) count += mode == CountMode::All ? end - k : changed_records;
        if (changed) {
            const std::int64_t t = rec[k].time_ns;
            if (started) {
                out.duration_ns.push_back(t - last_event);
                out.end_ns.push_back(t);
                out.series.y1.push_back(static_cast<double>(t - last_event) / static_cast<double>(kNs));
                out.series.y2.push_back(static_cast<double>(count));
                out.series.timestamps.push_back(static_cast<double>(t) / static_cast<double>(kNs));
            } else {
                out.first_change_ns = t;
                started = true;
            }
            last_event = t;
            count = 0;
            ++out.changes;
        }
        k = end;
    }
    if (out.changes < 2) throw DataError("need at least two range-change events");
    return out;
}

double SeasonalCurve::operator()(double t_s) const {
    const std::size_t n = knots_s.size();
    if (n == 0) throw DomainError("empty seasonal curve");
    if (n == 1 || t_s <= knots_s.front()) return values.front();
    if (t_s >= knots_s.back()) return values.back();
    std::vector<double> ly(n);
    std::transform(values.begin(), values.end(), ly.begin(), [](double v) { return std::log(v); });
    const std::vector<double> m = spline_m(knots_s, ly);
    const auto it = std::upper_bound(knots_s.begin(), knots_s.end(), t_s);
    const std::size_t i = static_cast<std::size_t>(it - knots_s.begin()) - 1;
    const double h = knots_s[i + 1] - knots_s[i];
    const double a = (knots_s[i + 1] - t_s) / h;
    const double b = (t_s - knots_s[i]) / h;
    const double v = a * ly[i] + b * ly[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0;
    return std::exp(v);
}

DiurnalResult diurnal_adjust(const BiSeries& series, const Session& session, double bin_minutes) {
    series.validate();
    if (series.timestamps.size() != series.size()) throw DataError("diurnal adjustment needs timestamps");
    if (!(bin_minutes > 0.0)) throw DomainError("bin width must be positive");
    const double len = static_cast<double>(session.close_s - session.open_s);
    const double width = bin_minutes * 60.0;
    const auto bins = static_cast<std::size_t>(std::ceil(len / width));

    const auto curve_for = [&](const std::vector<double>& y) {
        std::vector<double> sum(bins, 0.0);
        std::vector<std::size_t> cnt(bins, 0);
        std::vector<double> tsum(bins, 0.0);
        for (std::size_t t = 0; t < y.size(); ++t) {
            const double ts = series.timestamps[t];
            if (ts < 0.0 || ts > len) throw DataError("timestamp outside the session");
            const std::size_t b = std::min(bins - 1, static_cast<std::size_t>(ts / width));
            sum[b] += y[t];
            tsum[b] += ts;
            ++cnt[b];
        }
        // Empty bins are folded into the next non-empty neighbour.
        SeasonalCurve c;
        double carry_lo = 0.0;
        bool pending = false;
        for (std::size_t b = 0; b < bins; ++b) {
            if (cnt[b] == 0) {
                if (!pending) carry_lo = static_cast<double>(b) * width;
                pending = true;
                continue;
            }
            const double lo = pending ? carry_lo : static_cast<double>(b) * width;
            const double hi = std::min(len, static_cast<double>(b + 1) * width);
            c.knots_s.push_back(0.5 * (lo + hi));
            c.values.push_back(sum[b] / static_cast<double>(cnt[b]));
            pending = false;
        }
        return c;
    };

    DiurnalResult out;
    out.curve1 = curve_for(series.y1);
    out.curve2 = curve_for(series.y2);
    out.adjusted = series;
    for (std::size_t t = 0; t < series.size(); ++t) {
        out.adjusted.y1[t] = series.y1[t] / out.curve1(series.timestamps[t]);
        out.adjusted.y2[t] = series.y2[t] / out.curve2(series.timestamps[t]);
    }
    return out;
}

Describe describe(const std::vector<double>& x) {
    if (x.empty()) throw DomainError("describe needs data");
    Describe d;
    d.n = x.size();
    d.min = *std::min_element(x.begin(), x.end());
    d.max = *std::max_element(x.begin(), x.end());
    d.mean = stats::mean(x);
    d.median = stats::quantile_type8(x, 0.5);
    d.p10 = stats::quantile_type8(x, 0.1);
    d.p90 = stats::quantile_type8(x, 0.9);
    d.sd = stats::sample_sd(x);
    d.cv_percent = d.mean != 0.0 ? 100.0 * d.sd / std::abs(d.mean) : 0.0;
    const stats::Moments m = stats::moments(x);
    if (m.variance > 0.0) {
        d.skewness = m.skewness;
        d.excess_kurtosis = m.kurtosis - 3.0;
    } else {
        d.skewness = d.excess_kurtosis = std::numeric_limits<double>::quiet_NaN();
    }
    return d;
}

void write_pairs_csv(const PairSeries& raw, const BiSeries& adjusted, std::ostream& os) {
    if (adjusted.size() != raw.series.size()) throw DomainError("adjusted series length mismatch");
    os << "t,timestamp,y1_raw,y2_raw,y1_adj,y2_adj\n";
    for (std::size_t t = 0; t < raw.series.size(); ++t) {
        os << t + 1 << ',' << fmt(raw.series.timestamps[t]) << ',' << fmt(raw.series.y1[t]) << ','
           << fmt(raw.series.y2[t]) << ',' << fmt(adjusted.y1[t]) << ',' << fmt(adjusted.y2[t]) << '\n';
    }
}

BiSeries read_series_csv(std::istream& is, bool raw) {
    std::string line;
    std::size_t lineno = 0;
    const auto split = [](std::string_view row) {
        std::vector<std::string_view> out;
        std::size_t start = 0;
        for (;;) {
            const auto comma = row.find(',', start);
            out.push_back(trim(row.substr(start, comma == std::string_view::npos ? comma : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        return out;
    };
    while (std::getline(is, line) && trim(line).empty()) ++lineno;
    ++lineno;
    if (trim(line).empty()) throw DataError("empty file: expected a header");
    const auto header = split(trim(line));
    const auto col = [&](std::string_view name) -> int {
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (header[k] == name) return static_cast<int>(k);
        }
        return -1;
    };
    int c1 = col(raw ? "y1_raw" : "y1_adj");
    int c2 = col(raw ? "y2_raw" : "y2_adj");
    if (c1 < 0 || c2 < 0) {
        c1 = col("y1");
        c2 = col("y2");
    }
    if (c1 < 0 || c2 < 0) throw DataError(at_line(lineno, "header needs y1,y2 (or ingest output columns)"));
    const int cts = col("timestamp");

    BiSeries s;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string_view row = trim(line);
        if (row.empty()) continue;
        const auto f = split(row);
        if (f.size() != header.size()) throw DataError(at_line(lineno, "wrong number of fields"));
        double y1, y2;
        if (!parse_price(f[c1], y1) || !parse_price(f[c2], y2)) throw DataError(at_line(lineno, "bad number"));
        if (!(y1 > 0.0) || !(y2 > 0.0)) throw DataError(at_line(lineno, "observations must be positive"));
        s.y1.push_back(y1);
        s.y2.push_back(y2);
        if (cts >= 0) {
            double ts;
            if (!parse_price(f[cts], ts)) throw DataError(at_line(lineno, "bad timestamp"));
            s.timestamps.push_back(ts);
        }
    }
    if (s.size() == 0) throw DataError("no observations");
    return s;
}

BiSeries read_series_file(const std::string& path, bool raw) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_series_csv(in, raw);
}

void write_series_csv(const BiSeries& series, const MedianPaths* paths, std::ostream& os) {
    os << "t,y1,y2" << (paths ? ",eta1,eta2" : "") << '\n';
    for (std::size_t t = 0; t < series.size(); ++t) {
        os << t + 1 << ',' << fmt(series.y1[t]) << ',' << fmt(series.y2[t]);
        if (paths) os << ',' << fmt(paths->eta1[t]) << ',' << fmt(paths->eta2[t]);
        os << '\n';
    }
}

}  // namespace blsacd

#include "blsacd/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "blsacd/errors.hpp"

namespace blsacd {

namespace {

constexpr double kW = 640, kH = 420, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;

struct Frame {
    double x0, x1, y0, y1;

    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
    double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

Frame frame(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    return {x0, x1, y0, y1};
}

void open(std::ostringstream& os, const Frame& f, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
       << kW << ' ' << kH << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       << escape(title) << "</text>\n";
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kW - kLeft - kRight << "\" height=\""
       << kH - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double x = f.x0 + (f.x1 - f.x0) * k / 4, y = f.y0 + (f.y1 - f.y0) * k / 4;
        os << "<text x=\"" << num(f.px(x)) << "\" y=\"" << kH - kBottom + 16
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << label(x) << "</text>\n";
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(f.py(y) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << label(y) << "</text>\n";
    }
}

void polyline(std::ostringstream& os, const Frame& f, const std::vector<double>& x, const std::vector<double>& y,
              const char* colour, const char* dash = nullptr) {
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\"";
    if (dash) os << " stroke-dasharray=\"" << dash << '"';
    os << " points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? " " : "") << num(f.px(x[i])) << ',' << num(f.py(y[i]));
    os << "\"/>\n";
}

}  // namespace

std::string svg_qq(const std::vector<QqPoint>& points, const std::string& title) {
    if (points.empty()) throw DomainError("svg_qq: no points");
    double hi = 0.0;
    for (const auto& p : points) hi = std::max({hi, p.theoretical, p.empirical});
    const Frame f = frame(0, hi, 0, hi);
    std::ostringstream os;
    open(os, f, title);
    polyline(os, f, {0, hi}, {0, hi}, "grey", "4 3");
    for (const auto& p : points) {
        os << "<circle cx=\"" << num(f.px(p.theoretical)) << "\" cy=\"" << num(f.py(p.empirical))
           << "\" r=\"1.6\" fill=\"steelblue\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string svg_correlogram(const Correlogram& c, const std::string& title) {
    if (c.acf.empty()) throw DomainError("svg_correlogram: no lags");
    double lim = c.band;
    for (double a : c.acf) lim = std::max(lim, std::abs(a));
    lim = std::min(1.0, lim * 1.1);
    const double n = static_cast<double>(c.acf.size());
    const Frame f = frame(0, n + 1, -lim, lim);
    std::ostringstream os;
    open(os, f, title);
    polyline(os, f, {0, n + 1}, {0, 0}, "black");
    polyline(os, f, {0, n + 1}, {c.band, c.band}, "grey", "4 3");
    polyline(os, f, {0, n + 1}, {-c.band, -c.band}, "grey", "4 3");
    for (std::size_t k = 0; k < c.acf.size(); ++k) {
        const double lag = static_cast<double>(k + 1);
        polyline(os, f, {lag, lag}, {0, c.acf[k]}, "steelblue");
    }
    os << "</svg>\n";
    return os.str();
}

std::string svg_band(const PredictionBand& band, int margin, const std::string& title) {
    const auto& y = margin == 0 ? band.y1 : band.y2;
    const auto& lo = margin == 0 ? band.lower1 : band.lower2;
    const auto& hi = margin == 0 ? band.upper1 : band.upper2;
    if (y.empty()) throw DomainError("svg_band: empty band");
    std::vector<double> t(y.size());
    double top = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        t[i] = static_cast<double>(i + 1);
        top = std::max({top, y[i], hi[i]});
    }
    const Frame f = frame(1, static_cast<double>(y.size()), 0, top);
    std::ostringstream os;
    open(os, f, title);
    polyline(os, f, t, hi, "firebrick", "4 3");
    polyline(os, f, t, lo, "firebrick", "4 3");
    polyline(os, f, t, y, "steelblue");
    os << "</svg>\n";
    return os.str();
}

}  // namespace blsacd

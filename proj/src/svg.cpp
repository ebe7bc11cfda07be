#include "thomlab/svg.hpp"

#include "thomlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace thomlab {

namespace {

constexpr double kW = 720, kH = 460, kL = 80, kR = 170, kT = 40, kB = 60;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

// Fixed-precision coordinates keep the output byte-stable.
std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

struct Axis {
    bool log = false;
    double lo = 0, hi = 1;
    double map(double v, double a, double b) const {
        const double u = log ? std::log10(v) : v;
        return a + (u - lo) / (hi - lo) * (b - a);
    }
    std::vector<double> ticks() const {
        std::vector<double> t;
        if (log) {
            const int step = std::max(1, static_cast<int>(std::ceil((hi - lo) / 8)));
            for (int e = static_cast<int>(std::ceil(lo)); e <= std::floor(hi); e += step) t.push_back(e);
        } else {
            const double raw = (hi - lo) / 5;
            const double mag = std::pow(10.0, std::floor(std::log10(raw)));
            double step = mag;
            for (double m : {1.0, 2.0, 5.0, 10.0}) {
                if (m * mag >= raw) {
                    step = m * mag;
                    break;
                }
            }
            for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(v);
        }
        return t;
    }
    std::string label(double u) const {
        if (log) return "1e" + std::to_string(static_cast<int>(u));
        std::ostringstream s;
        s << (std::abs(u) < 1e-12 * (hi - lo) ? 0.0 : u);
        return s.str();
    }
};

Axis make_axis(const std::vector<PlotSeries>& ss, bool log, bool is_x) {
    Axis a;
    a.log = log;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : ss) {
        const auto& v = is_x ? s.x : s.y;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            const double x = s.x[i], y = s.y[i];
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (log && v[i] <= 0) continue;
            lo = std::min(lo, log ? std::log10(v[i]) : v[i]);
            hi = std::max(hi, log ? std::log10(v[i]) : v[i]);
        }
    }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    a.lo = lo;
    a.hi = hi;
    return a;
}

} // namespace

std::string render_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
    const Axis ax = make_axis(series, spec.logx, true);
    const Axis ay = make_axis(series, spec.logy, false);
    const double x0 = kL, x1 = kW - kR, y0 = kH - kB, y1 = kT;
    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW
      << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    if (!spec.note.empty()) o << "<!-- " << escape(spec.note) << " -->\n<desc>" << escape(spec.note) << "</desc>\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << px((x0 + x1) / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(spec.title)
      << "</text>\n";
    o << "<rect x=\"" << px(x0) << "\" y=\"" << px(y1) << "\" width=\"" << px(x1 - x0) << "\" height=\"" << px(y0 - y1)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double u : ax.ticks()) {
        const double X = x0 + (u - ax.lo) / (ax.hi - ax.lo) * (x1 - x0);
        o << "<line x1=\"" << px(X) << "\" y1=\"" << px(y0) << "\" x2=\"" << px(X) << "\" y2=\"" << px(y1)
          << "\" stroke=\"#ddd\"/>\n<text x=\"" << px(X) << "\" y=\"" << px(y0 + 16) << "\" text-anchor=\"middle\">"
          << ax.label(u) << "</text>\n";
    }
    for (double u : ay.ticks()) {
        const double Y = y0 + (u - ay.lo) / (ay.hi - ay.lo) * (y1 - y0);
        o << "<line x1=\"" << px(x0) << "\" y1=\"" << px(Y) << "\" x2=\"" << px(x1) << "\" y2=\"" << px(Y)
          << "\" stroke=\"#ddd\"/>\n<text x=\"" << px(x0 - 6) << "\" y=\"" << px(Y + 4) << "\" text-anchor=\"end\">"
          << ay.label(u) << "</text>\n";
    }
    o << "<text x=\"" << px((x0 + x1) / 2) << "\" y=\"" << px(kH - 18) << "\" text-anchor=\"middle\">"
      << escape(spec.xlabel) << "</text>\n";
    o << "<text transform=\"translate(18," << px((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(spec.ylabel) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kColors[k % std::size(kColors)];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            const double x = s.x[i], y = s.y[i];
            if (!std::isfinite(x) || !std::isfinite(y) || (spec.logx && x <= 0) || (spec.logy && y <= 0)) continue;
            o << (first ? "" : " ") << px(ax.map(x, x0, x1)) << ',' << px(ay.map(y, y0, y1));
            first = false;
        }
        o << "\"/>\n";
        const double ly = y1 + 14 + 18 * static_cast<double>(k);
        o << "<line x1=\"" << px(x1 + 12) << "\" y1=\"" << px(ly - 4) << "\" x2=\"" << px(x1 + 32) << "\" y2=\""
          << px(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n<text x=\"" << px(x1 + 38) << "\" y=\""
          << px(ly) << "\">" << escape(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

} // namespace thomlab

#ifndef BNC_SVG_HPP
#define BNC_SVG_HPP

/*
 * Native SVG output: line charts with linear or log axes, and a space-time
 * heat map.  No external plotting process; every figure a command emits has
 * a sibling CSV with the underlying data.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "pde_core.hpp"

namespace bnc {
namespace svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct ChartOptions {
    int width = 960;
    int height = 600;
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    bool legend = true;
};

namespace detail {

inline const char* palette(std::size_t i)
{
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"};
    return colors[i % 8];
}

inline std::string px(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string label_num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

/* 1-2-5 ladder ticks covering [lo, hi]. */
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6)
{
    std::vector<double> ticks;
    const double span = hi - lo;
    if (!(span > 0.0))
        return {lo};
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw)
            break;
    }
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step)
        ticks.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
    return ticks;
}

/* Decade ticks for a log axis (values are log10). */
inline std::vector<double> decade_ticks(double lo, double hi)
{
    std::vector<double> ticks;
    const int a = static_cast<int>(std::ceil(lo - 1e-9));
    const int b = static_cast<int>(std::floor(hi + 1e-9));
    int stride = 1;
    while ((b - a) / stride > 8)
        ++stride;
    for (int d = a; d <= b; d += stride)
        ticks.push_back(d);
    if (ticks.empty())
        ticks.push_back(0.5 * (lo + hi));
    return ticks;
}

struct AxisMap {
    double lo = 0.0, hi = 1.0;
    double p0 = 0.0, p1 = 1.0;   /* pixel range */
    bool log = false;

    double to_px(double v) const
    {
        const double t = log ? std::log10(v) : v;
        return p0 + (t - lo) / (hi - lo) * (p1 - p0);
    }
};

}   // namespace detail

inline void write_line_chart(const std::string& path, const std::vector<Series>& series,
                             const ChartOptions& opt = {})
{
    if (series.empty())
        throw InvalidParams("svg: no series to plot");

    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            throw InvalidParams("svg: series '" + s.label + "' has mismatched x/y lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double xv = s.x[i], yv = s.y[i];
            if (!std::isfinite(xv) || !std::isfinite(yv))
                continue;
            if (opt.log_x && xv <= 0.0)
                continue;
            if (opt.log_y && yv <= 0.0)
                continue;
            const double tx = opt.log_x ? std::log10(xv) : xv;
            const double ty = opt.log_y ? std::log10(yv) : yv;
            xlo = std::min(xlo, tx);
            xhi = std::max(xhi, tx);
            ylo = std::min(ylo, ty);
            yhi = std::max(yhi, ty);
        }
    }
    if (xlo > xhi || ylo > yhi)
        throw InvalidParams("svg: no plottable points (log axis with nonpositive data?)");
    auto pad = [](double& lo, double& hi) {
        const double d = hi - lo;
        const double p = d > 0.0 ? 0.05 * d : std::max(1e-12, 1e-6 * std::abs(hi) + 1e-9);
        lo -= p;
        hi += p;
    };
    pad(xlo, xhi);
    pad(ylo, yhi);

    const double ml = 78, mr = 24, mt = 46, mb = 58;
    detail::AxisMap X{xlo, xhi, ml, opt.width - mr, opt.log_x};
    detail::AxisMap Y{ylo, yhi, opt.height - mb, mt, opt.log_y};

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("svg: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
        << opt.height << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        out << "<text x=\"" << opt.width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"16\">" << detail::escape(opt.title)
            << "</text>\n";

    const std::vector<double> xt =
        opt.log_x ? detail::decade_ticks(xlo, xhi) : detail::nice_ticks(xlo, xhi);
    const std::vector<double> yt =
        opt.log_y ? detail::decade_ticks(ylo, yhi) : detail::nice_ticks(ylo, yhi);
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    for (double t : xt) {
        const double p = X.p0 + (t - X.lo) / (X.hi - X.lo) * (X.p1 - X.p0);
        out << "<line x1=\"" << detail::px(p) << "\" y1=\"" << detail::px(Y.p0) << "\" x2=\""
            << detail::px(p) << "\" y2=\"" << detail::px(Y.p1)
            << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
        const std::string lab = opt.log_x ? ("1e" + detail::label_num(t)) : detail::label_num(t);
        out << "<text x=\"" << detail::px(p) << "\" y=\"" << detail::px(Y.p0 + 16)
            << "\" text-anchor=\"middle\">" << lab << "</text>\n";
    }
    for (double t : yt) {
        const double p = Y.p0 + (t - Y.lo) / (Y.hi - Y.lo) * (Y.p1 - Y.p0);
        out << "<line x1=\"" << detail::px(X.p0) << "\" y1=\"" << detail::px(p) << "\" x2=\""
            << detail::px(X.p1) << "\" y2=\"" << detail::px(p)
            << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
        const std::string lab = opt.log_y ? ("1e" + detail::label_num(t)) : detail::label_num(t);
        out << "<text x=\"" << detail::px(X.p0 - 6) << "\" y=\"" << detail::px(p + 4)
            << "\" text-anchor=\"end\">" << lab << "</text>\n";
    }
    out << "</g>\n";
    out << "<rect x=\"" << detail::px(X.p0) << "\" y=\"" << detail::px(Y.p1) << "\" width=\""
        << detail::px(X.p1 - X.p0) << "\" height=\"" << detail::px(Y.p0 - Y.p1)
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    if (!opt.x_label.empty())
        out << "<text x=\"" << (X.p0 + X.p1) / 2 << "\" y=\"" << opt.height - 14
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
            << detail::escape(opt.x_label) << "</text>\n";
    if (!opt.y_label.empty())
        out << "<text x=\"20\" y=\"" << (Y.p0 + Y.p1) / 2
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
            << "transform=\"rotate(-90 20 " << (Y.p0 + Y.p1) / 2 << ")\">"
            << detail::escape(opt.y_label) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        out << "<polyline fill=\"none\" stroke=\"" << detail::palette(si)
            << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double xv = s.x[i], yv = s.y[i];
            if (!std::isfinite(xv) || !std::isfinite(yv))
                continue;
            if ((opt.log_x && xv <= 0.0) || (opt.log_y && yv <= 0.0))
                continue;
            out << detail::px(X.to_px(xv)) << "," << detail::px(Y.to_px(yv)) << " ";
        }
        out << "\"/>\n";
    }

    if (opt.legend) {
        double ly = Y.p1 + 10;
        for (std::size_t si = 0; si < series.size(); ++si) {
            const double lx = X.p1 - 170;
            out << "<line x1=\"" << detail::px(lx) << "\" y1=\"" << detail::px(ly) << "\" x2=\""
                << detail::px(lx + 24) << "\" y2=\"" << detail::px(ly) << "\" stroke=\""
                << detail::palette(si) << "\" stroke-width=\"2\"/>\n";
            out << "<text x=\"" << detail::px(lx + 30) << "\" y=\"" << detail::px(ly + 4)
                << "\" font-family=\"sans-serif\" font-size=\"12\">"
                << detail::escape(series[si].label) << "</text>\n";
            ly += 18;
        }
    }

    out << "</svg>\n";
    out.flush();
    if (!out)
        throw Error("svg: write failure on " + path);
}

struct HeatmapOptions {
    int width = 960;
    int height = 600;
    std::string title;
    std::string x_label = "t";
    std::string y_label = "x";
    std::vector<double> vlines;      /* stage boundaries */
    std::size_t max_cols = 220;      /* downsampling caps */
    std::size_t max_rows = 180;
};

/* rows[k] is the field at times[k] sampled on xs; colors diverge around 0
 * (blue negative, red positive), scaled per sign. */
inline void write_heatmap(const std::string& path, const std::vector<double>& times,
                          const std::vector<double>& xs, const std::vector<std::vector<double>>& rows,
                          const HeatmapOptions& opt = {})
{
    if (times.size() != rows.size() || times.size() < 2 || xs.size() < 2)
        throw InvalidParams("svg: heatmap needs >= 2 times and >= 2 space nodes");
    for (const auto& r : rows)
        if (r.size() != xs.size())
            throw InvalidParams("svg: heatmap row does not match the space axis");

    double vneg = 0.0, vpos = 0.0;
    for (const auto& r : rows)
        for (double v : r) {
            if (!std::isfinite(v))
                throw InvalidParams("svg: non-finite heatmap value");
            vneg = std::min(vneg, v);
            vpos = std::max(vpos, v);
        }
    if (vpos == 0.0 && vneg == 0.0)
        vpos = 1.0;

    auto color = [&](double v) {
        /* blend white -> #b2182b for positive, white -> #2166ac for negative */
        double t = 0.0;
        int r2 = 247, g2 = 247, b2 = 247;
        if (v >= 0.0 && vpos > 0.0) {
            t = v / vpos;
            r2 = 178, g2 = 24, b2 = 43;
        } else if (v < 0.0 && vneg < 0.0) {
            t = v / vneg;
            r2 = 33, g2 = 102, b2 = 172;
        }
        const int r = static_cast<int>(std::lround(247 + t * (r2 - 247)));
        const int g = static_cast<int>(std::lround(247 + t * (g2 - 247)));
        const int b = static_cast<int>(std::lround(247 + t * (b2 - 247)));
        char buf[10];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
        return std::string(buf);
    };

    const std::size_t ct = (times.size() + opt.max_cols - 1) / opt.max_cols;
    const std::size_t cx = (xs.size() + opt.max_rows - 1) / opt.max_rows;
    std::vector<std::size_t> ti, xi;
    for (std::size_t k = 0; k < times.size(); k += ct)
        ti.push_back(k);
    if (ti.back() != times.size() - 1)
        ti.push_back(times.size() - 1);
    for (std::size_t i = 0; i < xs.size(); i += cx)
        xi.push_back(i);
    if (xi.back() != xs.size() - 1)
        xi.push_back(xs.size() - 1);

    const double ml = 78, mr = 24, mt = 46, mb = 58;
    detail::AxisMap X{times.front(), times.back(), ml, static_cast<double>(opt.width) - mr, false};
    detail::AxisMap Y{xs.front(), xs.back(), static_cast<double>(opt.height) - mb, mt, false};

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("svg: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
        << opt.height << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        out << "<text x=\"" << opt.width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"16\">" << detail::escape(opt.title)
            << " (min " << detail::label_num(vneg) << ", max " << detail::label_num(vpos)
            << ")</text>\n";

    for (std::size_t a = 0; a + 1 < ti.size(); ++a) {
        const double x0 = X.to_px(times[ti[a]]);
        const double x1 = X.to_px(times[ti[a + 1]]);
        const auto& row = rows[ti[a]];
        for (std::size_t b = 0; b + 1 < xi.size(); ++b) {
            const double y1 = Y.to_px(xs[xi[b]]);
            const double y0 = Y.to_px(xs[xi[b + 1]]);
            out << "<rect x=\"" << detail::px(x0) << "\" y=\"" << detail::px(y0) << "\" width=\""
                << detail::px(x1 - x0 + 0.5) << "\" height=\"" << detail::px(y1 - y0 + 0.5)
                << "\" fill=\"" << color(row[xi[b]]) << "\"/>\n";
        }
    }

    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    for (double t : detail::nice_ticks(times.front(), times.back())) {
        const double p = X.to_px(t);
        out << "<text x=\"" << detail::px(p) << "\" y=\"" << detail::px(Y.p0 + 16)
            << "\" text-anchor=\"middle\">" << detail::label_num(t) << "</text>\n";
    }
    for (double t : detail::nice_ticks(xs.front(), xs.back())) {
        const double p = Y.to_px(t);
        out << "<text x=\"" << detail::px(X.p0 - 6) << "\" y=\"" << detail::px(p + 4)
            << "\" text-anchor=\"end\">" << detail::label_num(t) << "</text>\n";
    }
    out << "</g>\n";
    for (double v : opt.vlines) {
        if (v < times.front() || v > times.back())
            continue;
        const double p = X.to_px(v);
        out << "<line x1=\"" << detail::px(p) << "\" y1=\"" << detail::px(Y.p0) << "\" x2=\""
            << detail::px(p) << "\" y2=\"" << detail::px(Y.p1)
            << "\" stroke=\"#000\" stroke-width=\"1\" stroke-dasharray=\"5,4\"/>\n";
    }
    out << "<rect x=\"" << detail::px(X.p0) << "\" y=\"" << detail::px(Y.p1) << "\" width=\""
        << detail::px(X.p1 - X.p0) << "\" height=\"" << detail::px(Y.p0 - Y.p1)
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    if (!opt.x_label.empty())
        out << "<text x=\"" << (X.p0 + X.p1) / 2 << "\" y=\"" << opt.height - 14
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
            << detail::escape(opt.x_label) << "</text>\n";
    if (!opt.y_label.empty())
        out << "<text x=\"20\" y=\"" << (Y.p0 + Y.p1) / 2
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
            << "transform=\"rotate(-90 20 " << (Y.p0 + Y.p1) / 2 << ")\">"
            << detail::escape(opt.y_label) << "</text>\n";
    out << "</svg>\n";
    out.flush();
    if (!out)
        throw Error("svg: write failure on " + path);
}

}   // namespace svg
}   // namespace bnc

#endif

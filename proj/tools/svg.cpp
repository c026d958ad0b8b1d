#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace hartree::cli {

namespace {

constexpr double W = 720, H = 460, ML = 78, MR = 170, MT = 40, MB = 58;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

struct Axis {
    bool log = false;
    double lo = 0, hi = 1;

    double map(double v) const { return log ? std::log10(v) : v; }
    double frac(double v) const { return (map(v) - lo) / (hi - lo); }

    void fit(double vmin, double vmax) {
        lo = map(vmin);
        hi = map(vmax);
        if (log) {
            lo = std::floor(lo);
            hi = std::ceil(hi);
        } else {
            const double pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        if (!(hi > lo)) {
            lo -= 1;
            hi += 1;
        }
    }

    std::vector<double> ticks() const {
        std::vector<double> t;
        if (log) {
            const int step = std::max(1, static_cast<int>(std::ceil((hi - lo) / 8)));
            for (double e = lo; e <= hi + 1e-9; e += step) t.push_back(std::pow(10.0, e));
            return t;
        }
        const double raw = (hi - lo) / 6;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (m * mag >= raw) {
                step = m * mag;
                break;
            }
        for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * step; v += step)
            t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
        return t;
    }
};

}  // namespace

void write_svg(const Plot& p, const std::string& path) {
    Axis ax, ay;
    ax.log = p.logx;
    ay.log = p.logy;
    double xmin = HUGE_VAL, xmax = -HUGE_VAL, ymin = HUGE_VAL, ymax = -HUGE_VAL;
    auto drawable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!p.logx || x > 0) && (!p.logy || y > 0);
    };
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
            if (drawable(s.x[i], s.y[i])) {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
    if (xmin > xmax) {
        xmin = ymin = p.logx ? 1 : 0;
        xmax = ymax = p.logx ? 10 : 1;
    }
    ax.fit(xmin, xmax);
    ay.fit(ymin, ymax);
    const double pw = W - ML - MR, ph = H - MT - MB;
    auto X = [&](double v) { return ML + ax.frac(v) * pw; };
    auto Y = [&](double v) { return MT + (1 - ay.frac(v)) * ph; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << ML + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << esc(p.title)
        << "</text>\n";
    out << "<rect x=\"" << ML << "\" y=\"" << MT << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ax.ticks()) {
        const double x = X(t);
        out << "<line x1=\"" << x << "\" y1=\"" << MT << "\" x2=\"" << x << "\" y2=\"" << MT + ph
            << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << x << "\" y=\"" << MT + ph + 16 << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
    }
    for (double t : ay.ticks()) {
        const double y = Y(t);
        out << "<line x1=\"" << ML << "\" y1=\"" << y << "\" x2=\"" << ML + pw << "\" y2=\"" << y
            << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << ML - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
    }
    out << "<text x=\"" << ML + pw / 2 << "\" y=\"" << H - 14 << "\" text-anchor=\"middle\">" << esc(p.xlabel)
        << "</text>\n";
    out << "<text transform=\"translate(18," << MT + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << esc(p.ylabel) << "</text>\n";

    for (std::size_t k = 0; k < p.series.size(); ++k) {
        const auto& s = p.series[k];
        const char* c = kColors[k % 8];
        std::ostringstream pts;
        pts << std::setprecision(6);
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
            if (drawable(s.x[i], s.y[i])) pts << X(s.x[i]) << ',' << Y(s.y[i]) << ' ';
        if (s.markers) {
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
                if (drawable(s.x[i], s.y[i]))
                    out << "<circle cx=\"" << X(s.x[i]) << "\" cy=\"" << Y(s.y[i]) << "\" r=\"3\" fill=\"" << c
                        << "\"/>\n";
        } else {
            out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.6\""
                << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"" << pts.str() << "\"/>\n";
        }
        const double ly = MT + 14 + 18 * k;
        out << "<line x1=\"" << W - MR + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - MR + 34 << "\" y2=\"" << ly - 4
            << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << W - MR + 40 << "\" y=\"" << ly << "\">" << esc(s.label) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace hartree::cli

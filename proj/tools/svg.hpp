#pragma once

#include <string>
#include <vector>

namespace hartree::cli {

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool markers = false;
    bool dashed = false;
};

struct Plot {
    std::string title, xlabel, ylabel;
    bool logx = false, logy = false;
    std::vector<Series> series;
};

// Line / log-log plot as a standalone SVG. Points that cannot be drawn on a log axis are skipped.
void write_svg(const Plot& p, const std::string& path);

}  // namespace hartree::cli

#include "mapcontent/svg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace mapcontent {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

SvgCanvas::SvgCanvas(double width, double height) : width_(width), height_(height) {}

void SvgCanvas::rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke,
                     double stroke_width) {
    std::string s = "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
                    "\" fill=\"" + fill + "\"";
    if (stroke != "none") s += " stroke=\"" + stroke + "\" stroke-width=\"" + num(stroke_width) + "\"";
    body_.push_back(s + "/>");
}

void SvgCanvas::line(double x1, double y1, double x2, double y2, const std::string& stroke, double width) {
    body_.push_back("<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
                    "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"/>");
}

void SvgCanvas::circle(double cx, double cy, double r, const std::string& fill) {
    body_.push_back("<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" + fill +
                    "\"/>");
}

void SvgCanvas::text(double x, double y, const std::string& content, double size) {
    body_.push_back("<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
                    "\" font-family=\"monospace\">" + content + "</text>");
}

std::string SvgCanvas::str() const {
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" +
                      num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) + "\">\n";
    for (const auto& b : body_) {
        out += b;
        out += "\n";
    }
    out += "</svg>\n";
    return out;
}

void SvgCanvas::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path);
    out << str();
}

// ---------------------------------------------------------------------------
// Plot helpers (2-d domains)
// ---------------------------------------------------------------------------

namespace {

constexpr double kPix = 512;

std::string class_color(CubeClassKind kind) {
    switch (kind) {
        case CubeClassKind::Md: return "#c0392b";
        case CubeClassKind::Compressed: return "#f1c40f";
        case CubeClassKind::Good: return "#27ae60";
    }
    return "#000000";
}

std::string heat_color(double t) {
    // blue (0) to red (1)
    int r = static_cast<int>(std::round(255 * std::min(1.0, std::max(0.0, t))));
    int b = 255 - r;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x40%02x", r, b);
    return buf;
}

}  // namespace

void write_class_map_svg(const std::string& path, const Classification& cls, int level) {
    if (cls.dim != 2) throw ArgumentError("class map rendering supports 2-d domains only");
    SvgCanvas svg(kPix, kPix);
    int side = 1 << level;
    double cell = kPix / side;
    const auto& lvl = cls.levels[static_cast<std::size_t>(level)];
    for (std::size_t r = 0; r < lvl.size(); ++r) {
        int ix = static_cast<int>(r % static_cast<std::size_t>(side));
        int iy = static_cast<int>(r / static_cast<std::size_t>(side));
        svg.rect(ix * cell, kPix - (iy + 1) * cell, cell, cell, class_color(lvl[r].kind), "#ffffff", 0.5);
    }
    svg.save(path);
}

void write_md_heatmap_svg(const std::string& path, const Classification& cls, int level) {
    if (cls.dim != 2) throw ArgumentError("md heatmap rendering supports 2-d domains only");
    SvgCanvas svg(kPix, kPix);
    int side = 1 << level;
    double cell = kPix / side;
    double worst = 1e-12;
    const auto& fits = cls.fits[static_cast<std::size_t>(level)];
    for (const auto& f : fits) worst = std::max(worst, f.md_upper);
    for (std::size_t r = 0; r < fits.size(); ++r) {
        int ix = static_cast<int>(r % static_cast<std::size_t>(side));
        int iy = static_cast<int>(r / static_cast<std::size_t>(side));
        svg.rect(ix * cell, kPix - (iy + 1) * cell, cell, cell, heat_color(fits[r].md_upper / worst));
    }
    svg.save(path);
}

void write_piece_map_svg(const std::string& path, const PipelineResult& result, int dim, int depth) {
    if (dim != 2) throw ArgumentError("piece map rendering supports 2-d domains only");
    SvgCanvas svg(kPix, kPix);
    int side = 1 << depth;
    double cell = kPix / side;
    svg.rect(0, 0, kPix, kPix, "#dddddd");
    const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                             "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    for (std::size_t pi = 0; pi < result.pieces.size(); ++pi) {
        const std::string color = palette[pi % 10];
        for (std::size_t c : result.pieces[pi].cells.cells()) {
            LatticePoint p = result.pieces[pi].cells.cell_coords(c);
            svg.rect(p[0] * cell, kPix - (p[1] + 1) * cell, cell, cell, color);
        }
    }
    svg.save(path);
}

void write_scaling_chart_svg(const std::string& path, const ScalingReport& report) {
    const double w = 480, h = 360, margin = 40;
    SvgCanvas svg(w, h);
    svg.line(margin, h - margin, w - 10, h - margin, "#333333", 1);
    svg.line(margin, h - margin, margin, 10, "#333333", 1);
    svg.text(w / 2, h - 8, "log10 content");
    svg.text(4, 14, "log10 diam");

    double lo = -4, hi = 0.5;
    auto px = [&](double logv) { return margin + (logv - lo) / (hi - lo) * (w - margin - 10); };
    auto py = [&](double logv) { return (h - margin) - (logv - lo) / (hi - lo) * (h - margin - 10); };
    for (const auto& row : report.rows) {
        if (row.eta <= 0 || row.diam <= 0) continue;
        svg.circle(px(std::log10(row.eta)), py(std::log10(row.diam)), 3.5, "#1f77b4");
    }
    char label[64];
    std::snprintf(label, sizeof(label), "slope %.3f  max-ratio %.3f", report.slope, report.max_ratio);
    svg.text(margin + 6, 24, label);
    svg.save(path);
}

void write_cells_svg(const std::string& path, const CellSet& cells) {
    if (cells.dim() != 2) throw ArgumentError("cell rendering supports 2-d domains only");
    SvgCanvas svg(kPix, kPix);
    svg.rect(0, 0, kPix, kPix, "#f4f4f4");
    double cell = kPix / (1 << cells.depth());
    for (std::size_t c : cells.cells()) {
        LatticePoint p = cells.cell_coords(c);
        svg.rect(p[0] * cell, kPix - (p[1] + 1) * cell, cell, cell, "#2c3e50");
    }
    svg.save(path);
}

void write_star_tree_svg(const std::string& path, int k) {
    const double w = 520, h = 220;
    SvgCanvas svg(w, h);
    double x0 = 20, x1 = w - 20, base = h - 40;
    svg.line(x0, base, x1, base, "#333333", 2);
    int stars = 1 << (k - 1);
    int spikes = 1 << (k - 1);
    double spike_len = (x1 - x0) * std::ldexp(1.0, -k);
    for (int s = 0; s < stars; ++s) {
        double cx = x0 + (x1 - x0) * static_cast<double>(s) / stars;
        svg.circle(cx, base, 2.5, "#c0392b");
        for (int sp = 0; sp < spikes; ++sp) {
            double angle = M_PI / 2 + (sp - (spikes - 1) / 2.0) * (M_PI / (spikes + 1));
            svg.line(cx, base, cx + spike_len * std::cos(angle), base - spike_len * std::sin(angle), "#2980b9", 1.2);
        }
    }
    char label[48];
    std::snprintf(label, sizeof(label), "k = %d, total length %.4f", k, 1.0 + std::ldexp(1.0, k - 2));
    svg.text(20, 20, label);
    svg.save(path);
}

}  // namespace mapcontent

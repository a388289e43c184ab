#pragma once

#include <string>
#include <vector>

#include "mapcontent/decompose.hpp"
#include "mapcontent/experiments.hpp"

namespace mapcontent {

// Minimal static-SVG writer with fixed-precision coordinates so identical
// inputs produce byte-identical files.
class SvgCanvas {
public:
    SvgCanvas(double width, double height);

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "none", double stroke_width = 0);
    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width);
    void circle(double cx, double cy, double r, const std::string& fill);
    void text(double x, double y, const std::string& content, double size = 10);

    std::string str() const;
    void save(const std::string& path) const;

private:
    double width_, height_;
    std::vector<std::string> body_;
};

void write_class_map_svg(const std::string& path, const Classification& cls, int level);
void write_md_heatmap_svg(const std::string& path, const Classification& cls, int level);
void write_piece_map_svg(const std::string& path, const PipelineResult& result, int dim, int depth);
void write_scaling_chart_svg(const std::string& path, const ScalingReport& report);
void write_star_tree_svg(const std::string& path, int k);
void write_cells_svg(const std::string& path, const CellSet& cells);

}  // namespace mapcontent

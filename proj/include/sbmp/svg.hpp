#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "sbmp/types.hpp"

namespace sbmp::svg {

// Plain-text SVG figure: workspace rectangle, obstacles, expert overlays,
// generated paths, optional evolution snapshots, start/goal markers.
class Figure {
public:
    Figure(const Workspace& w, int pixels = 640) : w_(w), px_(pixels) {
        scale_ = px_ / std::max(w.hi[0] - w.lo[0], w.hi[1] - w.lo[1]);
        height_ = static_cast<int>((w.hi[1] - w.lo[1]) * scale_);
    }

    void add_polyline(const std::vector<double>& q, int length, int dim, const std::string& color,
                      double width, double opacity = 1.0) {
        std::ostringstream d;
        for (int i = 0; i < length; ++i) {
            d << (i == 0 ? "M" : " L") << x(q[static_cast<std::size_t>(i) * dim]) << " "
              << y(q[static_cast<std::size_t>(i) * dim + 1]);
        }
        body_ << "  <path d=\"" << d.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
              << width << "\" stroke-opacity=\"" << opacity << "\"/>\n";
    }

    void add_trajectory(const Trajectory& t, const std::string& color, double width, double opacity = 1.0) {
        add_polyline(t.q, t.length, t.dim, color, width, opacity);
    }

    void add_marker(const std::vector<double>& p, const std::string& color, double r = 5.0) {
        body_ << "  <circle cx=\"" << x(p[0]) << "\" cy=\"" << y(p[1]) << "\" r=\"" << r << "\" fill=\"" << color
              << "\"/>\n";
    }

    std::string str() const {
        std::ostringstream out;
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px_ << "\" height=\"" << height_
            << "\" viewBox=\"0 0 " << px_ << " " << height_ << "\">\n";
        out << "  <rect x=\"0\" y=\"0\" width=\"" << px_ << "\" height=\"" << height_
            << "\" fill=\"#ffffff\" stroke=\"#222222\"/>\n";
        for (const Circle& c : w_.obstacles) {
            out << "  <circle cx=\"" << x(c.center[0]) << "\" cy=\"" << y(c.center[1]) << "\" r=\""
                << c.radius * scale_ << "\" fill=\"#9aa4ae\" fill-opacity=\"0.8\"/>\n";
        }
        out << body_.str();
        out << "</svg>\n";
        return out.str();
    }

private:
    double x(double wx) const { return (wx - w_.lo[0]) * scale_; }
    double y(double wy) const { return height_ - (wy - w_.lo[1]) * scale_; }

    Workspace w_;
    int px_ = 640;
    int height_ = 640;
    double scale_ = 1.0;
    std::ostringstream body_;
};

}  // namespace sbmp::svg

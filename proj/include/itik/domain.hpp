#ifndef ITIK_DOMAIN_HPP
#define ITIK_DOMAIN_HPP

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "itik/spectral.hpp"
#include "itik/types.hpp"

namespace itik {

/// Axis-aligned rectangle, x0 < x1, y0 < y1.
struct Rect {
    double x0, x1, y0, y1;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    void validate() const {
        if (!(x0 < x1 && y0 < y1)) throw ConfigError("Rect: need x0 < x1 and y0 < y1");
    }
};

/// Sides in the fixed global ordering South, East, North, West.
/// The boundary parameter increases with x on South/North and with y on East/West.
enum class Side : int { South = 0, East = 1, North = 2, West = 3 };

inline const char* side_name(Side s) {
    switch (s) {
        case Side::South: return "South";
        case Side::East: return "East";
        case Side::North: return "North";
        default: return "West";
    }
}

inline bool is_horizontal(Side s) { return s == Side::South || s == Side::North; }

/// Outward unit normal of a side.
inline std::array<double, 2> side_normal(Side s) {
    switch (s) {
        case Side::South: return {0.0, -1.0};
        case Side::East: return {1.0, 0.0};
        case Side::North: return {0.0, 1.0};
        default: return {-1.0, 0.0};
    }
}

/// One straight piece of boundary carrying Gauss (corner-free) trace nodes,
/// listed in ascending parameter order, with matching quadrature weights.
struct Segment {
    Side side;
    double fixed;      // the frozen coordinate (y for South/North, x for East/West)
    double lo, hi;     // parameter interval
    VecR nodes;        // physical parameter values, ascending
    VecR weights;      // quadrature weights on [lo, hi]
    double length() const { return hi - lo; }
    int count() const { return static_cast<int>(nodes.size()); }
};

bool segments_conforming(const Segment& a, const Segment& b, double tol = 1e-12);

/// Ordered list of segments; trace vectors are the concatenation of per-segment
/// values in this order.
struct BoundaryLayout {
    std::vector<Segment> segments;
    int size() const {
        int s = 0;
        for (const auto& seg : segments) s += seg.count();
        return s;
    }
    int offset(int seg_index) const {
        int s = 0;
        for (int i = 0; i < seg_index; ++i) s += segments[i].count();
        return s;
    }
};

/// Gauss segment of degree n_b on one side of a rectangle.
Segment make_segment(const Rect& r, Side s, int n_b);

/// Canonical four-segment layout (South, East, North, West) of a rectangle.
BoundaryLayout make_rect_layout(const Rect& r, int n_b);

/// Find the pairs (index into a, index into b) of coincident segments.
std::vector<std::pair<int, int>> match_segments(const BoundaryLayout& a, const BoundaryLayout& b,
                                                double tol = 1e-12);

/// Complex impedance data sampled on the nodes of a BoundaryLayout, in the
/// layout's segment order.
using BoundaryTrace = Vec;

/// Non-negative C^1 scattering potential with an analytic (or interpolated)
/// gradient. Instances are immutable and cheap to copy.
class Potential {
  public:
    double operator()(double x, double y) const { return value_(x, y); }
    std::array<double, 2> gradient(double x, double y) const { return grad_(x, y); }
    const std::string& descriptor() const { return descriptor_; }

    static Potential constant(double c);
    /// V(x, y) = c + ax * x + ay * y
    static Potential affine(double ax, double ay, double c);
    /// V(x, y) = base + amp * exp(-((x-x0)^2 + (y-y0)^2) / (2 sigma^2))
    static Potential gaussian_bump(double amp, double x0, double y0, double sigma, double base);
    /// Bicubic interpolation of a row-major table on a uniform grid over `dom`.
    static Potential table(const MatR& values, const Rect& dom);

    /// Parse a config descriptor, e.g. "constant:1.0", "affine:0.05,0,1",
    /// "gaussian:0.5,1.0,0.5,0.2,1.0", "table:path.txt".
    static Potential parse(const std::string& descriptor);

    static Potential from_functions(std::function<double(double, double)> value,
                                    std::function<std::array<double, 2>(double, double)> grad,
                                    std::string descriptor);

    Potential() = default;

  private:
    std::function<double(double, double)> value_;
    std::function<std::array<double, 2>(double, double)> grad_;
    std::string descriptor_;
};

/// V2(x, y) = V(2 - x, y) with the correspondingly reflected gradient.
Potential reflect_potential(const Potential& V);

/// Minimum of 2 V + (x - a0, y - b0) . grad V over an equispaced samples x samples
/// grid on `rect`. The vertex (a0, b0) must be a corner of `rect`.
/// A non-positive return value means the non-trapping condition fails.
double check_nontrapping(const Potential& V, const Rect& rect, std::array<double, 2> vertex,
                         int samples = 201);

/// Supremum of |V2 - V1| sampled on an equispaced grid.
double potential_difference_sup(const Potential& V1, const Potential& V2, const Rect& rect,
                                int samples = 201);

}  // namespace itik

#endif

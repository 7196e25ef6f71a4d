#include "itik/domain.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace itik {

bool segments_conforming(const Segment& a, const Segment& b, double tol) {
    return is_horizontal(a.side) == is_horizontal(b.side) && std::abs(a.fixed - b.fixed) <= tol &&
           std::abs(a.lo - b.lo) <= tol && std::abs(a.hi - b.hi) <= tol && a.count() == b.count();
}

Segment make_segment(const Rect& r, Side s, int n_b) {
    r.validate();
    ChebGrid g = cheb_nodes(n_b, NodeKind::Gauss);
    double lo, hi, fixed;
    switch (s) {
        case Side::South: lo = r.x0; hi = r.x1; fixed = r.y0; break;
        case Side::North: lo = r.x0; hi = r.x1; fixed = r.y1; break;
        case Side::East: lo = r.y0; hi = r.y1; fixed = r.x1; break;
        default: lo = r.y0; hi = r.y1; fixed = r.x0; break;
    }
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    const int m = g.n + 1;
    VecR nodes(m);
    for (int j = 0; j < m; ++j) nodes[j] = mid + half * g.nodes[m - 1 - j];  // ascending
    VecR w = quad_weights_nodes(nodes, lo, hi);
    return Segment{s, fixed, lo, hi, std::move(nodes), std::move(w)};
}

BoundaryLayout make_rect_layout(const Rect& r, int n_b) {
    BoundaryLayout L;
    L.segments = {make_segment(r, Side::South, n_b), make_segment(r, Side::East, n_b),
                  make_segment(r, Side::North, n_b), make_segment(r, Side::West, n_b)};
    return L;
}

std::vector<std::pair<int, int>> match_segments(const BoundaryLayout& a, const BoundaryLayout& b,
                                                double tol) {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < static_cast<int>(a.segments.size()); ++i)
        for (int j = 0; j < static_cast<int>(b.segments.size()); ++j)
            if (segments_conforming(a.segments[i], b.segments[j], tol)) out.emplace_back(i, j);
    return out;
}

Potential Potential::from_functions(std::function<double(double, double)> value,
                                    std::function<std::array<double, 2>(double, double)> grad,
                                    std::string descriptor) {
    Potential p;
    p.value_ = std::move(value);
    p.grad_ = std::move(grad);
    p.descriptor_ = std::move(descriptor);
    return p;
}

Potential Potential::constant(double c) {
    if (c < 0) throw ConfigError("Potential::constant: must be non-negative");
    return from_functions([c](double, double) { return c; },
                          [](double, double) { return std::array<double, 2>{0.0, 0.0}; },
                          "constant:" + std::to_string(c));
}

Potential Potential::affine(double ax, double ay, double c) {
    return from_functions([=](double x, double y) { return c + ax * x + ay * y; },
                          [=](double, double) { return std::array<double, 2>{ax, ay}; },
                          "affine:" + std::to_string(ax) + "," + std::to_string(ay) + "," +
                              std::to_string(c));
}

Potential Potential::gaussian_bump(double amp, double x0, double y0, double sigma, double base) {
    if (sigma <= 0) throw ConfigError("Potential::gaussian_bump: sigma must be positive");
    return from_functions(
        [=](double x, double y) {
            const double dx = x - x0, dy = y - y0;
            return base + amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        },
        [=](double x, double y) {
            const double dx = x - x0, dy = y - y0;
            const double e = amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            const double s2 = sigma * sigma;
            return std::array<double, 2>{-dx / s2 * e, -dy / s2 * e};
        },
        "gaussian");
}

namespace {

// Catmull-Rom kernel on one cell: value and d/dt at fractional position t for
// the four surrounding samples p0..p3.
inline double cr_value(double p0, double p1, double p2, double p3, double t) {
    return 0.5 * (2.0 * p1 + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
}
inline double cr_deriv(double p0, double p1, double p2, double p3, double t) {
    return 0.5 * ((-p0 + p2) + 2.0 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t +
                  3.0 * (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t);
}

struct TableInterp {
    MatR v;  // v(iy, ix)
    Rect dom;
    double hx, hy;

    void locate(double u, double lo, double h, int n, int& i1, double& t) const {
        double s = (u - lo) / h;
        i1 = static_cast<int>(std::floor(s));
        if (i1 < 0) i1 = 0;
        if (i1 > n - 2) i1 = n - 2;
        t = s - i1;
    }
    double at(int iy, int ix) const {
        iy = std::min(std::max(iy, 0), static_cast<int>(v.rows()) - 1);
        ix = std::min(std::max(ix, 0), static_cast<int>(v.cols()) - 1);
        return v(iy, ix);
    }
    double value(double x, double y) const {
        int ix, iy;
        double tx, ty;
        locate(x, dom.x0, hx, static_cast<int>(v.cols()), ix, tx);
        locate(y, dom.y0, hy, static_cast<int>(v.rows()), iy, ty);
        double col[4];
        for (int r = -1; r <= 2; ++r)
            col[r + 1] = cr_value(at(iy + r, ix - 1), at(iy + r, ix), at(iy + r, ix + 1),
                                  at(iy + r, ix + 2), tx);
        return cr_value(col[0], col[1], col[2], col[3], ty);
    }
    std::array<double, 2> grad(double x, double y) const {
        int ix, iy;
        double tx, ty;
        locate(x, dom.x0, hx, static_cast<int>(v.cols()), ix, tx);
        locate(y, dom.y0, hy, static_cast<int>(v.rows()), iy, ty);
        double colv[4], cold[4];
        for (int r = -1; r <= 2; ++r) {
            colv[r + 1] = cr_value(at(iy + r, ix - 1), at(iy + r, ix), at(iy + r, ix + 1),
                                   at(iy + r, ix + 2), tx);
            cold[r + 1] = cr_deriv(at(iy + r, ix - 1), at(iy + r, ix), at(iy + r, ix + 1),
                                   at(iy + r, ix + 2), tx);
        }
        const double dx = cr_value(cold[0], cold[1], cold[2], cold[3], ty) / hx;
        const double dy = cr_deriv(colv[0], colv[1], colv[2], colv[3], ty) / hy;
        return {dx, dy};
    }
};

}  // namespace

Potential Potential::table(const MatR& values, const Rect& dom) {
    dom.validate();
    if (values.rows() < 2 || values.cols() < 2)
        throw ConfigError("Potential::table: need at least a 2x2 table");
    auto interp = std::make_shared<TableInterp>();
    interp->v = values;
    interp->dom = dom;
    interp->hx = dom.width() / (values.cols() - 1);
    interp->hy = dom.height() / (values.rows() - 1);
    return from_functions([interp](double x, double y) { return interp->value(x, y); },
                          [interp](double x, double y) { return interp->grad(x, y); }, "table");
}

Potential Potential::parse(const std::string& descriptor) {
    const auto colon = descriptor.find(':');
    const std::string head = descriptor.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : descriptor.substr(colon + 1);
    auto nums = [&rest]() {
        std::vector<double> v;
        std::stringstream ss(rest);
        std::string tok;
        while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
        return v;
    };
    if (head == "constant") {
        auto v = nums();
        if (v.size() != 1) throw ConfigError("potential constant: expected 1 parameter");
        return constant(v[0]);
    }
    if (head == "affine") {
        auto v = nums();
        if (v.size() != 3) throw ConfigError("potential affine: expected ax,ay,c");
        return affine(v[0], v[1], v[2]);
    }
    if (head == "gaussian") {
        auto v = nums();
        if (v.size() != 5) throw ConfigError("potential gaussian: expected amp,x0,y0,sigma,base");
        return gaussian_bump(v[0], v[1], v[2], v[3], v[4]);
    }
    if (head == "table") {
        std::ifstream in(rest);
        if (!in) throw ConfigError("potential table: cannot open " + rest);
        int nx, ny;
        Rect dom{};
        in >> nx >> ny >> dom.x0 >> dom.x1 >> dom.y0 >> dom.y1;
        if (!in || nx < 2 || ny < 2) throw ConfigError("potential table: bad header in " + rest);
        MatR vals(ny, nx);
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                if (!(in >> vals(iy, ix))) throw ConfigError("potential table: truncated data");
        return table(vals, dom);
    }
    throw ConfigError("unknown potential descriptor: " + descriptor);
}

Potential reflect_potential(const Potential& V) {
    Potential base = V;
    return Potential::from_functions(
        [base](double x, double y) { return base(2.0 - x, y); },
        [base](double x, double y) {
            auto g = base.gradient(2.0 - x, y);
            return std::array<double, 2>{-g[0], g[1]};
        },
        "reflect(" + V.descriptor() + ")");
}

double check_nontrapping(const Potential& V, const Rect& rect, std::array<double, 2> vertex,
                         int samples) {
    rect.validate();
    if (samples < 2) throw ConfigError("check_nontrapping: need samples >= 2 per axis");
    // The vertex must lie on the boundary of rect: a corner of the rectangle
    // being checked, or a corner of a sub-rectangle when one call covers both
    // halves of a split domain (e.g. (1,0) on [0,2]x[0,1]).
    const double tol = 1e-12 * (1.0 + std::abs(rect.x1) + std::abs(rect.y1));
    const bool on_x = std::abs(vertex[0] - rect.x0) <= tol || std::abs(vertex[0] - rect.x1) <= tol;
    const bool on_y = std::abs(vertex[1] - rect.y0) <= tol || std::abs(vertex[1] - rect.y1) <= tol;
    const bool inside_x = vertex[0] >= rect.x0 - tol && vertex[0] <= rect.x1 + tol;
    const bool inside_y = vertex[1] >= rect.y0 - tol && vertex[1] <= rect.y1 + tol;
    if (!((on_x && inside_y) || (on_y && inside_x)))
        throw ConfigError("check_nontrapping: vertex is not a corner (boundary point) of rect");
    double c = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double x = rect.x0 + rect.width() * i / (samples - 1);
        for (int j = 0; j < samples; ++j) {
            const double y = rect.y0 + rect.height() * j / (samples - 1);
            const auto g = V.gradient(x, y);
            const double val = 2.0 * V(x, y) + (x - vertex[0]) * g[0] + (y - vertex[1]) * g[1];
            c = std::min(c, val);
        }
    }
    return c;
}

double potential_difference_sup(const Potential& V1, const Potential& V2, const Rect& rect,
                                int samples) {
    double m = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double x = rect.x0 + rect.width() * i / (samples - 1);
        for (int j = 0; j < samples; ++j) {
            const double y = rect.y0 + rect.height() * j / (samples - 1);
            m = std::max(m, std::abs(V1(x, y) - V2(x, y)));
        }
    }
    return m;
}

}  // namespace itik

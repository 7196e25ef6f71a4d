#include "itik/leaf.hpp"

#include <cmath>

namespace itik {

LeafBox::LeafBox(Rect rect, Potential V, double k, int n_int, int n_b)
    : LeafBox(rect, std::move(V), k, n_int, n_int, n_b) {}

LeafBox::LeafBox(Rect rect, Potential V, double k, int n_int_x, int n_int_y, int n_b)
    : rect_(rect), V_(std::move(V)), k_(k), nx_(n_int_x), ny_(n_int_y), nb_(n_b) {
    rect_.validate();
    if (k_ <= 0.0) throw ConfigError("LeafBox: k must be positive");
    if (n_b < 1 || nx_ < 2 || ny_ < 2) throw ConfigError("LeafBox: need n_int >= 2 and n_b >= 1");
    if (n_b > std::min(nx_, ny_))
        throw ConfigError("LeafBox: boundary degree n_b must not exceed interior degree n_int");

    xs_ = 0.5 * (rect_.x0 + rect_.x1) +
          0.5 * rect_.width() * cheb_nodes(nx_, NodeKind::Lobatto).nodes.array();
    ys_ = 0.5 * (rect_.y0 + rect_.y1) +
          0.5 * rect_.height() * cheb_nodes(ny_, NodeKind::Lobatto).nodes.array();
    dx_ = diff_matrix_nodes(xs_);
    dy_ = diff_matrix_nodes(ys_);
    layout_ = make_rect_layout(rect_, nb_);

    const int N = grid_size();
    const int M = layout_.size();
    const int m = nbp();

    // Incoming data map: per-side Gauss values interpolated to the side's
    // Lobatto impedance rows. Corner rows take the horizontal side's data.
    p_in_ = MatR::Zero(N, M);
    const MatR px = interp_matrix_nodes(layout_.segments[0].nodes, xs_);  // South/North param x
    const MatR py = interp_matrix_nodes(layout_.segments[1].nodes, ys_);  // East/West param y
    for (int i = 0; i <= nx_; ++i)
        for (int c = 0; c < m; ++c) {
            p_in_(flat(i, ny_), 0 * m + c) += px(i, c);  // South: j = ny is y = y0
            p_in_(flat(i, 0), 2 * m + c) += px(i, c);    // North: j = 0 is y = y1
        }
    for (int j = 1; j < ny_; ++j)
        for (int c = 0; c < m; ++c) {
            p_in_(flat(0, j), 1 * m + c) += py(j, c);    // East: i = 0 is x = x1
            p_in_(flat(nx_, j), 3 * m + c) += py(j, c);  // West
        }

    // Trace extraction at Gauss nodes.
    e_u_ = MatR::Zero(M, N);
    e_dn_ = MatR::Zero(M, N);
    const MatR qx = interp_matrix_nodes(xs_, layout_.segments[0].nodes);
    const MatR qy = interp_matrix_nodes(ys_, layout_.segments[1].nodes);
    for (int c = 0; c < m; ++c) {
        for (int i = 0; i <= nx_; ++i) {
            e_u_(0 * m + c, flat(i, ny_)) += qx(c, i);
            e_u_(2 * m + c, flat(i, 0)) += qx(c, i);
            for (int jp = 0; jp <= ny_; ++jp) {
                e_dn_(0 * m + c, flat(i, jp)) += qx(c, i) * (-dy_(ny_, jp));
                e_dn_(2 * m + c, flat(i, jp)) += qx(c, i) * (+dy_(0, jp));
            }
        }
        for (int j = 0; j <= ny_; ++j) {
            e_u_(1 * m + c, flat(0, j)) += qy(c, j);
            e_u_(3 * m + c, flat(nx_, j)) += qy(c, j);
            for (int ip = 0; ip <= nx_; ++ip) {
                e_dn_(1 * m + c, flat(ip, j)) += qy(c, j) * (+dx_(0, ip));
                e_dn_(3 * m + c, flat(ip, j)) += qy(c, j) * (-dx_(nx_, ip));
            }
        }
    }

    Mat A = assemble_system();
    lu_.compute(A);
    const double amax = A.cwiseAbs().maxCoeff();
    const double umin = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(umin > 1e-14 * amax))
        throw SingularSystem("LeafBox: factorization singular to tolerance (pivot ratio " +
                             std::to_string(umin / amax) + "); under-resolved or invalid inputs");

    // Column j of the ItI matrix: outgoing trace for the j-th incoming basis vector.
    Mat U = lu_.solve(p_in_.cast<cplx>().eval());
    r_full_ = (e_dn_.cast<cplx>() - I * k_ * e_u_.cast<cplx>()) * U;
}

Mat LeafBox::assemble_system() const {
    const int N = grid_size();
    Mat A = Mat::Zero(N, N);
    const MatR d2x = dx_ * dx_;
    const MatR d2y = dy_ * dy_;
    for (int i = 0; i <= nx_; ++i) {
        for (int j = 0; j <= ny_; ++j) {
            const int r = flat(i, j);
            if (!on_boundary(i, j)) {
                for (int ip = 0; ip <= nx_; ++ip) A(r, flat(ip, j)) += d2x(i, ip);
                for (int jp = 0; jp <= ny_; ++jp) A(r, flat(i, jp)) += d2y(j, jp);
                A(r, r) += k_ * k_ * V_(xs_[i], ys_[j]);
            } else if (j == 0 || j == ny_) {
                // horizontal sides own their corners; outward normal is -y at South
                const double sgn = (j == 0) ? 1.0 : -1.0;
                for (int jp = 0; jp <= ny_; ++jp) A(r, flat(i, jp)) += sgn * dy_(j, jp);
                A(r, r) += I * k_;
            } else {
                const double sgn = (i == 0) ? 1.0 : -1.0;
                for (int ip = 0; ip <= nx_; ++ip) A(r, flat(ip, j)) += sgn * dx_(i, ip);
                A(r, r) += I * k_;
            }
        }
    }
    return A;
}

Vec LeafBox::build_rhs(const BoundaryTrace& g, const std::function<cplx(double, double)>* G) const {
    if (g.size() != layout_.size()) throw ConfigError("build_rhs: boundary data size mismatch");
    Vec rhs = p_in_.cast<cplx>() * g;
    if (G) {
        for (int i = 1; i < nx_; ++i)
            for (int j = 1; j < ny_; ++j) rhs[flat(i, j)] += (*G)(xs_[i], ys_[j]);
    }
    return rhs;
}

FieldSolution LeafBox::solve(const BoundaryTrace& g, const std::function<cplx(double, double)>* G) const {
    FieldSolution out;
    const Vec x = lu_.solve(build_rhs(g, G));
    out.grid_values = Eigen::Map<const Mat>(x.data(), ny_ + 1, nx_ + 1).transpose();
    out.u = e_u_.cast<cplx>() * x;
    out.dnu = e_dn_.cast<cplx>() * x;
    out.dtau = Vec(layout_.size());
    int off = 0;
    for (const auto& seg : layout_.segments) {
        const MatR dt = diff_matrix_nodes(seg.nodes);
        out.dtau.segment(off, seg.count()) = dt.cast<cplx>() * out.u.segment(off, seg.count());
        off += seg.count();
    }
    return out;
}

Eigen::ArrayXi LeafBox::side_indices(Side s) const {
    const int m = nbp();
    Eigen::ArrayXi idx(m);
    for (int c = 0; c < m; ++c) idx[c] = static_cast<int>(s) * m + c;
    return idx;
}

std::pair<Mat, Mat> LeafBox::iti_partial(Side a) const {
    const int m = nbp();
    const int ai = static_cast<int>(a);
    Mat R = r_full_.block(ai * m, ai * m, m, m);
    Mat Q(m, 3 * m);
    int col = 0;
    for (int s = 0; s < 4; ++s) {
        if (s == ai) continue;
        Q.middleCols(col, m) = r_full_.block(ai * m, s * m, m, m);
        col += m;
    }
    return {std::move(R), std::move(Q)};
}

Mat LeafBox::outgoing_rows(int segment) const {
    const int off = layout_.offset(segment);
    const int m = layout_.segments[segment].count();
    return e_dn_.middleRows(off, m).cast<cplx>() - I * k_ * e_u_.middleRows(off, m).cast<cplx>();
}

LeafBox::SideTrace LeafBox::side_trace(const FieldSolution& f, Side s, const VecR& params) const {
    // Values and normal derivative on the side's Lobatto line, then interpolate.
    Vec line_u, line_dn, line_dt;
    if (is_horizontal(s)) {
        const int j = (s == Side::South) ? ny_ : 0;
        const double sgn = (s == Side::South) ? -1.0 : 1.0;
        line_u = f.grid_values.col(j);
        line_dn = sgn * (f.grid_values * dy_.row(j).transpose().cast<cplx>());
        line_dt = dx_.cast<cplx>() * line_u;
    } else {
        const int i = (s == Side::East) ? 0 : nx_;
        const double sgn = (s == Side::East) ? 1.0 : -1.0;
        line_u = f.grid_values.row(i).transpose();
        line_dn = sgn * (f.grid_values.transpose() * dx_.row(i).transpose().cast<cplx>());
        line_dt = dy_.cast<cplx>() * line_u;
    }
    const VecR& par = is_horizontal(s) ? xs_ : ys_;
    const Mat P = interp_matrix_nodes(par, params).cast<cplx>();
    return {P * line_u, P * line_dn, P * line_dt};
}

}  // namespace itik

#include "itik/merge.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace itik {

ItINode from_leaf(const LeafBox& leaf) { return ItINode{leaf.layout(), leaf.iti_full(), leaf.k()}; }

std::pair<Mat, MergeDiag> build_W(const Mat& R1, const Mat& R2, double rel_tol) {
    if (R1.rows() != R1.cols() || R2.rows() != R2.cols() || R1.rows() != R2.rows())
        throw ConfigError("build_W: R1, R2 must be square and of equal size");
    const Mat M = Mat::Identity(R1.rows(), R1.cols()) - R1 * R2;
    Eigen::JacobiSVD<Mat> svd(M);
    MergeDiag d;
    d.sigma_max = svd.singularValues()(0);
    d.sigma_min = svd.singularValues()(svd.singularValues().size() - 1);
    d.cond = d.sigma_max / d.sigma_min;
    if (!(d.sigma_min > rel_tol * d.sigma_max))
        throw MergeSingular("merge singular: sigma_min(I - R1 R2) = " +
                                std::to_string(d.sigma_min),
                            d.sigma_min);
    Mat W = M.partialPivLu().solve(Mat::Identity(M.rows(), M.cols()));
    return {std::move(W), d};
}

namespace {

struct SegIdx {
    std::vector<int> a_seg, b_seg;  // matched segment indices, canonical order
};

// Indices (into the layout's trace vector) of a list of segments.
Eigen::ArrayXi gather(const BoundaryLayout& L, const std::vector<int>& segs) {
    int total = 0;
    for (int s : segs) total += L.segments[s].count();
    Eigen::ArrayXi idx(total);
    int p = 0;
    for (int s : segs) {
        const int off = L.offset(s);
        for (int c = 0; c < L.segments[s].count(); ++c) idx[p++] = off + c;
    }
    return idx;
}

Mat take(const Mat& M, const Eigen::ArrayXi& rows, const Eigen::ArrayXi& cols) {
    Mat out(rows.size(), cols.size());
    for (int i = 0; i < rows.size(); ++i)
        for (int j = 0; j < cols.size(); ++j) out(i, j) = M(rows[i], cols[j]);
    return out;
}

std::vector<int> complement(int n, const std::vector<int>& picked) {
    std::vector<int> out;
    for (int i = 0; i < n; ++i)
        if (std::find(picked.begin(), picked.end(), i) == picked.end()) out.push_back(i);
    return out;
}

}  // namespace

MergeResult merge_nodes(const ItINode& a, const ItINode& b, double rel_tol) {
    if (std::abs(a.k - b.k) > 1e-12 * (1.0 + std::abs(a.k)))
        throw ConfigError("merge_nodes: children have different wavenumbers");
    auto matches = match_segments(a.layout, b.layout);
    if (matches.empty()) throw ConfigError("merge_nodes: children share no boundary segment");
    // Canonical order of the shared segments: by orientation, fixed coordinate, start.
    std::sort(matches.begin(), matches.end(), [&](const auto& p, const auto& q) {
        const Segment& sp = a.layout.segments[p.first];
        const Segment& sq = a.layout.segments[q.first];
        return std::tuple(is_horizontal(sp.side), sp.fixed, sp.lo) <
               std::tuple(is_horizontal(sq.side), sq.fixed, sq.lo);
    });
    SegIdx si;
    for (auto& [ia, ib] : matches) {
        si.a_seg.push_back(ia);
        si.b_seg.push_back(ib);
        const VecR& na = a.layout.segments[ia].nodes;
        const VecR& nb = b.layout.segments[ib].nodes;
        if ((na - nb).cwiseAbs().maxCoeff() > 1e-12)
            throw ConfigError("merge_nodes: shared segment nodes do not coincide");
    }
    const auto ext_a = complement(static_cast<int>(a.layout.segments.size()), si.a_seg);
    const auto ext_b = complement(static_cast<int>(b.layout.segments.size()), si.b_seg);
    if (ext_a.empty() && ext_b.empty())
        throw ConfigError("merge_nodes: children have no exterior boundary");

    const auto ia = gather(a.layout, si.a_seg);
    const auto ib = gather(b.layout, si.b_seg);
    const auto ea = gather(a.layout, ext_a);
    const auto eb = gather(b.layout, ext_b);

    const Mat R1 = take(a.iti, ia, ia);
    const Mat Q1 = take(a.iti, ia, ea);
    const Mat R2 = take(b.iti, ib, ib);
    const Mat Q2 = take(b.iti, ib, eb);

    MergeResult res;
    auto [W, diag] = build_W(R1, R2, rel_tol);
    res.W = std::move(W);
    res.diag = diag;

    const int nh1 = static_cast<int>(ea.size());
    const int nh2 = static_cast<int>(eb.size());
    const int na = static_cast<int>(ia.size());
    Mat F2(na, nh1 + nh2);
    F2.leftCols(nh1) = -res.W * Q1;
    F2.rightCols(nh2) = res.W * (R1 * Q2);
    Mat F1 = -R2 * F2;
    F1.rightCols(nh2) -= Q2;
    res.F1 = F1;
    res.F2 = F2;

    // Child incoming data as a function of h = (h_a; h_b).
    Mat M1 = Mat::Zero(a.layout.size(), nh1 + nh2);
    for (int r = 0; r < nh1; ++r) M1(ea[r], r) = 1.0;
    for (int r = 0; r < na; ++r) M1.row(ia[r]) = F1.row(r);
    Mat M2 = Mat::Zero(b.layout.size(), nh1 + nh2);
    for (int r = 0; r < nh2; ++r) M2(eb[r], nh1 + r) = 1.0;
    for (int r = 0; r < na; ++r) M2.row(ib[r]) = F2.row(r);

    const Mat O1 = a.iti * M1;
    const Mat O2 = b.iti * M2;
    res.parent.k = a.k;
    res.parent.iti.resize(nh1 + nh2, nh1 + nh2);
    for (int r = 0; r < nh1; ++r) res.parent.iti.row(r) = O1.row(ea[r]);
    for (int r = 0; r < nh2; ++r) res.parent.iti.row(nh1 + r) = O2.row(eb[r]);
    for (int s : ext_a) res.parent.layout.segments.push_back(a.layout.segments[s]);
    for (int s : ext_b) res.parent.layout.segments.push_back(b.layout.segments[s]);
    for (int s : si.a_seg) res.interface.segments.push_back(a.layout.segments[s]);
    return res;
}

namespace {

std::string bbox_label(const BoundaryLayout& L) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : L.segments) {
        if (is_horizontal(s.side)) {
            x0 = std::min(x0, s.lo);
            x1 = std::max(x1, s.hi);
            y0 = std::min(y0, s.fixed);
            y1 = std::max(y1, s.fixed);
        } else {
            y0 = std::min(y0, s.lo);
            y1 = std::max(y1, s.hi);
            x0 = std::min(x0, s.fixed);
            x1 = std::max(x1, s.fixed);
        }
    }
    std::ostringstream os;
    os << "[" << x0 << "," << x1 << "]x[" << y0 << "," << y1 << "]";
    return os.str();
}

ItINode reduce_line(std::vector<ItINode> line, MergePlan plan, double rel_tol,
                    std::vector<TreeDiag>& diags) {
    if (plan == MergePlan::Sequential) {
        ItINode acc = std::move(line.back());
        for (int i = static_cast<int>(line.size()) - 2; i >= 0; --i) {
            MergeResult r = merge_nodes(line[i], acc, rel_tol);
            diags.push_back({bbox_label(r.parent.layout), r.diag});
            acc = std::move(r.parent);
        }
        return acc;
    }
    while (line.size() > 1) {
        std::vector<ItINode> next;
        for (std::size_t i = 0; i + 1 < line.size(); i += 2) {
            MergeResult r = merge_nodes(line[i], line[i + 1], rel_tol);
            diags.push_back({bbox_label(r.parent.layout), r.diag});
            next.push_back(std::move(r.parent));
        }
        if (line.size() % 2 == 1) next.push_back(std::move(line.back()));
        line = std::move(next);
    }
    return std::move(line.front());
}

}  // namespace

std::pair<ItINode, std::vector<TreeDiag>> merge_tree(const std::vector<std::vector<ItINode>>& tiles,
                                                     MergePlan plan, double rel_tol) {
    if (tiles.empty() || tiles.front().empty()) throw ConfigError("merge_tree: empty tiling");
    const std::size_t ny = tiles.front().size();
    for (const auto& col : tiles)
        if (col.size() != ny) throw ConfigError("merge_tree: ragged tiling");
    std::vector<TreeDiag> diags;
    std::vector<ItINode> rows;
    for (std::size_t iy = 0; iy < ny; ++iy) {
        std::vector<ItINode> line;
        for (const auto& col : tiles) line.push_back(col[iy]);
        rows.push_back(reduce_line(std::move(line), plan, rel_tol, diags));
    }
    ItINode top = reduce_line(std::move(rows), plan, rel_tol, diags);
    return {std::move(top), std::move(diags)};
}

ItINode direct_coupled_iti(const std::vector<const LeafBox*>& leaves) {
    if (leaves.empty()) throw ConfigError("direct_coupled_iti: no leaves");
    const double k = leaves.front()->k();
    std::vector<int> base(leaves.size());
    int nfield = 0;
    for (std::size_t p = 0; p < leaves.size(); ++p) {
        base[p] = nfield;
        nfield += leaves[p]->grid_size();
        if (std::abs(leaves[p]->k() - k) > 1e-12 * (1.0 + k))
            throw ConfigError("direct_coupled_iti: wavenumber mismatch");
    }

    struct Iface {
        int p, sp, q, sq, off;  // leaves p/q, their segment indices, trace offset
    };
    std::vector<Iface> ifaces;
    std::vector<std::vector<bool>> shared(leaves.size());
    for (std::size_t p = 0; p < leaves.size(); ++p)
        shared[p].assign(leaves[p]->layout().segments.size(), false);
    int ntrace = 0;
    for (std::size_t p = 0; p < leaves.size(); ++p)
        for (std::size_t q = p + 1; q < leaves.size(); ++q)
            for (auto& [sp, sq] : match_segments(leaves[p]->layout(), leaves[q]->layout())) {
                const int m = leaves[p]->layout().segments[sp].count();
                ifaces.push_back({static_cast<int>(p), sp, static_cast<int>(q), sq,
                                  nfield + ntrace});
                shared[p][sp] = true;
                shared[q][sq] = true;
                ntrace += 2 * m;  // f_{p,sp} then f_{q,sq}
            }

    const int n = nfield + ntrace;
    Mat A = Mat::Zero(n, n);
    for (std::size_t p = 0; p < leaves.size(); ++p)
        A.block(base[p], base[p], leaves[p]->grid_size(), leaves[p]->grid_size()) =
            leaves[p]->assemble_system();

    for (const auto& f : ifaces) {
        const LeafBox& lp = *leaves[f.p];
        const LeafBox& lq = *leaves[f.q];
        const int m = lp.layout().segments[f.sp].count();
        const int fp = f.off, fq = f.off + m;
        // Interface data are unknowns: move the data injection to the left side.
        A.block(base[f.p], fp, lp.grid_size(), m) -=
            lp.data_in().middleCols(lp.layout().offset(f.sp), m).cast<cplx>();
        A.block(base[f.q], fq, lq.grid_size(), m) -=
            lq.data_in().middleCols(lq.layout().offset(f.sq), m).cast<cplx>();
        // f_p = -(outgoing of q), f_q = -(outgoing of p).
        A.block(fp, fp, m, m) = Mat::Identity(m, m);
        A.block(fp, base[f.q], m, lq.grid_size()) = lq.outgoing_rows(f.sq);
        A.block(fq, fq, m, m) = Mat::Identity(m, m);
        A.block(fq, base[f.p], m, lp.grid_size()) = lp.outgoing_rows(f.sp);
    }

    ItINode out;
    out.k = k;
    int mext = 0;
    for (std::size_t p = 0; p < leaves.size(); ++p)
        for (std::size_t s = 0; s < shared[p].size(); ++s)
            if (!shared[p][s]) {
                out.layout.segments.push_back(leaves[p]->layout().segments[s]);
                mext += leaves[p]->layout().segments[s].count();
            }

    Mat rhs = Mat::Zero(n, mext);
    int col = 0;
    for (std::size_t p = 0; p < leaves.size(); ++p)
        for (std::size_t s = 0; s < shared[p].size(); ++s)
            if (!shared[p][s]) {
                const int m = leaves[p]->layout().segments[s].count();
                rhs.block(base[p], col, leaves[p]->grid_size(), m) =
                    leaves[p]->data_in().middleCols(leaves[p]->layout().offset(s), m).cast<cplx>();
                col += m;
            }

    Eigen::PartialPivLU<Mat> lu(A);
    const double amax = A.cwiseAbs().maxCoeff();
    const double umin = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(umin > 1e-14 * amax))
        throw SingularSystem("direct_coupled_iti: coupled system singular to tolerance");
    const Mat U = lu.solve(rhs);

    out.iti.resize(mext, mext);
    int row = 0;
    for (std::size_t p = 0; p < leaves.size(); ++p)
        for (std::size_t s = 0; s < shared[p].size(); ++s)
            if (!shared[p][s]) {
                const int m = leaves[p]->layout().segments[s].count();
                out.iti.middleRows(row, m) =
                    leaves[p]->outgoing_rows(static_cast<int>(s)) *
                    U.middleRows(base[p], leaves[p]->grid_size());
                row += m;
            }
    return out;
}

Mat iti_to_dtn(const Mat& R, double k, double rel_tol) {
    if (R.rows() != R.cols()) throw ConfigError("iti_to_dtn: R must be square");
    const Mat M = Mat::Identity(R.rows(), R.cols()) - R;
    Eigen::JacobiSVD<Mat> svd(M);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (!(smin > rel_tol * smax))
        throw DtnNearResonant("DtN near-resonant: sigma_min(I - R) = " + std::to_string(smin),
                              smin);
    const Mat Z = M.partialPivLu().solve(Mat::Identity(R.rows(), R.cols()));
    return I * k * (Mat::Identity(R.rows(), R.cols()) + R) * Z;
}

std::vector<int> layout_permutation(const BoundaryLayout& from, const BoundaryLayout& to) {
    if (from.segments.size() != to.segments.size())
        throw ConfigError("layout_permutation: segment counts differ");
    std::vector<int> perm(to.segments.size(), -1);
    std::vector<bool> used(from.segments.size(), false);
    for (std::size_t i = 0; i < to.segments.size(); ++i) {
        for (std::size_t j = 0; j < from.segments.size(); ++j) {
            if (!used[j] && segments_conforming(to.segments[i], from.segments[j])) {
                perm[i] = static_cast<int>(j);
                used[j] = true;
                break;
            }
        }
        if (perm[i] < 0) throw ConfigError("layout_permutation: layouts do not cover equal segments");
    }
    return perm;
}

Mat reorder_operator(const Mat& op, const BoundaryLayout& from, const BoundaryLayout& to) {
    const auto perm = layout_permutation(from, to);
    Eigen::ArrayXi idx(to.size());
    int p = 0;
    for (std::size_t i = 0; i < to.segments.size(); ++i) {
        const int off = from.offset(perm[i]);
        for (int c = 0; c < to.segments[i].count(); ++c) idx[p++] = off + c;
    }
    Mat out(to.size(), to.size());
    for (int r = 0; r < to.size(); ++r)
        for (int c = 0; c < to.size(); ++c) out(r, c) = op(idx[r], idx[c]);
    return out;
}

}  // namespace itik

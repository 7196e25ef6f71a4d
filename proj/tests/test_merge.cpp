#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "itik/harness.hpp"
#include "itik/merge.hpp"
#include "itik/norms.hpp"
#include "itik/oracle.hpp"
#include "itik/serialize.hpp"

using namespace itik;

TEST_CASE("build_W basics") {
    const Mat Z = Mat::Zero(5, 5);
    auto [W, d] = build_W(Z, Z);
    CHECK((W - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(d.sigma_min == doctest::Approx(1.0));

    Mat r1(1, 1), r2(1, 1);
    r1(0, 0) = 0.5;
    r2(0, 0) = 0.5;
    auto [Ws, ds] = build_W(r1, r2);
    CHECK(Ws(0, 0).real() == doctest::Approx(4.0 / 3).epsilon(1e-14));

    const Mat Id = Mat::Identity(4, 4);
    CHECK_THROWS_AS(build_W(Id, Id), MergeSingular);
}

TEST_CASE("W solve residual on random data") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd;
    const int m = 17;
    Mat R1(m, m), R2(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            R1(i, j) = cplx(nd(rng), nd(rng)) * 0.15;
            R2(i, j) = cplx(nd(rng), nd(rng)) * 0.15;
        }
    auto [W, d] = build_W(R1, R2);
    const Mat M = Mat::Identity(m, m) - R1 * R2;
    for (int t = 0; t < 10; ++t) {
        Vec g(m);
        for (auto& c : g.reshaped()) c = cplx(nd(rng), nd(rng));
        CHECK((W * (M * g) - g).norm() <= 1e-10 * g.norm());
    }
}

TEST_CASE("merged parent equals the direct coupled solve") {
    for (const auto& [k, pot] : std::vector<std::pair<double, std::string>>{
             {1.0, "constant:1.0"}, {5.0, "constant:1.0"}, {5.0, "affine:0.05,0,1"}}) {
        const Potential V = Potential::parse(pot);
        const LeafBox l1(Rect{0, 1, 0, 1}, V, k, 20, 14);
        const LeafBox l2(Rect{1, 2, 0, 1}, V, k, 20, 14);
        const MergeResult merged = merge_nodes(from_leaf(l1), from_leaf(l2));
        const ItINode direct = direct_coupled_iti({&l1, &l2});
        const Mat Rd = reorder_operator(direct.iti, direct.layout, merged.parent.layout);
        const GramMatrix G = gram(merged.parent.layout, NormKind::L2);
        const double rel = op_norm(merged.parent.iti - Rd, G, G) / op_norm(Rd, G, G);
        CHECK(rel < 1e-9);
        CHECK(merged.diag.sigma_min > 0.0);
        CHECK(merged.parent.layout.size() == 6 * l1.nbp());
    }
}

TEST_CASE("interface data glue the child fields continuously") {
    const double k = 5.0;
    const Potential V = Potential::constant(1.0);
    const LeafBox l1(Rect{0, 1, 0, 1}, V, k, 24, 16);
    const LeafBox l2(Rect{1, 2, 0, 1}, V, k, 24, 16);
    const MergeResult merged = merge_nodes(from_leaf(l1), from_leaf(l2));

    // Exterior data of an exact smooth solution on the whole rectangle (plane
    // wave), so the glued field is globally smooth and the re-inserted
    // interface data can be checked at spectral accuracy.
    const double cx = 0.6, cy = 0.8;
    auto trace_data = [&](const Segment& seg) {
        Vec v(seg.count());
        for (int j = 0; j < seg.count(); ++j) {
            const double x = is_horizontal(seg.side) ? seg.nodes[j] : seg.fixed;
            const double y = is_horizontal(seg.side) ? seg.fixed : seg.nodes[j];
            const auto nrm = side_normal(seg.side);
            const cplx u = std::exp(I * k * (cx * x + cy * y));
            const cplx dn = I * k * (cx * nrm[0] + cy * nrm[1]) * u;
            v[j] = dn + I * k * u;
        }
        return v;
    };
    Vec h(merged.parent.layout.size());
    int off = 0;
    for (const auto& seg : merged.parent.layout.segments) {
        h.segment(off, seg.count()) = trace_data(seg);
        off += seg.count();
    }
    const Vec f1 = merged.F1 * h;
    const Vec f2 = merged.F2 * h;

    // Re-insert the interface data into each child's solve.
    Vec g1 = Vec::Zero(l1.layout().size());
    Vec g2 = Vec::Zero(l2.layout().size());
    // Parent layout: l1's S, N, W then l2's S, E, N.
    g1.segment(l1.layout().offset(0), l1.nbp()) = h.segment(0 * l1.nbp(), l1.nbp());
    g1.segment(l1.layout().offset(2), l1.nbp()) = h.segment(1 * l1.nbp(), l1.nbp());
    g1.segment(l1.layout().offset(3), l1.nbp()) = h.segment(2 * l1.nbp(), l1.nbp());
    g1.segment(l1.layout().offset(1), l1.nbp()) = f1;
    g2.segment(l2.layout().offset(0), l2.nbp()) = h.segment(3 * l2.nbp(), l2.nbp());
    g2.segment(l2.layout().offset(1), l2.nbp()) = h.segment(4 * l2.nbp(), l2.nbp());
    g2.segment(l2.layout().offset(2), l2.nbp()) = h.segment(5 * l2.nbp(), l2.nbp());
    g2.segment(l2.layout().offset(3), l2.nbp()) = f2;

    const FieldSolution s1 = l1.solve(g1);
    const FieldSolution s2 = l2.solve(g2);
    const VecR& ay = l1.layout().segments[1].nodes;
    const auto t1 = l1.side_trace(s1, Side::East, ay);
    const auto t2 = l2.side_trace(s2, Side::West, ay);
    const double scale = t1.u.cwiseAbs().maxCoeff();
    CHECK((t1.u - t2.u).cwiseAbs().maxCoeff() / scale < 1e-6);
    // Opposite outward normals: d_x u agreeing means dnu_1 = -dnu_2.
    CHECK((t1.dnu + t2.dnu).cwiseAbs().maxCoeff() / t1.dnu.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("reflection symmetry of the merged parent") {
    // V symmetric under x -> 2 - x; the parent operator commutes with the
    // pullback by the reflection (segment swap plus node reversal on the
    // horizontal sides).
    const double k = 3.0;
    const LeafBox l1(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 18, 12);
    const LeafBox l2(Rect{1, 2, 0, 1}, Potential::constant(1.0), k, 18, 12);
    const MergeResult merged = merge_nodes(from_leaf(l1), from_leaf(l2));
    const auto& L = merged.parent.layout;
    const int m = l1.nbp();
    // Parent segments: [L.S, L.N, L.W, R.S, R.E, R.N]; reflection maps
    // L.S <-> R.S, L.N <-> R.N, L.W <-> R.E, reversing horizontal node order.
    const int nseg = 6;
    const int swap[nseg] = {3, 5, 4, 0, 2, 1};
    const bool reverse[nseg] = {true, true, false, true, false, true};
    Mat P = Mat::Zero(L.size(), L.size());
    for (int s = 0; s < nseg; ++s) {
        const int so = L.offset(s), to = L.offset(swap[s]);
        for (int c = 0; c < m; ++c) P(so + c, to + (reverse[s] ? m - 1 - c : c)) = 1.0;
    }
    const Mat& R = merged.parent.iti;
    const Mat RP = P * R * P;
    CHECK((R - RP).cwiseAbs().maxCoeff() / R.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("merge_tree reduces to merge_nodes for a 1x2 tiling") {
    const double k = 2.0;
    const Potential V = Potential::constant(1.0);
    const LeafBox l1(Rect{0, 1, 0, 1}, V, k, 16, 10);
    const LeafBox l2(Rect{1, 2, 0, 1}, V, k, 16, 10);
    const auto pair_result = merge_nodes(from_leaf(l1), from_leaf(l2));
    std::vector<std::vector<ItINode>> tiles{{from_leaf(l1)}, {from_leaf(l2)}};
    auto [top, diags] = merge_tree(tiles);
    REQUIRE(diags.size() == 1);
    CHECK((top.iti - pair_result.parent.iti).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("merge_tree 2x2 equals the direct coupled solve") {
    const double k = 3.0;
    const Potential V = Potential::constant(1.0);
    std::vector<std::unique_ptr<LeafBox>> leaves;
    std::vector<std::vector<ItINode>> tiles(2, std::vector<ItINode>());
    std::vector<const LeafBox*> ptrs;
    for (int ix = 0; ix < 2; ++ix)
        for (int iy = 0; iy < 2; ++iy) {
            leaves.push_back(std::make_unique<LeafBox>(
                Rect{1.0 * ix, 1.0 * ix + 1, 1.0 * iy, 1.0 * iy + 1}, V, k, 16, 10));
            tiles[ix].push_back(from_leaf(*leaves.back()));
            ptrs.push_back(leaves.back().get());
        }
    auto [top, diags] = merge_tree(tiles);
    CHECK(diags.size() == 3);
    for (const auto& d : diags) CHECK(d.diag.sigma_min > 0.0);
    const ItINode direct = direct_coupled_iti(ptrs);
    const Mat Rd = reorder_operator(direct.iti, direct.layout, top.layout);
    const GramMatrix G = gram(top.layout, NormKind::L2);
    CHECK(op_norm(top.iti - Rd, G, G) / op_norm(Rd, G, G) < 1e-8);
}

TEST_CASE("merge_tree 4x1 schedules agree") {
    const double k = 2.0;
    const Potential V = Potential::constant(1.0);
    std::vector<std::unique_ptr<LeafBox>> leaves;
    std::vector<std::vector<ItINode>> tiles;
    for (int ix = 0; ix < 4; ++ix) {
        leaves.push_back(std::make_unique<LeafBox>(
            Rect{0.5 * ix, 0.5 * ix + 0.5, 0.0, 1.0}, V, k, 16, 10));
        tiles.push_back({from_leaf(*leaves.back())});
    }
    auto [balanced, d1] = merge_tree(tiles, MergePlan::Balanced);
    auto [sequential, d2] = merge_tree(tiles, MergePlan::Sequential);
    const Mat Rs = reorder_operator(sequential.iti, sequential.layout, balanced.layout);
    CHECK((balanced.iti - Rs).cwiseAbs().maxCoeff() /
              balanced.iti.cwiseAbs().maxCoeff() <
          1e-6);
}

TEST_CASE("iti_to_dtn") {
    const double k = 2.0;
    const Mat Z = Mat::Zero(6, 6);
    const Mat lam0 = iti_to_dtn(Z, k);
    CHECK((lam0 - I * k * Mat::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS(iti_to_dtn(Mat::Identity(4, 4), k), DtnNearResonant);

    // Oracle eigen-pair: the DtN of the East-side partial operator maps the
    // sampled mode to (v'(1)/v(1)) w_n.
    const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 24, 18);
    auto [R, Q] = leaf.iti_partial(Side::East);
    const Mat dtn = iti_to_dtn(R, k);
    const Segment& A = leaf.layout().segments[1];
    for (int n = 1; n <= 4; ++n) {
        const auto m = oracle::make_mode(k, n);
        Vec wv(A.count());
        for (int j = 0; j < A.count(); ++j) wv[j] = oracle::w_n(m, A.nodes[j]);
        const cplx expected = oracle::v_n_prime(m, 1.0) / oracle::v_n(m, 1.0);
        CHECK((dtn * wv - expected * wv).cwiseAbs().maxCoeff() /
                  (std::abs(expected) * wv.cwiseAbs().maxCoeff()) <
              1e-6);
    }

    // Reciprocity: int (Lambda f) g = int f (Lambda g) for real V, tested on
    // smooth corner-compatible Dirichlet probes. Products of two degree-n_b
    // trace polynomials have degree 2 n_b, so the pairing goes through the
    // exact Gram of the polynomial representatives instead of the node weights.
    const LeafBox fine_leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 40, 30);
    const Mat full_dtn = iti_to_dtn(fine_leaf.iti_full(), k);
    MatR Wx = MatR::Zero(fine_leaf.layout().size(), fine_leaf.layout().size());
    int off = 0;
    for (const auto& seg : fine_leaf.layout().segments) {
        const int fine = 2 * (seg.count() - 1) + 2;
        auto fg = cheb_nodes(fine, NodeKind::Lobatto);
        VecR params(fine + 1);
        for (int j = 0; j <= fine; ++j)
            params[j] = 0.5 * (seg.lo + seg.hi) + 0.5 * (seg.hi - seg.lo) * fg.nodes[j];
        const MatR P = interp_matrix_nodes(seg.nodes, params);
        const VecR wf = quad_weights_nodes(params, seg.lo, seg.hi);
        Wx.block(off, off, seg.count(), seg.count()) = P.transpose() * wf.asDiagonal() * P;
        off += seg.count();
    }
    const Mat WD = Wx.cast<cplx>() * full_dtn;
    std::mt19937_64 rng2(9);
    for (int t = 0; t < 10; ++t) {
        Vec f(fine_leaf.layout().size()), g(fine_leaf.layout().size());
        int o = 0;
        for (const auto& seg : fine_leaf.layout().segments) {
            f.segment(o, seg.count()) = harness::random_compatible_data(seg, rng2, 4);
            g.segment(o, seg.count()) = harness::random_compatible_data(seg, rng2, 4);
            o += seg.count();
        }
        const cplx s1 = f.transpose() * WD * g;
        const cplx s2 = g.transpose() * WD * f;
        CHECK(std::abs(s1 - s2) / std::abs(s1) < 1e-8);
    }
}

TEST_CASE("merge depends on children only through their serialized operators") {
    const double k = 4.0;
    const Potential V = Potential::constant(1.0);
    const LeafBox l1(Rect{0, 1, 0, 1}, V, k, 18, 12);
    const LeafBox l2(Rect{1, 2, 0, 1}, V, k, 18, 12);
    const MergeResult direct = merge_nodes(from_leaf(l1), from_leaf(l2));

    save_iti_binary("child1.iti1", l1.iti_full());
    save_iti_binary("child2.iti1", l2.iti_full());
    ItINode a{l1.layout(), load_iti_binary("child1.iti1"), k};
    ItINode b{l2.layout(), load_iti_binary("child2.iti1"), k};
    const MergeResult rebuilt = merge_nodes(a, b);
    CHECK((rebuilt.parent.iti - direct.parent.iti).cwiseAbs().maxCoeff() == 0.0);
    CHECK((rebuilt.W - direct.W).cwiseAbs().maxCoeff() == 0.0);
    std::remove("child1.iti1");
    std::remove("child2.iti1");
}

TEST_CASE("operators serialize bit-exactly") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd;
    Mat M(7, 5);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 5; ++j) M(i, j) = cplx(nd(rng), nd(rng));
    const std::string path = "test_op.iti1";
    save_iti_binary(path, M);
    const Mat back = load_iti_binary(path);
    REQUIRE(back.rows() == 7);
    REQUIRE(back.cols() == 5);
    CHECK((back - M).cwiseAbs().maxCoeff() == 0.0);
    save_matrix_csv("test_op.csv", M);
    std::remove(path.c_str());
    std::remove("test_op.csv");
}

TEST_CASE("merge rejects non-conforming children") {
    const Potential V = Potential::constant(1.0);
    const LeafBox l1(Rect{0, 1, 0, 1}, V, 2.0, 16, 10);
    const LeafBox l3(Rect{2, 3, 0, 1}, V, 2.0, 16, 10);  // no shared edge
    CHECK_THROWS_AS(merge_nodes(from_leaf(l1), from_leaf(l3)), ConfigError);
    const LeafBox lk(Rect{1, 2, 0, 1}, V, 2.5, 16, 10);  // different wavenumber
    CHECK_THROWS_AS(merge_nodes(from_leaf(l1), from_leaf(lk)), ConfigError);
}

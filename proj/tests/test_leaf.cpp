#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "itik/harness.hpp"
#include "itik/leaf.hpp"
#include "itik/norms.hpp"
#include "itik/oracle.hpp"

using namespace itik;

namespace {

Vec sample_mode_east(const LeafBox& leaf, const oracle::ImpedanceMode& m) {
    const Segment& A = leaf.layout().segments[1];
    Vec g = Vec::Zero(leaf.layout().size());
    for (int j = 0; j < A.count(); ++j)
        g[leaf.layout().offset(1) + j] = oracle::w_n(m, A.nodes[j]);
    return g;
}

double field_error(const LeafBox& leaf, const FieldSolution& sol, const oracle::ImpedanceMode& m) {
    double emax = 0, umax = 0;
    for (int i = 0; i <= leaf.n_int(); ++i)
        for (int j = 0; j <= leaf.n_int_y(); ++j) {
            const cplx ue = oracle::u_n(m, leaf.xs()[i], leaf.ys()[j]);
            emax = std::max(emax, std::abs(sol.grid_values(i, j) - ue));
            umax = std::max(umax, std::abs(ue));
        }
    return emax / umax;
}

Vec random_smooth_boundary(const LeafBox& leaf, std::mt19937_64& rng) {
    Vec g(leaf.layout().size());
    int off = 0;
    for (const auto& seg : leaf.layout().segments) {
        g.segment(off, seg.count()) = harness::random_compatible_data(seg, rng);
        off += seg.count();
    }
    return g;
}

}  // namespace

TEST_CASE("manufactured plane wave satisfies the assembled system") {
    const double k = 1.0;
    const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 16, 12);
    const Mat A = leaf.assemble_system();
    const int n = leaf.n_int();
    // u = e^{ikx} solves Delta u + k^2 u = 0; impedance data follows analytically.
    Vec u(leaf.grid_size());
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            u[i * (n + 1) + j] = std::exp(I * k * leaf.xs()[i]);
    Vec rhs(leaf.grid_size());
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            const int r = i * (n + 1) + j;
            const double x = leaf.xs()[i];
            const bool on_y = (j == 0 || j == n);
            const bool on_x = (i == 0 || i == n);
            const cplx val = std::exp(I * k * x);
            if (!on_x && !on_y) rhs[r] = 0.0;
            else if (on_y) rhs[r] = I * k * val;                    // d/dn e^{ikx} = 0 on y sides
            else if (i == 0) rhs[r] = I * k * val + I * k * val;    // East: +ik u + ik u
            else rhs[r] = -I * k * val + I * k * val;               // West
        }
    const double resid = (A * u - rhs).norm() / rhs.norm();
    CHECK(resid < 1e-10);
}

TEST_CASE("zero data gives the zero field and linearity holds") {
    const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), 3.0, 14, 10);
    const Vec zero = Vec::Zero(leaf.layout().size());
    CHECK(leaf.solve(zero).grid_values.cwiseAbs().maxCoeff() < 1e-14);

    std::mt19937_64 rng(3);
    const Vec g1 = random_smooth_boundary(leaf, rng);
    const Vec g2 = random_smooth_boundary(leaf, rng);
    const Mat s12 = leaf.solve(g1 + g2).grid_values;
    const Mat s1 = leaf.solve(g1).grid_values;
    const Mat s2 = leaf.solve(g2).grid_values;
    CHECK((s12 - s1 - s2).cwiseAbs().maxCoeff() <
          1e-12 * std::max(1.0, s12.cwiseAbs().maxCoeff()));
}

TEST_CASE("separated oracle modes are reproduced") {
    const double k = 5.0;
    const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 24, 20);
    for (int n = 1; n <= 4; ++n) {
        const auto m = oracle::make_mode(k, n);
        const FieldSolution sol = leaf.solve(sample_mode_east(leaf, m));
        CHECK(field_error(leaf, sol, m) < 1e-7);
    }
    // Representation-complete resolution reaches the solver floor for n <= 8.
    const LeafBox fine(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 32, 28);
    for (int n = 1; n <= 8; ++n) {
        const auto m = oracle::make_mode(k, n);
        const FieldSolution sol = fine.solve(sample_mode_east(fine, m));
        CHECK(field_error(fine, sol, m) < 1e-8);
    }
}

TEST_CASE("spectral convergence: doubling the degrees gains four orders") {
    const double k = 5.0;
    const auto m = oracle::make_mode(k, 4);
    double errs[2];
    int idx = 0;
    for (int n_int : {16, 32}) {
        const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, n_int, (3 * n_int) / 4);
        errs[idx++] = field_error(leaf, leaf.solve(sample_mode_east(leaf, m)), m);
    }
    CHECK(errs[1] < std::max(1e-4 * errs[0], 1e-10));
}

TEST_CASE("conjugation symmetry of the solve") {
    // For real V, conj(u) solves the problem with flipped impedance sign, so
    // R (conj(g) + 2ik conj(u)) = conj(g) for the incoming data of conj(u).
    const double k = 4.0;
    const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 24, 16);
    const auto m = oracle::make_mode(k, 2);
    const Vec g = sample_mode_east(leaf, m);
    const FieldSolution sol = leaf.solve(g);
    const Vec f = g.conjugate() + 2.0 * I * k * sol.u.conjugate();
    const Vec out = leaf.iti_full() * f;
    CHECK((out - g.conjugate()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("full ItI map is an L2 isometry for real potentials") {
    // Incoming and outgoing impedance traces of the discrete field carry the
    // same L2 mass; integrals are taken on a doubled quadrature grid, where
    // they are exact for the field's polynomial traces.
    const double k = 5.0;
    const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 24, 16);
    std::mt19937_64 rng(21);
    for (int t = 0; t < 20; ++t) {
        const Vec g = random_smooth_boundary(leaf, rng);
        const FieldSolution sol = leaf.solve(g);
        double in2 = 0.0, out2 = 0.0;
        for (int s = 0; s < 4; ++s) {
            const Segment& seg = leaf.layout().segments[s];
            const int fine = 2 * leaf.n_int();
            VecR params(fine + 1);
            auto fg = cheb_nodes(fine, NodeKind::Lobatto);
            for (int j = 0; j <= fine; ++j)
                params[j] = 0.5 * (seg.lo + seg.hi) + 0.5 * (seg.hi - seg.lo) * fg.nodes[j];
            const VecR w = quad_weights_nodes(params, seg.lo, seg.hi);
            const auto tr = leaf.side_trace(sol, static_cast<Side>(s), params);
            in2 += (w.array() * (tr.dnu + I * k * tr.u).cwiseAbs2().array()).sum();
            out2 += (w.array() * (tr.dnu - I * k * tr.u).cwiseAbs2().array()).sum();
        }
        const double ratio = std::sqrt(out2 / in2);
        CHECK(ratio > 1.0 - 1e-6);
        CHECK(ratio < 1.0 + 1e-6);
    }
}

TEST_CASE("partial operators tile the full one and see the oracle eigenvalues") {
    const double k = 5.0;
    const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 28, 24);
    auto [R, Q] = leaf.iti_partial(Side::East);
    const int m = leaf.nbp();
    CHECK((R - leaf.iti_full().block(m, m, m, m)).cwiseAbs().maxCoeff() == 0.0);

    const Segment& A = leaf.layout().segments[1];
    for (int n = 1; n <= 6; ++n) {
        const auto mode = oracle::make_mode(k, n);
        Vec wv(A.count());
        for (int j = 0; j < A.count(); ++j) wv[j] = oracle::w_n(mode, A.nodes[j]);
        const cplx rn = oracle::r_n(mode);
        CHECK((R * wv - rn * wv).cwiseAbs().maxCoeff() / wv.cwiseAbs().maxCoeff() < 1e-7);
    }

    // f = ((I+R)f + (I-R)f)/2 exactly.
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    Vec f(m);
    for (auto& c : f.reshaped()) c = cplx(nd(rng), nd(rng));
    const Mat Id = Mat::Identity(m, m);
    const Vec recon = 0.5 * (((Id + R) * f) + ((Id - R) * f));
    CHECK((recon - f).cwiseAbs().maxCoeff() < 1e-13 * f.cwiseAbs().maxCoeff());
}

TEST_CASE("iti_full columns agree with direct solves") {
    const double k = 3.0;
    const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 16, 12);
    std::mt19937_64 rng(15);
    const Vec g = random_smooth_boundary(leaf, rng);
    const FieldSolution sol = leaf.solve(g);
    const Vec via_matrix = leaf.iti_full() * g;
    const Vec via_solve = sol.dnu - I * k * sol.u;
    CHECK((via_matrix - via_solve).cwiseAbs().maxCoeff() <
          1e-12 * via_solve.cwiseAbs().maxCoeff());
}

TEST_CASE("discrete R is near-diagonal in the impedance-mode basis") {
    // Sampled w_n diagonalize R up to leakage measured in the Gram sense. A
    // mode of index n oscillates at frequency ~ n pi and needs a boundary
    // degree of roughly 2.2 n + 6 before its interpolation tail drops below
    // 1e-6, so modes near n_b/2 sit at the representability edge (measured
    // leakage ~1e-4 there): the tight tolerance applies to the comfortably
    // resolved range and a structural bound to the edge.
    const double k = 5.0;
    const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 32, 28);
    auto [R, Q] = leaf.iti_partial(Side::East);
    const Segment& A = leaf.layout().segments[1];
    const int nmodes = leaf.n_b() / 2;
    Mat B(A.count(), nmodes);
    Vec rvals(nmodes);
    for (int n = 1; n <= nmodes; ++n) {
        const auto mode = oracle::make_mode(k, n);
        for (int j = 0; j < A.count(); ++j) B(j, n - 1) = oracle::w_n(mode, A.nodes[j]);
        rvals[n - 1] = oracle::r_n(mode);
    }
    const Mat G = gram(A, NormKind::L2).matrix().cast<cplx>();
    // Coefficients of R w_n in the basis {w_m}: solve the Gram system.
    const Mat Gb = B.adjoint() * G * B;
    const Mat C = Gb.partialPivLu().solve(B.adjoint() * G * (R * B));
    for (int j = 0; j < nmodes; ++j) {
        double leak = 0.0;
        for (int i = 0; i < nmodes; ++i)
            if (i != j) leak = std::max(leak, std::abs(C(i, j)));
        const bool resolved = (j + 1) <= 8;
        CHECK(leak < (resolved ? 1e-6 : 5e-3));
        CHECK(std::abs(C(j, j) - rvals[j]) < (resolved ? 1e-6 : 5e-3));
    }
}

TEST_CASE("flux identity on the shared edge") {
    // ||f||^2_{L2(A)} - ||R f||^2_{L2(A)} = 4 k^2 ||u||^2_{L2(dS minus A)}
    const double k = 5.0;
    const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 28, 20);
    auto [R, Q] = leaf.iti_partial(Side::East);
    const Segment& A = leaf.layout().segments[1];
    const auto m = oracle::make_mode(k, 3);
    Vec wv(A.count());
    for (int j = 0; j < A.count(); ++j) wv[j] = oracle::w_n(m, A.nodes[j]);
    Vec g = Vec::Zero(leaf.layout().size());
    g.segment(leaf.layout().offset(1), A.count()) = wv;
    const FieldSolution sol = leaf.solve(g);

    const double f2 = (A.weights.array() * wv.cwiseAbs2().array()).sum();
    const Vec rf = R * wv;
    const double rf2 = (A.weights.array() * rf.cwiseAbs2().array()).sum();
    double away = 0.0;
    int off = 0;
    for (int s = 0; s < 4; ++s) {
        const Segment& seg = leaf.layout().segments[s];
        if (s != 1)
            away += (seg.weights.array() *
                     sol.u.segment(off, seg.count()).cwiseAbs2().array())
                        .sum();
        off += seg.count();
    }
    CHECK(std::abs(f2 - rf2 - 4.0 * k * k * away) / f2 < 1e-7);
}

TEST_CASE("boundedness constants stay finite and grid-stable") {
    // ||R f|| <= C ||f|| and ||(I-R) f||_{H1k} <= C ||k f||, measured as the
    // largest ratio over compatible probes; full-space SVD norms pick up
    // unresolved corner content, so the resolvable-class measurement is the one
    // that settles under refinement.
    const double k = 4.0;
    double c_r[2], c_imr[2];
    int idx = 0;
    for (int n_int : {24, 32}) {
        const LeafBox leaf(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, n_int, 16);
        auto [R, Q] = leaf.iti_partial(Side::East);
        const Segment& A = leaf.layout().segments[1];
        const GramMatrix g2 = gram(A, NormKind::L2);
        const GramMatrix g1k = gram(A, NormKind::H1k, k);
        const Mat Id = Mat::Identity(R.rows(), R.cols());
        std::mt19937_64 rng(13);  // same draws at both resolutions
        double cr = 0, ci = 0;
        for (int t = 0; t < 20; ++t) {
            const Vec f = harness::random_compatible_data(A, rng);
            cr = std::max(cr, g2.norm(R * f) / g2.norm(f));
            ci = std::max(ci, g1k.norm((Id - R) * f) / (k * g2.norm(f)));
        }
        c_r[idx] = cr;
        c_imr[idx] = ci;
        ++idx;
    }
    for (int i = 0; i < 2; ++i) {
        CHECK(std::isfinite(c_r[i]));
        CHECK(c_r[i] < 1.0 + 1e-6);  // partial ItI contracts in L2 (flux identity)
        CHECK(std::isfinite(c_imr[i]));
        CHECK(c_imr[i] < 10.0);
    }
    CHECK(c_r[1] == doctest::Approx(c_r[0]).epsilon(0.01));
    CHECK(c_imr[1] == doctest::Approx(c_imr[0]).epsilon(0.01));
}

TEST_CASE("difference bound constant is stable as the perturbation shrinks") {
    const double k = 3.0;
    const int n_int = 24, n_b = 16;
    const LeafBox base(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, n_int, n_b);
    auto [R1, Q1] = base.iti_partial(Side::East);
    const Segment& A = base.layout().segments[1];
    const GramMatrix g2 = gram(A, NormKind::L2);
    const GramMatrix g1k = gram(A, NormKind::H1k, k);
    double c_eps[2];
    int idx = 0;
    for (double eps : {1e-2, 1e-3}) {
        const LeafBox pert(Rect{0, 1, 0, 1}, Potential::constant(1.0 + eps), k, n_int, n_b);
        auto [R2, Q2] = pert.iti_partial(Side::East);
        c_eps[idx++] = op_norm(R2 - R1, scaled(g2, k * k), g1k) / eps;
    }
    CHECK(c_eps[0] == doctest::Approx(c_eps[1]).epsilon(0.05));
}

TEST_CASE("interior source enters the solve") {
    // With V2 = V1 + eps, u2 - u1 solves the eps-forced problem; feeding the
    // forcing through the G argument reproduces the difference field.
    const double k = 2.0;
    const double eps = 1e-3;
    const LeafBox l1(Rect{0, 1, 0, 1}, Potential::constant(1.0), k, 20, 14);
    const LeafBox l2(Rect{0, 1, 0, 1}, Potential::constant(1.0 + eps), k, 20, 14);
    std::mt19937_64 rng(8);
    const Vec g = random_smooth_boundary(l1, rng);
    const FieldSolution s1 = l1.solve(g);
    const FieldSolution s2 = l2.solve(g);
    const Mat diff = s2.grid_values - s1.grid_values;
    // (Delta + k^2 V2) (u2 - u1) = k^2 (V1 - V2) u1 = -k^2 eps u1.
    std::function<cplx(double, double)> G = [&](double x, double y) {
        // interpolate u1 at the (shared) tensor nodes: nodes coincide, so look up
        for (int i = 0; i <= l1.n_int(); ++i)
            if (std::abs(l1.xs()[i] - x) < 1e-14)
                for (int j = 0; j <= l1.n_int_y(); ++j)
                    if (std::abs(l1.ys()[j] - y) < 1e-14)
                        return -k * k * eps * s1.grid_values(i, j);
        return cplx(0.0);
    };
    const FieldSolution forced = l2.solve(Vec::Zero(l2.layout().size()), &G);
    // diff comes from subtracting two O(1) solves, so it carries their rounding
    // noise; the forced solve computes the small field directly.
    CHECK((forced.grid_values - diff).cwiseAbs().maxCoeff() <
          1e-8 * std::max(1e-30, diff.cwiseAbs().maxCoeff()) + 1e-13);
}

TEST_CASE("construction guards") {
    CHECK_THROWS_AS(LeafBox(Rect{0, 1, 0, 1}, Potential::constant(1.0), -1.0, 12, 8), ConfigError);
    CHECK_THROWS_AS(LeafBox(Rect{0, 1, 0, 1}, Potential::constant(1.0), 1.0, 8, 12), ConfigError);
    CHECK_THROWS_AS(LeafBox(Rect{1, 0, 0, 1}, Potential::constant(1.0), 1.0, 12, 8), ConfigError);
}

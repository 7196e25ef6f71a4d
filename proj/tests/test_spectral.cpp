#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "itik/spectral.hpp"

using namespace itik;

namespace {
const double pi = std::acos(-1.0);

// Horner evaluation of a real polynomial with given coefficients (low first).
double polyval(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}
std::vector<double> polyder(const std::vector<double>& c) {
    std::vector<double> d;
    for (std::size_t i = 1; i < c.size(); ++i) d.push_back(i * c[i]);
    if (d.empty()) d.push_back(0.0);
    return d;
}
double polyint(const std::vector<double>& c) {  // integral over [-1, 1]
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); i += 2) s += 2.0 * c[i] / (i + 1.0);
    return s;
}
}  // namespace

TEST_CASE("node families") {
    auto lob2 = cheb_nodes(2, NodeKind::Lobatto);
    CHECK(lob2.nodes.size() == 3);
    CHECK(lob2.nodes[0] == doctest::Approx(1.0));
    CHECK(lob2.nodes[1] == doctest::Approx(0.0));
    CHECK(lob2.nodes[2] == doctest::Approx(-1.0));

    auto lob1 = cheb_nodes(1, NodeKind::Lobatto);
    CHECK(lob1.nodes[0] == doctest::Approx(1.0));
    CHECK(lob1.nodes[1] == doctest::Approx(-1.0));

    auto g1 = cheb_nodes(1, NodeKind::Gauss);
    CHECK(g1.nodes[0] == doctest::Approx(std::sqrt(2.0) / 2));
    CHECK(g1.nodes[1] == doctest::Approx(-std::sqrt(2.0) / 2));

    for (auto kind : {NodeKind::Lobatto, NodeKind::Gauss}) {
        auto g = cheb_nodes(7, kind);
        for (int i = 0; i + 1 < g.nodes.size(); ++i) CHECK(g.nodes[i] > g.nodes[i + 1]);
        CHECK(g.nodes.maxCoeff() <= 1.0);
        CHECK(g.nodes.minCoeff() >= -1.0);
    }
    CHECK_THROWS_AS(cheb_nodes(0, NodeKind::Lobatto), ConfigError);
}

TEST_CASE("differentiation matrix exactness") {
    auto g = cheb_nodes(8, NodeKind::Lobatto);
    auto D = diff_matrix(g).matrix;
    const VecR ones = VecR::Ones(9);
    CHECK((D * ones).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((D * g.nodes - ones).cwiseAbs().maxCoeff() < 1e-12);
    VecR x2(9), dx2(9);
    for (int i = 0; i < 9; ++i) {
        x2[i] = g.nodes[i] * g.nodes[i];
        dx2[i] = 2 * g.nodes[i];
    }
    CHECK((D * x2 - dx2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("quadrature weights") {
    auto g = cheb_nodes(2, NodeKind::Lobatto);
    VecR w = quad_weights(g);
    CHECK(w[0] == doctest::Approx(1.0 / 3).epsilon(1e-13));
    CHECK(w[1] == doctest::Approx(4.0 / 3).epsilon(1e-13));
    CHECK(w[2] == doctest::Approx(1.0 / 3).epsilon(1e-13));

    for (auto kind : {NodeKind::Lobatto, NodeKind::Gauss}) {
        auto gg = cheb_nodes(9, kind);
        CHECK(quad_weights(gg).sum() == doctest::Approx(2.0).epsilon(1e-13));
    }
    auto g4 = cheb_nodes(4, NodeKind::Lobatto);
    VecR w4 = quad_weights(g4);
    double m2 = 0;
    for (int i = 0; i < 5; ++i) m2 += w4[i] * g4.nodes[i] * g4.nodes[i];
    CHECK(m2 == doctest::Approx(2.0 / 3).epsilon(1e-13));
}

TEST_CASE("interpolation matrix") {
    auto g = cheb_nodes(6, NodeKind::Lobatto);
    MatR P = interp_matrix(g, g);
    CHECK((P - MatR::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-13);

    auto lob5 = cheb_nodes(5, NodeKind::Lobatto);
    auto gau5 = cheb_nodes(5, NodeKind::Gauss);
    MatR Q = interp_matrix(lob5, gau5);
    CHECK((Q * VecR::Ones(6) - VecR::Ones(6)).cwiseAbs().maxCoeff() < 1e-13);
    VecR x3(6), y3(6);
    for (int i = 0; i < 6; ++i) x3[i] = std::pow(lob5.nodes[i], 3);
    for (int i = 0; i < 6; ++i) y3[i] = std::pow(gau5.nodes[i], 3);
    CHECK((Q * x3 - y3).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("random polynomial exactness property") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int trial = 0; trial < 24; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 12);
        const auto kind = (rng() % 2) ? NodeKind::Lobatto : NodeKind::Gauss;
        auto g = cheb_nodes(n, kind);
        std::vector<double> coeffs(n + 1);
        for (auto& c : coeffs) c = ud(rng);
        VecR p(n + 1), dp(n + 1);
        const auto dc = polyder(coeffs);
        for (int i = 0; i <= n; ++i) {
            p[i] = polyval(coeffs, g.nodes[i]);
            dp[i] = polyval(dc, g.nodes[i]);
        }
        auto D = diff_matrix(g).matrix;
        CHECK((D * p - dp).cwiseAbs().maxCoeff() < 1e-12 * (1 + dp.cwiseAbs().maxCoeff()));
        CHECK(quad_weights(g).dot(p) ==
              doctest::Approx(polyint(coeffs)).epsilon(1e-12));
        auto to = cheb_nodes(n + 2, NodeKind::Gauss);
        MatR P = interp_matrix(g, to);
        for (int i = 0; i <= n + 2; ++i)
            CHECK((P * p)[i] == doctest::Approx(polyval(coeffs, to.nodes[i])).epsilon(1e-11));
    }
}

TEST_CASE("discrete integration by parts defect") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    const int n = 12;
    auto g = cheb_nodes(n, NodeKind::Lobatto);
    auto D = diff_matrix(g).matrix;
    VecR w = quad_weights(g);
    for (int trial = 0; trial < 10; ++trial) {
        const int dp = 2 + static_cast<int>(rng() % 5);
        const int dq = std::min<int>(n - dp, 2 + static_cast<int>(rng() % 5));
        std::vector<double> pc(dp + 1), qc(dq + 1);
        for (auto& c : pc) c = ud(rng);
        for (auto& c : qc) c = ud(rng);
        VecR p(n + 1), q(n + 1);
        for (int i = 0; i <= n; ++i) {
            p[i] = polyval(pc, g.nodes[i]);
            q[i] = polyval(qc, g.nodes[i]);
        }
        const double lhs = w.dot(((D * p).array() * q.array()).matrix()) +
                           w.dot((p.array() * (D * q).array()).matrix());
        const double boundary = p[0] * q[0] - p[n] * q[n];  // nodes descend: [0] is +1
        CHECK(std::abs(lhs - boundary) < 1e-10);
    }
}

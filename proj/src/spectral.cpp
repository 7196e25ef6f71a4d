#include "itik/spectral.hpp"

#include <cmath>

namespace itik {

ChebGrid cheb_nodes(int n, NodeKind kind) {
    if (n < 1) throw ConfigError("cheb_nodes: degree must be >= 1, got " + std::to_string(n));
    VecR x(n + 1);
    const double pi = std::acos(-1.0);
    for (int j = 0; j <= n; ++j) {
        if (kind == NodeKind::Lobatto)
            x[j] = std::cos(j * pi / n);
        else
            x[j] = std::cos((2.0 * j + 1.0) * pi / (2.0 * n + 2.0));
    }
    return ChebGrid{n, kind, std::move(x)};
}

VecR bary_weights(const VecR& nodes) {
    const int m = static_cast<int>(nodes.size());
    VecR w(m);
    for (int j = 0; j < m; ++j) {
        double p = 1.0;
        for (int i = 0; i < m; ++i)
            if (i != j) p *= nodes[j] - nodes[i];
        w[j] = 1.0 / p;
    }
    return w / w.cwiseAbs().maxCoeff();
}

MatR diff_matrix_nodes(const VecR& nodes) {
    const int m = static_cast<int>(nodes.size());
    const VecR w = bary_weights(nodes);
    MatR D(m, m);
    for (int i = 0; i < m; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            D(i, j) = (w[j] / w[i]) / (nodes[i] - nodes[j]);
            rowsum += D(i, j);
        }
        D(i, i) = -rowsum;
    }
    return D;
}

DiffMatrix diff_matrix(const ChebGrid& grid) {
    return DiffMatrix{diff_matrix_nodes(grid.nodes), grid};
}

MatR interp_matrix_nodes(const VecR& from, const VecR& to) {
    const int m = static_cast<int>(from.size());
    const int p = static_cast<int>(to.size());
    const VecR w = bary_weights(from);
    MatR P = MatR::Zero(p, m);
    for (int i = 0; i < p; ++i) {
        int hit = -1;
        for (int j = 0; j < m; ++j) {
            if (to[i] == from[j]) { hit = j; break; }
        }
        if (hit >= 0) {
            P(i, hit) = 1.0;
            continue;
        }
        double denom = 0.0;
        for (int j = 0; j < m; ++j) {
            const double c = w[j] / (to[i] - from[j]);
            P(i, j) = c;
            denom += c;
        }
        P.row(i) /= denom;
    }
    return P;
}

MatR interp_matrix(const ChebGrid& from, const ChebGrid& to) {
    return interp_matrix_nodes(from.nodes, to.nodes);
}

VecR quad_weights_nodes(const VecR& nodes, double a, double b) {
    const int m = static_cast<int>(nodes.size());
    // Map to the reference interval, solve V^T w = moments in the Chebyshev basis.
    VecR t(m);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int j = 0; j < m; ++j) t[j] = (nodes[j] - mid) / half;
    MatR V(m, m);  // V(j, r) = T_r(t_j)
    for (int j = 0; j < m; ++j) {
        double t0 = 1.0, t1 = t[j];
        V(j, 0) = 1.0;
        if (m > 1) V(j, 1) = t1;
        for (int r = 2; r < m; ++r) {
            const double t2 = 2.0 * t[j] * t1 - t0;
            V(j, r) = t2;
            t0 = t1;
            t1 = t2;
        }
    }
    VecR mom(m);
    for (int r = 0; r < m; ++r) mom[r] = (r % 2 == 1) ? 0.0 : 2.0 / (1.0 - double(r) * r);
    VecR w = V.transpose().partialPivLu().solve(mom);
    return (half * w).eval();
}

VecR quad_weights(const ChebGrid& grid) {
    return quad_weights_nodes(grid.nodes, -1.0, 1.0);
}

}  // namespace itik

#ifndef ITIK_SPECTRAL_HPP
#define ITIK_SPECTRAL_HPP

#include "itik/types.hpp"

namespace itik {

/// Chebyshev point family on the reference interval [-1, 1].
/// Lobatto (second kind) includes the endpoints, Gauss (first kind) does not.
enum class NodeKind { Lobatto, Gauss };

/// Degree-n Chebyshev grid: n+1 nodes stored in descending order.
struct ChebGrid {
    int n;
    NodeKind kind;
    VecR nodes;
};

/// Collocation differentiation matrix for a ChebGrid.
struct DiffMatrix {
    MatR matrix;
    ChebGrid grid;
};

/// Nodes cos(j pi / n) (Lobatto) or cos((2j+1) pi / (2n+2)) (Gauss), j = 0..n.
/// Throws ConfigError for n < 1.
ChebGrid cheb_nodes(int n, NodeKind kind);

/// Barycentric weights for an arbitrary set of distinct nodes, scaled so the
/// largest magnitude is 1.
VecR bary_weights(const VecR& nodes);

/// Differentiation matrix on arbitrary distinct nodes (barycentric form with
/// the negative-sum diagonal, so constants differentiate to exactly zero).
MatR diff_matrix_nodes(const VecR& nodes);

DiffMatrix diff_matrix(const ChebGrid& grid);

/// Interpolation matrix taking values at `from` nodes to values at `to` points.
/// Exact on polynomials up to the degree of the source grid.
MatR interp_matrix_nodes(const VecR& from, const VecR& to);

MatR interp_matrix(const ChebGrid& from, const ChebGrid& to);

/// Quadrature weights integrating degree <= n polynomials exactly over the node
/// interval [a, b]: Clenshaw-Curtis for Lobatto nodes, Fejer for Gauss nodes.
/// Computed by solving the Chebyshev moment system, which is well conditioned
/// at Chebyshev-distributed nodes.
VecR quad_weights_nodes(const VecR& nodes, double a, double b);

VecR quad_weights(const ChebGrid& grid);

}  // namespace itik

#endif

#ifndef ITIK_LEAF_HPP
#define ITIK_LEAF_HPP

#include <Eigen/LU>
#include <optional>

#include "itik/domain.hpp"

namespace itik {

/// Discrete solution of one impedance problem on a leaf rectangle.
struct FieldSolution {
    Mat grid_values;     // (nx+1) x (ny+1), row index = x node, col index = y node
    BoundaryTrace u;     // Dirichlet trace on the Gauss layout
    BoundaryTrace dnu;   // outward normal derivative trace
    BoundaryTrace dtau;  // tangential derivative trace
};

/// Square ItI (or rectangular partial) operator together with its boundary
/// layouts and wavenumber.
struct ItIOperator {
    Mat matrix;
    double k = 0.0;
    BoundaryLayout source;
    BoundaryLayout target;
};

/// Chebyshev collocation discretization of
///     (Delta + k^2 V) u = G  in rect,
///     d_nu u + i k u   = g  on the boundary,
/// on a tensor Lobatto grid of degree n_int per axis. Impedance data lives on
/// corner-free Gauss nodes (n_b per side); the four corner collocation nodes
/// are owned by their horizontal side, so each boundary node carries exactly
/// one impedance row. Immutable after construction; solves are re-entrant.
class LeafBox {
  public:
    LeafBox(Rect rect, Potential V, double k, int n_int, int n_b);
    /// Anisotropic variant with separate degrees per axis.
    LeafBox(Rect rect, Potential V, double k, int n_int_x, int n_int_y, int n_b);

    const Rect& rect() const { return rect_; }
    const Potential& potential() const { return V_; }
    double k() const { return k_; }
    int n_int() const { return nx_; }
    int n_int_y() const { return ny_; }
    int n_b() const { return nb_; }
    int nbp() const { return nb_ + 1; }
    int grid_size() const { return (nx_ + 1) * (ny_ + 1); }

    const BoundaryLayout& layout() const { return layout_; }
    const VecR& xs() const { return xs_; }  // descending
    const VecR& ys() const { return ys_; }

    /// Fresh copy of the collocation matrix (the factorization itself is cached
    /// internally; the raw matrix is rebuilt on demand for coupled solves).
    Mat assemble_system() const;

    Vec build_rhs(const BoundaryTrace& g, const std::function<cplx(double, double)>* G = nullptr) const;

    FieldSolution solve(const BoundaryTrace& g,
                        const std::function<cplx(double, double)>* G = nullptr) const;

    /// Full boundary-to-boundary ItI matrix on the Gauss layout.
    const Mat& iti_full() const { return r_full_; }
    ItIOperator iti_operator() const { return ItIOperator{r_full_, k_, layout_, layout_}; }

    /// Partial operators for side A: R maps data on A to outgoing on A, Q maps
    /// data on the other three sides (in South/East/North/West order with A
    /// omitted) to outgoing on A.
    std::pair<Mat, Mat> iti_partial(Side a) const;

    /// Indices of the rows/cols of iti_full belonging to one side.
    Eigen::ArrayXi side_indices(Side s) const;

    /// Gauss-layout data -> collocation right-hand side rows (real, N x M).
    const MatR& data_in() const { return p_in_; }
    /// Trace extraction operators (M x N): u and d_nu u at Gauss layout nodes.
    const MatR& trace_u() const { return e_u_; }
    const MatR& trace_dnu() const { return e_dn_; }
    /// Outgoing extraction rows of one segment: (d_nu - i k) u at its nodes.
    Mat outgoing_rows(int segment) const;

    const Eigen::PartialPivLU<Mat>& lu() const { return lu_; }

    /// Solve for many right-hand sides at once.
    Mat solve_dense(const Mat& rhs) const { return lu_.solve(rhs); }

    struct SideTrace {
        Vec u, dnu, dtau;
    };
    /// Traces of a computed field at arbitrary parameter values along one side.
    /// Spectrally exact for the discrete field (the side restriction is a
    /// polynomial), so suitable for quadrature finer than the Gauss layout.
    SideTrace side_trace(const FieldSolution& f, Side s, const VecR& params) const;

  private:
    Rect rect_;
    Potential V_;
    double k_;
    int nx_, ny_, nb_;
    VecR xs_, ys_;
    MatR dx_, dy_;  // physical differentiation matrices
    BoundaryLayout layout_;
    MatR p_in_, e_u_, e_dn_;
    Eigen::PartialPivLU<Mat> lu_;
    Mat r_full_;

    int flat(int i, int j) const { return i * (ny_ + 1) + j; }
    bool on_boundary(int i, int j) const { return i == 0 || i == nx_ || j == 0 || j == ny_; }
};

}  // namespace itik

#endif

#ifndef ITIK_NORMS_HPP
#define ITIK_NORMS_HPP

#include "itik/domain.hpp"

namespace itik {

enum class NormKind { L2, H1k };

/// Hermitian positive-definite matrix realizing a discrete boundary norm:
///   L2:  diag(w)
///   H1k: k^2 diag(w) + D_tau^T diag(w) D_tau
/// where w are the segment quadrature weights and D_tau differentiates along
/// the boundary parameter. The discrete H1k form is the root-sum-of-squares
/// version of the continuum sum ||k h|| + ||d_tau h||; the two differ by at
/// most a factor sqrt(2).
class GramMatrix {
  public:
    GramMatrix() = default;
    GramMatrix(MatR g, NormKind kind, double k);

    const MatR& matrix() const { return g_; }
    NormKind kind() const { return kind_; }
    double k() const { return k_; }
    int size() const { return static_cast<int>(g_.rows()); }

    /// sqrt(v^H G v)
    double norm(const Vec& v) const;
    /// Lower-triangular Cholesky factor L with G = L L^T.
    const MatR& chol() const { return chol_; }

  private:
    MatR g_;
    MatR chol_;
    NormKind kind_ = NormKind::L2;
    double k_ = 0.0;
};

/// Gram matrix of one boundary segment. H1k requires k > 0.
GramMatrix gram(const Segment& seg, NormKind kind, double k = 0.0);

/// Block-diagonal Gram over all segments of a layout.
GramMatrix gram(const BoundaryLayout& layout, NormKind kind, double k = 0.0);

/// Scale a Gram matrix by s (realizes e.g. the ||k f||_{L2} source norm as
/// k^2 * L2 without rebuilding).
GramMatrix scaled(const GramMatrix& gm, double s);

/// Largest singular value of L_tgt^T T L_src^{-T}: sup ||T f||_tgt / ||f||_src.
double op_norm(const Mat& T, const GramMatrix& g_src, const GramMatrix& g_tgt);

/// Smallest singular value of the same weighted matrix: inf ||T f||_tgt / ||f||_src.
double min_gain(const Mat& T, const GramMatrix& g_src, const GramMatrix& g_tgt);

/// Both extremal gains from a single SVD.
std::pair<double, double> extremal_gains(const Mat& T, const GramMatrix& g_src,
                                         const GramMatrix& g_tgt);

}  // namespace itik

#endif

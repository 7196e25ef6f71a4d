#include "itik/norms.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace itik {

GramMatrix::GramMatrix(MatR g, NormKind kind, double k) : g_(std::move(g)), kind_(kind), k_(k) {
    const double asym = (g_ - g_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-14 * std::max(1.0, g_.cwiseAbs().maxCoeff()))
        throw ConfigError("GramMatrix: matrix is not symmetric");
    Eigen::LLT<MatR> llt(g_);
    if (llt.info() != Eigen::Success)
        throw SingularSystem("GramMatrix: not positive definite (bad quadrature weights?)");
    chol_ = llt.matrixL();
}

double GramMatrix::norm(const Vec& v) const {
    return std::sqrt(std::real(v.dot(g_.cast<cplx>() * v)));
}

GramMatrix gram(const Segment& seg, NormKind kind, double k) {
    if (kind == NormKind::L2) return GramMatrix(MatR(seg.weights.asDiagonal()), kind, 0.0);
    if (k <= 0.0) throw ConfigError("gram: H1k norm requires k > 0");
    const MatR D = diff_matrix_nodes(seg.nodes);
    MatR g = k * k * MatR(seg.weights.asDiagonal());
    g += D.transpose() * seg.weights.asDiagonal() * D;
    g = 0.5 * (g + g.transpose()).eval();
    return GramMatrix(std::move(g), kind, k);
}

GramMatrix gram(const BoundaryLayout& layout, NormKind kind, double k) {
    const int n = layout.size();
    MatR g = MatR::Zero(n, n);
    int off = 0;
    for (const auto& seg : layout.segments) {
        GramMatrix gs = gram(seg, kind, k);
        g.block(off, off, seg.count(), seg.count()) = gs.matrix();
        off += seg.count();
    }
    return GramMatrix(std::move(g), kind, k);
}

GramMatrix scaled(const GramMatrix& gm, double s) {
    if (s <= 0) throw ConfigError("scaled: factor must be positive");
    return GramMatrix(s * gm.matrix(), gm.kind(), gm.k());
}

std::pair<double, double> extremal_gains(const Mat& T, const GramMatrix& g_src,
                                         const GramMatrix& g_tgt) {
    if (T.cols() != g_src.size() || T.rows() != g_tgt.size())
        throw ConfigError("extremal_gains: shape mismatch between operator and Gram matrices");
    Mat M = g_tgt.chol().transpose().cast<cplx>() * T;
    // Right-multiply by L_src^{-T}: X = M L^{-T}  <=>  L X^T = M^T.
    Mat Xt = M.transpose();
    g_src.chol().cast<cplx>().triangularView<Eigen::Lower>().solveInPlace(Xt);
    Mat X = Xt.transpose();
    Eigen::JacobiSVD<Mat> svd(X);
    const auto& s = svd.singularValues();
    return {s(0), s(s.size() - 1)};
}

double op_norm(const Mat& T, const GramMatrix& g_src, const GramMatrix& g_tgt) {
    return extremal_gains(T, g_src, g_tgt).first;
}

double min_gain(const Mat& T, const GramMatrix& g_src, const GramMatrix& g_tgt) {
    return extremal_gains(T, g_src, g_tgt).second;
}

}  // namespace itik

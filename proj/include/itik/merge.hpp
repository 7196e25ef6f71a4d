#ifndef ITIK_MERGE_HPP
#define ITIK_MERGE_HPP

#include "itik/leaf.hpp"

namespace itik {

/// A node of the merge tree: an ItI operator on an arbitrary segmented layout.
struct ItINode {
    BoundaryLayout layout;
    Mat iti;
    double k = 0.0;
};

ItINode from_leaf(const LeafBox& leaf);

struct MergeDiag {
    double sigma_min = 0.0;  // smallest singular value of I - R1 R2
    double sigma_max = 0.0;
    double cond = 0.0;
};

/// Solve (I - R1 R2) W = I by dense factorization; the smallest singular value
/// is measured by one SVD and checked against rel_tol * ||I - R1 R2||.
/// Throws MergeSingular when the system is singular to that tolerance.
std::pair<Mat, MergeDiag> build_W(const Mat& R1, const Mat& R2, double rel_tol = 1e-12);

struct MergeResult {
    ItINode parent;     // exterior segments of child a, then of child b
    Mat W;              // (I - R1 R2)^{-1} on the shared edge
    Mat F1, F2;         // interface data from stacked exterior data (h_a; h_b)
    MergeDiag diag;
    BoundaryLayout interface;  // the shared segments, canonical order
};

/// Glue two nodes along their coincident segments. Both children keep their own
/// outward normals; incoming data on the shared edge for child a is f1, for
/// child b f2, with f2 = -W Q1 h1 + W R1 Q2 h2 and f1 = -Q2 h2 - R2 f2.
MergeResult merge_nodes(const ItINode& a, const ItINode& b, double rel_tol = 1e-12);

enum class MergePlan { Balanced, Sequential };

struct TreeDiag {
    std::string label;
    MergeDiag diag;
};

/// Hierarchical merge of a conforming grid of nodes, tiles[ix][iy]. Columns of
/// tiles are merged along x first (vertical shared edges), then the resulting
/// rows along y. Sequential associates right-to-left instead of pairwise.
std::pair<ItINode, std::vector<TreeDiag>> merge_tree(
    const std::vector<std::vector<ItINode>>& tiles, MergePlan plan = MergePlan::Balanced,
    double rel_tol = 1e-12);

/// Direct ItI operator of the union of conforming leaves: one coupled linear
/// system over all leaf fields plus interface impedance traces, solved in a
/// single factorization without forming R_j, Q_j, or W. The merge procedure is
/// block elimination of exactly this system, so the two agree to roundoff.
ItINode direct_coupled_iti(const std::vector<const LeafBox*>& leaves);

/// Dirichlet-to-Neumann matrix ik (I + R)(I - R)^{-1}. Throws DtnNearResonant
/// when sigma_min(I - R) <= rel_tol * sigma_max.
Mat iti_to_dtn(const Mat& R, double k, double rel_tol = 1e-12);

/// Mapping of segments of `from` onto equal segments of `to`; throws unless the
/// two layouts cover identical segment sets.
std::vector<int> layout_permutation(const BoundaryLayout& from, const BoundaryLayout& to);

/// Reindex an operator whose rows/cols live on `from` onto the layout `to`.
Mat reorder_operator(const Mat& op, const BoundaryLayout& from, const BoundaryLayout& to);

}  // namespace itik

#endif

"""Impedance-to-impedance operators for the variable-coefficient Helmholtz
equation on rectangles.

Thin python surface over the C++ core: Chebyshev spectral primitives, the
impedance leaf solver with its ItI operators, the hierarchical merge
W = (I - R1 R2)^{-1}, the ItI-to-DtN conversion, and the closed-form
impedance modes used as ground truth.
"""

from ._itik import (
    ItikConfigError,
    LeafBox,
    Potential,
    build_w,
    cheb_nodes,
    check_nontrapping,
    diff_matrix,
    direct_coupled_iti,
    find_lambda,
    interp_matrix,
    iti_to_dtn,
    lambda_residual,
    load_iti,
    merge_two,
    min_gain,
    mode_r_n,
    mode_u_n,
    mode_w_n,
    op_norm,
    quad_weights,
    reflect_potential,
    save_iti,
    sharpness_point,
)

__all__ = [
    "ItikConfigError",
    "LeafBox",
    "Potential",
    "build_w",
    "cheb_nodes",
    "check_nontrapping",
    "diff_matrix",
    "direct_coupled_iti",
    "find_lambda",
    "interp_matrix",
    "iti_to_dtn",
    "lambda_residual",
    "load_iti",
    "merge_two",
    "min_gain",
    "mode_r_n",
    "mode_u_n",
    "mode_w_n",
    "op_norm",
    "quad_weights",
    "reflect_potential",
    "save_iti",
    "sharpness_point",
]

#ifndef ITIK_HARNESS_HPP
#define ITIK_HARNESS_HPP

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "itik/merge.hpp"
#include "itik/norms.hpp"
#include "itik/oracle.hpp"

namespace itik {
namespace harness {

/// Flat key = value configuration. Lists are comma separated; unknown keys are
/// rejected. Defaults reproduce the standard verification runs.
struct Config {
    std::vector<double> k_grid{0.5, 1, 2, 4, 8, 16, 32};
    std::string potential = "constant:1.0";
    int n_int = 24;
    int n_b = 16;
    int refine_delta = 8;
    double ppw = 1.25;  // per-k resolution floor: n_eff(k) = max(n_int, ceil(ppw k))
    double delta = 0.1;
    std::uint64_t seed = 20240901;
    double fit_window = 0.5;  // fraction of the largest-k points used in fits
    int nontrapping_samples = 201;
    int threads = 2;
    std::string out_dir = ".";
    int probes = 20;
    // oracle validation
    int oracle_modes = 8;
    double field_tol = 1e-8;
    double rn_tol = 1e-7;
    double flux_tol = 1e-7;
    // merge equivalence
    double merge_tol = 1e-6;
    // sharpness family
    double sharpness_alpha = 0.1;
    int sharpness_n_min = 20;
    int sharpness_n_max = 200;
    // Neumann trace check
    int neumann_modes = 50;
    double neumann_residual_tol = 1e-6;
    double neumann_trace_floor = 1.0;
};

Config parse_config(const std::string& path);
Config parse_config_text(const std::string& text);

/// Least-squares slope of log y against log x over the upper `window_frac`
/// fraction of the points (x ascending).
double fit_loglog(const std::vector<double>& x, const std::vector<double>& y, double window_frac);

/// Random smooth boundary data on one segment with zeros of order `zero_order`
/// at both ends (corner-compatible data, so the resulting fields stay in the
/// space the grid resolves spectrally), normalized in L2 of the segment.
Vec random_compatible_data(const Segment& seg, std::mt19937_64& rng, int zero_order = 3);

struct TraceChecks {
    double flux_defect = 0;  // | ||k u||^2_{L2(dS\A)} - k Im int_A dnu conj(u) |, ||f|| = 1
    double neumann_chain_c = 0;     // ||dnu u||_A / ||u||_{H1k(A)}^{1/4}
    double dirichlet_chain_c = 0;     // ||k u||_A / ((1+k)^{3(1+d)/2} ||dnu u||^{1/2})
};

/// Probe-based flux/control identity and trace-chain constants on the East
/// side of a leaf, with boundary integrals on a doubled quadrature grid where
/// the discrete field's traces integrate exactly.
TraceChecks boundary_identity_checks(const LeafBox& leaf, int probes, std::uint64_t seed,
                                     double delta);

struct SweepRow {
    double k = 0;
    int n_eff = 0;
    double c_minus = 0, c_plus = 0, wnorm = 0, wq_norm = 0, sigma_min = 0;
    // Bijectivity gain of I - R1 R2 from L2(A) to H1k(A), the spaces in which
    // the operator is a bijection; equals 1 / ||W||_{H1k -> L2}. The plain
    // sigma_min is reported as well, but at small k its magnitude is carried
    // by corner-node directions that never settle under refinement, so the
    // refinement-stability bookkeeping uses this gain.
    double bij_gain = 0;
    double flux_defect = 0;   // flux/control identity defect, relative
    double neumann_chain_c = 0;      // ||dnu u||_A / ||u||_{H1k(A)}^{1/4}, max over probes
    double dirichlet_chain_c = 0;      // ||k u||_A / ((1+k)^{3(1+d)/2} ||dnu u||^{1/2}), max over probes
    // refined-grid twins
    double c_minus_ref = 0, c_plus_ref = 0, wnorm_ref = 0, wq_norm_ref = 0, sigma_min_ref = 0;
    double bij_gain_ref = 0;
    bool converged = false;  // <= 1% relative drift between the two resolutions
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double fit_c_minus = 0, fit_c_plus = 0, fit_wnorm = 0;  // slopes vs (1+k)
    double c_minus_floor = 0;
    bool all_converged = false;
};

SweepResult run_bound_sweep(const Config& cfg);

struct OracleRow {
    double k = 0;
    int n = 0;
    double field_err = 0, rn_err = 0, flux_defect = 0;
};

struct OracleReport {
    std::vector<OracleRow> rows;
    double max_field_err = 0, max_rn_err = 0, max_flux_defect = 0;
    double worst_k = 0;
    int worst_n = 0;
    bool pass = false;
};

OracleReport run_oracle_validation(const Config& cfg);

struct MergeRow {
    double k = 0;
    double rel_err = 0;          // merged vs direct coupled solve, L2 operator norm
    double sigma_min = 0;        // of I - R1 R2
    double vdiff = 0;            // ||V2 - V1||_inf on S
    double vdiff_envelope = 0;   // vdiff * (1+k)^{3(1+delta)}: candidate epsilon_delta
    double singlepatch_diag = 0; // probe disagreement against a one-patch rectangle solve
};

struct MergeReport {
    std::vector<MergeRow> rows;
    double max_rel_err = 0;
    bool pass = false;
};

MergeReport run_merge_equivalence(const Config& cfg);

struct NeumannMode {
    double lambda = 0;
    double trace2 = 0;     // squared Dirichlet trace on the three sides away from A
    double residual = 0;   // refined-grid PDE residual
    double bc_residual = 0;
    bool converged = false;
};

struct NeumannReport {
    std::vector<NeumannMode> modes;   // converged modes, ascending eigenvalue
    double min_trace2 = 0;            // over the first `neumann_modes` converged modes
    double max_group_err = 0;         // vs analytic values (constant potential only)
    int groups_checked = 0;
    bool pass = false;
};

NeumannReport run_neumann_trace_check(const Config& cfg);

struct SharpnessResult {
    std::vector<double> k, ratio, delta_over_logk, lower_gain_err;
    double fit_full = 0;    // slope of ratio vs k over all points
    double fit_window = 0;  // slope over the configured upper window
};

/// Sharpness families: the (I+R) gain along k_n with k + k^alpha = n pi, and
/// the fixed-k (I-R) L2 gain against 2k/(n pi).
SharpnessResult run_sharpness(const Config& cfg, double fixed_k = 2.0);

/// Export the DtN operator of the unit-square leaf at each k in the grid.
void run_dtn_export(const Config& cfg);

/// CSV table of (k, n, lambda, mu, r_n, |1 - r_n|, |1 + r_n|).
void write_mode_table(const Config& cfg);

}  // namespace harness
}  // namespace itik

#endif

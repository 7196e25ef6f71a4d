// Command-line driver for the k-sweep experiments, oracle validation, merge
// equivalence check, Neumann trace check, and DtN export.
//
// Exit codes: 0 all assertions passed, 1 numerical assertion failure,
// 2 configuration error.

#include <CLI11.hpp>
#include <iostream>

#include "itik/harness.hpp"
#include "itik/serialize.hpp"

using namespace itik;

namespace {

struct CommonOpts {
    std::string config;
    std::string out;
    int threads = 0;
    std::string resolution;
};

harness::Config load_config(const CommonOpts& o) {
    harness::Config cfg =
        o.config.empty() ? harness::Config{} : harness::parse_config(o.config);
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (o.threads > 0) cfg.threads = o.threads;
    if (!o.resolution.empty()) {
        const auto comma = o.resolution.find(',');
        if (comma == std::string::npos)
            throw ConfigError("--resolution expects n_int,n_b");
        cfg.n_int = std::stoi(o.resolution.substr(0, comma));
        cfg.n_b = std::stoi(o.resolution.substr(comma + 1));
        if (cfg.n_b > cfg.n_int) throw ConfigError("--resolution: n_b must not exceed n_int");
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "flat key = value config file");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--threads", o.threads, "worker threads");
    cmd->add_option("--resolution", o.resolution, "n_int,n_b override");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"impedance-to-impedance operator toolkit"};
    app.require_subcommand(1);

    CommonOpts sweep_o, oracle_o, merge_o, neumann_o, dtn_o;
    auto* sweep = app.add_subcommand("sweep", "k-sweep of operator-bound measurements");
    add_common(sweep, sweep_o);
    auto* oraclec = app.add_subcommand("oracle", "validate the solver against closed forms");
    add_common(oraclec, oracle_o);
    auto* mergec = app.add_subcommand("merge-check", "merged vs direct ItI equivalence");
    add_common(mergec, merge_o);
    auto* neumann = app.add_subcommand("neumann", "Neumann eigenfunction boundary-trace check");
    add_common(neumann, neumann_o);
    auto* dtn = app.add_subcommand("dtn", "export DtN operators derived from ItI data");
    add_common(dtn, dtn_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    try {
        if (sweep->parsed()) {
            const auto cfg = load_config(sweep_o);
            const auto res = harness::run_bound_sweep(cfg);
            const auto sh = harness::run_sharpness(cfg);
            harness::write_mode_table(cfg);
            std::cout << "sweep: " << res.rows.size() << " wavenumbers, c_minus floor "
                      << res.c_minus_floor << ", fits: c_minus " << res.fit_c_minus << ", c_plus "
                      << res.fit_c_plus << ", ||W|| " << res.fit_wnorm << ", sharpness "
                      << sh.fit_window << "\n";
            bool ok = res.all_converged && res.c_minus_floor > 0;
            for (const auto& r : res.rows) ok = ok && r.sigma_min > 0;
            std::cout << (ok ? "sweep assertions passed" : "sweep assertions FAILED") << "\n";
            return ok ? 0 : 1;
        }
        if (oraclec->parsed()) {
            const auto cfg = load_config(oracle_o);
            harness::write_mode_table(cfg);
            const auto rep = harness::run_oracle_validation(cfg);
            std::cout << "oracle: max field err " << rep.max_field_err << " (worst k "
                      << rep.worst_k << ", n " << rep.worst_n << "), max r_n err "
                      << rep.max_rn_err << ", max flux defect " << rep.max_flux_defect << "\n";
            std::cout << (rep.pass ? "oracle validation passed" : "oracle validation FAILED")
                      << "\n";
            return rep.pass ? 0 : 1;
        }
        if (mergec->parsed()) {
            const auto cfg = load_config(merge_o);
            const auto rep = harness::run_merge_equivalence(cfg);
            std::cout << "merge-check: max relative error " << rep.max_rel_err << "\n";
            for (const auto& r : rep.rows)
                std::cout << "  k = " << r.k << ": rel_err " << r.rel_err << ", sigma_min "
                          << r.sigma_min << ", ||V2-V1|| " << r.vdiff << " (envelope "
                          << r.vdiff_envelope << "), one-patch diag " << r.singlepatch_diag
                          << "\n";
            std::cout << (rep.pass ? "merge equivalence passed" : "merge equivalence FAILED")
                      << "\n";
            return rep.pass ? 0 : 1;
        }
        if (neumann->parsed()) {
            const auto cfg = load_config(neumann_o);
            const auto rep = harness::run_neumann_trace_check(cfg);
            std::cout << "neumann: " << rep.modes.size() << " candidate modes, min trace^2 "
                      << rep.min_trace2 << ", analytic groups checked " << rep.groups_checked
                      << " (max err " << rep.max_group_err << ")\n";
            std::cout << (rep.pass ? "neumann check passed" : "neumann check FAILED") << "\n";
            return rep.pass ? 0 : 1;
        }
        if (dtn->parsed()) {
            const auto cfg = load_config(dtn_o);
            harness::run_dtn_export(cfg);
            std::cout << "dtn: exported " << cfg.k_grid.size() << " operators to " << cfg.out_dir
                      << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

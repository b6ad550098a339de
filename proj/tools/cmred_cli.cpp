// cmred: spectral decomposition, center-manifold computation and stability
// verification for delay kernels of exponential-polynomial type.  See
// README.md for the config format and output contracts.

#include "cmred/pipeline.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace cmred;

namespace {

struct CliArgs {
    std::string command;
    std::string config_path;
    std::string out_dir;
    bool quiet = false;
    std::optional<std::uint64_t> seed;
    std::optional<double> grid_h;
};

void usage(std::ostream& os)
{
    os << "usage: cmred <command> --config PATH [--out DIR] [--seed N] [--grid-h F] [--quiet]\n"
          "commands:\n"
          "  spectrum    locate and classify the characteristic roots\n"
          "  decompose   dual bases, projections, reduced matrices\n"
          "  manifold    cutoff selection and the graph-map lattice\n"
          "  central     reduced equation: cubic fit and stability classification\n"
          "  simulate    time-step the full nonlinear equation\n"
          "  verify      reduced-vs-full stability check (exit 4 on disagreement)\n";
}

CliArgs parse_args(int argc, char** argv)
{
    CliArgs a;
    if (argc < 2)
        throw ConfigError("missing command");
    a.command = argv[1];
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        auto want_value = [&](const char* flag) {
            if (i + 1 >= argc)
                throw ConfigError(std::string("flag ") + flag + " needs a value");
            return std::string(argv[++i]);
        };
        if (arg == "--config")
            a.config_path = want_value("--config");
        else if (arg == "--out")
            a.out_dir = want_value("--out");
        else if (arg == "--seed")
            a.seed = std::stoull(want_value("--seed"));
        else if (arg == "--grid-h")
            a.grid_h = std::stod(want_value("--grid-h"));
        else if (arg == "--quiet")
            a.quiet = true;
        else
            throw ConfigError("unknown flag: " + arg);
    }
    if (a.config_path.empty())
        throw ConfigError("--config PATH is required");
    return a;
}

void emit(const CliArgs& args, const std::string& name, const Json& j)
{
    const std::string text = j.dump();
    if (!args.quiet)
        std::cout << text;
    if (!args.out_dir.empty()) {
        std::filesystem::create_directories(args.out_dir);
        write_file(args.out_dir + "/" + name + ".json", text);
    }
}

void emit_csv(const CliArgs& args, const std::string& name, const std::string& text)
{
    if (!args.out_dir.empty()) {
        std::filesystem::create_directories(args.out_dir);
        write_file(args.out_dir + "/" + name, text);
    }
}

Json roots_json(const SpectralSummary& s)
{
    Json arr = Json::array();
    for (const auto& r : s.roots) {
        Json jr = Json::object();
        jr.set("lambda", Json::complex_value(r.lambda));
        jr.set("multiplicity", double(r.multiplicity));
        jr.set("det_residual", r.det_residual);
        jr.set("null_residual", r.null_residual);
        const char* cls = r.classification == RootClass::center
                              ? "center"
                              : (r.classification == RootClass::unstable ? "unstable" : "stable");
        jr.set("classification", cls);
        arr.push(std::move(jr));
    }
    return arr;
}

int cmd_spectrum(Pipeline& p, const CliArgs& args)
{
    run_spectrum_stage(p);
    Json j = report_head(p, "spectrum");
    j.set("region", Json::object({{"re_min", Json(p.rect.re_min)},
                                  {"re_max", Json(p.rect.re_max)},
                                  {"im_min", Json(p.rect.im_min)},
                                  {"im_max", Json(p.rect.im_max)}}));
    j.set("roots", roots_json(p.summary));
    j.set("n_unstable", double(p.summary.n_u));
    j.set("n_center", double(p.summary.n_c));
    j.set("n_stable", double(p.summary.n_s));
    j.set("hyperbolic", p.summary.hyperbolic);
    j.set("constants_ledger", constants_ledger(p, false, false));
    emit(args, "spectrum", j);
    return 0;
}

int cmd_decompose(Pipeline& p, const CliArgs& args)
{
    run_spectrum_stage(p);
    run_decomposition_stage(p);
    const ReducedSystem& rs = *p.reduced;

    Json j = report_head(p, "decompose");
    j.set("roots", roots_json(p.summary));
    j.set("d_c", double(rs.d_c()));
    j.set("d_u", double(rs.d_u()));
    Json gc = Json::array();
    for (const auto& lam : rs.center_basis.lambdas)
        gc.push(Json::complex_value(lam));
    j.set("G_c_diagonal", std::move(gc));
    Json hc = Json::array();
    for (std::size_t i = 0; i < rs.d_c(); ++i) {
        Json row = Json::array();
        for (std::size_t c = 0; c < rs.kernel.dim; ++c)
            row.push(Json::complex_value(rs.H_c(i, c)));
        hc.push(std::move(row));
    }
    j.set("H_c", std::move(hc));
    Json dual = Json::array();
    double worst = 0;
    for (std::size_t i = 0; i < rs.d_c(); ++i) {
        Json row = Json::array();
        for (std::size_t jj = 0; jj < rs.d_c(); ++jj) {
            const cplx v = rs.center_dual.rows[i].apply(rs.center_basis.columns[jj]);
            const cplx res = v - (i == jj ? cplx{1.0} : cplx{0.0});
            worst = std::max(worst, std::abs(res));
            row.push(Json::complex_value(res));
        }
        dual.push(std::move(row));
    }
    j.set("duality_residuals", std::move(dual));
    j.set("duality_worst_residual", worst);
    j.set("constants_ledger", constants_ledger(p, true, false));
    emit(args, "decompose", j);
    return 0;
}

int cmd_manifold(Pipeline& p, const CliArgs& args)
{
    run_spectrum_stage(p);
    run_decomposition_stage(p);
    run_manifold_stage(p);

    Json j = report_head(p, "manifold");
    j.set("hyperbolic", p.reduced->d_c() == 0);
    if (p.map) {
        j.set("lattice_radius", p.map->radius());
        j.set("lattice_spacing", p.map->spacing());
        j.set("lattice_points", double(p.map->lattice_points()));
        j.set("fixed_point_iterations_total", double(p.map->total_iterations()));
        j.set("lipschitz_measured", p.map->measured_lipschitz());

        std::ostringstream csv;
        csv << "z_c,graph_norm,lipschitz_local\n";
        for (const auto& node : p.map->lattice())
            csv << format_double(node.zc) << ',' << format_double(node.graph_norm) << ','
                << format_double(node.lip_local) << '\n';
        emit_csv(args, "manifold_lattice.csv", csv.str());
    }
    j.set("constants_ledger", constants_ledger(p, true, true));
    emit(args, "manifold", j);
    return 0;
}

int cmd_central(Pipeline& p, const CliArgs& args)
{
    run_spectrum_stage(p);
    run_decomposition_stage(p);
    run_manifold_stage(p);
    run_central_stage(p);

    Json j = report_head(p, "central");
    if (p.reduced->d_c() == 0) {
        j.set("hyperbolic", true);
        j.set("constants_ledger", constants_ledger(p, true, true));
        emit(args, "central", j);
        return 0;
    }
    j.set("radius_r", p.radius_r);
    j.set("escape_radius", p.escape_radius);
    if (p.reduced->d_c() == 1) {
        double resid = 0;
        const cplx coeff = fit_cubic_coefficient(p.central, {0.02, 0.04, 0.06, 0.08}, &resid);
        j.set("cubic_coefficient", Json::complex_value(coeff));
        j.set("cubic_fit_residual", resid);
    }
    const EnsembleSettings es = ensemble_settings(p);
    const StabilityVerdict v = classify_zero_stability(p.central, es);
    j.set("verdict", verdict_name(v.classification));
    j.set("horizon", v.horizon);
    Json ev = Json::array();
    for (std::size_t i = 0; i < v.start_radii.size(); ++i)
        ev.push(Json::object({{"start_radius", Json(v.start_radii[i])},
                              {"final_over_initial", Json(v.final_over_initial[i])},
                              {"escaped", Json(v.escaped[i] != 0)}}));
    j.set("ensemble", std::move(ev));
    j.set("constants_ledger", constants_ledger(p, true, true));

    std::vector<double> radii = es.radii;
    if (radii.empty())
        radii = {p.radius_r / 50.0, p.radius_r / 20.0, p.radius_r / 10.0};
    std::ostringstream csv;
    csv << "orbit,t,re_z1,im_z1\n";
    for (std::size_t k = 0; k < radii.size(); ++k) {
        Vecc z0(p.reduced->d_c(), cplx{0.0});
        z0[0] = radii[k];
        const CentralOrbit orbit = integrate_central(p.central, z0, v.horizon, es.h_ode, 100);
        for (std::size_t i = 0; i < orbit.t.size(); ++i)
            csv << k << ',' << format_double(orbit.t[i]) << ','
                << format_double(orbit.z[i][0].real()) << ','
                << format_double(orbit.z[i][0].imag()) << '\n';
    }
    emit_csv(args, "central_orbits.csv", csv.str());
    emit(args, "central", j);
    return 0;
}

int cmd_simulate(Pipeline& p, const CliArgs& args)
{
    const KernelTables kt = make_kernel_tables(p.kernel, *p.grid);
    const Segment phi = constant_segment(*p.grid, Vecc(p.cfg.dim, cplx{p.cfg.phi_const}));
    bool blew_up = false;
    std::vector<double> times, norms;
    Json j = report_head(p, "simulate");
    try {
        const Trajectory tr = solve_nonlinear(kt, 0.0, phi, p.f, p.cfg.t_end, 1e6);
        const std::size_t stride = std::max<std::size_t>(1, tr.steps() / 2000);
        Segment seg(*p.grid, p.cfg.dim);
        for (std::size_t s = 0; s <= tr.steps(); s += stride) {
            tr.segment_at(s, seg);
            times.push_back(tr.time_at(s));
            norms.push_back(segment_norm(seg));
        }
        std::ostringstream csv;
        write_trajectory_csv(csv, tr, stride);
        emit_csv(args, "trajectory.csv", csv.str());
        std::ostringstream segcsv;
        write_segment_csv(segcsv, tr.segment_at(tr.steps()));
        emit_csv(args, "final_segment.csv", segcsv.str());
    } catch (const std::runtime_error&) {
        blew_up = true;
    }
    j.set("blowup", blew_up);
    if (!times.empty()) {
        j.set("fitted_norm_rate", fit_log_slope(times, norms, 1e-13));
        j.set("final_norm", norms.back());
        j.set("initial_norm", norms.front());
    }
    j.set("constants_ledger", constants_ledger(p, false, false));
    emit(args, "simulate", j);
    return 0;
}

int cmd_verify(Pipeline& p, const CliArgs& args)
{
    run_spectrum_stage(p);
    run_decomposition_stage(p);
    run_manifold_stage(p);
    run_central_stage(p);

    const ReductionReport rep =
        reduction_report(p.central, ensemble_settings(p), full_ensemble_settings(p));

    Json j = report_head(p, "verify");
    j.set("hyperbolic_branch", rep.hyperbolic_branch);
    j.set("central_verdict", verdict_name(rep.central_verdict));
    j.set("full_verdict", verdict_name(rep.full_verdict));
    j.set("agreement", rep.agreement);
    j.set("full_fitted_rate", rep.full_fitted_rate);
    Json fo = Json::array();
    for (double r : rep.full_final_over_initial)
        fo.push(Json(r));
    j.set("full_final_over_initial", std::move(fo));

    if (p.map && p.reduced->d_u() == 0) {
        const double z0 = p.radius_r / 2.0;
        Segment x0 = p.map->evaluate(Vecc{cplx{z0}});
        p.reduced->add_center_part(Vecc{cplx{z0}}, x0);
        Rng rng(p.cfg.seed, 7);
        Segment bump = random_segment(*p.grid, p.cfg.dim, rng);
        bump = p.reduced->project_su(bump);
        const double bn = segment_norm(bump);
        if (bn > 0)
            x0.add_scaled(cplx{0.3 * z0 / bn}, bump);
        const Trajectory tr = solve_nonlinear(p.reduced->tables, 0.0, x0, p.f, 10.0, 1e6);
        const AttractivityDiagnostics diag =
            attractivity_diagnostics(p.cutoff, *p.reduced, *p.map, tr, p.radius_r);
        Json da = Json::object();
        da.set("fitted_rate", diag.fitted_rate);
        da.set("beta0", diag.bounds.beta0);
        da.set("envelope_satisfied", diag.satisfied);
        da.set("stayed_in_domain", diag.stayed_in_domain);
        da.set("first_exit_time", diag.first_exit_time);
        j.set("attractivity", std::move(da));
    }
    j.set("constants_ledger", constants_ledger(p, true, true));

    bool expectation_met = true;
    if (!p.cfg.expect_verdict.empty()) {
        const VerdictClass want = p.cfg.expect_verdict == "stable" ? VerdictClass::stable
                                                                   : VerdictClass::unstable;
        expectation_met = rep.central_verdict == want && rep.full_verdict == want;
        j.set("expected_verdict", p.cfg.expect_verdict);
        j.set("expectation_met", expectation_met);
    }
    emit(args, "verify", j);
    return (rep.agreement && expectation_met) ? 0 : 4;
}

} // namespace

int main(int argc, char** argv)
{
    CliArgs args;
    try {
        args = parse_args(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        usage(std::cerr);
        return 1;
    }
    try {
        ProblemConfig cfg = ProblemConfig::load(args.config_path);
        if (args.seed)
            cfg.seed = *args.seed;
        if (args.grid_h)
            cfg.h = *args.grid_h;
        if (args.out_dir.empty())
            args.out_dir = cfg.out_dir;
        auto p = make_pipeline(cfg);

        if (args.command == "spectrum")
            return cmd_spectrum(*p, args);
        if (args.command == "decompose")
            return cmd_decompose(*p, args);
        if (args.command == "manifold")
            return cmd_manifold(*p, args);
        if (args.command == "central")
            return cmd_central(*p, args);
        if (args.command == "simulate")
            return cmd_simulate(*p, args);
        if (args.command == "verify")
            return cmd_verify(*p, args);
        std::cerr << "error: unknown command '" << args.command << "'\n\n";
        usage(std::cerr);
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const RootFindingError& e) {
        std::cerr << "root finding error: " << e.what() << "\n";
        return 2;
    } catch (const FixedPointError& e) {
        std::cerr << "fixed point error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.  Criteria exercise the full pipeline at desk scale against
// analytic oracles and the documented qualitative behavior of the shipped
// kernel family.

#include "cmred/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

using namespace cmred;

namespace {

int g_failures = 0;

struct Check {
    std::string name;
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            detail << (detail.str().empty() ? "" : "; ") << what;
        }
    }
};

void run_criterion(int num, const std::string& title, const std::function<void(Check&)>& body)
{
    Check c;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.detail << "exception: " << e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s — %s (%.1f s)%s%s\n", num, c.ok ? "PASS" : "FAIL",
                title.c_str(), secs, c.detail.str().empty() ? "" : " — ",
                c.detail.str().c_str());
    std::fflush(stdout);
    if (!c.ok)
        ++g_failures;
}

KernelModel scalar_exp(double nu, double rho)
{
    KernelModel k;
    k.dim = 1;
    k.rho = rho;
    KernelTerm t;
    t.coeff = Matc(1, 1);
    t.coeff(0, 0) = nu;
    t.power = 0;
    t.rate = 1.0;
    k.terms.push_back(t);
    return k;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

// ---- shared fixtures -------------------------------------------------------

// critical kernel, decomposition-grade grid
struct DecompFixture {
    Grid g;
    KernelModel k;
    KernelTables kt;
    SpectralSummary s;
    ReducedSystem rs;

    DecompFixture()
        : g(make_grid(1.0 / 64, 30.0, 0.5)), k(scalar_exp(1.0, 0.5)),
          kt(make_kernel_tables(k, g)),
          s(find_characteristic_roots(k, Rect{-0.4, 1, -1, 1})),
          rs(reduced_matrices(k, g, s))
    {
    }
};

const DecompFixture& dfx()
{
    static DecompFixture f;
    return f;
}

// critical kernel, manifold-grade stage for a given cubic coefficient
struct ManifoldFixture {
    Grid g;
    KernelModel k;
    SpectralSummary s;
    ReducedSystem rs;
    NonlinearityModel f;
    CutoffConfig cfg;
    std::unique_ptr<CenterManifoldMap> map;
    CentralSystem sys;

    explicit ManifoldFixture(double eps, double lattice_radius = 0.12)
        : g(make_grid(1.0 / 32, 25.0, 0.5)), k(scalar_exp(1.0, 0.5)),
          s(find_characteristic_roots(k, Rect{-0.4, 1, -1, 1})),
          rs(reduced_matrices(k, g, s)), f(make_cubic_functional(k, g, eps))
    {
        const auto est = estimate_decomposition_constants(rs, rs.alpha, Rng(3), 16);
        rs.C_est = est.C;
        rs.C1_est = est.C1;
        SelectDeltaOptions opt;
        opt.delta_override = 0.25;
        cfg = select_delta(rs, f, Rng(4), opt);
        cfg.t_path = 25.0;
        map = std::make_unique<CenterManifoldMap>(cfg, rs, f, lattice_radius, 1e-9);
        map->cache_linear_functional(f.linear_functional);
        sys = make_central_system(rs, *map, f, lattice_radius, 0.25);
    }
};

const ManifoldFixture& mfx_stable()
{
    static ManifoldFixture f(-1.0);
    return f;
}

const ManifoldFixture& mfx_unstable()
{
    static ManifoldFixture f(+1.0);
    return f;
}

// ---- criteria --------------------------------------------------------------

void criterion_1(Check& c)
{
    const KernelModel k = scalar_exp(1.0, 0.5);
    const auto s = find_characteristic_roots(k, Rect{-0.4, 1, -1, 1});
    c.expect(s.roots.size() == 1, "expected exactly one root");
    if (!s.roots.empty()) {
        c.expect(std::abs(s.roots[0].lambda) <= 1e-8,
                 "|lambda| = " + fmt(std::abs(s.roots[0].lambda)));
        c.expect(s.roots[0].classification == RootClass::center, "not classified center");
        c.expect(s.roots[0].multiplicity == 1, "not simple");
    }
    c.detail << "root at " << fmt(std::abs(s.roots.empty() ? 1.0 : std::abs(s.roots[0].lambda)));
}

void criterion_2(Check& c)
{
    struct Case {
        double nu, rho;
    };
    for (const Case cs : {Case{0.25, 0.85}, Case{0.5, 0.75}, Case{1.5, 0.5}, Case{2.0, 0.5}}) {
        const KernelModel k = scalar_exp(cs.nu, cs.rho);
        const auto s = find_characteristic_roots(k, default_search_rect(k));
        c.expect(s.roots.size() == 1, "nu=" + fmt(cs.nu) + ": expected one root");
        if (s.roots.empty())
            continue;
        c.expect(std::abs(s.roots[0].lambda - cplx{cs.nu - 1.0}) <= 1e-8,
                 "nu=" + fmt(cs.nu) + ": root error "
                     + fmt(std::abs(s.roots[0].lambda - cplx{cs.nu - 1.0})));
        const RootClass want = cs.nu < 1.0 ? RootClass::stable : RootClass::unstable;
        c.expect(s.roots[0].classification == want, "nu=" + fmt(cs.nu) + ": wrong class");
        c.expect(s.hyperbolic, "nu=" + fmt(cs.nu) + ": should be hyperbolic");
    }
}

void criterion_3(Check& c)
{
    const auto& F = dfx();
    // analytic-oracle pairing of the flat row with the flat column
    auto one_row = [](double) { return Vecc{cplx{1.0}}; };
    const Segment one = constant_segment(F.g, Vecc{cplx{1.0}});
    const cplx pairing = bilinear_form(F.kt, one_row, one);
    c.expect(std::abs(pairing - 1.0) <= 1e-4, "<<1,1>> = 1 off by " + fmt(std::abs(pairing - 1.0)));

    Rng rng(11);
    double worst = 0;
    for (int i = 0; i < 20; ++i) {
        const Segment phi = random_segment(F.g, 1, rng);
        Vecc z1, z2;
        const Segment p1 = F.rs.project_center(phi, &z1);
        (void)F.rs.project_center(p1, &z2);
        worst = std::max(worst, std::abs(z1[0] - z2[0]));
    }
    c.expect(worst <= 1e-6, "idempotency residual " + fmt(worst));

    c.expect(std::abs(F.rs.center_basis.lambdas[0]) <= 1e-6,
             "G_c = " + fmt(std::abs(F.rs.center_basis.lambdas[0])));
    c.expect(std::abs(F.rs.H_c(0, 0) - 1.0) <= 1e-3,
             "H_c off by " + fmt(std::abs(F.rs.H_c(0, 0) - 1.0)));
    c.detail << "pairing err " << fmt(std::abs(pairing - 1.0)) << ", H_c err "
             << fmt(std::abs(F.rs.H_c(0, 0) - 1.0));
}

void criterion_4(Check& c)
{
    // semigroup law on the coarse test grid
    {
        const Grid g = make_grid(0.05, 40.0, 0.5);
        const KernelTables kt = make_kernel_tables(scalar_exp(1.0, 0.5), g);
        Rng rng(5);
        double worst = 0;
        for (int i = 0; i < 20; ++i) {
            const Segment phi = random_segment(g, 1, rng);
            const double np = std::max(1.0, segment_norm(phi));
            for (double t : {0.5, 1.0, 2.0}) {
                const Segment once = solve_homogeneous(kt, phi, 2 * t);
                const Segment twice = solve_homogeneous(kt, solve_homogeneous(kt, phi, t), t);
                worst = std::max(worst, segment_norm_diff(once, twice) / np);
            }
        }
        c.expect(worst <= 5 * g.h, "semigroup gap " + fmt(worst));
        c.detail << "semigroup gap " << fmt(worst);
    }
    // mollified reconstruction vs direct forced solve
    {
        const Grid g = make_grid(1.0 / 32, 25.0, 0.5);
        const KernelTables kt = make_kernel_tables(scalar_exp(1.0, 0.5), g);
        Rng rng(21);
        const Segment phi = random_segment(g, 1, rng, 0.5);
        auto p = [](double t) { return Vecc{cplx{0.4 * std::sin(t) + 0.1}}; };
        const Segment direct = solve_forced(kt, 0.0, phi, p, 3.0);
        double prev = 1e9, gap32 = 0;
        for (int n : {4, 8, 16, 32}) {
            const double gap = segment_norm_diff(vcf_segment(kt, 0.0, phi, p, 3.0, n), direct);
            c.expect(gap <= 10.0 * (1.0 / n + g.h),
                     "vcf gap at n=" + std::to_string(n) + ": " + fmt(gap));
            c.expect(gap <= prev * 1.05 + 1e-4, "vcf gap not decreasing at n=" + std::to_string(n));
            prev = gap;
            gap32 = gap;
        }
        c.detail << ", vcf gap(32) " << fmt(gap32);
    }
}

void criterion_5(Check& c)
{
    const auto& F = mfx_stable();
    const PathGrid pg = make_path_grid(F.g, F.cfg.eta, F.rs.alpha, F.cfg.path_tail_tol,
                                       F.cfg.t_path);
    Rng rng(21);

    // measured contraction ratio on 10 random path pairs
    double worst_ratio = 0;
    for (int pair = 0; pair < 10; ++pair) {
        const double scale = F.cfg.delta * rng.uniform(0.2, 0.8);
        auto mk = [&]() {
            WeightedPath y = alloc_path(pg, 1, 0, 1);
            const double a = rng.uniform(-1, 1) * scale, b = rng.uniform(-1, 1) * scale;
            const double w1 = rng.uniform(0.1, 0.6);
            for (std::size_t p = 0; p < pg.nodes(); ++p) {
                const double t = pg.time_of(p);
                y.z[p] = cplx{a * std::cos(w1 * t) + 0.4 * b};
                y.xfs[0][p] = cplx{0.3 * scale * std::sin(0.3 * t)};
            }
            refresh_forced_coords(y, F.rs);
            return y;
        };
        const WeightedPath y1 = mk(), y2 = mk();
        const double dy = path_diff_norm(y1, y2, F.rs);
        if (dy < 1e-12)
            continue;
        const Vecc psi{cplx{0.02}};
        const double df = path_diff_norm(contraction_step(F.cfg, F.rs, F.f, psi, y1),
                                         contraction_step(F.cfg, F.rs, F.f, psi, y2), F.rs);
        worst_ratio = std::max(worst_ratio, df / dy);
    }
    c.expect(worst_ratio <= 0.55, "contraction ratio " + fmt(worst_ratio));

    // geometric fixed-point increments
    double worst_inc_ratio = 0;
    for (double z0 : {0.02, 0.05}) {
        const auto fp = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{z0}}, 1e-10);
        for (std::size_t i = 1; i < fp.increments.size(); ++i)
            if (fp.increments[i - 1] > 1e-13)
                worst_inc_ratio = std::max(worst_inc_ratio,
                                           fp.increments[i] / fp.increments[i - 1]);
    }
    c.expect(worst_inc_ratio <= 0.6, "increment ratio " + fmt(worst_inc_ratio));

    // anchor Lipschitz bound 2C on 20 sampled pairs
    const double col = segment_norm(F.rs.center_basis.columns[0]);
    double worst_lip = 0;
    for (int i = 0; i < 20; ++i) {
        const double z1 = rng.uniform(-0.06, 0.06), z2 = rng.uniform(-0.06, 0.06);
        if (std::abs(z1 - z2) < 1e-4)
            continue;
        const auto fp1 = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{z1}});
        const auto fp2 = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{z2}});
        worst_lip = std::max(worst_lip, path_diff_norm(fp1.path, fp2.path, F.rs)
                                            / (std::abs(z1 - z2) * col));
    }
    c.expect(worst_lip <= 2.0 * F.rs.C_est + 1e-9, "anchor Lipschitz " + fmt(worst_lip));
    c.detail << "ratio " << fmt(worst_ratio) << ", increments " << fmt(worst_inc_ratio)
             << ", lip/(2C) " << fmt(worst_lip / (2.0 * F.rs.C_est));
}

void criterion_6(Check& c)
{
    const auto& F = mfx_stable();

    // graph value at the origin
    const auto fp0 = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{0.0}}, 1e-10);
    const double f0 = segment_norm(center_map(F.rs, fp0.path));
    c.expect(f0 <= 1e-8, "F(0) = " + fmt(f0));

    // tangency: log-log slope of ||F(s e1)|| over s
    std::vector<double> ss{0.1, 0.05, 0.025}, norms;
    for (double s : ss) {
        const auto fp = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{s}}, 1e-10);
        norms.push_back(segment_norm(center_map(F.rs, fp.path)));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < ss.size(); ++i) {
        const double x = std::log(ss[i]), y = std::log(std::max(norms[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
    c.expect(slope >= 1.5, "tangency slope " + fmt(slope));

    // tangent map vs first-order quotients: errors shrink linearly in s
    const Vecc psi{cplx{0.04}};
    const auto fp = solve_center_fixed_point(F.cfg, F.rs, F.f, psi, 1e-12);
    const TangentMap tm = tangent_map(F.cfg, F.rs, F.f, psi, fp.path);
    const double eta_prime = 0.5 * (F.cfg.eta + F.rs.alpha);
    auto fd_error = [&](double s) {
        const auto fps = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{0.04 + s}},
                                                  1e-12, 400, &fp.path);
        WeightedPath diff = fps.path;
        diff.axpy(cplx{-1.0}, fp.path);
        diff.axpy(cplx{-s}, tm.columns[0]);
        Segment seg(F.g, 1);
        double worst = 0;
        for (std::size_t p = 0; p < diff.pg.nodes(); ++p) {
            path_segment(diff, F.rs, p, seg);
            worst = std::max(worst, segment_norm(seg)
                                        * std::exp(-eta_prime * std::abs(diff.pg.time_of(p))));
        }
        return worst / s;
    };
    const double e1 = fd_error(1e-2), e2 = fd_error(1e-3);
    const double ratio = e1 / e2;
    c.expect(ratio >= 5.0 && ratio <= 20.0, "first-order error ratio " + fmt(ratio));
    c.detail << "slope " << fmt(slope) << ", fd ratio " << fmt(ratio);
}

void criterion_7(Check& c)
{
    const auto& F = mfx_stable();
    const double fp_tol = 1e-9;

    NonlinearityModel fdelta;
    fdelta.form = NonlinearityModel::Form::custom;
    fdelta.eval = [&](const Segment& phi) { return cutoff_apply(F.cfg, F.rs, F.f, phi); };

    // invariance: start on the graph, stay on it to grid accuracy
    Segment on = F.map->evaluate(Vecc{cplx{0.05}});
    F.rs.add_center_part(Vecc{cplx{0.05}}, on);
    const Trajectory tr_on = solve_nonlinear(F.rs.tables, 0.0, on, fdelta, 10.0);
    const auto diag_on = attractivity_diagnostics(F.cfg, F.rs, *F.map, tr_on, F.sys.radius_r);
    double worst = 0;
    for (double v : diag_on.xi_norms)
        worst = std::max(worst, v);
    c.expect(worst <= 10.0 * fp_tol + 10.0 * F.g.h, "invariance residual " + fmt(worst));

    // attractivity: off-manifold start decays under the certified envelope
    Segment off = on;
    Rng rng(41);
    Segment bump = F.rs.project_su(random_segment(F.g, 1, rng));
    off.add_scaled(cplx{0.02 / segment_norm(bump)}, bump);
    const Trajectory tr_off = solve_nonlinear(F.rs.tables, 0.0, off, F.f, 10.0);
    const auto diag = attractivity_diagnostics(F.cfg, F.rs, *F.map, tr_off, F.sys.radius_r, 1.5);
    c.expect(diag.fitted_rate < 0, "fitted rate " + fmt(diag.fitted_rate));
    c.expect(diag.satisfied, "certified envelope violated");
    c.expect(diag.stayed_in_domain, "left the validity region");
    c.detail << "invariance " << fmt(worst) << ", rate " << fmt(diag.fitted_rate) << " (beta0 "
             << fmt(diag.bounds.beta0) << ")";
}

void criterion_8(Check& c)
{
    const std::vector<double> zs{0.02, 0.04, 0.06, 0.08};
    {
        const cplx coeff = fit_cubic_coefficient(mfx_stable().sys, zs);
        c.expect(std::abs(coeff - cplx{-1.0}) <= 0.1, "eps=-1 fit " + fmt(coeff.real()));
        c.detail << "fits " << fmt(coeff.real());
    }
    {
        const cplx coeff = fit_cubic_coefficient(mfx_unstable().sys, zs);
        c.expect(std::abs(coeff - cplx{1.0}) <= 0.1, "eps=+1 fit " + fmt(coeff.real()));
        c.detail << ", " << fmt(coeff.real());
    }
    {
        ManifoldFixture F2(+2.0);
        const cplx coeff = fit_cubic_coefficient(F2.sys, zs);
        c.expect(std::abs(coeff - cplx{2.0}) <= 0.2, "eps=+2 fit " + fmt(coeff.real()));
        c.detail << ", " << fmt(coeff.real());
    }
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(CMRED_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

void criterion_9(Check& c)
{
    EnsembleSettings es;
    es.radii = {0.05, 0.07, 0.1};
    es.horizon = 1000.0;
    FullEnsembleSettings fs;
    fs.radii = {0.05, 0.1};
    {
        const auto& F = mfx_stable();
        const ReductionReport rep = reduction_report(F.sys, es, fs);
        c.expect(rep.central_verdict == VerdictClass::stable,
                 std::string("eps=-1 central: ") + verdict_name(rep.central_verdict));
        c.expect(rep.full_verdict == VerdictClass::stable,
                 std::string("eps=-1 full: ") + verdict_name(rep.full_verdict));
        c.expect(rep.agreement, "eps=-1 disagreement");
    }
    {
        const auto& F = mfx_unstable();
        const ReductionReport rep = reduction_report(F.sys, es, fs);
        c.expect(rep.central_verdict == VerdictClass::unstable,
                 std::string("eps=+1 central: ") + verdict_name(rep.central_verdict));
        c.expect(rep.full_verdict == VerdictClass::unstable,
                 std::string("eps=+1 full: ") + verdict_name(rep.full_verdict));
        c.expect(rep.agreement, "eps=+1 disagreement");
    }
    const int rc_stable =
        run_cli("verify --config " CMRED_CONFIG_DIR "/critical_scalar_stable.cfg --quiet");
    c.expect(rc_stable == 0, "verify stable config exited " + std::to_string(rc_stable));
    const int rc_unstable =
        run_cli("verify --config " CMRED_CONFIG_DIR "/critical_scalar_unstable.cfg --quiet");
    c.expect(rc_unstable == 0, "verify unstable config exited " + std::to_string(rc_unstable));
    c.detail << "verify exits " << rc_stable << "/" << rc_unstable;
}

void criterion_10(Check& c)
{
    // nu = 1/2: decay at rate 1/2
    {
        const KernelModel k = scalar_exp(0.5, 0.75);
        const Grid g = make_grid(1.0 / 32, 30.0, 0.75);
        const KernelTables kt = make_kernel_tables(k, g);
        const auto f = make_cubic_functional(k, g, -1.0);
        const Segment phi = constant_segment(g, Vecc{cplx{0.01}});
        const Trajectory tr = solve_nonlinear(kt, 0.0, phi, f, 25.0);
        std::vector<double> ts, ns;
        Segment seg(g, 1);
        for (std::size_t j = std::size_t(2.0 / g.h); j <= tr.steps(); j += 8) {
            tr.segment_at(j, seg);
            ts.push_back(tr.time_at(j));
            ns.push_back(segment_norm(seg));
        }
        const double rate = fit_log_slope(ts, ns);
        c.expect(std::abs(rate + 0.5) <= 0.05, "nu=1/2 rate " + fmt(rate));
        c.detail << "rates " << fmt(rate);
    }
    // nu = 2: growth at rate 1
    {
        const KernelModel k = scalar_exp(2.0, 0.5);
        const Grid g = make_grid(1.0 / 32, 30.0, 0.5);
        const KernelTables kt = make_kernel_tables(k, g);
        const auto f = make_cubic_functional(k, g, 1.0);
        const Segment phi = constant_segment(g, Vecc{cplx{1e-4}});
        const Trajectory tr = solve_nonlinear(kt, 0.0, phi, f, 6.0);
        std::vector<double> ts, ns;
        Segment seg(g, 1);
        for (std::size_t j = std::size_t(1.0 / g.h); j <= tr.steps(); j += 4) {
            tr.segment_at(j, seg);
            ts.push_back(tr.time_at(j));
            ns.push_back(segment_norm(seg));
        }
        const double rate = fit_log_slope(ts, ns);
        c.expect(std::abs(rate - 1.0) <= 0.1, "nu=2 rate " + fmt(rate));
        c.detail << ", " << fmt(rate);
    }
}

} // namespace

int main()
{
    std::printf("acceptance suite (simd backend: %s)\n", simd::backend_name());
    run_criterion(1, "critical spectrum: one simple center root at 0", criterion_1);
    run_criterion(2, "family roots nu-1 with hyperbolic classification", criterion_2);
    run_criterion(3, "duality, projections, reduced matrices", criterion_3);
    run_criterion(4, "semigroup law and mollified reconstruction", criterion_4);
    run_criterion(5, "contraction, increments, anchor Lipschitz", criterion_5);
    run_criterion(6, "graph tangency and tangent map", criterion_6);
    run_criterion(7, "invariance and exponential attractivity", criterion_7);
    run_criterion(8, "cubic coefficient fits", criterion_8);
    run_criterion(9, "reduction principle: reduced vs full verdicts", criterion_9);
    run_criterion(10, "hyperbolic decay and growth rates", criterion_10);
    if (g_failures) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cmred/errors.hpp"
#include "cmred/manifold.hpp"

#include <cmath>

using namespace cmred;

namespace {

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

struct Fixture {
    Grid g;
    KernelModel k;
    SpectralSummary s;
    ReducedSystem rs;
    NonlinearityModel f;
    CutoffConfig cfg;

    Fixture()
        : g(make_grid(1.0 / 32, 25.0, 0.5)), k(scalar_exp(1.0, 0.5)),
          s(find_characteristic_roots(k, Rect{-0.4, 1, -1, 1})),
          rs(reduced_matrices(k, g, s)), f(make_cubic_functional(k, g, -1.0))
    {
        const auto est = estimate_decomposition_constants(rs, rs.alpha, Rng(3), 16);
        rs.C_est = est.C;
        rs.C1_est = est.C1;
        SelectDeltaOptions opt;
        opt.delta_override = 0.25;
        cfg = select_delta(rs, f, Rng(4), opt);
        cfg.t_path = 20.0;
    }
};

const Fixture& fx()
{
    static Fixture f;
    return f;
}

WeightedPath random_path(const Fixture& F, Rng& rng, double scale)
{
    const PathGrid pg = make_path_grid(F.g, F.cfg.eta, F.rs.alpha, F.cfg.path_tail_tol,
                                       F.cfg.t_path);
    WeightedPath y = alloc_path(pg, F.rs.d_c(), F.rs.d_u(), 1);
    // smooth center coordinate profile plus a mild forced-value history
    const double a = rng.uniform(-1, 1) * scale, b = rng.uniform(-1, 1) * scale;
    const double w1 = rng.uniform(0.1, 0.6);
    for (std::size_t p = 0; p < pg.nodes(); ++p) {
        const double t = pg.time_of(p);
        y.z[p] = cplx{a * std::cos(w1 * t) + 0.4 * b};
        y.xfs[0][p] = cplx{0.3 * scale * std::sin(0.3 * t) * rng.uniform(0.5, 1.0)};
    }
    refresh_forced_coords(y, F.rs);
    return y;
}

} // namespace

TEST_CASE("bump profile")
{
    CHECK(CutoffConfig::chi(0.0) == 1.0);
    CHECK(CutoffConfig::chi(1.99) == 1.0);
    CHECK(CutoffConfig::chi(-1.5) == 1.0);
    CHECK(CutoffConfig::chi(3.0) == 0.0);
    CHECK(CutoffConfig::chi(3.7) == 0.0);
    CHECK(CutoffConfig::chi(2.5) == doctest::Approx(0.5));
    double prev = 1.0;
    for (double t = 2.0; t <= 3.0; t += 0.01) {
        const double v = CutoffConfig::chi(t);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("cutoff application regions")
{
    const auto& F = fx();
    // zero stays zero
    CHECK(vec_norm(cutoff_apply(F.cfg, F.rs, F.f, Segment(F.g, 1))) == 0.0);

    // far outside the support the cutoff kills f
    Segment big(F.g, 1);
    F.rs.add_center_part(Vecc{cplx{10.0 * F.cfg.delta}}, big);
    CHECK(vec_norm(cutoff_apply(F.cfg, F.rs, F.f, big)) == 0.0);

    // inside the flat region f passes through unchanged
    Segment small(F.g, 1);
    F.rs.add_center_part(Vecc{cplx{0.3 * F.cfg.delta}}, small);
    const Vecc a = cutoff_apply(F.cfg, F.rs, F.f, small);
    const Vecc b = F.f(small);
    CHECK(std::abs(a[0] - b[0]) < 1e-14);
}

TEST_CASE("radius selection: zero nonlinearity accepts the ceiling")
{
    const auto& F = fx();
    SelectDeltaOptions opt;
    opt.delta1 = 0.5;
    const CutoffConfig c0 = select_delta(F.rs, NonlinearityModel::zero(1), Rng(5), opt);
    CHECK(c0.delta == doctest::Approx(0.5));
    CHECK(c0.zeta_certified == 0.0);
}

TEST_CASE("radius selection: certificate holds and shrinking C C1 never shrinks delta")
{
    const auto& F = fx();
    CHECK(F.cfg.smallness_lhs < 0.5);
    CHECK(F.cfg.L_certified <= 1.0 + 1e-9);
    CHECK(F.cfg.certified.valid);
    CHECK(F.cfg.certified.beta0 > 0.0);
    CHECK(F.cfg.certified.mu_prime < F.rs.alpha);

    ReducedSystem relaxed = F.rs; // halve the constant estimates
    relaxed.C_est = std::max(1.0, F.rs.C_est / 2.0);
    relaxed.C1_est = std::max(1.0, F.rs.C1_est / 2.0);
    const CutoffConfig c2 = select_delta(relaxed, F.f, Rng(4), SelectDeltaOptions{});
    const CutoffConfig c1 = select_delta(F.rs, F.f, Rng(4), SelectDeltaOptions{});
    CHECK(c2.delta_certified >= c1.delta_certified - 1e-12);
}

TEST_CASE("radius selection fails loudly for an impossibly steep nonlinearity")
{
    const auto& F = fx();
    const NonlinearityModel steep = make_cubic_functional(F.k, F.g, 1e30);
    CHECK_THROWS_AS((void)select_delta(F.rs, steep, Rng(10), SelectDeltaOptions{}),
                    std::runtime_error);
}

TEST_CASE("contraction map on trivial inputs")
{
    const auto& F = fx();
    const PathGrid pg = make_path_grid(F.g, F.cfg.eta, F.rs.alpha, F.cfg.path_tail_tol,
                                       F.cfg.t_path);

    // psi = 0, y = 0 -> 0
    WeightedPath zero = alloc_path(pg, 1, 0, 1);
    const WeightedPath out0 = contraction_step(F.cfg, F.rs, F.f, Vecc{cplx{0.0}}, zero);
    CHECK(path_norm(out0, F.rs) < 1e-14);

    // y = 0, psi arbitrary -> the reduced flow path
    const Vecc psi{cplx{0.03}};
    const WeightedPath out1 = contraction_step(F.cfg, F.rs, F.f, psi, zero);
    const WeightedPath flow = initial_center_path(pg, F.rs, psi);
    CHECK(path_diff_norm(out1, flow, F.rs) < 1e-10);
}

TEST_CASE("measured contraction ratio stays below one half")
{
    const auto& F = fx();
    Rng rng(21);
    const Vecc psi{cplx{0.02}};
    for (int pair = 0; pair < 10; ++pair) {
        const double scale = F.cfg.delta * rng.uniform(0.2, 0.8);
        WeightedPath y1 = random_path(F, rng, scale);
        WeightedPath y2 = random_path(F, rng, scale);
        const double dy = path_diff_norm(y1, y2, F.rs);
        if (dy < 1e-12)
            continue;
        const WeightedPath f1 = contraction_step(F.cfg, F.rs, F.f, psi, y1);
        const WeightedPath f2 = contraction_step(F.cfg, F.rs, F.f, psi, y2);
        const double df = path_diff_norm(f1, f2, F.rs);
        CHECK(df / dy <= 0.5);
    }
}

TEST_CASE("fixed point: zero input, residual, increments")
{
    const auto& F = fx();
    const FixedPointResult at0 = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{0.0}});
    CHECK(at0.converged);
    CHECK(path_norm(at0.path, F.rs) < 1e-12);

    const FixedPointResult fp = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{0.05}});
    CHECK(fp.converged);
    // residual of one more application
    const WeightedPath again = contraction_step(F.cfg, F.rs, F.f, Vecc{cplx{0.05}}, fp.path);
    CHECK(path_diff_norm(again, fp.path, F.rs) <= 2e-8);
    // geometric increments
    for (std::size_t i = 1; i < fp.increments.size(); ++i)
        CHECK(fp.increments[i] <= 0.6 * fp.increments[i - 1] + 1e-12);
}

TEST_CASE("fixed point Lipschitz in the anchor")
{
    const auto& F = fx();
    Rng rng(31);
    for (int i = 0; i < 5; ++i) {
        const double z1 = rng.uniform(-0.05, 0.05), z2 = rng.uniform(-0.05, 0.05);
        const auto fp1 = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{z1}});
        const auto fp2 = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{z2}});
        const double dpsi = std::abs(z1 - z2) * segment_norm(F.rs.center_basis.columns[0]);
        CHECK(path_diff_norm(fp1.path, fp2.path, F.rs) <= 2.0 * F.rs.C_est * dpsi + 1e-9);
    }
}

TEST_CASE("translation identity of the fixed point")
{
    const auto& F = fx();
    const Vecc psi{cplx{0.04}};
    const auto fp = solve_center_fixed_point(F.cfg, F.rs, F.f, psi);
    const PathGrid pg = fp.path.pg;

    for (double tau : {0.5, -0.5, 2.0}) {
        const long shift = std::lround(tau / pg.h);
        const std::size_t p_tau = pg.M + shift;
        // anchor coordinate at time tau
        const Vecc psi2{fp.path.z[p_tau]};
        const auto fp2 = solve_center_fixed_point(F.cfg, F.rs, F.f, psi2);
        // compare on overlapping interior nodes
        Segment a(F.g, 1), b(F.g, 1);
        double worst = 0;
        for (long q = -200; q <= 200; q += 40) {
            const std::size_t pa = pg.M + shift + q, pb = pg.M + q;
            path_segment(fp.path, F.rs, pa, a);
            path_segment(fp2.path, F.rs, pb, b);
            worst = std::max(worst, segment_norm_diff(a, b));
        }
        CHECK(worst <= 5e-6);
    }
}

TEST_CASE("graph map: zero at zero and cubic-order tangency")
{
    const auto& F = fx();
    const auto fp0 = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{0.0}});
    CHECK(segment_norm(center_map(F.rs, fp0.path)) <= 1e-8);

    std::vector<double> ss{0.1, 0.05, 0.025}, norms;
    for (double s : ss) {
        const auto fp = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{s}});
        norms.push_back(segment_norm(center_map(F.rs, fp.path)));
    }
    // log-log slope
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < ss.size(); ++i) {
        const double x = std::log(ss[i]), y = std::log(std::max(norms[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
    CHECK(slope >= 1.5);
}

TEST_CASE("graph Lipschitz bound on a 50-pair sample")
{
    const auto& F = fx();
    CenterManifoldMap map(F.cfg, F.rs, F.f, 0.06, 1e-9, 0.01);
    const double col = segment_norm(F.rs.center_basis.columns[0]);
    const double bound = std::max(F.cfg.L_formula_working, map.measured_lipschitz() * 1.3) + 0.05;
    Rng rng(51);
    for (int i = 0; i < 50; ++i) {
        const double z1 = rng.uniform(-0.06, 0.06), z2 = rng.uniform(-0.06, 0.06);
        if (std::abs(z1 - z2) < 1e-4)
            continue;
        const double dF = segment_norm_diff(map.evaluate(Vecc{cplx{z1}}),
                                            map.evaluate(Vecc{cplx{z2}}));
        CHECK(dF <= bound * std::abs(z1 - z2) * col);
    }
}

TEST_CASE("fixed point extracts to a trajectory of the cutoff equation")
{
    const auto& F = fx();
    const Vecc psi{cplx{0.05}};
    const auto fp = solve_center_fixed_point(F.cfg, F.rs, F.f, psi);
    const PathGrid pg = fp.path.pg;

    Segment x0(F.g, 1);
    path_segment(fp.path, F.rs, pg.M, x0);
    NonlinearityModel fdelta;
    fdelta.form = NonlinearityModel::Form::custom;
    fdelta.eval = [&](const Segment& phi) { return cutoff_apply(F.cfg, F.rs, F.f, phi); };
    const Trajectory tr = solve_nonlinear(F.rs.tables, 0.0, x0, fdelta, 5.0);

    Segment a(F.g, 1);
    for (std::size_t j = 0; j <= tr.steps(); j += 32) {
        path_segment(fp.path, F.rs, pg.M + j, a);
        CHECK(segment_norm_diff(a, tr.segment_at(j)) <= 50.0 * F.g.h * F.g.h + 1e-6);
    }
}

TEST_CASE("tangent map at the origin is the reduced flow")
{
    const auto& F = fx();
    const auto fp0 = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{0.0}});
    const TangentMap tm = tangent_map(F.cfg, F.rs, F.f, Vecc{cplx{0.0}}, fp0.path);
    REQUIRE(tm.columns.size() == 1);
    const PathGrid pg = fp0.path.pg;
    const WeightedPath flow = initial_center_path(pg, F.rs, Vecc{cplx{1.0}});
    CHECK(path_diff_norm(tm.columns[0], flow, F.rs) <= 1e-9);

    // DF(0) = P_su of the column at t=0 vanishes
    Segment at0(F.g, 1);
    path_segment(tm.columns[0], F.rs, pg.M, at0);
    const Segment su = F.rs.project_su(at0);
    CHECK(segment_norm(su) <= 1e-6);
}

TEST_CASE("tangent map matches one-sided differences at first order")
{
    const auto& F = fx();
    const Vecc psi{cplx{0.04}};
    const auto fp = solve_center_fixed_point(F.cfg, F.rs, F.f, psi, 1e-12);
    const TangentMap tm = tangent_map(F.cfg, F.rs, F.f, psi, fp.path);

    auto fd_error = [&](double s) {
        const auto fps = solve_center_fixed_point(F.cfg, F.rs, F.f, Vecc{cplx{0.04 + s}},
                                                  1e-12, 400, &fp.path);
        WeightedPath diff = fps.path;
        diff.axpy(cplx{-1.0}, fp.path);
        diff.axpy(cplx{-s}, tm.columns[0]);
        // measure in a slightly larger exponent, as the smoothness requires
        WeightedPath scaled = diff;
        const double eta_prime = 0.5 * (F.cfg.eta + F.rs.alpha);
        double worst = 0;
        Segment seg(F.g, 1);
        for (std::size_t p = 0; p < scaled.pg.nodes(); ++p) {
            path_segment(scaled, F.rs, p, seg);
            worst = std::max(worst,
                             segment_norm(seg) * std::exp(-eta_prime
                                                          * std::abs(scaled.pg.time_of(p))));
        }
        return worst / s;
    };
    const double e1 = fd_error(1e-2);
    const double e2 = fd_error(1e-3);
    CHECK(e2 < e1); // first-order remainder shrinks with s
    CHECK(e1 / e2 > 3.0);
    CHECK(e1 / e2 < 30.0);
}

TEST_CASE("attractivity diagnostics on and off the manifold")
{
    const auto& F = fx();
    CenterManifoldMap map(F.cfg, F.rs, F.f, 0.06, 1e-9, 0.01);

    // start exactly on the graph: xi stays at solver-noise level
    Segment on = map.evaluate(Vecc{cplx{0.04}});
    F.rs.add_center_part(Vecc{cplx{0.04}}, on);
    NonlinearityModel fdelta;
    fdelta.form = NonlinearityModel::Form::custom;
    fdelta.eval = [&](const Segment& phi) { return cutoff_apply(F.cfg, F.rs, F.f, phi); };
    const Trajectory tr_on = solve_nonlinear(F.rs.tables, 0.0, on, fdelta, 8.0);
    const auto diag_on = attractivity_diagnostics(F.cfg, F.rs, map, tr_on, 0.5);
    double worst = 0;
    for (double v : diag_on.xi_norms)
        worst = std::max(worst, v);
    CHECK(worst <= 1e-4);

    // start off the manifold: xi decays and obeys the certified envelope
    Segment off = on;
    Rng rng(41);
    Segment bump = F.rs.project_su(random_segment(F.g, 1, rng));
    off.add_scaled(cplx{0.01 / segment_norm(bump)}, bump);
    const Trajectory tr_off = solve_nonlinear(F.rs.tables, 0.0, off, fdelta, 10.0);
    const auto diag_off = attractivity_diagnostics(F.cfg, F.rs, map, tr_off, 0.5);
    CHECK(diag_off.fitted_rate < -0.5 * F.cfg.certified.beta0);
    CHECK(diag_off.satisfied);
    CHECK(diag_off.stayed_in_domain);
}

TEST_CASE("hyperbolic maps: trivial stable graph and unstable tangency")
{
    // nu = 1/2: no unstable set, so the stable graph map is identically zero
    {
        const KernelModel k = scalar_exp(0.5, 0.75);
        const Grid g = make_grid(1.0 / 32, 25.0, 0.75);
        const auto s = find_characteristic_roots(k, default_search_rect(k));
        ReducedSystem rs = reduced_matrices(k, g, s);
        const auto est = estimate_decomposition_constants(rs, rs.alpha, Rng(6), 12);
        rs.C_est = est.C;
        rs.C1_est = est.C1;
        const auto f = make_cubic_functional(k, g, -1.0);
        SelectDeltaOptions opt;
        opt.delta_override = 0.2;
        const CutoffConfig cfg = select_delta(rs, f, Rng(7), opt);

        Segment psi = constant_segment(g, Vecc{cplx{0.02}});
        psi = rs.project_su(psi);
        const auto res = hyperbolic_map(cfg, rs, f, true, psi, 15.0);
        CHECK(res.converged);
        CHECK(res.graph_norm <= 1e-10);

        // the governing decay rate is the root at -1/2
        const Trajectory tr = solve_nonlinear(rs.tables, 0.0, psi, f, 20.0);
        std::vector<double> ts, ns;
        Segment seg(g, 1);
        for (std::size_t j = 0; j <= tr.steps(); j += 16) {
            tr.segment_at(j, seg);
            ts.push_back(tr.time_at(j));
            ns.push_back(segment_norm(seg));
        }
        CHECK(fit_log_slope(ts, ns) == doctest::Approx(-0.5).epsilon(0.1));
    }
    // nu = 2: unstable graph map with vanishing ratio at the origin
    {
        const KernelModel k = scalar_exp(2.0, 0.5);
        const Grid g = make_grid(1.0 / 32, 25.0, 0.5);
        const auto s = find_characteristic_roots(k, default_search_rect(k));
        ReducedSystem rs = reduced_matrices(k, g, s);
        const auto est = estimate_decomposition_constants(rs, rs.alpha, Rng(8), 12);
        rs.C_est = est.C;
        rs.C1_est = est.C1;
        const auto f = make_cubic_functional(k, g, 1.0);
        SelectDeltaOptions opt;
        opt.delta_override = 0.2;
        const CutoffConfig cfg = select_delta(rs, f, Rng(9), opt);
        REQUIRE(rs.d_u() == 1);

        double prev_ratio = 1e9;
        for (double a : {0.04, 0.02, 0.01}) {
            Segment psi(g, 1);
            rs.add_unstable_part(Vecc{cplx{a}}, psi);
            const auto res = hyperbolic_map(cfg, rs, f, false, psi, 15.0);
            CHECK(res.converged);
            const double ratio = res.graph_norm / segment_norm(psi);
            CHECK(ratio < prev_ratio + 1e-12);
            prev_ratio = ratio;
        }
        CHECK(prev_ratio < 0.05);

        // psi = 0 -> 0
        const auto res0 = hyperbolic_map(cfg, rs, f, false, Segment(g, 1), 15.0);
        CHECK(res0.graph_norm <= 1e-10);
    }
}

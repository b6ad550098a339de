#include "cmred/manifold.hpp"

#include "cmred/errors.hpp"

#include <cmath>

namespace cmred {

double CutoffConfig::chi(double t)
{
    t = std::abs(t);
    if (t <= 2.0)
        return 1.0;
    if (t >= 3.0)
        return 0.0;
    const double u = t - 2.0;
    return 1.0 - (u * u * u * (10.0 + u * (-15.0 + 6.0 * u)));
}

namespace {

double chi_of(double t) { return CutoffConfig::chi(t); }

std::vector<Segment> direction_pool(const ReducedSystem& rs, Rng& rng)
{
    const Grid& g = *rs.grid;
    const std::size_t m = rs.kernel.dim;
    std::vector<Segment> dirs;
    for (const auto& col : rs.center_basis.columns)
        dirs.push_back(col);
    for (const auto& col : rs.unstable_basis.columns)
        dirs.push_back(col);
    dirs.push_back(constant_segment(g, Vecc(m, cplx{1.0})));
    dirs.push_back(exponential_segment(g, cplx{0.2, 0.9}, Vecc(m, cplx{1.0})));
    dirs.push_back(exponential_segment(g, cplx{-0.2, 0.0}, Vecc(m, cplx{1.0})));
    dirs.push_back(make_mollifier(g, 8).inject(g, Vecc(m, cplx{1.0})));
    for (int i = 0; i < 6; ++i)
        dirs.push_back(random_segment(g, m, rng));
    // normalize
    for (auto& d : dirs) {
        const double n = segment_norm(d);
        if (n > 1e-14)
            d.scale(1.0 / n);
    }
    return dirs;
}

} // namespace

double estimate_zeta(const ReducedSystem& rs, const NonlinearityModel& f, double delta,
                     Rng rng)
{
    auto dirs = direction_pool(rs, rng);
    double sup_df = 0;
    for (const auto& base : dirs) {
        Segment phi = base;
        phi.scale(3.0 * delta);
        for (const auto& w : dirs) {
            const Vecc d = f.derivative(phi, w);
            sup_df = std::max(sup_df, vec_norm(d));
        }
    }
    return sup_df * (1.0 + 3.0 * CutoffConfig::chi_slope_max);
}

AttractivityConstants attractivity_constants(double C, double C1, double zeta, double L,
                                             double alpha, double eps_gap)
{
    AttractivityConstants a;
    a.K = C * C1 * zeta;
    a.mu = a.K + eps_gap;
    a.mu_prime = a.mu + a.K * L;
    if (a.mu_prime < alpha) {
        a.beta0 = alpha - a.K * (alpha - eps_gap) / (alpha - a.mu_prime);
        a.valid = a.beta0 > 0;
    }
    return a;
}

CutoffConfig select_delta(const ReducedSystem& rs, const NonlinearityModel& f, Rng rng,
                          const SelectDeltaOptions& opt)
{
    CutoffConfig cfg;
    cfg.alpha = rs.alpha;
    cfg.eps_gap = rs.eps_gap;
    cfg.C = rs.C_est;
    cfg.C1 = rs.C1_est;
    cfg.delta1 = opt.delta1;
    cfg.eta = (opt.eta > 0) ? opt.eta : 0.5 * (rs.eps_gap + rs.alpha);
    if (!(rs.eps_gap < cfg.eta && cfg.eta < rs.alpha))
        throw std::invalid_argument("select_delta: eta must lie in (eps_gap, alpha)");

    const double bracket = 1.0 / (cfg.eta - rs.eps_gap) + 2.0 / (rs.alpha + cfg.eta)
                           + 2.0 / (rs.alpha - cfg.eta);
    auto zeta_at = [&](double d) { return estimate_zeta(rs, f, d, rng); };
    auto feasible = [&](double zeta) {
        const double smallness = zeta * cfg.C * cfg.C1 * bracket;
        const double L = 4.0 * cfg.C * cfg.C * cfg.C1 * zeta / (rs.alpha - cfg.eta);
        return smallness < 0.5 && L <= 1.0;
    };

    double hi = opt.delta1, lo = opt.delta1;
    while (!feasible(zeta_at(lo))) {
        hi = lo;
        lo *= 0.5;
        if (lo < 1e-12)
            throw std::runtime_error(
                "select_delta: no admissible radius above 1e-12 (nonlinearity too steep "
                "relative to the estimated constants C, C1)");
    }
    if (hi > lo) { // refine the boundary
        for (int it = 0; it < 30; ++it) {
            const double mid = 0.5 * (hi + lo);
            if (feasible(zeta_at(mid)))
                lo = mid;
            else
                hi = mid;
        }
    }
    cfg.delta_certified = lo;
    cfg.zeta_certified = zeta_at(lo);
    cfg.smallness_lhs = cfg.zeta_certified * cfg.C * cfg.C1 * bracket;
    cfg.L_certified = 4.0 * cfg.C * cfg.C * cfg.C1 * cfg.zeta_certified / (rs.alpha - cfg.eta);
    cfg.certified = attractivity_constants(cfg.C, cfg.C1, cfg.zeta_certified, cfg.L_certified,
                                           rs.alpha, rs.eps_gap);

    cfg.delta = (opt.delta_override > 0) ? opt.delta_override : lo;
    cfg.delta_overridden = opt.delta_override > 0;
    cfg.zeta_working = (cfg.delta == lo) ? cfg.zeta_certified : zeta_at(cfg.delta);
    cfg.M1 = cfg.zeta_working;
    cfg.L_formula_working = 4.0 * cfg.C * cfg.C * cfg.C1 * cfg.zeta_working
                            / (rs.alpha - cfg.eta);
    return cfg;
}

namespace {

// cutoff factors given the two projected norms
double cutoff_factor(const CutoffConfig& cfg, double norm_a, double norm_b)
{
    return chi_of(norm_a / cfg.delta) * chi_of(norm_b / cfg.delta);
}

// projected norms entering the cutoff: {su, c} when a center set exists,
// {u, s} in the hyperbolic case
void cutoff_norms(const ReducedSystem& rs, const Segment& phi, double& a, double& b)
{
    if (rs.d_c() > 0) {
        const Vecc z = rs.center_coords(phi);
        Segment su = phi;
        for (std::size_t i = 0; i < rs.d_c(); ++i)
            su.add_scaled(-z[i], rs.center_basis.columns[i]);
        a = segment_norm(su);
        b = rs.center_norm_of(z);
    } else {
        const Vecc w = rs.unstable_coords(phi);
        Segment s = phi;
        for (std::size_t i = 0; i < rs.d_u(); ++i)
            s.add_scaled(-w[i], rs.unstable_basis.columns[i]);
        Segment u(*rs.grid, rs.kernel.dim);
        rs.add_unstable_part(w, u);
        a = segment_norm(u);
        b = segment_norm(s);
    }
}

Vecc cutoff_apply_known(const CutoffConfig& cfg, const ReducedSystem& rs,
                        const NonlinearityModel& f, const Segment& phi, double norm_a,
                        double norm_b)
{
    const double factor = cutoff_factor(cfg, norm_a, norm_b);
    if (factor == 0.0)
        return Vecc(rs.kernel.dim, cplx{0.0});
    Vecc v = f(phi);
    for (auto& x : v)
        x *= factor;
    return v;
}

} // namespace

Vecc cutoff_apply(const CutoffConfig& cfg, const ReducedSystem& rs, const NonlinearityModel& f,
                  const Segment& phi)
{
    double a, b;
    cutoff_norms(rs, phi, a, b);
    return cutoff_apply_known(cfg, rs, f, phi, a, b);
}

Vecc cutoff_derivative_dir(const CutoffConfig& cfg, const ReducedSystem& rs,
                           const NonlinearityModel& f, const Segment& phi, const Segment& dir)
{
    double a, b;
    cutoff_norms(rs, phi, a, b);
    const double margin = 1e-9;
    if (a <= (2.0 - margin) * cfg.delta && b <= (2.0 - margin) * cfg.delta)
        return f.derivative(phi, dir); // flat region: factors identically 1
    if (a >= (3.0 + margin) * cfg.delta || b >= (3.0 + margin) * cfg.delta)
        return Vecc(rs.kernel.dim, cplx{0.0});
    // cutoff shell: difference the full cutoff composite
    const double dn = segment_norm(dir);
    if (dn < 1e-14)
        return Vecc(rs.kernel.dim, cplx{0.0});
    const double step = 1e-6 * (1.0 + segment_norm(phi)) / dn;
    Segment plus = phi, minus = phi;
    plus.add_scaled(cplx{step}, dir);
    minus.add_scaled(cplx{-step}, dir);
    const Vecc fp = cutoff_apply(cfg, rs, f, plus);
    const Vecc fm = cutoff_apply(cfg, rs, f, minus);
    Vecc d(fp.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = (fp[i] - fm[i]) / (2.0 * step);
    return d;
}

PathGrid make_path_grid(const Grid& g, double eta, double alpha, double tail_tol, double t_cap)
{
    PathGrid pg;
    pg.h = g.h;
    pg.eta = eta;
    const double T = std::min(t_cap, std::log(1.0 / tail_tol) / std::max(1e-6, alpha - eta));
    pg.M = std::max<std::size_t>(4, std::size_t(std::ceil(T / g.h)));
    return pg;
}

WeightedPath alloc_path(const PathGrid& pg, std::size_t dc, std::size_t du, std::size_t m)
{
    WeightedPath y;
    y.pg = pg;
    y.dc = dc;
    y.du = du;
    y.m = m;
    const std::size_t nodes = pg.nodes();
    y.z.assign(nodes * dc, cplx{0.0});
    y.w.assign(nodes * du, cplx{0.0});
    y.zeta.assign(nodes * dc, cplx{0.0});
    y.omega.assign(nodes * du, cplx{0.0});
    y.xfs.assign(m, std::vector<cplx>(nodes, cplx{0.0}));
    return y;
}

void WeightedPath::axpy(cplx a, const WeightedPath& o)
{
    simd::axpy(a, o.z.data(), z.data(), z.size());
    simd::axpy(a, o.w.data(), w.data(), w.size());
    simd::axpy(a, o.zeta.data(), zeta.data(), zeta.size());
    simd::axpy(a, o.omega.data(), omega.data(), omega.size());
    for (std::size_t c = 0; c < xfs.size(); ++c)
        simd::axpy(a, o.xfs[c].data(), xfs[c].data(), xfs[c].size());
}

void refresh_forced_coords(WeightedPath& y, const ReducedSystem& rs)
{
    Segment scratch(*rs.grid, y.m);
    WeightedPath probe = y;
    std::fill(probe.z.begin(), probe.z.end(), cplx{0.0});
    std::fill(probe.w.begin(), probe.w.end(), cplx{0.0});
    std::fill(probe.zeta.begin(), probe.zeta.end(), cplx{0.0});
    std::fill(probe.omega.begin(), probe.omega.end(), cplx{0.0});
    for (std::size_t p = 0; p < y.pg.nodes(); ++p) {
        path_segment(probe, rs, p, scratch);
        if (y.dc) {
            const Vecc zc = rs.center_coords(scratch);
            for (std::size_t i = 0; i < y.dc; ++i)
                y.zeta[p * y.dc + i] = zc[i];
        }
        if (y.du) {
            const Vecc wu = rs.unstable_coords(scratch);
            for (std::size_t i = 0; i < y.du; ++i)
                y.omega[p * y.du + i] = wu[i];
        }
    }
}

WeightedPath initial_center_path(const PathGrid& pg, const ReducedSystem& rs, const Vecc& psi)
{
    WeightedPath y = alloc_path(pg, rs.d_c(), rs.d_u(), rs.kernel.dim);
    for (std::size_t p = 0; p < pg.nodes(); ++p) {
        const Vecc zp = ReducedSystem::propagate(rs.center_basis.lambdas, pg.time_of(p), psi);
        for (std::size_t i = 0; i < rs.d_c(); ++i)
            y.z[p * rs.d_c() + i] = zp[i];
    }
    return y;
}

void path_segment(const WeightedPath& y, const ReducedSystem& rs, std::size_t p, Segment& out)
{
    const Grid& g = *rs.grid;
    for (std::size_t c = 0; c < y.m; ++c) {
        cplx* o = out.plane(c);
        const std::vector<cplx>& st = y.xfs[c];
        const std::size_t take = std::min(p + 1, g.n + 1);
        for (std::size_t l = 0; l < take; ++l)
            o[l] = st[p - l];
        for (std::size_t l = take; l <= g.n; ++l)
            o[l] = cplx{0.0};
    }
    for (std::size_t i = 0; i < y.dc; ++i)
        out.add_scaled(y.z[p * y.dc + i] - y.zeta[p * y.dc + i], rs.center_basis.columns[i]);
    for (std::size_t i = 0; i < y.du; ++i)
        out.add_scaled(y.w[p * y.du + i] - y.omega[p * y.du + i], rs.unstable_basis.columns[i]);
    out.set_has_point_value(true);
}

double path_norm(const WeightedPath& y, const ReducedSystem& rs)
{
    Segment scratch(*rs.grid, y.m);
    double best = 0;
    for (std::size_t p = 0; p < y.pg.nodes(); ++p) {
        path_segment(y, rs, p, scratch);
        best = std::max(best, segment_norm(scratch) * y.pg.weight(p));
    }
    return best;
}

double path_diff_norm(const WeightedPath& a, const WeightedPath& b, const ReducedSystem& rs)
{
    Segment sa(*rs.grid, a.m), sb(*rs.grid, a.m);
    double best = 0;
    for (std::size_t p = 0; p < a.pg.nodes(); ++p) {
        path_segment(a, rs, p, sa);
        path_segment(b, rs, p, sb);
        sa.add_scaled(cplx{-1.0}, sb);
        best = std::max(best, segment_norm(sa) * a.pg.weight(p));
    }
    return best;
}

namespace {

// shared core of the contraction map and the tangent operator: given the
// per-node forcing values q_p = (m-vector), produce the output path
//   center coords   z(t) = e^{tG_c} psi + int_0^t e^{(t-s)G_c} H_c q(s) ds
//   unstable coords w(t) = -int_t^T e^{(t-s)G_u} H_u q(s) ds
//   stable part     P_s [forced solve from -T with forcing q]
WeightedPath assemble_from_forcing(const ReducedSystem& rs, const PathGrid& pg,
                                   const Vecc* psi, const std::vector<Vecc>& q)
{
    const Grid& g = *rs.grid;
    const std::size_t m = rs.kernel.dim, dc = rs.d_c(), du = rs.d_u();
    const std::size_t nodes = pg.nodes();
    WeightedPath out = alloc_path(pg, dc, du, m);

    // forced solve driven by the forcing table
    const double t0 = pg.time_of(0);
    auto forcing = [&](double t) {
        const std::size_t idx = std::size_t(std::llround((t - t0) / pg.h));
        return q[std::min(idx, nodes - 1)];
    };
    {
        const std::function<Vecc(double)> fwrap = forcing;
        const Segment zero(g, m);
        const Trajectory fs = run_linear_trajectory(rs.tables, zero, t0, &fwrap, nodes - 1);
        for (std::size_t c = 0; c < m; ++c) {
            const cplx* st = fs.plane(c);
            std::copy(st, st + nodes, out.xfs[c].begin());
        }
    }

    // coordinates of the forced part per node
    {
        Segment scratch(g, m);
        WeightedPath probe = out; // z == zeta == 0 so path_segment yields the raw splice
        for (std::size_t p = 0; p < nodes; ++p) {
            path_segment(probe, rs, p, scratch);
            if (dc) {
                const Vecc zc = rs.center_coords(scratch);
                for (std::size_t i = 0; i < dc; ++i)
                    out.zeta[p * dc + i] = zc[i];
            }
            if (du) {
                const Vecc wu = rs.unstable_coords(scratch);
                for (std::size_t i = 0; i < du; ++i)
                    out.omega[p * du + i] = wu[i];
            }
        }
    }

    // center coordinates by exact-exponential trapezoid from t = 0
    if (dc) {
        std::vector<Vecc> qc(nodes);
        for (std::size_t p = 0; p < nodes; ++p)
            qc[p] = rs.H_c * q[p];
        const std::size_t p0 = pg.M;
        Vecc zc = psi ? *psi : Vecc(dc, cplx{0.0});
        for (std::size_t i = 0; i < dc; ++i)
            out.z[p0 * dc + i] = zc[i];
        // forward
        Vecc cur = zc;
        for (std::size_t p = p0; p + 1 < nodes; ++p) {
            for (std::size_t i = 0; i < dc; ++i) {
                const cplx e = std::exp(rs.center_basis.lambdas[i] * pg.h);
                cur[i] = e * cur[i] + 0.5 * pg.h * (e * qc[p][i] + qc[p + 1][i]);
                out.z[(p + 1) * dc + i] = cur[i];
            }
        }
        // backward
        cur = zc;
        for (std::size_t p = p0; p > 0; --p) {
            for (std::size_t i = 0; i < dc; ++i) {
                const cplx e = std::exp(-rs.center_basis.lambdas[i] * pg.h);
                cur[i] = e * cur[i] - 0.5 * pg.h * (e * qc[p][i] + qc[p - 1][i]);
                out.z[(p - 1) * dc + i] = cur[i];
            }
        }
    }

    // unstable coordinates backward from the dropped tail at +T
    if (du) {
        std::vector<Vecc> qu(nodes);
        for (std::size_t p = 0; p < nodes; ++p)
            qu[p] = rs.H_u * q[p];
        Vecc cur(du, cplx{0.0});
        for (std::size_t i = 0; i < du; ++i)
            out.w[(nodes - 1) * du + i] = 0.0;
        for (std::size_t p = nodes - 1; p > 0; --p) {
            for (std::size_t i = 0; i < du; ++i) {
                const cplx e = std::exp(-rs.unstable_basis.lambdas[i] * pg.h);
                cur[i] = e * cur[i] - 0.5 * pg.h * (qu[p - 1][i] + e * qu[p][i]);
                out.w[(p - 1) * du + i] = cur[i];
            }
        }
    }
    return out;
}

// forcing table q_p = f_delta(y(t_p))
std::vector<Vecc> cutoff_forcing(const CutoffConfig& cfg, const ReducedSystem& rs,
                                 const NonlinearityModel& f, const WeightedPath& y)
{
    const Grid& g = *rs.grid;
    const std::size_t nodes = y.pg.nodes(), dc = rs.d_c();
    std::vector<Vecc> q(nodes);
    Segment full(g, y.m), rest(g, y.m);
    for (std::size_t p = 0; p < nodes; ++p) {
        path_segment(y, rs, p, full);
        if (dc) {
            // center coords of y are its stored z by construction
            Vecc zp(dc);
            for (std::size_t i = 0; i < dc; ++i)
                zp[i] = y.z[p * dc + i];
            rest = full;
            for (std::size_t i = 0; i < dc; ++i)
                rest.add_scaled(-zp[i], rs.center_basis.columns[i]);
            q[p] = cutoff_apply_known(cfg, rs, f, full, segment_norm(rest),
                                      rs.center_norm_of(zp));
        } else {
            double a, b;
            cutoff_norms(rs, full, a, b);
            q[p] = cutoff_apply_known(cfg, rs, f, full, a, b);
        }
    }
    return q;
}

} // namespace

WeightedPath contraction_step(const CutoffConfig& cfg, const ReducedSystem& rs,
                              const NonlinearityModel& f, const Vecc& psi,
                              const WeightedPath& y)
{
    const std::vector<Vecc> q = cutoff_forcing(cfg, rs, f, y);
    return assemble_from_forcing(rs, y.pg, &psi, q);
}

FixedPointResult solve_center_fixed_point(const CutoffConfig& cfg, const ReducedSystem& rs,
                                          const NonlinearityModel& f, const Vecc& psi,
                                          double fp_tol, std::size_t max_iter,
                                          const WeightedPath* warm_start)
{
    const PathGrid pg = warm_start ? warm_start->pg
                                   : make_path_grid(*rs.grid, cfg.eta, rs.alpha,
                                                    cfg.path_tail_tol,
                                                    cfg.t_path > 0 ? cfg.t_path : 60.0);
    FixedPointResult res;
    res.path = warm_start ? *warm_start : initial_center_path(pg, rs, psi);
    if (warm_start) {
        // re-anchor the warm start at the requested coordinate
        const std::size_t dc = rs.d_c(), p0 = pg.M;
        Vecc shift(dc);
        for (std::size_t i = 0; i < dc; ++i)
            shift[i] = psi[i] - res.path.z[p0 * dc + i];
        for (std::size_t p = 0; p < pg.nodes(); ++p) {
            const Vecc sp = ReducedSystem::propagate(rs.center_basis.lambdas, pg.time_of(p), shift);
            for (std::size_t i = 0; i < dc; ++i)
                res.path.z[p * dc + i] += sp[i];
        }
    }

    for (std::size_t it = 0; it < max_iter; ++it) {
        WeightedPath next = contraction_step(cfg, rs, f, psi, res.path);
        const double inc = path_diff_norm(next, res.path, rs);
        res.increments.push_back(inc);
        res.path = std::move(next);
        ++res.iterations;
        if (inc <= fp_tol) {
            res.converged = true;
            return res;
        }
    }
    throw FixedPointError(
        "solve_center_fixed_point: no convergence after " + std::to_string(max_iter) +
        " sweeps (last increment " + std::to_string(res.increments.back()) +
        "); the empirical constants C/C1 or the working radius delta are likely too large");
}

Segment center_map(const ReducedSystem& rs, const WeightedPath& fixed_path)
{
    const std::size_t p0 = fixed_path.pg.M;
    Segment out(*rs.grid, fixed_path.m);
    path_segment(fixed_path, rs, p0, out);
    for (std::size_t i = 0; i < fixed_path.dc; ++i)
        out.add_scaled(-fixed_path.z[p0 * fixed_path.dc + i], rs.center_basis.columns[i]);
    return out;
}

TangentMap tangent_map(const CutoffConfig& cfg, const ReducedSystem& rs,
                       const NonlinearityModel& f, const Vecc& /*psi*/,
                       const WeightedPath& fixed_path, double term_tol)
{
    const PathGrid pg = fixed_path.pg;
    const std::size_t dc = rs.d_c(), nodes = pg.nodes();
    TangentMap tm;

    // materialize the fixed path once per node for the derivative evaluations
    std::vector<Segment> lam;
    lam.reserve(nodes);
    for (std::size_t p = 0; p < nodes; ++p) {
        Segment s(*rs.grid, fixed_path.m);
        path_segment(fixed_path, rs, p, s);
        lam.push_back(std::move(s));
    }

    for (std::size_t col = 0; col < dc; ++col) {
        Vecc e(dc, cplx{0.0});
        e[col] = 1.0;
        WeightedPath total = initial_center_path(pg, rs, e);
        WeightedPath term = total;
        double prev_norm = path_norm(term, rs);
        for (int k = 0; k < 200; ++k) {
            // term <- H(v) term with v the cutoff derivative along the fixed path
            std::vector<Vecc> q(nodes);
            Segment dir(*rs.grid, fixed_path.m);
            for (std::size_t p = 0; p < nodes; ++p) {
                path_segment(term, rs, p, dir);
                q[p] = cutoff_derivative_dir(cfg, rs, f, lam[p], dir);
            }
            term = assemble_from_forcing(rs, pg, nullptr, q);
            const double tn = path_norm(term, rs);
            ++tm.terms_used;
            if (tn > 0.9 * prev_norm && tn > term_tol)
                throw FixedPointError("tangent_map: Neumann series stalled (term ratio > 0.9)");
            total.axpy(cplx{1.0}, term);
            if (tn < term_tol)
                break;
            prev_norm = tn;
        }
        tm.columns.push_back(std::move(total));
    }
    return tm;
}

CenterManifoldMap::CenterManifoldMap(const CutoffConfig& cfg, const ReducedSystem& rs,
                                     const NonlinearityModel& f, double radius, double fp_tol,
                                     double spacing_hint)
    : cfg_(cfg), rs_(rs), f_(f), radius_(radius), fp_tol_(fp_tol)
{
    bool real_line = rs.d_c() == 1 && std::abs(rs.center_basis.lambdas[0].imag()) < 1e-10;
    lattice_enabled_ = real_line;
    if (!lattice_enabled_)
        return;

    spacing_ = (spacing_hint > 0) ? spacing_hint : radius_ / 20.0;
    const long L = std::lround(radius_ / spacing_);
    radius_ = double(L) * spacing_;

    // warm-started sweeps outward from 0 in both directions
    std::vector<LatticeNode> plus, minus;
    for (int sign : {+1, -1}) {
        const WeightedPath* warm = nullptr;
        WeightedPath prev;
        for (long k = (sign > 0 ? 0 : -1); std::labs(k) <= L && (sign > 0 || k >= -L);
             k += sign) {
            const double zc = double(k) * spacing_;
            FixedPointResult fp = solve_center_fixed_point(cfg_, rs_, f_, Vecc{cplx{zc}},
                                                           fp_tol_, 200, warm);
            total_iterations_ += fp.iterations;
            LatticeNode node;
            node.zc = zc;
            node.graph = center_map(rs_, fp.path);
            node.graph_norm = segment_norm(node.graph);
            (sign > 0 ? plus : minus).push_back(std::move(node));
            prev = std::move(fp.path);
            warm = &prev;
        }
    }
    nodes_.reserve(plus.size() + minus.size());
    for (auto it = minus.rbegin(); it != minus.rend(); ++it)
        nodes_.push_back(std::move(*it));
    for (auto& n : plus)
        nodes_.push_back(std::move(n));

    const double col_norm = segment_norm(rs_.center_basis.columns[0]);
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
        const double dz = nodes_[i + 1].zc - nodes_[i].zc;
        const double dF = segment_norm_diff(nodes_[i + 1].graph, nodes_[i].graph);
        const double lip = dF / (std::abs(dz) * col_norm);
        nodes_[i].lip_local = lip;
        measured_lipschitz_ = std::max(measured_lipschitz_, lip);
    }
    if (!nodes_.empty())
        nodes_.back().lip_local = nodes_.size() > 1 ? nodes_[nodes_.size() - 2].lip_local : 0.0;
}

Segment CenterManifoldMap::solve_at(const Vecc& psi, const WeightedPath* warm) const
{
    FixedPointResult fp = solve_center_fixed_point(cfg_, rs_, f_, psi, fp_tol_, 200, warm);
    return center_map(rs_, fp.path);
}

Segment CenterManifoldMap::evaluate(const Vecc& psi) const
{
    if (lattice_enabled_ && nodes_.size() >= 2) {
        const double zc = psi[0].real();
        if (std::abs(zc) <= radius_ + 1e-12) {
            const double pos = (zc + radius_) / spacing_;
            std::size_t i = std::min<std::size_t>(nodes_.size() - 2,
                                                  std::size_t(std::max(0.0, std::floor(pos))));
            const double frac = std::clamp(pos - double(i), 0.0, 1.0);
            Segment out = nodes_[i].graph;
            out.scale(cplx{1.0 - frac});
            out.add_scaled(cplx{frac}, nodes_[i + 1].graph);
            return out;
        }
    }
    // memoized direct solve
    std::vector<long long> key(psi.size() * 2);
    const double quant = (spacing_ > 0 ? spacing_ : 1e-4) / 64.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        key[2 * i] = std::llround(psi[i].real() / quant);
        key[2 * i + 1] = std::llround(psi[i].imag() / quant);
    }
    {
        std::lock_guard<std::mutex> lock(memo_mutex_);
        auto it = memo_.find(key);
        if (it != memo_.end())
            return it->second;
    }
    Segment val = solve_at(psi, nullptr);
    std::lock_guard<std::mutex> lock(memo_mutex_);
    return memo_.emplace(std::move(key), std::move(val)).first->second;
}

double CenterManifoldMap::graph_norm(const Vecc& psi) const
{
    return segment_norm(evaluate(psi));
}

void CenterManifoldMap::cache_linear_functional(const std::function<cplx(const Segment&)>& lin)
{
    for (auto& n : nodes_)
        n.lin_value = lin(n.graph);
}

cplx CenterManifoldMap::lattice_linear_value(double zreal) const
{
    if (!lattice_enabled_ || nodes_.size() < 2)
        throw std::logic_error("lattice_linear_value: no lattice");
    const double zc = std::clamp(zreal, -radius_, radius_);
    const double pos = (zc + radius_) / spacing_;
    std::size_t i = std::min<std::size_t>(nodes_.size() - 2,
                                          std::size_t(std::max(0.0, std::floor(pos))));
    const double frac = std::clamp(pos - double(i), 0.0, 1.0);
    return (1.0 - frac) * nodes_[i].lin_value + frac * nodes_[i + 1].lin_value;
}

double fit_log_slope(const std::vector<double>& t, const std::vector<double>& y,
                     double floor_val)
{
    double st = 0, sy = 0, stt = 0, sty = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (y[i] <= floor_val)
            continue;
        const double ly = std::log(y[i]);
        st += t[i];
        sy += ly;
        stt += t[i] * t[i];
        sty += t[i] * ly;
        ++n;
    }
    if (n < 2)
        return 0.0;
    const double denom = double(n) * stt - st * st;
    if (std::abs(denom) < 1e-300)
        return 0.0;
    return (double(n) * sty - st * sy) / denom;
}

AttractivityDiagnostics attractivity_diagnostics(const CutoffConfig& cfg,
                                                 const ReducedSystem& rs,
                                                 const CenterManifoldMap& map,
                                                 const Trajectory& tr, double omega_radius,
                                                 double slack)
{
    if (rs.d_u() > 0)
        throw std::invalid_argument("attractivity_diagnostics: requires an empty unstable set");
    AttractivityDiagnostics d;
    d.bounds = cfg.certified;

    const Grid& g = *rs.grid;
    Segment seg(g, rs.kernel.dim);
    for (std::size_t j = 0; j <= tr.steps(); ++j) {
        tr.segment_at(j, seg);
        Vecc z = rs.center_coords(seg);
        Segment su = seg;
        for (std::size_t i = 0; i < rs.d_c(); ++i)
            su.add_scaled(-z[i], rs.center_basis.columns[i]);
        const double su_norm = segment_norm(su);
        const double c_norm = rs.center_norm_of(z);
        if ((su_norm >= cfg.delta || c_norm >= omega_radius) && d.first_exit_time < 0) {
            d.stayed_in_domain = false;
            d.first_exit_time = tr.time_at(j) - tr.t0();
        }
        const Segment F = map.evaluate(z);
        su.add_scaled(cplx{-1.0}, F);
        d.times.push_back(tr.time_at(j) - tr.t0());
        d.xi_norms.push_back(segment_norm(su));
    }
    d.fitted_rate = fit_log_slope(d.times, d.xi_norms, 1e-13);

    const double xi0 = d.xi_norms.empty() ? 0.0 : d.xi_norms.front();
    d.satisfied = d.bounds.valid;
    for (std::size_t i = 0; i < d.times.size() && d.satisfied; ++i) {
        const double envelope = slack * cfg.C * xi0 * std::exp(-d.bounds.beta0 * d.times[i]);
        if (d.xi_norms[i] > envelope + 1e-12)
            d.satisfied = false;
    }
    return d;
}

HyperbolicResult hyperbolic_map(const CutoffConfig& cfg, const ReducedSystem& rs,
                                const NonlinearityModel& f, bool stable_branch,
                                const Segment& psi_part, double t_span, double fp_tol,
                                std::size_t max_iter)
{
    if (rs.d_c() > 0)
        throw std::invalid_argument("hyperbolic_map: center set must be empty");
    const Grid& g = *rs.grid;
    const std::size_t m = rs.kernel.dim, du = rs.d_u();
    const std::size_t M = std::max<std::size_t>(4, std::size_t(std::ceil(t_span / g.h)));
    const std::size_t nodes = M + 1;
    const double beta = 0.5 * rs.alpha;

    // time of node p: stable branch t = p h; unstable branch t = (p - M) h
    auto node_time = [&](std::size_t p) {
        return stable_branch ? double(p) * g.h : (double(p) - double(M)) * g.h;
    };
    auto node_weight = [&](std::size_t p) { return std::exp(beta * std::abs(node_time(p))); };

    // homogeneous propagation of the base point (stable branch only)
    std::vector<std::vector<cplx>> hom(m, std::vector<cplx>(nodes, cplx{0.0}));
    Segment hom_init(g, m);
    if (stable_branch) {
        hom_init = psi_part;
        const Trajectory tr = run_linear_trajectory(rs.tables, hom_init, 0.0, nullptr, M);
        for (std::size_t c = 0; c < m; ++c)
            std::copy(tr.plane(c), tr.plane(c) + nodes, hom[c].begin());
    }

    // state: forced values, unstable correction coords per node
    std::vector<std::vector<cplx>> xfs(m, std::vector<cplx>(nodes, cplx{0.0}));
    std::vector<cplx> wco(nodes * std::max<std::size_t>(du, 1), cplx{0.0});
    Vecc psi_u = du ? rs.unstable_coords(psi_part) : Vecc{};

    auto materialize = [&](std::size_t p, Segment& out) {
        for (std::size_t c = 0; c < m; ++c) {
            cplx* o = out.plane(c);
            const std::size_t take = std::min(p + 1, g.n + 1);
            for (std::size_t l = 0; l < take; ++l)
                o[l] = xfs[c][p - l] + hom[c][p - l];
            for (std::size_t l = take; l <= g.n; ++l)
                o[l] = stable_branch ? hom_init.at(c, l - p) : cplx{0.0};
        }
        if (du) {
            // replace the unstable component of the raw splice by the w coords
            const Vecc raw = rs.unstable_coords(out);
            for (std::size_t i = 0; i < du; ++i)
                out.add_scaled(wco[p * du + i] - raw[i], rs.unstable_basis.columns[i]);
        }
        out.set_has_point_value(true);
    };

    HyperbolicResult res;
    Segment cur(g, m);
    std::vector<Vecc> q(nodes, Vecc(m, cplx{0.0}));
    double prev_change = -1;
    for (std::size_t it = 0; it < max_iter; ++it) {
        // forcing along the current path
        for (std::size_t p = 0; p < nodes; ++p) {
            materialize(p, cur);
            q[p] = cutoff_apply(cfg, rs, f, cur);
        }
        // forced refresh
        {
            const double t0 = node_time(0);
            auto forcing = [&](double t) {
                const std::size_t idx = std::size_t(std::llround((t - t0) / g.h));
                return q[std::min(idx, nodes - 1)];
            };
            const std::function<Vecc(double)> fwrap = forcing;
            const Segment zero(g, m);
            const Trajectory fs = run_linear_trajectory(rs.tables, zero, t0, &fwrap, M);
            double change = 0;
            for (std::size_t c = 0; c < m; ++c)
                for (std::size_t p = 0; p < nodes; ++p) {
                    change = std::max(change, std::abs(fs.plane(c)[p] - xfs[c][p])
                                                  * node_weight(p));
                    xfs[c][p] = fs.plane(c)[p];
                }
            // unstable coords
            if (du) {
                std::vector<Vecc> qu(nodes);
                for (std::size_t p = 0; p < nodes; ++p)
                    qu[p] = rs.H_u * q[p];
                if (stable_branch) {
                    // w(t) = -int_t^T e^{(t-s)G_u} q_u ds, zero tail at T
                    Vecc curw(du, cplx{0.0});
                    for (std::size_t i = 0; i < du; ++i)
                        wco[(nodes - 1) * du + i] = 0.0;
                    for (std::size_t p = nodes - 1; p > 0; --p)
                        for (std::size_t i = 0; i < du; ++i) {
                            const cplx e = std::exp(-rs.unstable_basis.lambdas[i] * g.h);
                            curw[i] = e * curw[i]
                                      - 0.5 * g.h * (qu[p - 1][i] + e * qu[p][i]);
                            wco[(p - 1) * du + i] = curw[i];
                        }
                } else {
                    // pinned at w(0) = psi_u, integrated backward
                    Vecc curw = psi_u;
                    for (std::size_t i = 0; i < du; ++i)
                        wco[(nodes - 1) * du + i] = psi_u[i];
                    for (std::size_t p = nodes - 1; p > 0; --p)
                        for (std::size_t i = 0; i < du; ++i) {
                            const cplx e = std::exp(-rs.unstable_basis.lambdas[i] * g.h);
                            curw[i] = e * curw[i]
                                      - 0.5 * g.h * (qu[p - 1][i] + e * qu[p][i]);
                            wco[(p - 1) * du + i] = curw[i];
                        }
                }
            }
            ++res.iterations;
            if (change <= fp_tol) {
                res.converged = true;
                break;
            }
            prev_change = change;
            (void)prev_change;
        }
    }
    if (!res.converged)
        throw FixedPointError("hyperbolic_map: no convergence");

    // graph value at the anchor node (t = 0)
    const std::size_t anchor = stable_branch ? 0 : nodes - 1;
    materialize(anchor, cur);
    if (stable_branch) {
        // F^s(psi) = P_u y(0)
        Segment out(g, m);
        if (du) {
            const Vecc wu = rs.unstable_coords(cur);
            rs.add_unstable_part(wu, out);
        }
        res.graph_value = std::move(out);
    } else {
        // F^u(psi) = P_s y(0) = y(0) - P_u y(0)
        Segment out = cur;
        const Vecc wu = rs.unstable_coords(cur);
        for (std::size_t i = 0; i < du; ++i)
            out.add_scaled(-wu[i], rs.unstable_basis.columns[i]);
        res.graph_value = std::move(out);
    }
    res.graph_norm = segment_norm(res.graph_value);
    return res;
}

} // namespace cmred

#include "cmred/phasespace.hpp"

#include <cmath>
#include <stdexcept>

namespace cmred {

Grid make_grid(double h, double theta, double rho)
{
    if (h <= 0 || theta <= 0 || rho <= 0)
        throw std::invalid_argument("make_grid: h, theta, rho must be positive");
    Grid g;
    g.h = h;
    g.rho = rho;
    g.n = std::max<std::size_t>(2, std::size_t(std::llround(theta / h)));
    g.theta = double(g.n) * h;
    g.trap_w.resize(g.n + 1, h);
    g.trap_w.front() = 0.5 * h;
    g.trap_w.back() = 0.5 * h;
    g.norm_w.resize(g.n + 1);
    for (std::size_t k = 0; k <= g.n; ++k)
        g.norm_w[k] = g.trap_w[k] * std::exp(-rho * double(k) * h);
    return g;
}

Segment constant_segment(const Grid& g, const Vecc& value)
{
    Segment s(g, value.size());
    for (std::size_t c = 0; c < value.size(); ++c)
        std::fill_n(s.plane(c), s.nodes(), value[c]);
    s.set_has_point_value(true);
    return s;
}

Segment segment_from(const Grid& g, std::size_t m,
                     const std::function<Vecc(double)>& phi_of_theta)
{
    Segment s(g, m);
    for (std::size_t k = 0; k <= g.n; ++k) {
        const Vecc v = phi_of_theta(-double(k) * g.h);
        for (std::size_t c = 0; c < m; ++c)
            s.at(c, k) = v[c];
    }
    s.set_has_point_value(true);
    return s;
}

Segment exponential_segment(const Grid& g, cplx lambda, const Vecc& v)
{
    Segment s(g, v.size());
    for (std::size_t k = 0; k <= g.n; ++k) {
        const cplx e = std::exp(lambda * (-double(k) * g.h));
        for (std::size_t c = 0; c < v.size(); ++c)
            s.at(c, k) = e * v[c];
    }
    s.set_has_point_value(true);
    return s;
}

Segment random_segment(const Grid& g, std::size_t m, Rng& rng, double scale)
{
    Segment s(g, m);
    // a smooth part plus node-level noise, decaying with the norm weight so
    // the sample actually explores the space rather than the far tail
    for (std::size_t c = 0; c < m; ++c) {
        const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
        const double freq = rng.uniform(0.2, 2.0);
        for (std::size_t k = 0; k <= g.n; ++k) {
            const double th = -double(k) * g.h;
            const double smooth = a * std::cos(freq * th) + b * std::sin(freq * th);
            const double noise = rng.uniform(-0.3, 0.3);
            s.at(c, k) = scale * (smooth + noise) * std::exp(0.25 * g.rho * th);
        }
    }
    s.set_has_point_value(true);
    return s;
}

double segment_norm(const Segment& phi)
{
    const Grid& g = phi.grid();
    if (phi.dim() == 1)
        return simd::wabs_sum(g.norm_w.data(), phi.plane(0), phi.nodes());
    double s = 0;
    for (std::size_t k = 0; k < phi.nodes(); ++k) {
        double q = 0;
        for (std::size_t c = 0; c < phi.dim(); ++c)
            q += std::norm(phi.at(c, k));
        s += g.norm_w[k] * std::sqrt(q);
    }
    return s;
}

double segment_norm_diff(const Segment& a, const Segment& b)
{
    Segment d = a;
    d.add_scaled(cplx{-1.0}, b);
    return segment_norm(d);
}

KernelTables make_kernel_tables(const KernelModel& k, const Grid& g)
{
    k.validate();
    if (std::abs(k.rho - g.rho) > 1e-12)
        throw std::invalid_argument("make_kernel_tables: grid and kernel rho differ");
    KernelTables kt;
    kt.grid = &g;
    kt.m = k.dim;

    // reach: drop kernel nodes once ||K(t)|| is at rounding level relative to
    // its peak; always cover the history window
    double peak = 0;
    for (std::size_t i = 0; i <= 64; ++i)
        peak = std::max(peak, spectral_norm(eval_kernel(k, double(i) * 0.25)));
    double T = 0.25;
    while (T < 1e5 && spectral_norm(eval_kernel(k, T)) > 1e-16 * std::max(peak, 1e-300))
        T += 0.25;
    kt.reach = std::max<std::size_t>(g.n, std::size_t(std::ceil(T / g.h)));

    kt.fwd.assign(kt.m * kt.m, std::vector<cplx>(kt.reach + 1));
    kt.rev.assign(kt.m * kt.m, std::vector<cplx>(kt.reach + 1));
    for (std::size_t j = 0; j <= kt.reach; ++j) {
        const Matc K = eval_kernel(k, double(j) * g.h);
        for (std::size_t r = 0; r < kt.m; ++r)
            for (std::size_t c = 0; c < kt.m; ++c) {
                kt.fwd[r * kt.m + c][j] = K(r, c);
                kt.rev[r * kt.m + c][kt.reach - j] = K(r, c);
            }
    }

    Matc m0 = Matc::identity(kt.m);
    const Matc K0 = eval_kernel(k, 0.0);
    for (std::size_t r = 0; r < kt.m; ++r)
        for (std::size_t c = 0; c < kt.m; ++c)
            m0(r, c) -= 0.5 * g.h * K0(r, c);
    kt.m0_inv = inverse(m0);
    return kt;
}

namespace {

// history contribution at step j: trapezoid of K((j+l)h) phi(-lh) over l
void hist_part(const KernelTables& kt, const Segment& phi, std::size_t j, Vecc& out)
{
    const Grid& g = *kt.grid;
    if (j > kt.reach) {
        std::fill(out.begin(), out.end(), cplx{0.0});
        return;
    }
    const std::size_t L = std::min(g.n, kt.reach - j);
    const double h = g.h;
    for (std::size_t r = 0; r < kt.m; ++r) {
        cplx acc = 0.0;
        for (std::size_t c = 0; c < kt.m; ++c) {
            const cplx* K = kt.fwd_rc(r, c) + j;
            const cplx* ph = phi.plane(c);
            cplx dot = simd::cdot(K, ph, L + 1);
            dot -= 0.5 * (K[0] * ph[0] + K[L] * ph[L]);
            acc += dot;
        }
        out[r] = h * acc;
    }
}

// solution-history contribution at step j, excluding the node at s = t_j
void sol_part(const KernelTables& kt, const Trajectory& tr, std::size_t j, Vecc& out)
{
    const double h = kt.grid->h;
    const std::size_t i0 = (j > kt.reach) ? j - kt.reach : 0;
    const std::size_t len = j - i0; // nodes i0 .. j-1
    for (std::size_t r = 0; r < kt.m; ++r) {
        cplx acc = 0.0;
        for (std::size_t c = 0; c < kt.m; ++c) {
            const cplx* x = tr.plane(c) + i0;
            const cplx* K = kt.rev_rc(r, c) + (kt.reach - j + i0);
            cplx dot = (len > 0) ? simd::cdot(K, x, len) : cplx{0.0};
            if (i0 == 0 && len > 0)
                dot -= 0.5 * K[0] * x[0]; // half weight at the splice node
            acc += dot;
        }
        out[r] = h * acc;
    }
}

} // namespace

Trajectory::Trajectory(const Grid& g, Segment init, double t0, std::size_t steps)
    : grid_(&g), m_(init.dim()), t0_(t0), steps_(steps), init_(std::move(init)),
      states_(m_ * (steps + 1), cplx{0.0})
{
}

Segment Trajectory::segment_at(std::size_t j) const
{
    Segment out(*grid_, m_);
    segment_at(j, out);
    return out;
}

void Trajectory::segment_at(std::size_t j, Segment& out) const
{
    if (j > steps_)
        throw std::out_of_range("Trajectory::segment_at");
    for (std::size_t c = 0; c < m_; ++c) {
        cplx* o = out.plane(c);
        const cplx* st = plane(c);
        const std::size_t take = std::min(j + 1, grid_->n + 1);
        for (std::size_t l = 0; l < take; ++l)
            o[l] = st[j - l];
        for (std::size_t l = take; l <= grid_->n; ++l)
            o[l] = init_.at(c, l - j);
    }
    out.set_has_point_value(true);
}

Trajectory run_linear_trajectory(const KernelTables& kt, const Segment& phi, double sigma,
                                 const std::function<Vecc(double)>* p, std::size_t steps)
{
    const Grid& g = *kt.grid;
    Trajectory tr(g, phi, sigma, steps);
    const std::size_t m = kt.m;
    Vecc hist(m), rest(m), x(m);

    // x(sigma+) = L(phi) + p(sigma); the splice node keeps phi(0) on the
    // history side and x(sigma+) on the solution side
    hist_part(kt, phi, 0, hist);
    if (p) {
        const Vecc p0 = (*p)(sigma);
        for (std::size_t c = 0; c < m; ++c)
            hist[c] += p0[c];
    }
    for (std::size_t c = 0; c < m; ++c)
        tr.plane(c)[0] = hist[c];

    for (std::size_t j = 1; j <= steps; ++j) {
        hist_part(kt, phi, j, hist);
        sol_part(kt, tr, j, rest);
        for (std::size_t c = 0; c < m; ++c)
            rest[c] += hist[c];
        if (p) {
            const Vecc pj = (*p)(sigma + double(j) * g.h);
            for (std::size_t c = 0; c < m; ++c)
                rest[c] += pj[c];
        }
        x = kt.m0_inv * rest;
        for (std::size_t c = 0; c < m; ++c)
            tr.plane(c)[j] = x[c];
    }
    return tr;
}

namespace {

std::size_t snap_steps(const Grid& g, double duration, bool* snapped)
{
    if (duration < 0)
        throw std::invalid_argument("negative time span");
    const double raw = duration / g.h;
    std::size_t j = std::size_t(std::floor(raw + 1e-9));
    if (snapped)
        *snapped = std::abs(raw - double(j)) > 1e-9;
    return j;
}

} // namespace

Segment solve_homogeneous(const KernelTables& kt, const Segment& phi, double t, bool* snapped)
{
    const std::size_t steps = snap_steps(*kt.grid, t, snapped);
    if (steps == 0) {
        Segment out = phi;
        return out;
    }
    return run_linear_trajectory(kt, phi, 0.0, nullptr, steps).segment_at(steps);
}

Segment solve_forced(const KernelTables& kt, double sigma, const Segment& phi,
                     const std::function<Vecc(double)>& p, double t, bool* snapped)
{
    const std::size_t steps = snap_steps(*kt.grid, t - sigma, snapped);
    if (steps == 0)
        return phi;
    return run_linear_trajectory(kt, phi, sigma, &p, steps).segment_at(steps);
}

Trajectory solve_nonlinear(const KernelTables& kt, double sigma, const Segment& phi,
                           const NonlinearityModel& f, double t_end, double blowup_bound)
{
    const Grid& g = *kt.grid;
    const std::size_t steps = snap_steps(g, t_end - sigma, nullptr);
    Trajectory tr(g, phi, sigma, steps);
    const std::size_t m = kt.m;
    Vecc hist(m), rest(m), x(m);
    Segment scratch(g, m);

    hist_part(kt, phi, 0, hist);
    {
        const Vecc f0 = f(phi);
        for (std::size_t c = 0; c < m; ++c)
            tr.plane(c)[0] = hist[c] + f0[c];
    }

    for (std::size_t j = 1; j <= steps; ++j) {
        hist_part(kt, phi, j, hist);
        sol_part(kt, tr, j, rest);

        // predictor segment at t_j: true history at the interior nodes, the
        // theta=0 node (which only carries h/2 quadrature weight inside f)
        // extrapolated from the last two states
        tr.segment_at(j - 1, scratch);
        for (std::size_t c = 0; c < m; ++c) {
            cplx* pl = scratch.plane(c);
            for (std::size_t l = g.n; l >= 1; --l)
                pl[l] = pl[l - 1];
            const cplx xm1 = tr.plane(c)[j - 1];
            pl[0] = (j >= 2) ? 2.0 * xm1 - tr.plane(c)[j - 2] : xm1;
        }

        const Vecc fj = f(scratch);
        for (std::size_t c = 0; c < m; ++c)
            rest[c] += hist[c] + fj[c];
        x = kt.m0_inv * rest;
        double mag = 0;
        for (std::size_t c = 0; c < m; ++c) {
            tr.plane(c)[j] = x[c];
            mag += std::norm(x[c]);
        }
        if (std::sqrt(mag) > blowup_bound)
            throw std::runtime_error("solve_nonlinear: solution escaped the configured bound");
    }
    return tr;
}

Mollifier make_mollifier(const Grid& g, int n)
{
    if (n <= 0)
        throw std::invalid_argument("mollifier order must be positive");
    if (double(n) * g.h > 1.0 + 1e-12)
        throw std::invalid_argument("mollifier support 1/n must cover at least one grid cell (n*h <= 1)");
    Mollifier mol;
    mol.n = n;
    mol.values.assign(g.n + 1, 0.0);
    const double support = 1.0 / double(n);
    for (std::size_t k = 0; k <= g.n; ++k) {
        const double th = -double(k) * g.h;
        if (th >= -support)
            mol.values[k] = 2.0 * double(n) * double(n) * (th + support);
    }
    double mass = 0;
    for (std::size_t k = 0; k <= g.n; ++k)
        mass += g.trap_w[k] * mol.values[k];
    if (mass <= 0)
        throw std::runtime_error("mollifier mass vanished on this grid");
    for (auto& v : mol.values)
        v /= mass;
    return mol;
}

Segment Mollifier::inject(const Grid& g, const Vecc& x) const
{
    Segment s(g, x.size());
    const std::size_t last = std::min<std::size_t>(g.n, std::size_t(std::ceil(1.0 / (n * g.h))) + 1);
    for (std::size_t c = 0; c < x.size(); ++c)
        for (std::size_t k = 0; k <= last; ++k)
            s.at(c, k) = values[k] * x[c];
    s.set_has_point_value(true);
    return s;
}

Segment vcf_segment(const KernelTables& kt, double sigma, const Segment& phi,
                    const std::function<Vecc(double)>& p, double t, int mollifier_n)
{
    const Grid& g = *kt.grid;
    const std::size_t steps = snap_steps(g, t - sigma, nullptr);
    const Mollifier mol = make_mollifier(g, mollifier_n);
    const std::size_t m = kt.m;
    const double tt = sigma + double(steps) * g.h;

    Segment out = solve_homogeneous(kt, phi, double(steps) * g.h);

    // Each T(t-s)(Gamma^n p(s)) splits into the still-untouched transported
    // spike and the induced solution values.  The spike part oscillates on
    // the 1/n scale in s, so it is integrated exactly against the continuous
    // triangle profile; the response part is smooth in s uniformly in n and
    // a trapezoid at the grid step suffices.

    // response: trapezoid over s_i, segments built from computed states only
    for (std::size_t i = 0; i < steps; ++i) {
        const double s = sigma + double(i) * g.h;
        const Segment spike = mol.inject(g, p(s));
        const Trajectory traj = run_linear_trajectory(kt, spike, 0.0, nullptr, steps - i);
        const double w = (i == 0) ? 0.5 * g.h : g.h;
        const std::size_t j = steps - i;
        for (std::size_t c = 0; c < m; ++c) {
            cplx* o = out.plane(c);
            const cplx* st = traj.plane(c);
            const std::size_t kmax = std::min(j - 1, g.n); // strictly v > 0
            for (std::size_t k = 0; k <= kmax; ++k)
                o[k] += w * st[j - k];
        }
    }

    // transport: out(theta_k) += integral Gamma^n(theta_k + t - s) p(s) ds
    const double support = 1.0 / double(mollifier_n);
    auto gamma_cont = [&](double u) {
        return (u >= -support && u <= 0.0)
                   ? 2.0 * double(mollifier_n) * double(mollifier_n) * (u + support)
                   : 0.0;
    };
    for (std::size_t k = 0; k <= g.n; ++k) {
        const double theta = -double(k) * g.h;
        const double s_lo = std::max(sigma, tt + theta);
        const double s_hi = std::min(tt, tt + theta + support);
        if (s_hi <= s_lo)
            continue;
        // composite Simpson over the spike support window
        const int segs = 32;
        const double hs = (s_hi - s_lo) / (2 * segs);
        Vecc acc(m, cplx{0.0});
        for (int q = 0; q <= 2 * segs; ++q) {
            const double s = s_lo + double(q) * hs;
            const double w = (q == 0 || q == 2 * segs) ? 1.0 : (q % 2 ? 4.0 : 2.0);
            const double gval = gamma_cont(theta + tt - s);
            if (gval == 0.0)
                continue;
            const Vecc pv = p(s);
            for (std::size_t c = 0; c < m; ++c)
                acc[c] += w * gval * pv[c];
        }
        for (std::size_t c = 0; c < m; ++c)
            out.at(c, k) += acc[c] * (hs / 3.0);
    }
    return out;
}

NonlinearityModel make_cubic_functional(const KernelModel& k, const Grid& g, double eps,
                                        std::function<cplx(const Segment&)> g_rem)
{
    if (k.dim != 1)
        throw std::invalid_argument("cubic functional requires a scalar kernel");
    // normalize so the base kernel has unit mass, then take its tail integral
    const Matc mass_m = laplace_transform(k, cplx{0.0});
    const cplx mass = mass_m(0, 0);
    if (std::abs(mass) < 1e-14)
        throw std::invalid_argument("cubic functional: kernel has zero mass");
    KernelModel base = k;
    for (auto& t : base.terms)
        t.coeff *= 1.0 / mass;
    const KernelModel phat = tail_integral(base);

    // weight table: norm-free trapezoid of K_hat(k h)
    auto table = std::make_shared<std::vector<cplx>>(g.n + 1);
    for (std::size_t j = 0; j <= g.n; ++j)
        (*table)[j] = g.trap_w[j] * eval_kernel(phat, double(j) * g.h)(0, 0);

    auto J = [table](const Segment& s) {
        return simd::cdot(table->data(), s.plane(0), s.nodes());
    };

    NonlinearityModel f;
    f.form = NonlinearityModel::Form::cubic_functional;
    f.eps_cubic = eps;
    f.linear_functional = J;
    f.eval = [J, eps, g_rem](const Segment& s) {
        const cplx j = J(s);
        cplx v = eps * j * j * j;
        if (g_rem)
            v += g_rem(s);
        return Vecc{v};
    };
    f.deriv_dir = [J, eps, g_rem](const Segment& s, const Segment& w) {
        const cplx j = J(s);
        cplx v = 3.0 * eps * j * j * J(w);
        if (g_rem) {
            // remainder differentiated numerically
            const double step = 1e-6 * (1.0 + segment_norm(s));
            Segment plus = s, minus = s;
            plus.add_scaled(cplx{step}, w);
            minus.add_scaled(cplx{-step}, w);
            v += (g_rem(plus) - g_rem(minus)) / (2.0 * step);
        }
        return Vecc{v};
    };
    return f;
}

Vecc functional_L(const KernelTables& kt, const Segment& phi)
{
    Vecc out(kt.m);
    hist_part(kt, phi, 0, out);
    return out;
}

Vecc functional_L(const KernelModel& k, const Segment& phi)
{
    const KernelTables kt = make_kernel_tables(k, phi.grid());
    return functional_L(kt, phi);
}

} // namespace cmred

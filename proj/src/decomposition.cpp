#include "cmred/decomposition.hpp"

#include "cmred/errors.hpp"

#include <cmath>

namespace cmred {

PairingFunctional::PairingFunctional(const KernelTables& kt, const std::vector<Vecc>& psi_rows)
{
    const Grid& g = *kt.grid;
    const std::size_t n = g.n, m = kt.m;
    nodes_ = n + 1;
    w_.assign(m, std::vector<cplx>(nodes_, cplx{0.0}));

    // <<psi, phi>> = sum_k W_k sum_{l<=k} w_in psi((k-l)h) K(k h) phi(-l h):
    // fold psi and K into a per-node weight on phi
    for (std::size_t k = 1; k <= n; ++k) {
        const double outer = g.trap_w[k];
        for (std::size_t l = 0; l <= k; ++l) {
            const double inner = (l == 0 || l == k) ? 0.5 * g.h : g.h;
            const double wgt = outer * inner;
            const Vecc& prow = psi_rows[k - l];
            for (std::size_t c = 0; c < m; ++c) {
                cplx acc = 0.0;
                for (std::size_t r = 0; r < m; ++r)
                    acc += prow[r] * kt.fwd_rc(r, c)[k];
                w_[c][l] += wgt * acc;
            }
        }
    }
}

cplx PairingFunctional::apply(const Segment& phi) const
{
    cplx s = 0.0;
    for (std::size_t c = 0; c < w_.size(); ++c)
        s += simd::cdot(w_[c].data(), phi.plane(c), nodes_);
    return s;
}

void PairingFunctional::add_scaled(cplx a, const PairingFunctional& other)
{
    if (w_.empty()) {
        w_.assign(other.w_.size(), std::vector<cplx>(other.nodes_, cplx{0.0}));
        nodes_ = other.nodes_;
    }
    for (std::size_t c = 0; c < w_.size(); ++c)
        simd::axpy(a, other.w_[c].data(), w_[c].data(), nodes_);
}

cplx bilinear_form(const KernelTables& kt, const std::function<Vecc(double)>& psi_row,
                   const Segment& phi)
{
    const Grid& g = *kt.grid;
    std::vector<Vecc> rows(g.n + 1);
    for (std::size_t k = 0; k <= g.n; ++k)
        rows[k] = psi_row(double(k) * g.h);
    return PairingFunctional(kt, rows).apply(phi);
}

SubspaceBasis subspace_basis(const KernelModel& k, const Grid& g,
                             const SpectralSummary& s, RootClass which)
{
    SubspaceBasis b;
    for (const auto& r : s.roots) {
        if (r.classification != which)
            continue;
        if (r.multiplicity > 1)
            throw RootFindingError("subspace_basis: multiple root; generalized eigenfunction chains are not supported");
        b.lambdas.push_back(r.lambda);
        b.null_vecs.push_back(r.null_vec);
        b.columns.push_back(exponential_segment(g, r.lambda, r.null_vec));
        ++b.d;
    }
    if (b.d >= 2) {
        Matc gram(b.d, b.d);
        for (std::size_t i = 0; i < b.d; ++i)
            for (std::size_t j = 0; j < b.d; ++j) {
                cplx acc = 0.0;
                for (std::size_t c = 0; c < k.dim; ++c)
                    for (std::size_t node = 0; node <= g.n; ++node)
                        acc += std::conj(b.columns[i].at(c, node)) * b.columns[j].at(c, node)
                               * g.norm_w[node];
                gram(i, j) = acc;
            }
        if (std::abs(det(gram)) < 1e-8)
            throw RootFindingError("subspace_basis: basis columns numerically dependent");
    }
    return b;
}

DualBasis dual_basis(const KernelModel& k, const KernelTables& kt,
                     const SubspaceBasis& basis, const SpectralSummary& s)
{
    const Grid& g = *kt.grid;
    DualBasis d;
    d.d = basis.d;
    if (basis.d == 0)
        return d;

    // candidate rows w_i e^{-lambda_i tau}, w_i the left null vectors
    std::vector<PairingFunctional> cands;
    std::vector<double> cand_norms;
    for (std::size_t i = 0; i < basis.d; ++i) {
        const cplx lam = basis.lambdas[i];
        Vecc left;
        for (const auto& r : s.roots)
            if (std::abs(r.lambda - lam) < 1e-9)
                left = r.left_null_vec;
        if (left.empty())
            throw RootFindingError("dual_basis: no left null vector for a basis root");
        std::vector<Vecc> rows(g.n + 1);
        double xs = 0;
        for (std::size_t node = 0; node <= g.n; ++node) {
            const double tau = double(node) * g.h;
            const cplx e = std::exp(-lam * tau);
            Vecc row(k.dim);
            double mag = 0;
            for (std::size_t c = 0; c < k.dim; ++c) {
                row[c] = left[c] * e;
                mag += std::norm(row[c]);
            }
            rows[node] = std::move(row);
            xs += g.norm_w[node] * std::sqrt(mag);
        }
        cands.emplace_back(kt, rows);
        cand_norms.push_back(xs);
    }

    Matc M(basis.d, basis.d);
    for (std::size_t i = 0; i < basis.d; ++i)
        for (std::size_t j = 0; j < basis.d; ++j)
            M(i, j) = cands[i].apply(basis.columns[j]);
    d.gram = M;
    if (std::abs(det(M)) < 1e-12)
        throw RootFindingError("dual_basis: singular pairing Gram matrix (defective root structure?)");
    const Matc Minv = inverse(M);

    for (std::size_t i = 0; i < basis.d; ++i) {
        PairingFunctional row;
        double xs = 0;
        std::vector<DualRowTerm> sym;
        for (std::size_t j = 0; j < basis.d; ++j) {
            row.add_scaled(Minv(i, j), cands[j]);
            xs += std::abs(Minv(i, j)) * cand_norms[j];
            Vecc left;
            for (const auto& r : s.roots)
                if (std::abs(r.lambda - basis.lambdas[j]) < 1e-9)
                    left = r.left_null_vec;
            DualRowTerm term;
            term.lambda = basis.lambdas[j];
            term.row.resize(k.dim);
            for (std::size_t c = 0; c < k.dim; ++c)
                term.row[c] = Minv(i, j) * left[c];
            sym.push_back(std::move(term));
        }
        d.rows.push_back(std::move(row));
        d.symbolic.push_back(std::move(sym));
        d.xsharp_norms.push_back(xs); // triangle-inequality bound
    }
    return d;
}

Vecc DualBasis::row_at(std::size_t i, double tau) const
{
    Vecc out(symbolic[i].front().row.size(), cplx{0.0});
    for (const auto& t : symbolic[i]) {
        const cplx e = std::exp(-t.lambda * tau);
        for (std::size_t c = 0; c < out.size(); ++c)
            out[c] += t.row[c] * e;
    }
    return out;
}

Vecc ReducedSystem::center_coords(const Segment& phi) const
{
    Vecc z(d_c());
    for (std::size_t i = 0; i < d_c(); ++i)
        z[i] = center_dual.rows[i].apply(phi);
    return z;
}

Vecc ReducedSystem::unstable_coords(const Segment& phi) const
{
    Vecc w(d_u());
    for (std::size_t i = 0; i < d_u(); ++i)
        w[i] = unstable_dual.rows[i].apply(phi);
    return w;
}

void ReducedSystem::add_center_part(const Vecc& z, Segment& out) const
{
    for (std::size_t i = 0; i < d_c(); ++i)
        out.add_scaled(z[i], center_basis.columns[i]);
}

void ReducedSystem::add_unstable_part(const Vecc& w, Segment& out) const
{
    for (std::size_t i = 0; i < d_u(); ++i)
        out.add_scaled(w[i], unstable_basis.columns[i]);
}

Segment ReducedSystem::project_center(const Segment& phi, Vecc* coords) const
{
    Vecc z = center_coords(phi);
    Segment out(*grid, kernel.dim);
    add_center_part(z, out);
    if (coords)
        *coords = std::move(z);
    return out;
}

Segment ReducedSystem::project_su(const Segment& phi) const
{
    Segment out = phi;
    const Vecc z = center_coords(phi);
    for (std::size_t i = 0; i < d_c(); ++i)
        out.add_scaled(-z[i], center_basis.columns[i]);
    const Vecc w = unstable_coords(phi);
    for (std::size_t i = 0; i < d_u(); ++i)
        out.add_scaled(-w[i], unstable_basis.columns[i]);
    return out;
}

double ReducedSystem::center_norm_of(const Vecc& z) const
{
    Segment s(*grid, kernel.dim);
    add_center_part(z, s);
    return segment_norm(s);
}

Vecc ReducedSystem::propagate(const std::vector<cplx>& lambdas, double t, const Vecc& z)
{
    Vecc out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = std::exp(lambdas[i] * t) * z[i];
    return out;
}

namespace {

// H(n)_{ic} = <<psi_i, Gamma^n e_c>>, Richardson-extrapolated in 1/n.  The
// inner integral runs against the continuous triangular profile (the dual
// rows are closed-form exponential sums), so the 1/n law is clean no matter
// how coarse the segment grid is; only the outer theta quadrature sees h.
Matc mollified_injection(const KernelModel& kmodel, const KernelTables& kt,
                         const DualBasis& dual)
{
    const Grid& g = *kt.grid;
    const std::size_t m = kt.m;

    auto h_at = [&](int n) {
        const double support = 1.0 / double(n);
        // inner integral over the spike, from lo (= max(theta, -support)) to 0
        auto inner_at = [&](std::size_t i, double theta, double lo) {
            const int segs = 24;
            const double hs = -lo / (2 * segs);
            Vecc inner(m, cplx{0.0});
            if (lo >= 0.0)
                return inner;
            for (int q = 0; q <= 2 * segs; ++q) {
                const double xi = lo + double(q) * hs;
                const double wq = (q == 0 || q == 2 * segs) ? 1.0 : (q % 2 ? 4.0 : 2.0);
                const double gval = 2.0 * double(n) * double(n) * (xi + support);
                if (gval <= 0)
                    continue;
                const Vecc prow = dual.row_at(i, xi - theta);
                for (std::size_t c = 0; c < m; ++c)
                    inner[c] += wq * gval * prow[c];
            }
            for (auto& v : inner)
                v *= hs / 3.0;
            return inner;
        };

        // the outer integrand ramps on the 1/n scale near theta = 0, so the
        // first stretch is integrated on its own fine mesh; the smooth
        // remainder rides the segment grid
        const std::size_t k_ramp =
            std::min(g.n, std::size_t(std::ceil(support / g.h - 1e-12)) + 1);
        Matc H(dual.d, m);
        for (std::size_t i = 0; i < dual.d; ++i) {
            // fine Simpson over [-k_ramp h, 0]
            {
                const double lo_theta = -double(k_ramp) * g.h;
                const int segs = 96;
                const double hs = -lo_theta / (2 * segs);
                for (int q = 0; q <= 2 * segs; ++q) {
                    const double theta = lo_theta + double(q) * hs;
                    const double wq = (q == 0 || q == 2 * segs) ? 1.0 : (q % 2 ? 4.0 : 2.0);
                    const Vecc inner = inner_at(i, theta, std::max(theta, -support));
                    const Matc K = eval_kernel(kmodel, -theta);
                    for (std::size_t c = 0; c < m; ++c) {
                        cplx acc = 0.0;
                        for (std::size_t r = 0; r < m; ++r)
                            acc += inner[r] * K(r, c);
                        H(i, c) += (hs / 3.0) * wq * acc;
                    }
                }
            }
            // grid trapezoid over [-theta_max, -k_ramp h]
            for (std::size_t k = k_ramp; k <= g.n; ++k) {
                const double theta = -double(k) * g.h;
                const double w = (k == k_ramp || k == g.n) ? 0.5 * g.h : g.h;
                const Vecc inner = inner_at(i, theta, -support);
                for (std::size_t c = 0; c < m; ++c) {
                    cplx acc = 0.0;
                    for (std::size_t r = 0; r < m; ++r)
                        acc += inner[r] * kt.fwd_rc(r, c)[k];
                    H(i, c) += w * acc;
                }
            }
        }
        return H;
    };
    const Matc h8 = h_at(8), h16 = h_at(16), h32 = h_at(32);
    Matc r1 = h16, r2 = h32;
    r1 *= 2.0;
    r1 -= h8;
    r2 *= 2.0;
    r2 -= h16;
    Matc diff = r2;
    diff -= r1;
    if (spectral_norm(diff) > 1e-3)
        throw std::runtime_error("reduced_matrices: mollified injection extrapolation diverged (> 1e-3)");
    return r2;
}

} // namespace

ReducedSystem reduced_matrices(const KernelModel& k, const Grid& g, const SpectralSummary& s)
{
    ReducedSystem rs;
    rs.grid = &g;
    rs.kernel = k;
    rs.tables = make_kernel_tables(k, g);
    rs.spectrum = s;

    rs.center_basis = subspace_basis(k, g, s, RootClass::center);
    rs.unstable_basis = subspace_basis(k, g, s, RootClass::unstable);
    rs.center_dual = dual_basis(k, rs.tables, rs.center_basis, s);
    rs.unstable_dual = dual_basis(k, rs.tables, rs.unstable_basis, s);

    rs.H_c = rs.d_c() ? mollified_injection(k, rs.tables, rs.center_dual) : Matc(0, k.dim);
    rs.H_u = rs.d_u() ? mollified_injection(k, rs.tables, rs.unstable_dual) : Matc(0, k.dim);

    const SpectralGap gap = spectral_gap_constants(s, k);
    rs.alpha = gap.alpha;
    rs.eps_gap = gap.eps_gap;
    return rs;
}

DecompositionConstants estimate_decomposition_constants(const ReducedSystem& rs, double alpha,
                                                        Rng rng, std::size_t sample_size,
                                                        double t_fit)
{
    const Grid& g = *rs.grid;
    const std::size_t m = rs.kernel.dim;

    std::vector<Segment> sample;
    sample.push_back(constant_segment(g, Vecc(m, cplx{1.0})));
    for (double s : {-0.3, 0.1, 0.4})
        sample.push_back(exponential_segment(g, cplx{s, 0.7}, Vecc(m, cplx{1.0})));
    while (sample.size() < sample_size)
        sample.push_back(random_segment(g, m, rng));

    double nc = 0, nu = 0, ns = 0;
    for (const auto& phi : sample) {
        const double np = segment_norm(phi);
        if (np == 0)
            continue;
        Segment cpart(g, m);
        rs.add_center_part(rs.center_coords(phi), cpart);
        Segment upart(g, m);
        rs.add_unstable_part(rs.unstable_coords(phi), upart);
        const Segment spart = rs.project_su(phi);
        nc = std::max(nc, segment_norm(cpart) / np);
        nu = std::max(nu, segment_norm(upart) / np);
        ns = std::max(ns, segment_norm(spart) / np);
    }
    const double C1 = std::max(1.0, nc + nu + ns);

    double worst = 0.0;
    const std::size_t fit_steps = std::size_t(t_fit / g.h);
    const std::size_t probes = std::min<std::size_t>(sample.size(), 10);
    for (std::size_t i = 0; i < probes; ++i) {
        const Segment sphi = rs.project_su(sample[i]);
        const double base = segment_norm(sphi);
        if (base < 1e-12)
            continue;
        const Trajectory tr = run_linear_trajectory(rs.tables, sphi, 0.0, nullptr, fit_steps);
        for (double t : {0.5, 1.0, 2.0, 4.0, t_fit}) {
            const std::size_t j = std::min<std::size_t>(fit_steps, std::size_t(t / g.h));
            const Segment at = rs.project_su(tr.segment_at(j));
            const double ratio = segment_norm(at) * std::exp(alpha * double(j) * g.h) / base;
            worst = std::max(worst, ratio);
        }
    }
    const double C = std::max(1.0, worst);

    return DecompositionConstants{C, C1, sample.size(), worst};
}

} // namespace cmred

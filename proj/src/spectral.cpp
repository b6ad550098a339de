#include "cmred/spectral.hpp"

#include "cmred/errors.hpp"

#include <algorithm>
#include <cmath>

namespace cmred {

Matc characteristic_matrix(const KernelModel& k, cplx lambda)
{
    Matc d = Matc::identity(k.dim);
    d -= laplace_transform(k, lambda);
    return d;
}

cplx char_det(const KernelModel& k, cplx lambda)
{
    return det(characteristic_matrix(k, lambda));
}

cplx char_det_derivative(const KernelModel& k, cplx lambda)
{
    const Matc d = characteristic_matrix(k, lambda);
    Matc dprime = laplace_transform_derivative(k, lambda);
    dprime *= -1.0; // Delta' = -(transform)'
    const std::size_t n = k.dim;
    cplx total = 0.0;
    for (std::size_t col = 0; col < n; ++col) {
        Matc tmp = d;
        for (std::size_t i = 0; i < n; ++i)
            tmp(i, col) = dprime(i, col);
        total += det(tmp);
    }
    return total;
}

namespace {

// phase increment of det along the straight segment [z0, z1], adaptively
// refined so each sub-increment stays below pi/2
double phase_sweep(const KernelModel& k, cplx z0, cplx f0, cplx z1, cplx f1, double min_abs,
                   int depth, const SpectralOptions& opt)
{
    const double d = std::arg(f1 / f0);
    if (std::abs(d) <= 1.5707963267948966 / 2.0)
        return d;
    if (depth >= opt.max_depth) {
        if (std::min(std::abs(f0), std::abs(f1)) < 10 * min_abs)
            throw RootFindingError("count_roots: characteristic root too close to the contour; perturb the rectangle");
        throw RootFindingError("count_roots: phase tracking failed to resolve the contour");
    }
    const cplx zm = 0.5 * (z0 + z1);
    const cplx fm = char_det(k, zm);
    if (std::abs(fm) < min_abs)
        throw RootFindingError("count_roots: |det| below boundary tolerance on the contour");
    return phase_sweep(k, z0, f0, zm, fm, min_abs, depth + 1, opt) +
           phase_sweep(k, zm, fm, z1, f1, min_abs, depth + 1, opt);
}

unsigned winding(const KernelModel& k, const Rect& r, double boundary_tol,
                 const SpectralOptions& opt)
{
    const cplx corners[5] = {
        {r.re_min, r.im_min}, {r.re_max, r.im_min}, {r.re_max, r.im_max},
        {r.re_min, r.im_max}, {r.re_min, r.im_min}};
    double total = 0;
    for (int e = 0; e < 4; ++e) {
        const cplx a = corners[e], b = corners[e + 1];
        // initial sampling fine enough that phase rarely needs deep recursion
        const int segs = std::max(8, int(std::ceil(std::abs(b - a) / 0.25)));
        cplx zprev = a, fprev = char_det(k, a);
        if (std::abs(fprev) < boundary_tol)
            throw RootFindingError("count_roots: |det| below boundary tolerance on the contour");
        for (int i = 1; i <= segs; ++i) {
            const cplx z = a + (b - a) * (double(i) / segs);
            const cplx f = char_det(k, z);
            if (std::abs(f) < boundary_tol)
                throw RootFindingError("count_roots: |det| below boundary tolerance on the contour");
            total += phase_sweep(k, zprev, fprev, z, f, boundary_tol, 0, opt);
            zprev = z;
            fprev = f;
        }
    }
    const double w = total / (2.0 * M_PI);
    const long n = std::lround(w);
    if (std::abs(w - double(n)) > 0.25 || n < 0)
        throw RootFindingError("count_roots: winding number did not converge to an integer");
    return unsigned(n);
}

} // namespace

unsigned count_roots(const KernelModel& k, const Rect& rect, const SpectralOptions& opt)
{
    if (!(rect.re_min > -k.rho))
        throw std::domain_error("count_roots: rectangle must lie in Re lambda > -rho");
    return winding(k, rect, opt.boundary_tol, opt);
}

namespace {

struct NewtonResult {
    cplx lambda;
    double residual;
    bool ok;
};

NewtonResult newton_polish(const KernelModel& k, cplx z0, const Rect& cell,
                           const SpectralOptions& opt)
{
    cplx z = z0;
    for (int it = 0; it < 80; ++it) {
        const cplx f = char_det(k, z);
        if (std::abs(f) <= opt.root_tol) {
            // one extra guarded step to tighten, then accept
            const cplx df = char_det_derivative(k, z);
            if (std::abs(df) > 1e-300) {
                const cplx z2 = z - f / df;
                if (z2.real() > -k.rho && std::abs(char_det(k, z2)) < std::abs(f))
                    z = z2;
            }
            return {z, std::abs(char_det(k, z)), true};
        }
        const cplx df = char_det_derivative(k, z);
        if (std::abs(df) < 1e-300)
            return {z, std::abs(f), false};
        const cplx step = f / df;
        cplx znew = z - step;
        if (!(znew.real() > -k.rho))
            znew = 0.5 * (z + cplx{-k.rho, z.imag()}); // pull back into the domain
        // reject wild excursions far outside the enclosing cell
        const double slack = 2.0 * std::max(cell.width(), cell.height()) + 1.0;
        if (!cell.contains(znew, slack))
            return {znew, std::abs(f), false};
        if (std::abs(znew - z) < 1e-15 * (1.0 + std::abs(z)))
            return {znew, std::abs(char_det(k, znew)), std::abs(char_det(k, znew)) <= opt.root_tol};
        z = znew;
    }
    return {z, std::abs(char_det(k, z)), false};
}

void subdivide(const KernelModel& k, const Rect& rect, unsigned count, int depth,
               const SpectralOptions& opt, std::vector<CharacteristicRoot>& out)
{
    if (count == 0)
        return;

    const double small_cell = 1e-3;
    if (count == 1 || (rect.width() < small_cell && rect.height() < small_cell)) {
        const cplx center{0.5 * (rect.re_min + rect.re_max), 0.5 * (rect.im_min + rect.im_max)};
        NewtonResult nr = newton_polish(k, center, rect, opt);
        if (nr.ok && rect.contains(nr.lambda, 1e-6)) {
            CharacteristicRoot root;
            root.lambda = nr.lambda;
            root.det_residual = nr.residual;
            root.multiplicity = count;
            out.push_back(root);
            return;
        }
        // Newton missed; fall through to geometric refinement
    }

    if (depth >= opt.max_depth)
        throw RootFindingError("find_characteristic_roots: subdivision depth exhausted (clustered or boundary roots)");

    const bool vertical = rect.width() >= rect.height();
    const double jitters[] = {0.0, 0.13, -0.11, 0.23, -0.27, 0.31};
    for (double j : jitters) {
        Rect a = rect, b = rect;
        if (vertical) {
            const double cut = 0.5 * (rect.re_min + rect.re_max) + j * rect.width();
            a.re_max = cut;
            b.re_min = cut;
        } else {
            const double cut = 0.5 * (rect.im_min + rect.im_max) + j * rect.height();
            a.im_max = cut;
            b.im_min = cut;
        }
        try {
            const unsigned ca = winding(k, a, opt.boundary_tol, opt);
            const unsigned cb = winding(k, b, opt.boundary_tol, opt);
            if (ca + cb != count)
                continue; // a root sat on the cut; try another offset
            subdivide(k, a, ca, depth + 1, opt, out);
            subdivide(k, b, cb, depth + 1, opt, out);
            return;
        } catch (const RootFindingError&) {
            continue;
        }
    }
    throw RootFindingError("find_characteristic_roots: could not place a root-free cut");
}

} // namespace

SpectralSummary find_characteristic_roots(const KernelModel& k, const Rect& rect,
                                          const SpectralOptions& opt)
{
    SpectralSummary s;
    s.region = rect;
    const unsigned total = count_roots(k, rect, opt);
    std::vector<CharacteristicRoot> found;
    subdivide(k, rect, total, 0, opt, found);

    // Merge duplicates.  A cut through a multiple root can split its winding
    // across two cells whose Newton runs land O(sqrt(root_tol)) apart, so the
    // merge radius has to cover that scatter.
    std::vector<CharacteristicRoot> uniq;
    const double merge_radius = std::max(1e-7, 100.0 * std::sqrt(opt.root_tol));
    for (auto& r : found) {
        bool merged = false;
        for (auto& u : uniq)
            if (std::abs(u.lambda - r.lambda) < merge_radius * (1.0 + std::abs(u.lambda))) {
                u.multiplicity += r.multiplicity;
                if (r.det_residual < u.det_residual)
                    u.lambda = r.lambda;
                u.det_residual = std::min(u.det_residual, r.det_residual);
                merged = true;
                break;
            }
        if (!merged)
            uniq.push_back(r);
    }

    unsigned mult_total = 0;
    for (auto& r : uniq) {
        // multiplicity from the winding count on boxes around the root,
        // grown until the count stabilizes (Newton lands only O(sqrt(tol))
        // close to a multiple root, so a fixed box can miss it)
        SpectralOptions tol_free = opt;
        tol_free.boundary_tol = 0.0;
        unsigned mult = 0, prev = 0;
        double side = 1e-5 * (1.0 + std::abs(r.lambda));
        for (int grow = 0; grow < 12; ++grow) {
            Rect tiny{r.lambda.real() - side, r.lambda.real() + side,
                      r.lambda.imag() - side, r.lambda.imag() + side};
            tiny.re_min = std::max(tiny.re_min, -k.rho + 1e-12);
            const unsigned w = winding(k, tiny, 0.0, tol_free);
            if (w > 0 && w == prev) {
                mult = w;
                break;
            }
            prev = w;
            side *= 3.0;
        }
        if (mult == 0)
            throw RootFindingError("find_characteristic_roots: could not stabilize a multiplicity count (clustered roots?)");
        r.multiplicity = mult;
        mult_total += r.multiplicity;

        if (mult > 1) {
            // multiplicity-accelerated polish: z -> z - m f/f' is quadratic
            // at an m-fold root where plain Newton only converges linearly
            cplx z = r.lambda;
            for (int it = 0; it < 60; ++it) {
                const cplx fv = char_det(k, z);
                const cplx dfv = char_det_derivative(k, z);
                if (std::abs(dfv) < 1e-300)
                    break;
                const cplx step = double(mult) * fv / dfv;
                if (!(z.real() - step.real() > -k.rho))
                    break;
                z -= step;
                if (std::abs(step) < 1e-15 * (1.0 + std::abs(z)))
                    break;
            }
            if (std::abs(char_det(k, z)) <= r.det_residual) {
                r.lambda = z;
                r.det_residual = std::abs(char_det(k, z));
            }
        }

        if (std::abs(r.lambda.real()) <= opt.center_tol)
            r.classification = RootClass::center;
        else if (r.lambda.real() > 0)
            r.classification = RootClass::unstable;
        else
            r.classification = RootClass::stable;

        const Matc d = characteristic_matrix(k, r.lambda);
        r.null_vec = null_vector(d, &r.null_residual);
        Matc dt(k.dim, k.dim);
        for (std::size_t i = 0; i < k.dim; ++i)
            for (std::size_t jj = 0; jj < k.dim; ++jj)
                dt(i, jj) = d(jj, i);
        r.left_null_vec = null_vector(dt);
    }
    if (mult_total != total)
        throw RootFindingError("find_characteristic_roots: multiplicities do not add up to the region count");

    std::sort(uniq.begin(), uniq.end(), [](const CharacteristicRoot& a, const CharacteristicRoot& b) {
        if (a.lambda.real() != b.lambda.real())
            return a.lambda.real() < b.lambda.real();
        return a.lambda.imag() < b.lambda.imag();
    });

    s.roots = std::move(uniq);
    for (const auto& r : s.roots) {
        switch (r.classification) {
        case RootClass::unstable: s.n_u += r.multiplicity; break;
        case RootClass::center: s.n_c += r.multiplicity; break;
        case RootClass::stable: s.n_s += r.multiplicity; break;
        }
    }
    s.hyperbolic = (s.n_c == 0);
    return s;
}

Rect default_search_rect(const KernelModel& k, double margin, double im_max)
{
    double re_max = 1.0;
    auto transform_bound = [&](double re) {
        double s = 0;
        for (const auto& t : k.terms) {
            double f = 1;
            for (unsigned p = 2; p <= t.power; ++p)
                f *= p;
            s += spectral_norm(t.coeff) * f / std::pow(re + t.rate.real(), double(t.power + 1));
        }
        return s;
    };
    while (transform_bound(re_max) >= 0.5 && re_max < 1e6)
        re_max *= 2;
    re_max += 1.0;
    return Rect{-k.rho + margin, re_max, -im_max, im_max};
}

SpectralGap spectral_gap_constants(const SpectralSummary& s, const KernelModel& k,
                                   double margin, const SpectralOptions& opt)
{
    double min_noncentral = k.rho; // fallback: only the essential bound matters
    bool have = false;
    for (const auto& r : s.roots) {
        if (r.classification == RootClass::center)
            continue;
        const double a = std::abs(r.lambda.real());
        if (a < 10 * opt.center_tol)
            throw std::runtime_error("spectral_gap_constants: noncentral root within 10*center_tol of the axis (degenerate gap)");
        if (!have || a < min_noncentral) {
            min_noncentral = a;
            have = true;
        }
    }
    double alpha = std::min(k.rho - margin, have ? min_noncentral : k.rho);
    alpha *= 0.99; // safety
    if (alpha <= 0)
        throw std::runtime_error("spectral_gap_constants: no positive gap (margin too large?)");
    return SpectralGap{alpha, alpha / 10.0};
}

} // namespace cmred

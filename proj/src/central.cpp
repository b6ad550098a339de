#include "cmred/central.hpp"

#include <cmath>
#include <future>
#include <limits>

namespace cmred {

CentralSystem make_central_system(const ReducedSystem& rs, const CenterManifoldMap& map,
                                  const NonlinearityModel& f, double radius_r,
                                  double escape_radius)
{
    CentralSystem sys;
    sys.rs = &rs;
    sys.map = &map;
    sys.f = &f;
    sys.radius_r = radius_r;
    sys.escape_radius = escape_radius > 0 ? escape_radius : radius_r;
    if (f.form == NonlinearityModel::Form::cubic_functional && rs.d_c() == 1 &&
        map.lattice_enabled() && f.linear_functional) {
        sys.lattice_fast = true;
        sys.lin_of_basis = f.linear_functional(rs.center_basis.columns[0]);
    }
    return sys;
}

Vecc CentralSystem::rhs(const Vecc& z, bool* outside, bool with_cutoff,
                        const CutoffConfig* cfg) const
{
    const std::size_t dc = rs->d_c();
    if (outside)
        *outside = rs->center_norm_of(z) > radius_r;

    Vecc out(dc);
    if (lattice_fast && !with_cutoff) {
        // f(Phi_c z + F(z)) = eps (J(Phi_c) z + J(F(z)))^3 for the scalar cubic
        const cplx j = lin_of_basis * z[0] + map->lattice_linear_value(z[0].real());
        const cplx val = f->eps_cubic * j * j * j;
        out[0] = rs->center_basis.lambdas[0] * z[0] + rs->H_c(0, 0) * val;
        return out;
    }

    Segment arg = map->evaluate(z);
    rs->add_center_part(z, arg);
    const Vecc v = (with_cutoff && cfg) ? cutoff_apply(*cfg, *rs, *f, arg) : (*f)(arg);
    for (std::size_t i = 0; i < dc; ++i) {
        out[i] = rs->center_basis.lambdas[i] * z[i];
        for (std::size_t c = 0; c < rs->kernel.dim; ++c)
            out[i] += rs->H_c(i, c) * v[c];
    }
    return out;
}

cplx fit_cubic_coefficient(const CentralSystem& sys, const std::vector<double>& zs,
                           double* residual)
{
    if (sys.rs->d_c() != 1)
        throw std::invalid_argument("fit_cubic_coefficient: requires a one-dimensional center set");
    // least squares of rhs(z) = c z^3 over the sample
    cplx num = 0.0;
    double den = 0;
    std::vector<cplx> vals;
    for (double z : zs) {
        const Vecc r = sys.rhs(Vecc{cplx{z}});
        vals.push_back(r[0]);
        num += r[0] * z * z * z;
        den += std::pow(z, 6.0);
    }
    const cplx c = num / den;
    if (residual) {
        double res = 0;
        for (std::size_t i = 0; i < zs.size(); ++i)
            res += std::norm(vals[i] - c * std::pow(zs[i], 3.0));
        *residual = std::sqrt(res);
    }
    return c;
}

namespace {

double coord_mag(const Vecc& z)
{
    double s = 0;
    for (const auto& v : z)
        s += std::norm(v);
    return std::sqrt(s);
}

} // namespace

CentralOrbit integrate_central(const CentralSystem& sys, const Vecc& z0, double t_end,
                               double h_ode, std::size_t store_stride)
{
    CentralOrbit orbit;
    const std::size_t dc = z0.size();
    Vecc z = z0;
    const std::size_t steps = std::size_t(std::ceil(t_end / h_ode));
    orbit.t.reserve(steps / store_stride + 2);
    orbit.t.push_back(0);
    orbit.z.push_back(z);
    auto deriv = [&](const Vecc& y) { return sys.rhs(y); };
    for (std::size_t s = 1; s <= steps; ++s) {
        const Vecc k1 = deriv(z);
        Vecc tmp(dc);
        for (std::size_t i = 0; i < dc; ++i)
            tmp[i] = z[i] + 0.5 * h_ode * k1[i];
        const Vecc k2 = deriv(tmp);
        for (std::size_t i = 0; i < dc; ++i)
            tmp[i] = z[i] + 0.5 * h_ode * k2[i];
        const Vecc k3 = deriv(tmp);
        for (std::size_t i = 0; i < dc; ++i)
            tmp[i] = z[i] + h_ode * k3[i];
        const Vecc k4 = deriv(tmp);
        for (std::size_t i = 0; i < dc; ++i)
            z[i] += (h_ode / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (s % store_stride == 0 || s == steps) {
            orbit.t.push_back(double(s) * h_ode);
            orbit.z.push_back(z);
        }
        if (coord_mag(z) > sys.escape_radius) {
            orbit.exited = true;
            orbit.exit_time = double(s) * h_ode;
            break;
        }
    }
    return orbit;
}

const char* verdict_name(VerdictClass v)
{
    switch (v) {
    case VerdictClass::stable: return "uniformly_asymptotically_stable";
    case VerdictClass::unstable: return "unstable";
    default: return "inconclusive";
    }
}

StabilityVerdict classify_zero_stability(const CentralSystem& sys, const EnsembleSettings& es)
{
    const std::size_t dc = sys.rs->d_c();
    if (dc == 0)
        throw std::invalid_argument("classify_zero_stability: empty center set");

    StabilityVerdict v;
    std::vector<double> radii = es.radii;
    if (radii.empty())
        radii = {sys.radius_r / 50.0, sys.radius_r / 20.0, sys.radius_r / 10.0};

    double horizon = es.horizon;
    if (horizon <= 0) {
        const double coeff =
            (dc == 1) ? std::abs(fit_cubic_coefficient(sys, {0.02, 0.04})) : 1.0;
        horizon = std::clamp(100.0 / std::max(coeff, 1e-6), 100.0, 2000.0);
    }
    v.horizon = horizon;

    std::vector<Vecc> starts;
    for (double r : radii) {
        if (dc == 1) {
            starts.push_back(Vecc{cplx{r}});
            starts.push_back(Vecc{cplx{-r}});
        } else {
            for (std::size_t d = 0; d < es.directions; ++d) {
                const double ang = 2.0 * M_PI * double(d) / double(es.directions);
                Vecc z(dc, cplx{0.0});
                z[0] = r * std::cos(ang);
                z[1 % dc] += r * std::sin(ang);
                starts.push_back(std::move(z));
            }
        }
    }

    std::vector<std::future<CentralOrbit>> futures;
    futures.reserve(starts.size());
    for (const auto& z0 : starts)
        futures.push_back(std::async(std::launch::async, [&sys, z0, horizon, &es] {
            return integrate_central(sys, z0, horizon, es.h_ode);
        }));

    bool all_halved = true, any_escape = false, any_doubled = false;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const CentralOrbit orbit = futures[i].get();
        const double r0 = coord_mag(starts[i]);
        double peak = 0;
        for (const auto& zz : orbit.z)
            peak = std::max(peak, coord_mag(zz));
        const double fin = coord_mag(orbit.z.back());
        v.start_radii.push_back(r0);
        v.final_over_initial.push_back(fin / r0);
        v.escaped.push_back(orbit.exited ? 1 : 0);
        if (orbit.exited)
            any_escape = true;
        if (peak > 2.0 * r0)
            any_doubled = true;
        if (!(fin <= 0.5 * r0))
            all_halved = false;
    }
    if (any_escape)
        v.classification = VerdictClass::unstable;
    else if (all_halved && !any_doubled)
        v.classification = VerdictClass::stable;
    else
        v.classification = VerdictClass::inconclusive;
    return v;
}

ReductionReport reduction_report(const CentralSystem& sys, const EnsembleSettings& es,
                                 const FullEnsembleSettings& fs)
{
    const ReducedSystem& rs = *sys.rs;
    ReductionReport rep;

    if (rs.d_c() == 0) {
        // hyperbolic branch: linearized verdict from the root classes
        rep.hyperbolic_branch = true;
        rep.central_verdict =
            rs.d_u() > 0 ? VerdictClass::unstable : VerdictClass::stable;
    } else {
        if (rs.d_u() > 0)
            throw std::invalid_argument(
                "reduction_report: center branch requires an empty unstable set");
        rep.central_evidence = classify_zero_stability(sys, es);
        rep.central_verdict = rep.central_evidence.classification;
    }

    // full-equation ensemble
    std::vector<double> radii = fs.radii;
    if (radii.empty()) {
        if (!es.radii.empty())
            radii = es.radii;
        else
            radii = {sys.radius_r / 20.0, sys.radius_r / 10.0};
    }
    bool any_positive = false;
    for (double r : radii)
        any_positive = any_positive || r > 0;
    if (!any_positive)
        throw std::invalid_argument("reduction_report: no positive ensemble radii configured");
    double horizon = fs.horizon;
    if (horizon <= 0)
        horizon = rep.hyperbolic_branch ? 30.0
                                        : (rep.central_evidence.horizon > 0
                                               ? rep.central_evidence.horizon
                                               : 500.0);

    const Grid& g = *rs.grid;
    const std::size_t m = rs.kernel.dim;
    std::vector<Segment> starts;
    if (rep.hyperbolic_branch) {
        for (double r : radii)
            for (double sgn : {1.0, -1.0})
                starts.push_back(constant_segment(g, Vecc(m, cplx{sgn * r})));
    } else {
        for (double r : radii)
            for (double sgn : {1.0, -1.0}) {
                Vecc z0{cplx{sgn * r}};
                if (rs.d_c() > 1)
                    z0.assign(rs.d_c(), cplx{sgn * r / std::sqrt(double(rs.d_c()))});
                Segment x0 = sys.map->evaluate(z0);
                rs.add_center_part(z0, x0);
                starts.push_back(std::move(x0));
            }
    }

    std::vector<double> rates;
    bool all_decayed = true, any_escape = false;
    for (const auto& x0 : starts) {
        const double n0 = segment_norm(x0);
        const double escape = fs.escape_norm > 0 ? fs.escape_norm : std::max(20.0 * n0, 1.0);
        std::vector<double> times, norms;
        bool escaped = false;
        try {
            const Trajectory tr = solve_nonlinear(rs.tables, 0.0, x0, *sys.f, horizon, escape);
            const std::size_t stride = std::max<std::size_t>(1, tr.steps() / 400);
            Segment seg(g, m);
            for (std::size_t j = 0; j <= tr.steps(); j += stride) {
                tr.segment_at(j, seg);
                times.push_back(tr.time_at(j));
                if (rep.hyperbolic_branch)
                    norms.push_back(segment_norm(seg));
                else
                    norms.push_back(coord_mag(rs.center_coords(seg)));
            }
        } catch (const std::runtime_error&) {
            escaped = true; // blowup guard tripped
        }
        if (escaped) {
            any_escape = true;
            all_decayed = false;
            rep.full_final_over_initial.push_back(std::numeric_limits<double>::infinity());
            rep.full_escaped.push_back(1);
            continue;
        }
        const double fin = norms.back();
        const double ref = rep.hyperbolic_branch ? n0 : norms.front();
        rep.full_final_over_initial.push_back(ref > 0 ? fin / ref : 0.0);
        rep.full_escaped.push_back(0);
        if (!(fin <= 0.5 * ref))
            all_decayed = false;
        rates.push_back(fit_log_slope(times, norms, 1e-13));
    }
    if (!rates.empty()) {
        double s = 0;
        for (double r : rates)
            s += r;
        rep.full_fitted_rate = s / double(rates.size());
    }

    if (any_escape)
        rep.full_verdict = VerdictClass::unstable;
    else if (all_decayed)
        rep.full_verdict = VerdictClass::stable;
    else
        rep.full_verdict = VerdictClass::inconclusive;

    rep.agreement = rep.full_verdict == rep.central_verdict;
    return rep;
}

} // namespace cmred

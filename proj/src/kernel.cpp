#include "cmred/kernel.hpp"

#include "cmred/phasespace.hpp"

#include <cmath>
#include <stdexcept>

namespace cmred {

namespace {

double factorial(unsigned p)
{
    double f = 1;
    for (unsigned k = 2; k <= p; ++k)
        f *= k;
    return f;
}

// bound on integral(T,inf) t^p e^{-b t} dt = e^{-bT} sum_k (p!/k!) T^k / b^{p-k+1}
double poly_exp_tail(unsigned p, double b, double T)
{
    double s = 0;
    for (unsigned k = 0; k <= p; ++k)
        s += factorial(p) / factorial(k) * std::pow(T, double(k)) / std::pow(b, double(p - k + 1));
    return std::exp(-b * T) * s;
}

} // namespace

void KernelModel::validate() const
{
    if (dim < 1)
        throw std::invalid_argument("kernel: dim must be >= 1");
    if (rho <= 0)
        throw std::invalid_argument("kernel: rho must be positive");
    for (const auto& t : terms) {
        if (t.coeff.rows() != dim || t.coeff.cols() != dim)
            throw std::invalid_argument("kernel: coefficient matrix is not dim x dim");
        if (!(t.rate.real() > rho))
            throw std::invalid_argument("kernel: admissibility requires Re a > rho for every term");
    }
}

Matc laplace_transform(const KernelModel& k, cplx lambda)
{
    if (!(lambda.real() > -k.rho))
        throw std::domain_error("laplace_transform: Re lambda must exceed -rho");
    Matc out(k.dim, k.dim);
    for (const auto& t : k.terms) {
        const cplx s = lambda + t.rate;
        if (std::abs(s) < 1e-14)
            throw std::runtime_error("laplace_transform: lambda coincides with a kernel pole");
        const cplx w = factorial(t.power) / std::pow(s, double(t.power + 1));
        Matc m = t.coeff;
        m *= w;
        out += m;
    }
    return out;
}

Matc laplace_transform_derivative(const KernelModel& k, cplx lambda)
{
    Matc out(k.dim, k.dim);
    for (const auto& t : k.terms) {
        const cplx s = lambda + t.rate;
        if (std::abs(s) < 1e-14)
            throw std::runtime_error("laplace_transform_derivative: pole");
        const cplx w = -factorial(t.power + 1) / std::pow(s, double(t.power + 2));
        Matc m = t.coeff;
        m *= w;
        out += m;
    }
    return out;
}

Matc eval_kernel(const KernelModel& k, double t)
{
    if (t < 0)
        throw std::domain_error("eval_kernel: t must be nonnegative");
    Matc out(k.dim, k.dim);
    for (const auto& term : k.terms) {
        const cplx w = std::pow(t, double(term.power)) * std::exp(-term.rate * t);
        Matc m = term.coeff;
        m *= w;
        out += m;
    }
    return out;
}

double kernel_tail_time(const KernelModel& k, double eps)
{
    double T = 1;
    auto tail = [&](double t) {
        double s = 0;
        for (const auto& term : k.terms)
            s += spectral_norm(term.coeff) * poly_exp_tail(term.power, term.rate.real() - k.rho, t);
        return s;
    };
    while (tail(T) > eps && T < 1e6)
        T *= 1.5;
    return T;
}

AdmissibilityReport check_admissibility(const KernelModel& k)
{
    k.validate();
    AdmissibilityReport rep{};
    rep.norm_1_rho_bound = 0;
    for (const auto& t : k.terms)
        rep.norm_1_rho_bound += spectral_norm(t.coeff) * factorial(t.power)
                                / std::pow(t.rate.real() - k.rho, double(t.power + 1));

    const double T = kernel_tail_time(k, 1e-12);
    auto g = [&](double t) { return spectral_norm(eval_kernel(k, t)) * std::exp(k.rho * t); };

    // composite Simpson, refined until stable
    double prev = -1, val = 0;
    for (std::size_t n = 512; n <= 1 << 16; n *= 2) {
        const double h = T / double(n);
        double s = g(0) + g(T);
        for (std::size_t i = 1; i < n; ++i)
            s += (i % 2 ? 4.0 : 2.0) * g(double(i) * h);
        val = s * h / 3.0;
        if (prev >= 0 && std::abs(val - prev) < 1e-9 * (1 + val))
            break;
        prev = val;
    }
    rep.norm_1_rho = val;

    double best = 0;
    const std::size_t samples = 4096;
    double best_t = 0;
    for (std::size_t i = 0; i <= samples; ++i) {
        const double t = T * double(i) / double(samples);
        const double v = g(t);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    // local refinement around the sampled maximum
    double lo = std::max(0.0, best_t - T / samples), hi = best_t + T / samples;
    for (int it = 0; it < 60; ++it) {
        const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (g(m1) < g(m2))
            lo = m1;
        else
            hi = m2;
    }
    rep.norm_inf_rho = std::max(best, g(0.5 * (lo + hi)));
    return rep;
}

KernelModel tail_integral(const KernelModel& k)
{
    KernelModel out;
    out.dim = k.dim;
    out.rho = k.rho;
    for (const auto& t : k.terms) {
        // integral(t,inf) u^p e^{-a u} du = e^{-a t} sum_k (p!/k!) t^k / a^{p-k+1}
        for (unsigned j = 0; j <= t.power; ++j) {
            KernelTerm nt;
            nt.coeff = t.coeff;
            nt.coeff *= factorial(t.power) / factorial(j) / std::pow(t.rate, double(t.power - j + 1));
            nt.power = j;
            nt.rate = t.rate;
            out.terms.push_back(std::move(nt));
        }
    }
    return out;
}

Vecc NonlinearityModel::derivative(const Segment& phi, const Segment& w) const
{
    if (deriv_dir)
        return deriv_dir(phi, w);
    const double step = 1e-6 * (1.0 + segment_norm(phi));
    Segment plus = phi, minus = phi;
    plus.add_scaled(cplx{step}, w);
    minus.add_scaled(cplx{-step}, w);
    Vecc fp = eval(plus), fm = eval(minus);
    Vecc d(fp.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = (fp[i] - fm[i]) / (2.0 * step);
    return d;
}

NonlinearityModel NonlinearityModel::zero(std::size_t m)
{
    NonlinearityModel f;
    f.form = Form::zero;
    f.eval = [m](const Segment&) { return Vecc(m, cplx{0.0}); };
    f.deriv_dir = [m](const Segment&, const Segment&) { return Vecc(m, cplx{0.0}); };
    return f;
}

} // namespace cmred

#pragma once
// Delay kernels K(t) = sum_j C_j t^{p_j} e^{-a_j t} and the nonlinear term.
// Restricting to exponential-polynomial sums keeps the transform
// integral(0,inf) K(t) e^{-lambda t} dt in closed form, so the characteristic
// matrix and its derivative carry no quadrature error.

#include "cmred/linalg.hpp"

#include <functional>

namespace cmred {

class Segment; // defined in phasespace.hpp

struct KernelTerm {
    Matc coeff;      // m x m
    unsigned power;  // p >= 0
    cplx rate;       // Re a > 0
};

struct KernelModel {
    std::size_t dim = 1;
    double rho = 0.5;
    std::vector<KernelTerm> terms;

    // Throws std::invalid_argument unless Re a_j > rho for every term and the
    // shapes are consistent.
    void validate() const;
};

struct AdmissibilityReport {
    double norm_1_rho;        // quadrature value of integral ||K(t)|| e^{rho t} dt
    double norm_1_rho_bound;  // per-term triangle-inequality upper bound
    double norm_inf_rho;      // sampled ess-sup of ||K(t)|| e^{rho t}
};

// integral(0,inf) K(t) e^{-lambda t} dt, exact.  Requires Re lambda > -rho;
// throws std::domain_error otherwise and std::runtime_error at a pole.
Matc laplace_transform(const KernelModel& k, cplx lambda);

// d/dlambda of the transform, exact.
Matc laplace_transform_derivative(const KernelModel& k, cplx lambda);

Matc eval_kernel(const KernelModel& k, double t);

AdmissibilityReport check_admissibility(const KernelModel& k);

// K_hat(t) = integral(t,inf) K(u) du, again an exponential-polynomial sum.
KernelModel tail_integral(const KernelModel& k);

// T beyond which the per-term bound on integral(T,inf) ||K|| e^{rho t} dt
// drops below eps.
double kernel_tail_time(const KernelModel& k, double eps);

struct NonlinearityModel {
    enum class Form { zero, cubic_functional, custom };

    Form form = Form::zero;
    double eps_cubic = 0.0;

    // f : X -> C^m
    std::function<Vecc(const Segment&)> eval;
    // directional derivative Df(phi)[w]; null means central differences
    std::function<Vecc(const Segment&, const Segment&)> deriv_dir;
    // the scalar functional J when f = eps J(.)^3 (+g); lets callers exploit
    // linearity of the inner integral
    std::function<cplx(const Segment&)> linear_functional;

    Vecc operator()(const Segment& phi) const { return eval(phi); }

    // Df(phi)[w], falling back to central differences with step
    // 1e-6 * (1 + ||phi||_X) when no analytic derivative was supplied.
    Vecc derivative(const Segment& phi, const Segment& w) const;

    static NonlinearityModel zero(std::size_t m);
};

} // namespace cmred

#pragma once
// Discretization of the weighted history space L1_rho(R-, C^m): truncated
// uniform grids, segment arithmetic, and the time steppers for the
// homogeneous, forced and nonlinear equations.
//
// Segments store their values plane-by-plane (all grid nodes of component 0,
// then component 1, ...) so that convolutions and quadratures run as
// contiguous complex dot products.

#include "cmred/kernel.hpp"
#include "cmred/rng.hpp"
#include "cmred/simd.hpp"

#include <algorithm>
#include <functional>
#include <memory>

namespace cmred {

struct Grid {
    double h = 0.05;     // node spacing
    double theta = 40.0; // history window [-theta, 0], snapped to n*h
    double rho = 0.5;
    std::size_t n = 0; // nodes 0..n at theta_k = -k h

    std::vector<double> trap_w; // h, halved at both ends
    std::vector<double> norm_w; // trap_w[k] * e^{-rho k h}

    bool same_layout(const Grid& o) const
    {
        return h == o.h && n == o.n && rho == o.rho;
    }
};

Grid make_grid(double h, double theta, double rho);

class Segment {
public:
    Segment() = default;
    Segment(const Grid& g, std::size_t m)
        : grid_(&g), m_(m), v_(m * (g.n + 1), cplx{0.0}) {}

    const Grid& grid() const { return *grid_; }
    std::size_t dim() const { return m_; }
    std::size_t nodes() const { return grid_->n + 1; }

    cplx* plane(std::size_t c) { return v_.data() + c * nodes(); }
    const cplx* plane(std::size_t c) const { return v_.data() + c * nodes(); }

    // value of component c at theta = -k h
    cplx& at(std::size_t c, std::size_t k) { return v_[c * nodes() + k]; }
    cplx at(std::size_t c, std::size_t k) const { return v_[c * nodes() + k]; }

    // the point value phi[0] (meaningful when has_point_value())
    Vecc point_value() const
    {
        Vecc x(m_);
        for (std::size_t c = 0; c < m_; ++c)
            x[c] = at(c, 0);
        return x;
    }

    bool has_point_value() const { return has_point_value_; }
    void set_has_point_value(bool b) { has_point_value_ = b; }

    void fill_zero() { std::fill(v_.begin(), v_.end(), cplx{0.0}); }

    // this += alpha * other
    void add_scaled(cplx alpha, const Segment& other)
    {
        simd::axpy(alpha, other.v_.data(), v_.data(), v_.size());
    }

    void scale(cplx alpha)
    {
        for (auto& z : v_)
            z *= alpha;
    }

private:
    const Grid* grid_ = nullptr;
    std::size_t m_ = 1;
    std::vector<cplx> v_;
    bool has_point_value_ = false;
};

Segment constant_segment(const Grid& g, const Vecc& value);
Segment segment_from(const Grid& g, std::size_t m,
                     const std::function<Vecc(double)>& phi_of_theta);
// phi(theta) = e^{lambda theta} v
Segment exponential_segment(const Grid& g, cplx lambda, const Vecc& v);
Segment random_segment(const Grid& g, std::size_t m, Rng& rng, double scale = 1.0);

// ||phi||_X by weighted trapezoid; the neglected tail beyond -theta is
// bounded by e^{-rho theta} sup|phi|.
double segment_norm(const Segment& phi);

double segment_norm_diff(const Segment& a, const Segment& b);

// Precomputed kernel value tables on a grid.  fwd[rc][k] = K_rc(k h) and
// rev[rc][reach - k] = K_rc(k h); reach is where the weighted kernel norm
// falls below 1e-16.
struct KernelTables {
    const Grid* grid = nullptr;
    std::size_t m = 1;
    std::size_t reach = 0;
    std::vector<std::vector<cplx>> fwd, rev; // indexed r*m+c
    Matc m0_inv;                             // (I - (h/2) K(0))^{-1}

    const cplx* fwd_rc(std::size_t r, std::size_t c) const { return fwd[r * m + c].data(); }
    const cplx* rev_rc(std::size_t r, std::size_t c) const { return rev[r * m + c].data(); }
};

KernelTables make_kernel_tables(const KernelModel& k, const Grid& g);

// L(phi) = integral K(-theta) phi(theta) dtheta over the truncated window.
Vecc functional_L(const KernelTables& kt, const Segment& phi);
Vecc functional_L(const KernelModel& k, const Segment& phi);

class Trajectory {
public:
    Trajectory(const Grid& g, Segment init, double t0, std::size_t steps);

    const Grid& grid() const { return *grid_; }
    std::size_t dim() const { return m_; }
    double t0() const { return t0_; }
    std::size_t steps() const { return steps_; }

    cplx* plane(std::size_t c) { return states_.data() + c * (steps_ + 1); }
    const cplx* plane(std::size_t c) const { return states_.data() + c * (steps_ + 1); }

    Vecc state(std::size_t j) const
    {
        Vecc x(m_);
        for (std::size_t c = 0; c < m_; ++c)
            x[c] = plane(c)[j];
        return x;
    }

    const Segment& initial_segment() const { return init_; }

    // segment at t0 + j h (splices computed states with the initial history)
    Segment segment_at(std::size_t j) const;
    void segment_at(std::size_t j, Segment& out) const;

    double time_at(std::size_t j) const { return t0_ + double(j) * grid_->h; }

private:
    const Grid* grid_;
    std::size_t m_;
    double t0_;
    std::size_t steps_;
    Segment init_;
    std::vector<cplx> states_; // planar, length m*(steps+1); states_[c][0] = x(t0+)
};

// Forced stepper: x(t) = integral K(t-s) x(s) ds + p(t); p == nullptr means
// the homogeneous equation.
Trajectory run_linear_trajectory(const KernelTables& kt, const Segment& phi, double sigma,
                                 const std::function<Vecc(double)>* p, std::size_t steps);

// T(t) phi.  Non-grid times snap down to the grid with a warning flag.
Segment solve_homogeneous(const KernelTables& kt, const Segment& phi, double t,
                          bool* snapped = nullptr);

Segment solve_forced(const KernelTables& kt, double sigma, const Segment& phi,
                     const std::function<Vecc(double)>& p, double t, bool* snapped = nullptr);

// Explicit nonlinear stepper for x(t) = integral K(t-s)x(s)ds + f(x_t).
// Throws std::runtime_error if |x| exceeds blowup_bound.
Trajectory solve_nonlinear(const KernelTables& kt, double sigma, const Segment& phi,
                           const NonlinearityModel& f, double t_end,
                           double blowup_bound = 1e6);

struct Mollifier {
    int n = 8;                  // support [-1/n, 0]
    std::vector<double> values; // grid samples, unit trapezoid mass

    // Gamma^n x as a segment
    Segment inject(const Grid& g, const Vecc& x) const;
};

// Right-triangle profile, peak at theta=0, renormalized so the grid
// quadrature integrates it to exactly 1.  Requires n*h <= 1.
Mollifier make_mollifier(const Grid& g, int n);

// Reference evaluation of T(t-sigma)phi + sum_s w_s T(t-s) (Gamma^n p(s)):
// the mollified reconstruction of the forced segment.
Segment vcf_segment(const KernelTables& kt, double sigma, const Segment& phi,
                    const std::function<Vecc(double)>& p, double t, int mollifier_n);

// f(phi) = eps * (integral K_hat(-theta) phi(theta) dtheta)^3 (+ g), the
// scalar cubic functional built from the tail integral of the normalized
// kernel.  Only for dim == 1.
NonlinearityModel make_cubic_functional(const KernelModel& k, const Grid& g, double eps,
                                        std::function<cplx(const Segment&)> g_rem = nullptr);

// Shared scratch for hot loops that repeatedly materialize segments.
struct SegmentScratch {
    explicit SegmentScratch(const Grid& g, std::size_t m) : a(g, m), b(g, m), c(g, m) {}
    Segment a, b, c;
};

} // namespace cmred

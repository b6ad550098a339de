#pragma once
// Characteristic matrix Delta(lambda) = I - integral K e^{-lambda t} dt,
// zero counting by the argument principle, and root classification into
// unstable / center / stable sets.

#include "cmred/kernel.hpp"

namespace cmred {

struct Rect {
    double re_min, re_max, im_min, im_max;

    double width() const { return re_max - re_min; }
    double height() const { return im_max - im_min; }
    bool contains(cplx z, double slack = 0.0) const
    {
        return z.real() >= re_min - slack && z.real() <= re_max + slack &&
               z.imag() >= im_min - slack && z.imag() <= im_max + slack;
    }
};

enum class RootClass { unstable, center, stable };

struct CharacteristicRoot {
    cplx lambda;
    unsigned multiplicity = 1;
    double det_residual = 0; // |det Delta| at the converged point
    RootClass classification = RootClass::center;
    Vecc null_vec;        // unit right null vector of Delta(lambda)
    Vecc left_null_vec;   // unit left null vector
    double null_residual = 0;
};

struct SpectralSummary {
    std::vector<CharacteristicRoot> roots; // sorted by (Re, Im)
    Rect region{};
    bool hyperbolic = true;
    unsigned n_u = 0, n_c = 0, n_s = 0;
};

struct SpectralOptions {
    double root_tol = 1e-10;
    double center_tol = 1e-8;
    double boundary_tol = 1e-8;
    int max_depth = 40;
};

Matc characteristic_matrix(const KernelModel& k, cplx lambda);

cplx char_det(const KernelModel& k, cplx lambda);
// exact d/dlambda det Delta, via column replacement with the analytic
// transform derivative (stable near multiple roots)
cplx char_det_derivative(const KernelModel& k, cplx lambda);

// Winding number of det Delta around rect (= root count with multiplicity).
// Throws RootFindingError if |det| < boundary_tol on the contour.
unsigned count_roots(const KernelModel& k, const Rect& rect,
                     const SpectralOptions& opt = {});

SpectralSummary find_characteristic_roots(const KernelModel& k, const Rect& rect,
                                          const SpectralOptions& opt = {});

// Search rectangle wide enough that no root lies to its right (the transform
// norm falls below 1 there).
Rect default_search_rect(const KernelModel& k, double margin = 0.05, double im_max = 8.0);

struct SpectralGap {
    double alpha;
    double eps_gap;
};

// alpha = min(rho - margin, min |Re lambda| over noncentral roots) less a 1%
// safety factor; eps_gap = alpha / 10.  Throws on a degenerate gap
// (a noncentral root with |Re lambda| < 10 * center_tol).
SpectralGap spectral_gap_constants(const SpectralSummary& s, const KernelModel& k,
                                   double margin = 0.05,
                                   const SpectralOptions& opt = {});

} // namespace cmred

#pragma once
// The reduced ordinary differential equation on the center coordinates,
// its integration and empirical stability classification, and the
// side-by-side reduced-vs-full reduction check.

#include "cmred/manifold.hpp"

namespace cmred {

struct CentralSystem {
    const ReducedSystem* rs = nullptr;
    const CenterManifoldMap* map = nullptr;
    const NonlinearityModel* f = nullptr;

    double radius_r = 0;       // certified validity radius for ||Phi_c z||
    double escape_radius = 0;  // |z| beyond which an orbit counts as escaped

    // cubic fast path: f's scalar functional evaluated along the lattice
    bool lattice_fast = false;
    cplx lin_of_basis{0.0}; // functional of the basis column

    // rhs(z) = G z + H f(Phi_c z + F(z)).  outside (if given) reports
    // ||Phi_c z|| > radius_r; with_cutoff replaces f by f_delta.
    Vecc rhs(const Vecc& z, bool* outside = nullptr, bool with_cutoff = false,
             const CutoffConfig* cfg = nullptr) const;
};

CentralSystem make_central_system(const ReducedSystem& rs, const CenterManifoldMap& map,
                                  const NonlinearityModel& f, double radius_r,
                                  double escape_radius);

// Least-squares fit of rhs(z)/z^3 over real sample points (d_c == 1 only).
cplx fit_cubic_coefficient(const CentralSystem& sys,
                           const std::vector<double>& zs = {0.02, 0.04, 0.06, 0.08},
                           double* residual = nullptr);

struct CentralOrbit {
    std::vector<double> t;
    std::vector<Vecc> z;
    bool exited = false;
    double exit_time = -1;
};

// classical RK4, fixed step
CentralOrbit integrate_central(const CentralSystem& sys, const Vecc& z0, double t_end,
                               double h_ode = 0.01, std::size_t store_stride = 10);

enum class VerdictClass { stable, unstable, inconclusive };

const char* verdict_name(VerdictClass v);

struct EnsembleSettings {
    std::vector<double> radii; // empty = {r/50, r/20, r/10}
    double horizon = 0;        // 0 = 100/|fitted cubic coefficient|, clipped
    double h_ode = 0.01;
    std::size_t directions = 8; // per sphere for d_c == 2; d_c == 1 uses +-1
};

struct StabilityVerdict {
    VerdictClass classification = VerdictClass::inconclusive;
    std::vector<double> start_radii;
    std::vector<double> final_over_initial; // |z(T)|/|z0| per member
    std::vector<int> escaped;               // flags per member
    double horizon = 0;
};

StabilityVerdict classify_zero_stability(const CentralSystem& sys,
                                         const EnsembleSettings& es = {});

struct ReductionReport {
    bool hyperbolic_branch = false;
    VerdictClass central_verdict = VerdictClass::inconclusive;
    VerdictClass full_verdict = VerdictClass::inconclusive;
    bool agreement = false;
    double full_fitted_rate = 0; // fitted exponent of the full-equation norms
    StabilityVerdict central_evidence;
    std::vector<double> full_final_over_initial;
    std::vector<int> full_escaped;
};

struct FullEnsembleSettings {
    std::vector<double> radii;  // coordinate magnitudes of the starts
    double horizon = 0;
    double escape_norm = 0;     // ||x_t||_X escape threshold; 0 = auto
};

// Center branch: classify the reduced equation AND simulate the full
// equation from on-manifold starts; hyperbolic branch: linearized verdict
// from the root classification plus full-equation rate fit.
ReductionReport reduction_report(const CentralSystem& sys, const EnsembleSettings& es = {},
                                 const FullEnsembleSettings& fs = {});

} // namespace cmred

#pragma once
// Cutoff nonlinearity, the weighted-space contraction whose fixed point
// parameterizes the center manifold, the graph map and its tangent map,
// stable/unstable analogues, and attractivity diagnostics.

#include "cmred/decomposition.hpp"

#include <map>
#include <mutex>
#include <optional>

namespace cmred {

struct AttractivityConstants {
    double K = 0;        // C C1 zeta_*(delta)
    double mu = 0;       // K + eps_gap
    double mu_prime = 0; // mu + K L(delta)
    double beta0 = 0;    // alpha - K (alpha - eps_gap) / (alpha - mu_prime)
    bool valid = false;  // mu' < alpha and beta0 > 0
};

struct CutoffConfig {
    double delta = 0.1;  // working cutoff radius
    double delta1 = 0.5; // admissible ceiling

    double eta = 0.2; // weight exponent, eps_gap < eta < alpha
    double alpha = 0, eps_gap = 0;
    double C = 1, C1 = 1;

    double zeta_working = 0;     // zeta_*(delta)
    double M1 = 0;               // sup ||D f_delta|| estimate
    double L_formula_working = 0;

    // quantitative certificate at the bisected radius
    double delta_certified = 0;
    double zeta_certified = 0;
    double smallness_lhs = 0; // zeta C C1 (1/(eta-eps) + 2/(alpha+eta) + 2/(alpha-eta))
    double L_certified = 0;
    AttractivityConstants certified;

    bool delta_overridden = false;

    double t_path = 0;          // cap on the path half-length (0 = from tail tol)
    double path_tail_tol = 1e-3;

    // bump profile: 1 on [0,2], quintic-smoothstep descent on [2,3], 0 beyond
    static double chi(double t);
    static constexpr double chi_slope_max = 1.875;
};

// zeta_*(delta): sampled sup of ||Df|| over the ball of radius 3 delta,
// times (1 + 3 sup|chi'|).
double estimate_zeta(const ReducedSystem& rs, const NonlinearityModel& f, double delta,
                     Rng rng);

struct SelectDeltaOptions {
    double delta1 = 0.5;
    double delta_override = 0; // > 0 pins the working radius
    double eta = 0;            // 0 = (eps_gap + alpha)/2
};

// Bisects for the largest radius satisfying the smallness condition and the
// formula Lipschitz bound L <= 1; fills both the certified block and the
// working-radius diagnostics.  Throws if no radius above 1e-12 qualifies.
CutoffConfig select_delta(const ReducedSystem& rs, const NonlinearityModel& f, Rng rng,
                          const SelectDeltaOptions& opt = {});

// f_delta(phi): cutoff factors over the projected norms.  With a nonempty
// center set the factors are chi(||P_su phi||/delta) chi(||P_c phi||/delta);
// for hyperbolic systems chi(||P_u||/delta) chi(||P_s||/delta).
Vecc cutoff_apply(const CutoffConfig& cfg, const ReducedSystem& rs,
                  const NonlinearityModel& f, const Segment& phi);

// directional derivative of f_delta (analytic in the flat region, central
// differences on the cutoff shell)
Vecc cutoff_derivative_dir(const CutoffConfig& cfg, const ReducedSystem& rs,
                           const NonlinearityModel& f, const Segment& phi,
                           const Segment& dir);

struct PathGrid {
    double h = 0.05;
    std::size_t M = 400; // nodes -M..M, t_j = j h
    double eta = 0.2;

    std::size_t nodes() const { return 2 * M + 1; }
    double time_of(std::size_t p) const { return (double(p) - double(M)) * h; }
    double weight(std::size_t p) const { return std::exp(-eta * std::abs(time_of(p))); }
};

PathGrid make_path_grid(const Grid& g, double eta, double alpha, double tail_tol = 1e-3,
                        double t_cap = 60.0);

// Path in the weighted space, stored implicitly: the center/unstable
// coordinates plus the forced-trajectory values whose projected splice is the
// stable part.  Segments are reconstructed on demand, which keeps a path at
// O(nodes) storage instead of O(nodes * grid), at the same flop count.
struct WeightedPath {
    PathGrid pg;
    std::size_t dc = 0, du = 0, m = 1;
    std::vector<cplx> z, w;             // node-major coords of y (dc / du per node)
    std::vector<std::vector<cplx>> xfs; // forced trajectory values, per component
    std::vector<cplx> zeta, omega;      // node-major coords of the forced part

    void axpy(cplx a, const WeightedPath& other); // linear combination
};

WeightedPath alloc_path(const PathGrid& pg, std::size_t dc, std::size_t du, std::size_t m);

// Paths produced by the solver keep zeta/omega equal to the projected
// coordinates of the forced splice, so that the stored z/w are exactly the
// center/unstable coordinates of y.  Hand-assembled paths (tests) call this
// to restore the invariant after editing xfs.
void refresh_forced_coords(WeightedPath& y, const ReducedSystem& rs);

WeightedPath initial_center_path(const PathGrid& pg, const ReducedSystem& rs, const Vecc& psi);

// reconstruct y(t_p) into out
void path_segment(const WeightedPath& y, const ReducedSystem& rs, std::size_t p, Segment& out);

double path_norm(const WeightedPath& y, const ReducedSystem& rs);
double path_diff_norm(const WeightedPath& a, const WeightedPath& b, const ReducedSystem& rs);

// One application of the weighted-space map: center/unstable terms by exact
// exponential-trapezoid quadrature of the reduced flows, stable term as the
// projected forced solve driven by f_delta along the path.
WeightedPath contraction_step(const CutoffConfig& cfg, const ReducedSystem& rs,
                              const NonlinearityModel& f, const Vecc& psi,
                              const WeightedPath& y);

struct FixedPointResult {
    WeightedPath path;
    std::size_t iterations = 0;
    std::vector<double> increments;
    bool converged = false;
};

FixedPointResult solve_center_fixed_point(const CutoffConfig& cfg, const ReducedSystem& rs,
                                          const NonlinearityModel& f, const Vecc& psi,
                                          double fp_tol = 1e-8, std::size_t max_iter = 200,
                                          const WeightedPath* warm_start = nullptr);

// graph value F(psi) = P_su(fixed point at 0)
Segment center_map(const ReducedSystem& rs, const WeightedPath& fixed_path);

// Tangent of the fixed point at psi: Neumann series columns evaluated on the
// path grid.  Throws on series stall (term ratio > 0.9).
struct TangentMap {
    std::vector<WeightedPath> columns; // d_c columns
    std::size_t terms_used = 0;
};

TangentMap tangent_map(const CutoffConfig& cfg, const ReducedSystem& rs,
                       const NonlinearityModel& f, const Vecc& psi,
                       const WeightedPath& fixed_path, double term_tol = 1e-10);

// Memoizing evaluator of the graph map over center coordinates.  For a
// one-dimensional real center direction an interpolation lattice is built
// eagerly (warm-started sweep from 0); other cases solve per query behind a
// mutex-guarded cache.
class CenterManifoldMap {
public:
    CenterManifoldMap(const CutoffConfig& cfg, const ReducedSystem& rs,
                      const NonlinearityModel& f, double radius, double fp_tol = 1e-8,
                      double spacing_hint = 0);

    bool lattice_enabled() const { return lattice_enabled_; }
    double radius() const { return radius_; }
    double spacing() const { return spacing_; }

    // F(psi); psi given in center coordinates
    Segment evaluate(const Vecc& psi) const;
    double graph_norm(const Vecc& psi) const;

    // value of a linear functional along the lattice (cubic fast path);
    // lin must be the functional cached at construction
    cplx lattice_linear_value(double zreal) const;
    void cache_linear_functional(const std::function<cplx(const Segment&)>& lin);

    double measured_lipschitz() const { return measured_lipschitz_; }
    std::size_t total_iterations() const { return total_iterations_; }
    std::size_t lattice_points() const { return nodes_.size(); }

    struct LatticeNode {
        double zc = 0;
        Segment graph;
        double graph_norm = 0;
        cplx lin_value{0.0};
        double lip_local = 0;
    };
    const std::vector<LatticeNode>& lattice() const { return nodes_; }

    const CutoffConfig& cutoff() const { return cfg_; }

private:
    Segment solve_at(const Vecc& psi, const WeightedPath* warm) const;

    const CutoffConfig cfg_;
    const ReducedSystem& rs_;
    const NonlinearityModel& f_;
    double radius_, fp_tol_, spacing_ = 0;
    bool lattice_enabled_ = false;
    std::vector<LatticeNode> nodes_; // sorted by zc
    double measured_lipschitz_ = 0;
    std::size_t total_iterations_ = 0;

    mutable std::mutex memo_mutex_;
    mutable std::map<std::vector<long long>, Segment> memo_;
};

AttractivityConstants attractivity_constants(double C, double C1, double zeta, double L,
                                             double alpha, double eps_gap);

struct AttractivityDiagnostics {
    double fitted_rate = 0;       // least-squares slope of log||xi(t)||
    AttractivityConstants bounds; // certified constants used for the envelope
    bool satisfied = false;       // ||xi(t)|| <= slack * C ||xi(0)|| e^{-beta0 t}
    bool stayed_in_domain = true;
    double first_exit_time = -1;
    std::vector<double> times, xi_norms;
};

// xi(t) = P_s x_t - F(P_c x_t) along a computed trajectory
AttractivityDiagnostics attractivity_diagnostics(const CutoffConfig& cfg,
                                                 const ReducedSystem& rs,
                                                 const CenterManifoldMap& map,
                                                 const Trajectory& tr,
                                                 double omega_radius, double slack = 1.5);

// least-squares slope of log(y) vs t, ignoring values below floor_val
double fit_log_slope(const std::vector<double>& t, const std::vector<double>& y,
                     double floor_val = 1e-14);

// Hyperbolic graph maps (center set empty).  The stable branch lives on the
// forward half-line, the unstable one on the backward half-line.
struct HyperbolicResult {
    Segment graph_value; // F^s(psi) in E^u, or F^u(psi) in E^s
    double graph_norm = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

HyperbolicResult hyperbolic_map(const CutoffConfig& cfg, const ReducedSystem& rs,
                                const NonlinearityModel& f, bool stable_branch,
                                const Segment& psi_part, double t_span, double fp_tol = 1e-8,
                                std::size_t max_iter = 200);

} // namespace cmred

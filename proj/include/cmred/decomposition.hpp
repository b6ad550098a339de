#pragma once
// Center/unstable subspace bases, dual bases through the kernel-weighted
// pairing <<psi, phi>> = int int psi(xi - theta) K(-theta) phi(xi), the
// spectral projections, and the reduced matrices G, H.

#include "cmred/phasespace.hpp"
#include "cmred/spectral.hpp"

namespace cmred {

// For a fixed forward row function psi the pairing is linear in phi; folding
// the double quadrature once turns every later application into a single
// weighted dot product over the segment grid.
class PairingFunctional {
public:
    PairingFunctional() = default;
    // psi_rows[k] = row vector psi(k h), k = 0..n
    PairingFunctional(const KernelTables& kt, const std::vector<Vecc>& psi_rows);

    cplx apply(const Segment& phi) const;

    void add_scaled(cplx a, const PairingFunctional& other);

private:
    std::vector<std::vector<cplx>> w_; // per component, over grid nodes
    std::size_t nodes_ = 0;
};

// Direct evaluation of the pairing for an arbitrary forward function; used
// for Gram matrices and as the oracle the folded functional is tested against.
cplx bilinear_form(const KernelTables& kt, const std::function<Vecc(double)>& psi_row,
                   const Segment& phi);

struct SubspaceBasis {
    std::size_t d = 0;
    std::vector<cplx> lambdas;    // simple roots spanning the subspace
    std::vector<Vecc> null_vecs;  // unit right null vectors
    std::vector<Segment> columns; // phi_i(theta) = e^{lambda theta} v
};

struct DualRowTerm {
    Vecc row;    // coefficient times left null vector (row vector)
    cplx lambda; // psi term = row * e^{-lambda tau}
};

struct DualBasis {
    std::size_t d = 0;
    std::vector<PairingFunctional> rows; // normalized: <<psi_i, phi_j>> = delta_ij
    std::vector<std::vector<DualRowTerm>> symbolic; // same rows in closed form
    std::vector<double> xsharp_norms;
    Matc gram;                           // pre-normalization Gram matrix

    Vecc row_at(std::size_t i, double tau) const; // psi_i(tau)
};

SubspaceBasis subspace_basis(const KernelModel& k, const Grid& g,
                             const SpectralSummary& s, RootClass which);

DualBasis dual_basis(const KernelModel& k, const KernelTables& kt,
                     const SubspaceBasis& basis, const SpectralSummary& s);

struct ReducedSystem {
    const Grid* grid = nullptr;
    KernelModel kernel;
    KernelTables tables;
    SpectralSummary spectrum;

    SubspaceBasis center_basis, unstable_basis;
    DualBasis center_dual, unstable_dual;

    Matc H_c, H_u; // d x m mollified injection matrices

    double alpha = 0, eps_gap = 0;
    double C_est = 1, C1_est = 1;
    std::size_t constant_sample_size = 0;

    std::size_t d_c() const { return center_basis.d; }
    std::size_t d_u() const { return unstable_basis.d; }

    Vecc center_coords(const Segment& phi) const;
    Vecc unstable_coords(const Segment& phi) const;

    // out += Phi_c z (resp. Phi_u w)
    void add_center_part(const Vecc& z, Segment& out) const;
    void add_unstable_part(const Vecc& w, Segment& out) const;

    Segment project_center(const Segment& phi, Vecc* coords = nullptr) const;
    // phi - center part - unstable part
    Segment project_su(const Segment& phi) const;

    double center_norm_of(const Vecc& z) const; // ||Phi_c z||_X

    // e^{t G} z for the diagonal reduced generator
    static Vecc propagate(const std::vector<cplx>& lambdas, double t, const Vecc& z);
};

// Assembles bases, duals, G (diagonal via the root list) and H (mollified
// injection, Richardson-extrapolated over n in {8,16,32}).
ReducedSystem reduced_matrices(const KernelModel& k, const Grid& g,
                               const SpectralSummary& s);

struct DecompositionConstants {
    double C;
    double C1;
    std::size_t sample_size;
    double fit_worst_ratio; // largest observed ||T^s(t)phi|| e^{alpha t}/||phi||
};

// Empirical working estimates (sampled lower bounds) of the projection-norm
// sum C1 and the stable-decay constant C.
DecompositionConstants estimate_decomposition_constants(const ReducedSystem& rs,
                                                        double alpha, Rng rng,
                                                        std::size_t sample_size = 32,
                                                        double t_fit = 8.0);

} // namespace cmred

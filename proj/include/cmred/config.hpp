#pragma once
// Flat INI-style problem configuration: sections of key = value lines,
// '#'/';' comments.  Parse errors carry line numbers.

#include "cmred/errors.hpp"
#include "cmred/kernel.hpp"

#include <map>
#include <string>
#include <vector>

namespace cmred {

struct ProblemConfig {
    // kernel
    std::size_t dim = 1;
    double rho = 0.5;
    std::vector<KernelTerm> terms;

    // nonlinearity
    std::string nonlinearity_form = "zero"; // zero | cubic
    double eps_cubic = 0.0;

    // grid
    double h = 0.03125;
    double theta = 0;          // 0 = max(20/rho, 40)
    double t_path = 0;         // 0 = from tail tolerance
    double path_tail_tol = 1e-3;
    int max_mollifier_n = 32;

    // tolerances
    double fp_tol = 1e-8;
    double root_tol = 1e-10;
    double center_tol = 1e-8;
    double boundary_tol = 1e-8;

    // spectrum search
    double re_min = 0; // 0 = -rho + margin
    double re_max = 0; // 0 = auto bound
    double im_max = 4.0;
    double margin = 0.05;

    // manifold
    double delta = 0;  // 0 = certified radius
    double delta1 = 0.5;
    double lattice_radius = 0; // 0 = 0.45 * delta
    double eta = 0;            // 0 = (eps_gap + alpha)/2

    // central
    double radius_r = 0;      // 0 = min(lattice radius, 0.9 delta)
    double escape_radius = 0; // 0 = 2 * max ensemble radius

    // ensembles
    std::vector<double> ensemble_radii; // empty = r/50, r/20, r/10
    double ensemble_horizon = 0;
    std::size_t ensemble_directions = 8;
    std::vector<double> full_radii;
    double full_horizon = 0;
    std::string expect_verdict; // "", "stable", "unstable"

    // simulate
    double phi_const = 0.1;
    double t_end = 100.0;

    std::uint64_t seed = 42;
    std::string out_dir; // default output directory (CLI --out overrides)

    std::string source_path;
    std::string raw_text;

    KernelModel make_kernel() const;
    double effective_theta() const;

    static ProblemConfig load(const std::string& path);
    static ProblemConfig parse(const std::string& text, const std::string& path = "<inline>");
};

// FNV-1a over the raw config bytes, hex-encoded; embedded in every report.
std::string config_hash(const std::string& raw_text);

} // namespace cmred

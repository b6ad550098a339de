#pragma once
// Stage-by-stage assembly shared by the CLI commands and the acceptance
// suite: spectrum -> decomposition -> cutoff/manifold -> central system.

#include "cmred/central.hpp"
#include "cmred/config.hpp"
#include "cmred/report.hpp"

#include <memory>

namespace cmred {

struct Pipeline {
    ProblemConfig cfg;
    KernelModel kernel;
    std::unique_ptr<Grid> grid;
    NonlinearityModel f;

    Rect rect{};
    SpectralOptions spectral_opts{};
    SpectralSummary summary;

    std::unique_ptr<ReducedSystem> reduced;
    DecompositionConstants constants{1, 1, 0, 0};

    CutoffConfig cutoff;
    double lattice_radius = 0;
    std::unique_ptr<CenterManifoldMap> map;

    double radius_r = 0, escape_radius = 0;
    CentralSystem central;

    Pipeline() = default;
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;
};

std::unique_ptr<Pipeline> make_pipeline(const ProblemConfig& cfg);

void run_spectrum_stage(Pipeline& p);
void run_decomposition_stage(Pipeline& p); // needs spectrum
void run_manifold_stage(Pipeline& p);      // needs decomposition
void run_central_stage(Pipeline& p);       // needs manifold (center case)

// constants ledger object embedded in every JSON report; unfilled stages null
Json constants_ledger(const Pipeline& p, bool have_decomposition, bool have_manifold);
Json report_head(const Pipeline& p, const std::string& command);

EnsembleSettings ensemble_settings(const Pipeline& p);
FullEnsembleSettings full_ensemble_settings(const Pipeline& p);

} // namespace cmred

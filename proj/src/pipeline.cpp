#include "cmred/pipeline.hpp"

#include <cmath>

namespace cmred {

std::unique_ptr<Pipeline> make_pipeline(const ProblemConfig& cfg)
{
    auto p = std::make_unique<Pipeline>();
    p->cfg = cfg;
    p->kernel = cfg.make_kernel();
    p->grid = std::make_unique<Grid>(make_grid(cfg.h, cfg.effective_theta(), cfg.rho));

    if (cfg.nonlinearity_form == "cubic")
        p->f = make_cubic_functional(p->kernel, *p->grid, cfg.eps_cubic);
    else
        p->f = NonlinearityModel::zero(cfg.dim);

    p->spectral_opts.root_tol = cfg.root_tol;
    p->spectral_opts.center_tol = cfg.center_tol;
    p->spectral_opts.boundary_tol = cfg.boundary_tol;

    const Rect def = default_search_rect(p->kernel, cfg.margin, cfg.im_max);
    p->rect = def;
    if (cfg.re_min != 0)
        p->rect.re_min = cfg.re_min;
    if (cfg.re_max != 0)
        p->rect.re_max = cfg.re_max;
    return p;
}

void run_spectrum_stage(Pipeline& p)
{
    p.summary = find_characteristic_roots(p.kernel, p.rect, p.spectral_opts);
}

void run_decomposition_stage(Pipeline& p)
{
    p.reduced = std::make_unique<ReducedSystem>(reduced_matrices(p.kernel, *p.grid, p.summary));
    Rng rng(p.cfg.seed, 1);
    p.constants = estimate_decomposition_constants(*p.reduced, p.reduced->alpha, rng);
    p.reduced->C_est = p.constants.C;
    p.reduced->C1_est = p.constants.C1;
    p.reduced->constant_sample_size = p.constants.sample_size;
}

void run_manifold_stage(Pipeline& p)
{
    SelectDeltaOptions opt;
    opt.delta1 = p.cfg.delta1;
    opt.delta_override = p.cfg.delta;
    opt.eta = p.cfg.eta;
    Rng rng(p.cfg.seed, 2);
    p.cutoff = select_delta(*p.reduced, p.f, rng, opt);
    p.cutoff.t_path = p.cfg.t_path;
    p.cutoff.path_tail_tol = p.cfg.path_tail_tol;

    if (p.reduced->d_c() == 0)
        return; // hyperbolic: no center manifold to build

    p.lattice_radius = p.cfg.lattice_radius > 0 ? p.cfg.lattice_radius : 0.45 * p.cutoff.delta;
    p.map = std::make_unique<CenterManifoldMap>(p.cutoff, *p.reduced, p.f, p.lattice_radius,
                                                p.cfg.fp_tol);
    if (p.f.linear_functional)
        p.map->cache_linear_functional(p.f.linear_functional);
}

void run_central_stage(Pipeline& p)
{
    p.radius_r = p.cfg.radius_r > 0 ? p.cfg.radius_r
                                    : std::min(p.lattice_radius, 0.9 * p.cutoff.delta);
    double max_radius = p.radius_r;
    for (double r : p.cfg.ensemble_radii)
        max_radius = std::max(max_radius, r);
    p.escape_radius = p.cfg.escape_radius > 0 ? p.cfg.escape_radius : 2.0 * max_radius;
    if (p.map) {
        p.central = make_central_system(*p.reduced, *p.map, p.f, p.radius_r, p.escape_radius);
    } else {
        // hyperbolic: only the full-equation side of the reduction check runs
        p.central.rs = p.reduced.get();
        p.central.f = &p.f;
        p.central.radius_r = p.radius_r;
        p.central.escape_radius = p.escape_radius;
    }
}

EnsembleSettings ensemble_settings(const Pipeline& p)
{
    EnsembleSettings es;
    es.radii = p.cfg.ensemble_radii;
    es.horizon = p.cfg.ensemble_horizon;
    es.directions = p.cfg.ensemble_directions;
    es.h_ode = std::min(p.cfg.h, 0.01);
    return es;
}

FullEnsembleSettings full_ensemble_settings(const Pipeline& p)
{
    FullEnsembleSettings fs;
    fs.radii = p.cfg.full_radii;
    fs.horizon = p.cfg.full_horizon;
    return fs;
}

Json constants_ledger(const Pipeline& p, bool have_decomposition, bool have_manifold)
{
    Json j = Json::object();
    if (have_decomposition) {
        j.set("C", p.constants.C);
        j.set("C1", p.constants.C1);
        j.set("constant_sample_size", p.constants.sample_size);
        j.set("alpha", p.reduced->alpha);
        j.set("eps_gap", p.reduced->eps_gap);
    } else {
        j.set("C", nullptr);
        j.set("C1", nullptr);
        j.set("alpha", nullptr);
        j.set("eps_gap", nullptr);
    }
    if (have_manifold) {
        j.set("eta", p.cutoff.eta);
        j.set("delta", p.cutoff.delta);
        j.set("delta_certified", p.cutoff.delta_certified);
        j.set("delta_overridden", p.cutoff.delta_overridden);
        j.set("zeta_star_delta", p.cutoff.zeta_working);
        j.set("M1", p.cutoff.M1);
        j.set("smallness_lhs_certified", p.cutoff.smallness_lhs);
        j.set("L_certified", p.cutoff.L_certified);
        j.set("L_formula_working", p.cutoff.L_formula_working);
        j.set("L_measured", p.map ? Json(p.map->measured_lipschitz()) : Json(nullptr));
        j.set("K", p.cutoff.certified.K);
        j.set("mu", p.cutoff.certified.mu);
        j.set("mu_prime", p.cutoff.certified.mu_prime);
        j.set("beta0", p.cutoff.certified.beta0);
    } else {
        j.set("eta", nullptr);
        j.set("delta", nullptr);
        j.set("L_certified", nullptr);
        j.set("beta0", nullptr);
    }
    return j;
}

Json report_head(const Pipeline& p, const std::string& command)
{
    Json j = Json::object();
    j.set("command", command);
    j.set("config", p.cfg.source_path);
    j.set("config_hash", config_hash(p.cfg.raw_text));
    j.set("seed", double(p.cfg.seed));
    j.set("rng_algorithm", Rng::algorithm());
    j.set("simd_backend", simd::backend_name());
    j.set("grid", Json::object({{"h", Json(p.grid->h)},
                                {"theta", Json(p.grid->theta)},
                                {"nodes", Json(p.grid->n + 1)},
                                {"history_truncation_bound", Json(std::exp(-p.grid->rho * p.grid->theta))}}));
    return j;
}

} // namespace cmred

#include "commands.hpp"

#include <charconv>

#include "penmix/error.hpp"

namespace penmix::cli {

namespace {

void add_common(CLI::App& app, CommonOptions& o) {
    app.add_option("--config", o.config, "Flat key = value config file; command line flags override it");
    app.add_option("--out", o.out, "Output directory");
    app.add_option("--seed", o.seed, "Master random seed");
    app.add_option("--jobs", o.jobs, "Parallel workers")->check(CLI::PositiveNumber);
    app.add_flag("--paper-scale", o.paper_scale, "Full-scale settings: 50 lambdas, 500 replicates, 50 restarts");
}

void add_tuning(CLI::App& app, TuningOptions& o) {
    app.add_option("--family", o.family, "Penalty: MIXGL1, MIXGL2, ADL, MIXLASSO_L2, MIXSCAD_L2, NONE");
    app.add_option("--lambda", o.lambda, "Fixed lambda, or 'auto' to tune by BIC");
    app.add_option("--gamma", o.gamma, "Adaptive-weight exponent used with a fixed lambda");
    app.add_option("--ridge_lambda", o.ridge_lambda, "Ridge weight used with a fixed lambda");
    app.add_option("--scad_a", o.scad_a, "SCAD shape parameter");
    app.add_option("--n_lambdas", o.n_lambdas, "Points on each lambda path")->check(CLI::Range(2, 1000));
    app.add_option("--lambda_min_ratio", o.lambda_min_ratio, "Smallest lambda relative to lambda_max");
    app.add_option("--gammas", o.gammas, "Gamma grid for adaptive penalties");
    app.add_option("--ridge_lambdas", o.ridge_lambdas, "Ridge grid for the l2 comparators");
}

void add_control(CLI::App& app, ControlOptions& o) {
    app.add_option("--max_em_iter", o.max_em_iter)->check(CLI::PositiveNumber);
    app.add_option("--em_tol", o.em_tol);
    app.add_option("--max_irls_iter", o.max_irls_iter)->check(CLI::PositiveNumber);
    app.add_option("--irls_tol", o.irls_tol);
    app.add_option("--n_starts", o.n_starts, "Random starts per fit")->check(CLI::PositiveNumber);
    app.add_option("--pi_floor", o.pi_floor);
}

} // namespace

void add_fit_options(CLI::App& app, FitOptions& o) {
    add_common(app, o.common);
    add_tuning(app, o.tuning);
    add_control(app, o.control);
    app.add_option("--data", o.data, "CSV with a header row")->required();
    app.add_option("--response", o.response, "Response column name")->required();
    app.add_option("--response_family", o.response_family, "gaussian, bernoulli or binomial:<m>");
    app.add_option("--K", o.K, "Number of components")->check(CLI::Range(1, 20));
    app.add_flag("--quadratic", o.quadratic, "Append squared covariates");
}

void add_sam_options(CLI::App& app, SamOptions& o) {
    add_common(app, o.common);
    add_tuning(app, o.tuning);
    add_control(app, o.control);
    app.add_option("--presence", o.presence, "Sites x species 0/1 CSV")->required();
    app.add_option("--covariates", o.covariates, "Sites x covariates CSV")->required();
    app.add_option("--site_column", o.site_column, "Site id column present in both files");
    app.add_option("--k_min", o.k_min)->check(CLI::Range(1, 20));
    app.add_option("--k_max", o.k_max)->check(CLI::Range(1, 20));
    app.add_option("--bic_count", o.bic_count, "species or observations");
    app.add_flag("--quadratic", o.quadratic, "Append squared covariates");
}

void add_simulate_options(CLI::App& app, SimulateOptions& o) {
    add_common(app, o.common);
    add_tuning(app, o.tuning);
    add_control(app, o.control);
    app.add_option("--models", o.models, "Simulation models (I..IV)");
    app.add_option("--sizes", o.sizes, "Sample sizes");
    app.add_option("--pi1", o.pi1, "First-component proportions");
    app.add_option("--methods", o.methods, "Penalties to compare");
    app.add_option("--replicates", o.replicates, "Replicates per cell")->check(CLI::PositiveNumber);
    app.add_option("--n_test", o.n_test, "Test observations per replicate")->check(CLI::PositiveNumber);
}

void add_stability_options(CLI::App& app, StabilityOptions& o) {
    add_common(app, o.common);
    add_tuning(app, o.tuning);
    add_control(app, o.control);
    app.add_option("--presence", o.presence, "Sites x species 0/1 CSV (synthetic data when empty)");
    app.add_option("--covariates", o.covariates, "Sites x covariates CSV");
    app.add_option("--site_column", o.site_column);
    app.add_option("--sites", o.sites)->check(CLI::PositiveNumber);
    app.add_option("--species", o.species)->check(CLI::PositiveNumber);
    app.add_option("--n_covariates", o.n_covariates)->check(CLI::PositiveNumber);
    app.add_option("--archetypes", o.archetypes)->check(CLI::PositiveNumber);
    app.add_option("--data_seed", o.data_seed, "Seed of the synthetic data set");
    app.add_option("--K", o.K)->check(CLI::Range(1, 20));
    app.add_option("--baseline", o.baseline, "Comparison penalty (same lambda/gamma unless NONE)");
    app.add_option("--n_restarts", o.n_restarts, "Random restarts per penalty");
}

TuningGrid make_grid(const TuningOptions& o, BicCount count) {
    TuningGrid grid;
    grid.n_lambdas = o.n_lambdas;
    grid.lambda_min_ratio = o.lambda_min_ratio;
    grid.gammas = o.gammas;
    grid.ridge_lambdas = o.ridge_lambdas;
    grid.bic_count = count;
    grid.validate();
    return grid;
}

FitControl make_control(const ControlOptions& o, std::uint64_t seed) {
    FitControl c;
    c.max_em_iter = o.max_em_iter;
    c.em_tol = o.em_tol;
    c.max_irls_iter = o.max_irls_iter;
    c.irls_tol = o.irls_tol;
    c.n_starts = o.n_starts;
    c.pi_floor = o.pi_floor;
    c.seed = seed;
    return c;
}

std::optional<PenaltySpec> fixed_spec(const TuningOptions& o) {
    if (o.lambda == "auto") return std::nullopt;
    double lambda = 0.0;
    const auto* end = o.lambda.data() + o.lambda.size();
    auto [ptr, ec] = std::from_chars(o.lambda.data(), end, lambda);
    if (ec != std::errc() || ptr != end) throw InputError("lambda must be a number or 'auto', got '" + o.lambda + "'");
    PenaltySpec spec;
    spec.family = parse_penalty_family(o.family);
    spec.lambda = spec.family == PenaltyFamily::none ? 0.0 : lambda;
    spec.gamma = o.gamma;
    spec.ridge_lambda = o.ridge_lambda;
    spec.scad_a = o.scad_a;
    spec.validate();
    return spec;
}

} // namespace penmix::cli

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "penmix/penalty.hpp"
#include "penmix/selection.hpp"
#include "penmix/solver.hpp"

namespace penmix::cli {

struct CommonOptions {
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 1;
    int jobs = 1;
    bool paper_scale = false;
};

struct TuningOptions {
    std::string family = "MIXGL1";
    // "auto" tunes over the grid; a number fixes lambda (and gamma below).
    std::string lambda = "auto";
    double gamma = 1.0;
    double ridge_lambda = 0.01;
    double scad_a = kDefaultScadA;
    int n_lambdas = 30;
    double lambda_min_ratio = 1e-4;
    std::vector<double> gammas{0.5, 1.0, 2.0};
    std::vector<double> ridge_lambdas{1e-3, 1e-2, 1e-1};
};

struct ControlOptions {
    int max_em_iter = 500;
    double em_tol = 1e-6;
    int max_irls_iter = 25;
    double irls_tol = 1e-8;
    int n_starts = 10;
    double pi_floor = 1e-4;
};

struct FitOptions {
    CommonOptions common;
    TuningOptions tuning;
    ControlOptions control;
    std::string data;
    std::string response;
    std::string response_family = "bernoulli";
    int K = 2;
    bool quadratic = false;
};

struct SamOptions {
    CommonOptions common;
    TuningOptions tuning;
    ControlOptions control;
    std::string presence;
    std::string covariates;
    std::string site_column = "site";
    int k_min = 1;
    int k_max = 5;
    std::string bic_count = "species";
    bool quadratic = false;
};

struct SimulateOptions {
    CommonOptions common;
    TuningOptions tuning;
    ControlOptions control;
    std::vector<std::string> models{"I", "II", "III", "IV"};
    std::vector<long> sizes{100, 200, 400};
    std::vector<double> pi1{0.5};
    std::vector<std::string> methods{"MIXGL1", "MIXGL2", "ADL", "MIXLASSO_L2", "MIXSCAD_L2"};
    int replicates = 50;
    long n_test = 10000;
};

struct StabilityOptions {
    CommonOptions common;
    TuningOptions tuning;
    ControlOptions control;
    std::string presence;
    std::string covariates;
    std::string site_column = "site";
    // Synthetic data, used when no presence file is given.
    long sites = 400;
    long species = 100;
    long n_covariates = 4;
    long archetypes = 5;
    std::uint64_t data_seed = 1;
    int K = 5;
    std::string baseline = "NONE";
    int n_restarts = 50;
};

void add_fit_options(CLI::App& app, FitOptions& o);
void add_sam_options(CLI::App& app, SamOptions& o);
void add_simulate_options(CLI::App& app, SimulateOptions& o);
void add_stability_options(CLI::App& app, StabilityOptions& o);

TuningGrid make_grid(const TuningOptions& o, BicCount count);
FitControl make_control(const ControlOptions& o, std::uint64_t seed);
/// Fixed spec when lambda is numeric; std::nullopt for "auto".
std::optional<PenaltySpec> fixed_spec(const TuningOptions& o);

/// Replicate and restart counts after --paper-scale is applied.
int effective_replicates(const SimulateOptions& o);
int effective_restarts(const StabilityOptions& o);

int cmd_fit(const FitOptions& o, const CLI::App& app);
int cmd_sam(const SamOptions& o, const CLI::App& app);
int cmd_simulate(const SimulateOptions& o, const CLI::App& app);
int cmd_stability(const StabilityOptions& o, const CLI::App& app);

/// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv);

} // namespace penmix::cli

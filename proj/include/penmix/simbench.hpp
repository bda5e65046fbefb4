#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "penmix/dataset.hpp"
#include "penmix/params.hpp"
#include "penmix/penalty.hpp"
#include "penmix/sam.hpp"
#include "penmix/selection.hpp"
#include "penmix/solver.hpp"

namespace penmix {

// ---------------------------------------------------------------------------
// Binomial FMR simulation models I-IV.

enum class SimModel { I = 1, II = 2, III = 3, IV = 4 };

std::string_view to_string(SimModel model);
SimModel parse_sim_model(std::string_view text);

struct SimScenario {
    SimModel model = SimModel::I;
    Index n = 100;
    double pi1 = 0.5;
    std::uint64_t seed = 1;
    int trial_size = 10;
    double correlation_base = 0.5;
};

/// Covariates per component: 7, 9, 12 for n = 100, 200, 400; other n use
/// ceil(4 n^(1/4)) - 5.
Index sim_covariate_count(Index n);

/// Two-component truth for a model, zero-padded to p covariates.
FmrParams sim_true_params(SimModel model, Index p, double pi1);

struct SimulatedData {
    Dataset data;
    FmrParams truth;
    std::vector<int> labels; // 0-based component of each observation
    MatrixXd raw_X;
};

/// AR(1)-correlated Gaussian covariates, Bernoulli(pi) labels and binomial
/// responses. The returned design is standardized.
SimulatedData generate_dataset(const SimScenario& scenario);

/// Fresh covariates and labels from the same truth, standardized with
/// `train_stats`. Draws come from a stream disjoint from generate_dataset.
Dataset generate_test_dataset(const SimScenario& scenario, const FmrParams& truth,
                              const StandardizationStats& train_stats, Index n_test);

struct CoefficientPartition {
    std::vector<std::pair<Index, Index>> set_A; // truly nonzero
    std::vector<std::pair<Index, Index>> set_B; // zero, partly uninformative covariate
    std::vector<std::pair<Index, Index>> set_C; // zero, completely uninformative covariate
};

CoefficientPartition partition_coefficients(const MatrixXd& true_beta);

/// Permutation minimizing ||estimated[perm] - truth||_2 over all K!
/// orderings (K <= 8). Ties keep the lexicographically first, so the
/// identity wins a tie.
std::vector<int> resolve_labels(const MatrixXd& estimated_beta, const MatrixXd& true_beta);

struct SelectionRates {
    double sensitivity = 0.0;
    double specificity = 0.0;
};

/// Exact-zero scoring of a label-resolved estimate. Throws EmptySet when A
/// or B u C is empty.
SelectionRates sensitivity_specificity(const MatrixXd& estimated_beta,
                                       const CoefficientPartition& partition);

double predicted_log_likelihood(const FitResult& fit, const Dataset& test);

/// Subtracts each row's mean (rows = replicates, columns = methods).
MatrixXd center_across_methods(const MatrixXd& values);

// ---------------------------------------------------------------------------
// Campaign over methods x scenarios x replicates.

struct MethodOutcome {
    PenaltyFamily method = PenaltyFamily::none;
    bool failed = false;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double pred_loglik = 0.0;
    double pred_loglik_centered = 0.0;
    double lambda = 0.0;
    double gamma = 0.0;
    double ridge_lambda = 0.0;
    Index n_nonzero = 0;
};

struct ReplicateResult {
    SimScenario scenario;
    int replicate = 0;
    std::vector<MethodOutcome> methods;
};

struct CampaignOptions {
    std::vector<PenaltyFamily> methods{PenaltyFamily::mixgl1, PenaltyFamily::mixgl2,
                                       PenaltyFamily::adl, PenaltyFamily::mixlasso_l2,
                                       PenaltyFamily::mixscad_l2};
    TuningGrid grid;
    FitControl control;
    Index n_test = 10000;
    int jobs = 1;
};

/// Seed of replicate r of a scenario cell.
std::uint64_t replicate_seed(const SimScenario& cell, int replicate);

/// Simulates one data set, fits every method with BIC tuning (sharing one
/// unpenalized fit) and scores it against a fresh test set.
ReplicateResult run_replicate(const SimScenario& scenario, int replicate,
                              const CampaignOptions& options);

/// All replicates of all cells; order is (cell, replicate) regardless of jobs.
std::vector<ReplicateResult> run_campaign(const std::vector<SimScenario>& cells, int replicates,
                                          const CampaignOptions& options);

struct SummaryRow {
    SimModel model = SimModel::I;
    Index n = 0;
    double pi1 = 0.0;
    PenaltyFamily method = PenaltyFamily::none;
    int replicates = 0;
    int failed = 0;
    double mean_sensitivity = 0.0;
    double mean_specificity = 0.0;
    double mean_pred_loglik_centered = 0.0;
};

std::vector<SummaryRow> summarize(const std::vector<ReplicateResult>& results);

// ---------------------------------------------------------------------------
// Synthetic species archetype data.

struct SamScenario {
    Index n_sites = 300;
    Index n_species = 50;
    Index n_covariates = 4;
    Index n_archetypes = 2;
    std::uint64_t seed = 1;
    double coefficient_scale = 1.5;
    double zero_fraction = 0.3;
    double intercept_mean = -0.5;
    double intercept_sd = 1.0;
};

struct SyntheticSam {
    SamDataset data;
    SamParams truth;
    std::vector<int> labels; // archetype of each species
};

SyntheticSam generate_sam_dataset(const SamScenario& scenario);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// ---------------------------------------------------------------------------
// Random-restart stability.

struct StabilityReport {
    std::vector<double> penalized_loglik;
    std::vector<double> unpenalized_loglik;
    int penalized_failures = 0;
    int unpenalized_failures = 0;
    double penalized_variance = 0.0;
    double unpenalized_variance = 0.0;
    double variance_ratio = 0.0;   // unpenalized / penalized
    double f_p_value = 1.0;        // two-sided
};

double sample_variance(const std::vector<double>& values);

/// Two-sided F-test p-value for a variance ratio with (df1, df2) degrees.
double f_test_two_sided(double ratio, double df1, double df2);

/// Fits each spec n_restarts times from independent Dirichlet starts (the
/// same seed stream for both specs) and compares converged log-likelihoods.
StabilityReport stability_experiment(const SamDataset& data, Index K,
                                     const PenaltySpec& spec_penalized,
                                     const PenaltySpec& spec_unpenalized, int n_restarts,
                                     std::uint64_t seed, const FitControl& control, int jobs = 1);
StabilityReport stability_experiment(const Dataset& data, Index K,
                                     const PenaltySpec& spec_penalized,
                                     const PenaltySpec& spec_unpenalized, int n_restarts,
                                     std::uint64_t seed, const FitControl& control, int jobs = 1);

} // namespace penmix

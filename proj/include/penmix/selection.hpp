#pragma once

#include <optional>
#include <string>
#include <vector>

#include "penmix/dataset.hpp"
#include "penmix/penalty.hpp"
#include "penmix/sam.hpp"
#include "penmix/solver.hpp"

namespace penmix {

/// Which count multiplies the complexity term: observations (n) or
/// species (s). For FMR data both resolve to n.
enum class BicCount { observations, species };

BicCount parse_bic_count(std::string_view text);
std::string_view to_string(BicCount count);

struct TuningGrid {
    /// Explicit lambda values; when empty a log-spaced path from lambda_max
    /// down to lambda_min_ratio * lambda_max is built per path.
    std::vector<double> lambdas;
    int n_lambdas = 50;
    double lambda_min_ratio = 1e-4;
    std::vector<double> gammas{0.5, 1.0, 2.0};
    /// Second tuning parameter for MIXLASSO_L2 / MIXSCAD_L2, replacing gamma.
    std::vector<double> ridge_lambdas{1e-3, 1e-2, 1e-1};
    BicCount bic_count = BicCount::observations;

    void validate() const;
};

/// -2 loglik + log(bic_count) * n_nonzero.
double bic_tuning(double loglik, Index n_nonzero, Index bic_count);

/// -2 loglik + log(bic_count) * dimension.
double bic_components(double loglik, Index dimension, Index bic_count);

/// Nonzero slopes + intercepts + estimated dispersions + (K - 1).
Index parameter_dimension(const FitResult& fit, const ResponseFamily& family);
/// Nonzero slopes + species intercepts + (K - 1).
Index parameter_dimension(const SamFitResult& fit);

struct TuningCell {
    double lambda = 0.0;
    double gamma = 0.0;
    double ridge_lambda = 0.0;
    Index K = 0;
    double loglik = 0.0;
    Index n_nonzero = 0;
    double bic = 0.0;
    bool converged = false;
    bool failed = false;
};

template <class Result>
struct TuningOutcome {
    PenaltySpec spec;
    Result fit;
    Result unpenalized;
    std::vector<TuningCell> table;
    /// lambda_max found for each path, in path order.
    std::vector<double> lambda_max;
};

/// Smallest lambda (to within 1%) at which every coefficient is frozen,
/// found by bracketing and bisection from the unpenalized fit.
double find_lambda_max(const Dataset& data, Index K, const PenaltySpec& path_spec,
                       const FitResult& unpenalized, const FitControl& control);
double find_lambda_max(const SamDataset& data, Index K, const PenaltySpec& path_spec,
                       const SamFitResult& unpenalized, const FitControl& control);

/// Log-spaced decreasing grid lambda_max * ratio^(i/(count-1)).
std::vector<double> lambda_path(double lambda_max, int count, double min_ratio);

/// Fits the unpenalized model once, builds adaptive weights per gamma, and
/// walks each lambda path with warm starts. Returns the BIC-minimizing cell.
TuningOutcome<FitResult> select_tuning(const Dataset& data, Index K, PenaltyFamily family,
                                       const TuningGrid& grid, const FitControl& control);
TuningOutcome<SamFitResult> select_tuning(const SamDataset& data, Index K, PenaltyFamily family,
                                          const TuningGrid& grid, const FitControl& control);

/// As select_tuning, starting from a given unpenalized fit.
TuningOutcome<FitResult> select_tuning_from(const Dataset& data, Index K, PenaltyFamily family,
                                            const TuningGrid& grid, const FitControl& control,
                                            const FitResult& unpenalized);
TuningOutcome<SamFitResult> select_tuning_from(const SamDataset& data, Index K,
                                               PenaltyFamily family, const TuningGrid& grid,
                                               const FitControl& control,
                                               const SamFitResult& unpenalized);

struct ComponentRow {
    Index K = 0;
    double loglik = 0.0;
    Index dimension = 0;
    double bic = 0.0;
    bool failed = false;
};

template <class Result>
struct ComponentSelection {
    Index best_K = 0;
    std::vector<std::optional<TuningOutcome<Result>>> per_K; // indexed by K - K_min
    std::vector<ComponentRow> table;
};

ComponentSelection<FitResult> select_num_components(const Dataset& data, Index K_min, Index K_max,
                                                    PenaltyFamily family, const TuningGrid& grid,
                                                    const FitControl& control, int jobs = 1);
ComponentSelection<SamFitResult> select_num_components(const SamDataset& data, Index K_min,
                                                       Index K_max, PenaltyFamily family,
                                                       const TuningGrid& grid,
                                                       const FitControl& control, int jobs = 1);

} // namespace penmix

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "penmix/dataset.hpp"
#include "penmix/penalty.hpp"
#include "penmix/solver.hpp"

namespace penmix {

/// Presence-absence matrix (sites x species) with a standardized site design.
struct SamDataset {
    MatrixXd Y;                      // n x s, entries 0/1
    MatrixXd X;                      // n x p, standardized
    std::vector<std::string> species_names;
    std::vector<std::string> site_ids;
    std::vector<std::string> covariate_names;
    StandardizationStats stats;

    Index n_sites() const noexcept { return Y.rows(); }
    Index n_species() const noexcept { return Y.cols(); }
    Index n_covariates() const noexcept { return X.cols(); }

    /// Species observed at every site or at none.
    std::vector<Index> isolated_species() const;
};

/// Validates 0/1 entries and shapes, standardizes raw_X.
SamDataset make_sam_dataset(const MatrixXd& Y, const MatrixXd& raw_X,
                            std::vector<std::string> species_names = {},
                            std::vector<std::string> site_ids = {},
                            std::vector<std::string> covariate_names = {});

/// Archetype slopes with species-specific intercepts.
struct SamParams {
    MatrixXd beta;                // K x p
    VectorXd species_intercepts;  // s
    VectorXd mixing;              // K

    Index n_components() const noexcept { return beta.rows(); }
    Index n_covariates() const noexcept { return beta.cols(); }
    SamParams permuted(std::span<const int> perm) const;
};

using SamFitResult = BasicFitResult<SamParams>;

/// Logit-scale bound for intercepts of species present everywhere/nowhere.
inline constexpr double kInterceptCap = 10.0;

/// s x K matrix of sum_i log Bernoulli(y_ij; logit^{-1}(b_0j + x_i' beta_k)).
MatrixXd sam_species_log_densities(const SamParams& params, const SamDataset& data);

double sam_log_likelihood(const SamParams& params, const SamDataset& data);

/// s x K species-level responsibilities.
MatrixXd sam_e_step(const SamParams& params, const SamDataset& data);

/// Newton M-step on the penalized surrogate, solving jointly for species
/// intercepts and archetype slopes (intercepts eliminated per species).
SamParams sam_m_step(const SamDataset& data, const MatrixXd& responsibilities,
                     const PenaltySpec& spec, const SamParams& params_current, ZeroMask& zero_mask,
                     const FitControl& control);

SamFitResult sam_fit(const SamDataset& data, Index K, const PenaltySpec& spec,
                     const FitControl& control);

SamFitResult sam_fit_from(const SamDataset& data, Index K, const PenaltySpec& spec,
                          const FitControl& control, const StartPoint& start);

/// eta_ik = (sum_j tau_jk b_0j) / (sum_j tau_jk) + x_i' beta_k for new rows.
/// X_new must already be standardized with the training statistics.
MatrixXd archetype_linear_predictor(const SamFitResult& fit, const MatrixXd& X_new);

} // namespace penmix

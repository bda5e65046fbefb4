#pragma once

#include <Eigen/Dense>

#include "penmix/dataset.hpp"
#include "penmix/params.hpp"

namespace penmix {

/// n x K matrix of eta_ik = beta_0k + x_i' beta_k.
MatrixXd linear_predictors(const FmrParams& params, const MatrixXd& X);

/// n x K matrix of log pi_k + log f(y_i; mu_ik, phi_k).
MatrixXd joint_log_densities(const FmrParams& params, const Dataset& data);

/// Observed-data log-likelihood sum_i log sum_k pi_k f(y_i; mu_ik, phi_k),
/// reduced with log-sum-exp.
double log_likelihood(const FmrParams& params, const Dataset& data);

/// Per-row log-sum-exp of a matrix.
VectorXd row_log_sum_exp(const MatrixXd& m);

/// Gradient of log_likelihood. Mixing is parameterized by the free
/// proportions pi_1..pi_{K-1} with pi_K = 1 - sum of the others, so
/// `mixing` has K-1 entries. `dispersions` is empty for binomial families.
struct LogLikelihoodScore {
    MatrixXd beta;
    VectorXd intercepts;
    VectorXd dispersions;
    VectorXd mixing;
};

LogLikelihoodScore log_likelihood_score(const FmrParams& params, const Dataset& data);

} // namespace penmix

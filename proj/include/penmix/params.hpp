#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "penmix/family.hpp"

namespace penmix {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Full parameter set of a K-component mixture of GLMs. Row k of `beta`
/// holds component k's slopes; column l is the coefficient group of
/// covariate l.
struct FmrParams {
    MatrixXd beta;          // K x p
    VectorXd intercepts;    // K
    VectorXd dispersions;   // K, identically 1 for binomial families
    VectorXd mixing;        // K, on the simplex

    Index n_components() const noexcept { return beta.rows(); }
    Index n_covariates() const noexcept { return beta.cols(); }

    static FmrParams zeros(Index K, Index p);

    /// Throws InputError if shapes disagree, mixing leaves the simplex
    /// (tolerance 1e-12 on the sum) or dispersions are invalid for `family`.
    void validate(const ResponseFamily& family) const;

    /// Component k of the result is component perm[k] of *this.
    FmrParams permuted(std::span<const int> perm) const;
};

/// Reorders rows so row k of the result is row perm[k] of `m`.
MatrixXd permute_rows(const MatrixXd& m, std::span<const int> perm);
VectorXd permute_entries(const VectorXd& v, std::span<const int> perm);

} // namespace penmix

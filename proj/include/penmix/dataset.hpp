#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "penmix/family.hpp"

namespace penmix {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct StandardizationStats {
    VectorXd mean;
    VectorXd sd;
};

struct Standardized {
    MatrixXd X;
    StandardizationStats stats;
};

/// Centers every column and scales it to unit sample variance (divisor n-1).
/// Throws ConstantColumn for a zero-sd column and DimensionMismatch for n < 2.
Standardized standardize(const MatrixXd& raw_X);

/// Applies previously recorded statistics to new rows.
MatrixXd apply_standardization(const MatrixXd& raw_X, const StandardizationStats& stats);

/// Inverse of apply_standardization.
MatrixXd unstandardize(const MatrixXd& X, const StandardizationStats& stats);

/// Standardized design plus response. Construct through make_dataset so the
/// invariants (standardized columns, response in support) hold.
struct Dataset {
    MatrixXd X;
    VectorXd y;
    ResponseFamily family;
    std::vector<std::string> column_names;
    StandardizationStats stats;

    Index n() const noexcept { return X.rows(); }
    Index p() const noexcept { return X.cols(); }
};

/// Standardizes raw_X and validates y against the family.
Dataset make_dataset(const MatrixXd& raw_X, const VectorXd& y, const ResponseFamily& family,
                     std::vector<std::string> column_names = {});

/// Wraps an already standardized design (stats describe the original scale).
/// Only the response and the shapes are validated.
Dataset make_standardized_dataset(MatrixXd X, VectorXd y, const ResponseFamily& family,
                                  StandardizationStats stats,
                                  std::vector<std::string> column_names = {});

/// Appends the square of every column, re-standardized, after the originals.
/// Names get a "^2" suffix.
MatrixXd add_quadratic_terms(const MatrixXd& X, std::vector<std::string>* names = nullptr);

std::vector<std::string> default_column_names(Index p, const std::string& prefix = "x");

} // namespace penmix

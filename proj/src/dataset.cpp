#include "penmix/dataset.hpp"

#include <cmath>

#include "penmix/error.hpp"

namespace penmix {

Standardized standardize(const MatrixXd& raw_X) {
    const Index n = raw_X.rows();
    if (n < 2) throw DimensionMismatch("standardization needs at least two rows");
    Standardized out;
    out.stats.mean = raw_X.colwise().mean().transpose();
    out.stats.sd.resize(raw_X.cols());
    out.X.resize(n, raw_X.cols());
    for (Index j = 0; j < raw_X.cols(); ++j) {
        const VectorXd centered = raw_X.col(j).array() - out.stats.mean(j);
        const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(n - 1));
        // Relative test so that columns constant up to rounding are rejected too.
        const double scale = std::max(1.0, raw_X.col(j).cwiseAbs().maxCoeff());
        if (!(sd > 1e-12 * scale)) throw ConstantColumn(static_cast<long>(j));
        out.stats.sd(j) = sd;
        out.X.col(j) = centered / sd;
    }
    return out;
}

MatrixXd apply_standardization(const MatrixXd& raw_X, const StandardizationStats& stats) {
    if (raw_X.cols() != stats.mean.size()) throw DimensionMismatch("column count differs from stats");
    MatrixXd X = raw_X.rowwise() - stats.mean.transpose();
    return X.array().rowwise() / stats.sd.transpose().array();
}

MatrixXd unstandardize(const MatrixXd& X, const StandardizationStats& stats) {
    if (X.cols() != stats.mean.size()) throw DimensionMismatch("column count differs from stats");
    MatrixXd raw = X.array().rowwise() * stats.sd.transpose().array();
    return raw.rowwise() + stats.mean.transpose();
}

std::vector<std::string> default_column_names(Index p, const std::string& prefix) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) names.push_back(prefix + std::to_string(j + 1));
    return names;
}

Dataset make_standardized_dataset(MatrixXd X, VectorXd y, const ResponseFamily& family,
                                  StandardizationStats stats, std::vector<std::string> column_names) {
    if (X.rows() != y.size()) throw DimensionMismatch("X and y row counts differ");
    if (column_names.empty()) column_names = default_column_names(X.cols());
    if (static_cast<Index>(column_names.size()) != X.cols())
        throw DimensionMismatch("column name count differs from X");
    for (Index i = 0; i < y.size(); ++i) family.check_response(y(i));
    Dataset d;
    d.X = std::move(X);
    d.y = std::move(y);
    d.family = family;
    d.column_names = std::move(column_names);
    d.stats = std::move(stats);
    return d;
}

Dataset make_dataset(const MatrixXd& raw_X, const VectorXd& y, const ResponseFamily& family,
                     std::vector<std::string> column_names) {
    if (raw_X.rows() != y.size()) throw DimensionMismatch("X and y row counts differ");
    auto standardized = standardize(raw_X);
    return make_standardized_dataset(std::move(standardized.X), y, family,
                                     std::move(standardized.stats), std::move(column_names));
}

MatrixXd add_quadratic_terms(const MatrixXd& X, std::vector<std::string>* names) {
    const MatrixXd squares = standardize(X.array().square().matrix()).X;
    MatrixXd out(X.rows(), 2 * X.cols());
    out << X, squares;
    if (names) {
        const auto base = *names;
        for (const auto& name : base) names->push_back(name + "^2");
    }
    return out;
}

} // namespace penmix

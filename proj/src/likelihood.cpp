#include "penmix/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <limits>
#include <numbers>

#include "penmix/error.hpp"

namespace penmix {

namespace {

void check_shapes(const FmrParams& params, const Dataset& data) {
    const Index K = params.n_components();
    if (K < 1 || params.n_covariates() != data.p() || params.intercepts.size() != K ||
        params.dispersions.size() != K || params.mixing.size() != K) {
        throw DimensionMismatch("parameters do not match the data dimensions");
    }
}

// Per-observation constant of the log density (log binomial coefficient).
VectorXd log_normalizers(const Dataset& data) {
    VectorXd c = VectorXd::Zero(data.n());
    if (data.family.is_binomial()) {
        const double m = data.family.trial_size;
        for (Index i = 0; i < data.n(); ++i) {
            const double y = data.y(i);
            c(i) = std::lgamma(m + 1) - std::lgamma(y + 1) - std::lgamma(m - y + 1);
        }
    }
    return c;
}

} // namespace

MatrixXd linear_predictors(const FmrParams& params, const MatrixXd& X) {
    if (X.cols() != params.n_covariates()) throw DimensionMismatch("design width differs from beta");
    MatrixXd eta = X * params.beta.transpose();
    eta.rowwise() += params.intercepts.transpose();
    return eta;
}

MatrixXd joint_log_densities(const FmrParams& params, const Dataset& data) {
    check_shapes(params, data);
    MatrixXd out = linear_predictors(params, data.X);
    const VectorXd norm = log_normalizers(data);
    const Index K = params.n_components();
    for (Index k = 0; k < K; ++k) {
        const double log_pi = std::log(params.mixing(k));
        if (data.family.is_binomial()) {
            const double m = data.family.trial_size;
            for (Index i = 0; i < data.n(); ++i) {
                const double eta = std::clamp(out(i, k), -kEtaClamp, kEtaClamp);
                out(i, k) = log_pi + norm(i) + data.y(i) * eta - m * softplus(eta);
            }
        } else {
            const double phi = params.dispersions(k);
            const double c = log_pi - 0.5 * std::log(2.0 * std::numbers::pi * phi);
            for (Index i = 0; i < data.n(); ++i) {
                const double r = data.y(i) - out(i, k);
                out(i, k) = c - r * r / (2.0 * phi);
            }
        }
    }
    return out;
}

VectorXd row_log_sum_exp(const MatrixXd& m) {
    VectorXd out(m.rows());
    std::vector<double> scratch(static_cast<std::size_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i) {
        const double top = m.row(i).maxCoeff();
        if (!std::isfinite(top)) {
            out(i) = top;
            continue;
        }
        // Sorted accumulation makes the result independent of column order.
        for (Index k = 0; k < m.cols(); ++k) scratch[static_cast<std::size_t>(k)] = m(i, k);
        std::sort(scratch.begin(), scratch.end());
        double sum = 0.0;
        for (double v : scratch) sum += std::exp(v - top);
        out(i) = top + std::log(sum);
    }
    return out;
}

double log_likelihood(const FmrParams& params, const Dataset& data) {
    return row_log_sum_exp(joint_log_densities(params, data)).sum();
}

LogLikelihoodScore log_likelihood_score(const FmrParams& params, const Dataset& data) {
    const MatrixXd joint = joint_log_densities(params, data);
    const VectorXd lse = row_log_sum_exp(joint);
    const MatrixXd tau = (joint.colwise() - lse).array().exp().matrix();
    const MatrixXd eta = linear_predictors(params, data.X);
    const Index K = params.n_components();

    LogLikelihoodScore score;
    MatrixXd deta(data.n(), K);
    for (Index k = 0; k < K; ++k)
        for (Index i = 0; i < data.n(); ++i)
            deta(i, k) = tau(i, k) * log_density_eta_derivative(data.y(i), eta(i, k), data.family,
                                                                 params.dispersions(k));
    score.beta = deta.transpose() * data.X;
    score.intercepts = deta.colwise().sum().transpose();
    if (data.family.has_dispersion()) {
        score.dispersions.resize(K);
        for (Index k = 0; k < K; ++k) {
            const double phi = params.dispersions(k);
            const VectorXd r2 = (data.y - eta.col(k)).array().square();
            score.dispersions(k) =
                (tau.col(k).array() * (r2.array() / (2.0 * phi * phi) - 0.5 / phi)).sum();
        }
    }
    score.mixing.resize(K - 1);
    for (Index k = 0; k + 1 < K; ++k) {
        score.mixing(k) = (tau.col(k).array() / params.mixing(k) -
                           tau.col(K - 1).array() / params.mixing(K - 1))
                              .sum();
    }
    return score;
}

FmrParams FmrParams::zeros(Index K, Index p) {
    FmrParams out;
    out.beta = MatrixXd::Zero(K, p);
    out.intercepts = VectorXd::Zero(K);
    out.dispersions = VectorXd::Ones(K);
    out.mixing = VectorXd::Constant(K, 1.0 / static_cast<double>(K));
    return out;
}

void FmrParams::validate(const ResponseFamily& family) const {
    const Index K = n_components();
    if (K < 1) throw InputError("at least one component is required");
    if (intercepts.size() != K || dispersions.size() != K || mixing.size() != K)
        throw DimensionMismatch("parameter vectors must have one entry per component");
    if ((mixing.array() <= 0).any() || std::abs(mixing.sum() - 1.0) > 1e-12)
        throw InputError("mixing proportions must be positive and sum to one");
    if ((dispersions.array() <= 0).any()) throw InputError("dispersions must be positive");
    if (family.is_binomial() && (dispersions.array() != 1.0).any())
        throw InputError("binomial families have unit dispersion");
}

MatrixXd permute_rows(const MatrixXd& m, std::span<const int> perm) {
    if (static_cast<Index>(perm.size()) != m.rows()) throw DimensionMismatch("permutation size");
    MatrixXd out(m.rows(), m.cols());
    for (Index k = 0; k < m.rows(); ++k) out.row(k) = m.row(perm[static_cast<std::size_t>(k)]);
    return out;
}

VectorXd permute_entries(const VectorXd& v, std::span<const int> perm) {
    if (static_cast<Index>(perm.size()) != v.size()) throw DimensionMismatch("permutation size");
    VectorXd out(v.size());
    for (Index k = 0; k < v.size(); ++k) out(k) = v(perm[static_cast<std::size_t>(k)]);
    return out;
}

FmrParams FmrParams::permuted(std::span<const int> perm) const {
    return {permute_rows(beta, perm), permute_entries(intercepts, perm),
            permute_entries(dispersions, perm), permute_entries(mixing, perm)};
}

} // namespace penmix

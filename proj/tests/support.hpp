#pragma once

#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "penmix/dataset.hpp"
#include "penmix/likelihood.hpp"
#include "penmix/sam.hpp"
#include "penmix/solver.hpp"

namespace testing {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using penmix::Dataset;
using penmix::FmrParams;
using penmix::ResponseFamily;

inline MatrixXd gaussian_matrix(Index n, Index p, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    MatrixXd X(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) X(i, j) = normal(rng);
    return X;
}

inline FmrParams random_params(Index K, Index p, const ResponseFamily& family, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.2, 1.0);
    FmrParams params = FmrParams::zeros(K, p);
    for (Index k = 0; k < K; ++k) {
        for (Index l = 0; l < p; ++l) params.beta(k, l) = normal(rng);
        params.intercepts(k) = normal(rng);
        params.dispersions(k) = family.has_dispersion() ? unif(rng) + 0.3 : 1.0;
        params.mixing(k) = unif(rng);
    }
    params.mixing /= params.mixing.sum();
    return params;
}

/// Responses drawn from the mixture itself.
inline VectorXd draw_responses(const FmrParams& params, const MatrixXd& X, const ResponseFamily& family,
                               std::mt19937_64& rng) {
    std::discrete_distribution<int> pick(params.mixing.data(), params.mixing.data() + params.mixing.size());
    VectorXd y(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        const int k = pick(rng);
        const double eta = params.intercepts(k) + X.row(i).dot(params.beta.row(k));
        if (family.has_dispersion()) {
            std::normal_distribution<double> normal(eta, std::sqrt(params.dispersions(k)));
            y(i) = normal(rng);
        } else {
            std::binomial_distribution<int> binom(family.trial_size, 1.0 / (1.0 + std::exp(-eta)));
            y(i) = binom(rng);
        }
    }
    return y;
}

inline Dataset random_dataset(Index n, Index p, Index K, const ResponseFamily& family, std::uint64_t seed,
                              FmrParams* truth = nullptr) {
    std::mt19937_64 rng(seed);
    const MatrixXd X = gaussian_matrix(n, p, rng);
    FmrParams params = random_params(K, p, family, rng);
    params.beta *= 1.5;
    const VectorXd y = draw_responses(params, X, family, rng);
    if (truth) *truth = params;
    return penmix::make_dataset(X, y, family);
}

// Extended-precision density written directly from the pmf/pdf.
inline long double oracle_log_density(long double y, long double eta, const ResponseFamily& family, long double phi) {
    if (family.has_dispersion()) {
        const long double pi = 3.141592653589793238462643383279502884L;
        return -0.5L * std::log(2.0L * pi * phi) - (y - eta) * (y - eta) / (2.0L * phi);
    }
    const long double m = family.trial_size;
    const long double p = 1.0L / (1.0L + std::exp(-eta));
    const long double log_choose = std::lgamma(m + 1.0L) - std::lgamma(y + 1.0L) - std::lgamma(m - y + 1.0L);
    return log_choose + y * std::log(p) + (m - y) * std::log1p(-p);
}

inline long double oracle_log_likelihood(const FmrParams& params, const Dataset& data) {
    long double total = 0.0L;
    for (Index i = 0; i < data.n(); ++i) {
        long double mix = 0.0L;
        for (Index k = 0; k < params.n_components(); ++k) {
            long double eta = params.intercepts(k);
            for (Index l = 0; l < data.p(); ++l)
                eta += static_cast<long double>(params.beta(k, l)) * data.X(i, l);
            mix += static_cast<long double>(params.mixing(k)) *
                   std::exp(oracle_log_density(data.y(i), eta, data.family, params.dispersions(k)));
        }
        total += std::log(mix);
    }
    return total;
}

inline long double oracle_sam_log_likelihood(const penmix::SamParams& params, const penmix::SamDataset& data) {
    long double total = 0.0L;
    for (Index j = 0; j < data.n_species(); ++j) {
        long double mix = 0.0L;
        for (Index k = 0; k < params.n_components(); ++k) {
            long double species = 1.0L;
            for (Index i = 0; i < data.n_sites(); ++i) {
                long double eta = params.species_intercepts(j);
                for (Index l = 0; l < data.n_covariates(); ++l)
                    eta += static_cast<long double>(params.beta(k, l)) * data.X(i, l);
                const long double p = 1.0L / (1.0L + std::exp(-eta));
                species *= data.Y(i, j) > 0.5 ? p : 1.0L - p;
            }
            mix += static_cast<long double>(params.mixing(k)) * species;
        }
        total += std::log(mix);
    }
    return total;
}

/// Weighted logistic (or binomial) regression with intercept by plain
/// Newton iterations on the full design. Returns (intercept, slopes).
inline VectorXd oracle_logistic(const MatrixXd& X, const VectorXd& y, const VectorXd& w, int trials) {
    const Index n = X.rows();
    const Index p = X.cols();
    MatrixXd Z(n, p + 1);
    Z.col(0).setOnes();
    Z.rightCols(p) = X;
    VectorXd theta = VectorXd::Zero(p + 1);
    for (int it = 0; it < 200; ++it) {
        const VectorXd eta = Z * theta;
        VectorXd grad = VectorXd::Zero(p + 1);
        MatrixXd hess = MatrixXd::Zero(p + 1, p + 1);
        for (Index i = 0; i < n; ++i) {
            const double mu = 1.0 / (1.0 + std::exp(-eta(i)));
            grad += w(i) * (y(i) - trials * mu) * Z.row(i).transpose();
            hess += w(i) * trials * mu * (1 - mu) * Z.row(i).transpose() * Z.row(i);
        }
        const VectorXd step = hess.ldlt().solve(grad);
        theta += step;
        if (step.norm() < 1e-13) break;
    }
    return theta;
}

/// Ordinary least squares with intercept from the normal equations.
inline VectorXd oracle_ols(const MatrixXd& X, const VectorXd& y) {
    MatrixXd Z(X.rows(), X.cols() + 1);
    Z.col(0).setOnes();
    Z.rightCols(X.cols()) = X;
    return (Z.transpose() * Z).ldlt().solve(Z.transpose() * y);
}

// Ascent bookkeeping shared by every fit a test binary runs.
struct AscentLog {
    std::atomic<long> fits{0};
    std::atomic<long> violations{0};
    std::mutex mutex;
    double worst_drop = 0.0;       // largest single-iteration decrease seen
    std::vector<double> worst_trace;
};

inline AscentLog& ascent_log() {
    static AscentLog log;
    return log;
}

inline bool trace_ascends(std::span<const double> trace, double tol = 1e-8) {
    for (std::size_t t = 1; t < trace.size(); ++t)
        if (trace[t] < trace[t - 1] - tol) return false;
    return true;
}

inline penmix::FitControl checked(penmix::FitControl control = {}) {
    control.observer = [](std::span<const double> trace) {
        auto& log = ascent_log();
        ++log.fits;
        if (!trace_ascends(trace)) ++log.violations;
        double drop = 0.0;
        for (std::size_t t = 1; t < trace.size(); ++t) drop = std::max(drop, trace[t - 1] - trace[t]);
        if (drop > 0.0) {
            std::lock_guard lock(log.mutex);
            if (drop > log.worst_drop) {
                log.worst_drop = drop;
                log.worst_trace.assign(trace.begin(), trace.end());
            }
        }
    };
    return control;
}

// Flattened free parameters: slopes, intercepts, dispersions, first K-1 mixing.
inline VectorXd score_vector(const penmix::LogLikelihoodScore& s) {
    VectorXd v(s.beta.size() + s.intercepts.size() + s.dispersions.size() + s.mixing.size());
    Index at = 0;
    for (Index k = 0; k < s.beta.rows(); ++k)
        for (Index l = 0; l < s.beta.cols(); ++l) v(at++) = s.beta(k, l);
    for (Index k = 0; k < s.intercepts.size(); ++k) v(at++) = s.intercepts(k);
    for (Index k = 0; k < s.dispersions.size(); ++k) v(at++) = s.dispersions(k);
    for (Index k = 0; k < s.mixing.size(); ++k) v(at++) = s.mixing(k);
    return v;
}

// Central differences of log_likelihood in the same order.
inline VectorXd numeric_score(const FmrParams& params, const Dataset& data) {
    const double h = 1e-5;
    const Index K = params.n_components(), p = params.n_covariates();
    std::vector<double> out;
    auto diff = [&](auto&& bump) {
        FmrParams up = params, down = params;
        bump(up, h);
        bump(down, -h);
        out.push_back((penmix::log_likelihood(up, data) - penmix::log_likelihood(down, data)) / (2 * h));
    };
    for (Index k = 0; k < K; ++k)
        for (Index l = 0; l < p; ++l) diff([&](FmrParams& q, double d) { q.beta(k, l) += d; });
    for (Index k = 0; k < K; ++k) diff([&](FmrParams& q, double d) { q.intercepts(k) += d; });
    if (data.family.has_dispersion())
        for (Index k = 0; k < K; ++k) diff([&](FmrParams& q, double d) { q.dispersions(k) += d; });
    for (Index k = 0; k + 1 < K; ++k)
        diff([&](FmrParams& q, double d) {
            q.mixing(k) += d;
            q.mixing(K - 1) -= d;
        });
    return Eigen::Map<VectorXd>(out.data(), static_cast<Index>(out.size()));
}

} // namespace testing

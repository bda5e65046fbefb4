#pragma once

// Damped Newton ascent shared by the FMR and SAM M-steps.

#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "penmix/error.hpp"

namespace penmix::detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Solves H x = g for symmetric positive definite H. If the Cholesky
/// factorization fails, 1e-8 is added to the diagonal once before giving up.
inline VectorXd solve_spd(MatrixXd H, const VectorXd& g) {
    Eigen::LLT<MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) {
        H.diagonal().array() += 1e-8;
        llt.compute(H);
        if (llt.info() != Eigen::Success) throw SingularSystem("normal equations are singular");
    }
    VectorXd x = llt.solve(g);
    if (!x.allFinite()) throw SingularSystem("normal equations produced a non-finite solution");
    return x;
}

struct NewtonProblem {
    /// Objective to maximize.
    std::function<double(const VectorXd&)> value;
    /// Gradient and negated Hessian at theta.
    std::function<void(const VectorXd&, VectorXd&, MatrixXd&)> derivatives;
};

/// Newton ascent with step halving; every accepted step does not decrease
/// the objective. Stops when the relative change falls below tol.
inline VectorXd damped_newton(VectorXd theta, const NewtonProblem& problem, int max_iter, double tol,
                              double* final_value = nullptr) {
    double current = problem.value(theta);
    if (!std::isfinite(current)) throw SingularSystem("objective is not finite at the start point");
    VectorXd grad;
    MatrixXd neg_hess;
    for (int iter = 0; iter < max_iter; ++iter) {
        problem.derivatives(theta, grad, neg_hess);
        const VectorXd step = solve_spd(neg_hess, grad);
        double t = 1.0;
        bool accepted = false;
        double candidate_value = current;
        VectorXd candidate;
        for (int halving = 0; halving < 40; ++halving) {
            candidate = theta + t * step;
            candidate_value = problem.value(candidate);
            if (std::isfinite(candidate_value) && candidate_value >= current) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        const double change = candidate_value - current;
        theta = std::move(candidate);
        current = candidate_value;
        if (change <= tol * (std::abs(current) + tol)) break;
    }
    if (final_value) *final_value = current;
    return theta;
}

} // namespace penmix::detail

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "penmix/dataset.hpp"
#include "penmix/params.hpp"
#include "penmix/penalty.hpp"

namespace penmix {

/// Called once per completed EM run with its penalized-objective trace.
/// Must be safe to call from several threads.
using TraceObserver = std::function<void(std::span<const double> trace)>;

struct FitControl {
    int max_em_iter = 500;
    double em_tol = 1e-6;     // relative change in penalized objective
    int max_irls_iter = 25;
    double irls_tol = 1e-8;
    int n_starts = 10;
    std::uint64_t seed = 1;
    double pi_floor = 1e-4;
    TraceObserver observer;

    /// Throws InputError unless tolerances are positive and pi_floor < 1/K.
    void validate(Index K) const;
};

template <class Params>
struct BasicFitResult {
    Params params;
    MatrixXd responsibilities;
    double loglik = 0.0;
    double penalized_objective = 0.0;
    Index n_nonzero = 0;
    std::vector<double> objective_trace;
    bool converged = false;
    int start_index = 0;
    int iterations = 0;
    ZeroMask zero_mask;
    std::vector<std::string> warnings;
};

using FitResult = BasicFitResult<FmrParams>;

/// Where a single EM run begins: responsibilities feed the first M-step.
/// `lqa_anchor` is the expansion point for that M-step's penalty surrogate;
/// without one the first M-step is unpenalized.
struct StartPoint {
    MatrixXd responsibilities;
    std::optional<MatrixXd> lqa_anchor;
};

/// Posterior membership probabilities, computed in log space.
MatrixXd e_step(const FmrParams& params, const Dataset& data);

/// Mixing proportions maximizing sum_k a_k log pi_k - n sum_k pi_k c_k on
/// the simplex with pi_k >= floor. With c = 0 this is floor-then-renormalize
/// of a / sum(a).
VectorXd update_mixing(const VectorXd& column_sums, const VectorXd& penalty_factors, Index n,
                       double pi_floor);

/// One penalized M-step. The LQA surrogate is built at params_current.beta;
/// newly small coefficients are frozen in `zero_mask`.
FmrParams m_step(const Dataset& data, const MatrixXd& responsibilities, const PenaltySpec& spec,
                 const FmrParams& params_current, ZeroMask& zero_mask, const FitControl& control);

/// n x K matrix whose rows are independent Dirichlet(1, ..., 1) draws.
MatrixXd random_initialization(Index n, Index K, std::uint64_t seed);

/// Multi-start penalized EM; keeps the run with the highest penalized objective.
FitResult fit(const Dataset& data, Index K, const PenaltySpec& spec, const FitControl& control);

/// A single EM run from a given start.
FitResult fit_from(const Dataset& data, Index K, const PenaltySpec& spec, const FitControl& control,
                   const StartPoint& start);

/// Number of coefficients not frozen at zero.
Index count_nonzero(const MatrixXd& beta);

/// Derives an independent 64-bit seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

} // namespace penmix

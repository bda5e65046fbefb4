#include "penmix/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "newton.hpp"
#include "penmix/error.hpp"
#include "penmix/likelihood.hpp"

namespace penmix {

namespace {

constexpr double kDispersionFloor = 1e-8;

struct ComponentFit {
    double intercept = 0.0;
    VectorXd slopes; // active slopes only
    double dispersion = 1.0;
};

// Maximizes sum_i w_i log f(y_i; b0 + z_i' b) - 1/2 sum_l d_l b_l^2 over
// (b0, b). `Z` holds the active columns only.
ComponentFit fit_component(const MatrixXd& Z, const VectorXd& y, const VectorXd& w, const VectorXd& d,
                           const ResponseFamily& family, const ComponentFit& start,
                           const FitControl& control) {
    const Index n = Z.rows();
    const Index q = Z.cols();
    ComponentFit out;
    if (family.has_dispersion()) {
        // Weighted ridge least squares given phi, then phi given the coefficients.
        const double phi = start.dispersion;
        MatrixXd A(q + 1, q + 1);
        VectorXd b(q + 1);
        const double wsum = w.sum();
        const VectorXd zw = Z.transpose() * w;
        A(0, 0) = wsum;
        A.block(1, 0, q, 1) = zw;
        A.block(0, 1, 1, q) = zw.transpose();
        A.block(1, 1, q, q) = Z.transpose() * w.asDiagonal() * Z;
        A.block(1, 1, q, q).diagonal() += phi * d;
        b(0) = w.dot(y);
        b.tail(q) = Z.transpose() * w.cwiseProduct(y);
        const VectorXd theta = detail::solve_spd(A, b);
        out.intercept = theta(0);
        out.slopes = theta.tail(q);
        const VectorXd resid = (y - Z * out.slopes).array() - out.intercept;
        const double rss = w.dot(resid.cwiseAbs2());
        out.dispersion = wsum > 0 ? std::max(rss / wsum, kDispersionFloor) : start.dispersion;
        return out;
    }

    const double m = family.trial_size;
    auto eta_of = [&](const VectorXd& theta) {
        VectorXd eta = Z * theta.tail(q);
        eta.array() += theta(0);
        return eta;
    };
    detail::NewtonProblem problem;
    problem.value = [&](const VectorXd& theta) {
        const VectorXd eta = eta_of(theta);
        double v = 0.0;
        for (Index i = 0; i < n; ++i) {
            if (w(i) == 0) continue;
            const double e = std::clamp(eta(i), -kEtaClamp, kEtaClamp);
            v += w(i) * (y(i) * e - m * softplus(e));
        }
        return v - 0.5 * d.dot(theta.tail(q).cwiseAbs2());
    };
    problem.derivatives = [&](const VectorXd& theta, VectorXd& grad, MatrixXd& neg_hess) {
        const VectorXd eta = eta_of(theta);
        VectorXd r(n), h(n);
        for (Index i = 0; i < n; ++i) {
            const double mu = logistic(std::clamp(eta(i), -kEtaClamp, kEtaClamp));
            r(i) = w(i) * (y(i) - m * mu);
            h(i) = w(i) * m * mu * (1.0 - mu);
        }
        grad.resize(q + 1);
        grad(0) = r.sum();
        grad.tail(q) = Z.transpose() * r - d.cwiseProduct(theta.tail(q));
        neg_hess.resize(q + 1, q + 1);
        const VectorXd zh = Z.transpose() * h;
        neg_hess(0, 0) = h.sum();
        neg_hess.block(1, 0, q, 1) = zh;
        neg_hess.block(0, 1, 1, q) = zh.transpose();
        neg_hess.block(1, 1, q, q) = Z.transpose() * h.asDiagonal() * Z;
        neg_hess.block(1, 1, q, q).diagonal() += d;
    };
    VectorXd theta(q + 1);
    theta(0) = start.intercept;
    theta.tail(q) = start.slopes;
    theta = detail::damped_newton(std::move(theta), problem, control.max_irls_iter, control.irls_tol);
    out.intercept = theta(0);
    out.slopes = theta.tail(q);
    out.dispersion = 1.0;
    return out;
}

// M-step with a precomputed LQA diagonal (+inf marks frozen coefficients).
FmrParams m_step_with(const Dataset& data, const MatrixXd& tau, const PenaltySpec& spec,
                      const FmrParams& current, const MatrixXd& lqa, ZeroMask& zero_mask,
                      const FitControl& control) {
    const Index n = data.n();
    const Index p = data.p();
    const Index K = tau.cols();
    FmrParams next = current;
    for (Index k = 0; k < K; ++k) {
        std::vector<Index> active;
        for (Index l = 0; l < p; ++l)
            if (std::isfinite(lqa(k, l))) active.push_back(l);
        const auto q = static_cast<Index>(active.size());
        MatrixXd Z(n, q);
        VectorXd d(q);
        ComponentFit start;
        start.intercept = current.intercepts(k);
        start.dispersion = current.dispersions(k);
        start.slopes.resize(q);
        for (Index a = 0; a < q; ++a) {
            Z.col(a) = data.X.col(active[a]);
            d(a) = lqa(k, active[a]);
            start.slopes(a) = current.beta(k, active[a]);
        }
        const ComponentFit f = fit_component(Z, data.y, tau.col(k), d, data.family, start, control);
        next.beta.row(k).setZero();
        for (Index a = 0; a < q; ++a) next.beta(k, active[a]) = f.slopes(a);
        next.intercepts(k) = f.intercept;
        next.dispersions(k) = f.dispersion;
        for (Index l = 0; l < p; ++l)
            if (!std::isfinite(lqa(k, l))) zero_mask(k, l) = true;
    }
    freeze_small(next.beta, spec, zero_mask);
    next.mixing = update_mixing(tau.colwise().sum().transpose(), mixing_penalty_factors(next.beta, spec), n,
                                control.pi_floor);
    return next;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_start(const Dataset& data, Index K, const StartPoint& start) {
    if (start.responsibilities.rows() != data.n() || start.responsibilities.cols() != K)
        throw DimensionMismatch("start responsibilities must be n x K");
    if (start.lqa_anchor && (start.lqa_anchor->rows() != K || start.lqa_anchor->cols() != data.p()))
        throw DimensionMismatch("LQA anchor must be K x p");
}

} // namespace

void FitControl::validate(Index K) const {
    if (max_em_iter < 1 || max_irls_iter < 1 || n_starts < 1)
        throw InputError("iteration and start counts must be positive");
    if (!(em_tol > 0) || !(irls_tol > 0)) throw InputError("tolerances must be positive");
    if (!(pi_floor > 0) || !(pi_floor < 1.0 / static_cast<double>(K)))
        throw InputError("pi_floor must lie in (0, 1/K)");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

Index count_nonzero(const MatrixXd& beta) { return (beta.array() != 0.0).count(); }

MatrixXd e_step(const FmrParams& params, const Dataset& data) {
    const MatrixXd joint = joint_log_densities(params, data);
    const VectorXd lse = row_log_sum_exp(joint);
    return (joint.colwise() - lse).array().exp().matrix();
}

VectorXd update_mixing(const VectorXd& column_sums, const VectorXd& penalty_factors, Index n,
                       double pi_floor) {
    const Index K = column_sums.size();
    const double total = column_sums.sum();
    VectorXd pi(K);
    if ((penalty_factors.array() == 0.0).all()) {
        pi = column_sums / total;
        pi = pi.cwiseMax(pi_floor);
        return pi / pi.sum();
    }
    // pi_k = max(floor, a_k / (n c_k + mu)); the total is decreasing in mu.
    const VectorXd nc = static_cast<double>(n) * penalty_factors;
    auto mass = [&](double mu) {
        double s = 0.0;
        for (Index k = 0; k < K; ++k) {
            const double denom = nc(k) + mu;
            s += denom > 0 ? std::max(pi_floor, column_sums(k) / denom) : std::numeric_limits<double>::infinity();
        }
        return s;
    };
    double lo = -nc.minCoeff();
    double hi = std::max(lo, 0.0) + total + 1.0;
    while (mass(hi) > 1.0) hi = lo + 2.0 * (hi - lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (mass(mid) > 1.0 ? lo : hi) = mid;
    }
    for (Index k = 0; k < K; ++k) pi(k) = std::max(pi_floor, column_sums(k) / (nc(k) + hi));
    return pi / pi.sum();
}

FmrParams m_step(const Dataset& data, const MatrixXd& responsibilities, const PenaltySpec& spec,
                 const FmrParams& params_current, ZeroMask& zero_mask, const FitControl& control) {
    if (responsibilities.rows() != data.n() || responsibilities.cols() != params_current.n_components())
        throw DimensionMismatch("responsibilities must be n x K");
    const MatrixXd lqa = lqa_coefficients(params_current.beta, spec, data.n(), params_current.mixing, zero_mask);
    return m_step_with(data, responsibilities, spec, params_current, lqa, zero_mask, control);
}

MatrixXd random_initialization(Index n, Index K, std::uint64_t seed) {
    if (K < 1) throw InputError("K must be >= 1");
    std::mt19937_64 rng(seed);
    MatrixXd tau(n, K);
    for (Index i = 0; i < n; ++i) {
        double sum = 0.0;
        for (Index k = 0; k < K; ++k) {
            // Unit exponentials normalized to the simplex give Dirichlet(1, ..., 1).
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            tau(i, k) = -std::log1p(-u);
            sum += tau(i, k);
        }
        if (!(sum > 0)) {
            tau.row(i).setConstant(1.0 / static_cast<double>(K));
            continue;
        }
        tau.row(i) /= sum;
    }
    return tau;
}

FitResult fit_from(const Dataset& data, Index K, const PenaltySpec& spec, const FitControl& control,
                   const StartPoint& start) {
    spec.validate();
    control.validate(K);
    check_start(data, K, start);
    const Index n = data.n();
    const Index p = data.p();

    FmrParams params = FmrParams::zeros(K, p);
    if (start.lqa_anchor) params.beta = *start.lqa_anchor;
    if (data.family.has_dispersion()) {
        const double mean = data.y.mean();
        params.dispersions.setConstant(std::max((data.y.array() - mean).square().mean(), kDispersionFloor));
    }
    params.mixing = update_mixing(start.responsibilities.colwise().sum().transpose(), VectorXd::Zero(K), n,
                                  control.pi_floor);

    ZeroMask mask = ZeroMask::Constant(K, p, false);
    MatrixXd lqa = start.lqa_anchor ? lqa_coefficients(params.beta, spec, n, params.mixing, mask)
                                    : MatrixXd::Zero(K, p);
    params = m_step_with(data, start.responsibilities, spec, params, lqa, mask, control);

    FitResult result;
    MatrixXd joint = joint_log_densities(params, data);
    VectorXd lse = row_log_sum_exp(joint);
    double loglik = lse.sum();
    double objective = loglik - penalty_value(params.beta, spec, n, params.mixing);
    if (!std::isfinite(objective)) throw SingularSystem("non-finite objective after the first M-step");
    result.objective_trace.push_back(objective);

    int iter = 0;
    for (; iter < control.max_em_iter; ++iter) {
        const MatrixXd tau = (joint.colwise() - lse).array().exp().matrix();
        FmrParams next = m_step(data, tau, spec, params, mask, control);
        joint = joint_log_densities(next, data);
        lse = row_log_sum_exp(joint);
        const double next_loglik = lse.sum();
        const double next_objective = next_loglik - penalty_value(next.beta, spec, n, next.mixing);
        if (!std::isfinite(next_objective)) throw SingularSystem("EM produced a non-finite objective");
        result.objective_trace.push_back(next_objective);
        const double change = std::abs(next_objective - objective);
        params = std::move(next);
        loglik = next_loglik;
        objective = next_objective;
        if (change <= control.em_tol * std::abs(objective)) {
            result.converged = true;
            ++iter;
            break;
        }
    }

    result.params = std::move(params);
    result.responsibilities = (joint.colwise() - lse).array().exp().matrix();
    result.loglik = loglik;
    result.penalized_objective = objective;
    result.n_nonzero = count_nonzero(result.params.beta);
    result.iterations = iter;
    result.zero_mask = std::move(mask);
    if (control.observer) control.observer(result.objective_trace);
    return result;
}

FitResult fit(const Dataset& data, Index K, const PenaltySpec& spec, const FitControl& control) {
    control.validate(K);
    std::optional<FitResult> best;
    std::string last_error;
    for (int s = 0; s < control.n_starts; ++s) {
        StartPoint start{random_initialization(data.n(), K, derive_seed(control.seed, static_cast<std::uint64_t>(s))),
                         std::nullopt};
        try {
            FitResult r = fit_from(data, K, spec, control, start);
            r.start_index = s;
            if (!best || r.penalized_objective > best->penalized_objective) best = std::move(r);
        } catch (const NumericalError& e) {
            last_error = e.what();
        }
    }
    if (!best) throw AllStartsFailed("all " + std::to_string(control.n_starts) + " starts failed: " + last_error);
    return std::move(*best);
}

} // namespace penmix

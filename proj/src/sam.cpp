#include "penmix/sam.hpp"

#include <algorithm>
#include <cmath>

#include "newton.hpp"
#include "penmix/error.hpp"
#include "penmix/likelihood.hpp"

namespace penmix {

namespace {

using Eigen::ArrayXXd;

void check_shapes(const SamParams& params, const SamDataset& data) {
    const Index K = params.n_components();
    if (K < 1 || params.n_covariates() != data.n_covariates() ||
        params.species_intercepts.size() != data.n_species() || params.mixing.size() != K) {
        throw DimensionMismatch("SAM parameters do not match the data dimensions");
    }
}

// n x s matrix of clamped linear predictors b_j + x_i' beta_k.
ArrayXXd species_eta(const VectorXd& archetype_eta, const VectorXd& intercepts) {
    ArrayXXd eta = archetype_eta.replicate(1, intercepts.size()).array();
    eta.rowwise() += intercepts.transpose().array();
    return eta.cwiseMax(-kEtaClamp).cwiseMin(kEtaClamp);
}

ArrayXXd softplus(const ArrayXXd& eta) { return (-eta.abs()).exp().log1p() + eta.cwiseMax(0.0); }

ArrayXXd logistic(const ArrayXXd& eta) { return 1.0 / (1.0 + (-eta).exp()); }

// Sum over sites of the Bernoulli log-likelihood, per species (length s).
VectorXd site_sums(const ArrayXXd& eta, const MatrixXd& Y) {
    return (Y.array() * eta - softplus(eta)).colwise().sum().transpose();
}

std::vector<bool> isolated_flags(const SamDataset& data) {
    std::vector<bool> flags(static_cast<std::size_t>(data.n_species()), false);
    for (Index j : data.isolated_species()) flags[static_cast<std::size_t>(j)] = true;
    return flags;
}

// Joint penalized Newton over (species intercepts, active archetype slopes).
// The intercept block is diagonal, so the step is solved through the Schur
// complement on the slopes; cost is linear in the number of species.
SamParams m_step_with(const SamDataset& data, const MatrixXd& tau, const PenaltySpec& spec,
                      const SamParams& current, const MatrixXd& lqa, ZeroMask& zero_mask,
                      const FitControl& control) {
    const Index s = data.n_species();
    const Index p = data.n_covariates();
    const Index K = tau.cols();
    const auto isolated = isolated_flags(data);

    std::vector<std::vector<Index>> active(static_cast<std::size_t>(K));
    std::vector<MatrixXd> designs(static_cast<std::size_t>(K));
    std::vector<Index> offset(static_cast<std::size_t>(K) + 1, s);
    for (Index k = 0; k < K; ++k) {
        auto& act = active[static_cast<std::size_t>(k)];
        for (Index l = 0; l < p; ++l)
            if (std::isfinite(lqa(k, l))) act.push_back(l);
        MatrixXd Z(data.n_sites(), static_cast<Index>(act.size()));
        for (std::size_t a = 0; a < act.size(); ++a) Z.col(static_cast<Index>(a)) = data.X.col(act[a]);
        designs[static_cast<std::size_t>(k)] = std::move(Z);
        offset[static_cast<std::size_t>(k) + 1] = offset[static_cast<std::size_t>(k)] + static_cast<Index>(act.size());
    }
    const Index dim = offset.back();

    auto slopes = [&](const VectorXd& theta, Index k) {
        const auto kk = static_cast<std::size_t>(k);
        return theta.segment(offset[kk], offset[kk + 1] - offset[kk]);
    };
    auto ridge = [&](const VectorXd& theta, Index k) {
        double r = 0.0;
        const auto& act = active[static_cast<std::size_t>(k)];
        for (std::size_t a = 0; a < act.size(); ++a) {
            const double b = theta(offset[static_cast<std::size_t>(k)] + static_cast<Index>(a));
            r += lqa(k, act[a]) * b * b;
        }
        return 0.5 * r;
    };
    auto clamp_intercepts = [&](VectorXd& theta) {
        for (Index j = 0; j < s; ++j)
            if (isolated[static_cast<std::size_t>(j)]) theta(j) = std::clamp(theta(j), -kInterceptCap, kInterceptCap);
    };

    auto value_of = [&](const VectorXd& theta) {
        VectorXd t = theta;
        clamp_intercepts(t);
        const VectorXd b = t.head(s);
        double v = 0.0;
        for (Index k = 0; k < K; ++k) {
            const VectorXd e = designs[static_cast<std::size_t>(k)] * slopes(t, k);
            v += tau.col(k).dot(site_sums(species_eta(e, b), data.Y)) - ridge(t, k);
        }
        return v;
    };

    // Gradient plus the three blocks of the negated Hessian: diagonal
    // intercept curvature, intercept-slope coupling (s x slopes) and the
    // block-diagonal slope curvature.
    VectorXd intercept_curv;
    MatrixXd coupling;
    auto assemble = [&](const VectorXd& theta, VectorXd& grad, MatrixXd& slope_hess) {
        const VectorXd b = theta.head(s);
        grad = VectorXd::Zero(dim);
        intercept_curv = VectorXd::Zero(s);
        coupling = MatrixXd::Zero(s, dim - s);
        slope_hess = MatrixXd::Zero(dim - s, dim - s);
        for (Index k = 0; k < K; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            const MatrixXd& Z = designs[kk];
            const Index q = Z.cols();
            const Index at = offset[kk] - s;
            const ArrayXXd eta = species_eta(Z * slopes(theta, k), b);
            const ArrayXXd mu = logistic(eta);
            const MatrixXd resid = (data.Y.array() - mu).matrix();
            const MatrixXd w = (mu * (1.0 - mu)).matrix();
            const VectorXd tk = tau.col(k);
            grad.head(s) += resid.colwise().sum().transpose().cwiseProduct(tk);
            intercept_curv += w.colwise().sum().transpose().cwiseProduct(tk);
            if (q == 0) continue;
            const VectorXd r = resid * tk;
            const VectorXd h = w * tk;
            VectorXd g = Z.transpose() * r;
            for (Index a = 0; a < q; ++a) g(a) -= lqa(k, active[kk][static_cast<std::size_t>(a)]) * theta(offset[kk] + a);
            grad.segment(offset[kk], q) = g;
            MatrixXd H = Z.transpose() * h.asDiagonal() * Z;
            for (Index a = 0; a < q; ++a) H(a, a) += lqa(k, active[kk][static_cast<std::size_t>(a)]);
            slope_hess.block(at, at, q, q) = H;
            coupling.block(0, at, s, q) = tk.asDiagonal() * (w.transpose() * Z);
        }
    };

    auto newton = [&](VectorXd theta) {
        double current = value_of(theta);
        if (!std::isfinite(current)) throw SingularSystem("SAM surrogate not finite at start");
        VectorXd grad;
        MatrixXd slope_hess;
        for (int iter = 0; iter < control.max_irls_iter; ++iter) {
            assemble(theta, grad, slope_hess);
            const VectorXd inv_curv = intercept_curv.cwiseMax(1e-12).cwiseInverse();
            VectorXd step(dim);
            if (dim > s) {
                const MatrixXd scaled = inv_curv.asDiagonal() * coupling;
                const MatrixXd schur = slope_hess - coupling.transpose() * scaled;
                const VectorXd rhs = grad.tail(dim - s) - scaled.transpose() * grad.head(s);
                step.tail(dim - s) = detail::solve_spd(schur, rhs);
                step.head(s) = inv_curv.cwiseProduct(grad.head(s) - coupling * step.tail(dim - s));
            } else {
                step = inv_curv.cwiseProduct(grad);
            }
            if (!step.allFinite()) throw SingularSystem("SAM Newton step is not finite");
            double t = 1.0;
            bool accepted = false;
            VectorXd candidate;
            double value = current;
            for (int halving = 0; halving < 40; ++halving) {
                candidate = theta + t * step;
                clamp_intercepts(candidate);
                value = value_of(candidate);
                if (std::isfinite(value) && value >= current) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) break;
            const double change = value - current;
            theta = std::move(candidate);
            current = value;
            if (change <= control.irls_tol * (std::abs(current) + control.irls_tol)) break;
        }
        return theta;
    };

    VectorXd theta(dim);
    theta.head(s) = current.species_intercepts;
    clamp_intercepts(theta);
    for (Index k = 0; k < K; ++k) {
        const auto& act = active[static_cast<std::size_t>(k)];
        for (std::size_t a = 0; a < act.size(); ++a)
            theta(offset[static_cast<std::size_t>(k)] + static_cast<Index>(a)) = current.beta(k, act[a]);
    }
    theta = newton(std::move(theta));

    SamParams next = current;
    next.species_intercepts = theta.head(s);
    next.beta.setZero();
    for (Index k = 0; k < K; ++k) {
        const auto& act = active[static_cast<std::size_t>(k)];
        for (std::size_t a = 0; a < act.size(); ++a)
            next.beta(k, act[a]) = theta(offset[static_cast<std::size_t>(k)] + static_cast<Index>(a));
        for (Index l = 0; l < p; ++l)
            if (!std::isfinite(lqa(k, l))) zero_mask(k, l) = true;
    }
    freeze_small(next.beta, spec, zero_mask);
    next.mixing = update_mixing(tau.colwise().sum().transpose(), mixing_penalty_factors(next.beta, spec), s,
                                control.pi_floor);
    return next;
}

} // namespace

std::vector<Index> SamDataset::isolated_species() const {
    std::vector<Index> out;
    for (Index j = 0; j < n_species(); ++j) {
        const double total = Y.col(j).sum();
        if (total == 0 || total == static_cast<double>(n_sites())) out.push_back(j);
    }
    return out;
}

SamDataset make_sam_dataset(const MatrixXd& Y, const MatrixXd& raw_X, std::vector<std::string> species_names,
                            std::vector<std::string> site_ids, std::vector<std::string> covariate_names) {
    if (Y.rows() != raw_X.rows()) throw DimensionMismatch("Y and X must have one row per site");
    if (Y.cols() < 1) throw DimensionMismatch("at least one species is required");
    for (Index i = 0; i < Y.rows(); ++i)
        for (Index j = 0; j < Y.cols(); ++j)
            if (Y(i, j) != 0.0 && Y(i, j) != 1.0)
                throw InvalidResponse("presence-absence entries must be 0 or 1 (site " + std::to_string(i + 1) +
                                      ", species " + std::to_string(j + 1) + ")");
    auto standardized = standardize(raw_X);
    SamDataset d;
    d.Y = Y;
    d.X = std::move(standardized.X);
    d.stats = std::move(standardized.stats);
    d.species_names = species_names.empty() ? default_column_names(Y.cols(), "sp") : std::move(species_names);
    d.site_ids = site_ids.empty() ? default_column_names(Y.rows(), "site") : std::move(site_ids);
    d.covariate_names = covariate_names.empty() ? default_column_names(raw_X.cols()) : std::move(covariate_names);
    if (static_cast<Index>(d.species_names.size()) != Y.cols() || static_cast<Index>(d.site_ids.size()) != Y.rows() ||
        static_cast<Index>(d.covariate_names.size()) != raw_X.cols()) {
        throw DimensionMismatch("label counts do not match the data");
    }
    return d;
}

SamParams SamParams::permuted(std::span<const int> perm) const {
    return {permute_rows(beta, perm), species_intercepts, permute_entries(mixing, perm)};
}

MatrixXd sam_species_log_densities(const SamParams& params, const SamDataset& data) {
    check_shapes(params, data);
    const Index K = params.n_components();
    MatrixXd L(data.n_species(), K);
    for (Index k = 0; k < K; ++k) {
        const VectorXd e = data.X * params.beta.row(k).transpose();
        L.col(k) = site_sums(species_eta(e, params.species_intercepts), data.Y);
    }
    return L;
}

double sam_log_likelihood(const SamParams& params, const SamDataset& data) {
    MatrixXd joint = sam_species_log_densities(params, data);
    joint.rowwise() += params.mixing.array().log().matrix().transpose();
    return row_log_sum_exp(joint).sum();
}

MatrixXd sam_e_step(const SamParams& params, const SamDataset& data) {
    MatrixXd joint = sam_species_log_densities(params, data);
    joint.rowwise() += params.mixing.array().log().matrix().transpose();
    const VectorXd lse = row_log_sum_exp(joint);
    return (joint.colwise() - lse).array().exp().matrix();
}

SamParams sam_m_step(const SamDataset& data, const MatrixXd& responsibilities, const PenaltySpec& spec,
                     const SamParams& params_current, ZeroMask& zero_mask, const FitControl& control) {
    if (responsibilities.rows() != data.n_species() || responsibilities.cols() != params_current.n_components())
        throw DimensionMismatch("responsibilities must be s x K");
    const MatrixXd lqa =
        lqa_coefficients(params_current.beta, spec, data.n_species(), params_current.mixing, zero_mask);
    return m_step_with(data, responsibilities, spec, params_current, lqa, zero_mask, control);
}

SamFitResult sam_fit_from(const SamDataset& data, Index K, const PenaltySpec& spec, const FitControl& control,
                          const StartPoint& start) {
    spec.validate();
    control.validate(K);
    const Index s = data.n_species();
    const Index p = data.n_covariates();
    if (start.responsibilities.rows() != s || start.responsibilities.cols() != K)
        throw DimensionMismatch("start responsibilities must be s x K");
    if (start.lqa_anchor && (start.lqa_anchor->rows() != K || start.lqa_anchor->cols() != p))
        throw DimensionMismatch("LQA anchor must be K x p");

    SamFitResult result;
    SamParams params;
    params.beta = start.lqa_anchor ? *start.lqa_anchor : MatrixXd::Zero(K, p);
    params.species_intercepts.resize(s);
    const double n_sites = static_cast<double>(data.n_sites());
    for (Index j = 0; j < s; ++j) {
        const double prevalence = std::clamp(data.Y.col(j).sum() / n_sites, 0.5 / n_sites, 1.0 - 0.5 / n_sites);
        params.species_intercepts(j) =
            std::clamp(std::log(prevalence / (1.0 - prevalence)), -kInterceptCap, kInterceptCap);
    }
    params.mixing = update_mixing(start.responsibilities.colwise().sum().transpose(), VectorXd::Zero(K), s,
                                  control.pi_floor);
    for (Index j : data.isolated_species())
        result.warnings.push_back("IsolatedSpecies: '" + data.species_names[static_cast<std::size_t>(j)] +
                                  "' is present at all sites or none; intercept clamped to +/-" +
                                  std::to_string(static_cast<int>(kInterceptCap)));

    ZeroMask mask = ZeroMask::Constant(K, p, false);
    const MatrixXd lqa = start.lqa_anchor ? lqa_coefficients(params.beta, spec, s, params.mixing, mask)
                                          : MatrixXd::Zero(K, p);
    params = m_step_with(data, start.responsibilities, spec, params, lqa, mask, control);

    auto joint_of = [&](const SamParams& prm) {
        MatrixXd joint = sam_species_log_densities(prm, data);
        joint.rowwise() += prm.mixing.array().log().matrix().transpose();
        return joint;
    };
    MatrixXd joint = joint_of(params);
    VectorXd lse = row_log_sum_exp(joint);
    double loglik = lse.sum();
    double objective = loglik - penalty_value(params.beta, spec, s, params.mixing);
    if (!std::isfinite(objective)) throw SingularSystem("non-finite objective after the first M-step");
    result.objective_trace.push_back(objective);

    int iter = 0;
    for (; iter < control.max_em_iter; ++iter) {
        const MatrixXd tau = (joint.colwise() - lse).array().exp().matrix();
        SamParams next = sam_m_step(data, tau, spec, params, mask, control);
        joint = joint_of(next);
        lse = row_log_sum_exp(joint);
        const double next_loglik = lse.sum();
        const double next_objective = next_loglik - penalty_value(next.beta, spec, s, next.mixing);
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

SamFitResult sam_fit(const SamDataset& data, Index K, const PenaltySpec& spec, const FitControl& control) {
    control.validate(K);
    std::optional<SamFitResult> best;
    std::string last_error;
    for (int r = 0; r < control.n_starts; ++r) {
        StartPoint start{random_initialization(data.n_species(), K, derive_seed(control.seed, static_cast<std::uint64_t>(r))),
                         std::nullopt};
        try {
            SamFitResult fit = sam_fit_from(data, K, spec, control, start);
            fit.start_index = r;
            if (!best || fit.penalized_objective > best->penalized_objective) best = std::move(fit);
        } catch (const NumericalError& e) {
            last_error = e.what();
        }
    }
    if (!best) throw AllStartsFailed("all " + std::to_string(control.n_starts) + " starts failed: " + last_error);
    return std::move(*best);
}

MatrixXd archetype_linear_predictor(const SamFitResult& fit, const MatrixXd& X_new) {
    const SamParams& prm = fit.params;
    if (X_new.cols() != prm.n_covariates()) throw DimensionMismatch("X_new width differs from beta");
    if (fit.responsibilities.rows() != prm.species_intercepts.size() ||
        fit.responsibilities.cols() != prm.n_components())
        throw DimensionMismatch("responsibilities must be s x K");
    MatrixXd eta = X_new * prm.beta.transpose();
    for (Index k = 0; k < prm.n_components(); ++k) {
        const double weight = fit.responsibilities.col(k).sum();
        const double intercept = fit.responsibilities.col(k).dot(prm.species_intercepts) / weight;
        eta.col(k).array() += intercept;
    }
    return eta;
}

} // namespace penmix

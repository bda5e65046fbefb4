#include "penmix/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "penmix/error.hpp"
#include "penmix/parallel.hpp"

namespace penmix {

namespace {

template <class Data>
struct Backend;

template <>
struct Backend<Dataset> {
    using Result = FitResult;
    static Result cold(const Dataset& d, Index K, const PenaltySpec& spec, const FitControl& c) {
        return fit(d, K, spec, c);
    }
    static Result warm(const Dataset& d, Index K, const PenaltySpec& spec, const FitControl& c,
                       const StartPoint& start) {
        return fit_from(d, K, spec, c, start);
    }
    static Index bic_count(const Dataset& d, BicCount) { return d.n(); }
    static Index dimension(const Result& r, const Dataset& d) { return parameter_dimension(r, d.family); }
};

template <>
struct Backend<SamDataset> {
    using Result = SamFitResult;
    static Result cold(const SamDataset& d, Index K, const PenaltySpec& spec, const FitControl& c) {
        return sam_fit(d, K, spec, c);
    }
    static Result warm(const SamDataset& d, Index K, const PenaltySpec& spec, const FitControl& c,
                       const StartPoint& start) {
        return sam_fit_from(d, K, spec, c, start);
    }
    static Index bic_count(const SamDataset& d, BicCount count) {
        return count == BicCount::species ? d.n_species() : d.n_sites();
    }
    static Index dimension(const Result& r, const SamDataset&) { return parameter_dimension(r); }
};

template <class Data, class Result>
double lambda_max_impl(const Data& data, Index K, const PenaltySpec& path_spec, const Result& unpenalized,
                       const FitControl& control) {
    const StartPoint start{unpenalized.responsibilities, unpenalized.params.beta};
    auto all_zero = [&](double lambda) {
        PenaltySpec spec = path_spec;
        spec.lambda = lambda;
        try {
            return Backend<Data>::warm(data, K, spec, control, start).n_nonzero == 0;
        } catch (const NumericalError&) {
            return false;
        }
    };
    double lo = 1.0;
    double hi = 1.0;
    if (all_zero(hi)) {
        lo = hi / 2;
        for (int i = 0; i < 80 && all_zero(lo); ++i) {
            hi = lo;
            lo /= 2;
        }
    } else {
        int i = 0;
        do {
            lo = hi;
            hi *= 2;
            if (++i > 80) throw NumericalError("no lambda freezes every coefficient");
        } while (!all_zero(hi));
    }
    while (hi / lo > 1.01) {
        const double mid = std::sqrt(lo * hi);
        (all_zero(mid) ? hi : lo) = mid;
    }
    return hi;
}

// Replaces zero entries of `beta` with the unpenalized estimates so a warm
// start can revive coefficients frozen at a larger lambda.
MatrixXd warm_anchor(const MatrixXd& beta, const MatrixXd& unpenalized_beta) {
    return (beta.array() == 0.0).select(unpenalized_beta, beta);
}

template <class Data, class Result>
TuningOutcome<Result> select_tuning_impl(const Data& data, Index K, PenaltyFamily family, const TuningGrid& grid,
                                         const FitControl& control, const Result& unpenalized) {
    using B = Backend<Data>;
    grid.validate();
    TuningOutcome<Result> out;
    out.unpenalized = unpenalized;
    const Index count = B::bic_count(data, grid.bic_count);

    if (family == PenaltyFamily::none) {
        out.spec = PenaltySpec::none();
        out.fit = unpenalized;
        out.table.push_back({0.0, 0.0, 0.0, K, unpenalized.loglik, unpenalized.n_nonzero,
                             bic_tuning(unpenalized.loglik, unpenalized.n_nonzero, count), unpenalized.converged,
                             false});
        return out;
    }

    std::vector<PenaltySpec> paths;
    if (uses_ridge(family)) {
        for (double ridge : grid.ridge_lambdas) {
            PenaltySpec spec;
            spec.family = family;
            spec.ridge_lambda = ridge;
            paths.push_back(spec);
        }
    } else {
        for (double gamma : grid.gammas) {
            PenaltySpec spec;
            spec.family = family;
            spec.gamma = gamma;
            spec.weights = adaptive_weights(unpenalized.params.beta, family, gamma);
            paths.push_back(spec);
        }
    }

    double best_bic = std::numeric_limits<double>::infinity();
    bool have_best = false;
    for (const PenaltySpec& path : paths) {
        std::vector<double> lambdas = grid.lambdas;
        if (lambdas.empty()) {
            const double lmax = lambda_max_impl(data, K, path, unpenalized, control);
            out.lambda_max.push_back(lmax);
            lambdas = lambda_path(lmax, grid.n_lambdas, grid.lambda_min_ratio);
        } else {
            std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
        }
        const StartPoint fresh{unpenalized.responsibilities, unpenalized.params.beta};
        const Result* previous = &unpenalized;
        Result last;
        for (double lambda : lambdas) {
            PenaltySpec spec = path;
            spec.lambda = lambda;
            TuningCell cell{lambda, uses_ridge(family) ? 0.0 : path.gamma, path.ridge_lambda, K};
            try {
                const StartPoint start{previous->responsibilities,
                                       warm_anchor(previous->params.beta, unpenalized.params.beta)};
                Result r = B::warm(data, K, spec, control, start);
                // A warm path that merged components at large lambda cannot split
                // them again, so each cell is also started from the unpenalized fit.
                if (previous != &unpenalized) {
                    try {
                        Result alt = B::warm(data, K, spec, control, fresh);
                        if (alt.penalized_objective > r.penalized_objective) r = std::move(alt);
                    } catch (const NumericalError&) {
                    }
                }
                cell.loglik = r.loglik;
                cell.n_nonzero = r.n_nonzero;
                cell.bic = bic_tuning(r.loglik, r.n_nonzero, count);
                cell.converged = r.converged;
                if (cell.bic < best_bic) {
                    best_bic = cell.bic;
                    out.spec = spec;
                    out.fit = r;
                    have_best = true;
                }
                last = std::move(r);
                previous = &last;
            } catch (const NumericalError&) {
                cell.failed = true;
                cell.bic = std::numeric_limits<double>::quiet_NaN();
            }
            out.table.push_back(cell);
        }
    }
    if (!have_best) throw AllStartsFailed("every tuning cell failed");
    return out;
}

template <class Data>
auto select_components_impl(const Data& data, Index K_min, Index K_max, PenaltyFamily family,
                            const TuningGrid& grid, const FitControl& control, int jobs) {
    using B = Backend<Data>;
    using Result = typename B::Result;
    if (K_min < 1 || K_max < K_min || K_max > 20) throw InputError("K range must lie within [1, 20]");
    ComponentSelection<Result> out;
    const auto count = static_cast<std::size_t>(K_max - K_min + 1);
    out.per_K.resize(count);
    out.table.resize(count);
    const Index bic_n = B::bic_count(data, grid.bic_count);
    parallel_for(count, jobs, [&](std::size_t i) {
        const Index K = K_min + static_cast<Index>(i);
        ComponentRow row;
        row.K = K;
        try {
            const Result unpenalized = B::cold(data, K, PenaltySpec::none(), control);
            auto tuned = select_tuning_impl(data, K, family, grid, control, unpenalized);
            row.loglik = tuned.fit.loglik;
            row.dimension = B::dimension(tuned.fit, data);
            row.bic = bic_components(row.loglik, row.dimension, bic_n);
            out.per_K[i] = std::move(tuned);
        } catch (const NumericalError&) {
            row.failed = true;
            row.bic = std::numeric_limits<double>::quiet_NaN();
        }
        out.table[i] = row;
    });
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : out.table) {
        if (!row.failed && row.bic < best) {
            best = row.bic;
            out.best_K = row.K;
        }
    }
    if (out.best_K == 0) throw AllStartsFailed("no component count could be fitted");
    return out;
}

} // namespace

BicCount parse_bic_count(std::string_view text) {
    if (text == "n" || text == "observations" || text == "sites") return BicCount::observations;
    if (text == "s" || text == "species") return BicCount::species;
    throw InputError("bic count must be 'n' or 's'");
}

std::string_view to_string(BicCount count) { return count == BicCount::species ? "s" : "n"; }

void TuningGrid::validate() const {
    for (double l : lambdas)
        if (!(l > 0) || !std::isfinite(l)) throw InputError("grid lambdas must be positive");
    if (lambdas.empty() && n_lambdas < 1) throw InputError("n_lambdas must be >= 1");
    if (!(lambda_min_ratio > 0 && lambda_min_ratio <= 1)) throw InputError("lambda_min_ratio must lie in (0, 1]");
    if (gammas.empty()) throw InputError("gamma grid must be nonempty");
    for (double g : gammas)
        if (!(g > 0)) throw InputError("gammas must be positive");
    if (ridge_lambdas.empty()) throw InputError("ridge grid must be nonempty");
    for (double r : ridge_lambdas)
        if (!(r >= 0)) throw InputError("ridge lambdas must be nonnegative");
}

double bic_tuning(double loglik, Index n_nonzero, Index bic_count) {
    return -2.0 * loglik + std::log(static_cast<double>(bic_count)) * static_cast<double>(n_nonzero);
}

double bic_components(double loglik, Index dimension, Index bic_count) {
    return -2.0 * loglik + std::log(static_cast<double>(bic_count)) * static_cast<double>(dimension);
}

Index parameter_dimension(const FitResult& fit, const ResponseFamily& family) {
    const Index K = fit.params.n_components();
    return count_nonzero(fit.params.beta) + K + (family.has_dispersion() ? K : 0) + (K - 1);
}

Index parameter_dimension(const SamFitResult& fit) {
    const Index K = fit.params.n_components();
    return count_nonzero(fit.params.beta) + fit.params.species_intercepts.size() + (K - 1);
}

std::vector<double> lambda_path(double lambda_max, int count, double min_ratio) {
    if (count < 1) throw InputError("lambda path needs at least one value");
    std::vector<double> path(static_cast<std::size_t>(count));
    path[0] = lambda_max;
    for (int i = 1; i < count; ++i)
        path[static_cast<std::size_t>(i)] = lambda_max * std::pow(min_ratio, static_cast<double>(i) / (count - 1));
    return path;
}

double find_lambda_max(const Dataset& data, Index K, const PenaltySpec& path_spec, const FitResult& unpenalized,
                       const FitControl& control) {
    return lambda_max_impl(data, K, path_spec, unpenalized, control);
}

double find_lambda_max(const SamDataset& data, Index K, const PenaltySpec& path_spec,
                       const SamFitResult& unpenalized, const FitControl& control) {
    return lambda_max_impl(data, K, path_spec, unpenalized, control);
}

TuningOutcome<FitResult> select_tuning_from(const Dataset& data, Index K, PenaltyFamily family,
                                            const TuningGrid& grid, const FitControl& control,
                                            const FitResult& unpenalized) {
    return select_tuning_impl(data, K, family, grid, control, unpenalized);
}

TuningOutcome<SamFitResult> select_tuning_from(const SamDataset& data, Index K, PenaltyFamily family,
                                               const TuningGrid& grid, const FitControl& control,
                                               const SamFitResult& unpenalized) {
    return select_tuning_impl(data, K, family, grid, control, unpenalized);
}

TuningOutcome<FitResult> select_tuning(const Dataset& data, Index K, PenaltyFamily family, const TuningGrid& grid,
                                       const FitControl& control) {
    return select_tuning_impl(data, K, family, grid, control, fit(data, K, PenaltySpec::none(), control));
}

TuningOutcome<SamFitResult> select_tuning(const SamDataset& data, Index K, PenaltyFamily family,
                                          const TuningGrid& grid, const FitControl& control) {
    return select_tuning_impl(data, K, family, grid, control, sam_fit(data, K, PenaltySpec::none(), control));
}

ComponentSelection<FitResult> select_num_components(const Dataset& data, Index K_min, Index K_max,
                                                    PenaltyFamily family, const TuningGrid& grid,
                                                    const FitControl& control, int jobs) {
    return select_components_impl(data, K_min, K_max, family, grid, control, jobs);
}

ComponentSelection<SamFitResult> select_num_components(const SamDataset& data, Index K_min, Index K_max,
                                                       PenaltyFamily family, const TuningGrid& grid,
                                                       const FitControl& control, int jobs) {
    return select_components_impl(data, K_min, K_max, family, grid, control, jobs);
}

} // namespace penmix

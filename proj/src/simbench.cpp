#include "penmix/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <tuple>

#include <boost/math/distributions/fisher_f.hpp>

#include "penmix/error.hpp"
#include "penmix/likelihood.hpp"
#include "penmix/parallel.hpp"

namespace penmix {

namespace {

constexpr std::uint64_t kTrainStream = 0;
constexpr std::uint64_t kTestStream = 1;
constexpr std::uint64_t kFitStream = 2;

// Component-2 slopes of each model; component 1 is shared.
const std::vector<double>& component_two(SimModel model) {
    static const std::vector<double> m1{2, 0, 0, 0, 1, -2, 0.5};
    static const std::vector<double> m2{2, 0, 0, 1, -2, 0.5};
    static const std::vector<double> m3{2, 0, 1, -2, 0.5};
    static const std::vector<double> m4{2, 1, -2, 0.5};
    switch (model) {
    case SimModel::I: return m1;
    case SimModel::II: return m2;
    case SimModel::III: return m3;
    case SimModel::IV: return m4;
    }
    return m1;
}

MatrixXd correlated_gaussian(Index n, Index p, double base, std::mt19937_64& rng) {
    MatrixXd cov(p, p);
    for (Index r = 0; r < p; ++r)
        for (Index c = 0; c < p; ++c) cov(r, c) = std::pow(base, static_cast<double>(std::abs(r - c)));
    const MatrixXd L = Eigen::LLT<MatrixXd>(cov).matrixL();
    std::normal_distribution<double> normal;
    MatrixXd Z(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) Z(i, j) = normal(rng);
    return Z * L.transpose();
}

struct Draw {
    VectorXd y;
    std::vector<int> labels;
};

Draw draw_responses(const MatrixXd& raw_X, const FmrParams& truth, double pi1, int trial_size,
                    std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Draw d;
    d.y.resize(raw_X.rows());
    d.labels.resize(static_cast<std::size_t>(raw_X.rows()));
    for (Index i = 0; i < raw_X.rows(); ++i) {
        const int k = unif(rng) < pi1 ? 0 : 1;
        const double eta = truth.intercepts(k) + raw_X.row(i).dot(truth.beta.row(k));
        std::binomial_distribution<int> binom(trial_size, logistic(eta));
        d.y(i) = binom(rng);
        d.labels[static_cast<std::size_t>(i)] = k;
    }
    return d;
}

std::uint64_t cell_key(const SimScenario& s) {
    return static_cast<std::uint64_t>(static_cast<int>(s.model)) * 1000003ULL +
           static_cast<std::uint64_t>(s.n) * 1009ULL + static_cast<std::uint64_t>(std::llround(s.pi1 * 1000.0));
}

} // namespace

std::string_view to_string(SimModel model) {
    switch (model) {
    case SimModel::I: return "I";
    case SimModel::II: return "II";
    case SimModel::III: return "III";
    case SimModel::IV: return "IV";
    }
    return "I";
}

SimModel parse_sim_model(std::string_view text) {
    if (text == "I" || text == "1") return SimModel::I;
    if (text == "II" || text == "2") return SimModel::II;
    if (text == "III" || text == "3") return SimModel::III;
    if (text == "IV" || text == "4") return SimModel::IV;
    throw InputError("unknown simulation model '" + std::string(text) + "'");
}

Index sim_covariate_count(Index n) {
    // Fixed counts for the standard sizes; the formula
    // alone gives 8, 11 and 13.
    switch (n) {
    case 100: return 7;
    case 200: return 9;
    case 400: return 12;
    default: break;
    }
    const Index p = static_cast<Index>(std::ceil(4.0 * std::pow(static_cast<double>(n), 0.25))) - 5;
    if (p < 7) throw InputError("sample size too small for the simulation models (p < 7)");
    return p;
}

FmrParams sim_true_params(SimModel model, Index p, double pi1) {
    if (p < 7) throw InputError("simulation models need at least 7 covariates");
    FmrParams truth = FmrParams::zeros(2, p);
    const double one[] = {0.7, 2, -2, 1.5};
    for (Index l = 0; l < 4; ++l) truth.beta(0, l) = one[l];
    const auto& two = component_two(model);
    for (std::size_t l = 0; l < two.size(); ++l) truth.beta(1, static_cast<Index>(l)) = two[l];
    truth.intercepts << 1.0, -0.5;
    truth.mixing << pi1, 1.0 - pi1;
    return truth;
}

SimulatedData generate_dataset(const SimScenario& scenario) {
    if (!(scenario.pi1 >= 0 && scenario.pi1 <= 1)) throw InputError("pi1 must lie in [0, 1]");
    const Index p = sim_covariate_count(scenario.n);
    std::mt19937_64 rng(derive_seed(scenario.seed, kTrainStream));
    SimulatedData out;
    out.truth = sim_true_params(scenario.model, p, scenario.pi1);
    out.raw_X = correlated_gaussian(scenario.n, p, scenario.correlation_base, rng);
    Draw draw = draw_responses(out.raw_X, out.truth, scenario.pi1, scenario.trial_size, rng);
    out.labels = std::move(draw.labels);
    out.data = make_dataset(out.raw_X, draw.y, ResponseFamily::binomial(scenario.trial_size));
    return out;
}

Dataset generate_test_dataset(const SimScenario& scenario, const FmrParams& truth,
                              const StandardizationStats& train_stats, Index n_test) {
    std::mt19937_64 rng(derive_seed(scenario.seed, kTestStream));
    const MatrixXd raw = correlated_gaussian(n_test, truth.n_covariates(), scenario.correlation_base, rng);
    Draw draw = draw_responses(raw, truth, scenario.pi1, scenario.trial_size, rng);
    return make_standardized_dataset(apply_standardization(raw, train_stats), std::move(draw.y),
                                     ResponseFamily::binomial(scenario.trial_size), train_stats);
}

CoefficientPartition partition_coefficients(const MatrixXd& true_beta) {
    CoefficientPartition part;
    for (Index l = 0; l < true_beta.cols(); ++l) {
        const bool informative = (true_beta.col(l).array() != 0.0).any();
        for (Index k = 0; k < true_beta.rows(); ++k) {
            if (true_beta(k, l) != 0.0) part.set_A.emplace_back(k, l);
            else if (informative) part.set_B.emplace_back(k, l);
            else part.set_C.emplace_back(k, l);
        }
    }
    return part;
}

std::vector<int> resolve_labels(const MatrixXd& estimated_beta, const MatrixXd& true_beta) {
    if (estimated_beta.rows() != true_beta.rows() || estimated_beta.cols() != true_beta.cols())
        throw DimensionMismatch("estimated and true coefficients differ in shape");
    const Index K = true_beta.rows();
    if (K > 8) throw InputError("exhaustive label resolution supports K <= 8");
    std::vector<int> perm(static_cast<std::size_t>(K));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_dist = std::numeric_limits<double>::infinity();
    do {
        double dist = 0.0;
        for (Index k = 0; k < K; ++k)
            dist += (estimated_beta.row(perm[static_cast<std::size_t>(k)]) - true_beta.row(k)).squaredNorm();
        if (dist < best_dist) {
            best_dist = dist;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

SelectionRates sensitivity_specificity(const MatrixXd& estimated_beta, const CoefficientPartition& partition) {
    const std::size_t zeros = partition.set_B.size() + partition.set_C.size();
    if (partition.set_A.empty()) throw EmptySet("no truly nonzero coefficients");
    if (zeros == 0) throw EmptySet("no truly zero coefficients");
    std::size_t kept = 0;
    for (auto [k, l] : partition.set_A)
        if (estimated_beta(k, l) != 0.0) ++kept;
    std::size_t dropped = 0;
    for (const auto* set : {&partition.set_B, &partition.set_C})
        for (auto [k, l] : *set)
            if (estimated_beta(k, l) == 0.0) ++dropped;
    return {static_cast<double>(kept) / static_cast<double>(partition.set_A.size()),
            static_cast<double>(dropped) / static_cast<double>(zeros)};
}

double predicted_log_likelihood(const FitResult& fit, const Dataset& test) {
    return log_likelihood(fit.params, test);
}

MatrixXd center_across_methods(const MatrixXd& values) {
    return values.colwise() - values.rowwise().mean();
}

std::uint64_t replicate_seed(const SimScenario& cell, int replicate) {
    return derive_seed(derive_seed(cell.seed, cell_key(cell)), static_cast<std::uint64_t>(replicate));
}

ReplicateResult run_replicate(const SimScenario& scenario, int replicate, const CampaignOptions& options) {
    ReplicateResult out;
    out.scenario = scenario;
    out.replicate = replicate;
    SimScenario sc = scenario;
    sc.seed = replicate_seed(scenario, replicate);
    const SimulatedData sim = generate_dataset(sc);
    const Dataset test = generate_test_dataset(sc, sim.truth, sim.data.stats, options.n_test);
    const CoefficientPartition partition = partition_coefficients(sim.truth.beta);

    FitControl control = options.control;
    control.seed = derive_seed(sc.seed, kFitStream);
    std::optional<FitResult> unpenalized;
    try {
        unpenalized = fit(sim.data, 2, PenaltySpec::none(), control);
    } catch (const NumericalError&) {
    }
    for (PenaltyFamily method : options.methods) {
        MethodOutcome m;
        m.method = method;
        if (!unpenalized) {
            m.failed = true;
            out.methods.push_back(m);
            continue;
        }
        try {
            const auto tuned = select_tuning_from(sim.data, 2, method, options.grid, control, *unpenalized);
            const auto perm = resolve_labels(tuned.fit.params.beta, sim.truth.beta);
            const MatrixXd resolved = permute_rows(tuned.fit.params.beta, perm);
            const SelectionRates rates = sensitivity_specificity(resolved, partition);
            m.sensitivity = rates.sensitivity;
            m.specificity = rates.specificity;
            m.pred_loglik = predicted_log_likelihood(tuned.fit, test);
            m.lambda = tuned.spec.lambda;
            m.gamma = uses_ridge(method) ? 0.0 : tuned.spec.gamma;
            m.ridge_lambda = tuned.spec.ridge_lambda;
            m.n_nonzero = tuned.fit.n_nonzero;
        } catch (const NumericalError&) {
            m.failed = true;
        }
        out.methods.push_back(m);
    }
    double total = 0.0;
    int ok = 0;
    for (const auto& m : out.methods)
        if (!m.failed) {
            total += m.pred_loglik;
            ++ok;
        }
    for (auto& m : out.methods)
        if (!m.failed) m.pred_loglik_centered = m.pred_loglik - total / ok;
    return out;
}

std::vector<ReplicateResult> run_campaign(const std::vector<SimScenario>& cells, int replicates,
                                          const CampaignOptions& options) {
    if (replicates < 1) throw InputError("replicate count must be positive");
    const std::size_t total = cells.size() * static_cast<std::size_t>(replicates);
    std::vector<ReplicateResult> results(total);
    parallel_for(total, options.jobs, [&](std::size_t job) {
        const auto& cell = cells[job / static_cast<std::size_t>(replicates)];
        const int r = static_cast<int>(job % static_cast<std::size_t>(replicates));
        results[job] = run_replicate(cell, r, options);
    });
    return results;
}

std::vector<SummaryRow> summarize(const std::vector<ReplicateResult>& results) {
    std::vector<SummaryRow> rows;
    std::map<std::tuple<int, Index, long long, int>, std::size_t> index;
    for (const auto& rep : results) {
        for (const auto& m : rep.methods) {
            const auto key = std::make_tuple(static_cast<int>(rep.scenario.model), rep.scenario.n,
                                             std::llround(rep.scenario.pi1 * 1e6), static_cast<int>(m.method));
            auto it = index.find(key);
            if (it == index.end()) {
                it = index.emplace(key, rows.size()).first;
                SummaryRow row;
                row.model = rep.scenario.model;
                row.n = rep.scenario.n;
                row.pi1 = rep.scenario.pi1;
                row.method = m.method;
                rows.push_back(row);
            }
            SummaryRow& row = rows[it->second];
            ++row.replicates;
            if (m.failed) {
                ++row.failed;
                continue;
            }
            row.mean_sensitivity += m.sensitivity;
            row.mean_specificity += m.specificity;
            row.mean_pred_loglik_centered += m.pred_loglik_centered;
        }
    }
    for (auto& row : rows) {
        const int ok = row.replicates - row.failed;
        if (ok > 0) {
            row.mean_sensitivity /= ok;
            row.mean_specificity /= ok;
            row.mean_pred_loglik_centered /= ok;
        }
    }
    return rows;
}

SyntheticSam generate_sam_dataset(const SamScenario& sc) {
    const Index K = sc.n_archetypes;
    const Index p = sc.n_covariates;
    const Index s = sc.n_species;
    if (K < 1 || p < 1 || s < K || sc.n_sites < 2) throw InputError("invalid SAM scenario dimensions");
    std::mt19937_64 rng(derive_seed(sc.seed, kTrainStream));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    SyntheticSam out;
    out.truth.beta = MatrixXd::Zero(K, p);
    for (Index k = 0; k < K; ++k) {
        bool any = false;
        for (Index l = 0; l < p; ++l) {
            if (unif(rng) < sc.zero_fraction) continue;
            const double magnitude = sc.coefficient_scale * (0.5 + unif(rng));
            out.truth.beta(k, l) = unif(rng) < 0.5 ? -magnitude : magnitude;
            any = true;
        }
        if (!any) out.truth.beta(k, k % p) = sc.coefficient_scale;
    }
    out.labels.resize(static_cast<std::size_t>(s));
    for (Index j = 0; j < s; ++j) out.labels[static_cast<std::size_t>(j)] = static_cast<int>(j % K);
    std::shuffle(out.labels.begin(), out.labels.end(), rng);
    out.truth.mixing = VectorXd::Zero(K);
    for (int label : out.labels) out.truth.mixing(label) += 1.0 / static_cast<double>(s);
    out.truth.species_intercepts.resize(s);
    for (Index j = 0; j < s; ++j) out.truth.species_intercepts(j) = sc.intercept_mean + sc.intercept_sd * normal(rng);

    MatrixXd raw_X(sc.n_sites, p);
    for (Index i = 0; i < sc.n_sites; ++i)
        for (Index l = 0; l < p; ++l) raw_X(i, l) = normal(rng);
    MatrixXd Y(sc.n_sites, s);
    for (Index j = 0; j < s; ++j) {
        const int k = out.labels[static_cast<std::size_t>(j)];
        for (Index i = 0; i < sc.n_sites; ++i) {
            const double eta = out.truth.species_intercepts(j) + raw_X.row(i).dot(out.truth.beta.row(k));
            Y(i, j) = unif(rng) < logistic(eta) ? 1.0 : 0.0;
        }
    }
    out.data = make_sam_dataset(Y, raw_X);
    return out;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DimensionMismatch("label vectors differ in length");
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        rows[a[i]] += 1;
        cols[b[i]] += 1;
    }
    auto pairs = [](double x) { return x * (x - 1) / 2; };
    double index = 0, sum_rows = 0, sum_cols = 0;
    for (const auto& [key, count] : joint) index += pairs(count);
    for (const auto& [key, count] : rows) sum_rows += pairs(count);
    for (const auto& [key, count] : cols) sum_cols += pairs(count);
    const double expected = sum_rows * sum_cols / pairs(static_cast<double>(a.size()));
    const double maximum = 0.5 * (sum_rows + sum_cols);
    if (maximum == expected) return 1.0;
    return (index - expected) / (maximum - expected);
}

double sample_variance(const std::vector<double>& values) {
    if (values.size() < 2) throw InputError("variance needs at least two values");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(values.size() - 1);
}

double f_test_two_sided(double ratio, double df1, double df2) {
    if (!(ratio >= 0) || !(df1 > 0) || !(df2 > 0)) throw InputError("invalid F-test arguments");
    const boost::math::fisher_f_distribution<double> dist(df1, df2);
    const double lower = boost::math::cdf(dist, ratio);
    const double upper = boost::math::cdf(boost::math::complement(dist, ratio));
    return std::min(1.0, 2.0 * std::min(lower, upper));
}

namespace {

template <class Data, class FitFn>
StabilityReport stability_impl(const Data& data, Index K, const PenaltySpec& spec_penalized,
                               const PenaltySpec& spec_unpenalized, int n_restarts, std::uint64_t seed,
                               const FitControl& control, int jobs, FitFn&& fit_fn) {
    if (n_restarts < 2) throw InputError("the stability experiment needs at least two restarts per spec");
    struct Outcome {
        double loglik = 0.0;
        bool failed = false;
    };
    std::vector<Outcome> pen(static_cast<std::size_t>(n_restarts)), unpen(static_cast<std::size_t>(n_restarts));
    parallel_for(2 * static_cast<std::size_t>(n_restarts), jobs, [&](std::size_t job) {
        const auto r = job / 2;
        const bool penalized = job % 2 == 0;
        FitControl c = control;
        c.n_starts = 1;
        c.seed = derive_seed(seed, r);
        Outcome& o = penalized ? pen[r] : unpen[r];
        try {
            o.loglik = fit_fn(data, K, penalized ? spec_penalized : spec_unpenalized, c).loglik;
        } catch (const NumericalError&) {
            o.failed = true;
        }
    });
    StabilityReport report;
    for (const auto& o : pen) {
        if (o.failed) ++report.penalized_failures;
        else report.penalized_loglik.push_back(o.loglik);
    }
    for (const auto& o : unpen) {
        if (o.failed) ++report.unpenalized_failures;
        else report.unpenalized_loglik.push_back(o.loglik);
    }
    if (report.penalized_loglik.size() < 2 || report.unpenalized_loglik.size() < 2)
        throw NumericalError("fewer than two successful restarts for a spec");
    report.penalized_variance = sample_variance(report.penalized_loglik);
    report.unpenalized_variance = sample_variance(report.unpenalized_loglik);
    report.variance_ratio = report.unpenalized_variance == report.penalized_variance
                                ? 1.0
                                : report.unpenalized_variance / report.penalized_variance;
    report.f_p_value = std::isfinite(report.variance_ratio)
                           ? f_test_two_sided(report.variance_ratio,
                                              static_cast<double>(report.unpenalized_loglik.size() - 1),
                                              static_cast<double>(report.penalized_loglik.size() - 1))
                           : 0.0;
    return report;
}

} // namespace

StabilityReport stability_experiment(const SamDataset& data, Index K, const PenaltySpec& spec_penalized,
                                     const PenaltySpec& spec_unpenalized, int n_restarts, std::uint64_t seed,
                                     const FitControl& control, int jobs) {
    return stability_impl(data, K, spec_penalized, spec_unpenalized, n_restarts, seed, control, jobs,
                          [](const SamDataset& d, Index k, const PenaltySpec& s, const FitControl& c) {
                              return sam_fit(d, k, s, c);
                          });
}

StabilityReport stability_experiment(const Dataset& data, Index K, const PenaltySpec& spec_penalized,
                                     const PenaltySpec& spec_unpenalized, int n_restarts, std::uint64_t seed,
                                     const FitControl& control, int jobs) {
    return stability_impl(data, K, spec_penalized, spec_unpenalized, n_restarts, seed, control, jobs,
                          [](const Dataset& d, Index k, const PenaltySpec& s, const FitControl& c) {
                              return fit(d, k, s, c);
                          });
}

} // namespace penmix

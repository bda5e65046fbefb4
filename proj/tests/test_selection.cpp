#include <doctest.h>

#include "penmix/error.hpp"
#include "penmix/selection.hpp"
#include "penmix/simbench.hpp"
#include "support.hpp"

using namespace penmix;
using namespace testing;

namespace {

FitResult synthetic_result(double loglik, const MatrixXd& beta) {
    FitResult r;
    r.loglik = loglik;
    r.params = FmrParams::zeros(beta.rows(), beta.cols());
    r.params.beta = beta;
    r.n_nonzero = count_nonzero(beta);
    return r;
}

TuningGrid small_grid(int n_lambdas = 12) {
    TuningGrid g;
    g.n_lambdas = n_lambdas;
    g.gammas = {1.0};
    g.ridge_lambdas = {0.01};
    return g;
}

} // namespace

TEST_CASE("tuning criterion at reference values") {
    CHECK(bic_tuning(-100, 4, 100) == doctest::Approx(218.42).epsilon(1e-4));
    CHECK(bic_tuning(-57.25, 0, 300) == 114.5);
    CHECK(bic_tuning(-80, 3, 50) < bic_tuning(-80, 4, 50));
}

TEST_CASE("both criteria are linear in the log-likelihood and the count") {
    for (double ll : {-10.0, -123.5, 4.0})
        for (Index d : {0, 1, 7})
            for (Index n : {10, 400}) {
                CHECK(bic_tuning(ll, d, n) == doctest::Approx(-2 * ll + std::log(double(n)) * d));
                CHECK(bic_components(ll, d, n) == doctest::Approx(-2 * ll + std::log(double(n)) * d));
                CHECK(bic_tuning(ll - 1, d, n) - bic_tuning(ll, d, n) == doctest::Approx(2.0));
                CHECK(bic_components(ll, d + 1, n) - bic_components(ll, d, n) == doctest::Approx(std::log(double(n))));
            }
}

TEST_CASE("component-count dimension") {
    const FitResult full = synthetic_result(-50, MatrixXd::Ones(2, 3));
    CHECK(parameter_dimension(full, ResponseFamily::gaussian()) == 11);
    CHECK(parameter_dimension(full, ResponseFamily::bernoulli()) == 9);
    MatrixXd sparse = MatrixXd::Ones(2, 3);
    sparse(0, 1) = 0;
    CHECK(parameter_dimension(synthetic_result(-50, sparse), ResponseFamily::gaussian()) == 10);
    SamFitResult sam;
    sam.params.beta = MatrixXd::Ones(3, 2);
    sam.params.species_intercepts = VectorXd::Zero(7);
    CHECK(parameter_dimension(sam) == 6 + 7 + 2);
}

TEST_CASE("lambda path is log-spaced and decreasing") {
    const auto path = lambda_path(2.0, 5, 1e-4);
    REQUIRE(path.size() == 5);
    CHECK(path.front() == 2.0);
    CHECK(path.back() == doctest::Approx(2e-4));
    for (std::size_t i = 1; i < path.size(); ++i) CHECK(path[i] / path[i - 1] == doctest::Approx(0.1));
}

TEST_CASE("the NONE family is a single cell holding the unpenalized fit") {
    const Dataset data = random_dataset(150, 3, 2, ResponseFamily::binomial(10), 3);
    const FitControl c = checked();
    const auto out = select_tuning(data, 2, PenaltyFamily::none, small_grid(), c);
    REQUIRE(out.table.size() == 1);
    const FitResult direct = fit(data, 2, PenaltySpec::none(), c);
    CHECK(out.fit.loglik == direct.loglik);
    CHECK(out.fit.params.beta == direct.params.beta);
    CHECK(out.spec.family == PenaltyFamily::none);
}

TEST_CASE("the first cell of each path sits at lambda_max and is empty") {
    const Dataset data = random_dataset(200, 4, 2, ResponseFamily::binomial(10), 5);
    TuningGrid grid = small_grid(8);
    grid.gammas = {0.5, 2.0};
    for (auto fam : {PenaltyFamily::mixgl1, PenaltyFamily::mixgl2, PenaltyFamily::adl}) {
        CAPTURE(to_string(fam));
        const auto out = select_tuning(data, 2, fam, grid, checked());
        REQUIRE(out.table.size() == 16);
        REQUIRE(out.lambda_max.size() == 2);
        CHECK(out.table[0].lambda == out.lambda_max[0]);
        CHECK(out.table[0].n_nonzero == 0);
        CHECK(out.table[8].n_nonzero == 0);
        CHECK(out.table[7].n_nonzero > 0);
        // Well below lambda_max something survives. Closer in, LQA shrinks the
        // last groups geometrically and EM may stop with them just above the
        // freezing threshold, so "all frozen" is not monotone there.
        PenaltySpec spec;
        spec.family = fam;
        spec.gamma = 0.5;
        spec.weights = adaptive_weights(out.unpenalized.params.beta, fam, 0.5);
        spec.lambda = out.lambda_max[0] / 2;
        const auto below = fit_from(data, 2, spec, checked(),
                                    {out.unpenalized.responsibilities, out.unpenalized.params.beta});
        CHECK(below.n_nonzero > 0);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& cell : out.table)
            if (!cell.failed) best = std::min(best, cell.bic);
        CHECK(bic_tuning(out.fit.loglik, out.fit.n_nonzero, data.n()) == best);
    }
}

TEST_CASE("ridge comparators tune over the ridge grid") {
    const Dataset data = random_dataset(150, 3, 2, ResponseFamily::binomial(10), 7);
    TuningGrid grid = small_grid(6);
    grid.ridge_lambdas = {0.001, 0.1};
    const auto out = select_tuning(data, 2, PenaltyFamily::mixlasso_l2, grid, checked());
    REQUIRE(out.table.size() == 12);
    CHECK(out.table[0].ridge_lambda == 0.001);
    CHECK(out.table[6].ridge_lambda == 0.1);
    CHECK(out.table[0].gamma == 0.0);
}

TEST_CASE("MIXGL1 keeps every true coefficient on model I at n = 400") {
    const int replicates = 20;
    int kept_all = 0;
    for (int r = 0; r < replicates; ++r) {
        SimScenario sc;
        sc.model = SimModel::I;
        sc.n = 400;
        sc.seed = derive_seed(2024, static_cast<std::uint64_t>(r));
        const SimulatedData sim = generate_dataset(sc);
        const auto out = select_tuning(sim.data, 2, PenaltyFamily::mixgl1, TuningGrid{}, checked());
        const auto perm = resolve_labels(out.fit.params.beta, sim.truth.beta);
        const MatrixXd b = permute_rows(out.fit.params.beta, perm);
        bool all = true;
        for (auto [k, l] : partition_coefficients(sim.truth.beta).set_A) all = all && b(k, l) != 0.0;
        kept_all += all;
    }
    MESSAGE("replicates keeping the full true support: " << kept_all << "/" << replicates);
    CHECK(kept_all >= 0.95 * replicates);
}

TEST_CASE("component count is consistent on single-GLM data") {
    const int replicates = 50;
    int picked_one = 0;
    for (int r = 0; r < replicates; ++r) {
        std::mt19937_64 rng(derive_seed(77, static_cast<std::uint64_t>(r)));
        const MatrixXd X = gaussian_matrix(200, 4, rng);
        VectorXd y(200);
        for (Index i = 0; i < 200; ++i) {
            const double eta = 0.3 + 1.2 * X(i, 0) - 0.8 * X(i, 1);
            std::binomial_distribution<int> b(10, 1 / (1 + std::exp(-eta)));
            y(i) = b(rng);
        }
        const Dataset data = make_dataset(X, y, ResponseFamily::binomial(10));
        FitControl c = checked();
        c.n_starts = 3;
        c.seed = static_cast<std::uint64_t>(r);
        const auto sel = select_num_components(data, 1, 3, PenaltyFamily::mixgl1, small_grid(10), c);
        picked_one += sel.best_K == 1;
        CHECK(sel.table.size() == 3);
    }
    MESSAGE("K = 1 chosen in " << picked_one << "/" << replicates);
    CHECK(picked_one >= 0.9 * replicates);
}

TEST_CASE("warm paths are no less stable than cold fits on the same grid") {
    SimScenario sc;
    sc.model = SimModel::II;
    sc.n = 200;
    sc.seed = 99;
    const Dataset data = generate_dataset(sc).data;
    const TuningGrid grid = small_grid(10);
    std::vector<double> warm_obj, cold_obj;
    for (std::uint64_t s = 0; s < 8; ++s) {
        FitControl c = checked();
        c.n_starts = 1;
        c.seed = 1000 + s;
        const auto warm = select_tuning(data, 2, PenaltyFamily::mixgl1, grid, c);
        warm_obj.push_back(warm.fit.penalized_objective);
        double best_bic = std::numeric_limits<double>::infinity();
        double best_obj = 0.0;
        for (const auto& cell : warm.table) {
            PenaltySpec spec = warm.spec;
            spec.lambda = cell.lambda;
            const FitResult cold = fit(data, 2, spec, c);
            const double bic = bic_tuning(cold.loglik, cold.n_nonzero, data.n());
            if (bic < best_bic) {
                best_bic = bic;
                best_obj = cold.penalized_objective;
            }
        }
        cold_obj.push_back(best_obj);
    }
    const double vw = sample_variance(warm_obj), vc = sample_variance(cold_obj);
    MESSAGE("objective variance warm " << vw << " cold " << vc);
    CHECK(vw <= vc);
}

TEST_CASE("component selection over a wide K range runs on a large synthetic SAM") {
    SamScenario sc;
    sc.n_sites = 120;
    sc.n_species = 60;
    sc.n_archetypes = 4;
    sc.seed = 5;
    const SamDataset data = generate_sam_dataset(sc).data;
    TuningGrid grid;
    grid.lambdas = {0.5, 0.05};
    grid.gammas = {1.0};
    grid.bic_count = BicCount::species;
    FitControl c = checked();
    c.n_starts = 1;
    c.max_em_iter = 60;
    c.max_irls_iter = 5;
    const auto sel = select_num_components(data, 1, 20, PenaltyFamily::mixgl1, grid, c);
    REQUIRE(sel.table.size() == 20);
    for (const auto& row : sel.table) CHECK_FALSE(row.failed);
    CHECK(sel.best_K >= 2);
}

TEST_CASE("invalid selection inputs") {
    const Dataset data = random_dataset(40, 2, 1, ResponseFamily::bernoulli(), 9);
    CHECK_THROWS_AS(select_num_components(data, 0, 2, PenaltyFamily::mixgl1, small_grid(), {}), InputError);
    CHECK_THROWS_AS(select_num_components(data, 1, 21, PenaltyFamily::mixgl1, small_grid(), {}), InputError);
    TuningGrid bad;
    bad.gammas.clear();
    CHECK_THROWS_AS(select_tuning(data, 1, PenaltyFamily::mixgl1, bad, {}), InputError);
    CHECK(parse_bic_count("s") == BicCount::species);
    CHECK_THROWS_AS(parse_bic_count("q"), InputError);
}

TEST_CASE("no recorded fit decreased its objective") {
    MESSAGE("fits observed: " << ascent_log().fits.load());
    CHECK(ascent_log().violations.load() == 0);
}

#include <doctest.h>

#include <numbers>
#include <sstream>

#include "penmix/csv.hpp"
#include "penmix/error.hpp"
#include "penmix/likelihood.hpp"
#include "support.hpp"

using namespace penmix;
using namespace testing;

TEST_CASE("standardize centers and scales with the n-1 divisor") {
    MatrixXd raw(3, 1);
    raw << 1, 2, 3;
    const auto s = standardize(raw);
    CHECK(s.X(0, 0) == doctest::Approx(-1));
    CHECK(s.X(1, 0) == doctest::Approx(0));
    CHECK(s.X(2, 0) == doctest::Approx(1));
    CHECK(s.stats.mean(0) == doctest::Approx(2));
    CHECK(s.stats.sd(0) == doctest::Approx(1));
}

TEST_CASE("standardize leaves a standardized column unchanged") {
    std::mt19937_64 rng(3);
    const auto once = standardize(gaussian_matrix(40, 3, rng));
    const auto twice = standardize(once.X);
    CHECK((twice.X - once.X).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant columns and tiny samples are rejected") {
    MatrixXd raw = MatrixXd::Zero(3, 2);
    raw.col(0) << 1, 2, 4;
    CHECK_THROWS_AS(standardize(raw), ConstantColumn);
    CHECK_THROWS_AS(standardize(MatrixXd::Ones(1, 2)), DimensionMismatch);
}

TEST_CASE("standardization statistics transfer and invert") {
    std::mt19937_64 rng(4);
    const MatrixXd raw = gaussian_matrix(30, 4, rng) * 3.0;
    const auto s = standardize(raw);
    CHECK((apply_standardization(raw, s.stats) - s.X).norm() < 1e-12);
    CHECK((unstandardize(s.X, s.stats) - raw).norm() < 1e-10);
}

TEST_CASE("quadratic terms are appended and standardized") {
    std::mt19937_64 rng(5);
    const MatrixXd X = standardize(gaussian_matrix(50, 2, rng)).X;
    std::vector<std::string> names{"a", "b"};
    const MatrixXd Q = add_quadratic_terms(X, &names);
    REQUIRE(Q.cols() == 4);
    CHECK(names[2] == "a^2");
    CHECK(names[3] == "b^2");
    CHECK(std::abs(Q.col(2).mean()) < 1e-12);
    const double var = (Q.col(3).array() - Q.col(3).mean()).square().sum() / 49.0;
    CHECK(var == doctest::Approx(1.0));
}

TEST_CASE("component densities at reference points") {
    CHECK(component_log_density(1, 0, ResponseFamily::bernoulli(), 1) == doctest::Approx(std::log(0.5)));
    CHECK(component_log_density(5, 0, ResponseFamily::binomial(10), 1) ==
          doctest::Approx(std::log(252.0 / 1024.0)).epsilon(1e-12));
    CHECK(component_log_density(5, 0, ResponseFamily::binomial(10), 1) == doctest::Approx(-1.402).epsilon(1e-3));
    for (double phi : {0.1, 1.0, 7.5})
        CHECK(component_log_density(2.5, 2.5, ResponseFamily::gaussian(), phi) ==
              doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * phi)));
}

TEST_CASE("densities normalize over the response support") {
    for (double eta : {-3.0, -0.4, 0.0, 1.7, 6.0}) {
        for (int m : {1, 3, 10}) {
            const auto fam = ResponseFamily::binomial(m);
            double total = 0.0;
            for (int y = 0; y <= m; ++y) total += std::exp(component_log_density(y, eta, fam, 1.0));
            CHECK(std::abs(total - 1.0) < 1e-8);
        }
        for (double phi : {0.3, 2.0}) {
            // Composite Simpson over +-15 standard deviations.
            const double sd = std::sqrt(phi);
            const int steps = 20000;
            const double a = eta - 15 * sd, h = 30 * sd / steps;
            double total = 0.0;
            for (int s = 0; s <= steps; ++s) {
                const double w = (s == 0 || s == steps) ? 1 : (s % 2 ? 4 : 2);
                total += w * std::exp(component_log_density(a + s * h, eta, ResponseFamily::gaussian(), phi));
            }
            CHECK(std::abs(total * h / 3 - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("extreme linear predictors stay finite") {
    const auto fam = ResponseFamily::binomial(10);
    CHECK(std::isfinite(component_log_density(0, 1e6, fam, 1)));
    CHECK(std::isfinite(component_log_density(10, -1e6, fam, 1)));
    CHECK(softplus(800) == doctest::Approx(800));
    CHECK(softplus(-800) >= 0);
}

TEST_CASE("response support is validated") {
    CHECK_THROWS_AS(ResponseFamily::bernoulli().check_response(2), InvalidResponse);
    CHECK_THROWS_AS(ResponseFamily::binomial(10).check_response(3.5), InvalidResponse);
    CHECK_THROWS_AS(ResponseFamily::binomial(10).check_response(-1), InvalidResponse);
    CHECK_NOTHROW(ResponseFamily::gaussian().check_response(-3.2));
    CHECK(ResponseFamily::parse("binomial:10") == ResponseFamily::binomial(10));
    CHECK(ResponseFamily::parse("bernoulli") == ResponseFamily::binomial(1));
    CHECK_THROWS_AS(ResponseFamily::parse("poisson"), InputError);
}

TEST_CASE("a single component is the plain GLM log-likelihood") {
    for (auto fam : {ResponseFamily::bernoulli(), ResponseFamily::binomial(10), ResponseFamily::gaussian()}) {
        std::mt19937_64 rng(11);
        const Dataset data = random_dataset(25, 3, 1, fam, 12);
        const FmrParams params = random_params(1, 3, fam, rng);
        double direct = 0.0;
        for (Index i = 0; i < data.n(); ++i)
            direct += component_log_density(data.y(i), params.intercepts(0) + data.X.row(i).dot(params.beta.row(0)),
                                            fam, params.dispersions(0));
        CHECK(log_likelihood(params, data) == doctest::Approx(direct).epsilon(1e-13));
    }
}

TEST_CASE("duplicated components collapse to the single-component value") {
    std::mt19937_64 rng(13);
    const Dataset data = random_dataset(20, 2, 1, ResponseFamily::binomial(10), 14);
    const FmrParams one = random_params(1, 2, data.family, rng);
    FmrParams two = FmrParams::zeros(2, 2);
    two.beta.row(0) = two.beta.row(1) = one.beta.row(0);
    two.intercepts.setConstant(one.intercepts(0));
    two.mixing << 0.5, 0.5;
    CHECK(log_likelihood(two, data) == doctest::Approx(log_likelihood(one, data)).epsilon(1e-13));
}

TEST_CASE("log-likelihood matches the extended-precision oracle") {
    int instances = 0;
    for (auto fam : {ResponseFamily::bernoulli(), ResponseFamily::binomial(10), ResponseFamily::gaussian()}) {
        for (int r = 0; r < 40; ++r) {
            std::mt19937_64 rng(1000 + r);
            const Index n = 3 + r % 8, p = 1 + r % 4, K = 1 + r % 3;
            const Dataset data = random_dataset(n, p, K, fam, 2000 + r);
            const FmrParams params = random_params(K, p, fam, rng);
            const double oracle = static_cast<double>(oracle_log_likelihood(params, data));
            CHECK(std::abs(log_likelihood(params, data) - oracle) < 1e-10);
            ++instances;
        }
    }
    CHECK(instances >= 100);
}

TEST_CASE("five-observation bernoulli mixture against the brute-force sum") {
    const Dataset data = random_dataset(5, 2, 2, ResponseFamily::bernoulli(), 77);
    std::mt19937_64 rng(78);
    const FmrParams params = random_params(2, 2, data.family, rng);
    CHECK(std::abs(log_likelihood(params, data) - static_cast<double>(oracle_log_likelihood(params, data))) < 1e-10);
}

TEST_CASE("log-likelihood is exactly invariant to component relabeling") {
    for (auto fam : {ResponseFamily::bernoulli(), ResponseFamily::gaussian()}) {
        std::mt19937_64 rng(21);
        const Dataset data = random_dataset(30, 3, 3, fam, 22);
        const FmrParams params = random_params(3, 3, fam, rng);
        std::vector<int> perm{0, 1, 2};
        const double base = log_likelihood(params, data);
        while (std::next_permutation(perm.begin(), perm.end()))
            CHECK(log_likelihood(params.permuted(perm), data) == base);
    }
}

TEST_CASE("analytic score agrees with central differences") {
    for (auto fam : {ResponseFamily::bernoulli(), ResponseFamily::binomial(10), ResponseFamily::gaussian()}) {
        CAPTURE(fam.to_string());
        for (int r = 0; r < 50; ++r) {
            std::mt19937_64 rng(5000 + r);
            const Index K = 1 + r % 3, p = 1 + r % 3;
            const Dataset data = random_dataset(15, p, K, fam, 6000 + r);
            const FmrParams params = random_params(K, p, fam, rng);
            const VectorXd analytic = score_vector(log_likelihood_score(params, data));
            const VectorXd numeric = numeric_score(params, data);
            REQUIRE(analytic.size() == numeric.size());
            CHECK((analytic - numeric).norm() / std::max(numeric.norm(), 1e-8) < 1e-4);
        }
    }
}

TEST_CASE("csv reading, writing and cell parsing") {
    std::istringstream in("a,b,\"c d\"\n1,2.5,-3e2\n4,5,6\n");
    const CsvTable t = read_csv(in);
    CHECK(t.header == std::vector<std::string>{"a", "b", "c d"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.column_index("c d") == 2);
    CHECK(t.column_index("zz") == -1);
    CHECK_THROWS_AS(t.require_column("zz"), InputError);
    CHECK(parse_cell(t.rows[0][2], 1, "c d") == -300);
    CHECK_THROWS_AS(parse_cell("", 1, "a"), InputError);
    CHECK_THROWS_AS(parse_cell("NA", 1, "a"), InputError);
    std::ostringstream out;
    write_csv(out, t);
    std::istringstream again(out.str());
    CHECK(read_csv(again).rows == t.rows);
    CHECK(std::stod(format_double(0.1)) == 0.1);
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("dataset from csv names the missing response") {
    std::istringstream in("x1,x2,y\n1,2,0\n2,1,1\n3,5,1\n");
    const CsvTable t = read_csv(in);
    const Dataset d = dataset_from_csv(t, "y", ResponseFamily::bernoulli());
    CHECK(d.n() == 3);
    CHECK(d.p() == 2);
    CHECK(d.column_names == std::vector<std::string>{"x1", "x2"});
    try {
        dataset_from_csv(t, "resp", ResponseFamily::bernoulli());
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("resp") != std::string::npos);
    }
    std::istringstream bad("x1,y\n1,0\n2,2\n3,1\n");
    CHECK_THROWS_AS(dataset_from_csv(read_csv(bad), "y", ResponseFamily::bernoulli()), InvalidResponse);
}

TEST_CASE("parameter validation and permutation helpers") {
    FmrParams p = FmrParams::zeros(2, 3);
    p.mixing << 0.3, 0.7;
    CHECK_NOTHROW(p.validate(ResponseFamily::bernoulli()));
    p.mixing << 0.3, 0.6;
    CHECK_THROWS_AS(p.validate(ResponseFamily::bernoulli()), InputError);
    MatrixXd m(2, 2);
    m << 1, 2, 3, 4;
    const std::vector<int> swap{1, 0};
    CHECK(permute_rows(m, swap)(0, 0) == 3);
}

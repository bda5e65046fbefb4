#include <doctest.h>

#include <limits>
#include <random>

#include "penmix/error.hpp"
#include "penmix/params.hpp"
#include "penmix/penalty.hpp"

using namespace penmix;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const PenaltyFamily kAll[] = {PenaltyFamily::mixgl2, PenaltyFamily::mixgl1, PenaltyFamily::adl,
                              PenaltyFamily::mixlasso_l2, PenaltyFamily::mixscad_l2, PenaltyFamily::none};

PenaltySpec make_spec(PenaltyFamily family, double lambda, double ridge = 0.0) {
    PenaltySpec spec;
    spec.family = family;
    spec.lambda = family == PenaltyFamily::none ? 0.0 : lambda;
    spec.ridge_lambda = ridge;
    return spec;
}

MatrixXd random_beta(Eigen::Index K, Eigen::Index p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mag(0.2, 2.0);
    std::bernoulli_distribution sign(0.5);
    MatrixXd b(K, p);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = 0; l < p; ++l) b(k, l) = sign(rng) ? mag(rng) : -mag(rng);
    return b;
}

VectorXd random_mixing(Eigen::Index K, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    VectorXd m(K);
    for (Eigen::Index k = 0; k < K; ++k) m(k) = u(rng);
    return m / m.sum();
}

} // namespace

TEST_CASE("adaptive weights follow the group and coefficient formulas") {
    MatrixXd b(2, 1);
    b << 3, 4;
    CHECK(adaptive_weights(b, PenaltyFamily::mixgl2, 1.0)(0, 0) == doctest::Approx(0.2));
    CHECK(adaptive_weights(b, PenaltyFamily::mixgl2, 1.0)(1, 0) == doctest::Approx(0.2));
    MatrixXd half(1, 1);
    half << 0.5;
    CHECK(adaptive_weights(half, PenaltyFamily::mixgl1, 2.0)(0, 0) == doctest::Approx(4.0));
    CHECK(adaptive_weights(half, PenaltyFamily::adl, 2.0)(0, 0) == doctest::Approx(4.0));
    MatrixXd zero = MatrixXd::Zero(2, 2);
    for (auto f : {PenaltyFamily::mixgl2, PenaltyFamily::mixgl1, PenaltyFamily::adl})
        CHECK(adaptive_weights(zero, f, 1.0).maxCoeff() == kWeightCap);
    CHECK(adaptive_weights(b, PenaltyFamily::mixlasso_l2, 1.0) == MatrixXd::Ones(2, 1));
}

TEST_CASE("penalty of a zero matrix is zero") {
    const MatrixXd zero = MatrixXd::Zero(3, 4);
    const VectorXd mixing = VectorXd::Constant(3, 1.0 / 3);
    for (auto f : kAll) CHECK(penalty_value(zero, make_spec(f, 0.7, 0.3), 50, mixing) == 0.0);
}

TEST_CASE("group penalties at hand-evaluated points") {
    MatrixXd b(2, 1);
    const VectorXd mixing = VectorXd::Constant(2, 0.5);
    b << 3, 4;
    CHECK(penalty_value(b, make_spec(PenaltyFamily::mixgl2, 0.1), 10, mixing) == doctest::Approx(5.0));
    b << 1, 4;
    CHECK(penalty_value(b, make_spec(PenaltyFamily::mixgl1, 0.2), 10, mixing) ==
          doctest::Approx(4.4721).epsilon(1e-4));
    CHECK(penalty_value(b, make_spec(PenaltyFamily::adl, 0.2), 10, mixing) == doctest::Approx(10.0));
    // 10 * (0.5 * (0.2*1 + 0.3*1) + 0.5 * (0.2*4 + 0.3*16))
    CHECK(penalty_value(b, make_spec(PenaltyFamily::mixlasso_l2, 0.2, 0.3), 10, mixing) ==
          doctest::Approx(30.5));
}

TEST_CASE("scad pieces are continuous with the right derivative") {
    const double lam = 0.4, a = kDefaultScadA;
    CHECK(scad_value(0.2, lam, a) == doctest::Approx(0.08));
    CHECK(scad_derivative(0.2, lam, a) == doctest::Approx(lam));
    CHECK(scad_value(a * lam + 1, lam, a) == doctest::Approx((a + 1) * lam * lam / 2));
    CHECK(scad_derivative(a * lam + 1, lam, a) == 0.0);
    for (double t : {lam, a * lam}) {
        CHECK(scad_value(t - 1e-9, lam, a) == doctest::Approx(scad_value(t + 1e-9, lam, a)));
    }
    const double t = 0.9, h = 1e-6;
    CHECK(scad_derivative(t, lam, a) == doctest::Approx((scad_value(t + h, lam, a) - scad_value(t - h, lam, a)) / (2 * h)));
}

TEST_CASE("lqa coefficients at hand-evaluated points") {
    const VectorXd mixing = VectorXd::Constant(2, 0.5);
    MatrixXd b(2, 1);
    b << 3, 4;
    ZeroMask mask;
    const MatrixXd d = lqa_coefficients(b, make_spec(PenaltyFamily::mixgl2, 0.1), 10, mixing, mask);
    CHECK(d(0, 0) == doctest::Approx(0.2));
    CHECK(d(1, 0) == doctest::Approx(0.2));

    MatrixXd c(1, 1);
    c << 0.5;
    PenaltySpec adl = make_spec(PenaltyFamily::adl, 0.1);
    adl.weights = MatrixXd::Constant(1, 1, 2.0);
    ZeroMask m1;
    CHECK(lqa_coefficients(c, adl, 10, VectorXd::Ones(1), m1)(0, 0) == doctest::Approx(4.0));

    for (auto f : {PenaltyFamily::mixgl2, PenaltyFamily::mixgl1, PenaltyFamily::adl}) {
        ZeroMask m2;
        CHECK(lqa_coefficients(b, make_spec(f, 0.0), 10, mixing, m2).isZero());
        CHECK_FALSE(m2.any());
    }
}

TEST_CASE("small coefficients are frozen with infinite curvature") {
    MatrixXd b(2, 2);
    b << 1e-8, 2, 0.0, 1;
    for (auto f : {PenaltyFamily::mixgl1, PenaltyFamily::adl, PenaltyFamily::mixscad_l2}) {
        ZeroMask mask;
        const MatrixXd d = lqa_coefficients(b, make_spec(f, 0.1, 0.01), 20, VectorXd::Constant(2, 0.5), mask);
        CHECK(mask(0, 0));
        CHECK(mask(1, 0));
        CHECK_FALSE(mask(0, 1));
        CHECK(d(0, 0) == std::numeric_limits<double>::infinity());
        CHECK(std::isfinite(d(0, 1)));
    }
}

TEST_CASE("lqa majorizes the penalty near the expansion point") {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (auto f : kAll) {
        CAPTURE(to_string(f));
        for (int r = 0; r < 30; ++r) {
            const MatrixXd bt = random_beta(3, 4, rng);
            const VectorXd mixing = random_mixing(3, rng);
            PenaltySpec spec = make_spec(f, 0.05 + 0.01 * r, 0.02);
            if (is_adaptive(f)) spec.weights = adaptive_weights(random_beta(3, 4, rng), f, 1.0);
            ZeroMask mask;
            const MatrixXd d = lqa_coefficients(bt, spec, 40, mixing, mask);
            const double base = penalty_value(bt, spec, 40, mixing);
            for (int s = 0; s < 50; ++s) {
                MatrixXd b = bt;
                for (Eigen::Index i = 0; i < b.size(); ++i) b(i) += noise(rng);
                const double bound = base + 0.5 * (d.array() * (b.array().square() - bt.array().square())).sum();
                CHECK(penalty_value(b, spec, 40, mixing) <= bound + 1e-8);
            }
        }
    }
}

TEST_CASE("penalties are exactly invariant to component relabeling") {
    std::mt19937_64 rng(7);
    const MatrixXd b = random_beta(3, 5, rng);
    const VectorXd mixing = random_mixing(3, rng);
    std::vector<int> perm{0, 1, 2};
    for (auto f : kAll) {
        PenaltySpec spec = make_spec(f, 0.3, 0.1);
        const double base = penalty_value(b, spec, 25, mixing);
        std::vector<int> q = perm;
        while (std::next_permutation(q.begin(), q.end()))
            CHECK(penalty_value(permute_rows(b, q), spec, 25, permute_entries(mixing, q)) == base);
    }
}

TEST_CASE("group penalties separate over covariates") {
    std::mt19937_64 rng(8);
    const MatrixXd b = random_beta(2, 4, rng);
    const VectorXd mixing = VectorXd::Constant(2, 0.5);
    for (auto f : {PenaltyFamily::mixgl2, PenaltyFamily::mixgl1}) {
        const auto spec = make_spec(f, 0.2);
        double by_column = 0.0;
        for (Eigen::Index l = 0; l < 4; ++l) {
            MatrixXd only = MatrixXd::Zero(2, 4);
            only.col(l) = b.col(l);
            by_column += penalty_value(only, spec, 30, mixing);
        }
        CHECK(penalty_value(b, spec, 30, mixing) == doctest::Approx(by_column));
        MatrixXd dropped = b;
        dropped.col(2).setZero();
        MatrixXd col2 = MatrixXd::Zero(2, 4);
        col2.col(2) = b.col(2);
        CHECK(penalty_value(dropped, spec, 30, mixing) ==
              doctest::Approx(penalty_value(b, spec, 30, mixing) - penalty_value(col2, spec, 30, mixing)));
    }
}

TEST_CASE("mixing factors reproduce the weighted penalty") {
    std::mt19937_64 rng(9);
    const MatrixXd b = random_beta(3, 3, rng);
    const VectorXd mixing = random_mixing(3, rng);
    for (auto f : {PenaltyFamily::mixlasso_l2, PenaltyFamily::mixscad_l2}) {
        const auto spec = make_spec(f, 0.25, 0.05);
        const VectorXd c = mixing_penalty_factors(b, spec);
        CHECK(penalty_value(b, spec, 12, mixing) == doctest::Approx(12 * mixing.dot(c)));
    }
    CHECK(mixing_penalty_factors(b, make_spec(PenaltyFamily::mixgl1, 0.3)).isZero());
}

TEST_CASE("penalty spec config round trip and validation") {
    PenaltySpec spec = make_spec(PenaltyFamily::mixscad_l2, 0.125, 0.01);
    spec.gamma = 2;
    spec.scad_a = 4;
    const PenaltySpec back = PenaltySpec::from_config(spec.to_config());
    CHECK(back.family == spec.family);
    CHECK(back.lambda == spec.lambda);
    CHECK(back.gamma == spec.gamma);
    CHECK(back.ridge_lambda == spec.ridge_lambda);
    CHECK(back.scad_a == spec.scad_a);
    CHECK(parse_penalty_family("mixgl1") == PenaltyFamily::mixgl1);
    CHECK(parse_penalty_family("MIXSCAD-L2") == PenaltyFamily::mixscad_l2);
    CHECK_THROWS_AS(parse_penalty_family("lasso"), InputError);
    PenaltySpec bad = spec;
    bad.lambda = -1;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = spec;
    bad.scad_a = 1.5;
    CHECK_THROWS_AS(bad.validate(), InputError);
    CHECK_THROWS_AS(PenaltySpec::from_config({{"family", "MIXGL1"}, {"alpha", "1"}}), InputError);
}

TEST_CASE("group penalties freeze whole groups, the others single coefficients") {
    MatrixXd beta(2, 3);
    beta << 1.5e-6, 0.4e-6, 0.3,
            0.5e-6, 0.6e-6, 2e-7;
    {
        MatrixXd b = beta;
        ZeroMask mask = ZeroMask::Constant(2, 3, false);
        freeze_small(b, make_spec(PenaltyFamily::mixgl2, 0.1), mask);
        CHECK(b(0, 0) == 1.5e-6);  // group norm above the threshold: left alone
        CHECK(b(1, 0) == 0.5e-6);
        CHECK(b.col(1).isZero(0.0));
        CHECK(mask(0, 1));
        CHECK(mask(1, 1));
        CHECK(b(1, 2) == 2e-7);    // live group keeps its small member
        CHECK_FALSE(mask(1, 2));
    }
    {
        MatrixXd b = beta;
        ZeroMask mask = ZeroMask::Constant(2, 3, false);
        freeze_small(b, make_spec(PenaltyFamily::mixgl1, 0.1), mask);
        CHECK(b(0, 0) == 1.5e-6);
        CHECK(b(1, 0) == 0.0);
        CHECK(b(1, 2) == 0.0);
        CHECK(mask.count() == 4);
    }
    {
        MatrixXd b = beta;
        ZeroMask mask = ZeroMask::Constant(2, 3, false);
        freeze_small(b, make_spec(PenaltyFamily::mixgl1, 0.0), mask);
        CHECK(b == beta);
        CHECK(mask.count() == 0);
    }
}

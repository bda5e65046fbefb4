#include "penmix/penalty.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "penmix/error.hpp"

namespace penmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sums in ascending order so the result does not depend on component order.
template <class Fn>
double sorted_sum(Index count, Fn&& term) {
    std::array<double, 32> small{};
    std::vector<double> large;
    double* values = small.data();
    if (count > static_cast<Index>(small.size())) {
        large.resize(static_cast<std::size_t>(count));
        values = large.data();
    }
    for (Index k = 0; k < count; ++k) values[k] = term(k);
    std::sort(values, values + count);
    double sum = 0.0;
    for (Index k = 0; k < count; ++k) sum += values[k];
    return sum;
}

std::string format_number(double v) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, v);
    return std::string(buffer, end);
}

double parse_number(const std::string& key, const std::string& text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw InputError("invalid number for '" + key + "': '" + text + "'");
    return v;
}

void check_weights(const MatrixXd& beta, const PenaltySpec& spec) {
    if (spec.weights.size() != 0 &&
        (spec.weights.rows() != beta.rows() || spec.weights.cols() != beta.cols())) {
        throw DimensionMismatch("penalty weights do not match the coefficient matrix");
    }
}

} // namespace

std::string_view to_string(PenaltyFamily family) {
    switch (family) {
    case PenaltyFamily::mixgl2: return "MIXGL2";
    case PenaltyFamily::mixgl1: return "MIXGL1";
    case PenaltyFamily::adl: return "ADL";
    case PenaltyFamily::mixlasso_l2: return "MIXLASSO_L2";
    case PenaltyFamily::mixscad_l2: return "MIXSCAD_L2";
    case PenaltyFamily::none: return "NONE";
    }
    return "NONE";
}

PenaltyFamily parse_penalty_family(std::string_view text) {
    std::string s;
    for (char c : text) {
        if (c == '-' || c == ' ') c = '_';
        s += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    for (auto f : {PenaltyFamily::mixgl2, PenaltyFamily::mixgl1, PenaltyFamily::adl,
                   PenaltyFamily::mixlasso_l2, PenaltyFamily::mixscad_l2, PenaltyFamily::none}) {
        if (s == to_string(f)) return f;
    }
    if (s == "MIXLASSO") return PenaltyFamily::mixlasso_l2;
    if (s == "MIXSCAD") return PenaltyFamily::mixscad_l2;
    throw InputError("unknown penalty family '" + std::string(text) + "'");
}

bool is_adaptive(PenaltyFamily family) {
    return family == PenaltyFamily::mixgl2 || family == PenaltyFamily::mixgl1 ||
           family == PenaltyFamily::adl;
}

bool uses_mixing(PenaltyFamily family) {
    return family == PenaltyFamily::mixlasso_l2 || family == PenaltyFamily::mixscad_l2;
}

bool uses_ridge(PenaltyFamily family) { return uses_mixing(family); }

void PenaltySpec::validate() const {
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw InputError("lambda must be >= 0");
    if (!(gamma > 0) || !std::isfinite(gamma)) throw InputError("gamma must be > 0");
    if (!(ridge_lambda >= 0) || !std::isfinite(ridge_lambda)) throw InputError("ridge_lambda must be >= 0");
    if (!(scad_a > 2) || !std::isfinite(scad_a)) throw InputError("scad_a must be > 2");
    if (family == PenaltyFamily::none && lambda != 0) throw InputError("NONE penalty requires lambda = 0");
    if (weights.size() && (!weights.allFinite() || (weights.array() < 0).any()))
        throw InputError("penalty weights must be finite and nonnegative");
}

std::map<std::string, std::string> PenaltySpec::to_config() const {
    return {{"family", std::string(to_string(family))},
            {"lambda", format_number(lambda)},
            {"gamma", format_number(gamma)},
            {"ridge_lambda", format_number(ridge_lambda)},
            {"scad_a", format_number(scad_a)}};
}

PenaltySpec PenaltySpec::from_config(const std::map<std::string, std::string>& kv) {
    PenaltySpec spec;
    for (const auto& [key, value] : kv) {
        if (key == "family") spec.family = parse_penalty_family(value);
        else if (key == "lambda") spec.lambda = parse_number(key, value);
        else if (key == "gamma") spec.gamma = parse_number(key, value);
        else if (key == "ridge_lambda") spec.ridge_lambda = parse_number(key, value);
        else if (key == "scad_a") spec.scad_a = parse_number(key, value);
        else throw InputError("unknown penalty key '" + key + "'");
    }
    if (spec.family == PenaltyFamily::none) spec.lambda = 0.0;
    spec.validate();
    return spec;
}

MatrixXd adaptive_weights(const MatrixXd& unpenalized_beta, PenaltyFamily family, double gamma) {
    if (!(gamma > 0)) throw InputError("gamma must be > 0");
    const Index K = unpenalized_beta.rows();
    const Index p = unpenalized_beta.cols();
    auto capped = [](double w) { return (std::isfinite(w) && w < kWeightCap) ? w : kWeightCap; };
    MatrixXd w = MatrixXd::Ones(K, p);
    switch (family) {
    case PenaltyFamily::mixgl2:
        for (Index l = 0; l < p; ++l) {
            const double sq = unpenalized_beta.col(l).squaredNorm();
            w.col(l).setConstant(sq > 0 ? capped(std::pow(sq, -gamma / 2.0)) : kWeightCap);
        }
        break;
    case PenaltyFamily::mixgl1:
    case PenaltyFamily::adl:
        for (Index l = 0; l < p; ++l)
            for (Index k = 0; k < K; ++k) {
                const double b = std::abs(unpenalized_beta(k, l));
                w(k, l) = b > 0 ? capped(std::pow(b, -gamma)) : kWeightCap;
            }
        break;
    default:
        break;
    }
    return w;
}

double scad_value(double t, double lambda, double a) {
    t = std::abs(t);
    if (t <= lambda) return lambda * t;
    if (t <= a * lambda) return (2.0 * a * lambda * t - t * t - lambda * lambda) / (2.0 * (a - 1.0));
    return lambda * lambda * (a + 1.0) / 2.0;
}

double scad_derivative(double t, double lambda, double a) {
    t = std::abs(t);
    if (t <= lambda) return lambda;
    return std::max(a * lambda - t, 0.0) / (a - 1.0);
}

VectorXd mixing_penalty_factors(const MatrixXd& beta, const PenaltySpec& spec) {
    const Index K = beta.rows();
    VectorXd c = VectorXd::Zero(K);
    if (!uses_mixing(spec.family)) return c;
    for (Index k = 0; k < K; ++k) {
        double sparse = 0.0;
        for (Index l = 0; l < beta.cols(); ++l) {
            const double b = beta(k, l);
            sparse += spec.family == PenaltyFamily::mixlasso_l2 ? spec.lambda * std::abs(b)
                                                                : scad_value(b, spec.lambda, spec.scad_a);
        }
        c(k) = sparse + spec.ridge_lambda * beta.row(k).squaredNorm();
    }
    return c;
}

double penalty_value(const MatrixXd& beta, const PenaltySpec& spec, Index n, const VectorXd& mixing) {
    check_weights(beta, spec);
    const Index K = beta.rows();
    const Index p = beta.cols();
    const double scale = static_cast<double>(n) * spec.lambda;
    switch (spec.family) {
    case PenaltyFamily::none:
        return 0.0;
    case PenaltyFamily::mixgl2: {
        double total = 0.0;
        for (Index l = 0; l < p; ++l) {
            const double sq = sorted_sum(K, [&](Index k) { return beta(k, l) * beta(k, l); });
            total += spec.weight(0, l) * std::sqrt(sq);
        }
        return scale * total;
    }
    case PenaltyFamily::mixgl1: {
        double total = 0.0;
        for (Index l = 0; l < p; ++l)
            total += std::sqrt(sorted_sum(K, [&](Index k) { return spec.weight(k, l) * std::abs(beta(k, l)); }));
        return scale * total;
    }
    case PenaltyFamily::adl: {
        double total = 0.0;
        for (Index l = 0; l < p; ++l)
            total += sorted_sum(K, [&](Index k) { return spec.weight(k, l) * std::abs(beta(k, l)); });
        return scale * total;
    }
    case PenaltyFamily::mixlasso_l2:
    case PenaltyFamily::mixscad_l2: {
        if (mixing.size() != K) throw DimensionMismatch("mixing length differs from component count");
        const VectorXd c = mixing_penalty_factors(beta, spec);
        return static_cast<double>(n) * sorted_sum(K, [&](Index k) { return mixing(k) * c(k); });
    }
    }
    return 0.0;
}

void freeze_small(MatrixXd& beta, const PenaltySpec& spec, ZeroMask& zero_mask) {
    if (spec.family == PenaltyFamily::none || !(spec.lambda > 0)) return;
    const Index K = beta.rows();
    const Index p = beta.cols();
    if (zero_mask.rows() != K || zero_mask.cols() != p) throw DimensionMismatch("zero mask does not match beta");
    for (Index l = 0; l < p; ++l) {
        if (spec.family == PenaltyFamily::mixgl2) {
            double sq = 0.0;
            for (Index k = 0; k < K; ++k)
                if (!zero_mask(k, l)) sq += beta(k, l) * beta(k, l);
            if (std::sqrt(sq) < kZeroThreshold)
                for (Index k = 0; k < K; ++k) {
                    beta(k, l) = 0.0;
                    zero_mask(k, l) = true;
                }
            continue;
        }
        for (Index k = 0; k < K; ++k)
            if (std::abs(beta(k, l)) < kZeroThreshold) {
                beta(k, l) = 0.0;
                zero_mask(k, l) = true;
            }
    }
}

MatrixXd lqa_coefficients(const MatrixXd& beta_current, const PenaltySpec& spec, Index n,
                          const VectorXd& mixing, ZeroMask& zero_mask) {
    check_weights(beta_current, spec);
    const Index K = beta_current.rows();
    const Index p = beta_current.cols();
    if (zero_mask.rows() != K || zero_mask.cols() != p) {
        if (zero_mask.size() != 0) throw DimensionMismatch("zero mask does not match beta");
        zero_mask = ZeroMask::Constant(K, p, false);
    }
    MatrixXd d = MatrixXd::Zero(K, p);
    const double nn = static_cast<double>(n);
    const bool ridge_family = uses_mixing(spec.family);
    if (ridge_family && mixing.size() != K) throw DimensionMismatch("mixing length differs from component count");

    // Only a sparsity-inducing term freezes coefficients.
    const bool sparse_active = spec.family != PenaltyFamily::none && spec.lambda > 0;
    if (!sparse_active) {
        if (ridge_family)
            for (Index k = 0; k < K; ++k) d.row(k).setConstant(2.0 * nn * mixing(k) * spec.ridge_lambda);
        for (Index k = 0; k < K; ++k)
            for (Index l = 0; l < p; ++l)
                if (zero_mask(k, l)) d(k, l) = kInf;
        return d;
    }

    MatrixXd screened = beta_current;
    freeze_small(screened, spec, zero_mask);

    const double scale = nn * spec.lambda;
    for (Index l = 0; l < p; ++l) {
        switch (spec.family) {
        case PenaltyFamily::mixgl2: {
            double sq = 0.0;
            for (Index k = 0; k < K; ++k)
                if (!zero_mask(k, l)) sq += beta_current(k, l) * beta_current(k, l);
            const double norm = std::sqrt(sq);
            if (!(norm >= kZeroThreshold)) {
                for (Index k = 0; k < K; ++k) zero_mask(k, l) = true;
                break;
            }
            for (Index k = 0; k < K; ++k)
                if (!zero_mask(k, l)) d(k, l) = scale * spec.weight(k, l) / norm;
            break;
        }
        case PenaltyFamily::mixgl1: {
            double inner = 0.0;
            for (Index k = 0; k < K; ++k)
                if (!zero_mask(k, l)) inner += spec.weight(k, l) * std::abs(beta_current(k, l));
            if (!(inner > 0)) {
                for (Index k = 0; k < K; ++k) zero_mask(k, l) = true;
                break;
            }
            const double root = std::sqrt(inner);
            for (Index k = 0; k < K; ++k)
                if (!zero_mask(k, l))
                    d(k, l) = scale * spec.weight(k, l) / (2.0 * root * std::abs(beta_current(k, l)));
            break;
        }
        case PenaltyFamily::adl:
            for (Index k = 0; k < K; ++k)
                if (!zero_mask(k, l)) d(k, l) = scale * spec.weight(k, l) / std::abs(beta_current(k, l));
            break;
        case PenaltyFamily::mixlasso_l2:
            for (Index k = 0; k < K; ++k)
                if (!zero_mask(k, l))
                    d(k, l) = nn * mixing(k) * (spec.lambda / std::abs(beta_current(k, l)) + 2.0 * spec.ridge_lambda);
            break;
        case PenaltyFamily::mixscad_l2:
            for (Index k = 0; k < K; ++k) {
                if (zero_mask(k, l)) continue;
                const double t = std::abs(beta_current(k, l));
                d(k, l) = nn * mixing(k) *
                          (scad_derivative(t, spec.lambda, spec.scad_a) / t + 2.0 * spec.ridge_lambda);
            }
            break;
        case PenaltyFamily::none:
            break;
        }
    }
    for (Index k = 0; k < K; ++k)
        for (Index l = 0; l < p; ++l)
            if (zero_mask(k, l)) d(k, l) = kInf;
    return d;
}

} // namespace penmix

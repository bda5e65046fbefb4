#include "penmix/family.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "penmix/error.hpp"

namespace penmix {

ResponseFamily ResponseFamily::binomial(int trial_size) {
    if (trial_size < 1) throw InputError("binomial trial size must be >= 1");
    if (trial_size == 1) return bernoulli();
    return {FamilyKind::binomial, trial_size};
}

ResponseFamily ResponseFamily::parse(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "gaussian") return gaussian();
    if (s == "bernoulli") return bernoulli();
    if (s.rfind("binomial", 0) == 0) {
        auto colon = s.find(':');
        if (colon == std::string::npos) throw InputError("binomial family needs a trial size: binomial:<m>");
        try {
            return binomial(std::stoi(s.substr(colon + 1)));
        } catch (const std::logic_error&) {
            throw InputError("invalid binomial trial size in '" + std::string(text) + "'");
        }
    }
    throw InputError("unknown response family '" + std::string(text) + "'");
}

std::string ResponseFamily::to_string() const {
    switch (kind) {
    case FamilyKind::gaussian: return "gaussian";
    case FamilyKind::bernoulli: return "bernoulli";
    case FamilyKind::binomial: return "binomial:" + std::to_string(trial_size);
    }
    return "unknown";
}

double ResponseFamily::mean(double eta) const {
    if (kind == FamilyKind::gaussian) return eta;
    return trial_size * logistic(std::clamp(eta, -kEtaClamp, kEtaClamp));
}

void ResponseFamily::check_response(double y) const {
    if (!std::isfinite(y)) throw InvalidResponse("response is not finite");
    if (kind == FamilyKind::gaussian) return;
    if (y < 0 || y > trial_size || std::floor(y) != y) {
        throw InvalidResponse("response " + std::to_string(y) + " outside support 0.." +
                              std::to_string(trial_size));
    }
}

double softplus(double x) noexcept {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double x) noexcept {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double component_log_density(double y, double eta, const ResponseFamily& family, double phi) {
    if (!std::isfinite(eta)) throw InputError("linear predictor is not finite");
    if (!(phi > 0)) throw InputError("dispersion must be positive");
    family.check_response(y);
    eta = std::clamp(eta, -kEtaClamp, kEtaClamp);
    if (family.kind == FamilyKind::gaussian) {
        const double r = y - eta;
        return -0.5 * std::log(2.0 * std::numbers::pi * phi) - r * r / (2.0 * phi);
    }
    const double m = family.trial_size;
    const double log_choose = std::lgamma(m + 1) - std::lgamma(y + 1) - std::lgamma(m - y + 1);
    return log_choose + y * eta - m * softplus(eta);
}

double log_density_eta_derivative(double y, double eta, const ResponseFamily& family, double phi) {
    if (family.kind == FamilyKind::gaussian) return (y - eta) / phi;
    eta = std::clamp(eta, -kEtaClamp, kEtaClamp);
    return y - family.trial_size * logistic(eta);
}

} // namespace penmix

#pragma once

#include <string>
#include <string_view>

namespace penmix {

enum class FamilyKind { binomial, bernoulli, gaussian };

/// Exponential-family response distribution with its canonical link
/// (logit for binomial/bernoulli, identity for gaussian).
struct ResponseFamily {
    FamilyKind kind = FamilyKind::gaussian;
    int trial_size = 1;

    static ResponseFamily binomial(int trial_size);
    static ResponseFamily bernoulli() { return {FamilyKind::bernoulli, 1}; }
    static ResponseFamily gaussian() { return {FamilyKind::gaussian, 1}; }

    /// Parses "gaussian", "bernoulli" or "binomial:<m>".
    static ResponseFamily parse(std::string_view text);
    std::string to_string() const;

    bool is_binomial() const noexcept { return kind != FamilyKind::gaussian; }
    bool has_dispersion() const noexcept { return kind == FamilyKind::gaussian; }

    double mean(double eta) const;
    /// Throws InvalidResponse when y is outside the support.
    void check_response(double y) const;

    friend bool operator==(const ResponseFamily&, const ResponseFamily&) = default;
};

inline constexpr double kEtaClamp = 700.0;

/// Numerically stable log(1 + exp(x)).
double softplus(double x) noexcept;
double logistic(double x) noexcept;

/// log f(y; mu = g^{-1}(eta), phi). The binomial form includes the
/// combinatorial constant so the pmf sums to one over 0..m.
double component_log_density(double y, double eta, const ResponseFamily& family, double phi);

/// d log f / d eta.
double log_density_eta_derivative(double y, double eta, const ResponseFamily& family, double phi);

} // namespace penmix

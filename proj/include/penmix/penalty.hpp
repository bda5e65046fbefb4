#pragma once

#include <map>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace penmix {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class PenaltyFamily { mixgl2, mixgl1, adl, mixlasso_l2, mixscad_l2, none };

/// Coefficients frozen at exactly zero, K x p.
using ZeroMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Cap applied to adaptive weights whose unpenalized estimate is (near) zero.
inline constexpr double kWeightCap = 1e8;
/// Coefficients whose magnitude drops below this are frozen at zero.
inline constexpr double kZeroThreshold = 1e-6;
inline constexpr double kDefaultScadA = 3.7;

std::string_view to_string(PenaltyFamily family);
/// Accepts the canonical names (case-insensitive, '-' or '_' separators).
PenaltyFamily parse_penalty_family(std::string_view text);

bool is_adaptive(PenaltyFamily family);
/// True for the per-component comparators that scale by the mixing weights.
bool uses_mixing(PenaltyFamily family);
/// True when the second tuning parameter is ridge_lambda instead of gamma.
bool uses_ridge(PenaltyFamily family);

struct PenaltySpec {
    PenaltyFamily family = PenaltyFamily::none;
    double lambda = 0.0;
    double gamma = 1.0;
    double ridge_lambda = 0.0;
    double scad_a = kDefaultScadA;
    /// K x p adaptive weights. For MIXGL2 every row holds the per-covariate
    /// weight. Empty means all ones.
    MatrixXd weights;

    static PenaltySpec none() { return {}; }

    /// Throws InputError on invalid values; forces lambda to 0 for NONE.
    void validate() const;

    double weight(Index k, Index l) const { return weights.size() == 0 ? 1.0 : weights(k, l); }

    /// Flat key/value view (family, lambda, gamma, ridge_lambda, scad_a).
    /// Weights are not part of the config; they are rebuilt from data.
    std::map<std::string, std::string> to_config() const;
    static PenaltySpec from_config(const std::map<std::string, std::string>& kv);
};

/// Adaptive weights from the unpenalized estimates: (sum_k b_kl^2)^(-gamma/2)
/// per covariate for MIXGL2, |b_kl|^(-gamma) per coefficient for MIXGL1 and
/// ADL, ones otherwise. Every weight is capped at kWeightCap.
MatrixXd adaptive_weights(const MatrixXd& unpenalized_beta, PenaltyFamily family, double gamma);

/// SCAD penalty value and derivative in |b|.
double scad_value(double t, double lambda, double a);
double scad_derivative(double t, double lambda, double a);

/// Total penalty subtracted from the log-likelihood.
double penalty_value(const MatrixXd& beta, const PenaltySpec& spec, Index n, const VectorXd& mixing);

/// Per-component factor c_k with penalty = n * sum_k pi_k c_k, for the
/// families where uses_mixing() holds. Zero vector otherwise.
VectorXd mixing_penalty_factors(const MatrixXd& beta, const PenaltySpec& spec);

/// Local quadratic approximation at beta_current: returns d with
/// penalty(b) <= penalty(beta_current) + 1/2 sum d_kl (b_kl^2 - beta_current_kl^2)
/// near the current point. Coefficients already in `zero_mask`, or below
/// kZeroThreshold (see freeze_small), get +inf and are added to the mask.
MatrixXd lqa_coefficients(const MatrixXd& beta_current, const PenaltySpec& spec, Index n,
                          const VectorXd& mixing, ZeroMask& zero_mask);

/// Sets coefficients below kZeroThreshold to exactly zero and marks them in
/// `zero_mask`. MIXGL2 thresholds the norm of each covariate's group and
/// freezes whole groups: dropping a single member of a live group is not
/// objective-neutral under a group norm. No-op unless lambda > 0.
void freeze_small(MatrixXd& beta, const PenaltySpec& spec, ZeroMask& zero_mask);

} // namespace penmix

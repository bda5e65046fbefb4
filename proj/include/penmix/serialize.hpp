#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "penmix/csv.hpp"
#include "penmix/sam.hpp"
#include "penmix/selection.hpp"
#include "penmix/simbench.hpp"
#include "penmix/solver.hpp"

namespace penmix {

nlohmann::json to_json(const FitResult& fit, const Dataset& data, const PenaltySpec& spec);
nlohmann::json to_json(const SamFitResult& fit, const SamDataset& data, const PenaltySpec& spec);

/// component, covariate, estimate, is_zero. Each component contributes an
/// "(Intercept)" row followed by one row per covariate.
CsvTable coefficient_table(const FitResult& fit, const Dataset& data);

/// archetype, term, estimate, is_zero over the archetype slopes.
CsvTable archetype_coefficient_table(const SamFitResult& fit, const SamDataset& data);

/// site, eta_1 .. eta_K.
CsvTable linear_predictor_table(const MatrixXd& eta, const std::vector<std::string>& site_ids);

/// lambda, gamma, ridge_lambda, K, loglik, n_nonzero, bic, converged, failed.
CsvTable bic_table(const std::vector<TuningCell>& cells);
CsvTable component_bic_table(const std::vector<ComponentRow>& rows);

/// replicate, model, n, pi1, method, sensitivity, specificity, pred_loglik_centered, ...
CsvTable replicate_table(const std::vector<ReplicateResult>& results);
CsvTable summary_table(const std::vector<SummaryRow>& rows);

} // namespace penmix

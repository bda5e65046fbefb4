#include "penmix/serialize.hpp"

namespace penmix {

namespace {

using nlohmann::json;

json matrix_json(const MatrixXd& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json spec_json(const PenaltySpec& spec) {
    json j;
    for (const auto& [key, value] : spec.to_config()) j[key] = value;
    return j;
}

template <class Result>
void common_fields(json& j, const Result& fit) {
    j["loglik"] = fit.loglik;
    j["penalized_objective"] = fit.penalized_objective;
    j["n_nonzero"] = fit.n_nonzero;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["start_index"] = fit.start_index;
    j["objective_trace"] = fit.objective_trace;
    j["warnings"] = fit.warnings;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

} // namespace

nlohmann::json to_json(const FitResult& fit, const Dataset& data, const PenaltySpec& spec) {
    json j;
    j["model"] = "fmr";
    j["family"] = data.family.to_string();
    j["penalty"] = spec_json(spec);
    j["n"] = data.n();
    j["covariates"] = data.column_names;
    j["K"] = fit.params.n_components();
    j["beta"] = matrix_json(fit.params.beta);
    j["intercepts"] = vector_json(fit.params.intercepts);
    j["dispersions"] = vector_json(fit.params.dispersions);
    j["mixing"] = vector_json(fit.params.mixing);
    common_fields(j, fit);
    return j;
}

nlohmann::json to_json(const SamFitResult& fit, const SamDataset& data, const PenaltySpec& spec) {
    json j;
    j["model"] = "sam";
    j["penalty"] = spec_json(spec);
    j["n_sites"] = data.n_sites();
    j["species"] = data.species_names;
    j["covariates"] = data.covariate_names;
    j["K"] = fit.params.n_components();
    j["beta"] = matrix_json(fit.params.beta);
    j["species_intercepts"] = vector_json(fit.params.species_intercepts);
    j["mixing"] = vector_json(fit.params.mixing);
    j["responsibilities"] = matrix_json(fit.responsibilities);
    common_fields(j, fit);
    return j;
}

CsvTable coefficient_table(const FitResult& fit, const Dataset& data) {
    CsvTable t;
    t.header = {"component", "covariate", "estimate", "is_zero"};
    const auto& p = fit.params;
    for (Index k = 0; k < p.n_components(); ++k) {
        const std::string comp = std::to_string(k + 1);
        t.rows.push_back({comp, "(Intercept)", format_double(p.intercepts(k)), "false"});
        for (Index l = 0; l < p.n_covariates(); ++l)
            t.rows.push_back({comp, data.column_names[static_cast<std::size_t>(l)], format_double(p.beta(k, l)),
                              bool_text(p.beta(k, l) == 0.0)});
    }
    return t;
}

CsvTable archetype_coefficient_table(const SamFitResult& fit, const SamDataset& data) {
    CsvTable t;
    t.header = {"archetype", "term", "estimate", "is_zero"};
    const auto& p = fit.params;
    for (Index k = 0; k < p.n_components(); ++k)
        for (Index l = 0; l < p.n_covariates(); ++l)
            t.rows.push_back({std::to_string(k + 1), data.covariate_names[static_cast<std::size_t>(l)],
                              format_double(p.beta(k, l)), bool_text(p.beta(k, l) == 0.0)});
    return t;
}

CsvTable linear_predictor_table(const MatrixXd& eta, const std::vector<std::string>& site_ids) {
    CsvTable t;
    t.header = {"site"};
    for (Index k = 0; k < eta.cols(); ++k) t.header.push_back("eta_" + std::to_string(k + 1));
    for (Index i = 0; i < eta.rows(); ++i) {
        std::vector<std::string> row;
        row.push_back(static_cast<std::size_t>(i) < site_ids.size() ? site_ids[static_cast<std::size_t>(i)]
                                                                    : std::to_string(i + 1));
        for (Index k = 0; k < eta.cols(); ++k) row.push_back(format_double(eta(i, k)));
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable bic_table(const std::vector<TuningCell>& cells) {
    CsvTable t;
    t.header = {"lambda", "gamma", "ridge_lambda", "K", "loglik", "n_nonzero", "bic", "converged", "failed"};
    for (const auto& c : cells)
        t.rows.push_back({format_double(c.lambda), format_double(c.gamma), format_double(c.ridge_lambda),
                          std::to_string(c.K), format_double(c.loglik), std::to_string(c.n_nonzero),
                          format_double(c.bic), bool_text(c.converged), bool_text(c.failed)});
    return t;
}

CsvTable component_bic_table(const std::vector<ComponentRow>& rows) {
    CsvTable t;
    t.header = {"K", "loglik", "dimension", "bic", "failed"};
    for (const auto& r : rows)
        t.rows.push_back({std::to_string(r.K), format_double(r.loglik), std::to_string(r.dimension),
                          format_double(r.bic), bool_text(r.failed)});
    return t;
}

CsvTable replicate_table(const std::vector<ReplicateResult>& results) {
    CsvTable t;
    t.header = {"replicate", "model", "n", "pi1", "method", "failed", "sensitivity", "specificity",
                "pred_loglik", "pred_loglik_centered", "lambda", "gamma", "ridge_lambda", "n_nonzero"};
    for (const auto& rep : results)
        for (const auto& m : rep.methods)
            t.rows.push_back({std::to_string(rep.replicate), std::string(to_string(rep.scenario.model)),
                              std::to_string(rep.scenario.n), format_double(rep.scenario.pi1),
                              std::string(to_string(m.method)), bool_text(m.failed), format_double(m.sensitivity),
                              format_double(m.specificity), format_double(m.pred_loglik),
                              format_double(m.pred_loglik_centered), format_double(m.lambda),
                              format_double(m.gamma), format_double(m.ridge_lambda), std::to_string(m.n_nonzero)});
    return t;
}

CsvTable summary_table(const std::vector<SummaryRow>& rows) {
    CsvTable t;
    t.header = {"model", "n", "pi1", "method", "replicates", "failed", "mean_sensitivity", "mean_specificity",
                "mean_pred_loglik_centered"};
    for (const auto& r : rows)
        t.rows.push_back({std::string(to_string(r.model)), std::to_string(r.n), format_double(r.pi1),
                          std::string(to_string(r.method)), std::to_string(r.replicates), std::to_string(r.failed),
                          format_double(r.mean_sensitivity), format_double(r.mean_specificity),
                          format_double(r.mean_pred_loglik_centered)});
    return t;
}

} // namespace penmix

#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "penmix/csv.hpp"
#include "penmix/error.hpp"
#include "penmix/serialize.hpp"
#include "penmix/simbench.hpp"

namespace penmix::cli {

namespace fs = std::filesystem;

namespace {

fs::path prepare_out(const CommonOptions& o) {
    fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + o.out + "': " + ec.message());
    return dir;
}

std::vector<std::string> split_list(const std::string& text) {
    std::string body = text;
    if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(body);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto b = item.find_first_not_of(" \"'");
        const auto e = item.find_last_not_of(" \"'");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

bool is_flag(const CLI::Option* opt) { return opt->get_expected_min() == 0; }
bool is_list(const CLI::Option* opt) { return opt->get_expected_max() > 1; }

std::string toml_value(const std::string& s) {
    if (!s.empty() && s.find_first_not_of("0123456789.eE+-") == std::string::npos) return s;
    return "\"" + s + "\"";
}

// Every option of the command with its resolved value, in the same flat
// format --config reads.
void write_manifest(const fs::path& dir, const CLI::App& app) {
    std::ofstream out(dir / "manifest.toml");
    if (!out) throw InputError("cannot write manifest in '" + dir.string() + "'");
    out << "# penmix " << PENMIX_VERSION << "\n# command: " << app.get_name() << "\n";
    for (const CLI::Option* opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config") continue;
        if (is_flag(opt)) {
            out << name << " = " << (opt->as<bool>() ? "true" : "false") << "\n";
            continue;
        }
        std::vector<std::string> values = opt->count() > 0 ? opt->results() : split_list(opt->get_default_str());
        if (!is_list(opt)) {
            out << name << " = " << toml_value(values.empty() ? std::string() : values.back()) << "\n";
            continue;
        }
        out << name << " = [";
        for (std::size_t i = 0; i < values.size(); ++i) out << (i ? ", " : "") << toml_value(values[i]);
        out << "]\n";
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

TuningGrid grid_for(const TuningOptions& o, bool paper_scale, BicCount count) {
    TuningOptions t = o;
    if (paper_scale) t.n_lambdas = 50;
    auto grid = make_grid(t, count);
    if (auto spec = fixed_spec(o)) {
        grid.lambdas = {spec->lambda};
        grid.gammas = {spec->gamma};
        grid.ridge_lambdas = {spec->ridge_lambda};
    }
    return grid;
}

// Squared terms are built on the standardized scale; their statistics are
// recorded as identity so the stored stats stay aligned with the columns.
template <class Data>
void append_quadratic(Data& data, std::vector<std::string>& names) {
    const Index p = data.X.cols();
    data.X = add_quadratic_terms(data.X, &names);
    data.stats.mean.conservativeResize(2 * p);
    data.stats.sd.conservativeResize(2 * p);
    data.stats.mean.tail(p).setZero();
    data.stats.sd.tail(p).setOnes();
}

std::map<std::string, std::size_t> site_index(const CsvTable& t, Index site_col, const std::string& file) {
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        if (!index.emplace(t.rows[r][static_cast<std::size_t>(site_col)], r).second)
            throw InputError("duplicate site id '" + t.rows[r][static_cast<std::size_t>(site_col)] + "' in " + file);
    return index;
}

SamDataset load_sam(const std::string& presence_path, const std::string& covariate_path,
                    const std::string& site_column, bool quadratic) {
    const CsvTable presence = read_csv(fs::path(presence_path));
    const CsvTable covariates = read_csv(fs::path(covariate_path));
    const Index ps = presence.require_column(site_column);
    const Index cs = covariates.require_column(site_column);
    const auto cov_rows = site_index(covariates, cs, covariate_path);
    site_index(presence, ps, presence_path);
    if (cov_rows.size() != presence.rows.size())
        throw InputError("presence and covariate files list different numbers of sites");

    std::vector<std::string> species, names, sites;
    for (std::size_t j = 0; j < presence.header.size(); ++j)
        if (static_cast<Index>(j) != ps) species.push_back(presence.header[j]);
    for (std::size_t j = 0; j < covariates.header.size(); ++j)
        if (static_cast<Index>(j) != cs) names.push_back(covariates.header[j]);

    const auto n = static_cast<Index>(presence.rows.size());
    MatrixXd Y(n, static_cast<Index>(species.size()));
    MatrixXd X(n, static_cast<Index>(names.size()));
    for (Index i = 0; i < n; ++i) {
        const auto& row = presence.rows[static_cast<std::size_t>(i)];
        const std::string& id = row[static_cast<std::size_t>(ps)];
        const auto it = cov_rows.find(id);
        if (it == cov_rows.end()) throw InputError("site '" + id + "' has no covariate row");
        sites.push_back(id);
        Index c = 0;
        for (std::size_t j = 0; j < row.size(); ++j)
            if (static_cast<Index>(j) != ps) Y(i, c++) = parse_cell(row[j], static_cast<std::size_t>(i) + 1, presence.header[j]);
        const auto& crow = covariates.rows[it->second];
        c = 0;
        for (std::size_t j = 0; j < crow.size(); ++j)
            if (static_cast<Index>(j) != cs) X(i, c++) = parse_cell(crow[j], it->second + 1, covariates.header[j]);
    }
    SamDataset data = make_sam_dataset(Y, X, species, sites, names);
    if (quadratic) append_quadratic(data, data.covariate_names);
    return data;
}

void write_tuning_outputs(const fs::path& dir, const std::vector<TuningCell>& table) {
    write_csv(dir / "bic_tuning.csv", bic_table(table));
}

} // namespace

int effective_replicates(const SimulateOptions& o) { return o.common.paper_scale ? 500 : o.replicates; }

int effective_restarts(const StabilityOptions& o) { return o.common.paper_scale ? 50 : o.n_restarts; }

int cmd_fit(const FitOptions& o, const CLI::App& app) {
    const auto family = ResponseFamily::parse(o.response_family);
    Dataset data = dataset_from_csv(read_csv(fs::path(o.data)), o.response, family);
    if (o.quadratic) append_quadratic(data, data.column_names);
    const PenaltyFamily penalty = parse_penalty_family(o.tuning.family);
    const auto grid = grid_for(o.tuning, o.common.paper_scale, BicCount::observations);
    const auto control = make_control(o.control, o.common.seed);

    const auto dir = prepare_out(o.common);
    write_manifest(dir, app);
    const auto outcome = select_tuning(data, o.K, penalty, grid, control);
    write_json(dir / "fit.json", to_json(outcome.fit, data, outcome.spec));
    write_csv(dir / "coefficients.csv", coefficient_table(outcome.fit, data));
    write_tuning_outputs(dir, outcome.table);
    return 0;
}

int cmd_sam(const SamOptions& o, const CLI::App& app) {
    if (o.k_min > o.k_max) throw InputError("k_min exceeds k_max");
    const SamDataset data = load_sam(o.presence, o.covariates, o.site_column, o.quadratic);
    const PenaltyFamily penalty = parse_penalty_family(o.tuning.family);
    const auto grid = grid_for(o.tuning, o.common.paper_scale, parse_bic_count(o.bic_count));
    const auto control = make_control(o.control, o.common.seed);

    const auto dir = prepare_out(o.common);
    write_manifest(dir, app);
    const auto selection = select_num_components(data, o.k_min, o.k_max, penalty, grid, control, o.common.jobs);
    write_csv(dir / "bic_k.csv", component_bic_table(selection.table));
    const auto& best = selection.per_K[static_cast<std::size_t>(selection.best_K - o.k_min)];
    if (!best) throw AllStartsFailed("no component count produced a fit");
    write_json(dir / "fit.json", to_json(best->fit, data, best->spec));
    write_csv(dir / "archetype_coefficients.csv", archetype_coefficient_table(best->fit, data));
    write_csv(dir / "linear_predictor.csv",
              linear_predictor_table(archetype_linear_predictor(best->fit, data.X), data.site_ids));
    write_tuning_outputs(dir, best->table);
    return 0;
}

int cmd_simulate(const SimulateOptions& o, const CLI::App& app) {
    CampaignOptions options;
    options.methods.clear();
    for (const auto& m : o.methods) options.methods.push_back(parse_penalty_family(m));
    options.grid = grid_for(o.tuning, o.common.paper_scale, BicCount::observations);
    options.control = make_control(o.control, o.common.seed);
    options.n_test = o.common.paper_scale ? 10000 : o.n_test;
    options.jobs = o.common.jobs;
    const int replicates = effective_replicates(o);

    std::vector<SimScenario> cells;
    for (const auto& model : o.models)
        for (long n : o.sizes)
            for (double pi1 : o.pi1) {
                SimScenario s;
                s.model = parse_sim_model(model);
                s.n = n;
                s.pi1 = pi1;
                s.seed = o.common.seed;
                sim_covariate_count(n);
                cells.push_back(s);
            }
    if (cells.empty()) throw InputError("empty scenario list");

    const auto dir = prepare_out(o.common);
    write_manifest(dir, app);
    const auto results = run_campaign(cells, replicates, options);
    for (const auto& rep : results)
        for (const auto& m : rep.methods)
            if (m.failed)
                std::cerr << "warning: " << to_string(m.method) << " failed on model " << to_string(rep.scenario.model)
                          << ", n=" << rep.scenario.n << ", replicate " << rep.replicate << "\n";
    write_csv(dir / "replicates.csv", replicate_table(results));
    write_csv(dir / "summary.csv", summary_table(summarize(results)));
    return 0;
}

int cmd_stability(const StabilityOptions& o, const CLI::App& app) {
    const int restarts = effective_restarts(o);
    if (restarts < 2) throw InputError("n_restarts must be at least 2 to estimate a variance");
    SamDataset data;
    if (!o.presence.empty()) {
        data = load_sam(o.presence, o.covariates, o.site_column, false);
    } else {
        SamScenario sc;
        sc.n_sites = o.sites;
        sc.n_species = o.species;
        sc.n_covariates = o.n_covariates;
        sc.n_archetypes = o.archetypes;
        sc.seed = o.data_seed;
        data = generate_sam_dataset(sc).data;
    }
    const auto control = make_control(o.control, o.common.seed);
    const auto dir = prepare_out(o.common);
    write_manifest(dir, app);

    PenaltySpec penalized;
    if (auto spec = fixed_spec(o.tuning)) {
        penalized = *spec;
        if (is_adaptive(penalized.family)) {
            const auto unpen = sam_fit(data, o.K, PenaltySpec::none(), control);
            penalized.weights = adaptive_weights(unpen.params.beta, penalized.family, penalized.gamma);
        }
    } else {
        const auto grid = make_grid(o.tuning, BicCount::species);
        const auto tuned = select_tuning(data, o.K, parse_penalty_family(o.tuning.family), grid, control);
        penalized = tuned.spec;
        write_tuning_outputs(dir, tuned.table);
    }
    PenaltySpec baseline = PenaltySpec::none();
    const PenaltyFamily base_family = parse_penalty_family(o.baseline);
    if (base_family != PenaltyFamily::none) {
        baseline = penalized;
        baseline.family = base_family;
    }

    const auto report = stability_experiment(data, o.K, penalized, baseline, restarts,
                                             derive_seed(o.common.seed, 17), control, o.common.jobs);
    CsvTable samples;
    samples.header = {"penalty", "restart", "loglik"};
    for (std::size_t r = 0; r < report.penalized_loglik.size(); ++r)
        samples.rows.push_back({std::string(to_string(penalized.family)), std::to_string(r + 1),
                                format_double(report.penalized_loglik[r])});
    for (std::size_t r = 0; r < report.unpenalized_loglik.size(); ++r)
        samples.rows.push_back({std::string(to_string(baseline.family)), std::to_string(r + 1),
                                format_double(report.unpenalized_loglik[r])});
    write_csv(dir / "restarts.csv", samples);

    nlohmann::json j;
    for (const auto& [key, value] : penalized.to_config()) j["penalized"][key] = value;
    for (const auto& [key, value] : baseline.to_config()) j["baseline"][key] = value;
    j["n_restarts"] = restarts;
    j["penalized_failures"] = report.penalized_failures;
    j["baseline_failures"] = report.unpenalized_failures;
    j["penalized_variance"] = report.penalized_variance;
    j["baseline_variance"] = report.unpenalized_variance;
    j["variance_ratio"] = report.variance_ratio;
    j["f_test_p_value"] = report.f_p_value;
    write_json(dir / "stability.json", j);
    return 0;
}

struct Cli {
    CLI::App app{"Penalized mixtures of regressions and species archetype models", "penmix"};
    FitOptions fit_opts;
    SamOptions sam_opts;
    SimulateOptions sim_opts;
    StabilityOptions stab_opts;
    CLI::App* fit = nullptr;
    CLI::App* sam = nullptr;
    CLI::App* simulate = nullptr;
    CLI::App* stability = nullptr;

    // relaxed: required options are optional, for the pass that only locates --config
    explicit Cli(bool relaxed = false) {
        app.option_defaults()->always_capture_default();
        app.require_subcommand(1);
        app.set_version_flag("--version", std::string(PENMIX_VERSION));
        fit = app.add_subcommand("fit", "Fit a penalized mixture of regressions");
        sam = app.add_subcommand("sam", "Fit species archetype models over a range of K");
        simulate = app.add_subcommand("simulate", "Run the simulation benchmark");
        stability = app.add_subcommand("stability", "Random-restart stability experiment");
        add_fit_options(*fit, fit_opts);
        add_sam_options(*sam, sam_opts);
        add_simulate_options(*simulate, sim_opts);
        add_stability_options(*stability, stab_opts);
        if (relaxed)
            for (auto* sub : {fit, sam, simulate, stability})
                for (auto* opt : sub->get_options()) opt->required(false);
    }

    CLI::App* chosen() const {
        for (auto* sub : {fit, sam, simulate, stability})
            if (*sub) return sub;
        return nullptr;
    }

    const std::string& config_path() const {
        if (*fit) return fit_opts.common.config;
        if (*sam) return sam_opts.common.config;
        if (*simulate) return sim_opts.common.config;
        return stab_opts.common.config;
    }
};

void parse(Cli& cli, std::vector<std::string> args) {
    std::reverse(args.begin(), args.end());
    cli.app.parse(args);
}

// Config entries become extra arguments unless the same option was given
// on the command line.
std::vector<std::string> config_arguments(const CLI::App& sub, const std::string& path) {
    std::vector<std::string> extra;
    for (const auto& item : CLI::ConfigTOML().from_file(path)) {
        if (item.name == "++" || item.name == "--") continue;
        if (!item.parents.empty()) throw InputError("config file must be flat, found section '" + item.fullname() + "'");
        const CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
        if (opt == nullptr || item.name == "config")
            throw InputError("unknown config key '" + item.name + "' for command " + sub.get_name());
        if (opt->count() > 0) continue;
        std::vector<std::string> values;
        for (const auto& input : item.inputs)
            for (auto& v : split_list(input)) values.push_back(std::move(v));
        if (is_flag(opt)) {
            if (values.size() == 1 && CLI::detail::to_flag_value(values[0]) > 0) extra.push_back("--" + item.name);
            continue;
        }
        if (values.empty()) throw InputError("config key '" + item.name + "' has no value");
        extra.push_back("--" + item.name);
        extra.insert(extra.end(), values.begin(), values.end());
    }
    return extra;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    auto cli = std::make_unique<Cli>(true);
    try {
        parse(*cli, args);
        if (cli->chosen() != nullptr && !cli->config_path().empty()) {
            auto extra = config_arguments(*cli->chosen(), cli->config_path());
            args.insert(args.end(), extra.begin(), extra.end());
        }
        cli = std::make_unique<Cli>();
        parse(*cli, args);
    } catch (const CLI::ParseError& e) {
        const int code = cli->app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    try {
        Cli& c = *cli;
        if (*c.fit) return cmd_fit(c.fit_opts, *c.fit);
        if (*c.sam) return cmd_sam(c.sam_opts, *c.sam);
        if (*c.simulate) return cmd_simulate(c.sim_opts, *c.simulate);
        if (*c.stability) return cmd_stability(c.stab_opts, *c.stability);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

} // namespace penmix::cli

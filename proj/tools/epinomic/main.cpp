// Command-line entry point: validate, scenario, sweep, calibrate, simulate.

#include "epinomic/calibrate.hpp"
#include "epinomic/config.hpp"
#include "epinomic/report.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

using namespace epinomic;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Common {
    std::vector<std::string> datasets;
    std::string out = "out";
    std::uint64_t seed = 1;
    int workers = 1;
    std::string fidelity = "full";
    std::vector<std::string> sets;
    bool quiet = false;
};

void add_common(CLI::App* app, Common& c, bool with_out = true) {
    app->add_option("--dataset", c.datasets, "Country dataset directory (repeatable)");
    if (with_out) app->add_option("--out", c.out, "Output directory");
    app->add_option("--seed", c.seed, "Random seed");
    app->add_option("--workers", c.workers, "Concurrent runs")->check(CLI::PositiveNumber);
    app->add_option("--fidelity", c.fidelity, "full or reduced (two patches)")
        ->check(CLI::IsMember({"full", "reduced"}));
    app->add_option("--set", c.sets, "Parameter override name=value (repeatable)");
    app->add_flag("--quiet", c.quiet, "Only print errors");
}

std::map<std::string, double> overrides(const Common& c) {
    std::map<std::string, double> out;
    ModelParams probe;
    for (const auto& s : c.sets) {
        auto [k, v] = parse_assignment(s);
        probe.set(k, v); // rejects unknown names
        out[k] = v;
    }
    return out;
}

fs::path packaged(const std::string& code) { return fs::path(EPINOMIC_DATA_DIR) / code; }

/// Loaded datasets and their configs; storage is stable for the lifetime of the object.
struct Countries {
    std::vector<std::unique_ptr<CountryDataset>> data;
    std::vector<CountryInput> inputs;
    std::vector<std::string> paths;

    void add(const fs::path& root, const std::string& fidelity) {
        auto ds = std::make_unique<CountryDataset>(load_country_dataset(root));
        CountryConfig cfg = country_config_for(*ds);
        if (fidelity == "reduced") {
            auto [small, c] = reduce_country(*ds, cfg);
            ds = std::make_unique<CountryDataset>(std::move(small));
            cfg = std::move(c);
        }
        inputs.push_back({ds.get(), std::move(cfg)});
        data.push_back(std::move(ds));
        paths.push_back(fs::weakly_canonical(root).string());
    }
};

Countries load_countries(const Common& c, const std::vector<std::string>& fallback) {
    Countries out;
    const auto& list = c.datasets.empty() ? fallback : c.datasets;
    for (const auto& d : list) out.add(c.datasets.empty() ? packaged(d) : fs::path(d), c.fidelity);
    return out;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& inputs, const Common& c,
                    const std::vector<std::string>& outputs) {
    json m;
    m["tool"] = "epinomic";
    m["version"] = kVersion;
    m["command"] = command;
    m["inputs"] = inputs;
    m["seed"] = c.seed;
    m["fidelity"] = c.fidelity;
    m["overrides"] = json::object();
    for (const auto& [k, v] : overrides(c)) m["overrides"][k] = v;
    m["versions"] = {{"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                     {"fmt", FMT_VERSION},
                     {"compiler", __VERSION__}};
    m["outputs"] = outputs;
    std::ofstream f(dir / "manifest.json");
    f << m.dump(2) << "\n";
}

json dataset_list(const Countries& cs) {
    json a = json::array();
    for (std::size_t i = 0; i < cs.inputs.size(); ++i)
        a.push_back({{"code", cs.inputs[i].ds->code}, {"path", cs.paths[i]}});
    return a;
}

void say(const Common& c, const std::string& s) {
    if (!c.quiet) std::cout << s << "\n";
}

// ---------------------------------------------------------------- commands

int cmd_validate(const Common& c) {
    const auto list = c.datasets.empty() ? std::vector<std::string>{packaged("BE"), packaged("SWE")} : c.datasets;
    int bad = 0;
    for (const auto& root : list) {
        std::vector<DataError> errs;
        try {
            errs = validate_parts(read_dataset_parts(root));
            if (errs.empty()) {
                auto ds = load_country_dataset(root);
                country_config_for(ds);
            }
        } catch (const DataError& e) {
            errs.push_back(e);
        } catch (const Error& e) {
            errs.emplace_back(root, -1, "config", e.what());
        }
        if (errs.empty()) {
            std::cout << fmt::format("{}: ok\n", root);
            continue;
        }
        ++bad;
        for (const auto& e : errs)
            std::cout << fmt::format("{}: {}{}: [{}] {}\n", root, e.file(), e.row() >= 0 ? fmt::format(":{}", e.row()) : "",
                                     e.invariant(), e.what());
    }
    return bad == 0 ? 0 : 1;
}

struct ScenarioArgs {
    std::string name;
    std::string policy, date, second_seed;
    int release_months = 0;
    double nu = 0.0;
    int intervention_day = -1;
    bool full_record = false;
};

int cmd_scenario(const Common& c, const ScenarioArgs& a) {
    auto ov = overrides(c);
    std::vector<std::string> fallback{"BE", "SWE"};
    if (a.name == "scenario1") fallback = {"BE"};
    Countries cs = load_countries(c, fallback);
    GridFilter f;
    if (!a.policy.empty()) f.policy = a.policy;
    if (!a.date.empty()) f.date = parse_date(a.date);
    if (a.release_months) f.release_months = a.release_months;
    if (a.nu > 0.0) f.nu = a.nu;
    if (!a.second_seed.empty()) f.second_seed = a.second_seed;
    if (a.intervention_day >= 0) f.intervention_day = a.intervention_day;
    auto runs = build_grid(a.name, cs.inputs, f);
    say(c, fmt::format("{}: {} runs", a.name, runs.size()));
    auto recs = run_grid(runs, c.workers, ov);
    fs::create_directories(c.out);
    std::vector<std::string> outputs;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        std::string file = slug(runs[i].spec.name) + ".csv";
        if (a.name == "scenario4") file = slug(fmt::format("scenario4_{}_{}", runs[i].country->ds->code,
                                                           runs[i].labels[1].second)) + ".csv";
        write_record_csv(recs[i], fs::path(c.out) / file, a.full_record ? RecordLevel::full : RecordLevel::standard);
        outputs.push_back(file);
    }
    summarize(a.name, runs, recs).write(fs::path(c.out) / "summary.csv");
    outputs.push_back("summary.csv");
    json inputs{{"scenario", a.name}, {"datasets", dataset_list(cs)}};
    write_manifest(c.out, "scenario", inputs, c, outputs);
    say(c, fmt::format("wrote {} files to {}", outputs.size() + 1, c.out));
    return 0;
}

ScenarioSpec spec_for(const std::string& scenario, const CountryInput& ci) {
    if (fs::exists(scenario) && fs::is_regular_file(scenario))
        return resolve_scenario(load_scenario_file(scenario), *ci.ds, ci.cfg);
    ScenarioFile f;
    if (scenario == "factual") {
        f.spec.name = "factual_" + ci.ds->code;
        f.spec.start = ci.cfg.seed_date;
        f.spec.end = make_date(2021, 1, 1);
        f.factual_policy = true;
        return resolve_scenario(f, *ci.ds, ci.cfg);
    }
    throw Error(fmt::format("sweep: scenario must be 'factual', 'scenario3' or a spec file (got '{}')", scenario));
}

int cmd_sweep(const Common& c, const std::string& parameter, const std::vector<double>& values,
              const std::string& scenario) {
    if (values.empty()) throw Error("sweep: empty value list");
    ModelParams probe;
    probe.get(parameter); // rejects unknown names
    auto ov = overrides(c);
    Countries cs = load_countries(c, {"BE"});
    fs::create_directories(c.out);
    std::vector<std::string> outputs;
    for (const auto& ci : cs.inputs) {
        std::vector<GridRun> runs;
        for (double v : values) {
            ScenarioSpec s;
            if (scenario == "scenario3") {
                ScenarioVariant var;
                var.nu = parameter == "nu" ? v : 20.8;
                s = scenario_library("scenario3", var, *ci.ds, ci.cfg);
            } else {
                s = spec_for(scenario, ci);
            }
            s.overrides[parameter] = v;
            s.name = slug(fmt::format("sweep_{}_{}_{}", ci.ds->code, parameter, format_number(v)));
            runs.push_back({&ci, s, {{"value", format_number(v)}}});
        }
        // --set applies first; the swept value wins.
        for (auto& r : runs)
            for (const auto& [k, v] : ov)
                if (k != parameter) r.spec.overrides[k] = v;
        auto recs = run_grid(runs, c.workers);
        for (std::size_t i = 0; i < recs.size(); ++i) {
            std::string file = runs[i].spec.name + ".csv";
            write_record_csv(recs[i], fs::path(c.out) / file);
            outputs.push_back(file);
        }
        std::string file = slug(fmt::format("sweep_{}_{}_series.csv", ci.ds->code, parameter));
        sweep_series(parameter, values, recs).write(fs::path(c.out) / file);
        outputs.push_back(file);
    }
    json inputs{{"parameter", parameter}, {"values", values}, {"scenario", scenario}, {"datasets", dataset_list(cs)}};
    write_manifest(c.out, "sweep", inputs, c, outputs);
    say(c, fmt::format("wrote {} files to {}", outputs.size() + 1, c.out));
    return 0;
}

struct CalibrateArgs {
    std::string observations;
    std::vector<std::string> params;
    int walkers = 0;
    int steps = 200;
    std::string resume;
    bool skip_initial = false;
    std::string end = "2021-01-01";
    int max_iterations = 1;
    std::string anchor_date;
    double anchor_incidence = 0.0;
};

int cmd_calibrate(const Common& c, const CalibrateArgs& a) {
    Countries cs = load_countries(c, {"BE", "SWE"});
    fs::create_directories(c.out);
    std::vector<std::string> outputs;
    auto ov = overrides(c);

    if (!a.anchor_date.empty()) {
        // Seed-scale anchoring: one factor per country so incidence on the anchor date hits the target.
        Table t{{"country", "scale", "patch", "seed"}, {}};
        for (const auto& ci : cs.inputs) {
            ScenarioSpec s = spec_for("factual", ci);
            for (const auto& [k, v] : ov) s.overrides[k] = v;
            double scale = fit_seed_scale(*ci.ds, ci.cfg, s, parse_date(a.anchor_date), a.anchor_incidence);
            for (const auto& [k, v] : s.seeds)
                t.rows.push_back({ci.ds->code, format_number(scale), k, format_number(v * scale)});
            say(c, fmt::format("{}: seed scale {}", ci.ds->code, format_number(scale)));
        }
        t.write(fs::path(c.out) / "seed_anchor.csv");
        outputs.push_back("seed_anchor.csv");
        write_manifest(c.out, "calibrate",
                       {{"anchor_date", a.anchor_date}, {"anchor_incidence", a.anchor_incidence},
                        {"datasets", dataset_list(cs)}},
                       c, outputs);
        return 0;
    }

    if (a.observations.empty()) throw Error("calibrate: --observations is required");
    ObservationSet obs = ObservationSet::load(a.observations);
    CalibrationProblem problem;
    ParameterSpace full = ParameterSpace::standard();
    std::vector<std::string> names;
    for (const auto& n : full.names()) {
        bool country_specific = n.rfind("A_", 0) == 0 || n.rfind("dt_", 0) == 0;
        if (!country_specific) {
            names.push_back(n);
            continue;
        }
        std::string code = n.substr(n.find('_') + 1);
        for (const auto& ci : cs.inputs)
            if (ci.ds->code == code) names.push_back(n);
    }
    if (!a.params.empty()) names = a.params;
    problem.space = full.subset(names);
    Date end = parse_date(a.end);
    for (const auto& ci : cs.inputs) {
        CountryFit fit;
        fit.ds = ci.ds;
        fit.cfg = ci.cfg;
        fit.spec = spec_for("factual", ci);
        fit.spec.end = end;
        for (const auto& [k, v] : ov) fit.spec.overrides[k] = v;
        // Output and labor windows may start before the run; those days are at baseline.
        const Date jan1 = std::chrono::sys_days(std::chrono::year_month_day(fit.spec.start).year() / 1 / 1);
        fit.obs = obs.for_country(ci.ds->code).between(jan1, end - std::chrono::days{1});
        problem.countries.push_back(std::move(fit));
    }
    if (std::all_of(problem.countries.begin(), problem.countries.end(),
                    [](const CountryFit& f) { return f.obs.empty(); }))
        throw Error("calibrate: no observations fall inside the simulated window");

    Vec theta = problem.space.initial();
    if (!a.skip_initial && a.resume.empty()) {
        IterativeOptions io;
        io.parameter_end = end;
        io.max_iterations = a.max_iterations;
        auto r = iterative_initial_condition(problem, theta, io);
        theta = r.theta;
        Table seeds{{"country", "patch", "exposed"}, {}};
        for (std::size_t i = 0; i < problem.countries.size(); ++i) {
            problem.countries[i].spec.seeds = r.seeds[i];
            for (const auto& [k, v] : r.seeds[i])
                seeds.rows.push_back({problem.countries[i].ds->code, k, format_number(v)});
        }
        seeds.write(fs::path(c.out) / "seeds.csv");
        outputs.push_back("seeds.csv");
        say(c, fmt::format("initial condition: {} iteration(s), converged {}", r.iterations, r.converged));
    }

    auto logp = [&](const Vec& th) { return log_posterior(th, problem); };
    const int W = a.walkers > 0 ? a.walkers : 2 * problem.space.dim() + 2 * (problem.space.dim() % 2);
    PosteriorChain chain;
    if (!a.resume.empty()) {
        chain = read_chain_csv(a.resume, c.seed);
        if (chain.names != problem.space.names()) throw Error("calibrate: resumed chain has different parameters");
        extend_chain(chain, logp, a.steps, c.workers);
    } else {
        EnsembleOptions eo;
        eo.steps = a.steps;
        eo.seed = c.seed;
        eo.workers = c.workers;
        chain = ensemble_mcmc(logp, perturbed_ensemble(theta, W % 2 ? W + 1 : W, 0.05, c.seed), eo,
                              problem.space.names());
    }
    write_chain_csv(chain, fs::path(c.out) / "chain.csv");
    outputs.push_back("chain.csv");

    // Best draw.
    int bs = 0, bw = 0;
    for (int s = 0; s <= chain.steps(); ++s)
        for (int w = 0; w < chain.walkers(); ++w)
            if (chain.log_prob[std::size_t(s)](w) > chain.log_prob[std::size_t(bs)](bw)) bs = s, bw = w;
    {
        std::ofstream f(fs::path(c.out) / "best_fit.toml");
        f << fmt::format("# maximum log posterior {}\n[parameters]\n",
                         format_number(chain.log_prob[std::size_t(bs)](bw)));
        for (int p = 0; p < chain.dim(); ++p)
            f << fmt::format("{} = {}\n", chain.names[std::size_t(p)],
                             format_number(chain.positions[std::size_t(bs)](bw, p)));
    }
    outputs.push_back("best_fit.toml");

    ChainDiagnostics d = diagnose(chain);
    Table diag{{"parameter", "tau", "rhat"}, {}};
    for (int p = 0; p < chain.dim(); ++p)
        diag.rows.push_back({chain.names[std::size_t(p)], format_number(d.tau(p)), format_number(d.rhat(p))});
    diag.write(fs::path(c.out) / "diagnostics.csv");
    Table acc{{"walker", "acceptance"}, {}};
    for (int w = 0; w < chain.walkers(); ++w) acc.rows.push_back({std::to_string(w), format_number(d.acceptance(w))});
    acc.write(fs::path(c.out) / "acceptance.csv");
    outputs.push_back("diagnostics.csv");
    outputs.push_back("acceptance.csv");
    if (!d.long_enough)
        spdlog::warn("chain length {} is below 50 × max autocorrelation time ({:.1f})", chain.steps(),
                     d.tau.maxCoeff());

    json inputs{{"observations", fs::weakly_canonical(a.observations).string()},
                {"parameters", problem.space.names()},
                {"walkers", chain.walkers()},
                {"steps", chain.steps()},
                {"resume", a.resume},
                {"datasets", dataset_list(cs)}};
    write_manifest(c.out, "calibrate", inputs, c, outputs);
    say(c, fmt::format("wrote {} files to {}", outputs.size() + 1, c.out));
    return 0;
}

int cmd_simulate(const Common& c, const std::string& spec_file, bool full_record) {
    ScenarioFile f = load_scenario_file(spec_file);
    Countries cs;
    if (!c.datasets.empty())
        cs.add(c.datasets.front(), c.fidelity);
    else if (f.dataset)
        cs.add(*f.dataset, c.fidelity);
    else
        throw Error("simulate: give --dataset or set 'dataset' in the spec file");
    const auto& ci = cs.inputs.front();
    ScenarioSpec s = resolve_scenario(f, *ci.ds, ci.cfg);
    for (const auto& [k, v] : overrides(c)) s.overrides[k] = v;
    auto rec = run(s, *ci.ds, ci.cfg);
    fs::create_directories(c.out);
    std::string file = slug(s.name) + ".csv";
    write_record_csv(rec, fs::path(c.out) / file, full_record ? RecordLevel::full : RecordLevel::standard);
    json inputs{{"spec", fs::weakly_canonical(spec_file).string()}, {"datasets", dataset_list(cs)}};
    write_manifest(c.out, "simulate", inputs, c, {file});
    say(c, fmt::format("wrote {} ({} days)", (fs::path(c.out) / file).string(), rec.days()));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coupled epidemic and production-network simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Common common;
    auto* validate = app.add_subcommand("validate", "Check dataset invariants; exit 1 on any violation");
    add_common(validate, common, false);

    ScenarioArgs sa;
    auto* scenario = app.add_subcommand("scenario", "Run a published scenario grid or one of its variants");
    scenario->add_option("name", sa.name, "scenario1, scenario2, scenario3 or scenario4")->required();
    scenario->add_option("--policy", sa.policy, "scenario1 policy (P1, P2, P3, P4a, P4b)");
    scenario->add_option("--date", sa.date, "scenario1 imposition date");
    scenario->add_option("--release-months", sa.release_months, "scenario2 lockdown length");
    scenario->add_option("--nu", sa.nu, "scenario3 memory lifetime");
    scenario->add_option("--second-seed", sa.second_seed, "scenario4 second patch");
    scenario->add_option("--intervention-day", sa.intervention_day, "scenario2 day offset (searched when absent)");
    scenario->add_flag("--full-record", sa.full_record, "Also write demand and shock series");
    add_common(scenario, common);

    std::string sweep_param, sweep_scenario = "factual";
    std::vector<double> sweep_values;
    auto* sweep = app.add_subcommand("sweep", "One-at-a-time sensitivity sweep");
    sweep->add_option("--parameter", sweep_param, "Parameter name")->required();
    sweep->add_option("--values", sweep_values, "Values")->delimiter(',')->required();
    sweep->add_option("--scenario", sweep_scenario, "factual, scenario3 or a spec file");
    add_common(sweep, common);

    CalibrateArgs ca;
    auto* calibrate = app.add_subcommand("calibrate", "Initial-condition fit and ensemble MCMC");
    calibrate->add_option("--observations", ca.observations, "observations CSV");
    calibrate->add_option("--params", ca.params, "Subset of parameters to calibrate")->delimiter(',');
    calibrate->add_option("--walkers", ca.walkers, "Walkers (default 2·dim)");
    calibrate->add_option("--steps", ca.steps, "MCMC steps");
    calibrate->add_option("--resume", ca.resume, "Chain CSV to continue");
    calibrate->add_flag("--skip-initial-condition", ca.skip_initial, "Start MCMC from the prior initial estimates");
    calibrate->add_option("--max-iterations", ca.max_iterations, "Initial-condition iterations");
    calibrate->add_option("--end", ca.end, "End of the calibration window");
    calibrate->add_option("--anchor-date", ca.anchor_date, "Only rescale seeds to hit an incidence on this date");
    calibrate->add_option("--anchor-incidence", ca.anchor_incidence, "Hospital incidence per 100k on the anchor date");
    add_common(calibrate, common);

    std::string spec_file;
    bool sim_full = false;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario spec file");
    simulate->add_option("--spec", spec_file, "Scenario TOML")->required()->check(CLI::ExistingFile);
    simulate->add_flag("--full-record", sim_full, "Also write demand and shock series");
    add_common(simulate, common);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(common.quiet ? spdlog::level::err : spdlog::level::warn);
    try {
        if (*validate) return cmd_validate(common);
        if (*scenario) return cmd_scenario(common, sa);
        if (*sweep) return cmd_sweep(common, sweep_param, sweep_values, sweep_scenario);
        if (*calibrate) return cmd_calibrate(common, ca);
        if (*simulate) return cmd_simulate(common, spec_file, sim_full);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

// hbvsim: simulation, stability analysis, calibration and global sensitivity
// analysis of a four-compartment within-host hepatitis B model with capsid
// recycling. Outputs are plot-ready CSV plus JSON summaries.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "run_config.hpp"

namespace {

using hbv::RunConfig;

struct ConfigFlags {
    std::string config_file;
    std::string scenario;
    std::vector<std::pair<hbv::Param, double>> param_overrides;
    std::optional<std::string> initial;
    std::optional<double> t_start, t_end, step, convergence_epsilon;
    std::optional<int> output_every;
    std::optional<std::string> negativity_policy;
    std::optional<std::uint64_t> seed;
};

// Wires the shared configuration options into a subcommand. Precedence:
// defaults < config file < scenario < explicit flags.
void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
    cmd->add_option("--config", flags.config_file, "JSON config file");
    cmd->add_option("--scenario", flags.scenario, hbv::scenario_help());
    for (int i = 0; i < hbv::kNumParams; ++i) {
        const auto which = static_cast<hbv::Param>(i);
        cmd->add_option_function<double>(
            std::string("--") + hbv::kParamNames[i],
            [&flags, which](double v) { flags.param_overrides.emplace_back(which, v); },
            std::string("override parameter ") + hbv::kParamNames[i]);
    }
    cmd->add_option_function<std::string>(
        "--initial", [&flags](const std::string& v) { flags.initial = v; },
        "initial state: ic1|ic2|ic3 or X,Y,D,V");
    cmd->add_option_function<double>(
        "--t-start", [&flags](double v) { flags.t_start = v; }, "start time (days)");
    cmd->add_option_function<double>(
        "--t-end", [&flags](double v) { flags.t_end = v; }, "end time (days)");
    cmd->add_option_function<double>(
        "--step", [&flags](double v) { flags.step = v; }, "RK4 step (days)");
    cmd->add_option_function<int>(
        "--output-every", [&flags](int v) { flags.output_every = v; },
        "record every n-th step");
    cmd->add_option_function<double>(
        "--convergence-epsilon", [&flags](double v) { flags.convergence_epsilon = v; },
        "steady-state detection tolerance");
    cmd->add_option_function<std::string>(
        "--negativity-policy", [&flags](const std::string& v) { flags.negativity_policy = v; },
        "reject|clamp-to-zero");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&flags](std::uint64_t v) { flags.seed = v; }, "RNG seed");
}

RunConfig build_config(const ConfigFlags& flags) {
    RunConfig cfg;
    if (!flags.config_file.empty()) {
        cfg = hbv::load_config_file(flags.config_file);
    }
    if (!flags.scenario.empty()) {
        hbv::apply_scenario(cfg, flags.scenario);
    }
    for (const auto& [which, value] : flags.param_overrides) {
        cfg.params.set(which, value);
    }
    if (flags.initial) {
        const std::string& raw = *flags.initial;
        if (raw.find(',') == std::string::npos) {
            hbv::initial_condition_preset(raw); // validates
            cfg.initial = raw;
        } else {
            std::istringstream ss(raw);
            hbv::State s;
            char sep = ',';
            for (int i = 0; i < 4; ++i) {
                if (!(ss >> s[i])) {
                    throw hbv::UsageError("--initial: expected four comma-separated numbers");
                }
                if (i < 3 && !(ss >> sep && sep == ',')) {
                    throw hbv::UsageError("--initial: expected four comma-separated numbers");
                }
            }
            cfg.initial = s;
        }
    }
    if (flags.t_start) cfg.sim.t_start = *flags.t_start;
    if (flags.t_end) cfg.sim.t_end = *flags.t_end;
    if (flags.step) cfg.sim.step = *flags.step;
    if (flags.output_every) cfg.sim.output_every = *flags.output_every;
    if (flags.convergence_epsilon) cfg.sim.convergence_epsilon = *flags.convergence_epsilon;
    if (flags.negativity_policy) {
        cfg.sim.negativity_policy = hbv::negativity_policy_from_string(*flags.negativity_policy);
    }
    if (flags.seed) cfg.seed = *flags.seed;
    return cfg;
}

std::vector<double> parse_value_list(const std::string& raw) {
    std::vector<double> values;
    std::istringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw hbv::UsageError("--values: not a number: " + item);
        }
    }
    return values;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"within-host HBV dynamics with capsid recycling"};
    app.require_subcommand(1);
    bool json_errors = false;
    app.add_flag("--json-errors", json_errors, "emit errors as JSON on stdout");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "integrate the model, write trajectory CSV "
                                                   "and a summary JSON");
    ConfigFlags sim_flags;
    std::string sim_out = ".";
    add_config_flags(sim_cmd, sim_flags);
    sim_cmd->add_option("--out-dir", sim_out, "output directory");

    // equilibria
    auto* eq_cmd = app.add_subcommand("equilibria", "equilibrium points, reproduction numbers, "
                                                    "stability report");
    ConfigFlags eq_flags;
    std::string eq_out;
    add_config_flags(eq_cmd, eq_flags);
    eq_cmd->add_option("--out", eq_out, "output file (default stdout)");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "re-run the simulation over a grid of values "
                                                  "of one parameter");
    ConfigFlags sweep_flags;
    std::string sweep_param, sweep_values, sweep_out = ".";
    int sweep_jobs = 1;
    add_config_flags(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--param", sweep_param, "parameter to sweep")->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep_cmd->add_option("--out-dir", sweep_out, "output directory");
    sweep_cmd->add_option("--jobs", sweep_jobs, "worker threads");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "calibrate parameters against viral-load CSV "
                                              "datasets");
    ConfigFlags fit_flags;
    hbv::cli::FitOptions fit_opt;
    std::string fit_free = "k", fit_space = "log10";
    std::vector<std::string> fit_bounds;
    add_config_flags(fit_cmd, fit_flags);
    fit_cmd->add_option("--data", fit_opt.dataset_paths, "dataset CSV file(s)")->required();
    fit_cmd->add_option("--free", fit_free, "comma-separated free parameters (default k)");
    fit_cmd->add_option("--bounds-factor", fit_opt.bounds_factor,
                        "default box = value/f .. value*f");
    fit_cmd->add_option("--bound", fit_bounds,
                        "explicit bound name=lo:hi (repeatable)");
    fit_cmd->add_option("--objective", fit_space, "raw|log10");
    fit_cmd->add_flag("--average", fit_opt.average, "also emit the parameter-wise mean");
    fit_cmd->add_option("--out-dir", fit_opt.out_dir, "output directory");
    fit_cmd->add_option("--jobs", fit_opt.jobs, "worker threads");

    // gsa
    auto* gsa_cmd = app.add_subcommand("gsa", "LHS-PRCC global sensitivity analysis");
    ConfigFlags gsa_flags;
    hbv::cli::GsaOptions gsa_opt;
    add_config_flags(gsa_cmd, gsa_flags);
    gsa_cmd->add_option("--n", gsa_opt.n, "LHS sample size");
    gsa_cmd->add_option("--query-time", gsa_opt.query_time, "PRCC query time (days)");
    gsa_cmd->add_option("--fraction-low", gsa_opt.fraction_low, "range low, fraction of baseline");
    gsa_cmd->add_option("--fraction-high", gsa_opt.fraction_high,
                        "range high, fraction of baseline");
    gsa_cmd->add_option("--out-dir", gsa_opt.out_dir, "output directory");
    gsa_cmd->add_option("--jobs", gsa_opt.jobs, "worker threads");

    // elasticity
    auto* ela_cmd = app.add_subcommand("elasticity", "elasticities of the reproduction number");
    ConfigFlags ela_flags;
    std::string ela_out;
    add_config_flags(ela_cmd, ela_flags);
    ela_cmd->add_option("--out", ela_out, "output file (default stdout)");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic viral-load dataset");
    ConfigFlags synth_flags;
    hbv::cli::SynthOptions synth_opt;
    add_config_flags(synth_cmd, synth_flags);
    synth_cmd->add_option("--t-max", synth_opt.t_max, "last sample time (days)");
    synth_cmd->add_option("--interval", synth_opt.interval, "sampling interval (days)");
    synth_cmd->add_option("--inoculum", synth_opt.inoculum, "initial virion load");
    synth_cmd->add_option("--noise", synth_opt.noise_sigma,
                          "multiplicative lognormal noise sigma");
    synth_cmd->add_option("--out", synth_opt.out_file, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    return hbv::cli::run_command(
        [&]() -> int {
            if (sim_cmd->parsed()) {
                return hbv::cli::cmd_simulate({build_config(sim_flags), sim_out});
            }
            if (eq_cmd->parsed()) {
                return hbv::cli::cmd_equilibria({build_config(eq_flags), eq_out});
            }
            if (sweep_cmd->parsed()) {
                hbv::cli::SweepOptions opt;
                opt.config = build_config(sweep_flags);
                opt.param = sweep_param;
                opt.values = parse_value_list(sweep_values);
                opt.out_dir = sweep_out;
                opt.jobs = sweep_jobs;
                return hbv::cli::cmd_sweep(opt);
            }
            if (fit_cmd->parsed()) {
                fit_opt.config = build_config(fit_flags);
                fit_opt.objective_space = hbv::objective_space_from_string(fit_space);
                fit_opt.free_names.clear();
                std::istringstream ss(fit_free);
                std::string name;
                while (std::getline(ss, name, ',')) {
                    if (!name.empty()) {
                        fit_opt.free_names.push_back(name);
                    }
                }
                for (const std::string& b : fit_bounds) {
                    const auto eq = b.find('=');
                    const auto colon = b.find(':', eq == std::string::npos ? 0 : eq);
                    if (eq == std::string::npos || colon == std::string::npos) {
                        throw hbv::UsageError("--bound: expected name=lo:hi, got " + b);
                    }
                    try {
                        fit_opt.explicit_bounds[b.substr(0, eq)] = {
                            std::stod(b.substr(eq + 1, colon - eq - 1)),
                            std::stod(b.substr(colon + 1))};
                    } catch (const std::exception&) {
                        throw hbv::UsageError("--bound: expected name=lo:hi, got " + b);
                    }
                }
                return hbv::cli::cmd_fit(fit_opt);
            }
            if (gsa_cmd->parsed()) {
                gsa_opt.config = build_config(gsa_flags);
                return hbv::cli::cmd_gsa(gsa_opt);
            }
            if (ela_cmd->parsed()) {
                return hbv::cli::cmd_elasticity({build_config(ela_flags), ela_out});
            }
            if (synth_cmd->parsed()) {
                synth_opt.config = build_config(synth_flags);
                return hbv::cli::cmd_synth(synth_opt);
            }
            throw hbv::UsageError("no subcommand given");
        },
        json_errors);
}

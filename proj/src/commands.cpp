#include "commands.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hbv/io.hpp"
#include "hbv/model.hpp"
#include "hbv/sensitivity.hpp"

namespace hbv::cli {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw UsageError("cannot open output file: " + path.string());
    }
    f << text;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw UsageError("cannot open output file: " + path.string());
    }
    return f;
}

fs::path prepare_out_dir(const std::string& dir) {
    fs::path p(dir.empty() ? "." : dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) {
        throw UsageError("cannot create output directory: " + p.string());
    }
    return p;
}

ordered_json state_json(const State& s) {
    return ordered_json::array({s[CompX], s[CompY], s[CompD], s[CompV]});
}

ordered_json equilibrium_json(const EquilibriumReport& rep) {
    ordered_json j;
    j["kind"] = to_string(rep.kind);
    j["point"] = state_json(rep.point);
    j["r0"] = rep.r0;
    j["r_s"] = rep.rs;
    if (rep.rh_disease_free) {
        const auto& rh = *rep.rh_disease_free;
        j["routh_hurwitz"] = {
            {"a1", rh.a1},
            {"a2", rh.a2},
            {"a3", rh.a3},
            {"a1_positive", rh.a1_positive},
            {"a2_positive", rh.a2_positive},
            {"a3_positive", rh.a3_positive},
            {"a1a2_minus_a3_positive", rh.composite_positive},
            {"stable", rh.stable},
        };
    }
    if (rep.rh_endemic) {
        const auto& rh = *rep.rh_endemic;
        j["routh_hurwitz"] = {
            {"b1", rh.b1},
            {"b2", rh.b2},
            {"b3", rh.b3},
            {"b4", rh.b4},
            {"b1_positive", rh.b1_positive},
            {"b3_positive", rh.b3_positive},
            {"b4_positive", rh.b4_positive},
            {"b1b2_minus_b3_positive", rh.composite1_positive},
            {"b1b2b3_minus_b3sq_minus_b1sqb4_positive", rh.composite2_positive},
            {"stable", rh.stable},
        };
    }
    j["jacobian_eigen_real_parts"] =
        ordered_json::array({rep.jacobian_eigen_real_parts[0], rep.jacobian_eigen_real_parts[1],
                             rep.jacobian_eigen_real_parts[2], rep.jacobian_eigen_real_parts[3]});
    j["verdict"] = to_string(rep.verdict);
    return j;
}

ordered_json params_json(const ModelParams& p) {
    ordered_json j;
    for (int i = 0; i < kNumParams; ++i) {
        j[kParamNames[i]] = p.get(static_cast<Param>(i));
    }
    return j;
}

ordered_json equilibria_overview_json(const ModelParams& params) {
    ordered_json j;
    j["r_s"] = compute_rs(params);
    j["r0"] = compute_r0(params);
    j["mu_star"] = mu_star(params);
    j["disease_free"] = equilibrium_json(analyze_equilibrium(params, EquilibriumKind::DiseaseFree));
    try {
        j["endemic"] = equilibrium_json(analyze_equilibrium(params, EquilibriumKind::Endemic));
    } catch (const Nonexistence& e) {
        j["endemic"] = {{"exists", false}, {"r0", e.r0}, {"reason", e.what()}};
    }
    return j;
}

} // namespace

int cmd_simulate(const SimulateOptions& opt) {
    validate(opt.config.params);
    validate(opt.config.sim);
    const fs::path out = prepare_out_dir(opt.out_dir);
    const State initial = resolve_initial(opt.config);

    const Trajectory traj = simulate(opt.config.params, initial, opt.config.sim);
    {
        std::ofstream f = open_output(out / "trajectory.csv");
        write_trajectory_csv(f, traj);
    }

    ordered_json summary;
    summary["params"] = params_json(opt.config.params);
    summary["initial"] = state_json(initial);
    const double rs = compute_rs(opt.config.params);
    summary["r_s"] = rs;
    if (rs > 0.0) {
        summary["equilibria"] = equilibria_overview_json(opt.config.params);
        const BoundCheckReport bounds = check_bounds(opt.config.params, traj);
        ordered_json bj;
        bj["bound_xy"] = bounds.thresholds.bound_xy;
        bj["bound_d"] = bounds.thresholds.bound_d;
        bj["bound_v"] = bounds.thresholds.bound_v;
        bj["initial_inside"] = bounds.initial_inside;
        bj["passed"] = bounds.passed;
        if (bounds.violation) {
            bj["violation"] = {{"time", bounds.violation->time},
                               {"quantity", bounds.violation->quantity},
                               {"value", bounds.violation->value},
                               {"bound", bounds.violation->bound}};
        } else {
            bj["violation"] = nullptr;
        }
        summary["bounds_check"] = bj;
    } else {
        summary["equilibria"] = nullptr;
        summary["bounds_check"] = nullptr;
        summary["note"] = "R_s <= 0: capsid dynamics unbounded, no threshold analysis";
    }
    if (traj.converged_to) {
        summary["convergence"] = {{"converged", true},
                                  {"time", traj.converged_to->time},
                                  {"state", state_json(traj.converged_to->state)}};
    } else {
        summary["convergence"] = {{"converged", false}};
    }
    ordered_json peaks;
    for (int c = 0; c < 4; ++c) {
        peaks[kCompNames[c]] = {{"time", traj.peaks[c].time}, {"value", traj.peaks[c].value}};
    }
    summary["peaks"] = peaks;
    summary["terminal"] = state_json(traj.states.back());
    summary["records"] = traj.times.size();

    write_text_file(out / "summary.json", summary.dump(2) + "\n");
    std::cout << "wrote " << (out / "trajectory.csv").string() << " ("
              << traj.times.size() << " rows) and " << (out / "summary.json").string() << "\n";
    return 0;
}

int cmd_equilibria(const EquilibriaOptions& opt) {
    validate(opt.config.params);
    const ordered_json j = equilibria_overview_json(opt.config.params);
    const std::string text = j.dump(2) + "\n";
    if (opt.out_file.empty()) {
        std::cout << text;
    } else {
        write_text_file(opt.out_file, text);
    }
    return 0;
}

int cmd_sweep(const SweepOptions& opt) {
    if (opt.values.empty()) {
        throw UsageError("sweep: empty value list");
    }
    const Param which = param_from_name(opt.param);
    validate(opt.config.sim);
    const fs::path out = prepare_out_dir(opt.out_dir);
    const State initial = resolve_initial(opt.config);

    struct Run {
        double value;
        bool ok = false;
        std::string error;
        Trajectory traj;
        double r0 = std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<Run> runs(opt.values.size());
    for (std::size_t i = 0; i < opt.values.size(); ++i) {
        runs[i].value = opt.values[i];
    }

    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= runs.size()) {
                return;
            }
            ModelParams p = opt.config.params;
            p.set(which, runs[i].value);
            try {
                validate(p);
                runs[i].traj = simulate(p, initial, opt.config.sim);
                try {
                    runs[i].r0 = compute_r0(p);
                } catch (const Error&) {
                    // R_s <= 0 variants simulate fine but have no R0
                }
                runs[i].ok = true;
            } catch (const Error& e) {
                runs[i].error = e.what();
            }
        }
    };
    if (opt.jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < opt.jobs; ++w) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

    std::ofstream csv = open_output(out / "sweep.csv");
    csv << "sweep_value,t,X,Y,D,V\n";
    ordered_json summary = ordered_json::array();
    for (const Run& run : runs) {
        ordered_json item;
        item["value"] = run.value;
        item["ok"] = run.ok;
        if (run.ok) {
            for (std::size_t i = 0; i < run.traj.times.size(); ++i) {
                const State& s = run.traj.states[i];
                csv << fmt17(run.value) << ',' << fmt17(run.traj.times[i]) << ','
                    << fmt17(s[CompX]) << ',' << fmt17(s[CompY]) << ',' << fmt17(s[CompD]) << ','
                    << fmt17(s[CompV]) << '\n';
            }
            if (std::isfinite(run.r0)) {
                item["r0"] = run.r0;
            }
            item["terminal"] = state_json(run.traj.states.back());
        } else {
            item["error"] = run.error;
        }
        summary.push_back(item);
    }
    write_text_file(out / "sweep_summary.json",
                    ordered_json{{"param", opt.param}, {"runs", summary}}.dump(2) + "\n");
    std::cout << "wrote " << (out / "sweep.csv").string() << " and "
              << (out / "sweep_summary.json").string() << "\n";
    return 0;
}

int cmd_fit(const FitOptions& opt) {
    if (opt.dataset_paths.empty()) {
        throw UsageError("fit: no dataset files given");
    }
    const fs::path out = prepare_out_dir(opt.out_dir);

    std::vector<FitProblem> problems;
    for (const std::string& path : opt.dataset_paths) {
        FitProblem fp;
        fp.dataset = read_dataset_csv_file(path);
        fp.dataset.label = fs::path(path).stem().string();
        fp.fixed = opt.config.params;
        fp.objective_space = opt.objective_space;
        fp.sim_step = opt.config.sim.step;
        for (const std::string& name : opt.free_names) {
            const Param which = param_from_name(name);
            double lo, hi;
            if (const auto it = opt.explicit_bounds.find(name); it != opt.explicit_bounds.end()) {
                lo = it->second.first;
                hi = it->second.second;
            } else {
                const double v = fp.fixed.get(which);
                if (!(v > 0.0)) {
                    throw UsageError("fit: cannot derive bounds around zero value of " + name);
                }
                lo = v / opt.bounds_factor;
                hi = v * opt.bounds_factor;
            }
            fp.free.push_back({which, lo, hi});
        }
        validate(fp);
        problems.push_back(std::move(fp));
    }

    std::vector<FitResult> results(problems.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure_message;
    std::mutex failure_mutex;
    const auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= problems.size() || failed.load()) {
                return;
            }
            OptimizerConfig oc;
            oc.seed = opt.config.seed + i; // per-fit RNG stream
            try {
                results[i] = fit(problems[i], oc);
            } catch (const Error& e) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                failed = true;
                failure_message = problems[i].dataset.label + ": " + e.what();
            }
        }
    };
    if (opt.jobs <= 1 || problems.size() == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < opt.jobs; ++w) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }
    if (failed) {
        throw FitFailure("fit failed for " + failure_message);
    }

    for (std::size_t i = 0; i < results.size(); ++i) {
        ordered_json j;
        j["params"] = params_json(results[i].params);
        j["sse"] = results[i].sse;
        j["objective_space"] = to_string(opt.objective_space);
        j["evaluations"] = results[i].evaluations;
        j["converged"] = results[i].converged;
        j["residuals"] = results[i].residuals;
        const fs::path path = out / ("fit_" + problems[i].dataset.label + ".json");
        write_text_file(path, j.dump(2) + "\n");
        std::cout << "wrote " << path.string() << " (sse = " << results[i].sse << ")\n";
    }
    if (opt.average) {
        const ModelParams avg = average_params(results);
        ordered_json j;
        j["params"] = params_json(avg);
        j["n_fits"] = results.size();
        write_text_file(out / "average_params.json", j.dump(2) + "\n");
        std::cout << "wrote " << (out / "average_params.json").string() << "\n";
    }
    return 0;
}

int cmd_gsa(const GsaOptions& opt) {
    validate(opt.config.sim);
    const fs::path out = prepare_out_dir(opt.out_dir);
    const State initial = resolve_initial(opt.config);

    const PrccResult result =
        run_gsa(opt.config.params, opt.config.sim, opt.n, opt.config.seed, opt.query_time,
                opt.fraction_low, opt.fraction_high, initial, opt.jobs);
    const LhsDesign design = lhs_sample(opt.config.params, opt.fraction_low, opt.fraction_high,
                                        opt.n, opt.config.seed);

    {
        std::ofstream f = open_output(out / "prcc.csv");
        f << "parameter,compartment,prcc\n";
        for (int j = 0; j < kNumParams; ++j) {
            for (std::size_t o = 0; o < result.outputs.size(); ++o) {
                f << kParamNames[j] << ',' << kCompNames[result.outputs[o]] << ','
                  << fmt17(result.prcc(j, static_cast<int>(o))) << '\n';
            }
        }
    }
    {
        std::ofstream f = open_output(out / "design.csv");
        for (int j = 0; j < kNumParams; ++j) {
            f << kParamNames[j] << (j + 1 < kNumParams ? ',' : '\n');
        }
        for (int i = 0; i < design.n; ++i) {
            for (int j = 0; j < kNumParams; ++j) {
                f << fmt17(design.matrix(i, j)) << (j + 1 < kNumParams ? ',' : '\n');
            }
        }
    }

    // Scatter data: rank of each parameter against rank of each output over
    // the successful rows.
    std::vector<int> keep;
    for (int i = 0; i < opt.n; ++i) {
        if (result.sample_outputs.row(i).allFinite()) {
            keep.push_back(i);
        }
    }
    for (std::size_t o = 0; o < result.outputs.size(); ++o) {
        std::vector<double> out_col(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            out_col[i] = result.sample_outputs(keep[i], static_cast<int>(o));
        }
        const std::vector<double> out_ranks = rank_transform(out_col);
        for (int j = 0; j < kNumParams; ++j) {
            std::vector<double> par_col(keep.size());
            for (std::size_t i = 0; i < keep.size(); ++i) {
                par_col[i] = design.matrix(keep[i], j);
            }
            const std::vector<double> par_ranks = rank_transform(par_col);
            std::ofstream f = open_output(
                out / ("scatter_" + std::string(kParamNames[j]) + "_" +
                       kCompNames[result.outputs[o]] + ".csv"));
            f << "rank_param,rank_output\n";
            for (std::size_t i = 0; i < keep.size(); ++i) {
                f << fmt17(par_ranks[i]) << ',' << fmt17(out_ranks[i]) << '\n';
            }
        }
    }

    ordered_json summary;
    summary["n"] = opt.n;
    summary["seed"] = opt.config.seed;
    summary["query_time"] = result.query_time;
    summary["failures"] = result.failures;
    summary["reliability_warning"] = result.reliability_warning;
    ordered_json degenerate = ordered_json::array();
    for (const auto& [j, o] : result.degenerate_pairs) {
        degenerate.push_back({{"parameter", kParamNames[j]},
                              {"compartment", kCompNames[result.outputs[o]]}});
    }
    summary["degenerate_pairs"] = degenerate;
    write_text_file(out / "gsa_summary.json", summary.dump(2) + "\n");
    if (result.reliability_warning) {
        std::cerr << "warning: more than 10% of GSA runs failed; PRCC values may be "
                     "unreliable\n";
    }
    std::cout << "wrote " << (out / "prcc.csv").string() << ", design.csv and "
              << result.outputs.size() * kNumParams << " scatter files\n";
    return 0;
}

int cmd_elasticity(const ElasticityOptions& opt) {
    validate(opt.config.params);
    std::ostringstream csv;
    csv << "parameter,elasticity\n";
    for (int i = 0; i < kNumParams; ++i) {
        const Param which = static_cast<Param>(i);
        csv << kParamNames[i] << ',' << fmt17(elasticity_r0(opt.config.params, which)) << '\n';
    }
    if (opt.out_file.empty()) {
        std::cout << csv.str();
    } else {
        write_text_file(opt.out_file, csv.str());
    }
    return 0;
}

int cmd_synth(const SynthOptions& opt) {
    validate(opt.config.params);
    if (!(opt.interval > 0.0) || !(opt.t_max >= 0.0)) {
        throw UsageError("synth: need interval > 0 and t_max >= 0");
    }
    std::vector<double> times;
    for (double t = 0.0; t <= opt.t_max + 1e-9; t += opt.interval) {
        times.push_back(t);
    }
    const ModelParams& p = opt.config.params;
    if (!(p.mu > 0.0)) {
        throw DegenerateParameter("synth: mu must be > 0");
    }
    const State initial(p.lambda / p.mu, 0.0, 0.0, opt.inoculum);
    const Dataset d =
        synthetic_dataset(p, initial, times, opt.noise_sigma, opt.config.seed, "synthetic");
    if (opt.out_file.empty()) {
        write_dataset_csv(std::cout, d);
    } else {
        std::ofstream f = open_output(opt.out_file);
        write_dataset_csv(f, d);
    }
    return 0;
}

int run_command(const std::function<int()>& command, bool json_errors) {
    const auto report = [&](const char* type, const std::string& message, int code) {
        if (json_errors) {
            ordered_json j;
            j["error"] = {{"type", type}, {"message", message}, {"exit_code", code}};
            std::cout << j.dump(2) << "\n";
        } else {
            std::cerr << "error (" << type << "): " << message << "\n";
        }
        return code;
    };
    try {
        return command();
    } catch (const UsageError& e) {
        return report("usage", e.what(), 2);
    } catch (const InvalidInput& e) {
        return report("invalid-input", e.what(), 2);
    } catch (const DegenerateParameter& e) {
        return report("degenerate-parameter", e.what(), 2);
    } catch (const DegenerateRange& e) {
        return report("degenerate-range", e.what(), 2);
    } catch (const ThresholdViolation& e) {
        return report("threshold-violation", e.what(), 2);
    } catch (const OverflowError& e) {
        return report("overflow", e.what(), 3);
    } catch (const NegativityError& e) {
        return report("negativity", e.what(), 3);
    } catch (const Nonexistence& e) {
        return report("nonexistence", e.what(), 3);
    } catch (const DomainError& e) {
        return report("domain", e.what(), 3);
    } catch (const FitFailure& e) {
        return report("fit-failure", e.what(), 3);
    } catch (const Error& e) {
        return report("error", e.what(), 3);
    } catch (const std::exception& e) {
        return report("internal", e.what(), 3);
    }
}

} // namespace hbv::cli

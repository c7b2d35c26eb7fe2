#ifndef HBV_COMMANDS_HPP
#define HBV_COMMANDS_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hbv/estimation.hpp"
#include "run_config.hpp"

namespace hbv::cli {

// Every command returns a process exit code: 0 success, 2 usage/config
// error, 3 numeric failure. Commands throw hbv errors; the wrapper in the
// CLI entry point performs the mapping.

struct SimulateOptions {
    RunConfig config;
    std::string out_dir = ".";
};
int cmd_simulate(const SimulateOptions& opt);

struct EquilibriaOptions {
    RunConfig config;
    std::string out_file; // empty = stdout
};
int cmd_equilibria(const EquilibriaOptions& opt);

struct SweepOptions {
    RunConfig config;
    std::string param;
    std::vector<double> values;
    std::string out_dir = ".";
    int jobs = 1;
};
int cmd_sweep(const SweepOptions& opt);

struct FitOptions {
    RunConfig config; // fixed parameter values and seed
    std::vector<std::string> dataset_paths;
    std::vector<std::string> free_names = {"k"};
    double bounds_factor = 10.0; // default box: value/factor .. value*factor
    std::map<std::string, std::pair<double, double>> explicit_bounds;
    ObjectiveSpace objective_space = ObjectiveSpace::Log10;
    bool average = false;
    std::string out_dir = ".";
    int jobs = 1;
};
int cmd_fit(const FitOptions& opt);

struct GsaOptions {
    RunConfig config;
    int n = 1000;
    double query_time = 300.0;
    double fraction_low = 0.8;
    double fraction_high = 1.2;
    std::string out_dir = ".";
    int jobs = 1;
};
int cmd_gsa(const GsaOptions& opt);

struct ElasticityOptions {
    RunConfig config;
    std::string out_file; // empty = stdout
};
int cmd_elasticity(const ElasticityOptions& opt);

struct SynthOptions {
    RunConfig config;
    double t_max = 65.0;
    double interval = 5.0;
    double inoculum = 1e7;
    double noise_sigma = 0.0;
    std::string out_file; // empty = stdout
};
int cmd_synth(const SynthOptions& opt);

// Maps a thrown error to the exit-code contract and prints either a plain
// message or, when json_errors is set, a machine-readable error object.
int run_command(const std::function<int()>& command, bool json_errors);

} // namespace hbv::cli

#endif

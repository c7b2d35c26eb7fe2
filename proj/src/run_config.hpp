#ifndef HBV_RUN_CONFIG_HPP
#define HBV_RUN_CONFIG_HPP

#include <cstdint>
#include <string>
#include <variant>

#include "hbv/integrator.hpp"
#include "hbv/params.hpp"

namespace hbv {

// Top-level run configuration shared by the CLI subcommands. Serializes to a
// canonical JSON form (fixed key order, 17-significant-digit floats) so that
// parse followed by emit is byte-identical.
struct RunConfig {
    ModelParams params = baseline_params();
    std::variant<std::string, State> initial = std::string("ic1");
    SimConfig sim;
    std::uint64_t seed = 0;
};

RunConfig parse_config_json(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string emit_config_json(const RunConfig& cfg);

State resolve_initial(const RunConfig& cfg);

// Named parameter presets: the literature baseline plus its k variants.
void apply_scenario(RunConfig& cfg, const std::string& name);
std::string scenario_help();

} // namespace hbv

#endif

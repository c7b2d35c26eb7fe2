#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hbv/errors.hpp"
#include "hbv/io.hpp"

namespace hbv {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const char* where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw UsageError(std::string("config: unknown key \"") + key + "\" in " + where);
        }
    }
}

double as_number(const json& v, const char* what) {
    if (!v.is_number()) {
        throw UsageError(std::string("config: ") + what + " must be a number");
    }
    return v.get<double>();
}

} // namespace

RunConfig parse_config_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw UsageError("config: top level must be an object");
    }
    reject_unknown_keys(root, {"params", "initial", "sim", "seed"}, "the top level");

    RunConfig cfg;
    if (root.contains("params")) {
        const json& p = root["params"];
        if (!p.is_object()) {
            throw UsageError("config: params must be an object");
        }
        reject_unknown_keys(p, {"lambda", "mu", "k", "a", "beta", "delta", "c", "alpha", "gamma"},
                            "params");
        for (int i = 0; i < kNumParams; ++i) {
            if (p.contains(kParamNames[i])) {
                cfg.params.set(static_cast<Param>(i), as_number(p[kParamNames[i]], kParamNames[i]));
            }
        }
    }
    if (root.contains("initial")) {
        const json& init = root["initial"];
        if (init.is_string()) {
            const std::string name = init.get<std::string>();
            initial_condition_preset(name); // validates the name
            cfg.initial = name;
        } else if (init.is_array() && init.size() == 4) {
            State s;
            for (int i = 0; i < 4; ++i) {
                s[i] = as_number(init[i], "initial component");
            }
            cfg.initial = s;
        } else {
            throw UsageError("config: initial must be \"ic1\"|\"ic2\"|\"ic3\" or [X,Y,D,V]");
        }
    }
    if (root.contains("sim")) {
        const json& s = root["sim"];
        if (!s.is_object()) {
            throw UsageError("config: sim must be an object");
        }
        reject_unknown_keys(s,
                            {"t_start", "t_end", "step", "output_every", "convergence_epsilon",
                             "negativity_policy"},
                            "sim");
        if (s.contains("t_start")) cfg.sim.t_start = as_number(s["t_start"], "t_start");
        if (s.contains("t_end")) cfg.sim.t_end = as_number(s["t_end"], "t_end");
        if (s.contains("step")) cfg.sim.step = as_number(s["step"], "step");
        if (s.contains("output_every")) {
            if (!s["output_every"].is_number_integer()) {
                throw UsageError("config: output_every must be an integer");
            }
            cfg.sim.output_every = s["output_every"].get<int>();
        }
        if (s.contains("convergence_epsilon")) {
            cfg.sim.convergence_epsilon = as_number(s["convergence_epsilon"], "convergence_epsilon");
        }
        if (s.contains("negativity_policy")) {
            if (!s["negativity_policy"].is_string()) {
                throw UsageError("config: negativity_policy must be a string");
            }
            cfg.sim.negativity_policy =
                negativity_policy_from_string(s["negativity_policy"].get<std::string>());
        }
    }
    if (root.contains("seed")) {
        if (!root["seed"].is_number_integer() || root["seed"].get<double>() < 0) {
            throw UsageError("config: seed must be a non-negative integer");
        }
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw UsageError("cannot open config file: " + path);
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_json(buf.str());
}

std::string emit_config_json(const RunConfig& cfg) {
    std::ostringstream os;
    os << "{\n  \"params\": {\n";
    for (int i = 0; i < kNumParams; ++i) {
        os << "    \"" << kParamNames[i] << "\": " << fmt17(cfg.params.get(static_cast<Param>(i)))
           << (i + 1 < kNumParams ? ",\n" : "\n");
    }
    os << "  },\n  \"initial\": ";
    if (const std::string* preset = std::get_if<std::string>(&cfg.initial)) {
        os << '"' << *preset << '"';
    } else {
        const State& s = std::get<State>(cfg.initial);
        os << '[' << fmt17(s[0]) << ", " << fmt17(s[1]) << ", " << fmt17(s[2]) << ", "
           << fmt17(s[3]) << ']';
    }
    os << ",\n  \"sim\": {\n";
    os << "    \"t_start\": " << fmt17(cfg.sim.t_start) << ",\n";
    os << "    \"t_end\": " << fmt17(cfg.sim.t_end) << ",\n";
    os << "    \"step\": " << fmt17(cfg.sim.step) << ",\n";
    os << "    \"output_every\": " << cfg.sim.output_every << ",\n";
    os << "    \"convergence_epsilon\": " << fmt17(cfg.sim.convergence_epsilon) << ",\n";
    os << "    \"negativity_policy\": \"" << to_string(cfg.sim.negativity_policy) << "\"\n";
    os << "  },\n  \"seed\": " << cfg.seed << "\n}\n";
    return os.str();
}

State resolve_initial(const RunConfig& cfg) {
    if (const std::string* preset = std::get_if<std::string>(&cfg.initial)) {
        return initial_condition_preset(*preset);
    }
    return std::get<State>(cfg.initial);
}

void apply_scenario(RunConfig& cfg, const std::string& name) {
    if (name == "baseline") {
        cfg.params = baseline_params();
    } else if (name == "r0-below-1") {
        cfg.params.k = 3.38e-13;
    } else if (name == "r0-above-1") {
        cfg.params.k = 3.38e-11;
    } else if (name == "k-3e-13") {
        cfg.params.k = 3e-13;
    } else if (name == "k-3e-12") {
        cfg.params.k = 3e-12;
    } else {
        throw UsageError("unknown scenario: " + name + "\n" + scenario_help());
    }
}

std::string scenario_help() {
    return "scenarios:\n"
           "  baseline    default parameter set (R0 ~ 0.152)\n"
           "  r0-below-1  baseline with k = 3.38e-13 (clearance regime)\n"
           "  r0-above-1  baseline with k = 3.38e-11 (chronic regime, R0 ~ 1.52)\n"
           "  k-3e-13     literature variant k = 3e-13\n"
           "  k-3e-12     literature variant k = 3e-12";
}

} // namespace hbv

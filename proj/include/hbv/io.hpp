#ifndef HBV_IO_HPP
#define HBV_IO_HPP

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hbv/errors.hpp"
#include "hbv/integrator.hpp"

namespace hbv {

// Full-precision float formatting used by every CSV and JSON emitter.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,X,Y,D,V\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const State& s = traj.states[i];
        os << fmt17(traj.times[i]) << ',' << fmt17(s[CompX]) << ',' << fmt17(s[CompY]) << ','
           << fmt17(s[CompD]) << ',' << fmt17(s[CompV]) << '\n';
    }
}

struct Observation {
    double t;    // days since inoculation
    double load; // virions per ml
};

struct Dataset {
    std::vector<Observation> observations;
    std::string label;
};

inline void validate(const Dataset& d) {
    if (d.observations.empty()) {
        throw InvalidInput("dataset: no observations");
    }
    double prev = -1.0;
    for (const Observation& o : d.observations) {
        if (!std::isfinite(o.t) || o.t < 0.0) {
            throw InvalidInput("dataset: observation times must be finite and >= 0");
        }
        if (!(o.t > prev)) {
            throw InvalidInput("dataset: observation times must be strictly increasing");
        }
        if (!std::isfinite(o.load) || o.load < 0.0) {
            throw InvalidInput("dataset: viral loads must be finite and >= 0");
        }
        prev = o.t;
    }
}

// Dataset CSV: header `t_days,hbv_dna_per_ml`, `#` starts a comment line.
inline Dataset read_dataset_csv(std::istream& is, std::string label = "") {
    Dataset d;
    d.label = std::move(label);
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (!header_seen) {
            if (line != "t_days,hbv_dna_per_ml") {
                throw UsageError("dataset CSV: expected header t_days,hbv_dna_per_ml, got: " +
                                 line);
            }
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        std::string t_field, v_field;
        if (!std::getline(row, t_field, ',') || !std::getline(row, v_field)) {
            throw UsageError("dataset CSV: malformed row: " + line);
        }
        try {
            d.observations.push_back({std::stod(t_field), std::stod(v_field)});
        } catch (const std::exception&) {
            throw UsageError("dataset CSV: non-numeric row: " + line);
        }
    }
    if (!header_seen) {
        throw UsageError("dataset CSV: missing header");
    }
    validate(d);
    return d;
}

inline Dataset read_dataset_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw UsageError("cannot open dataset file: " + path);
    }
    return read_dataset_csv(f, path);
}

inline void write_dataset_csv(std::ostream& os, const Dataset& d) {
    if (!d.label.empty()) {
        os << "# " << d.label << '\n';
    }
    os << "t_days,hbv_dna_per_ml\n";
    for (const Observation& o : d.observations) {
        os << fmt17(o.t) << ',' << fmt17(o.load) << '\n';
    }
}

} // namespace hbv

#endif

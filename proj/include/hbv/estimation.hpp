#ifndef HBV_ESTIMATION_HPP
#define HBV_ESTIMATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "hbv/errors.hpp"
#include "hbv/integrator.hpp"
#include "hbv/io.hpp"
#include "hbv/model.hpp"
#include "hbv/rng.hpp"

// Calibration of the rate constants against viral-load time series: the
// measured HBV DNA concentration is mapped to the free-virion compartment V.

namespace hbv {

enum class ObjectiveSpace { Raw, Log10 };

inline const char* to_string(ObjectiveSpace s) {
    return s == ObjectiveSpace::Raw ? "raw" : "log10";
}

inline ObjectiveSpace objective_space_from_string(std::string_view s) {
    if (s == "raw") return ObjectiveSpace::Raw;
    if (s == "log10") return ObjectiveSpace::Log10;
    throw UsageError("unknown objective space: " + std::string(s) + " (expected raw or log10)");
}

namespace detail {

inline double min_observation_gap(const Dataset& d) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < d.observations.size(); ++i) {
        gap = std::min(gap, d.observations[i].t - d.observations[i - 1].t);
    }
    return gap;
}

inline std::size_t nearest_index(const std::vector<double>& times, double t) {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0;
    if (it == times.end()) return times.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - times.begin());
    return (t - times[hi - 1] <= times[hi] - t) ? hi - 1 : hi;
}

} // namespace detail

// Default initial state for calibration runs: healthy liver at lambda/mu,
// no infected cells or capsids, virions at the inoculum (first observation).
inline State calibration_initial_state(const ModelParams& p, const Dataset& d) {
    validate(d);
    if (!(p.mu > 0.0)) {
        throw DegenerateParameter("calibration initial state needs mu > 0");
    }
    return State(p.lambda / p.mu, 0.0, 0.0, d.observations.front().load);
}

// Simulation grid for a dataset: the horizon covers the last observation and
// the recording interval is at least 10x finer than the smallest gap between
// observations.
inline SimConfig calibration_sim_config(const Dataset& d, double step = 0.01) {
    validate(d);
    SimConfig cfg;
    cfg.t_start = 0.0;
    cfg.t_end = std::max(d.observations.back().t, step);
    const double record_interval = detail::min_observation_gap(d) / 10.0;
    cfg.step = std::isfinite(record_interval) ? std::min(step, record_interval) : step;
    cfg.output_every =
        std::isfinite(record_interval)
            ? std::max(1, static_cast<int>(std::floor(record_interval / cfg.step)))
            : 100;
    return cfg;
}

// Sum-of-squares error between observed loads and simulated V sampled at the
// nearest recorded time. In log10 space both sides pass through
// log10(x + 1) first.
inline double sse(const ModelParams& p, const Dataset& d, const State& initial,
                  const SimConfig& cfg, ObjectiveSpace space) {
    validate(d);
    if (cfg.t_end < d.observations.back().t || cfg.t_start > d.observations.front().t) {
        throw UsageError("sse: simulation horizon does not cover the observation times");
    }
    if (cfg.step * cfg.output_every > detail::min_observation_gap(d) / 10.0 * (1 + 1e-12)) {
        throw UsageError("sse: recording grid must be >= 10x finer than the minimum "
                         "observation gap");
    }
    Trajectory traj;
    try {
        traj = simulate(p, initial, cfg);
    } catch (const OverflowError& e) {
        std::string msg = std::string(e.what()) + " [params:";
        for (int i = 0; i < kNumParams; ++i) {
            msg += ' ';
            msg += kParamNames[i];
            msg += '=';
            msg += fmt17(p.get(static_cast<Param>(i)));
        }
        msg += ']';
        throw OverflowError(msg, e.time);
    }
    double total = 0.0;
    for (const Observation& o : d.observations) {
        const double sim_v = traj.states[detail::nearest_index(traj.times, o.t)][CompV];
        double diff;
        if (space == ObjectiveSpace::Log10) {
            diff = std::log10(o.load + 1.0) - std::log10(std::max(sim_v, 0.0) + 1.0);
        } else {
            diff = o.load - sim_v;
        }
        total += diff * diff;
    }
    return total;
}

struct FreeParam {
    Param which;
    double lower;
    double upper;
};

struct FitProblem {
    Dataset dataset;
    std::vector<FreeParam> free;          // box bounds, all positive
    ModelParams fixed = baseline_params(); // values of the non-free parameters
    std::optional<State> initial_state;    // defaults to calibration_initial_state
    ObjectiveSpace objective_space = ObjectiveSpace::Log10;
    double sim_step = 0.01;
};

inline void validate(const FitProblem& fp) {
    validate(fp.dataset);
    if (fp.dataset.observations.size() < 2) {
        throw InvalidInput("fit problem: need at least 2 observations");
    }
    validate(fp.fixed);
    for (const FreeParam& f : fp.free) {
        if (!(f.lower > 0.0) || !(f.upper > f.lower)) {
            throw InvalidInput(std::string("fit problem: bounds for ") +
                               kParamNames[static_cast<int>(f.which)] +
                               " must satisfy 0 < lower < upper");
        }
    }
}

struct OptimizerConfig {
    int restarts = 3;            // total Nelder-Mead runs, first one unjittered
    int max_iterations = 500;    // per run
    double initial_step = 0.15;  // simplex edge, in log-parameter units
    double jitter = 0.5;         // uniform jitter of the start point, log units
    std::uint64_t seed = 0;
};

struct FitResult {
    ModelParams params;
    double sse = 0.0;
    long evaluations = 0;
    bool converged = false;
    std::vector<double> residuals;  // per observation, in objective space
    std::vector<double> best_trace; // best objective value per iteration
};

namespace detail {

struct SimplexOutcome {
    std::vector<double> z;
    double value = std::numeric_limits<double>::infinity();
    bool converged = false;
};

// Nelder-Mead with box projection. Terminates when the simplex diameter in
// log space drops below 1e-8 or the objective spread below
// 1e-12 * (1 + |best|).
inline SimplexOutcome nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                  std::vector<double> z0, const std::vector<double>& lo,
                                  const std::vector<double>& hi, double initial_step,
                                  int max_iterations, long& evaluations,
                                  std::vector<double>* best_trace) {
    const std::size_t n = z0.size();
    const auto project = [&](std::vector<double> z) {
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = std::clamp(z[i], lo[i], hi[i]);
        }
        return z;
    };

    std::vector<std::vector<double>> pts;
    pts.push_back(project(std::move(z0)));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> q = pts[0];
        q[i] = std::clamp(q[i] + initial_step, lo[i], hi[i]);
        if (q[i] == pts[0][i]) {
            q[i] = std::clamp(pts[0][i] - initial_step, lo[i], hi[i]);
        }
        pts.push_back(std::move(q));
    }
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        fv[i] = f(pts[i]);
        ++evaluations;
    }

    SimplexOutcome out;
    for (int iter = 0; iter < max_iterations; ++iter) {
        std::vector<std::size_t> order(n + 1);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> spts(n + 1);
        std::vector<double> sfv(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            spts[i] = pts[order[i]];
            sfv[i] = fv[order[i]];
        }
        pts.swap(spts);
        fv.swap(sfv);
        if (best_trace) {
            best_trace->push_back(fv[0]);
        }

        double diameter = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                diameter = std::max(diameter, std::abs(pts[i][j] - pts[0][j]));
            }
        }
        const bool flat = std::isfinite(fv[0]) &&
                          std::abs(fv[n] - fv[0]) < 1e-12 * (1.0 + std::abs(fv[0]));
        if (diameter < 1e-8 || flat) {
            out.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                centroid[j] += pts[i][j];
            }
        }
        for (double& c : centroid) {
            c /= static_cast<double>(n);
        }
        const auto affine = [&](const std::vector<double>& towards, double w) {
            std::vector<double> q(n);
            for (std::size_t j = 0; j < n; ++j) {
                q[j] = centroid[j] + w * (towards[j] - centroid[j]);
            }
            return project(std::move(q));
        };

        const std::vector<double> xr = affine(pts[n], -1.0);
        const double fr = f(xr);
        ++evaluations;
        if (fr < fv[0]) {
            const std::vector<double> xe = affine(xr, 2.0);
            const double fe = f(xe);
            ++evaluations;
            if (fe < fr) {
                pts[n] = xe;
                fv[n] = fe;
            } else {
                pts[n] = xr;
                fv[n] = fr;
            }
        } else if (fr < fv[n - 1]) {
            pts[n] = xr;
            fv[n] = fr;
        } else {
            const bool outside = fr < fv[n];
            const std::vector<double> xc = affine(outside ? xr : pts[n], 0.5);
            const double fc = f(xc);
            ++evaluations;
            if (fc < (outside ? fr : fv[n])) {
                pts[n] = xc;
                fv[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                        pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                    }
                    pts[i] = project(std::move(pts[i]));
                    fv[i] = f(pts[i]);
                    ++evaluations;
                }
            }
        }
    }
    const std::size_t best =
        static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    out.z = pts[best];
    out.value = fv[best];
    return out;
}

} // namespace detail

// Derivative-free calibration: Nelder-Mead over the logarithms of the free
// parameters, box bounds enforced by projection, best of `restarts` runs with
// jittered starting points.
inline FitResult fit(const FitProblem& problem, const OptimizerConfig& opt = {}) {
    validate(problem);
    const SimConfig cfg = calibration_sim_config(problem.dataset, problem.sim_step);
    const std::size_t n = problem.free.size();

    const auto assemble = [&](const std::vector<double>& z) {
        ModelParams p = problem.fixed;
        for (std::size_t i = 0; i < n; ++i) {
            p.set(problem.free[i].which, std::exp(z[i]));
        }
        return p;
    };
    const auto initial_for = [&](const ModelParams& p) {
        return problem.initial_state ? *problem.initial_state
                                     : calibration_initial_state(p, problem.dataset);
    };
    const auto objective = [&](const std::vector<double>& z) {
        const ModelParams p = assemble(z);
        try {
            validate(p);
            return sse(p, problem.dataset, initial_for(p), cfg, problem.objective_space);
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    FitResult result;
    if (n == 0) {
        result.params = problem.fixed;
        result.sse = sse(result.params, problem.dataset, initial_for(result.params), cfg,
                         problem.objective_space);
        result.evaluations = 1;
        result.converged = true;
    } else {
        std::vector<double> lo(n), hi(n), mid(n);
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = std::log(problem.free[i].lower);
            hi[i] = std::log(problem.free[i].upper);
            mid[i] = 0.5 * (lo[i] + hi[i]);
        }

        Rng rng(opt.seed);
        detail::SimplexOutcome best;
        bool have_best = false;
        long evaluations = 0;
        for (int r = 0; r < std::max(1, opt.restarts); ++r) {
            std::vector<double> z0 = mid;
            if (r > 0) {
                for (std::size_t i = 0; i < n; ++i) {
                    z0[i] += rng.uniform(-opt.jitter, opt.jitter);
                }
            }
            std::vector<double> trace;
            detail::SimplexOutcome run = detail::nelder_mead(
                objective, std::move(z0), lo, hi, opt.initial_step, opt.max_iterations,
                evaluations, &trace);
            if (std::isfinite(run.value) && (!have_best || run.value < best.value)) {
                best = run;
                have_best = true;
                result.best_trace = std::move(trace); // trace of the winning run
            }
        }
        if (!have_best) {
            throw FitFailure("fit: no restart produced a finite objective");
        }
        result.params = assemble(best.z);
        result.sse = objective(best.z);
        result.evaluations = evaluations;
        result.converged = best.converged;
    }

    // Per-observation residuals in the objective space, at the fitted point.
    const Trajectory traj =
        simulate(result.params, initial_for(result.params), cfg);
    for (const Observation& o : problem.dataset.observations) {
        const double sim_v = traj.states[detail::nearest_index(traj.times, o.t)][CompV];
        if (problem.objective_space == ObjectiveSpace::Log10) {
            result.residuals.push_back(std::log10(o.load + 1.0) -
                                       std::log10(std::max(sim_v, 0.0) + 1.0));
        } else {
            result.residuals.push_back(o.load - sim_v);
        }
    }
    return result;
}

// Arithmetic mean of each parameter over a set of fits.
inline ModelParams average_params(const std::vector<FitResult>& results) {
    if (results.empty()) {
        throw UsageError("average_params: empty result list");
    }
    ModelParams avg = results.front().params;
    for (int i = 0; i < kNumParams; ++i) {
        const Param which = static_cast<Param>(i);
        double sum = 0.0;
        for (const FitResult& r : results) {
            sum += r.params.get(which);
        }
        avg.set(which, sum / static_cast<double>(results.size()));
    }
    return avg;
}

// Samples the model's own V(t) at the given times, optionally perturbed by
// multiplicative lognormal noise exp(sigma * Z).
inline Dataset synthetic_dataset(const ModelParams& p, const State& initial,
                                 const std::vector<double>& times, double noise_sigma = 0.0,
                                 std::uint64_t seed = 0, std::string label = "synthetic") {
    if (times.empty()) {
        throw UsageError("synthetic_dataset: no sample times");
    }
    SimConfig cfg;
    cfg.t_start = 0.0;
    cfg.t_end = std::max(times.back(), cfg.step);
    cfg.output_every = 1;
    const Trajectory traj = simulate(p, initial, cfg);
    Rng rng(seed);
    Dataset d;
    d.label = std::move(label);
    for (const double t : times) {
        double v = traj.states[detail::nearest_index(traj.times, t)][CompV];
        if (noise_sigma > 0.0) {
            v *= std::exp(noise_sigma * rng.normal());
        }
        d.observations.push_back({t, v});
    }
    validate(d);
    return d;
}

} // namespace hbv

#endif

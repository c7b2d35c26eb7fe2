#ifndef HBV_INTEGRATOR_HPP
#define HBV_INTEGRATOR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "hbv/errors.hpp"
#include "hbv/model.hpp"
#include "hbv/params.hpp"

namespace hbv {

enum class NegativityPolicy { Reject, ClampToZero };

inline const char* to_string(NegativityPolicy p) {
    return p == NegativityPolicy::Reject ? "reject" : "clamp-to-zero";
}

inline NegativityPolicy negativity_policy_from_string(std::string_view s) {
    if (s == "reject") return NegativityPolicy::Reject;
    if (s == "clamp-to-zero") return NegativityPolicy::ClampToZero;
    throw UsageError("unknown negativity policy: " + std::string(s) +
                     " (expected reject or clamp-to-zero)");
}

template <typename Scalar>
struct SimConfigT {
    Scalar t_start = Scalar(0);
    Scalar t_end = Scalar(500);
    Scalar step = Scalar(0.01);
    int output_every = 100; // record every n-th step
    Scalar convergence_epsilon = Scalar(1e-6);
    NegativityPolicy negativity_policy = NegativityPolicy::Reject;
};

using SimConfig = SimConfigT<double>;

template <typename Scalar>
void validate(const SimConfigT<Scalar>& c) {
    if (!(c.step > Scalar(0)) || !std::isfinite(static_cast<double>(c.step))) {
        throw InvalidInput("sim config: step must be finite and > 0");
    }
    if (!(c.t_end > c.t_start)) {
        throw InvalidInput("sim config: t_end must be > t_start");
    }
    if ((c.t_end - c.t_start) / c.step > Scalar(1e8)) {
        throw InvalidInput("sim config: more than 1e8 steps requested");
    }
    if (c.output_every < 1) {
        throw InvalidInput("sim config: output_every must be >= 1");
    }
    if (!(c.convergence_epsilon > Scalar(0))) {
        throw InvalidInput("sim config: convergence_epsilon must be > 0");
    }
}

// Classical four-stage Runge-Kutta update. h = 0 returns the input state.
template <typename Scalar>
StateT<Scalar> rk4_step(const ModelParamsT<Scalar>& p, const StateT<Scalar>& s, Scalar h) {
    if (!(h >= Scalar(0)) || !std::isfinite(static_cast<double>(h))) {
        throw InvalidInput("rk4_step: h must be finite and >= 0");
    }
    const StateT<Scalar> k1 = rhs(p, s);
    const StateT<Scalar> s2 = s + (h / Scalar(2)) * k1;
    if (!s2.allFinite()) throw OverflowError("rk4_step: non-finite stage value", 0.0);
    const StateT<Scalar> k2 = rhs(p, s2);
    const StateT<Scalar> s3 = s + (h / Scalar(2)) * k2;
    if (!s3.allFinite()) throw OverflowError("rk4_step: non-finite stage value", 0.0);
    const StateT<Scalar> k3 = rhs(p, s3);
    const StateT<Scalar> s4 = s + h * k3;
    if (!s4.allFinite()) throw OverflowError("rk4_step: non-finite stage value", 0.0);
    const StateT<Scalar> k4 = rhs(p, s4);
    return s + (h / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

template <typename Scalar>
struct PeakT {
    Scalar time;
    Scalar value;
};

template <typename Scalar>
struct ConvergedPointT {
    StateT<Scalar> state; // state at the end of the first stable window
    Scalar time;          // time at the start of that window
};

template <typename Scalar>
struct TrajectoryT {
    std::vector<Scalar> times;
    std::vector<StateT<Scalar>> states;
    std::optional<ConvergedPointT<Scalar>> converged_to;
    std::array<PeakT<Scalar>, 4> peaks; // tracked over every step taken
};

using Trajectory = TrajectoryT<double>;
using ConvergedPoint = ConvergedPointT<double>;

namespace detail {

// Steady state is declared when, over a trailing window of 50 recorded
// points, every compartment's range stays below epsilon relative to its
// current magnitude (with a floor of one unit for compartments at zero).
inline constexpr int kConvergenceWindow = 50;

template <typename Scalar>
void detect_convergence(TrajectoryT<Scalar>& traj, Scalar epsilon) {
    const std::size_t n = traj.states.size();
    if (n < static_cast<std::size_t>(kConvergenceWindow)) {
        return;
    }
    for (std::size_t end = kConvergenceWindow - 1; end < n; ++end) {
        const std::size_t begin = end - (kConvergenceWindow - 1);
        bool ok = true;
        for (int comp = 0; comp < 4 && ok; ++comp) {
            Scalar lo = traj.states[begin][comp], hi = lo;
            for (std::size_t i = begin + 1; i <= end; ++i) {
                lo = std::min(lo, traj.states[i][comp]);
                hi = std::max(hi, traj.states[i][comp]);
            }
            const Scalar ref =
                std::max(std::abs(traj.states[end][comp]), Scalar(1));
            ok = (hi - lo) <= epsilon * ref;
        }
        if (ok) {
            traj.converged_to =
                ConvergedPointT<Scalar>{traj.states[end], traj.times[begin]};
            return;
        }
    }
}

} // namespace detail

// Fixed-step RK4 over [t_start, t_end], recording every output_every-th step
// (the final state is always recorded). A last partial step lands exactly on
// t_end when the horizon is not a multiple of the step.
template <typename Scalar>
TrajectoryT<Scalar> simulate(const ModelParamsT<Scalar>& p, const StateT<Scalar>& initial,
                             const SimConfigT<Scalar>& cfg) {
    validate(p);
    validate(cfg);
    if (!initial.allFinite() || (initial.array() < Scalar(0)).any()) {
        throw InvalidInput("simulate: initial state must be finite and non-negative");
    }

    const Scalar span = cfg.t_end - cfg.t_start;
    std::int64_t n_full = static_cast<std::int64_t>(std::floor(
        static_cast<double>(span / cfg.step) + 1e-9));
    Scalar tail = span - Scalar(n_full) * cfg.step;
    if (!(tail > cfg.step * Scalar(1e-12))) {
        tail = Scalar(0);
    }

    TrajectoryT<Scalar> traj;
    const std::size_t n_records = static_cast<std::size_t>(n_full / cfg.output_every) + 3;
    traj.times.reserve(n_records);
    traj.states.reserve(n_records);

    StateT<Scalar> s = initial;
    StateT<Scalar> scale = initial.cwiseAbs().cwiseMax(Scalar(1));
    for (int c = 0; c < 4; ++c) {
        traj.peaks[c] = PeakT<Scalar>{cfg.t_start, initial[c]};
    }
    traj.times.push_back(cfg.t_start);
    traj.states.push_back(s);

    const std::int64_t n_total = n_full + (tail > Scalar(0) ? 1 : 0);
    for (std::int64_t i = 1; i <= n_total; ++i) {
        const bool is_tail = i > n_full;
        const Scalar h = is_tail ? tail : cfg.step;
        const Scalar t = is_tail ? cfg.t_end : cfg.t_start + Scalar(i) * cfg.step;
        try {
            s = rk4_step(p, s, h);
        } catch (const OverflowError&) {
            throw OverflowError("simulate: overflow at t = " + std::to_string(static_cast<double>(t)),
                                static_cast<double>(t));
        }
        if (!s.allFinite()) {
            throw OverflowError("simulate: overflow at t = " + std::to_string(static_cast<double>(t)),
                                static_cast<double>(t));
        }

        if (cfg.negativity_policy == NegativityPolicy::ClampToZero) {
            s = s.cwiseMax(Scalar(0));
        } else {
            for (int c = 0; c < 4; ++c) {
                if (s[c] < Scalar(-1e-9) * scale[c]) {
                    std::ostringstream msg;
                    msg << "simulate: compartment " << kCompNames[c] << " negative ("
                        << static_cast<double>(s[c]) << ") at t = " << static_cast<double>(t);
                    throw NegativityError(msg.str(), static_cast<double>(t));
                }
            }
        }
        scale = scale.cwiseMax(s.cwiseAbs());

        for (int c = 0; c < 4; ++c) {
            if (s[c] > traj.peaks[c].value) {
                traj.peaks[c] = PeakT<Scalar>{t, s[c]};
            }
        }
        if (i % cfg.output_every == 0 || i == n_total) {
            traj.times.push_back(t);
            traj.states.push_back(s);
        }
    }

    detail::detect_convergence(traj, cfg.convergence_epsilon);
    return traj;
}

// Outcome of checking a trajectory against the invariant-set bounds.
template <typename Scalar>
struct BoundViolationT {
    Scalar time;
    std::string quantity; // "X+Y", "D" or "V"
    Scalar value;
    Scalar bound;
};

template <typename Scalar>
struct BoundCheckReportT {
    ThresholdsT<Scalar> thresholds;
    bool initial_inside;  // whether the first recorded state lies in the set
    bool passed;
    std::optional<BoundViolationT<Scalar>> violation;
};

using BoundCheckReport = BoundCheckReportT<double>;

// For trajectories starting inside the positively invariant set the bounds
// must hold at every recorded point (slack 1e-6). Otherwise the bounds are
// limsup statements and only the trailing 20% of the horizon is checked.
template <typename Scalar>
BoundCheckReportT<Scalar> check_bounds(const ModelParamsT<Scalar>& p,
                                       const TrajectoryT<Scalar>& traj) {
    if (traj.states.empty()) {
        throw UsageError("check_bounds: empty trajectory");
    }
    BoundCheckReportT<Scalar> rep;
    rep.thresholds = compute_thresholds(p);
    const Scalar slack = Scalar(1) + Scalar(1e-6);

    const StateT<Scalar>& first = traj.states.front();
    rep.initial_inside = first[CompX] + first[CompY] <= rep.thresholds.bound_xy &&
                         first[CompD] <= rep.thresholds.bound_d &&
                         first[CompV] <= rep.thresholds.bound_v;

    const Scalar t0 = traj.times.front();
    const Scalar t1 = traj.times.back();
    const Scalar tail_from = t0 + Scalar(0.8) * (t1 - t0);

    rep.passed = true;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        if (!rep.initial_inside && traj.times[i] < tail_from) {
            continue;
        }
        const StateT<Scalar>& s = traj.states[i];
        const std::array<std::pair<const char*, std::pair<Scalar, Scalar>>, 3> checks = {{
            {"X+Y", {s[CompX] + s[CompY], rep.thresholds.bound_xy}},
            {"D", {s[CompD], rep.thresholds.bound_d}},
            {"V", {s[CompV], rep.thresholds.bound_v}},
        }};
        for (const auto& [name, vb] : checks) {
            if (vb.first > vb.second * slack) {
                rep.passed = false;
                rep.violation =
                    BoundViolationT<Scalar>{traj.times[i], name, vb.first, vb.second};
                return rep;
            }
        }
    }
    return rep;
}

} // namespace hbv

#endif

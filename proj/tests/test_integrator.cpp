#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hbv/integrator.hpp"
#include "hbv/io.hpp"
#include "hbv/model.hpp"
#include "support.hpp"

using namespace hbv;
using testsupport::ParamSampler;
using testsupport::rel_err;

namespace {
const ModelParams kBase = baseline_params();

SimConfig daily_config(double t_end, double step = 0.01) {
    SimConfig cfg;
    cfg.t_end = t_end;
    cfg.step = step;
    cfg.output_every = static_cast<int>(std::lround(1.0 / step));
    return cfg;
}
} // namespace

TEST_SUITE_BEGIN("integrator");

TEST_CASE("rk4_step with h = 0 returns the input state bitwise") {
    const State s = ic1();
    const State out = rk4_step(kBase, s, 0.0);
    for (int i = 0; i < 4; ++i) {
        CHECK(out[i] == s[i]);
    }
}

TEST_CASE("rk4_step rejects negative or non-finite h") {
    CHECK_THROWS_AS(rk4_step(kBase, ic1(), -0.01), InvalidInput);
    CHECK_THROWS_AS(rk4_step(kBase, ic1(), std::nan("")), InvalidInput);
}

TEST_CASE("uninfected subspace stays invariant bitwise") {
    const State start(1.0e8, 0.0, 0.0, 0.0);
    State s = start;
    for (int i = 0; i < 1000; ++i) {
        s = rk4_step(kBase, s, 0.01);
        CHECK(s[CompY] == 0.0);
        CHECK(s[CompD] == 0.0);
        CHECK(s[CompV] == 0.0);
    }
    // X follows the scalar RK4 update for X' = lambda - mu X
    double x = start[CompX];
    for (int i = 0; i < 1000; ++i) {
        const double h = 0.01;
        const double k1 = kBase.lambda - kBase.mu * x;
        const double k2 = kBase.lambda - kBase.mu * (x + h / 2 * k1);
        const double k3 = kBase.lambda - kBase.mu * (x + h / 2 * k2);
        const double k4 = kBase.lambda - kBase.mu * (x + h * k3);
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    CHECK(rel_err(s[CompX], x) < 1e-13);
}

TEST_CASE("one rk4 step against the oversampled reference") {
    // The Richardson-extrapolated h/100 reference leaves the one-step local
    // truncation visible: at h = 0.01 the virion-clearance mode contributes
    // (c h)^5/120 ~ 8e-10 relative, so 1e-10 is only reachable at h = 0.001.
    const State one = rk4_step(kBase, ic1(), 0.01);
    const State ref = testsupport::richardson_reference(kBase, ic1(), 0.01);
    for (int i = 0; i < 4; ++i) {
        CHECK(rel_err(one[i], ref[i]) < 1e-9);
    }

    const State one_fine = rk4_step(kBase, ic1(), 0.001);
    const State ref_fine = testsupport::richardson_reference(kBase, ic1(), 0.001);
    for (int i = 0; i < 4; ++i) {
        CHECK(rel_err(one_fine[i], ref_fine[i]) < 1e-10);
    }
}

TEST_CASE("rk4 order: halving the step cuts the error by ~16") {
    const double horizon = 10.0;
    const State ref = testsupport::plain_integrate(kBase, ic1(), 0.1 / 256.0,
                                                   static_cast<long>(horizon / (0.1 / 256.0)));
    double prev = -1.0;
    std::vector<double> ratios;
    for (const double h : {0.1, 0.05, 0.025, 0.0125}) {
        SimConfig cfg;
        cfg.t_end = horizon;
        cfg.step = h;
        cfg.output_every = 1 << 20; // terminal state only
        const Trajectory traj = simulate(kBase, ic1(), cfg);
        const double err = testsupport::state_rel_err(traj.states.back(), ref);
        if (prev > 0.0) {
            ratios.push_back(prev / err);
        }
        prev = err;
    }
    REQUIRE(ratios.size() == 3);
    for (const double r : ratios) {
        CHECK(r > 12.0);
        CHECK(r < 20.0);
    }
}

TEST_CASE("simulation from E_u is a constant trajectory converged at t_start") {
    const State dfe = disease_free_equilibrium(kBase);
    const Trajectory traj = simulate(kBase, dfe, daily_config(100.0));
    for (const State& s : traj.states) {
        for (int i = 0; i < 4; ++i) {
            CHECK(s[i] == dfe[i]);
        }
    }
    REQUIRE(traj.converged_to.has_value());
    CHECK(traj.converged_to->time == 0.0);
    CHECK(traj.converged_to->state[CompX] == dfe[CompX]);
}

TEST_CASE("clearance scenario decays to the disease-free state") {
    ModelParams p = kBase;
    p.k = 3.38e-13;
    const Trajectory traj = simulate(p, ic1(), daily_config(500.0));
    const State dfe = disease_free_equilibrium(p);
    CHECK(testsupport::state_rel_err(traj.states.back(), dfe) < 0.005);

    // virions rise before clearing: interior peak
    CHECK(traj.peaks[CompV].time > 0.0);
    CHECK(traj.peaks[CompV].time < 500.0);
    CHECK(traj.peaks[CompV].value > ic1()[CompV]);
    // capsids at ic1 start above their quasi-steady level and only decay:
    // dD(0) = a Y0 - R_s D0 < 0, so the D peak sits at t_start
    CHECK(traj.peaks[CompD].time == 0.0);
    REQUIRE(traj.converged_to.has_value());
}

TEST_CASE("unbounded regime: D grows until overflow or horizon end") {
    ModelParams p = kBase;
    p.gamma = 20.0;
    p.alpha = 0.5;
    CHECK(compute_rs(p) < 0.0);

    // short horizon, clamped negativity: monotone growth by 1000x
    SimConfig cfg = daily_config(2.0, 0.01);
    cfg.output_every = 10;
    cfg.negativity_policy = NegativityPolicy::ClampToZero;
    const Trajectory traj = simulate(p, ic1(), cfg);
    for (std::size_t i = 1; i < traj.states.size(); ++i) {
        CHECK(traj.states[i][CompD] >= traj.states[i - 1][CompD]);
    }
    CHECK(traj.states.back()[CompD] > 1e3 * ic1()[CompD]);

    // long horizon ends in a controlled overflow error
    SimConfig longcfg = daily_config(1000.0, 0.01);
    longcfg.negativity_policy = NegativityPolicy::ClampToZero;
    CHECK_THROWS_AS(simulate(p, ic1(), longcfg), OverflowError);
}

TEST_CASE("negativity policies") {
    ModelParams p = kBase;
    p.gamma = 20.0;
    p.alpha = 0.5; // blow-up makes RK4 overshoot X and Y below zero
    SimConfig cfg = daily_config(50.0, 0.01);
    cfg.negativity_policy = NegativityPolicy::Reject;
    CHECK_THROWS_AS(simulate(p, ic1(), cfg), NegativityError);
    try {
        simulate(p, ic1(), cfg);
    } catch (const NegativityError& e) {
        CHECK(e.time > 0.0);
        CHECK(std::string(e.what()).find("at t = ") != std::string::npos);
    }

    cfg.negativity_policy = NegativityPolicy::ClampToZero;
    SimConfig short_cfg = cfg;
    short_cfg.t_end = 6.0;
    const Trajectory clamped = simulate(p, ic1(), short_cfg);
    for (const State& s : clamped.states) {
        CHECK(s.minCoeff() >= 0.0);
    }
}

TEST_CASE("times are an arithmetic grid and a partial last step lands on t_end") {
    SimConfig cfg;
    cfg.t_end = 1.05;
    cfg.step = 0.1;
    cfg.output_every = 1;
    const Trajectory traj = simulate(kBase, ic1(), cfg);
    REQUIRE(traj.times.size() == 12);
    CHECK(traj.times.front() == 0.0);
    CHECK(traj.times.back() == 1.05);
    for (std::size_t i = 1; i + 1 < traj.times.size(); ++i) {
        CHECK(traj.times[i] == doctest::Approx(0.1 * static_cast<double>(i)).epsilon(1e-12));
    }
    for (std::size_t i = 1; i < traj.times.size(); ++i) {
        CHECK(traj.times[i] > traj.times[i - 1]);
    }
}

TEST_CASE("config validation") {
    SimConfig cfg;
    cfg.step = 0.0;
    CHECK_THROWS_AS(validate(cfg), InvalidInput);
    cfg = SimConfig{};
    cfg.t_end = cfg.t_start;
    CHECK_THROWS_AS(validate(cfg), InvalidInput);
    cfg = SimConfig{};
    cfg.step = 1e-9;
    cfg.t_end = 1e3;
    CHECK_THROWS_AS(validate(cfg), InvalidInput); // > 1e8 steps
    cfg = SimConfig{};
    cfg.output_every = 0;
    CHECK_THROWS_AS(validate(cfg), InvalidInput);
    CHECK_THROWS_AS(simulate(kBase, State(-1.0, 0.0, 0.0, 0.0), SimConfig{}), InvalidInput);
}

TEST_CASE("bounds: trajectories inside the invariant set stay inside") {
    // start inside D: componentwise under the limsup bounds
    const Thresholds t = compute_thresholds(kBase);
    const State inside(0.5 * t.bound_xy, 0.25 * t.bound_xy, 0.5 * t.bound_d, 0.5 * t.bound_v);
    const Trajectory traj = simulate(kBase, inside, daily_config(1000.0));
    const BoundCheckReport rep = check_bounds(kBase, traj);
    CHECK(rep.initial_inside);
    CHECK(rep.passed);
    CHECK(!rep.violation.has_value());
}

TEST_CASE("bounds: trajectory from E_u passes") {
    const Trajectory traj = simulate(kBase, disease_free_equilibrium(kBase), daily_config(50.0));
    const BoundCheckReport rep = check_bounds(kBase, traj);
    CHECK(rep.initial_inside);
    CHECK(rep.passed);
}

TEST_CASE("bounds: ic3 starts outside, only the tail is checked") {
    const Thresholds t = compute_thresholds(kBase);
    CHECK(ic3()[CompX] + ic3()[CompY] > t.bound_xy);
    const Trajectory traj = simulate(kBase, ic3(), daily_config(600.0));
    const BoundCheckReport rep = check_bounds(kBase, traj);
    CHECK(!rep.initial_inside);
    CHECK(rep.passed); // the tail has settled near E_u, inside the set
}

TEST_CASE("bounds require the bounded regime") {
    ModelParams p = kBase;
    p.gamma = 20.0;
    p.alpha = 0.5;
    SimConfig cfg = daily_config(1.0, 0.01);
    cfg.negativity_policy = NegativityPolicy::ClampToZero;
    const Trajectory traj = simulate(p, ic1(), cfg);
    CHECK_THROWS_AS(check_bounds(p, traj), ThresholdViolation);
}

TEST_CASE("lyapunov descent along trajectories") {
    // clearance regime: L1 non-increasing
    ModelParams p = kBase;
    p.k = 3.38e-13;
    Trajectory traj = simulate(p, ic1(), daily_config(300.0));
    double l_prev = lyapunov_l1(p, traj.states.front());
    const double tol1 = 1e-9 * l_prev;
    for (const State& s : traj.states) {
        const double l = lyapunov_l1(p, s);
        CHECK(l <= l_prev + tol1);
        l_prev = l;
    }

    // chronic regime: L2 non-increasing over positive states
    p = kBase;
    p.k = 3.38e-11;
    traj = simulate(p, ic1(), daily_config(300.0));
    l_prev = lyapunov_l2(p, traj.states.front());
    const double tol2 = 1e-9 * l_prev;
    for (const State& s : traj.states) {
        if (s.minCoeff() <= 0.0) {
            continue;
        }
        const double l = lyapunov_l2(p, s);
        CHECK(l <= l_prev + tol2);
        l_prev = l;
    }
}

TEST_CASE("dichotomy at desk scale") {
    ParamSampler sampler(6060);
    SimConfig cfg = daily_config(2000.0);
    for (int i = 0; i < 5; ++i) {
        const ModelParams p = sampler.sample(0.15, 0.95);
        const State start = disease_free_equilibrium(p) * 0.9 +
                            State(0.0, 1e6, 1e8, 1e7);
        const Trajectory traj = simulate(p, start, cfg);
        CHECK(testsupport::state_rel_err(traj.states.back(),
                                         disease_free_equilibrium(p)) < 0.01);
    }
    for (int i = 0; i < 5; ++i) {
        const ModelParams p = sampler.sample(1.05, 4.0);
        const State start = disease_free_equilibrium(p) * 0.9 +
                            State(0.0, 1e6, 1e8, 1e7);
        const Trajectory traj = simulate(p, start, cfg);
        CHECK(testsupport::state_rel_err(traj.states.back(), endemic_equilibrium(p)) < 0.01);
    }
}

TEST_CASE("trajectory CSV format") {
    SimConfig cfg;
    cfg.t_end = 0.02;
    cfg.step = 0.01;
    cfg.output_every = 1;
    const Trajectory traj = simulate(kBase, ic1(), cfg);
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,X,Y,D,V");
    std::getline(is, line);
    CHECK(line == "0,256000000,99000000,16000000000,3690000000");
    int rows = 1;
    while (std::getline(is, line)) {
        ++rows;
    }
    CHECK(rows == 3);
    CHECK(os.str().find("\r") == std::string::npos);
}

TEST_SUITE_END();

#ifndef HBV_TESTS_SUPPORT_HPP
#define HBV_TESTS_SUPPORT_HPP

// Test-only oracles: independent implementations used to cross-check the
// library. Nothing here may call the code path it verifies.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <vector>

#include "hbv/model.hpp"
#include "hbv/params.hpp"
#include "hbv/rng.hpp"

namespace testsupport {

using hbv::ModelParams;
using hbv::State;

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::abs(want);
}

// Largest componentwise deviation relative to the largest component of want.
inline double state_rel_err(const State& got, const State& want) {
    return (got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff();
}

// Neumaier compensated summation.
inline double compensated_sum(std::initializer_list<double> terms) {
    double sum = 0.0, comp = 0.0;
    for (const double t : terms) {
        const double next = sum + t;
        if (std::abs(sum) >= std::abs(t)) {
            comp += (sum - next) + t;
        } else {
            comp += (t - next) + sum;
        }
        sum = next;
    }
    return sum + comp;
}

// Plain-array RK4, written independently of the library integrator.
inline std::array<double, 4> plain_rhs(const ModelParams& p, const std::array<double, 4>& s) {
    return {p.lambda - p.mu * s[0] - p.k * s[3] * s[0],
            p.k * s[3] * s[0] - p.delta * s[1],
            p.a * s[1] + p.gamma * (1.0 - p.alpha) * s[2] - p.alpha * p.beta * s[2] -
                p.delta * s[2],
            p.alpha * p.beta * s[2] - p.c * s[3]};
}

inline std::array<double, 4> plain_rk4_step(const ModelParams& p, std::array<double, 4> s,
                                            double h) {
    const auto axpy = [&](const std::array<double, 4>& base, const std::array<double, 4>& d,
                          double w) {
        std::array<double, 4> out;
        for (int i = 0; i < 4; ++i) {
            out[i] = base[i] + w * d[i];
        }
        return out;
    };
    const auto k1 = plain_rhs(p, s);
    const auto k2 = plain_rhs(p, axpy(s, k1, h / 2));
    const auto k3 = plain_rhs(p, axpy(s, k2, h / 2));
    const auto k4 = plain_rhs(p, axpy(s, k3, h));
    for (int i = 0; i < 4; ++i) {
        s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return s;
}

inline State plain_integrate(const ModelParams& p, const State& initial, double h, long steps) {
    std::array<double, 4> s = {initial[0], initial[1], initial[2], initial[3]};
    for (long i = 0; i < steps; ++i) {
        s = plain_rk4_step(p, s, h);
    }
    return State(s[0], s[1], s[2], s[3]);
}

// Richardson-extrapolated reference for one step of size h: composed fine
// sweeps at h/100 and h/200, combined at order 4.
inline State richardson_reference(const ModelParams& p, const State& initial, double h) {
    const State f100 = plain_integrate(p, initial, h / 100.0, 100);
    const State f200 = plain_integrate(p, initial, h / 200.0, 200);
    return (16.0 * f200 - f100) / 15.0;
}

// Central-difference Jacobian with per-component step 1e-6 * scale.
inline hbv::Mat4 fd_jacobian(const ModelParams& p, const State& s) {
    hbv::Mat4 j;
    for (int col = 0; col < 4; ++col) {
        const double step = 1e-6 * std::max(std::abs(s[col]), 1.0);
        State plus = s, minus = s;
        plus[col] += step;
        minus[col] -= step;
        const State diff = (hbv::rhs(p, plus) - hbv::rhs(p, minus)) / (2.0 * step);
        j.col(col) = diff;
    }
    return j;
}

// Central finite difference of ln R0 against ln p, relative step 1e-6.
inline double fd_log_elasticity(const ModelParams& p, hbv::Param which) {
    constexpr double rel = 1e-6;
    ModelParams hi = p, lo = p;
    hi.set(which, p.get(which) * (1.0 + rel));
    lo.set(which, p.get(which) * (1.0 - rel));
    return (std::log(hbv::compute_r0(hi)) - std::log(hbv::compute_r0(lo))) /
           (std::log1p(rel) - std::log1p(-rel));
}

// R0 via the next-generation construction: spectral radius of F V^-1 built
// from the infection and transition matrices at the disease-free state.
inline double next_generation_r0(const ModelParams& p) {
    Eigen::Matrix3d f = Eigen::Matrix3d::Zero();
    f(0, 2) = p.k * p.lambda / p.mu;
    Eigen::Matrix3d v = Eigen::Matrix3d::Zero();
    v(0, 0) = p.delta;
    v(1, 0) = -p.a;
    v(1, 1) = -p.gamma * (1.0 - p.alpha) + p.alpha * p.beta + p.delta;
    v(2, 1) = -p.alpha * p.beta;
    v(2, 2) = p.c;
    const Eigen::Matrix3d ngm = f * v.inverse();
    const Eigen::EigenSolver<Eigen::Matrix3d> solver(ngm, false);
    double radius = 0.0;
    for (int i = 0; i < 3; ++i) {
        radius = std::max(radius, std::abs(solver.eigenvalues()[i]));
    }
    return radius;
}

// Characteristic-polynomial coefficients from the eigenvalues (Vieta), the
// cross-check for the Faddeev-LeVerrier path.
inline std::array<double, 4> char_coeffs_from_eigenvalues(const hbv::Mat4& m) {
    const Eigen::EigenSolver<hbv::Mat4> solver(m, false);
    // Expand prod(x - root_e), coefficients kept leading-first.
    std::array<std::complex<double>, 5> c = {1.0, 0.0, 0.0, 0.0, 0.0};
    for (int e = 0; e < 4; ++e) {
        const std::complex<double> root = solver.eigenvalues()[e];
        for (int i = e + 1; i > 0; --i) {
            c[i] -= root * c[i - 1];
        }
    }
    return {c[1].real(), c[2].real(), c[3].real(), c[4].real()};
}

// Seeded sampler of admissible parameter sets around the default values.
// lambda is produced as mu times a sampled healthy-liver level and the pair
// is re-drawn until lambda/mu round-trips exactly in floating point, so the
// disease-free state is a floating-point fixed point of the dynamics.
class ParamSampler {
public:
    explicit ParamSampler(std::uint64_t seed) : rng_(seed) {}

    // r0 is drawn log-uniformly from [r0_lo, r0_hi] and k set from it.
    ModelParams sample(double r0_lo, double r0_hi) {
        const ModelParams base = hbv::baseline_params();
        ModelParams p = base;
        p.mu = base.mu * rng_.log_uniform(0.5, 2.0);
        p.a = base.a * rng_.log_uniform(0.5, 2.0);
        p.beta = base.beta * rng_.log_uniform(0.5, 2.0);
        p.delta = base.delta * rng_.log_uniform(0.5, 2.0);
        p.c = base.c * rng_.log_uniform(0.5, 2.0);
        p.alpha = rng_.uniform(0.4, 1.0);
        const double cap =
            p.alpha < 1.0 ? 0.9 * (p.alpha * p.beta + p.delta) / (1.0 - p.alpha) : 6.0;
        p.gamma = rng_.uniform(0.0, std::min(cap, 6.0));
        for (;;) {
            const double level = rng_.log_uniform(1e7, 1e10);
            p.lambda = p.mu * level;
            const double x0 = p.lambda / p.mu;
            if (p.lambda - p.mu * x0 == 0.0) {
                break;
            }
        }
        const double r0 = rng_.log_uniform(r0_lo, r0_hi);
        p.k = r0 * p.mu * p.c * p.delta * hbv::compute_rs(p) /
              (p.a * p.alpha * p.beta * p.lambda);
        return p;
    }

    hbv::Rng& rng() { return rng_; }

private:
    hbv::Rng rng_;
};

} // namespace testsupport

#endif

#ifndef HBV_MODEL_HPP
#define HBV_MODEL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "hbv/errors.hpp"
#include "hbv/params.hpp"

// Pure functions of the four-compartment dynamics:
//
//   X' = lambda - mu X - k V X
//   Y' = k V X - delta Y
//   D' = a Y + gamma (1 - alpha) D - alpha beta D - delta D
//   V' = alpha beta D - c V
//
// All thresholds and closed forms are kept in the R_s-factored arrangement,
// R_s = alpha beta - (1 - alpha) gamma + delta, which avoids the cancellation
// in the expanded denominator c (alpha beta delta - gamma delta +
// alpha gamma delta + delta^2).

namespace hbv {

template <typename Scalar>
StateT<Scalar> rhs(const ModelParamsT<Scalar>& p, const StateT<Scalar>& s) {
    if (!s.allFinite()) {
        throw InvalidInput("rhs: state has a non-finite component");
    }
    const Scalar x = s[CompX], y = s[CompY], d = s[CompD], v = s[CompV];
    StateT<Scalar> out;
    out[CompX] = p.lambda - p.mu * x - p.k * v * x;
    out[CompY] = p.k * v * x - p.delta * y;
    out[CompD] = p.a * y + p.gamma * (Scalar(1) - p.alpha) * d - p.alpha * p.beta * d - p.delta * d;
    out[CompV] = p.alpha * p.beta * d - p.c * v;
    return out;
}

// Componentwise |rhs| divided by the largest |summand| of the same equation.
// Zero where the equation has no non-zero summand.
template <typename Scalar>
StateT<Scalar> relative_residual(const ModelParamsT<Scalar>& p, const StateT<Scalar>& s) {
    using std::abs;
    const Scalar x = s[CompX], y = s[CompY], d = s[CompD], v = s[CompV];
    const StateT<Scalar> r = rhs(p, s);
    const std::array<std::array<Scalar, 4>, 4> summands = {{
        {p.lambda, p.mu * x, p.k * v * x, Scalar(0)},
        {p.k * v * x, p.delta * y, Scalar(0), Scalar(0)},
        {p.a * y, p.gamma * (Scalar(1) - p.alpha) * d, p.alpha * p.beta * d, p.delta * d},
        {p.alpha * p.beta * d, p.c * v, Scalar(0), Scalar(0)},
    }};
    StateT<Scalar> out;
    for (int i = 0; i < 4; ++i) {
        Scalar scale(0);
        for (const Scalar& t : summands[i]) {
            scale = std::max(scale, abs(t));
        }
        out[i] = scale > Scalar(0) ? abs(r[i]) / scale : abs(r[i]);
    }
    return out;
}

// Boundedness threshold R_s = alpha beta - (1 - alpha) gamma + delta.
template <typename Scalar>
Scalar compute_rs(const ModelParamsT<Scalar>& p) {
    validate(p);
    return p.alpha * p.beta - (Scalar(1) - p.alpha) * p.gamma + p.delta;
}

namespace detail {

template <typename Scalar>
[[noreturn]] void throw_threshold_violation(const ModelParamsT<Scalar>& p, Scalar rs) {
    std::ostringstream msg;
    msg << "R_s = " << static_cast<double>(rs)
        << " <= 0: capsid dynamics unbounded and threshold quantities undefined";
    if (p.alpha < Scalar(1)) {
        msg << "; choose gamma < (alpha*beta + delta)/(1 - alpha) = "
            << static_cast<double>((p.alpha * p.beta + p.delta) / (Scalar(1) - p.alpha));
    }
    throw ThresholdViolation(msg.str());
}

template <typename Scalar>
Scalar require_positive_rs(const ModelParamsT<Scalar>& p) {
    const Scalar rs = compute_rs(p);
    if (!(rs > Scalar(0))) {
        throw_threshold_violation(p, rs);
    }
    return rs;
}

template <typename Scalar>
void require_positive(Scalar v, const char* name) {
    if (!(v > Scalar(0))) {
        throw DegenerateParameter(std::string("parameter ") + name + " must be > 0 here");
    }
}

} // namespace detail

// Basic reproduction number R_0 = a k lambda alpha beta / (mu c delta R_s).
template <typename Scalar>
Scalar compute_r0(const ModelParamsT<Scalar>& p) {
    const Scalar rs = detail::require_positive_rs(p);
    detail::require_positive(p.mu, "mu");
    detail::require_positive(p.c, "c");
    detail::require_positive(p.delta, "delta");
    return p.a * p.k * p.lambda * p.alpha * p.beta / (p.mu * p.c * p.delta * rs);
}

// Death rate of uninfected hepatocytes at which R_0 crosses 1 (the
// transcritical bifurcation point in mu).
template <typename Scalar>
Scalar mu_star(const ModelParamsT<Scalar>& p) {
    const Scalar rs = detail::require_positive_rs(p);
    detail::require_positive(p.c, "c");
    detail::require_positive(p.delta, "delta");
    return p.a * p.k * p.alpha * p.beta * p.lambda / (rs * p.c * p.delta);
}

// Threshold quantities plus the limsup bounds of the positively invariant set:
//   X + Y <= lambda/rho,  D <= a lambda/(rho R_s),  V <= a lambda alpha beta/(rho c R_s)
// with rho = min(mu, delta).
template <typename Scalar>
struct ThresholdsT {
    Scalar rs;
    Scalar r0;
    Scalar mu_star;
    Scalar rho;       // min(mu, delta)
    Scalar bound_xy;  // limsup bound on X + Y
    Scalar bound_d;   // limsup bound on D
    Scalar bound_v;   // limsup bound on V
};

using Thresholds = ThresholdsT<double>;

template <typename Scalar>
ThresholdsT<Scalar> compute_thresholds(const ModelParamsT<Scalar>& p) {
    ThresholdsT<Scalar> t;
    t.rs = detail::require_positive_rs(p);
    t.r0 = compute_r0(p);
    t.mu_star = mu_star(p);
    t.rho = std::min(p.mu, p.delta);
    detail::require_positive(t.rho, "min(mu, delta)");
    t.bound_xy = p.lambda / t.rho;
    t.bound_d = p.a * p.lambda / (t.rho * t.rs);
    t.bound_v = p.a * p.lambda * p.alpha * p.beta / (t.rho * p.c * t.rs);
    return t;
}

// Disease-free equilibrium (lambda/mu, 0, 0, 0).
template <typename Scalar>
StateT<Scalar> disease_free_equilibrium(const ModelParamsT<Scalar>& p) {
    validate(p);
    if (!(p.mu > Scalar(0))) {
        throw DegenerateParameter("disease-free equilibrium undefined for mu = 0");
    }
    return StateT<Scalar>(p.lambda / p.mu, Scalar(0), Scalar(0), Scalar(0));
}

// Endemic equilibrium, valid for R_s > 0 and R_0 > 1:
//   X1 = c delta R_s / (a alpha beta k),   Y1 = (lambda - mu X1) / delta,
//   D1 = a Y1 / R_s,                       V1 = a alpha beta Y1 / (c R_s).
template <typename Scalar>
StateT<Scalar> endemic_equilibrium(const ModelParamsT<Scalar>& p) {
    const Scalar rs = detail::require_positive_rs(p);
    const Scalar r0 = compute_r0(p);
    if (!(r0 > Scalar(1))) {
        throw Nonexistence("endemic equilibrium does not exist for R_0 <= 1 (R_0 = " +
                               std::to_string(static_cast<double>(r0)) + ")",
                           static_cast<double>(r0));
    }
    const Scalar x1 = p.c * p.delta * rs / (p.a * p.alpha * p.beta * p.k);
    const Scalar y1 =
        (p.a * p.alpha * p.beta * p.k * p.lambda - p.c * p.delta * p.mu * rs) /
        (p.a * p.alpha * p.beta * p.delta * p.k);
    const Scalar d1 = p.a * y1 / rs;
    const Scalar v1 = p.a * p.alpha * p.beta * y1 / (p.c * rs);
    return StateT<Scalar>(x1, y1, d1, v1);
}

template <typename Scalar>
Mat4T<Scalar> jacobian(const ModelParamsT<Scalar>& p, const StateT<Scalar>& s) {
    validate(p);
    if (!s.allFinite()) {
        throw InvalidInput("jacobian: state has a non-finite component");
    }
    const Scalar x = s[CompX], v = s[CompV];
    Mat4T<Scalar> j = Mat4T<Scalar>::Zero();
    j(CompX, CompX) = -p.mu - p.k * v;
    j(CompX, CompV) = -p.k * x;
    j(CompY, CompX) = p.k * v;
    j(CompY, CompY) = -p.delta;
    j(CompY, CompV) = p.k * x;
    j(CompD, CompY) = p.a;
    j(CompD, CompD) = p.gamma * (Scalar(1) - p.alpha) - p.alpha * p.beta - p.delta;
    j(CompV, CompD) = p.alpha * p.beta;
    j(CompV, CompV) = -p.c;
    return j;
}

// Coefficients of det(x I - M) = x^4 + c1 x^3 + c2 x^2 + c3 x + c4,
// by the Faddeev-LeVerrier recurrence.
template <typename Scalar>
std::array<Scalar, 4> characteristic_coefficients(const Mat4T<Scalar>& m) {
    std::array<Scalar, 4> c;
    Mat4T<Scalar> acc = m;
    c[0] = -acc.trace();
    for (int i = 1; i < 4; ++i) {
        acc = m * (acc + c[i - 1] * Mat4T<Scalar>::Identity());
        c[i] = -acc.trace() / Scalar(i + 1);
    }
    return c;
}

// Routh-Hurwitz data for the disease-free equilibrium. The -mu eigenvalue
// factors out; A1..A3 are the cubic coefficients of the remaining block:
//   A1 = R_s + c + delta
//   A2 = (delta + c) R_s + c delta
//   A3 = c delta R_s - a k alpha beta lambda / mu   (= c delta R_s (1 - R_0))
template <typename Scalar>
struct RouthHurwitzDiseaseFreeT {
    Scalar a1, a2, a3;
    bool a1_positive, a2_positive, a3_positive;
    bool composite_positive; // A1 A2 - A3 > 0
    bool stable;             // all four conditions hold
};

using RouthHurwitzDiseaseFree = RouthHurwitzDiseaseFreeT<double>;

template <typename Scalar>
RouthHurwitzDiseaseFreeT<Scalar> routh_hurwitz_disease_free(const ModelParamsT<Scalar>& p) {
    const Scalar rs = detail::require_positive_rs(p);
    detail::require_positive(p.mu, "mu");
    RouthHurwitzDiseaseFreeT<Scalar> r;
    r.a1 = rs + p.c + p.delta;
    r.a2 = (p.delta + p.c) * rs + p.c * p.delta;
    r.a3 = p.c * p.delta * rs - p.a * p.k * p.alpha * p.beta * p.lambda / p.mu;
    r.a1_positive = r.a1 > Scalar(0);
    r.a2_positive = r.a2 > Scalar(0);
    r.a3_positive = r.a3 > Scalar(0);
    r.composite_positive = r.a1 * r.a2 - r.a3 > Scalar(0);
    r.stable = r.a1_positive && r.a2_positive && r.a3_positive && r.composite_positive;
    return r;
}

// Routh-Hurwitz data for the endemic equilibrium. B1..B4 are extracted from
// the numerically computed characteristic polynomial of the Jacobian at E_i;
// the literature's printed expansions contain typographical damage and are
// not used.
template <typename Scalar>
struct RouthHurwitzEndemicT {
    Scalar b1, b2, b3, b4;
    bool b1_positive, b3_positive, b4_positive;
    bool composite1_positive; // B1 B2 - B3 > 0
    bool composite2_positive; // B1 B2 B3 - B3^2 - B1^2 B4 > 0
    bool stable;
};

using RouthHurwitzEndemic = RouthHurwitzEndemicT<double>;

template <typename Scalar>
RouthHurwitzEndemicT<Scalar> routh_hurwitz_endemic(const ModelParamsT<Scalar>& p) {
    const StateT<Scalar> ei = endemic_equilibrium(p);
    const std::array<Scalar, 4> c = characteristic_coefficients(jacobian(p, ei));
    RouthHurwitzEndemicT<Scalar> r;
    r.b1 = c[0];
    r.b2 = c[1];
    r.b3 = c[2];
    r.b4 = c[3];
    r.b1_positive = r.b1 > Scalar(0);
    r.b3_positive = r.b3 > Scalar(0);
    r.b4_positive = r.b4 > Scalar(0);
    r.composite1_positive = r.b1 * r.b2 - r.b3 > Scalar(0);
    r.composite2_positive =
        r.b1 * r.b2 * r.b3 - r.b3 * r.b3 - r.b1 * r.b1 * r.b4 > Scalar(0);
    r.stable = r.b1_positive && r.b3_positive && r.b4_positive && r.composite1_positive &&
               r.composite2_positive;
    return r;
}

enum class EquilibriumKind { DiseaseFree, Endemic };
enum class StabilityVerdict { Stable, Unstable, Marginal };

inline const char* to_string(EquilibriumKind k) {
    return k == EquilibriumKind::DiseaseFree ? "disease-free" : "endemic";
}
inline const char* to_string(StabilityVerdict v) {
    switch (v) {
        case StabilityVerdict::Stable: return "locally-asymptotically-stable";
        case StabilityVerdict::Unstable: return "unstable";
        case StabilityVerdict::Marginal: return "marginal";
    }
    return "?";
}

// Equilibrium point with reproduction numbers, Routh-Hurwitz coefficients and
// an eigenvalue-based stability verdict. The verdict uses a marginal band of
// 1e-12 * ||J||_inf on the eigenvalue real parts.
template <typename Scalar>
struct EquilibriumReportT {
    EquilibriumKind kind;
    StateT<Scalar> point;
    Scalar r0;
    Scalar rs;
    std::optional<RouthHurwitzDiseaseFreeT<Scalar>> rh_disease_free;
    std::optional<RouthHurwitzEndemicT<Scalar>> rh_endemic;
    std::array<Scalar, 4> jacobian_eigen_real_parts; // sorted ascending
    StabilityVerdict verdict;
};

using EquilibriumReport = EquilibriumReportT<double>;

template <typename Scalar>
std::array<Scalar, 4> jacobian_eigenvalue_real_parts(const ModelParamsT<Scalar>& p,
                                                     const StateT<Scalar>& point) {
    const Mat4T<Scalar> j = jacobian(p, point);
    Eigen::EigenSolver<Mat4T<Scalar>> solver(j, /*computeEigenvectors=*/false);
    std::array<Scalar, 4> re;
    for (int i = 0; i < 4; ++i) {
        re[i] = solver.eigenvalues()[i].real();
    }
    std::sort(re.begin(), re.end());
    return re;
}

template <typename Scalar>
StabilityVerdict classify_stability(const ModelParamsT<Scalar>& p, const StateT<Scalar>& point,
                                    const std::array<Scalar, 4>& real_parts) {
    const Scalar norm = jacobian(p, point).cwiseAbs().rowwise().sum().maxCoeff();
    const Scalar tol = Scalar(1e-12) * norm;
    bool any_positive = false, all_negative = true;
    for (const Scalar re : real_parts) {
        if (re > tol) any_positive = true;
        if (!(re < -tol)) all_negative = false;
    }
    if (any_positive) return StabilityVerdict::Unstable;
    if (all_negative) return StabilityVerdict::Stable;
    return StabilityVerdict::Marginal;
}

template <typename Scalar>
EquilibriumReportT<Scalar> analyze_equilibrium(const ModelParamsT<Scalar>& p,
                                               EquilibriumKind kind) {
    EquilibriumReportT<Scalar> rep;
    rep.kind = kind;
    rep.rs = detail::require_positive_rs(p);
    rep.r0 = compute_r0(p);
    if (kind == EquilibriumKind::DiseaseFree) {
        rep.point = disease_free_equilibrium(p);
        rep.rh_disease_free = routh_hurwitz_disease_free(p);
    } else {
        rep.point = endemic_equilibrium(p);
        rep.rh_endemic = routh_hurwitz_endemic(p);
    }
    rep.jacobian_eigen_real_parts = jacobian_eigenvalue_real_parts(p, rep.point);
    rep.verdict = classify_stability(p, rep.point, rep.jacobian_eigen_real_parts);
    return rep;
}

namespace detail {

// g(u) = u - 1 - ln u, the standard Volterra-type well; >= 0 with equality
// only at u = 1.
template <typename Scalar>
Scalar volterra_well(Scalar u) {
    const Scalar e = u - Scalar(1);
    return e - std::log1p(e);
}

} // namespace detail

// Energy functional certifying global stability of the disease-free state:
//   L1 = X0 g(X/X0) + Y + (delta/a) D + delta R_s/(a alpha beta) V,  X0 = lambda/mu.
template <typename Scalar>
Scalar lyapunov_l1(const ModelParamsT<Scalar>& p, const StateT<Scalar>& s) {
    const Scalar rs = detail::require_positive_rs(p);
    detail::require_positive(p.mu, "mu");
    detail::require_positive(p.a, "a");
    detail::require_positive(p.alpha * p.beta, "alpha*beta");
    if (!(s[CompX] > Scalar(0))) {
        throw DomainError("lyapunov_l1 requires X > 0");
    }
    const Scalar x0 = p.lambda / p.mu;
    return x0 * detail::volterra_well(s[CompX] / x0) + s[CompY] + p.delta / p.a * s[CompD] +
           p.delta * rs / (p.a * p.alpha * p.beta) * s[CompV];
}

// Energy functional certifying global stability of the endemic state:
//   L2 = X1 g(X/X1) + Y1 g(Y/Y1) + (delta/a) D1 g(D/D1)
//        + delta R_s/(a alpha beta) V1 g(V/V1).
template <typename Scalar>
Scalar lyapunov_l2(const ModelParamsT<Scalar>& p, const StateT<Scalar>& s) {
    const Scalar rs = detail::require_positive_rs(p);
    detail::require_positive(p.a, "a");
    if ((s.array() <= Scalar(0)).any()) {
        throw DomainError("lyapunov_l2 requires a strictly positive state");
    }
    const StateT<Scalar> e = endemic_equilibrium(p); // throws Nonexistence when r0 <= 1
    using detail::volterra_well;
    return e[CompX] * volterra_well(s[CompX] / e[CompX]) +
           e[CompY] * volterra_well(s[CompY] / e[CompY]) +
           p.delta / p.a * e[CompD] * volterra_well(s[CompD] / e[CompD]) +
           p.delta * rs / (p.a * p.alpha * p.beta) * e[CompV] *
               volterra_well(s[CompV] / e[CompV]);
}

// Elasticity (p/R0) dR0/dp of the reproduction number, from analytic
// differentiation of the closed form. lambda, k and a enter linearly; mu and
// c divide; alpha, beta, gamma and delta also act through R_s.
template <typename Scalar>
Scalar elasticity_r0(const ModelParamsT<Scalar>& p, Param wrt) {
    const Scalar rs = detail::require_positive_rs(p);
    const Scalar value = p.get(wrt);
    if (!(value > Scalar(0))) {
        throw DomainError(std::string("elasticity undefined at ") +
                          kParamNames[static_cast<int>(wrt)] + " = 0");
    }
    switch (wrt) {
        case Param::Lambda:
        case Param::K:
        case Param::A:
            return Scalar(1);
        case Param::Mu:
        case Param::C:
            return Scalar(-1);
        case Param::Alpha:
            return (p.delta - p.gamma) / rs;
        case Param::Beta:
            return ((p.alpha - Scalar(1)) * p.gamma + p.delta) / rs;
        case Param::Gamma:
            return p.gamma * (Scalar(1) - p.alpha) / rs;
        case Param::Delta:
            return Scalar(-1) - p.delta / rs;
    }
    throw UsageError("unknown parameter index");
}

template <typename Scalar>
struct ElasticityReportT {
    Param wrt;
    Scalar value;
};

using ElasticityReport = ElasticityReportT<double>;

template <typename Scalar>
ElasticityReportT<Scalar> elasticity_r0(const ModelParamsT<Scalar>& p, std::string_view wrt) {
    const Param which = param_from_name(wrt);
    return ElasticityReportT<Scalar>{which, elasticity_r0(p, which)};
}

} // namespace hbv

#endif

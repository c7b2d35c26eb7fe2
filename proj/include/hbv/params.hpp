#ifndef HBV_PARAMS_HPP
#define HBV_PARAMS_HPP

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "hbv/errors.hpp"

namespace hbv {

template <typename Scalar>
using StateT = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Mat4T = Eigen::Matrix<Scalar, 4, 4>;

using State = StateT<double>;
using Mat4 = Mat4T<double>;

// Compartment indices into a State vector.
enum Comp : int { CompX = 0, CompY = 1, CompD = 2, CompV = 3 };

inline constexpr std::array<const char*, 4> kCompNames = {"X", "Y", "D", "V"};

// Canonical parameter order used by indexed access, LHS columns and CSV/JSON
// emission.
enum class Param : int {
    Lambda = 0, // hepatocyte production rate (cells ml^-1 day^-1)
    Mu,         // uninfected-hepatocyte death rate (day^-1)
    K,          // virus-to-cell infection rate (ml virion^-1 day^-1)
    A,          // capsid production rate (capsids cell^-1 day^-1)
    Beta,       // virus production rate from capsids (day^-1)
    Delta,      // death rate of infected hepatocytes and capsids (day^-1)
    C,          // virus clearance rate (day^-1)
    Alpha,      // volume fraction of capsids used for virion assembly
    Gamma,      // capsid recycling rate (day^-1)
};

inline constexpr int kNumParams = 9;
inline constexpr std::array<const char*, kNumParams> kParamNames = {
    "lambda", "mu", "k", "a", "beta", "delta", "c", "alpha", "gamma"};

inline Param param_from_name(std::string_view name) {
    for (int i = 0; i < kNumParams; ++i) {
        if (name == kParamNames[i]) {
            return static_cast<Param>(i);
        }
    }
    throw UsageError("unknown parameter name: " + std::string(name));
}

// The nine rate constants of the four-compartment model. Units: days and
// per-ml densities throughout.
template <typename Scalar>
struct ModelParamsT {
    Scalar lambda; // hepatocyte production rate
    Scalar mu;     // uninfected-hepatocyte death rate
    Scalar k;      // virus-to-cell infection rate
    Scalar a;      // capsid production per infected cell
    Scalar beta;   // virion assembly rate from capsids
    Scalar delta;  // death rate of infected cells and capsids
    Scalar c;      // virion clearance rate
    Scalar alpha;  // fraction of capsids routed to virion assembly, (0,1]
    Scalar gamma;  // capsid recycling rate

    Scalar get(Param p) const {
        switch (p) {
            case Param::Lambda: return lambda;
            case Param::Mu: return mu;
            case Param::K: return k;
            case Param::A: return a;
            case Param::Beta: return beta;
            case Param::Delta: return delta;
            case Param::C: return c;
            case Param::Alpha: return alpha;
            case Param::Gamma: return gamma;
        }
        throw UsageError("unknown parameter index");
    }

    void set(Param p, Scalar value) {
        switch (p) {
            case Param::Lambda: lambda = value; return;
            case Param::Mu: mu = value; return;
            case Param::K: k = value; return;
            case Param::A: a = value; return;
            case Param::Beta: beta = value; return;
            case Param::Delta: delta = value; return;
            case Param::C: c = value; return;
            case Param::Alpha: alpha = value; return;
            case Param::Gamma: gamma = value; return;
        }
        throw UsageError("unknown parameter index");
    }
};

using ModelParams = ModelParamsT<double>;

// Literature-derived default parameter set (chimpanzee calibration averages).
template <typename Scalar = double>
ModelParamsT<Scalar> baseline_params() {
    ModelParamsT<Scalar> p;
    p.lambda = Scalar(2.67e7);
    p.mu = Scalar(0.096);
    p.k = Scalar(3.38e-12);
    p.a = Scalar(157.0);
    p.beta = Scalar(1.83);
    p.delta = Scalar(0.24);
    p.c = Scalar(3.93);
    p.alpha = Scalar(0.84);
    p.gamma = Scalar(1.24);
    return p;
}

// Throws InvalidInput naming the violated invariant. All rates must be finite
// and non-negative; alpha must lie in (0, 1]. alpha = 0 is rejected because
// the reproduction number degenerates to zero and the endemic state is
// undefined there.
template <typename Scalar>
void validate(const ModelParamsT<Scalar>& p) {
    for (int i = 0; i < kNumParams; ++i) {
        const Scalar v = p.get(static_cast<Param>(i));
        if (!std::isfinite(static_cast<double>(v))) {
            throw InvalidInput(std::string("parameter ") + kParamNames[i] + " is not finite");
        }
        if (v < Scalar(0)) {
            throw InvalidInput(std::string("parameter ") + kParamNames[i] + " is negative");
        }
    }
    if (!(p.alpha > Scalar(0) && p.alpha <= Scalar(1))) {
        throw InvalidInput("parameter alpha must satisfy 0 < alpha <= 1");
    }
}

// Canonical initial conditions used in the simulation scenarios.
template <typename Scalar = double>
StateT<Scalar> ic1() {
    return StateT<Scalar>(Scalar(2.56e8), Scalar(0.99e8), Scalar(1.60e10), Scalar(0.369e10));
}
template <typename Scalar = double>
StateT<Scalar> ic2() {
    return StateT<Scalar>(Scalar(7.68e8), Scalar(2.97e8), Scalar(4.82e10), Scalar(1.10e10));
}
template <typename Scalar = double>
StateT<Scalar> ic3() {
    return StateT<Scalar>(Scalar(12.79e8), Scalar(4.95e8), Scalar(8.04e10), Scalar(1.85e10));
}

inline State initial_condition_preset(std::string_view name) {
    if (name == "ic1") return ic1();
    if (name == "ic2") return ic2();
    if (name == "ic3") return ic3();
    throw UsageError("unknown initial-condition preset: " + std::string(name) +
                     " (expected ic1, ic2 or ic3)");
}

} // namespace hbv

#endif

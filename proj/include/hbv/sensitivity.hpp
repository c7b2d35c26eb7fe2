#ifndef HBV_SENSITIVITY_HPP
#define HBV_SENSITIVITY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <thread>
#include <utility>
#include <vector>

#include "hbv/errors.hpp"
#include "hbv/integrator.hpp"
#include "hbv/model.hpp"
#include "hbv/params.hpp"
#include "hbv/rng.hpp"

// Global sensitivity analysis: Latin hypercube sampling over all nine rate
// constants, partial rank correlation coefficients of each compartment at a
// query time.

namespace hbv {

struct LhsDesign {
    int n = 0;
    std::array<std::pair<double, double>, kNumParams> ranges; // (low, high) per column
    Eigen::MatrixXd matrix;                                   // n x 9 sampled values
    std::uint64_t seed = 0;
};

// One uniform draw per equal-probability stratum per parameter; strata are
// assigned to rows by an independent permutation per column. Column ranges
// are [fraction_low, fraction_high] times the baseline value.
inline LhsDesign lhs_sample(const ModelParams& baseline, double fraction_low,
                            double fraction_high, int n, std::uint64_t seed) {
    validate(baseline);
    if (!(fraction_low > 0.0) || !(fraction_high > fraction_low)) {
        throw UsageError("lhs_sample: need 0 < fraction_low < fraction_high");
    }
    if (n < 2) {
        throw UsageError("lhs_sample: need n >= 2");
    }
    LhsDesign design;
    design.n = n;
    design.seed = seed;
    design.matrix.resize(n, kNumParams);
    Rng rng(seed);
    for (int j = 0; j < kNumParams; ++j) {
        const double base = baseline.get(static_cast<Param>(j));
        if (base == 0.0) {
            throw DegenerateRange(std::string("lhs_sample: baseline ") + kParamNames[j] +
                                  " is zero, range collapses to a point");
        }
        const double lo = fraction_low * base;
        const double hi = fraction_high * base;
        design.ranges[j] = {lo, hi};
        std::vector<double> draws(n);
        for (int s = 0; s < n; ++s) {
            const double u = (static_cast<double>(s) + rng.uniform01()) / n;
            draws[s] = lo + (hi - lo) * u;
        }
        rng.shuffle(draws);
        for (int i = 0; i < n; ++i) {
            design.matrix(i, j) = draws[i];
        }
    }
    return design;
}

// Ranks 1..n; ties receive the average of the ranks they span.
inline std::vector<double> rank_transform(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) {
        throw UsageError("rank_transform: need at least 2 values");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    return ranks;
}

struct PrccResult {
    std::vector<Comp> outputs;
    double query_time = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd prcc;            // 9 x |outputs|; NaN where degenerate
    Eigen::MatrixXd sample_outputs;  // n x |outputs|, raw values (failed rows NaN)
    std::vector<int> failures;       // row indices excluded from the computation
    std::vector<std::pair<int, int>> degenerate_pairs; // (parameter, output) pairs
    bool reliability_warning = false;
};

namespace detail {

// Residuals of the centered vector y after ridge-regularized least squares on
// the centered columns of A.
inline Eigen::VectorXd regression_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
    const Eigen::MatrixXd gram =
        a.transpose() * a + 1e-10 * Eigen::MatrixXd::Identity(a.cols(), a.cols());
    const Eigen::VectorXd w = gram.ldlt().solve(a.transpose() * y);
    Eigen::VectorXd r = y - a * w;
    r.array() -= r.mean();
    return r;
}

inline double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double sx = x.squaredNorm(), sy = y.squaredNorm();
    return x.dot(y) / std::sqrt(sx * sy);
}

} // namespace detail

// Partial rank correlation of every (parameter, output) pair: rank-transform
// all columns, regress the parameter ranks and the output ranks on the other
// eight parameters' ranks, and correlate the two residual vectors. Pairs
// whose residual variance falls below 1e-14 are reported as degenerate.
inline PrccResult prcc(const LhsDesign& design, const Eigen::MatrixXd& outputs,
                       std::vector<Comp> output_names = {}) {
    if (outputs.rows() != design.matrix.rows()) {
        throw UsageError("prcc: outputs row count does not match the design");
    }
    PrccResult result;
    result.sample_outputs = outputs;
    const int n = design.n;
    const int m = static_cast<int>(outputs.cols());
    result.outputs = output_names.empty()
                         ? std::vector<Comp>{CompX, CompY, CompD, CompV}
                         : std::move(output_names);
    result.outputs.resize(m, CompX);

    std::vector<int> keep;
    for (int i = 0; i < n; ++i) {
        if (outputs.row(i).allFinite()) {
            keep.push_back(i);
        } else {
            result.failures.push_back(i);
        }
    }
    const int nv = static_cast<int>(keep.size());
    if (nv < kNumParams + 2) {
        throw UsageError("prcc: need more than " + std::to_string(kNumParams + 2) +
                         " successful rows, have " + std::to_string(nv));
    }
    result.reliability_warning = result.failures.size() * 10 > static_cast<std::size_t>(n);

    // Centered rank matrix of the parameter columns over the kept rows.
    Eigen::MatrixXd pranks(nv, kNumParams);
    for (int j = 0; j < kNumParams; ++j) {
        std::vector<double> col(nv);
        for (int i = 0; i < nv; ++i) {
            col[i] = design.matrix(keep[i], j);
        }
        const std::vector<double> r = rank_transform(col);
        for (int i = 0; i < nv; ++i) {
            pranks(i, j) = r[i];
        }
        pranks.col(j).array() -= pranks.col(j).mean();
    }

    result.prcc.resize(kNumParams, m);
    result.prcc.setConstant(std::numeric_limits<double>::quiet_NaN());
    constexpr double kVarianceFloor = 1e-14;

    for (int o = 0; o < m; ++o) {
        std::vector<double> col(nv);
        for (int i = 0; i < nv; ++i) {
            col[i] = outputs(keep[i], o);
        }
        const std::vector<double> r = rank_transform(col);
        Eigen::VectorXd oranks(nv);
        for (int i = 0; i < nv; ++i) {
            oranks[i] = r[i];
        }
        oranks.array() -= oranks.mean();

        for (int j = 0; j < kNumParams; ++j) {
            Eigen::MatrixXd others(nv, kNumParams - 1);
            int col_idx = 0;
            for (int q = 0; q < kNumParams; ++q) {
                if (q != j) {
                    others.col(col_idx++) = pranks.col(q);
                }
            }
            const Eigen::VectorXd rx = detail::regression_residual(others, pranks.col(j));
            const Eigen::VectorXd ry = detail::regression_residual(others, oranks);
            if (rx.squaredNorm() / nv < kVarianceFloor || ry.squaredNorm() / nv < kVarianceFloor) {
                result.degenerate_pairs.emplace_back(j, o);
                continue;
            }
            result.prcc(j, o) = std::clamp(detail::pearson(rx, ry), -1.0, 1.0);
        }
    }
    return result;
}

// Runs the model once per LHS row from a fixed initial condition and collects
// all four compartments at the query time. Rows with invalid parameters or
// overflowing runs are excluded as failures; more than 10% of them raises the
// reliability warning on the result.
inline PrccResult run_gsa(const ModelParams& baseline, const SimConfig& sim, int n,
                          std::uint64_t seed, double query_time,
                          double fraction_low = 0.8, double fraction_high = 1.2,
                          const State& initial = ic3(), int jobs = 1) {
    if (n < kNumParams + 2) {
        throw UsageError("run_gsa: need n >= 11");
    }
    if (query_time < sim.t_start || query_time > sim.t_end) {
        throw UsageError("run_gsa: query_time outside the simulation horizon");
    }
    const LhsDesign design = lhs_sample(baseline, fraction_low, fraction_high, n, seed);

    Eigen::MatrixXd outputs(n, 4);
    outputs.setConstant(std::numeric_limits<double>::quiet_NaN());
    std::atomic<int> next_row{0};
    const auto worker = [&]() {
        for (;;) {
            const int i = next_row.fetch_add(1);
            if (i >= n) {
                return;
            }
            ModelParams p = baseline;
            for (int j = 0; j < kNumParams; ++j) {
                p.set(static_cast<Param>(j), design.matrix(i, j));
            }
            try {
                validate(p);
                const Trajectory traj = simulate(p, initial, sim);
                std::size_t at = 0;
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t t = 0; t < traj.times.size(); ++t) {
                    const double dist = std::abs(traj.times[t] - query_time);
                    if (dist < best) {
                        best = dist;
                        at = t;
                    }
                }
                outputs.row(i) = traj.states[at].transpose();
            } catch (const Error&) {
                // left as NaN, counted as a failed run
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

    PrccResult result = prcc(design, outputs);
    result.query_time = query_time;
    return result;
}

} // namespace hbv

#endif

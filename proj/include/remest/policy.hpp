#pragma once

#include "remest/augmented.hpp"
#include "remest/channel.hpp"
#include "remest/quantizer.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace remest {

/// Ascending grid of receiver error variances.
struct CovGrid {
    std::vector<double> points;
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;

    static CovGrid uniform(double lo, double hi, int count);
    /// [Ps, max(2, 5 Ps)] with `count` points.
    static CovGrid default_for(double Ps, int count = 40);

    double cell() const { return (hi - lo) / (count - 1); }

    struct Location {
        int index = 0;     // left neighbour
        double weight = 0; // weight of index + 1
        bool clamped = false;
    };
    /// Linear interpolation bracket of x, clamped to [lo, hi].
    Location locate(double x) const;
    double interpolate(const std::vector<double>& values, double x) const;
    /// Index of the grid point closest to x.
    int nearest(double x) const;
};

/// Average-cost decision problem on the scalar receiver variance.
/// Without a feedback channel the state is the true variance (perfect
/// acknowledgments); with one it is the sensor's running estimate driven by
/// the noisy acknowledgments.
struct ScalarDecisionProblem {
    ScalarRiccati rec;
    double p = 0.0;
    double lambda = 0.0;
    std::array<double, 2> J{};
    std::optional<FeedbackChannel> fb;

    static ScalarDecisionProblem make(const AugmentedModel& aug, const ForwardChannel& fwd, double lambda,
                                      std::optional<FeedbackChannel> fb = std::nullopt);

    /// lambda * E[P_{k+1}] + (1 - lambda) J(nu).
    double stage_cost(double P, int nu) const
    {
        return lambda * rec.expected(P, nu, p) + (1.0 - lambda) * J[nu];
    }

    struct Successor {
        double prob;
        double P;
    };
    /// Successor states with their probabilities; returns how many are used.
    int successors(double P, int nu, std::array<Successor, 3>& out) const;
};

/// lambda * trace of the expected (1,1) block + (1 - lambda) * packet energy.
double stage_cost(const StructuredCov& P, int nu, double lambda, const RatePlan& plan, const ForwardChannel& fwd,
                  const AugmentedModel& aug);

struct RviOptions {
    double tol = 1e-9;
    long max_iter = 200'000;
    int ref_index = 0;
    /// When set, evaluates this action table instead of optimizing.
    std::optional<std::vector<int>> fixed_actions;
    /// Initial relative values (zeros when empty).
    std::vector<double> H0;
};

struct PolicyTable {
    CovGrid grid;
    ScalarDecisionProblem problem;
    double rho = 0.0;
    std::vector<double> H;
    std::vector<int> action;
    std::array<std::vector<double>, 2> Qv;  // one-stage-plus-value objective per action
    double lambda = 0.0;
    double p = 0.0;
    long iterations = 0;
    long clamp_count = 0;
    long evaluations = 0;
    // Largest increase of Q(i,1) - Q(i,0) along the grid, over all iterations.
    double max_submodularity_violation = 0.0;

    bool monotone() const;
    /// First grid point with action 1 minus half a cell; +inf when none.
    double threshold() const;
    /// Greedy action at an arbitrary variance using interpolated H; ties go to 0.
    int decide(double P) const;
    /// Objective of action nu at P with interpolated H.
    double q_value(double P, int nu) const;
};

/// Relative value iteration with H interpolated linearly between grid points.
/// Stops when the span of H_{t+1} - H_t drops below tol; throws NonConvergence.
PolicyTable relative_value_iteration(const CovGrid& grid, const ScalarDecisionProblem& problem,
                                     const RviOptions& opts = {});
PolicyTable relative_value_iteration(const CovGrid& grid, double lambda, const RatePlan& plan,
                                     const ForwardChannel& fwd, const AugmentedModel& aug, double tol = 1e-9,
                                     long max_iter = 200'000, int ref_index = 0);

/// Largest positive discrete second difference and largest decrease of H.
struct ShapeReport {
    double max_second_difference = 0.0;
    double max_decrease = 0.0;
};
ShapeReport value_shape(const PolicyTable& table);

/// 0 if P <= phi, else 1.
inline int threshold_policy(double phi, double P) { return P <= phi ? 0 : 1; }

/// Cost oracle: (phi, common-random-number seed) -> average cost.
using ThresholdEvaluator = std::function<double(double phi, std::uint64_t crn_seed)>;

/// Average cost of the threshold policy along a simulated variance chain.
/// Both probes of an SPSA iteration share `crn_seed`.
struct MonteCarloEvaluator {
    ScalarDecisionProblem problem;
    long steps = 10'000;
    double burn_in_fraction = 0.1;
    double P0 = 0.0;  // initial variance; Ps when zero

    double operator()(double phi, std::uint64_t crn_seed) const;
};

/// Finite-horizon Bellman evaluation of the threshold policy on the grid,
/// started from P0; returns V_T(P0) / T.
struct BellmanEvaluator {
    CovGrid grid;
    ScalarDecisionProblem problem;
    int horizon = 500;
    double P0 = 0.0;

    double operator()(double phi, std::uint64_t crn_seed) const;
};

struct SpsaOptions {
    double phi0 = 0.0;
    double omega = 0.3;
    double varsigma = 0.5;
    double kappa = 1.0;
    int iters = 200;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
};

struct SpsaRecord {
    int iteration;
    double phi;
    double cost;  // mean of the two probe costs
};

struct SpsaResult {
    double phi = 0.0;
    std::vector<SpsaRecord> history;
};

/// Two-probe random-direction stochastic approximation of the threshold.
SpsaResult spsa_threshold_search(const ThresholdEvaluator& evaluator, const SpsaOptions& opts, Rng& rng);

/// Sensor-side estimate of the receiver's error covariance.
struct CovEstimate {
    Matrix P11_hat;
};

/// Bayes-weighted mix of the open-loop and update steps given gammahat.
CovEstimate suboptimal_estimate_update(const CovEstimate& est, int gammahat, int nu, const ForwardChannel& fwd,
                                       const FeedbackChannel& fb, const AugmentedModel& aug);
double suboptimal_estimate_update(double P_hat, int gammahat, int nu, double p, const FeedbackChannel& fb,
                                  const ScalarRiccati& rec);

}  // namespace remest

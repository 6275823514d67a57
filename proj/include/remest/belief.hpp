#pragma once

#include "remest/policy.hpp"

#include <vector>

namespace remest {

/// Distribution of the receiver error variance given the acknowledgments seen
/// by the sensor. Held as one exact atom while the posterior is concentrated
/// on a single location, otherwise as weights over the grid points.
class Belief {
public:
    static Belief point_mass(double P);
    static Belief from_weights(std::vector<double> weights);

    bool is_atom() const { return atom_; }
    double atom_location() const { return atom_P_; }
    /// Grid weights; an atom is spread over its two neighbours.
    std::vector<double> weights(const CovGrid& grid) const;
    const std::vector<double>& raw_weights() const { return w_; }
    double mean(const CovGrid& grid) const;
    /// Expectation of a function of the variance.
    template <typename F>
    double expect(const CovGrid& grid, F&& f) const
    {
        if (atom_) return f(atom_P_);
        double s = 0.0;
        for (std::size_t i = 0; i < w_.size(); ++i)
            if (w_[i] != 0.0) s += w_[i] * f(grid.points[i]);
        return s;
    }

private:
    bool atom_ = true;
    double atom_P_ = 0.0;
    std::vector<double> w_;
};

/// Probability of observing gammahat before the update.
double ack_probability(const FeedbackChannel& fb, double p, int gammahat);

/// Bayes update of the belief after choosing nu and observing gammahat.
/// Throws DegenerateBelief when gammahat has probability below 1e-300.
Belief belief_update(const Belief& b, int gammahat, int nu, const CovGrid& grid, const ScalarRiccati& rec, double p,
                     const FeedbackChannel& fb);
Belief belief_update(const Belief& b, int gammahat, int nu, const CovGrid& grid, const ForwardChannel& fwd,
                     const FeedbackChannel& fb, const AugmentedModel& aug);

struct BeliefSolverOptions {
    int samples = 2000;
    int horizon = 30;
    int trajectories = 20;
    double explore = 0.1;  // random-action probability of the sampling rollout
    /// Lookahead: one-step lookahead against the sampled values.
    /// Nearest: action stored at the nearest sampled belief.
    enum class Decision { Lookahead, Nearest } decision = Decision::Lookahead;
    std::uint64_t seed = 1;
};

/// Point-based approximation of the belief-space average-cost recursion over a
/// set of sampled beliefs, with nearest-neighbour (L1) value lookup.
class BeliefPolicy {
public:
    BeliefPolicy() = default;

    /// Greedy action for the belief; ties go to 0.
    int decide(const Belief& b) const;
    double q_value(const Belief& b, int nu) const;

    const CovGrid& grid() const { return grid_; }
    const ScalarDecisionProblem& problem() const { return problem_; }
    int sample_count() const { return static_cast<int>(values_.size()); }
    const std::vector<int>& sample_actions() const { return actions_; }
    const std::vector<double>& sample_weights(int i) const { return samples_[i]; }
    /// Index of the sampled belief closest in L1 to `w`.
    int nearest(const std::vector<double>& w) const;

    friend BeliefPolicy belief_value_iteration(const CovGrid&, const ScalarDecisionProblem&, const PolicyTable&,
                                               const BeliefSolverOptions&, const PolicyTable*);

private:
    CovGrid grid_;
    ScalarDecisionProblem problem_;
    std::vector<std::vector<double>> samples_;
    // Vantage-point tree over the samples for exact L1 nearest-neighbour queries.
    struct VpNode {
        int index;
        double radius;
        int inside;
        int outside;
    };
    std::vector<VpNode> tree_;
    int root_ = -1;
    int build_tree(std::vector<int>& items, int lo, int hi);
    void search(int node, const std::vector<double>& w, int& best, double& best_d) const;
    std::vector<double> values_;
    std::vector<int> actions_;
    BeliefSolverOptions::Decision decision_ = BeliefSolverOptions::Decision::Lookahead;
};

/// `problem` must carry the feedback channel. `terminal` holds perfect-ack
/// relative values used at the end of the backward induction. Beliefs are
/// sampled under `sampling` applied to the sensor's running estimate when
/// given, else under `terminal` applied to the belief mean.
BeliefPolicy belief_value_iteration(const CovGrid& grid, const ScalarDecisionProblem& problem,
                                    const PolicyTable& terminal, const BeliefSolverOptions& opts = {},
                                    const PolicyTable* sampling = nullptr);

}  // namespace remest

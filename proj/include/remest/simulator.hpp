#pragma once

#include "remest/belief.hpp"
#include "remest/channel.hpp"
#include "remest/policy.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace remest {

enum class PolicyKind { Fixed0, Fixed1, Threshold, Table, Suboptimal, Belief };

/// Transmission rule used inside an episode.
struct PolicySpec {
    PolicyKind kind = PolicyKind::Fixed0;
    double phi = 0.0;                            // Threshold
    std::shared_ptr<const PolicyTable> table;    // Table (true variance) or Suboptimal (sensor estimate)
    std::shared_ptr<const BeliefPolicy> belief;  // Belief

    static PolicySpec fixed(int nu);
    static PolicySpec threshold(double phi);
    static PolicySpec optimal(std::shared_ptr<const PolicyTable> table);
    static PolicySpec suboptimal(std::shared_ptr<const PolicyTable> table);
    static PolicySpec belief_based(std::shared_ptr<const BeliefPolicy> policy);

    std::string name() const;
};

/// Parses fixed0, fixed1, threshold, optimal, suboptimal, belief.
PolicyKind parse_policy_kind(const std::string& name);
std::string policy_kind_name(PolicyKind kind);

/// How the simulated quantization noise is sized: both streams at the
/// target trace (matches the decision problem) or at the rounded rates.
enum class NoiseModel { Shared, PerRate };

struct EpisodeConfig {
    SystemModel model;
    SensorSteadyState ss;
    RatePlan plan;
    ForwardChannel fwd;
    FeedbackChannel fb;
    double lambda = 0.6;
    PolicySpec policy;
    long T = 100'000;
    std::uint64_t seed = 1;
    NoiseModel noise_model = NoiseModel::Shared;
    double burn_in_fraction = 0.1;
    bool record_trace = false;
    /// Simulate plant, sensor and receiver means; the cost only needs the
    /// covariance recursion and the channel draws.
    bool simulate_state = true;
    /// Grid for the belief filter (required for Belief policies).
    std::optional<CovGrid> grid;

    void validate() const;
};

struct StepRecord {
    long k;
    double P11;
    double Phat11;
    int nu;
    int gamma;
    int gammahat;
    double cost;
};

struct EpisodeResult {
    double avg_cost = 0.0;
    double avg_est_var = 0.0;
    double avg_energy = 0.0;
    double frac_nu1 = 0.0;
    double mean_sq_error = 0.0;  // empirical receiver error, when states are simulated
    long counted_steps = 0;
    std::vector<StepRecord> trace;
};

/// Receiver model used by the simulation for the configured noise model.
AugmentedModel episode_model(const EpisodeConfig& cfg);

EpisodeResult run_episode(const EpisodeConfig& cfg);

/// Named substreams of one episode seed.
enum class Stream : std::uint64_t { Plant = 1, Measurement = 2, Quantizer = 3, Forward = 4, Feedback = 5 };
Rng substream(std::uint64_t seed, Stream stream);

/// Parameters from which channels, rates and policies are rebuilt for any p.
struct Scenario {
    SystemModel model;
    QuantizerSpec quantizer;
    double target_trace = 0.01;
    double N0 = 0.01;
    double energy_scale = 1.0;
    double p = 0.2;
    FeedbackChannel fb;
    double lambda = 0.6;
    NoiseModel noise_model = NoiseModel::Shared;
    long T = 100'000;
    std::uint64_t seed = 1;
    double burn_in_fraction = 0.1;
    bool simulate_state = true;
    int grid_count = 40;
    double grid_lo = 0.0;  // 0 selects P_s
    double grid_hi = 0.0;  // 0 selects max(2, 5 P_s)
    RviOptions rvi;
    BeliefSolverOptions belief;
    double phi = 0.5;  // threshold used by the Threshold policy
};

/// Scenario resolved at one packet loss probability.
struct Prepared {
    Scenario scenario;
    SensorSteadyState ss;
    RatePlan plan;
    ForwardChannel fwd;
    AugmentedModel dp_model;  // shared quantization noise
    CovGrid grid;
};

Prepared prepare(const Scenario& sc, double p);
Prepared prepare(const Scenario& sc);

/// Decision problem on the prepared grid; with_feedback selects the
/// sensor-estimate dynamics.
ScalarDecisionProblem decision_problem(const Prepared& prep, bool with_feedback);
PolicyTable solve_policy(const Prepared& prep, bool with_feedback = false);
/// Builds the policy of the given kind, solving whatever it needs.
PolicySpec build_policy(const Prepared& prep, PolicyKind kind);
EpisodeConfig episode_config(const Prepared& prep, const PolicySpec& policy, std::uint64_t seed);

struct SweepCell {
    double p;
    std::string policy;
    double avg_cost;
    double avg_est_var;
    double avg_energy;
    double stderr_cost;
    int runs;
    double rho;  // DP average cost, NaN when the policy has none
};

/// Runs `runs` seeded episodes per (p, policy). Run r uses seed + r for
/// every policy, so all policies see the same noise. Rows are sorted by p,
/// then by the order of `policies`, independent of the worker count.
std::vector<SweepCell> sweep(const Scenario& sc, const std::vector<double>& p_values,
                             const std::vector<PolicyKind>& policies, int runs, int workers = 0);

struct CovarianceCheckReport {
    std::vector<long> checkpoints;
    std::vector<double> empirical;    // trace of sample error covariance at checkpoints
    std::vector<double> analytic;     // trace of P11 at checkpoints
    std::vector<double> deviations;   // relative deviations at checkpoints
    double max_relative_deviation = 0.0;
    double rms_relative_deviation = 0.0;  // over all steps
    int runs = 0;
};

/// Runs `runs` episodes that share one realization of gamma and nu, and
/// compares the cross-run error covariance with the deterministic Riccati
/// trajectory.
CovarianceCheckReport empirical_covariance_check(const EpisodeConfig& cfg, int runs,
                                                 std::vector<long> checkpoints = {10, 100, 1000},
                                                 int workers = 0);

/// Sum with compensation for lost low-order bits.
class KahanSum {
public:
    void add(double v)
    {
        const double y = v - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

/// Worker count to use: `requested` when positive, else the hardware concurrency.
int resolve_workers(int requested);

}  // namespace remest

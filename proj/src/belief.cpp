#include "remest/belief.hpp"

#include "remest/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace remest {

Belief Belief::point_mass(double P)
{
    Belief b;
    b.atom_ = true;
    b.atom_P_ = P;
    return b;
}

Belief Belief::from_weights(std::vector<double> weights)
{
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw DomainError("belief weights must be nonnegative");
        total += w;
    }
    if (!(total > 0.0)) throw DegenerateBelief("belief has no mass");
    for (double& w : weights) w /= total;
    Belief b;
    b.atom_ = false;
    b.w_ = std::move(weights);
    return b;
}

std::vector<double> Belief::weights(const CovGrid& grid) const
{
    if (!atom_) return w_;
    std::vector<double> w(grid.count, 0.0);
    const auto loc = grid.locate(atom_P_);
    w[loc.index] += 1.0 - loc.weight;
    w[loc.index + 1] += loc.weight;
    return w;
}

double Belief::mean(const CovGrid& grid) const
{
    return expect(grid, [](double P) { return P; });
}

double ack_probability(const FeedbackChannel& fb, double p, int gammahat)
{
    return fb.prob(gammahat, 0) * p + fb.prob(gammahat, 1) * (1.0 - p);
}

namespace {

// A grid belief with a single occupied point is stored as an exact atom.
Belief canonical(std::vector<double> w, const CovGrid& grid)
{
    int nonzero = 0;
    int last = -1;
    for (int i = 0; i < grid.count; ++i)
        if (w[i] > 0.0) {
            ++nonzero;
            last = i;
        }
    if (nonzero == 1) return Belief::point_mass(grid.points[last]);
    return Belief::from_weights(std::move(w));
}

void deposit(std::vector<double>& w, const CovGrid& grid, double P, double mass)
{
    const auto loc = grid.locate(P);
    if (loc.weight < 1.0) w[loc.index] += mass * (1.0 - loc.weight);
    if (loc.weight > 0.0) w[loc.index + 1] += mass * loc.weight;
}

}  // namespace

Belief belief_update(const Belief& b, int gammahat, int nu, const CovGrid& grid, const ScalarRiccati& rec, double p,
                     const FeedbackChannel& fb)
{
    if (!(ack_probability(fb, p, gammahat) >= 1e-300))
        throw DegenerateBelief("acknowledgment has zero probability under the channel model");
    const auto post = ack_posterior(fb, p, gammahat);

    if (b.is_atom()) {
        const double P = b.atom_location();
        if (post[0] == 0.0 || post[1] == 0.0) return Belief::point_mass(rec.step(P, post[1] > 0.0 ? 1 : 0, nu));
        std::vector<double> w(grid.count, 0.0);
        deposit(w, grid, rec.open_loop(P), post[0]);
        deposit(w, grid, rec.update(P, nu), post[1]);
        return canonical(std::move(w), grid);
    }

    const auto& src = b.raw_weights();
    std::vector<double> w(grid.count, 0.0);
    for (int i = 0; i < grid.count; ++i) {
        if (src[i] == 0.0) continue;
        const double P = grid.points[i];
        if (post[0] > 0.0) deposit(w, grid, rec.open_loop(P), src[i] * post[0]);
        if (post[1] > 0.0) deposit(w, grid, rec.update(P, nu), src[i] * post[1]);
    }
    return canonical(std::move(w), grid);
}

Belief belief_update(const Belief& b, int gammahat, int nu, const CovGrid& grid, const ForwardChannel& fwd,
                     const FeedbackChannel& fb, const AugmentedModel& aug)
{
    return belief_update(b, gammahat, nu, grid, ScalarRiccati::from(aug), fwd.p, fb);
}

namespace {

double l1_bounded(const std::vector<double>& a, const std::vector<double>& b, double bound)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += std::abs(a[i] - b[i]);
        if (s >= bound) return s;
    }
    return s;
}

}  // namespace

int BeliefPolicy::build_tree(std::vector<int>& items, int lo, int hi)
{
    if (lo >= hi) return -1;
    const int vantage = items[lo];
    const int node = static_cast<int>(tree_.size());
    tree_.push_back({vantage, 0.0, -1, -1});
    if (hi - lo == 1) return node;
    const int mid = (lo + 1 + hi) / 2;
    auto dist = [&](int idx) { return l1_bounded(samples_[vantage], samples_[idx], std::numeric_limits<double>::infinity()); };
    std::nth_element(items.begin() + lo + 1, items.begin() + mid, items.begin() + hi,
                     [&](int x, int y) { return dist(x) < dist(y); });
    const double radius = dist(items[mid]);
    const int inside = build_tree(items, lo + 1, mid);
    const int outside = build_tree(items, mid, hi);
    tree_[node].radius = radius;
    tree_[node].inside = inside;
    tree_[node].outside = outside;
    return node;
}

void BeliefPolicy::search(int node, const std::vector<double>& w, int& best, double& best_d) const
{
    if (node < 0) return;
    const VpNode& v = tree_[node];
    const double d = l1_bounded(samples_[v.index], w, std::numeric_limits<double>::infinity());
    if (d < best_d || (d == best_d && v.index < best)) {
        best_d = d;
        best = v.index;
    }
    // Samples closer than the radius went inside, the rest (ties included) outside.
    if (d < v.radius) {
        search(v.inside, w, best, best_d);
        if (d + best_d >= v.radius) search(v.outside, w, best, best_d);
    } else {
        search(v.outside, w, best, best_d);
        if (d - best_d <= v.radius) search(v.inside, w, best, best_d);
    }
}

int BeliefPolicy::nearest(const std::vector<double>& w) const
{
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    search(root_, w, best, best_d);
    return best;
}

double BeliefPolicy::q_value(const Belief& b, int nu) const
{
    const auto& fb = *problem_.fb;
    double v = b.expect(grid_, [&](double P) { return problem_.stage_cost(P, nu); });
    for (int gh = 0; gh < 3; ++gh) {
        const double prob = ack_probability(fb, problem_.p, gh);
        if (!(prob > 0.0)) continue;
        const Belief next = belief_update(b, gh, nu, grid_, problem_.rec, problem_.p, fb);
        v += prob * values_[nearest(next.weights(grid_))];
    }
    return v;
}

int BeliefPolicy::decide(const Belief& b) const
{
    if (decision_ == BeliefSolverOptions::Decision::Nearest) return actions_[nearest(b.weights(grid_))];
    return q_value(b, 1) < q_value(b, 0) ? 1 : 0;
}

BeliefPolicy belief_value_iteration(const CovGrid& grid, const ScalarDecisionProblem& problem,
                                    const PolicyTable& terminal, const BeliefSolverOptions& opts,
                                    const PolicyTable* sampling)
{
    if (!problem.fb) throw DomainError("belief solver needs a feedback channel");
    if (opts.samples < 0 || opts.horizon < 1 || opts.trajectories < 1)
        throw DomainError("belief solver needs samples >= 0, horizon >= 1 and trajectories >= 1");
    const FeedbackChannel& fb = *problem.fb;
    const double p = problem.p;

    BeliefPolicy pol;
    pol.grid_ = grid;
    pol.problem_ = problem;
    pol.decision_ = opts.decision;

    for (int i = 0; i < grid.count; ++i) {
        std::vector<double> w(grid.count, 0.0);
        w[i] = 1.0;
        pol.samples_.push_back(std::move(w));
    }

    Rng rng(opts.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> start_point(0, grid.count - 1);
    const int per_traj = (opts.samples + opts.trajectories - 1) / opts.trajectories;
    int collected = 0;
    for (int tr = 0; tr < opts.trajectories && collected < opts.samples; ++tr) {
        double P_hat = grid.points[start_point(rng)];
        Belief b = Belief::point_mass(P_hat);
        for (int k = 0; k < per_traj && collected < opts.samples; ++k) {
            int nu = sampling ? sampling->decide(P_hat) : terminal.decide(b.mean(grid));
            if (unif(rng) < opts.explore) nu = unif(rng) < 0.5 ? 0 : 1;
            const int gamma = forward_draw(p, unif(rng));
            const int gh = feedback_draw(fb, gamma, unif(rng));
            b = belief_update(b, gh, nu, grid, problem.rec, p, fb);
            P_hat = suboptimal_estimate_update(P_hat, gh, nu, p, fb, problem.rec);
            pol.samples_.push_back(b.weights(grid));
            ++collected;
        }
    }

    const int N = static_cast<int>(pol.samples_.size());
    std::vector<int> items(N);
    std::iota(items.begin(), items.end(), 0);
    pol.tree_.reserve(N);
    pol.root_ = pol.build_tree(items, 0, N);

    struct Branch {
        double prob;
        int next;
    };
    std::array<double, 3> ack_prob{};
    for (int gh = 0; gh < 3; ++gh) ack_prob[gh] = ack_probability(fb, p, gh);
    std::vector<std::array<double, 2>> cost(N);
    std::vector<std::array<std::vector<Branch>, 2>> branches(N);
    for (int s = 0; s < N; ++s) {
        const Belief b = Belief::from_weights(pol.samples_[s]);
        for (int nu = 0; nu < 2; ++nu) {
            cost[s][nu] = b.expect(grid, [&](double P) { return problem.stage_cost(P, nu); });
            for (int gh = 0; gh < 3; ++gh) {
                if (!(ack_prob[gh] > 0.0)) continue;
                const Belief next = belief_update(b, gh, nu, grid, problem.rec, p, fb);
                branches[s][nu].push_back({ack_prob[gh], pol.nearest(next.weights(grid))});
            }
        }
    }

    std::vector<double> V(N), next(N);
    for (int s = 0; s < N; ++s) {
        double v = 0.0;
        for (int i = 0; i < grid.count; ++i) v += pol.samples_[s][i] * terminal.H[i];
        V[s] = v;
    }
    pol.actions_.assign(N, 0);
    for (int t = 0; t < opts.horizon; ++t) {
        for (int s = 0; s < N; ++s) {
            std::array<double, 2> q{};
            for (int nu = 0; nu < 2; ++nu) {
                q[nu] = cost[s][nu];
                for (const auto& br : branches[s][nu]) q[nu] += br.prob * V[br.next];
            }
            pol.actions_[s] = q[1] < q[0] ? 1 : 0;
            next[s] = q[pol.actions_[s]];
        }
        const double offset = next[0];
        for (double& v : next) v -= offset;
        V.swap(next);
    }
    pol.values_ = std::move(V);
    return pol;
}

}  // namespace remest

#include "remest/policy.hpp"

#include "remest/errors.hpp"

#include <algorithm>
#include <cmath>

namespace remest {

CovGrid CovGrid::uniform(double lo, double hi, int count)
{
    if (count < 2) throw DomainError("grid needs at least 2 points");
    if (!(hi > lo)) throw DomainError("grid hi must exceed lo");
    CovGrid g;
    g.lo = lo;
    g.hi = hi;
    g.count = count;
    g.points.resize(count);
    const double h = (hi - lo) / (count - 1);
    for (int i = 0; i < count; ++i) g.points[i] = lo + h * i;
    g.points.back() = hi;
    return g;
}

CovGrid CovGrid::default_for(double Ps, int count) { return uniform(Ps, std::max(2.0, 5.0 * Ps), count); }

CovGrid::Location CovGrid::locate(double x) const
{
    Location loc;
    if (x <= lo) {
        loc.clamped = x < lo;
        return loc;
    }
    if (x >= hi) {
        loc.index = count - 2;
        loc.weight = 1.0;
        loc.clamped = x > hi;
        return loc;
    }
    const double h = cell();
    int i = std::min(count - 2, static_cast<int>((x - lo) / h));
    while (i > 0 && points[i] > x) --i;
    while (i < count - 2 && points[i + 1] < x) ++i;
    loc.index = i;
    loc.weight = (x - points[i]) / (points[i + 1] - points[i]);
    return loc;
}

double CovGrid::interpolate(const std::vector<double>& values, double x) const
{
    const Location loc = locate(x);
    return (1.0 - loc.weight) * values[loc.index] + loc.weight * values[loc.index + 1];
}

int CovGrid::nearest(double x) const
{
    const Location loc = locate(x);
    return loc.weight > 0.5 ? loc.index + 1 : loc.index;
}

ScalarDecisionProblem ScalarDecisionProblem::make(const AugmentedModel& aug, const ForwardChannel& fwd, double lambda,
                                                  std::optional<FeedbackChannel> fb)
{
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("cost.lambda must lie in [0, 1]");
    if (!(fwd.p >= 0.0 && fwd.p <= 1.0)) throw DomainError("channel.p must lie in [0, 1]");
    ScalarDecisionProblem prob;
    prob.rec = ScalarRiccati::from(aug);
    prob.p = fwd.p;
    prob.lambda = lambda;
    prob.J = {packet_energy(fwd, 0), packet_energy(fwd, 1)};
    prob.fb = std::move(fb);
    return prob;
}

int ScalarDecisionProblem::successors(double P, int nu, std::array<Successor, 3>& out) const
{
    const double ol = rec.open_loop(P);
    const double up = rec.update(P, nu);
    if (!fb) {
        int k = 0;
        if (p > 0.0) out[k++] = {p, ol};
        if (p < 1.0) out[k++] = {1.0 - p, up};
        return k;
    }
    int k = 0;
    for (int gh = 0; gh < 3; ++gh) {
        const double w0 = fb->prob(gh, 0) * p;
        const double w1 = fb->prob(gh, 1) * (1.0 - p);
        const double total = w0 + w1;
        if (!(total > 0.0)) continue;
        out[k++] = {total, (w0 / total) * ol + (w1 / total) * up};
    }
    return k;
}

double stage_cost(const StructuredCov& P, int nu, double lambda, const RatePlan& plan, const ForwardChannel& fwd,
                  const AugmentedModel& aug)
{
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("cost.lambda must lie in [0, 1]");
    const StructuredCov next = expected_riccati(P, nu, fwd.p, aug);
    return lambda * next.P11.trace() + (1.0 - lambda) * packet_energy(plan, fwd, nu);
}

namespace {

struct Transition {
    int index;
    double weight;
    double prob;
};

struct ActionModel {
    double cost = 0.0;
    int n = 0;
    std::array<Transition, 3> next{};
};

double expectation(const ActionModel& am, const std::vector<double>& H)
{
    double v = 0.0;
    for (int s = 0; s < am.n; ++s) {
        const auto& t = am.next[s];
        v += t.prob * ((1.0 - t.weight) * H[t.index] + t.weight * H[t.index + 1]);
    }
    return v;
}

}  // namespace

PolicyTable relative_value_iteration(const CovGrid& grid, const ScalarDecisionProblem& problem, const RviOptions& opts)
{
    const int N = grid.count;
    if (opts.ref_index < 0 || opts.ref_index >= N) throw DomainError("reference index outside the grid");
    if (opts.fixed_actions && static_cast<int>(opts.fixed_actions->size()) != N)
        throw DomainError("fixed action table has the wrong length");

    PolicyTable table;
    table.grid = grid;
    table.problem = problem;
    table.lambda = problem.lambda;
    table.p = problem.p;

    // Successor brackets do not change across iterations.
    std::vector<std::array<ActionModel, 2>> models(N);
    for (int i = 0; i < N; ++i) {
        for (int nu = 0; nu < 2; ++nu) {
            ActionModel& am = models[i][nu];
            am.cost = problem.stage_cost(grid.points[i], nu);
            std::array<ScalarDecisionProblem::Successor, 3> succ;
            am.n = problem.successors(grid.points[i], nu, succ);
            for (int s = 0; s < am.n; ++s) {
                const auto loc = grid.locate(succ[s].P);
                if (loc.clamped) ++table.clamp_count;
                am.next[s] = {loc.index, loc.weight, succ[s].prob};
            }
            table.evaluations += am.n;
        }
    }

    std::vector<double> H = opts.H0.empty() ? std::vector<double>(N, 0.0) : opts.H0;
    if (static_cast<int>(H.size()) != N) throw DomainError("initial relative values have the wrong length");
    std::vector<double> next(N);
    std::array<std::vector<double>, 2> Qv{std::vector<double>(N), std::vector<double>(N)};
    std::vector<int> action(N, 0);

    bool converged = false;
    for (long it = 0; it < opts.max_iter; ++it) {
        for (int i = 0; i < N; ++i) {
            Qv[0][i] = models[i][0].cost + expectation(models[i][0], H);
            Qv[1][i] = models[i][1].cost + expectation(models[i][1], H);
            if (opts.fixed_actions) {
                action[i] = (*opts.fixed_actions)[i];
            } else {
                action[i] = Qv[1][i] < Qv[0][i] ? 1 : 0;
            }
            next[i] = Qv[action[i]][i];
        }
        for (int i = 0; i + 1 < N; ++i) {
            const double inc = (Qv[1][i + 1] - Qv[0][i + 1]) - (Qv[1][i] - Qv[0][i]);
            table.max_submodularity_violation = std::max(table.max_submodularity_violation, inc);
        }
        const double offset = next[opts.ref_index];
        double dmax = -std::numeric_limits<double>::infinity();
        double dmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < N; ++i) {
            next[i] -= offset;
            const double d = next[i] - H[i];
            dmax = std::max(dmax, d);
            dmin = std::min(dmin, d);
        }
        H.swap(next);
        table.rho = offset;
        table.iterations = it + 1;
        if (dmax - dmin < opts.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NonConvergence("relative value iteration did not converge");

    table.H = std::move(H);
    table.action = std::move(action);
    table.Qv = std::move(Qv);
    return table;
}

PolicyTable relative_value_iteration(const CovGrid& grid, double lambda, const RatePlan& plan,
                                     const ForwardChannel& fwd, const AugmentedModel& aug, double tol, long max_iter,
                                     int ref_index)
{
    if (plan.n0 != fwd.n0 || plan.n1 != fwd.n1) throw DomainError("channel packet sizes do not match the rate plan");
    RviOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    opts.ref_index = ref_index;
    return relative_value_iteration(grid, ScalarDecisionProblem::make(aug, fwd, lambda), opts);
}

bool PolicyTable::monotone() const
{
    for (std::size_t i = 1; i < action.size(); ++i)
        if (action[i] < action[i - 1]) return false;
    return true;
}

double PolicyTable::threshold() const
{
    for (std::size_t i = 0; i < action.size(); ++i)
        if (action[i] == 1) return grid.points[i] - 0.5 * grid.cell();
    return std::numeric_limits<double>::infinity();
}

double PolicyTable::q_value(double P, int nu) const
{
    std::array<ScalarDecisionProblem::Successor, 3> succ;
    const int n = problem.successors(P, nu, succ);
    double v = problem.stage_cost(P, nu);
    for (int s = 0; s < n; ++s) v += succ[s].prob * grid.interpolate(H, succ[s].P);
    return v;
}

int PolicyTable::decide(double P) const { return q_value(P, 1) < q_value(P, 0) ? 1 : 0; }

ShapeReport value_shape(const PolicyTable& table)
{
    ShapeReport r;
    const auto& H = table.H;
    for (std::size_t i = 1; i < H.size(); ++i) r.max_decrease = std::max(r.max_decrease, H[i - 1] - H[i]);
    for (std::size_t i = 1; i + 1 < H.size(); ++i)
        r.max_second_difference = std::max(r.max_second_difference, H[i + 1] - 2.0 * H[i] + H[i - 1]);
    return r;
}

double MonteCarloEvaluator::operator()(double phi, std::uint64_t crn_seed) const
{
    Rng forward_rng(crn_seed);
    Rng feedback_rng(crn_seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto& rec = problem.rec;
    double P = P0 > 0.0 ? P0 : rec.Ps;
    double P_hat = P;
    const long burn = static_cast<long>(burn_in_fraction * steps);
    double sum = 0.0;
    for (long k = 0; k < steps; ++k) {
        const int nu = threshold_policy(phi, problem.fb ? P_hat : P);
        const int gamma = forward_draw(problem.p, unif(forward_rng));
        if (problem.fb) {
            const int gh = feedback_draw(*problem.fb, gamma, unif(feedback_rng));
            P_hat = suboptimal_estimate_update(P_hat, gh, nu, problem.p, *problem.fb, rec);
        }
        P = rec.step(P, gamma, nu);
        if (k >= burn) sum += problem.lambda * P + (1.0 - problem.lambda) * problem.J[nu];
    }
    return sum / static_cast<double>(steps - burn);
}

double BellmanEvaluator::operator()(double phi, std::uint64_t) const
{
    const int N = grid.count;
    std::vector<double> V(N, 0.0), next(N);
    std::array<ScalarDecisionProblem::Successor, 3> succ;
    for (int t = 0; t < horizon; ++t) {
        for (int i = 0; i < N; ++i) {
            const double P = grid.points[i];
            const int nu = threshold_policy(phi, P);
            const int n = problem.successors(P, nu, succ);
            double v = problem.stage_cost(P, nu);
            for (int s = 0; s < n; ++s) v += succ[s].prob * grid.interpolate(V, succ[s].P);
            next[i] = v;
        }
        V.swap(next);
    }
    const double start = P0 > 0.0 ? P0 : problem.rec.Ps;
    return grid.interpolate(V, start) / horizon;
}

SpsaResult spsa_threshold_search(const ThresholdEvaluator& evaluator, const SpsaOptions& opts, Rng& rng)
{
    if (!(opts.kappa > 0.5 && opts.kappa <= 1.0)) throw DomainError("spsa.kappa must lie in (0.5, 1]");
    if (!(opts.omega > 0.0) || !(opts.varsigma > 0.0)) throw DomainError("spsa.omega and spsa.varsigma must be positive");
    if (opts.iters < 0) throw DomainError("spsa.iters must be nonnegative");
    SpsaResult result;
    double phi = std::clamp(opts.phi0, opts.lo, opts.hi);
    result.history.reserve(opts.iters);
    std::bernoulli_distribution coin(0.5);
    for (int n = 0; n < opts.iters; ++n) {
        const double scale = std::pow(n + 1.0, opts.kappa);
        const double omega_n = opts.omega / scale;
        const double step_n = opts.varsigma / scale;
        const double d = coin(rng) ? 1.0 : -1.0;
        const std::uint64_t crn = rng();
        const double j_plus = evaluator(phi + omega_n * d, crn);
        const double j_minus = evaluator(phi - omega_n * d, crn);
        const double grad = (j_plus - j_minus) / (2.0 * omega_n) * d;
        phi = std::clamp(phi - step_n * grad, opts.lo, opts.hi);
        result.history.push_back({n, phi, 0.5 * (j_plus + j_minus)});
    }
    result.phi = phi;
    return result;
}

double suboptimal_estimate_update(double P_hat, int gammahat, int nu, double p, const FeedbackChannel& fb,
                                  const ScalarRiccati& rec)
{
    const auto w = ack_posterior(fb, p, gammahat);
    return w[0] * rec.open_loop(P_hat) + w[1] * rec.update(P_hat, nu);
}

CovEstimate suboptimal_estimate_update(const CovEstimate& est, int gammahat, int nu, const ForwardChannel& fwd,
                                       const FeedbackChannel& fb, const AugmentedModel& aug)
{
    const Matrix full = lift(est.P11_hat, aug.Ps);
    const auto w = ack_posterior(fb, fwd.p, gammahat);
    const Matrix open = open_loop_step(full, aug);
    const Matrix updated = riccati_step(full, 1, nu, aug);
    return {project(w[0] * open + w[1] * updated, aug.Ps)};
}

}  // namespace remest

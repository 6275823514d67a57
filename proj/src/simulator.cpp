#include "remest/simulator.hpp"

#include "remest/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace remest {

PolicySpec PolicySpec::fixed(int nu)
{
    PolicySpec s;
    s.kind = nu ? PolicyKind::Fixed1 : PolicyKind::Fixed0;
    return s;
}

PolicySpec PolicySpec::threshold(double phi)
{
    PolicySpec s;
    s.kind = PolicyKind::Threshold;
    s.phi = phi;
    return s;
}

PolicySpec PolicySpec::optimal(std::shared_ptr<const PolicyTable> table)
{
    PolicySpec s;
    s.kind = PolicyKind::Table;
    s.table = std::move(table);
    return s;
}

PolicySpec PolicySpec::suboptimal(std::shared_ptr<const PolicyTable> table)
{
    PolicySpec s;
    s.kind = PolicyKind::Suboptimal;
    s.table = std::move(table);
    return s;
}

PolicySpec PolicySpec::belief_based(std::shared_ptr<const BeliefPolicy> policy)
{
    PolicySpec s;
    s.kind = PolicyKind::Belief;
    s.belief = std::move(policy);
    return s;
}

std::string policy_kind_name(PolicyKind kind)
{
    switch (kind) {
    case PolicyKind::Fixed0: return "fixed0";
    case PolicyKind::Fixed1: return "fixed1";
    case PolicyKind::Threshold: return "threshold";
    case PolicyKind::Table: return "optimal";
    case PolicyKind::Suboptimal: return "suboptimal";
    case PolicyKind::Belief: return "belief";
    }
    return "unknown";
}

std::string PolicySpec::name() const { return policy_kind_name(kind); }

PolicyKind parse_policy_kind(const std::string& name)
{
    for (PolicyKind k : {PolicyKind::Fixed0, PolicyKind::Fixed1, PolicyKind::Threshold, PolicyKind::Table,
                         PolicyKind::Suboptimal, PolicyKind::Belief})
        if (policy_kind_name(k) == name) return k;
    throw DomainError("unknown policy '" + name + "'");
}

void EpisodeConfig::validate() const
{
    if (T < 1) throw DomainError("sim.T must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("cost.lambda must lie in [0, 1]");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) throw DomainError("sim.burn_in must lie in [0, 1)");
    if (ss.P_s.rows() != model.n()) throw DomainError("steady state does not match the model");
    if (plan.n0 != fwd.n0 || plan.n1 != fwd.n1) throw DomainError("channel packet sizes do not match the rate plan");
    const bool scalar = model.n() == 1;
    switch (policy.kind) {
    case PolicyKind::Table:
    case PolicyKind::Suboptimal:
        if (!policy.table) throw DomainError("policy table missing");
        if (!scalar) throw DomainError("table policies need a scalar plant");
        break;
    case PolicyKind::Belief:
        if (!policy.belief) throw DomainError("belief policy missing");
        if (!scalar) throw DomainError("belief policies need a scalar plant");
        break;
    default: break;
    }
    if (policy.kind == PolicyKind::Belief && !grid && !policy.belief) throw DomainError("belief filter needs a grid");
}

Rng substream(std::uint64_t seed, Stream stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

AugmentedModel episode_model(const EpisodeConfig& cfg)
{
    if (cfg.noise_model == NoiseModel::Shared)
        return AugmentedModel::shared_noise(cfg.model, cfg.ss, cfg.plan.target_trace);
    return AugmentedModel::from_plan(cfg.model, cfg.ss, cfg.plan);
}

namespace {

double unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Matrix initial_receiver_cov(const SystemModel& model, const SensorSteadyState& ss)
{
    if (is_psd(symmetrize(model.P_x0 - ss.P_s), 1e-12)) return model.P_x0;
    return ss.P_s;
}

struct ForcedPath {
    const std::vector<int>* nu = nullptr;
    const std::vector<int>* gamma = nullptr;
};

// One episode. The callback sees the receiver error after every step.
template <typename OnError>
EpisodeResult simulate(const EpisodeConfig& cfg, const ForcedPath& forced, OnError&& on_error)
{
    const SystemModel& model = cfg.model;
    const int n = model.n();
    const bool scalar = n == 1;
    const AugmentedModel aug = episode_model(cfg);
    const ScalarRiccati rec = scalar ? ScalarRiccati::from(aug) : ScalarRiccati{};
    const std::array<double, 2> J = {packet_energy(cfg.fwd, 0), packet_energy(cfg.fwd, 1)};
    const bool forced_run = forced.nu != nullptr;
    const bool track_state = cfg.simulate_state || forced_run;

    Rng plant_rng = substream(cfg.seed, Stream::Plant);
    Rng meas_rng = substream(cfg.seed, Stream::Measurement);
    Rng quant_rng = substream(cfg.seed, Stream::Quantizer);
    Rng fwd_rng = substream(cfg.seed, Stream::Forward);
    Rng fb_rng = substream(cfg.seed, Stream::Feedback);

    const Matrix P11_0 = initial_receiver_cov(model, cfg.ss);
    Matrix P = lift(P11_0, cfg.ss.P_s);
    double p11 = scalar ? P11_0(0, 0) : 0.0;
    double p11_hat = p11;
    CovEstimate Phat{P11_0};

    const bool use_belief = cfg.policy.kind == PolicyKind::Belief;
    const CovGrid* grid = nullptr;
    if (use_belief) grid = cfg.grid ? &*cfg.grid : &cfg.policy.belief->grid();
    Belief belief = Belief::point_mass(p11);

    Plant plant(model);
    std::array<GaussianSampler, 2> qnoise;
    for (int nu = 0; nu < 2; ++nu) qnoise[nu] = GaussianSampler(aug.R[nu] - symmetrize(cfg.ss.K_f * model.Sigma_v * cfg.ss.K_f.transpose()));

    Vector x, xs_pred, theta_hat;
    if (track_state) {
        // Sensor prediction and state drawn so that the stacked error has the lifted covariance.
        xs_pred = model.x0_mean + GaussianSampler(symmetrize(P11_0 - cfg.ss.P_s)).sample(plant_rng);
        x = xs_pred + GaussianSampler(cfg.ss.P_s).sample(plant_rng);
        theta_hat = Vector(2 * n);
        theta_hat.head(n) = model.x0_mean;
        theta_hat.tail(n) = model.x0_mean;
    }

    EpisodeResult res;
    if (cfg.record_trace) res.trace.reserve(static_cast<std::size_t>(cfg.T));
    const long burn = static_cast<long>(cfg.burn_in_fraction * static_cast<double>(cfg.T));
    KahanSum sum_cost, sum_var, sum_energy, sum_err;
    long count_nu1 = 0;

    for (long k = 0; k < cfg.T; ++k) {
        const double P_now = scalar ? p11 : P.topLeftCorner(n, n).trace();
        const double Phat_now = scalar ? p11_hat : Phat.P11_hat.trace();

        int nu = 0;
        if (forced_run) {
            nu = (*forced.nu)[k];
        } else {
            switch (cfg.policy.kind) {
            case PolicyKind::Fixed0: nu = 0; break;
            case PolicyKind::Fixed1: nu = 1; break;
            case PolicyKind::Threshold: nu = threshold_policy(cfg.policy.phi, P_now); break;
            case PolicyKind::Table: nu = cfg.policy.table->decide(p11); break;
            case PolicyKind::Suboptimal: nu = cfg.policy.table->decide(p11_hat); break;
            case PolicyKind::Belief: nu = cfg.policy.belief->decide(belief); break;
            }
        }

        Vector z;
        PlantOutput out;
        SensorFilterOutput filt;
        if (track_state) {
            out = plant.step(x, plant_rng, meas_rng);
            filt = sensor_filter_step(xs_pred, out.y, cfg.ss, model);
            const Vector& packet = nu ? filt.xhat_filt : filt.innov;
            z = packet + qnoise[nu].sample(quant_rng);
        }

        const double u_fwd = unit(fwd_rng);
        const int gamma = forced_run ? (*forced.gamma)[k] : forward_draw(cfg.fwd.p, u_fwd);

        if (track_state) {
            const Matrix P_cur = scalar ? lift(scalar_matrix(p11), cfg.ss.P_s) : P;
            theta_hat = receiver_estimate_step(theta_hat, P_cur, z, gamma, nu, aug);
        }
        if (scalar) {
            p11 = rec.step(p11, gamma, nu);
        } else {
            P = riccati_step(P, gamma, nu, aug);
        }

        const int gammahat = feedback_draw(cfg.fb, gamma, unit(fb_rng));
        if (scalar) {
            p11_hat = suboptimal_estimate_update(p11_hat, gammahat, nu, cfg.fwd.p, cfg.fb, rec);
        } else {
            Phat = suboptimal_estimate_update(Phat, gammahat, nu, cfg.fwd, cfg.fb, aug);
        }
        if (use_belief) belief = belief_update(belief, gammahat, nu, *grid, rec, cfg.fwd.p, cfg.fb);

        const double P_next = scalar ? p11 : P.topLeftCorner(n, n).trace();
        const double cost = cfg.lambda * P_next + (1.0 - cfg.lambda) * J[nu];

        if (track_state) {
            x = out.x_next;
            xs_pred = filt.xhat_pred_next;
            const Vector err = x - theta_hat.head(n);
            on_error(k + 1, err);
            if (k >= burn) sum_err.add(err.squaredNorm());
        }
        if (k >= burn) {
            sum_cost.add(cost);
            sum_var.add(P_next);
            sum_energy.add(J[nu]);
            count_nu1 += nu;
        }
        if (cfg.record_trace) res.trace.push_back({k, P_now, Phat_now, nu, gamma, gammahat, cost});
    }

    const long counted = cfg.T - burn;
    res.counted_steps = counted;
    res.avg_est_var = sum_var.value() / counted;
    res.avg_energy = sum_energy.value() / counted;
    res.avg_cost = cfg.lambda * res.avg_est_var + (1.0 - cfg.lambda) * res.avg_energy;
    res.frac_nu1 = static_cast<double>(count_nu1) / counted;
    res.mean_sq_error = track_state ? sum_err.value() / counted : std::numeric_limits<double>::quiet_NaN();
    return res;
}

}  // namespace

EpisodeResult run_episode(const EpisodeConfig& cfg)
{
    cfg.validate();
    return simulate(cfg, ForcedPath{}, [](long, const Vector&) {});
}

int resolve_workers(int requested)
{
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

// Runs task(i) for i in [0, count) on `workers` threads.
template <typename Task>
void parallel_for(int count, int workers, Task&& task)
{
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

Prepared prepare(const Scenario& sc, double p)
{
    sc.model.validate();
    Prepared prep;
    prep.scenario = sc;
    prep.scenario.p = p;
    prep.ss = solve_dare(sc.model);
    prep.plan = select_rates(sc.quantizer, prep.ss, sc.target_trace);
    prep.fwd = ForwardChannel::from_loss(p, prep.plan.n0, prep.plan.n1, sc.N0, sc.energy_scale);
    prep.dp_model = AugmentedModel::shared_noise(sc.model, prep.ss, sc.target_trace);
    if (sc.model.n() == 1) {
        const double Ps = prep.ss.P_s(0, 0);
        const double lo = sc.grid_lo > 0.0 ? sc.grid_lo : Ps;
        const double hi = sc.grid_hi > 0.0 ? sc.grid_hi : std::max(2.0, 5.0 * Ps);
        if (lo < Ps - 1e-12) throw DomainError("solver.grid.lo must be >= P_s");
        prep.grid = CovGrid::uniform(lo, hi, sc.grid_count);
    }
    return prep;
}

Prepared prepare(const Scenario& sc) { return prepare(sc, sc.p); }

ScalarDecisionProblem decision_problem(const Prepared& prep, bool with_feedback)
{
    std::optional<FeedbackChannel> fb;
    if (with_feedback) fb = prep.scenario.fb;
    return ScalarDecisionProblem::make(prep.dp_model, prep.fwd, prep.scenario.lambda, fb);
}

PolicyTable solve_policy(const Prepared& prep, bool with_feedback)
{
    if (prep.scenario.model.n() != 1) throw DomainError("the policy solver needs a scalar plant");
    return relative_value_iteration(prep.grid, decision_problem(prep, with_feedback), prep.scenario.rvi);
}

PolicySpec build_policy(const Prepared& prep, PolicyKind kind)
{
    switch (kind) {
    case PolicyKind::Fixed0: return PolicySpec::fixed(0);
    case PolicyKind::Fixed1: return PolicySpec::fixed(1);
    case PolicyKind::Threshold: return PolicySpec::threshold(prep.scenario.phi);
    case PolicyKind::Table: return PolicySpec::optimal(std::make_shared<PolicyTable>(solve_policy(prep, false)));
    case PolicyKind::Suboptimal:
        return PolicySpec::suboptimal(std::make_shared<PolicyTable>(solve_policy(prep, true)));
    case PolicyKind::Belief: {
        const PolicyTable terminal = solve_policy(prep, false);
        const PolicyTable sampling = solve_policy(prep, true);
        return PolicySpec::belief_based(std::make_shared<BeliefPolicy>(belief_value_iteration(
            prep.grid, decision_problem(prep, true), terminal, prep.scenario.belief, &sampling)));
    }
    }
    throw DomainError("unknown policy kind");
}

EpisodeConfig episode_config(const Prepared& prep, const PolicySpec& policy, std::uint64_t seed)
{
    const Scenario& sc = prep.scenario;
    EpisodeConfig cfg;
    cfg.model = sc.model;
    cfg.ss = prep.ss;
    cfg.plan = prep.plan;
    cfg.fwd = prep.fwd;
    cfg.fb = sc.fb;
    cfg.lambda = sc.lambda;
    cfg.policy = policy;
    cfg.T = sc.T;
    cfg.seed = seed;
    cfg.noise_model = sc.noise_model;
    cfg.burn_in_fraction = sc.burn_in_fraction;
    cfg.simulate_state = sc.simulate_state;
    if (sc.model.n() == 1) cfg.grid = prep.grid;
    return cfg;
}

std::vector<SweepCell> sweep(const Scenario& sc, const std::vector<double>& p_values,
                             const std::vector<PolicyKind>& policies, int runs, int workers)
{
    if (policies.empty()) throw DomainError("sweep needs at least one policy");
    if (p_values.empty()) throw DomainError("sweep needs at least one p value");
    if (runs < 1) throw DomainError("sweep needs runs >= 1");

    struct Cell {
        double p;
        PolicySpec policy;
        EpisodeConfig base;
    };
    std::vector<Cell> cells;
    for (double p : p_values) {
        const Prepared prep = prepare(sc, p);
        for (PolicyKind kind : policies) {
            PolicySpec spec = build_policy(prep, kind);
            cells.push_back({p, spec, episode_config(prep, spec, sc.seed)});
        }
    }

    const int total = static_cast<int>(cells.size()) * runs;
    std::vector<EpisodeResult> results(total);
    parallel_for(total, resolve_workers(workers), [&](int task) {
        const Cell& cell = cells[task / runs];
        EpisodeConfig cfg = cell.base;
        cfg.seed = sc.seed + static_cast<std::uint64_t>(task % runs);
        results[task] = run_episode(cfg);
    });

    std::vector<SweepCell> table;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        KahanSum cost, var, energy;
        for (int r = 0; r < runs; ++r) {
            const EpisodeResult& e = results[c * runs + r];
            cost.add(e.avg_cost);
            var.add(e.avg_est_var);
            energy.add(e.avg_energy);
        }
        const double mean = cost.value() / runs;
        KahanSum sq;
        for (int r = 0; r < runs; ++r) {
            const double d = results[c * runs + r].avg_cost - mean;
            sq.add(d * d);
        }
        const double se = runs > 1 ? std::sqrt(sq.value() / (runs - 1) / runs) : 0.0;
        const PolicySpec& spec = cells[c].policy;
        const double rho = spec.table ? spec.table->rho : std::numeric_limits<double>::quiet_NaN();
        table.push_back({cells[c].p, spec.name(), mean, var.value() / runs, energy.value() / runs, se, runs, rho});
    }
    return table;
}

CovarianceCheckReport empirical_covariance_check(const EpisodeConfig& cfg, int runs, std::vector<long> checkpoints,
                                                 int workers)
{
    cfg.validate();
    if (runs < 2) throw DomainError("covariance check needs at least 2 runs");
    if (checkpoints.empty()) throw DomainError("covariance check needs checkpoints");
    std::sort(checkpoints.begin(), checkpoints.end());
    const long T = checkpoints.back();
    if (checkpoints.front() < 1) throw DomainError("checkpoints must be >= 1");
    const int n = cfg.model.n();

    // One realization of (gamma, nu) shared by every run.
    EpisodeConfig master = cfg;
    master.T = T;
    master.record_trace = true;
    master.simulate_state = false;
    master.burn_in_fraction = 0.0;
    const EpisodeResult path = run_episode(master);
    std::vector<int> nus(T), gammas(T);
    for (long k = 0; k < T; ++k) {
        nus[k] = path.trace[k].nu;
        gammas[k] = path.trace[k].gamma;
    }

    // Deterministic covariance along that realization.
    const AugmentedModel aug = episode_model(cfg);
    std::vector<double> analytic(T + 1);
    Matrix P = lift(initial_receiver_cov(cfg.model, cfg.ss), cfg.ss.P_s);
    analytic[0] = P.topLeftCorner(n, n).trace();
    for (long k = 0; k < T; ++k) {
        P = riccati_step(P, gammas[k], nus[k], aug);
        analytic[k + 1] = P.topLeftCorner(n, n).trace();
    }

    // Fixed-size chunks keep the reduction order independent of the worker count.
    constexpr int kChunk = 64;
    const int chunks = (runs + kChunk - 1) / kChunk;
    struct Moments {
        std::vector<double> sum;  // (T + 1) x n
        std::vector<double> sq;
    };
    std::vector<Moments> partial(chunks);
    ForcedPath forced{&nus, &gammas};
    parallel_for(chunks, resolve_workers(workers), [&](int c) {
        Moments m{std::vector<double>((T + 1) * n, 0.0), std::vector<double>((T + 1) * n, 0.0)};
        const int first = c * kChunk;
        const int last = std::min(runs, first + kChunk);
        for (int r = first; r < last; ++r) {
            EpisodeConfig run = cfg;
            run.T = T;
            run.seed = cfg.seed + 1 + static_cast<std::uint64_t>(r);
            run.burn_in_fraction = 0.0;
            run.record_trace = false;
            simulate(run, forced, [&](long k, const Vector& err) {
                for (int j = 0; j < n; ++j) {
                    m.sum[k * n + j] += err(j);
                    m.sq[k * n + j] += err(j) * err(j);
                }
            });
        }
        partial[c] = std::move(m);
    });

    std::vector<double> sum((T + 1) * n, 0.0), sq((T + 1) * n, 0.0);
    for (const auto& m : partial)
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += m.sum[i];
            sq[i] += m.sq[i];
        }

    auto empirical_at = [&](long k) {
        double tr = 0.0;
        for (int j = 0; j < n; ++j) {
            const double mean = sum[k * n + j] / runs;
            tr += (sq[k * n + j] - runs * mean * mean) / (runs - 1);
        }
        return tr;
    };
    auto relative = [](double emp, double ref) {
        if (ref > 0.0) return std::abs(emp - ref) / ref;
        return emp == ref ? 0.0 : std::numeric_limits<double>::infinity();
    };

    CovarianceCheckReport rep;
    rep.runs = runs;
    rep.checkpoints = checkpoints;
    for (long k : checkpoints) {
        const double emp = empirical_at(k);
        rep.empirical.push_back(emp);
        rep.analytic.push_back(analytic[k]);
        rep.deviations.push_back(relative(emp, analytic[k]));
        rep.max_relative_deviation = std::max(rep.max_relative_deviation, rep.deviations.back());
    }
    KahanSum ms;
    for (long k = 1; k <= T; ++k) {
        const double d = relative(empirical_at(k), analytic[k]);
        ms.add(d * d);
    }
    rep.rms_relative_deviation = std::sqrt(ms.value() / T);
    return rep;
}

}  // namespace remest

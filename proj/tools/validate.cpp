#include "cli.hpp"

#include <cmath>
#include <sstream>

namespace remest::cli {

namespace {

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

CheckResult check(std::string name, bool ok, std::string detail = {}) { return {std::move(name), ok, std::move(detail)}; }

}  // namespace

std::vector<CheckResult> run_validation(const RunConfig& cfg, bool full)
{
    std::vector<CheckResult> out;
    const Scenario& sc = cfg.scenario;
    const Prepared prep = prepare(sc);
    const SystemModel& model = sc.model;
    const auto& ss = prep.ss;
    const bool scalar = model.n() == 1;

    {
        const double dare = dare_residual(model, ss.P_s);
        const double lyap = lyapunov_residual(model, ss);
        out.push_back(check("dare_lyapunov_residuals", dare <= 1e-10 && lyap <= 1e-10,
                            "dare " + fmt(dare) + ", lyapunov " + fmt(lyap)));
        const bool psd = is_psd(ss.P_s) && is_psd(ss.Sigma_s) && is_psd(ss.innov_cov) && is_psd(ss.filt_est_cov);
        out.push_back(check("sensor_covariances_psd", psd));
    }

    out.push_back(check("rate_order", prep.plan.n0 <= prep.plan.n1,
                        "n0 " + std::to_string(prep.plan.n0) + ", n1 " + std::to_string(prep.plan.n1)));

    {
        double worst = 0.0;
        for (int i = 1; i < 500; ++i) {
            const double pb = 0.5 * i / 500.0;
            worst = std::max(worst, std::abs(bit_error_from_energy(energy_from_bit_error(pb, sc.N0), sc.N0) - pb));
        }
        double loss = 0.0;
        for (int i = 1; i < 100; ++i) {
            const double p = i / 100.0;
            loss = std::max(loss, std::abs(packet_loss_from_bit_error(bit_error_from_packet_loss(p, 5), 5) - p));
        }
        out.push_back(check("channel_roundtrips", worst <= 1e-10 && loss <= 1e-12,
                            "energy " + fmt(worst) + ", loss " + fmt(loss)));
        double rows = 0.0;
        for (const auto& row : sc.fb.Amat) rows = std::max(rows, std::abs(row[0] + row[1] + row[2] - 1.0));
        out.push_back(check("feedback_rows_stochastic", rows <= 1e-15, fmt(rows)));
    }

    const AugmentedModel aug = AugmentedModel::shared_noise(model, ss, sc.target_trace);
    {
        Rng rng(sc.seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const long steps = full ? 100'000 : 2'000;
        const int chains = full ? 100 : 10;
        double worst = 0.0;
        const int n = model.n();
        for (int c = 0; c < chains; ++c) {
            Matrix G = Matrix(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) G(i, j) = unif(rng);
            Matrix P = lift(ss.P_s + G * G.transpose(), ss.P_s);
            for (long k = 0; k < steps / chains; ++k) {
                P = riccati_step(P, unif(rng) < 0.5, unif(rng) < 0.5, aug);
                worst = std::max(worst, structure_deviation(P, ss.P_s));
            }
        }
        out.push_back(check("structure_closure", worst <= 1e-9, "max deviation " + fmt(worst)));
    }

    if (!scalar) {
        out.push_back(check("scalar_checks", true, "skipped: plant is not scalar"));
        return out;
    }

    const ScalarRiccati rec = ScalarRiccati::from(aug);
    const double Ps = rec.Ps;
    const int pts = full ? 200 : 50;
    const double hi = prep.grid.hi;
    {
        double worst = 0.0;
        for (int i = 0; i < pts; ++i) {
            const double P = Ps + (hi - Ps) * i / (pts - 1);
            for (int nu = 0; nu < 2; ++nu)
                for (int gamma = 0; gamma < 2; ++gamma) {
                    const Matrix next = riccati_step(lift(scalar_matrix(P), aug.Ps), gamma, nu, aug);
                    worst = std::max(worst, std::abs(next(0, 0) - rec.step(P, gamma, nu)) / std::max(1.0, P));
                }
        }
        out.push_back(check("scalar_fast_path", worst <= 1e-12, "max difference " + fmt(worst)));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < pts; ++i)
            for (int j = 0; j <= i; ++j) {
                const double P1 = Ps + (hi - Ps) * i / (pts - 1);
                const double P2 = Ps + (hi - Ps) * j / (pts - 1);
                const double lhs = rec.expected(P1, 1, sc.p) + rec.expected(P2, 0, sc.p);
                const double rhs = rec.expected(P1, 0, sc.p) + rec.expected(P2, 1, sc.p);
                worst = std::max(worst, lhs - rhs);
            }
        out.push_back(check("submodularity", worst <= 1e-12, "max excess " + fmt(worst)));
    }
    {
        const PolicyTable table = solve_policy(prep, false);
        const ShapeReport shape = value_shape(table);
        out.push_back(check("threshold_structure", table.monotone(), "threshold " + fmt(table.threshold())));
        out.push_back(check("objective_submodular", table.max_submodularity_violation <= 1e-9,
                            fmt(table.max_submodularity_violation)));
        out.push_back(check("value_shape", shape.max_second_difference <= 1e-8 && shape.max_decrease <= 1e-8,
                            "second difference " + fmt(shape.max_second_difference) + ", decrease " +
                                fmt(shape.max_decrease)));
        RviOptions fixed = sc.rvi;
        double best_fixed = std::numeric_limits<double>::infinity();
        for (int nu = 0; nu < 2; ++nu) {
            fixed.fixed_actions = std::vector<int>(table.grid.count, nu);
            best_fixed = std::min(best_fixed, relative_value_iteration(prep.grid, decision_problem(prep, false), fixed).rho);
        }
        out.push_back(check("optimal_beats_fixed", table.rho <= best_fixed + 1e-9,
                            "rho " + fmt(table.rho) + ", best fixed " + fmt(best_fixed)));
        const double clamp = static_cast<double>(table.clamp_count) / table.evaluations;
        out.push_back(check("grid_clamping", true, "clamped fraction " + fmt(clamp) + " (informational)"));
    }
    {
        EpisodeConfig ep = episode_config(prep, PolicySpec::threshold(prep.grid.lo + 0.1 * (hi - prep.grid.lo)), sc.seed);
        ep.fb = FeedbackChannel(0.0, 0.0);
        ep.T = full ? 100'000 : 10'000;
        ep.simulate_state = false;
        ep.record_trace = true;
        const EpisodeResult res = run_episode(ep);
        bool equal = true;
        for (const auto& r : res.trace) equal = equal && r.P11 == r.Phat11;
        out.push_back(check("perfect_feedback_equivalence", equal));

        Belief b = Belief::point_mass(res.trace.front().P11);
        bool atom = true;
        for (std::size_t k = 0; k + 1 < res.trace.size() && atom; ++k) {
            const auto& r = res.trace[k];
            b = belief_update(b, r.gammahat, r.nu, prep.grid, rec, prep.fwd.p, ep.fb);
            atom = b.is_atom() && b.atom_location() == res.trace[k + 1].P11;
        }
        out.push_back(check("perfect_feedback_belief_point_mass", atom));
    }
    return out;
}

}  // namespace remest::cli

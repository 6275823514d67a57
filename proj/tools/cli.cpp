#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace remest::cli {

namespace {

std::string format_matrix(const Matrix& m)
{
    std::ostringstream os;
    os << std::setprecision(12);
    if (m.size() == 1) {
        os << m(0, 0);
        return os.str();
    }
    os << '[';
    for (int i = 0; i < m.rows(); ++i) {
        if (i) os << "; ";
        for (int j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
    }
    os << ']';
    return os.str();
}

// Destination for CSV output: a file when a path is given, else `fallback`.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : os_(&fallback)
    {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw ConfigError("cannot open output '" + path + "'");
            os_ = file_.get();
        }
        *os_ << std::setprecision(12);
    }
    std::ostream& stream() { return *os_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

void provenance(std::ostream& os, const RunConfig& cfg, const std::string& command, std::uint64_t seed)
{
    os << "# tool=remest version=" << kToolVersion << " command=" << command << '\n';
    os << "# config_hash=fnv1a64:" << cfg.hash << '\n';
    os << "# seed=" << seed << '\n';
}

std::vector<double> p_grid(double lo, double hi, int steps)
{
    if (steps < 1) throw ConfigError("--p-steps must be >= 1");
    if (!(lo > 0.0 && hi <= 1.0 && lo <= hi)) throw ConfigError("--p-min/--p-max must satisfy 0 < p-min <= p-max <= 1");
    std::vector<double> ps;
    for (int i = 0; i < steps; ++i) ps.push_back(steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1));
    return ps;
}

std::vector<PolicyKind> parse_policies(const std::string& list)
{
    std::vector<PolicyKind> kinds;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            kinds.push_back(parse_policy_kind(item));
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
    }
    if (kinds.empty()) throw ConfigError("--policies needs at least one policy");
    return kinds;
}

int cmd_solve(const RunConfig& cfg, const std::string& out_path, std::ostream& out)
{
    const Prepared prep = prepare(cfg.scenario);
    std::ostringstream summary;
    summary << std::setprecision(12);
    summary << "P_s=" << format_matrix(prep.ss.P_s) << '\n'
            << "K_f=" << format_matrix(prep.ss.K_f) << '\n'
            << "K_s=" << format_matrix(prep.ss.K_s) << '\n'
            << "Sigma_s=" << format_matrix(prep.ss.Sigma_s) << '\n'
            << "n0=" << prep.plan.n0 << '\n'
            << "n1=" << prep.plan.n1 << '\n'
            << "p_b0=" << prep.fwd.p_b0 << '\n'
            << "p_b1=" << prep.fwd.p_b1 << '\n'
            << "E_b0=" << prep.fwd.E_b0 << '\n'
            << "E_b1=" << prep.fwd.E_b1 << '\n';
    out << std::setprecision(12) << summary.str();
    if (cfg.scenario.model.n() != 1) throw ConfigError("the policy solver needs a scalar plant (n = m = 1)");

    const PolicyTable table = solve_policy(prep, false);
    out << "rho=" << table.rho << '\n'
        << "threshold=" << table.threshold() << '\n'
        << "iterations=" << table.iterations << '\n'
        << "clamped=" << table.clamp_count << '/' << table.evaluations << '\n';

    Sink sink(out_path, out);
    std::ostream& csv = sink.stream();
    provenance(csv, cfg, "solve", cfg.scenario.seed);
    std::istringstream lines(summary.str());
    for (std::string line; std::getline(lines, line);) csv << "# " << line << '\n';
    csv << "# rho=" << table.rho << '\n';
    csv << "P11,H,action\n";
    for (int i = 0; i < table.grid.count; ++i)
        csv << table.grid.points[i] << ',' << table.H[i] << ',' << table.action[i] << '\n';
    return 0;
}

int cmd_sweep(const RunConfig& cfg, double p_min, double p_max, int p_steps, const std::string& policies, int runs,
              int workers, const std::string& out_path, std::ostream& out)
{
    const auto kinds = parse_policies(policies);
    const auto ps = p_grid(p_min, p_max, p_steps);
    if (runs < 1) throw ConfigError("--runs must be >= 1");
    const auto cells = sweep(cfg.scenario, ps, kinds, runs, workers);
    Sink sink(out_path, out);
    std::ostream& csv = sink.stream();
    provenance(csv, cfg, "sweep", cfg.scenario.seed);
    csv << "p,policy,avg_cost,avg_est_var,avg_energy,stderr_cost\n";
    for (const auto& c : cells)
        csv << c.p << ',' << c.policy << ',' << c.avg_cost << ',' << c.avg_est_var << ',' << c.avg_energy << ','
            << c.stderr_cost << '\n';
    return 0;
}

int cmd_simulate(const RunConfig& cfg, bool trace, const std::string& out_path, std::ostream& out)
{
    const Prepared prep = prepare(cfg.scenario);
    EpisodeConfig ep = episode_config(prep, build_policy(prep, cfg.policy), cfg.scenario.seed);
    ep.record_trace = trace;
    const EpisodeResult res = run_episode(ep);
    Sink sink(out_path, out);
    std::ostream& csv = sink.stream();
    provenance(csv, cfg, "simulate", cfg.scenario.seed);
    csv << "# policy=" << ep.policy.name() << " avg_cost=" << res.avg_cost << " avg_est_var=" << res.avg_est_var
        << " avg_energy=" << res.avg_energy << '\n';
    if (trace) {
        csv << "k,P11,Phat11,nu,gamma,gammahat,stage_cost\n";
        for (const auto& r : res.trace)
            csv << r.k << ',' << r.P11 << ',' << r.Phat11 << ',' << r.nu << ',' << r.gamma << ',' << r.gammahat
                << ',' << r.cost << '\n';
    } else {
        csv << "policy,avg_cost,avg_est_var,avg_energy,frac_nu1\n";
        csv << ep.policy.name() << ',' << res.avg_cost << ',' << res.avg_est_var << ',' << res.avg_energy << ','
            << res.frac_nu1 << '\n';
    }
    return 0;
}

int cmd_threshold_search(const RunConfig& cfg, const std::string& out_path, std::ostream& out)
{
    if (cfg.scenario.model.n() != 1) throw ConfigError("threshold search needs a scalar plant (n = m = 1)");
    const Prepared prep = prepare(cfg.scenario);
    const ScalarDecisionProblem problem = decision_problem(prep, false);
    const SpsaSettings& sp = cfg.spsa;
    ThresholdEvaluator evaluator;
    if (sp.evaluator == EvaluatorKind::MonteCarlo) {
        evaluator = MonteCarloEvaluator{problem, sp.steps, cfg.scenario.burn_in_fraction, 0.0};
    } else {
        evaluator = BellmanEvaluator{prep.grid, problem, sp.horizon, 0.0};
    }
    SpsaOptions opts;
    opts.omega = sp.omega;
    opts.varsigma = sp.varsigma;
    opts.kappa = sp.kappa;
    opts.iters = sp.iters;
    opts.lo = prep.grid.lo;
    opts.hi = prep.grid.hi;
    opts.phi0 = sp.phi0 > 0.0 ? sp.phi0 : prep.grid.lo;
    Rng rng(sp.seed);
    const SpsaResult res = spsa_threshold_search(evaluator, opts, rng);
    const PolicyTable table = solve_policy(prep, false);

    out << std::setprecision(12) << "phi_star=" << res.phi << '\n' << "dp_threshold=" << table.threshold() << '\n';
    Sink sink(out_path, out);
    std::ostream& csv = sink.stream();
    provenance(csv, cfg, "threshold-search", sp.seed);
    csv << "iteration,phi,cost\n";
    for (const auto& r : res.history) csv << r.iteration << ',' << r.phi << ',' << r.cost << '\n';
    return 0;
}

int cmd_validate(const RunConfig& cfg, const std::string& level, std::ostream& out)
{
    if (level != "fast" && level != "full") throw ConfigError("--level must be 'fast' or 'full'");
    const auto checks = run_validation(cfg, level == "full");
    bool ok = true;
    for (const auto& c : checks) {
        out << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")") << '\n';
        ok = ok && c.passed;
    }
    out << (ok ? "all checks passed" : "some checks failed") << '\n';
    return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Remote state estimation over lossy links: policy solver and simulator", "remest"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string config_path;
    std::string out_path;

    auto* solve = app.add_subcommand("solve", "Solve the perfect-acknowledgment average-cost problem");
    solve->add_option("--config", config_path, "Config JSON")->required();
    solve->add_option("--out", out_path, "Policy table CSV");

    double p_min = 0.1, p_max = 0.9;
    int p_steps = 9, runs = 0, workers = 0;
    std::string policies = "fixed0,fixed1,optimal";
    auto* sw = app.add_subcommand("sweep", "Monte Carlo costs over packet loss probabilities");
    sw->add_option("--config", config_path, "Config JSON")->required();
    sw->add_option("--p-min", p_min, "Smallest p");
    sw->add_option("--p-max", p_max, "Largest p");
    sw->add_option("--p-steps", p_steps, "Number of p values");
    sw->add_option("--policies", policies, "Comma-separated: fixed0,fixed1,threshold,optimal,suboptimal,belief");
    sw->add_option("--runs", runs, "Episodes per cell (default sim.runs)");
    sw->add_option("--workers", workers, "Worker threads (default sim.workers or hardware)");
    sw->add_option("--out", out_path, "Output CSV");

    bool trace = false;
    auto* sim = app.add_subcommand("simulate", "Run one episode");
    sim->add_option("--config", config_path, "Config JSON")->required();
    sim->add_flag("--trace", trace, "Write per-step records");
    sim->add_option("--out", out_path, "Output CSV");

    auto* ts = app.add_subcommand("threshold-search", "Stochastic approximation of the threshold");
    ts->add_option("--config", config_path, "Config JSON")->required();
    ts->add_option("--out", out_path, "Iteration CSV");

    std::string level = "fast";
    auto* val = app.add_subcommand("validate", "Run the invariant checks");
    val->add_option("--config", config_path, "Config JSON")->required();
    val->add_option("--level", level, "fast or full");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        const RunConfig cfg = load_config(config_path);
        if (*solve) return cmd_solve(cfg, out_path, out);
        if (*sw) {
            return cmd_sweep(cfg, p_min, p_max, p_steps, policies, runs > 0 ? runs : cfg.runs,
                             workers > 0 ? workers : cfg.workers, out_path, out);
        }
        if (*sim) return cmd_simulate(cfg, trace, out_path, out);
        if (*ts) return cmd_threshold_search(cfg, out_path, out);
        if (*val) return cmd_validate(cfg, level, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NonConvergence& e) {
        err << "solver did not converge: " << e.what() << '\n';
        return 3;
    } catch (const SingularInnovation& e) {
        err << "solver failed: " << e.what() << '\n';
        return 3;
    } catch (const DomainError& e) {
        err << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const UnknownConstant& e) {
        err << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const RateOverflow& e) {
        err << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace remest::cli

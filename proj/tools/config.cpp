#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>

namespace remest::cli {

using nlohmann::json;

namespace {

void flatten(const json& node, const std::string& prefix, json& out)
{
    if (node.is_object()) {
        for (const auto& [key, value] : node.items()) flatten(value, prefix.empty() ? key : prefix + "." + key, out);
        return;
    }
    if (out.contains(prefix)) throw ConfigError("duplicate config key '" + prefix + "'");
    out[prefix] = node;
}

class Reader {
public:
    explicit Reader(const json& flat) : flat_(flat) {}

    bool has(const std::string& key)
    {
        seen_.insert(key);
        return flat_.contains(key);
    }

    double number(const std::string& key, double fallback)
    {
        if (!has(key)) return fallback;
        const json& v = flat_.at(key);
        if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError("config key '" + key + "' must be finite");
        return d;
    }

    long integer(const std::string& key, long fallback)
    {
        if (!has(key)) return fallback;
        const json& v = flat_.at(key);
        if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
        return v.get<long>();
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback)
    {
        if (!has(key)) return fallback;
        const json& v = flat_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw ConfigError("config key '" + key + "' must be a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback)
    {
        if (!has(key)) return fallback;
        const json& v = flat_.at(key);
        if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback)
    {
        if (!has(key)) return fallback;
        const json& v = flat_.at(key);
        if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
        return v.get<std::string>();
    }

    /// Number or array-of-arrays.
    Matrix matrix(const std::string& key)
    {
        seen_.insert(key);
        const json& v = flat_.at(key);
        if (v.is_number()) return scalar_matrix(v.get<double>());
        if (!v.is_array() || v.empty()) throw ConfigError("config key '" + key + "' must be a number or a matrix");
        const int rows = static_cast<int>(v.size());
        const int cols = v[0].is_array() ? static_cast<int>(v[0].size()) : 1;
        if (rows > kMaxAugDim || cols > kMaxAugDim) throw ConfigError("config key '" + key + "' is too large");
        Matrix m(rows, cols);
        for (int i = 0; i < rows; ++i) {
            const json& row = v[i];
            if (cols == 1 && row.is_number()) {
                m(i, 0) = row.get<double>();
                continue;
            }
            if (!row.is_array() || static_cast<int>(row.size()) != cols)
                throw ConfigError("config key '" + key + "' has ragged rows");
            for (int j = 0; j < cols; ++j) {
                if (!row[j].is_number()) throw ConfigError("config key '" + key + "' must hold numbers");
                m(i, j) = row[j].get<double>();
            }
        }
        return m;
    }

    void reject_unknown() const
    {
        for (const auto& [key, value] : flat_.items())
            if (!seen_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }

private:
    const json& flat_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& message)
{
    if (!ok) throw ConfigError(message);
}

SystemModel read_model(Reader& r)
{
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"model.a", "model.A"}, {"model.c", "model.C"}, {"model.sigma_w2", "model.Sigma_w"},
        {"model.sigma_v2", "model.Sigma_v"}};
    for (const auto& [lower, upper] : pairs) {
        const bool a = r.has(lower);
        const bool b = r.has(upper);
        require(!(a && b), "config sets both '" + lower + "' and '" + upper + "'");
        require(a || b, "config must set '" + lower + "' (or '" + upper + "')");
    }
    auto pick = [&](const std::string& lower, const std::string& upper) {
        return r.has(lower) ? r.matrix(lower) : r.matrix(upper);
    };
    SystemModel m;
    m.A = pick("model.a", "model.A");
    m.C = pick("model.c", "model.C");
    m.Sigma_w = pick("model.sigma_w2", "model.Sigma_w");
    m.Sigma_v = pick("model.sigma_v2", "model.Sigma_v");
    const int n = m.n();
    if (r.has("model.P_x0")) {
        m.P_x0 = r.matrix("model.P_x0");
    } else {
        m.P_x0 = Matrix::Identity(n, n);
    }
    if (r.has("model.x0_mean")) {
        const Matrix mean = r.matrix("model.x0_mean");
        require(mean.cols() == 1, "model.x0_mean must be a number or a vector");
        m.x0_mean = mean.col(0);
    } else {
        m.x0_mean = Vector::Zero(n);
    }
    try {
        m.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    return m;
}

}  // namespace

std::string fnv1a_hex(const std::string& text)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig parse_config(const json& doc)
{
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    json flat = json::object();
    flatten(doc, "", flat);
    Reader r(flat);

    RunConfig cfg;
    cfg.flat = flat;
    cfg.hash = fnv1a_hex(flat.dump());
    Scenario& sc = cfg.scenario;

    sc.model = read_model(r);

    const std::string family = r.text("quantizer.family", "lloyd-max");
    if (family == "lloyd-max") {
        sc.quantizer.family = QuantizerFamily::LloydMax;
    } else if (family == "lattice") {
        sc.quantizer.family = QuantizerFamily::Lattice;
    } else {
        throw ConfigError("quantizer.family must be 'lloyd-max' or 'lattice'");
    }
    sc.quantizer.m = static_cast<int>(r.integer("quantizer.m", 1));
    sc.quantizer.lattice_moment = r.number("quantizer.lattice_moment", 1.0 / 12.0);
    sc.target_trace = r.number("quantizer.target_trace", 0.01);
    require(sc.target_trace > 0.0, "quantizer.target_trace must be positive");
    const std::string noise = r.text("quantizer.noise_model", "shared");
    if (noise == "shared") {
        sc.noise_model = NoiseModel::Shared;
    } else if (noise == "per-rate") {
        sc.noise_model = NoiseModel::PerRate;
    } else {
        throw ConfigError("quantizer.noise_model must be 'shared' or 'per-rate'");
    }
    try {
        sc.quantizer.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("quantizer: ") + e.what());
    }

    sc.p = r.number("channel.p", 0.2);
    require(sc.p > 0.0 && sc.p <= 1.0, "channel.p must lie in (0, 1]");
    sc.N0 = r.number("channel.N0", 0.01);
    require(sc.N0 > 0.0, "channel.N0 must be positive");
    sc.energy_scale = r.number("channel.energy_scale", 1.0);
    require(sc.energy_scale > 0.0, "channel.energy_scale must be positive");

    const double eta = r.number("feedback.eta", 0.0);
    const double delta = r.number("feedback.delta", 0.0);
    require(eta >= 0.0 && eta <= 1.0, "feedback.eta must lie in [0, 1]");
    require(delta >= 0.0 && delta <= 1.0, "feedback.delta must lie in [0, 1]");
    sc.fb = FeedbackChannel(eta, delta);

    sc.lambda = r.number("cost.lambda", 0.6);
    require(sc.lambda >= 0.0 && sc.lambda <= 1.0, "cost.lambda must lie in [0, 1]");

    try {
        cfg.policy = parse_policy_kind(r.text("policy.kind", "optimal"));
    } catch (const DomainError& e) {
        throw ConfigError(std::string("policy.kind: ") + e.what());
    }
    sc.phi = r.number("policy.phi", 0.5);

    sc.T = r.integer("sim.T", 100'000);
    require(sc.T >= 1, "sim.T must be >= 1");
    sc.seed = r.unsigned_integer("sim.seed", 1);
    sc.burn_in_fraction = r.number("sim.burn_in", 0.1);
    require(sc.burn_in_fraction >= 0.0 && sc.burn_in_fraction < 1.0, "sim.burn_in must lie in [0, 1)");
    sc.simulate_state = r.boolean("sim.simulate_state", true);
    cfg.runs = static_cast<int>(r.integer("sim.runs", 50));
    require(cfg.runs >= 1, "sim.runs must be >= 1");
    cfg.workers = static_cast<int>(r.integer("sim.workers", 0));
    require(cfg.workers >= 0, "sim.workers must be >= 0");

    sc.grid_count = static_cast<int>(r.integer("solver.grid.count", 40));
    require(sc.grid_count >= 2, "solver.grid.count must be >= 2");
    sc.grid_lo = r.number("solver.grid.lo", 0.0);
    sc.grid_hi = r.number("solver.grid.hi", 0.0);
    require(sc.grid_lo >= 0.0 && sc.grid_hi >= 0.0, "solver.grid.lo and solver.grid.hi must be >= 0");
    require(sc.grid_hi == 0.0 || sc.grid_hi > sc.grid_lo, "solver.grid.hi must exceed solver.grid.lo");
    sc.rvi.tol = r.number("solver.tol", 1e-9);
    require(sc.rvi.tol > 0.0, "solver.tol must be positive");
    sc.rvi.max_iter = r.integer("solver.max_iter", 200'000);
    require(sc.rvi.max_iter >= 1, "solver.max_iter must be >= 1");
    sc.rvi.ref_index = static_cast<int>(r.integer("solver.ref_index", 0));
    require(sc.rvi.ref_index >= 0 && sc.rvi.ref_index < sc.grid_count, "solver.ref_index must index the grid");

    SpsaSettings& sp = cfg.spsa;
    sp.omega = r.number("spsa.omega", 0.3);
    sp.varsigma = r.number("spsa.varsigma", 0.5);
    sp.kappa = r.number("spsa.kappa", 1.0);
    sp.iters = static_cast<int>(r.integer("spsa.iters", 200));
    sp.phi0 = r.number("spsa.phi0", 0.0);
    sp.steps = r.integer("spsa.steps", 10'000);
    sp.horizon = static_cast<int>(r.integer("spsa.horizon", 500));
    sp.seed = r.unsigned_integer("spsa.seed", 1);
    require(sp.omega > 0.0 && sp.varsigma > 0.0, "spsa.omega and spsa.varsigma must be positive");
    require(sp.kappa > 0.5 && sp.kappa <= 1.0, "spsa.kappa must lie in (0.5, 1]");
    require(sp.iters >= 0 && sp.steps >= 2 && sp.horizon >= 1, "spsa.iters, spsa.steps and spsa.horizon out of range");
    const std::string ev = r.text("spsa.evaluator", "monte-carlo");
    if (ev == "monte-carlo") {
        sp.evaluator = EvaluatorKind::MonteCarlo;
    } else if (ev == "bellman") {
        sp.evaluator = EvaluatorKind::Bellman;
    } else {
        throw ConfigError("spsa.evaluator must be 'monte-carlo' or 'bellman'");
    }

    sc.belief.samples = static_cast<int>(r.integer("belief.samples", 2000));
    sc.belief.horizon = static_cast<int>(r.integer("belief.horizon", 30));
    sc.belief.trajectories = static_cast<int>(r.integer("belief.trajectories", 20));
    sc.belief.explore = r.number("belief.explore", 0.1);
    sc.belief.seed = r.unsigned_integer("belief.seed", 1);
    require(sc.belief.samples >= 0 && sc.belief.horizon >= 1 && sc.belief.trajectories >= 1,
            "belief.samples, belief.horizon and belief.trajectories out of range");
    require(sc.belief.explore >= 0.0 && sc.belief.explore <= 1.0, "belief.explore must lie in [0, 1]");
    const std::string decision = r.text("belief.decision", "lookahead");
    if (decision == "lookahead") {
        sc.belief.decision = BeliefSolverOptions::Decision::Lookahead;
    } else if (decision == "nearest") {
        sc.belief.decision = BeliefSolverOptions::Decision::Nearest;
    } else {
        throw ConfigError("belief.decision must be 'lookahead' or 'nearest'");
    }

    r.reject_unknown();
    return cfg;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

}  // namespace remest::cli

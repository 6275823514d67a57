#include "cli.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

using namespace remest;
namespace fs = std::filesystem;

namespace {

nlohmann::json reference_json() { return nlohmann::json::parse(std::ifstream(REMEST_CONFIG_DIR "/reference.json")); }

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("remest_test_" + name); }

std::string write_config(const nlohmann::json& j, const std::string& name)
{
    const auto path = scratch(name + ".json");
    std::ofstream(path) << j.dump(2);
    return path.string();
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args)
{
    args.insert(args.begin(), "remest");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ostringstream s;
    s << std::ifstream(p).rdbuf();
    return s.str();
}

double field(const std::string& text, const std::string& key)
{
    const auto pos = text.find(key + "=");
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + key.size() + 1));
}

}  // namespace

TEST_CASE("solve reports the reference rates")
{
    const auto cfg = write_config(reference_json(), "solve");
    const auto out = scratch("solve.csv");
    const auto r = invoke({"solve", "--config", cfg, "--out", out.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("n0=3\n") != std::string::npos);
    CHECK(r.out.find("n1=5\n") != std::string::npos);
    CHECK(field(r.out, "P_s") == doctest::Approx(0.258689109945).epsilon(1e-11));
    CHECK(field(r.out, "rho") == doctest::Approx(0.5290093233).epsilon(1e-8));
    const std::string csv = slurp(out);
    CHECK(csv.rfind("# tool=remest", 0) == 0);
    CHECK(csv.find("# config_hash=fnv1a64:") != std::string::npos);
    CHECK(csv.find("# seed=42") != std::string::npos);
    CHECK(csv.find("\nP11,H,action\n") != std::string::npos);
    // 12 significant digits
    CHECK(csv.find("0.258689109945,0,0") != std::string::npos);
}

TEST_CASE("lambda = 0 gives an all-zero action column")
{
    auto j = reference_json();
    j["cost"]["lambda"] = 0.0;
    const auto out = scratch("lambda0.csv");
    REQUIRE(invoke({"solve", "--config", write_config(j, "lambda0"), "--out", out.string()}).code == 0);
    std::istringstream csv(slurp(out));
    std::string line;
    int rows = 0;
    bool header = false;
    while (std::getline(csv, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        CHECK(line.substr(line.rfind(',') + 1) == "0");
        ++rows;
    }
    CHECK(rows == 40);
}

TEST_CASE("configuration errors exit with 2")
{
    auto j = reference_json();
    j["model"]["sigma_v2"] = 0.0;
    auto r = invoke({"validate", "--config", write_config(j, "badv")});
    CHECK(r.code == 2);
    CHECK(r.err.find("Sigma_v") != std::string::npos);

    j = reference_json();
    j["channel"]["colour"] = "blue";
    r = invoke({"solve", "--config", write_config(j, "unknown")});
    CHECK(r.code == 2);
    CHECK(r.err.find("channel.colour") != std::string::npos);

    j = reference_json();
    j["channel"]["p"] = 1.5;
    CHECK(invoke({"solve", "--config", write_config(j, "badp")}).code == 2);

    j = reference_json();
    j["model"]["a"] = 1.2;
    CHECK(invoke({"solve", "--config", write_config(j, "unstable")}).code == 2);

    CHECK(invoke({"sweep", "--config", write_config(reference_json(), "emptypol"), "--policies", ""}).code == 2);
    CHECK(invoke({"solve", "--config", "/nonexistent/remest.json"}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
}

TEST_CASE("solver non-convergence exits with 3")
{
    auto j = reference_json();
    j["solver"]["max_iter"] = 2;
    const auto r = invoke({"solve", "--config", write_config(j, "budget")});
    CHECK(r.code == 3);
    CHECK_FALSE(r.err.empty());
}

TEST_CASE("flat and nested keys hash alike")
{
    const auto nested = reference_json();
    const auto flat = nested.flatten();
    nlohmann::json dotted;
    for (auto it = flat.begin(); it != flat.end(); ++it) {
        std::string key = it.key().substr(1);
        std::replace(key.begin(), key.end(), '/', '.');
        dotted[key] = it.value();
    }
    CHECK(cli::parse_config(nested).hash == cli::parse_config(dotted).hash);
    auto changed = nested;
    changed["channel"]["p"] = 0.3;
    CHECK(cli::parse_config(changed).hash != cli::parse_config(nested).hash);
}

TEST_CASE("simulate writes byte-identical traces")
{
    auto j = reference_json();
    j["sim"]["T"] = 3000;
    const auto cfg = write_config(j, "sim");
    const auto a = scratch("trace_a.csv"), b = scratch("trace_b.csv");
    REQUIRE(invoke({"simulate", "--config", cfg, "--trace", "--out", a.string()}).code == 0);
    REQUIRE(invoke({"simulate", "--config", cfg, "--trace", "--out", b.string()}).code == 0);
    const auto text = slurp(a);
    CHECK(text == slurp(b));
    CHECK(text.find("\nk,P11,Phat11,nu,gamma,gammahat,stage_cost\n") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3000 + 5);
}

TEST_CASE("sweep: optimal cost near the DP value, stable row order")
{
    auto j = reference_json();
    j["sim"]["T"] = 100'000;
    j["sim"]["simulate_state"] = false;
    const auto cfg = write_config(j, "sweep");
    const auto out = scratch("sweep.csv");
    const auto r = invoke({"sweep", "--config", cfg, "--p-min", "0.2", "--p-max", "0.2", "--p-steps", "1",
                           "--policies", "optimal,fixed0", "--runs", "4", "--out", out.string()});
    REQUIRE(r.code == 0);
    const auto text = slurp(out);
    CHECK(text.find("\np,policy,avg_cost,avg_est_var,avg_energy,stderr_cost\n") != std::string::npos);
    const auto opt = text.find("0.2,optimal,");
    const auto f0 = text.find("0.2,fixed0,");
    REQUIRE(opt != std::string::npos);
    REQUIRE(f0 != std::string::npos);
    CHECK(opt < f0);
    const double cost = std::stod(text.substr(opt + 12));
    CHECK(cost == doctest::Approx(0.5290093233).epsilon(0.02));
}

TEST_CASE("threshold search prints phi_star")
{
    auto j = reference_json();
    j["spsa"]["iters"] = 50;
    j["spsa"]["steps"] = 5000;
    const auto out = scratch("spsa.csv");
    const auto r = invoke({"threshold-search", "--config", write_config(j, "spsa"), "--out", out.string()});
    REQUIRE(r.code == 0);
    const double phi = field(r.out, "phi_star");
    CHECK(phi >= 0.258);
    CHECK(phi <= 2.0);
    CHECK(slurp(out).find("\niteration,phi,cost\n0,") != std::string::npos);
}

TEST_CASE("validate passes on the reference configuration")
{
    const auto r = invoke({"validate", "--config", write_config(reference_json(), "validate"), "--level", "fast"});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("PASS perfect_feedback_equivalence") != std::string::npos);
    CHECK(invoke({"validate", "--config", write_config(reference_json(), "validate"), "--level", "slow"}).code == 2);
}

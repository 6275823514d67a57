#pragma once

#include "remest/errors.hpp"
#include "remest/simulator.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace remest::cli {

inline constexpr const char* kToolVersion = "1.0.0";

/// Bad or inconsistent configuration.
class ConfigError : public DomainError {
public:
    using DomainError::DomainError;
};

enum class EvaluatorKind { MonteCarlo, Bellman };

struct SpsaSettings {
    double omega = 0.3;
    double varsigma = 0.5;
    double kappa = 1.0;
    int iters = 200;
    double phi0 = 0.0;  // 0 selects P_s
    long steps = 10'000;
    int horizon = 500;
    std::uint64_t seed = 1;
    EvaluatorKind evaluator = EvaluatorKind::MonteCarlo;
};

struct RunConfig {
    Scenario scenario;
    PolicyKind policy = PolicyKind::Table;
    SpsaSettings spsa;
    int runs = 50;
    int workers = 0;
    nlohmann::json flat;  // dotted keys as given
    std::string hash;     // FNV-1a of the canonical flat form
};

/// Accepts flat dotted keys or nested objects; unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// Entry point of the command-line tool. Exit codes: 0 ok, 1 validation
/// failure or runtime error, 2 usage or configuration error, 3 solver
/// non-convergence.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct CheckResult {
    std::string name;
    bool passed;
    std::string detail;
};

/// Invariant checks on the configured model. `full` runs the long chains.
std::vector<CheckResult> run_validation(const RunConfig& cfg, bool full);

}  // namespace remest::cli

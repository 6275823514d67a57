#pragma once

#include "remest/simulator.hpp"

#include <doctest.h>

namespace fixture {

inline remest::SystemModel reference_model() { return remest::SystemModel::scalar(0.95, 1.0, 0.25, 0.01, 0.0, 1.0); }

inline remest::Scenario reference_scenario(double p = 0.2)
{
    remest::Scenario sc;
    sc.model = reference_model();
    sc.target_trace = 0.01;
    sc.N0 = 0.01;
    sc.energy_scale = 20.0;
    sc.p = p;
    sc.lambda = 0.6;
    sc.seed = 42;
    return sc;
}

// Reference values from an independent Python computation (scipy DARE,
// mpmath inverse error function, numpy finite-horizon value iteration).
inline constexpr double kPs = 0.258689109945;
inline constexpr double kKf = 0.962782265340;
inline constexpr double kKs = 0.914643152073;
inline constexpr double kSigmaS = 2.305413454158;

}  // namespace fixture

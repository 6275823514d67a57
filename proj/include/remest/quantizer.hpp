#pragma once

#include "remest/lti.hpp"

namespace remest {

enum class QuantizerFamily { LloydMax, Lattice };

struct QuantizerSpec {
    QuantizerFamily family = QuantizerFamily::LloydMax;
    int m = 1;                       // source dimension
    double lattice_moment = 1.0 / 12.0;  // normalized moment of inertia of the Voronoi cell

    /// Throws UnknownConstant for Lloyd-Max with m >= 3, DomainError on bad fields.
    void validate() const;
};

/// Lloyd-Max high-rate constant B_m; known for m = 1 and m = 2 only.
double lloyd_max_constant(int m);

/// Noise-to-signal ratio alpha at a (possibly fractional) rate of `bits` per sample.
double alpha_of_rate(const QuantizerSpec& spec, double bits);
inline double alpha_of_rate(const QuantizerSpec& spec, int bits) { return alpha_of_rate(spec, static_cast<double>(bits)); }

struct RatePlan {
    int n0 = 0;  // bits for innovation packets
    int n1 = 0;  // bits for state-estimate packets
    double n0_real = 0.0;
    double n1_real = 0.0;
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    Matrix Sigma_q_x;
    Matrix Sigma_q_eps;
    double target_trace = 0.0;
};

/// Real rate at which alpha(bits) * input_trace == target_trace.
double rate_for_trace(const QuantizerSpec& spec, double input_trace, double target_trace);

/// Chooses n0, n1 so that both quantization-noise traces hit `target_trace`,
/// rounding the real-valued rates to the nearest integer (minimum 1 bit).
/// The noise covariances are white with trace alpha(n) times the input trace.
RatePlan select_rates(const QuantizerSpec& spec, const SensorSteadyState& ss, double target_trace);

/// Isotropic covariance (trace / dim) I.
Matrix white_noise_cov(int dim, double trace);

/// value + q with q ~ N(0, Sigma_q).
Vector quantize(const Vector& value, const Matrix& Sigma_q, Rng& rng);

}  // namespace remest

#include "remest/quantizer.hpp"

#include "remest/errors.hpp"

#include <cmath>
#include <numbers>

namespace remest {

namespace {

constexpr double kMaxBits = 64.0;

// Rate above which the lattice alpha is strictly decreasing: d/dn [n 2^{-2n/m}] < 0.
double lattice_monotone_floor(int m) { return std::max(1.0, m / (2.0 * std::numbers::ln2)); }

}  // namespace

void QuantizerSpec::validate() const
{
    if (m < 1) throw DomainError("quantizer.m must be >= 1");
    if (family == QuantizerFamily::LloydMax) {
        lloyd_max_constant(m);
    } else if (!(lattice_moment > 0.0) || !std::isfinite(lattice_moment)) {
        throw DomainError("quantizer.lattice_moment must be positive");
    }
}

double lloyd_max_constant(int m)
{
    if (m == 1) return std::numbers::pi * std::numbers::sqrt3 / 2.0;
    // Hexagonal-cell high-rate constant for a bivariate Gaussian source.
    if (m == 2) return 5.0 / (36.0 * std::numbers::sqrt3) * 8.0 * std::numbers::pi;
    throw UnknownConstant("Lloyd-Max constant B_m is unknown for m >= 3");
}

double alpha_of_rate(const QuantizerSpec& spec, double bits)
{
    spec.validate();
    if (!(bits > 0.0)) throw DomainError("rate must be positive");
    const double m = spec.m;
    const double decay = std::exp2(-2.0 * bits / m);
    if (spec.family == QuantizerFamily::LloydMax) return lloyd_max_constant(spec.m) * decay;

    const double volume = std::pow(std::numbers::pi, m / 2.0) / std::tgamma(m / 2.0 + 1.0);
    const double eta2 = 0.5;
    return spec.lattice_moment * std::pow(volume, 2.0 / m) / eta2 * (2.0 * bits * std::numbers::ln2 / m) * decay;
}

double rate_for_trace(const QuantizerSpec& spec, double input_trace, double target_trace)
{
    spec.validate();
    if (!(target_trace > 0.0)) throw DomainError("target trace must be positive");
    if (input_trace <= 0.0) return 0.0;

    if (spec.family == QuantizerFamily::LloydMax) {
        const double bits = 0.5 * spec.m * std::log2(lloyd_max_constant(spec.m) * input_trace / target_trace);
        if (bits > kMaxBits) throw RateOverflow("required quantizer rate exceeds 64 bits");
        return bits;
    }

    double lo = lattice_monotone_floor(spec.m);
    double hi = kMaxBits + 1.0;
    auto excess = [&](double n) { return alpha_of_rate(spec, n) * input_trace - target_trace; };
    if (excess(lo) <= 0.0) return lo;
    if (excess(hi) > 0.0) throw RateOverflow("required quantizer rate exceeds 64 bits");
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) > 0.0 ? lo : hi) = mid;
    }
    const double bits = 0.5 * (lo + hi);
    if (bits > kMaxBits) throw RateOverflow("required quantizer rate exceeds 64 bits");
    return bits;
}

RatePlan select_rates(const QuantizerSpec& spec, const SensorSteadyState& ss, double target_trace)
{
    RatePlan plan;
    plan.target_trace = target_trace;
    plan.n0_real = rate_for_trace(spec, ss.innov_cov.trace(), target_trace);
    plan.n1_real = rate_for_trace(spec, ss.filt_est_cov.trace(), target_trace);

    auto to_bits = [](double real) {
        const double r = std::max(1.0, std::round(real));
        if (r > kMaxBits) throw RateOverflow("required quantizer rate exceeds 64 bits");
        return static_cast<int>(r);
    };
    plan.n0 = to_bits(plan.n0_real);
    plan.n1 = to_bits(plan.n1_real);
    plan.alpha0 = alpha_of_rate(spec, plan.n0);
    plan.alpha1 = alpha_of_rate(spec, plan.n1);
    const int n = static_cast<int>(ss.P_s.rows());
    plan.Sigma_q_eps = white_noise_cov(n, plan.alpha0 * ss.innov_cov.trace());
    plan.Sigma_q_x = white_noise_cov(n, plan.alpha1 * ss.filt_est_cov.trace());
    return plan;
}

Matrix white_noise_cov(int dim, double trace)
{
    if (dim < 1) throw DomainError("noise dimension must be positive");
    return Matrix::Identity(dim, dim) * (trace / dim);
}

Vector quantize(const Vector& value, const Matrix& Sigma_q, Rng& rng)
{
    if (Sigma_q.rows() != value.size()) throw DomainError("quantizer covariance has the wrong size");
    return value + GaussianSampler(Sigma_q).sample(rng);
}

}  // namespace remest

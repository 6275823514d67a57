#include "remest/channel.hpp"

#include "remest/errors.hpp"

#include <cmath>
#include <numbers>

namespace remest {

namespace {

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

void check_probability(double v, const char* name)
{
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

double packet_loss_from_bit_error(double p_b, int n)
{
    check_probability(p_b, "p_b");
    if (n < 1) throw DomainError("packet size must be >= 1 bit");
    if (p_b == 1.0) return 1.0;
    return -std::expm1(n * std::log1p(-p_b));
}

double bit_error_from_packet_loss(double p, int n)
{
    check_probability(p, "p");
    if (n < 1) throw DomainError("packet size must be >= 1 bit");
    if (p == 1.0) return 1.0;
    return -std::expm1(std::log1p(-p) / n);
}

double bit_error_from_energy(double E_b, double N0)
{
    if (!(N0 > 0.0)) throw DomainError("N0 must be positive");
    if (!(E_b >= 0.0)) throw DomainError("E_b must be nonnegative");
    return 0.5 * std::erfc(std::sqrt(E_b / N0));
}

double erfc_inv(double y)
{
    if (!(y > 0.0 && y < 2.0)) throw DomainError("erfc_inv needs y in (0, 2)");
    if (y > 1.0) return -erfc_inv(2.0 - y);
    if (y == 1.0) return 0.0;

    double lo = 0.0;
    double hi = 1.0;
    while (std::erfc(hi) > y) {
        lo = hi;
        hi *= 2.0;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = std::erfc(x) - y;
        if (f > 0.0) lo = x; else hi = x;
        const double slope = -2.0 / std::sqrt(std::numbers::pi) * std::exp(-x * x);
        double next = x - f / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::abs(next - x);
        x = next;
        if (step <= 1e-15 * std::max(1.0, x) || hi - lo <= 1e-15 * std::max(1.0, x)) break;
    }
    return x;
}

double energy_from_bit_error(double p_b, double N0)
{
    if (!(N0 > 0.0)) throw DomainError("N0 must be positive");
    if (!(p_b > 0.0 && p_b < 0.5)) throw DomainError("energy_from_bit_error needs p_b in (0, 0.5)");
    const double x = erfc_inv(2.0 * p_b);
    return N0 * x * x;
}

ForwardChannel ForwardChannel::from_loss(double p, int n0, int n1, double N0, double energy_scale)
{
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("channel.p must lie in (0, 1]");
    if (n0 < 1 || n1 < 1) throw DomainError("packet sizes must be >= 1 bit");
    if (!(N0 > 0.0)) throw DomainError("channel.N0 must be positive");
    if (!(energy_scale > 0.0)) throw DomainError("channel.energy_scale must be positive");
    ForwardChannel f;
    f.p = p;
    f.n0 = n0;
    f.n1 = n1;
    f.N0 = N0;
    f.energy_scale = energy_scale;
    f.p_b0 = bit_error_from_packet_loss(p, n0);
    f.p_b1 = bit_error_from_packet_loss(p, n1);
    f.E_b0 = f.p_b0 < 0.5 ? energy_from_bit_error(f.p_b0, N0) : 0.0;
    f.E_b1 = f.p_b1 < 0.5 ? energy_from_bit_error(f.p_b1, N0) : 0.0;
    return f;
}

ForwardChannel ForwardChannel::from_energy(double E_b0, double E_b1, int n0, int n1, double N0,
                                           double energy_scale)
{
    if (n0 < 1 || n1 < 1) throw DomainError("packet sizes must be >= 1 bit");
    if (!(energy_scale > 0.0)) throw DomainError("channel.energy_scale must be positive");
    ForwardChannel f;
    f.E_b0 = E_b0;
    f.E_b1 = E_b1;
    f.n0 = n0;
    f.n1 = n1;
    f.N0 = N0;
    f.energy_scale = energy_scale;
    f.p_b0 = bit_error_from_energy(E_b0, N0);
    f.p_b1 = bit_error_from_energy(E_b1, N0);
    const double p0 = packet_loss_from_bit_error(f.p_b0, n0);
    const double p1 = packet_loss_from_bit_error(f.p_b1, n1);
    if (std::abs(p0 - p1) > 1e-9)
        throw DomainError("bit energies imply different packet loss probabilities for the two packet sizes");
    f.p = 0.5 * (p0 + p1);
    return f;
}

double packet_energy(const ForwardChannel& fwd, int nu)
{
    return nu == 0 ? fwd.energy_scale * fwd.n0 * fwd.E_b0 : fwd.energy_scale * fwd.n1 * fwd.E_b1;
}

double packet_energy(const RatePlan& plan, const ForwardChannel& fwd, int nu)
{
    if (plan.n0 != fwd.n0 || plan.n1 != fwd.n1) throw DomainError("channel packet sizes do not match the rate plan");
    return packet_energy(fwd, nu);
}

FeedbackChannel::FeedbackChannel(double eta_, double delta_) : eta(eta_), delta(delta_)
{
    check_probability(eta, "feedback.eta");
    check_probability(delta, "feedback.delta");
    Amat[0] = {(1.0 - delta) * (1.0 - eta), delta * (1.0 - eta), eta};
    Amat[1] = {delta * (1.0 - eta), (1.0 - delta) * (1.0 - eta), eta};
}

int forward_draw(double p, double u) { return u >= p ? 1 : 0; }

int forward_draw(const ForwardChannel& fwd, Rng& rng) { return forward_draw(fwd.p, uniform01(rng)); }

int feedback_draw(const FeedbackChannel& fb, int gamma, double u)
{
    const auto& row = fb.Amat[gamma];
    if (u < row[0]) return 0;
    if (u < row[0] + row[1]) return 1;
    return row[2] > 0.0 ? 2 : (row[1] > 0.0 ? 1 : 0);
}

int feedback_draw(const FeedbackChannel& fb, int gamma, Rng& rng) { return feedback_draw(fb, gamma, uniform01(rng)); }

std::array<double, 2> ack_posterior(const FeedbackChannel& fb, double p, int gammahat)
{
    if (gammahat == 2) return {p, 1.0 - p};
    const double w0 = fb.prob(gammahat, 0) * p;
    const double w1 = fb.prob(gammahat, 1) * (1.0 - p);
    const double total = w0 + w1;
    if (!(total > 1e-300)) throw DegenerateBelief("acknowledgment has zero probability under the channel model");
    return {w0 / total, w1 / total};
}

}  // namespace remest

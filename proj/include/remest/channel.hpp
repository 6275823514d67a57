#pragma once

#include "remest/lti.hpp"
#include "remest/quantizer.hpp"

#include <array>

namespace remest {

/// P(packet lost) when any of its n bits is in error.
double packet_loss_from_bit_error(double p_b, int n);
/// Per-bit error probability giving packet loss p for n-bit packets.
double bit_error_from_packet_loss(double p, int n);

/// BPSK bit error probability Q(sqrt(2 E_b / N0)).
double bit_error_from_energy(double E_b, double N0);
/// Inverse of bit_error_from_energy on p_b in (0, 0.5).
double energy_from_bit_error(double p_b, double N0);

/// Inverse complementary error function on (0, 2).
double erfc_inv(double y);

/// Erasure channel carrying the sensor packets. Both decisions share one
/// packet loss probability p; the bit energies follow from it.
struct ForwardChannel {
    double p = 0.0;
    double p_b0 = 0.0;
    double p_b1 = 0.0;
    double E_b0 = 0.0;
    double E_b1 = 0.0;
    double N0 = 1.0;
    int n0 = 1;
    int n1 = 1;
    // Multiplies bit energies in the packet cost; 1 keeps N0 units.
    double energy_scale = 1.0;

    /// Derives p_b and E_b for both packet sizes from p in (0, 1].
    /// A per-bit error of 0.5 or more needs no energy, so E_b is 0 there.
    static ForwardChannel from_loss(double p, int n0, int n1, double N0, double energy_scale = 1.0);
    /// Derives p from bit energies; throws DomainError when the two packet
    /// sizes imply loss probabilities that differ by more than 1e-9.
    static ForwardChannel from_energy(double E_b0, double E_b1, int n0, int n1, double N0,
                                      double energy_scale = 1.0);
};

/// Energy of one packet, energy_scale * n_nu * E_b^nu.
double packet_energy(const RatePlan& plan, const ForwardChannel& fwd, int nu);
double packet_energy(const ForwardChannel& fwd, int nu);

/// Ternary acknowledgment link: delivered correctly, flipped, or erased (2).
struct FeedbackChannel {
    double eta = 0.0;    // erasure probability
    double delta = 0.0;  // flip probability given delivery
    // Amat[gamma][gammahat] = P(gammahat | gamma)
    std::array<std::array<double, 3>, 2> Amat{};

    FeedbackChannel() : FeedbackChannel(0.0, 0.0) {}
    FeedbackChannel(double eta, double delta);

    double prob(int gammahat, int gamma) const { return Amat[gamma][gammahat]; }
    bool perfect() const { return eta == 0.0 && delta == 0.0; }
};

/// gamma = 1 (received) with probability 1 - p. Uses one uniform draw.
int forward_draw(const ForwardChannel& fwd, Rng& rng);
int forward_draw(double p, double u);
/// gammahat drawn from row gamma of Amat. Uses one uniform draw.
int feedback_draw(const FeedbackChannel& fb, int gamma, Rng& rng);
int feedback_draw(const FeedbackChannel& fb, int gamma, double u);

/// Posterior weights (P(gamma=0 | gammahat), P(gamma=1 | gammahat)) for a
/// prior P(gamma=0) = p. For an erasure these are the prior weights.
std::array<double, 2> ack_posterior(const FeedbackChannel& fb, double p, int gammahat);

}  // namespace remest

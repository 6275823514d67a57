#pragma once

#include "remest/lti.hpp"
#include "remest/quantizer.hpp"

#include <array>

namespace remest {

/// Tolerances shared by the receiver-side recursions.
struct Tolerances {
    static constexpr double structure_project = 1e-6;  // project() accepts this deviation
    static constexpr double structure_test = 1e-9;     // closure property checks
    static constexpr double innovation_condition = 1e12;
};

/// Receiver model of the stacked state (x_k, sensor prediction), observed
/// either through the innovation (nu = 0) or the filtered estimate (nu = 1).
struct AugmentedModel {
    Matrix Acal;                 // 2n x 2n
    std::array<Matrix, 2> Ccal;  // n x 2n, indexed by nu
    Matrix Q;                    // 2n x 2n
    std::array<Matrix, 2> R;     // n x n, indexed by nu
    Matrix S;                    // 2n x n
    Matrix Ps;                   // sensor prediction covariance
    int n = 0;

    /// Quantization covariances are added to K_f Sigma_v K_f^T.
    static AugmentedModel build(const SystemModel& model, const SensorSteadyState& ss, const Matrix& Sigma_q_eps,
                                const Matrix& Sigma_q_x);
    /// Uses the rounded per-rate covariances of the plan.
    static AugmentedModel from_plan(const SystemModel& model, const SensorSteadyState& ss, const RatePlan& plan);
    /// Both streams get the same white quantization noise of trace
    /// target_trace, so R does not depend on nu.
    static AugmentedModel shared_noise(const SystemModel& model, const SensorSteadyState& ss, double target_trace);
};

/// Receiver covariance in the structured class, held through its (1,1) block.
struct StructuredCov {
    Matrix P11;
    Matrix Ps;

    Matrix full() const;
    /// Throws DomainError unless P11 - Ps is PSD.
    void validate(double tol = 1e-9) const;
};

/// [[X, X - Ps], [X - Ps, X - Ps]].
Matrix lift(const Matrix& P11, const Matrix& Ps);
/// Largest absolute deviation of P from its structured form.
double structure_deviation(const Matrix& P, const Matrix& Ps);
/// (1,1) block of P after checking its structure; throws StructureViolation.
Matrix project(const Matrix& P, const Matrix& Ps, double tol = Tolerances::structure_project);

/// Open-loop part A P A^T + Q.
Matrix open_loop_step(const Matrix& P, const AugmentedModel& aug);
/// Riccati correction [A P C^T + S][C P C^T + R]^{-1}[A P C^T + S]^T.
Matrix riccati_correction(const Matrix& P, int nu, const AugmentedModel& aug);
/// Random Riccati recursion for one step given delivery gamma and choice nu.
Matrix riccati_step(const Matrix& P, int gamma, int nu, const AugmentedModel& aug);
/// Expectation over gamma ~ Bernoulli(1 - p), on full matrices.
Matrix expected_riccati_full(const Matrix& P, int nu, double p, const AugmentedModel& aug);
StructuredCov expected_riccati(const StructuredCov& P, int nu, double p, const AugmentedModel& aug);

/// Receiver mean update of the stacked state.
Vector receiver_estimate_step(const Vector& theta_hat, const Matrix& P, const Vector& z, int gamma, int nu,
                              const AugmentedModel& aug);
/// Gain [A P C^T + S][C P C^T + R]^{-1}.
Matrix receiver_gain(const Matrix& P, int nu, const AugmentedModel& aug);

/// Scalar recursion on the (1,1) block, in closed form.
struct ScalarRiccati {
    double a = 0.0;
    double k = 0.0;     // K_f * c
    double sw2 = 0.0;
    double Ps = 0.0;
    std::array<double, 2> R{};  // K_f^2 sigma_v^2 + quantization variance

    static ScalarRiccati from(const AugmentedModel& aug);

    double open_loop(double P) const { return a * a * P + sw2; }
    /// Correction term subtracted on reception.
    double correction(double P, int nu) const
    {
        const double D = P - Ps;
        if (nu == 0) {
            const double num = k * k * Ps * Ps;
            return num == 0.0 ? 0.0 : a * a * num / (k * k * Ps + R[0]);
        }
        const double cross = D + k * Ps;
        return cross == 0.0 ? 0.0 : a * a * cross * cross / (D + k * k * Ps + R[1]);
    }
    double update(double P, int nu) const { return open_loop(P) - correction(P, nu); }
    double step(double P, int gamma, int nu) const { return gamma ? update(P, nu) : open_loop(P); }
    double expected(double P, int nu, double p) const { return open_loop(P) - (1.0 - p) * correction(P, nu); }
};

}  // namespace remest

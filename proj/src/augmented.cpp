#include "remest/augmented.hpp"

#include "remest/errors.hpp"

#include <cmath>
#include <sstream>

namespace remest {

namespace {

Matrix solve_innovation(const Matrix& innov, const Matrix& rhs_t)
{
    if (innov.rows() == 1) {
        if (!(std::abs(innov(0, 0)) > 0.0)) throw SingularInnovation("receiver innovation variance is zero");
        return rhs_t / innov(0, 0);
    }
    if (!(condition_estimate(innov) <= Tolerances::innovation_condition))
        throw SingularInnovation("receiver innovation covariance is numerically singular");
    return innov.ldlt().solve(rhs_t);
}

}  // namespace

AugmentedModel AugmentedModel::build(const SystemModel& model, const SensorSteadyState& ss, const Matrix& Sigma_q_eps,
                                     const Matrix& Sigma_q_x)
{
    const int n = model.n();
    AugmentedModel aug;
    aug.n = n;
    aug.Ps = ss.P_s;
    const Matrix KsC = ss.K_s * model.C;
    const Matrix KfC = ss.K_f * model.C;
    const Matrix I = Matrix::Identity(n, n);

    aug.Acal = Matrix::Zero(2 * n, 2 * n);
    aug.Acal.topLeftCorner(n, n) = model.A;
    aug.Acal.bottomLeftCorner(n, n) = KsC;
    aug.Acal.bottomRightCorner(n, n) = model.A - KsC;

    for (int nu = 0; nu < 2; ++nu) {
        aug.Ccal[nu] = Matrix(n, 2 * n);
        aug.Ccal[nu].leftCols(n) = KfC;
        aug.Ccal[nu].rightCols(n) = nu * I - KfC;
    }

    aug.Q = Matrix::Zero(2 * n, 2 * n);
    aug.Q.topLeftCorner(n, n) = model.Sigma_w;
    aug.Q.bottomRightCorner(n, n) = symmetrize(ss.K_s * model.Sigma_v * ss.K_s.transpose());

    const Matrix base = symmetrize(ss.K_f * model.Sigma_v * ss.K_f.transpose());
    aug.R[0] = base + symmetrize(Sigma_q_eps);
    aug.R[1] = base + symmetrize(Sigma_q_x);

    aug.S = Matrix::Zero(2 * n, n);
    aug.S.bottomRows(n) = ss.K_s * model.Sigma_v * ss.K_f.transpose();
    return aug;
}

AugmentedModel AugmentedModel::from_plan(const SystemModel& model, const SensorSteadyState& ss, const RatePlan& plan)
{
    return build(model, ss, plan.Sigma_q_eps, plan.Sigma_q_x);
}

AugmentedModel AugmentedModel::shared_noise(const SystemModel& model, const SensorSteadyState& ss, double target_trace)
{
    if (!(target_trace >= 0.0)) throw DomainError("target trace must be nonnegative");
    const Matrix white = white_noise_cov(model.n(), target_trace);
    return build(model, ss, white, white);
}

Matrix StructuredCov::full() const { return lift(P11, Ps); }

void StructuredCov::validate(double tol) const
{
    if (!is_psd(symmetrize(P11 - Ps), tol)) throw DomainError("P11 - P_s must be positive semidefinite");
}

Matrix lift(const Matrix& P11, const Matrix& Ps)
{
    const int n = static_cast<int>(P11.rows());
    const Matrix D = P11 - Ps;
    Matrix full(2 * n, 2 * n);
    full.topLeftCorner(n, n) = P11;
    full.topRightCorner(n, n) = D;
    full.bottomLeftCorner(n, n) = D;
    full.bottomRightCorner(n, n) = D;
    return full;
}

double structure_deviation(const Matrix& P, const Matrix& Ps)
{
    const int n = static_cast<int>(Ps.rows());
    const Matrix D = P.topLeftCorner(n, n) - Ps;
    double dev = (P.topRightCorner(n, n) - D).cwiseAbs().maxCoeff();
    dev = std::max(dev, (P.bottomLeftCorner(n, n) - D).cwiseAbs().maxCoeff());
    dev = std::max(dev, (P.bottomRightCorner(n, n) - D).cwiseAbs().maxCoeff());
    return dev;
}

Matrix project(const Matrix& P, const Matrix& Ps, double tol)
{
    const int n = static_cast<int>(Ps.rows());
    if (P.rows() != 2 * n || P.cols() != 2 * n) throw DomainError("project expects a 2n x 2n covariance");
    const double dev = structure_deviation(P, Ps);
    if (!(dev <= tol)) {
        std::ostringstream os;
        os << "covariance left the structured class (max deviation " << dev << ")";
        throw StructureViolation(os.str(), dev);
    }
    return P.topLeftCorner(n, n);
}

Matrix open_loop_step(const Matrix& P, const AugmentedModel& aug)
{
    return symmetrize(aug.Acal * P * aug.Acal.transpose() + aug.Q);
}

Matrix receiver_gain(const Matrix& P, int nu, const AugmentedModel& aug)
{
    const Matrix& C = aug.Ccal[nu];
    const Matrix cross = aug.Acal * P * C.transpose() + aug.S;
    const Matrix innov = C * P * C.transpose() + aug.R[nu];
    return solve_innovation(innov, cross.transpose()).transpose();
}

Matrix riccati_correction(const Matrix& P, int nu, const AugmentedModel& aug)
{
    const Matrix& C = aug.Ccal[nu];
    const Matrix cross = aug.Acal * P * C.transpose() + aug.S;
    const Matrix innov = C * P * C.transpose() + aug.R[nu];
    return cross * solve_innovation(innov, cross.transpose());
}

Matrix riccati_step(const Matrix& P, int gamma, int nu, const AugmentedModel& aug)
{
    if (!gamma) return open_loop_step(P, aug);
    return symmetrize(aug.Acal * P * aug.Acal.transpose() + aug.Q - riccati_correction(P, nu, aug));
}

Matrix expected_riccati_full(const Matrix& P, int nu, double p, const AugmentedModel& aug)
{
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0, 1]");
    return symmetrize(aug.Acal * P * aug.Acal.transpose() + aug.Q - (1.0 - p) * riccati_correction(P, nu, aug));
}

StructuredCov expected_riccati(const StructuredCov& P, int nu, double p, const AugmentedModel& aug)
{
    return {project(expected_riccati_full(P.full(), nu, p, aug), P.Ps), P.Ps};
}

Vector receiver_estimate_step(const Vector& theta_hat, const Matrix& P, const Vector& z, int gamma, int nu,
                              const AugmentedModel& aug)
{
    const Vector pred = aug.Acal * theta_hat;
    if (!gamma) return pred;
    return pred + receiver_gain(P, nu, aug) * (z - aug.Ccal[nu] * theta_hat);
}

ScalarRiccati ScalarRiccati::from(const AugmentedModel& aug)
{
    if (aug.n != 1) throw DomainError("scalar recursion needs a scalar plant");
    ScalarRiccati s;
    s.a = aug.Acal(0, 0);
    s.k = aug.Ccal[0](0, 0);
    s.sw2 = aug.Q(0, 0);
    s.Ps = aug.Ps(0, 0);
    s.R = {aug.R[0](0, 0), aug.R[1](0, 0)};
    return s;
}

}  // namespace remest

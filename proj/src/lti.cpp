#include "remest/lti.hpp"

#include "remest/errors.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

namespace remest {

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

Eigen::VectorXd symmetric_eigenvalues(const Matrix& X)
{
    Eigen::MatrixXd dense = symmetrize(X);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

void require_square(const Matrix& X, int dim, const char* name)
{
    if (X.rows() != dim || X.cols() != dim) {
        std::ostringstream os;
        os << name << " must be " << dim << "x" << dim << ", got " << X.rows() << "x" << X.cols();
        throw DomainError(os.str());
    }
}

} // namespace

Matrix scalar_matrix(double value)
{
    Matrix m(1, 1);
    m(0, 0) = value;
    return m;
}

Vector scalar_vector(double value)
{
    Vector v(1);
    v(0) = value;
    return v;
}

Matrix symmetrize(const Matrix& X) { return 0.5 * (X + X.transpose()); }

bool is_symmetric(const Matrix& X, double tol)
{
    if (X.rows() != X.cols()) return false;
    const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
    return (X - X.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_psd(const Matrix& X, double tol)
{
    if (!is_symmetric(X, 1e-9)) return false;
    if (X.size() == 0) return true;
    const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
    return symmetric_eigenvalues(X).minCoeff() >= -tol * scale;
}

bool is_pd(const Matrix& X, double tol)
{
    if (!is_symmetric(X, 1e-9) || X.size() == 0) return false;
    return symmetric_eigenvalues(X).minCoeff() > tol;
}

double spectral_radius(const Matrix& A)
{
    Eigen::MatrixXd dense = A;
    Eigen::EigenSolver<Eigen::MatrixXd> es(dense, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double condition_estimate(const Matrix& X)
{
    const Eigen::VectorXd ev = symmetric_eigenvalues(X).cwiseAbs();
    const double lo = ev.minCoeff();
    if (lo == 0.0) return std::numeric_limits<double>::infinity();
    return ev.maxCoeff() / lo;
}

SystemModel SystemModel::scalar(double a, double c, double sigma_w2, double sigma_v2, double x0_mean, double P_x0)
{
    SystemModel m;
    m.A = scalar_matrix(a);
    m.C = scalar_matrix(c);
    m.Sigma_w = scalar_matrix(sigma_w2);
    m.Sigma_v = scalar_matrix(sigma_v2);
    m.x0_mean = scalar_vector(x0_mean);
    m.P_x0 = scalar_matrix(P_x0);
    return m;
}

std::vector<std::string> SystemModel::validate() const
{
    const int nn = n();
    const int mm = m();
    if (nn < 1 || nn > kMaxStateDim) throw DomainError("state dimension must be in 1..8");
    if (mm < 1 || mm > kMaxStateDim) throw DomainError("measurement dimension must be in 1..8");
    require_square(A, nn, "A");
    if (C.cols() != nn) throw DomainError("C must have as many columns as A");
    require_square(Sigma_w, nn, "Sigma_w");
    require_square(Sigma_v, mm, "Sigma_v");
    require_square(P_x0, nn, "P_x0");
    if (x0_mean.size() != nn) throw DomainError("x0_mean must have length n");
    if (!A.allFinite() || !C.allFinite() || !Sigma_w.allFinite() || !Sigma_v.allFinite() || !P_x0.allFinite())
        throw DomainError("model matrices must be finite");

    const double rho = spectral_radius(A);
    if (!(rho < 1.0)) {
        std::ostringstream os;
        os << "A must be Schur stable (spectral radius " << rho << " >= 1)";
        throw DomainError(os.str());
    }
    if (!is_psd(Sigma_w)) throw DomainError("Sigma_w must be symmetric positive semidefinite");
    if (!is_pd(Sigma_v)) throw DomainError("Sigma_v must be symmetric positive definite");
    if (!is_psd(P_x0)) throw DomainError("P_x0 must be symmetric positive semidefinite");

    std::vector<std::string> warnings;
    if (!is_detectable(*this)) warnings.emplace_back("(A, C) fails the detectability rank test");
    return warnings;
}

bool is_detectable(const SystemModel& model, double tol)
{
    const int n = model.n();
    Eigen::MatrixXd A = model.A;
    Eigen::MatrixXd C = model.C;
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    for (int i = 0; i < n; ++i) {
        const std::complex<double> lambda = es.eigenvalues()(i);
        if (std::abs(lambda) < 1.0) continue;
        Eigen::MatrixXcd pbh(n + C.rows(), n);
        pbh.topRows(n) = lambda * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
        pbh.bottomRows(C.rows()) = C.cast<std::complex<double>>();
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(pbh);
        lu.setThreshold(tol);
        if (lu.rank() < n) return false;
    }
    return true;
}

Matrix riccati_map(const SystemModel& model, const Matrix& P)
{
    const Matrix& A = model.A;
    const Matrix& C = model.C;
    const Matrix innov = C * P * C.transpose() + model.Sigma_v;
    const Matrix APCt = A * P * C.transpose();
    const Matrix next = A * P * A.transpose() + model.Sigma_w - APCt * innov.ldlt().solve(APCt.transpose());
    return symmetrize(next);
}

double dare_residual(const SystemModel& model, const Matrix& P) { return max_abs_diff(riccati_map(model, P), P); }

double lyapunov_residual(const SystemModel& model, const SensorSteadyState& ss)
{
    const Matrix innov = model.C * ss.P_s * model.C.transpose() + model.Sigma_v;
    const Matrix rhs = model.A * ss.Sigma_s * model.A.transpose() + ss.K_s * innov * ss.K_s.transpose();
    return max_abs_diff(rhs, ss.Sigma_s);
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q, double tol, long max_iter)
{
    Matrix X = Matrix::Zero(A.rows(), A.rows());
    for (long it = 0; it < max_iter; ++it) {
        Matrix next = symmetrize(A * X * A.transpose() + Q);
        const double diff = max_abs_diff(next, X);
        X = std::move(next);
        if (diff < tol) return X;
    }
    throw NonConvergence("Lyapunov iteration did not converge");
}

SensorSteadyState solve_dare(const SystemModel& model, double tol, long max_iter)
{
    if (!(tol > 0.0) || max_iter < 1) throw DomainError("solve_dare needs tol > 0 and max_iter >= 1");
    const Matrix& C = model.C;

    auto check_innovation = [&](const Matrix& P) {
        const Matrix innov = C * P * C.transpose() + model.Sigma_v;
        if (!(condition_estimate(innov) <= 1e12))
            throw SingularInnovation("innovation covariance C P C^T + Sigma_v is numerically singular");
        return innov;
    };

    SensorSteadyState ss;
    Matrix P = model.Sigma_w;
    check_innovation(P);
    bool converged = false;
    for (long it = 0; it < max_iter; ++it) {
        Matrix next = riccati_map(model, P);
        const double diff = max_abs_diff(next, P);
        P = std::move(next);
        ss.dare_iterations = static_cast<int>(it + 1);
        if (diff < tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NonConvergence("DARE fixed-point iteration did not converge");

    const Matrix innov = check_innovation(P);
    ss.P_s = P;
    ss.K_f = innov.ldlt().solve(C * P).transpose();
    ss.K_s = model.A * ss.K_f;

    const Matrix drive = symmetrize(ss.K_s * innov * ss.K_s.transpose());
    Matrix Sigma = Matrix::Zero(model.n(), model.n());
    converged = false;
    for (long it = 0; it < max_iter; ++it) {
        Matrix next = symmetrize(model.A * Sigma * model.A.transpose() + drive);
        const double diff = max_abs_diff(next, Sigma);
        Sigma = std::move(next);
        ss.lyapunov_iterations = static_cast<int>(it + 1);
        if (diff < tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NonConvergence("Lyapunov iteration for Sigma_s did not converge");

    ss.Sigma_s = Sigma;
    ss.innov_cov = symmetrize(ss.K_f * innov * ss.K_f.transpose());
    ss.filt_est_cov = ss.Sigma_s + ss.innov_cov;
    return ss;
}

GaussianSampler::GaussianSampler(const Matrix& cov)
{
    if (cov.rows() != cov.cols()) throw DomainError("covariance must be square");
    const int d = static_cast<int>(cov.rows());
    factor_ = Matrix::Zero(d, d);
    const double tr = cov.trace();
    if (d == 0 || tr == 0.0) {
        zero_ = true;
        return;
    }
    if (!(tr > 0.0)) throw DomainError("covariance must be positive semidefinite");
    zero_ = false;
    Eigen::LLT<Matrix> llt(symmetrize(cov));
    if (llt.info() != Eigen::Success) {
        Matrix shifted = symmetrize(cov);
        shifted.diagonal().array() += 1e-14 * tr;
        llt.compute(shifted);
        if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive semidefinite");
    }
    factor_ = llt.matrixL();
}

Vector GaussianSampler::sample(Rng& rng) const
{
    std::normal_distribution<double> normal;
    const int d = dim();
    Vector z(d);
    for (int i = 0; i < d; ++i) z(i) = normal(rng);
    if (zero_) return Vector::Zero(d);
    return factor_.triangularView<Eigen::Lower>() * z;
}

Plant::Plant(SystemModel model)
    : model_(std::move(model)), w_(model_.Sigma_w), v_(model_.Sigma_v), x0_(model_.P_x0)
{
}

PlantOutput Plant::step(const Vector& x, Rng& process_rng, Rng& measurement_rng) const
{
    PlantOutput out;
    out.y = model_.C * x + v_.sample(measurement_rng);
    out.x_next = model_.A * x + w_.sample(process_rng);
    return out;
}

Vector Plant::initial_state(Rng& rng) const { return model_.x0_mean + x0_.sample(rng); }

PlantOutput plant_step(const Vector& x, const SystemModel& model, Rng& rng)
{
    return Plant(model).step(x, rng);
}

SensorFilterOutput sensor_filter_step(const Vector& xhat_pred, const Vector& y, const SensorSteadyState& ss,
                                      const SystemModel& model)
{
    const Vector residual = y - model.C * xhat_pred;
    SensorFilterOutput out;
    out.innov = ss.K_f * residual;
    out.xhat_filt = xhat_pred + out.innov;
    out.xhat_pred_next = model.A * xhat_pred + ss.K_s * residual;
    return out;
}

} // namespace remest

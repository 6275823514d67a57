#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace remest {

/// Largest plant state / measurement dimension supported.
inline constexpr int kMaxStateDim = 8;
/// Largest augmented (plant + sensor predictor) dimension.
inline constexpr int kMaxAugDim = 2 * kMaxStateDim;

// Dynamic sizes with a compile-time upper bound: no heap traffic in the
// per-step simulation loops.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxAugDim, kMaxAugDim>;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxAugDim, 1>;

using Rng = std::mt19937_64;

Matrix scalar_matrix(double value);
Vector scalar_vector(double value);

/// Symmetric part (X + X^T) / 2.
Matrix symmetrize(const Matrix& X);

bool is_symmetric(const Matrix& X, double tol = 1e-12);
/// Symmetric positive semidefinite up to `tol` on the smallest eigenvalue.
bool is_psd(const Matrix& X, double tol = 1e-12);
bool is_pd(const Matrix& X, double tol = 0.0);
double spectral_radius(const Matrix& A);

/// Ratio of extreme eigenvalue magnitudes of a symmetric matrix.
double condition_estimate(const Matrix& X);

/// Plant x_{k+1} = A x_k + w_k, measurement y_k = C x_k + v_k.
struct SystemModel {
    Matrix A;
    Matrix C;
    Matrix Sigma_w;
    Matrix Sigma_v;
    Vector x0_mean;
    Matrix P_x0;

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(C.rows()); }

    /// Scalar plant with c as the observation gain.
    static SystemModel scalar(double a, double c, double sigma_w2, double sigma_v2,
                              double x0_mean = 0.0, double P_x0 = 1.0);

    /// Throws DomainError when an invariant fails. Returns non-fatal warnings.
    std::vector<std::string> validate() const;
};

/// PBH rank test on eigenvalues of A with modulus >= 1.
bool is_detectable(const SystemModel& model, double tol = 1e-9);

/// Stationary quantities of the sensor's local Kalman filter.
struct SensorSteadyState {
    Matrix P_s;           // one-step prediction error covariance
    Matrix K_f;           // filtering gain
    Matrix K_s;           // prediction gain, A K_f
    Matrix Sigma_s;       // covariance of the predicted estimate
    Matrix innov_cov;     // K_f (C P_s C^T + Sigma_v) K_f^T
    Matrix filt_est_cov;  // Sigma_s + innov_cov
    int dare_iterations = 0;
    int lyapunov_iterations = 0;
};

/// Riccati map A P A^T + Sigma_w - A P C^T (C P C^T + Sigma_v)^{-1} C P A^T.
Matrix riccati_map(const SystemModel& model, const Matrix& P);

double dare_residual(const SystemModel& model, const Matrix& P);
double lyapunov_residual(const SystemModel& model, const SensorSteadyState& ss);

/// Fixed-point iteration of the Riccati map started from Sigma_w, until
/// successive iterates differ by less than `tol` in max-abs norm.
/// Throws NonConvergence or SingularInnovation.
SensorSteadyState solve_dare(const SystemModel& model, double tol = 1e-12, long max_iter = 1'000'000);

/// Draws from N(0, cov) through a Cholesky factor computed once.
/// Singular PSD covariances are factored with a 1e-14 * trace diagonal shift.
/// Always consumes `dim` standard normals so that stream positions do not
/// depend on the covariance.
class GaussianSampler {
public:
    GaussianSampler() = default;
    explicit GaussianSampler(const Matrix& cov);

    Vector sample(Rng& rng) const;
    int dim() const { return static_cast<int>(factor_.rows()); }
    const Matrix& factor() const { return factor_; }

private:
    Matrix factor_;
    bool zero_ = true;
};

struct PlantOutput {
    Vector x_next;
    Vector y;
};

/// Noise-driven plant. Process and measurement noise can come from
/// separate streams.
class Plant {
public:
    explicit Plant(SystemModel model);

    PlantOutput step(const Vector& x, Rng& process_rng, Rng& measurement_rng) const;
    PlantOutput step(const Vector& x, Rng& rng) const { return step(x, rng, rng); }

    /// Draw x_0 ~ N(x0_mean, P_x0).
    Vector initial_state(Rng& rng) const;

    const SystemModel& model() const { return model_; }

private:
    SystemModel model_;
    GaussianSampler w_;
    GaussianSampler v_;
    GaussianSampler x0_;
};

PlantOutput plant_step(const Vector& x, const SystemModel& model, Rng& rng);

struct SensorFilterOutput {
    Vector xhat_filt;
    Vector xhat_pred_next;
    Vector innov;
};

/// Stationary filter/predictor update of the sensor's local Kalman filter.
SensorFilterOutput sensor_filter_step(const Vector& xhat_pred, const Vector& y,
                                      const SensorSteadyState& ss, const SystemModel& model);

/// Solution of X = A X A^T + Q by fixed-point iteration.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q, double tol = 1e-12, long max_iter = 1'000'000);

} // namespace remest

#include "common.hpp"

#include "remest/errors.hpp"

using namespace remest;

TEST_CASE("reference model steady state")
{
    const auto ss = solve_dare(fixture::reference_model());
    CHECK(ss.P_s(0, 0) == doctest::Approx(fixture::kPs).epsilon(1e-10));
    CHECK(ss.K_f(0, 0) == doctest::Approx(fixture::kKf).epsilon(1e-10));
    CHECK(ss.K_s(0, 0) == doctest::Approx(fixture::kKs).epsilon(1e-10));
    CHECK(ss.Sigma_s(0, 0) == doctest::Approx(fixture::kSigmaS).epsilon(1e-10));
    CHECK(dare_residual(fixture::reference_model(), ss.P_s) < 1e-12);
    CHECK(lyapunov_residual(fixture::reference_model(), ss) < 1e-10);
}

TEST_CASE("noise-free measurements leave only process noise")
{
    // sigma_v -> 0 with c = 1: P_s -> sigma_w^2
    const auto ss = solve_dare(SystemModel::scalar(0.95, 1.0, 0.25, 1e-9));
    CHECK(ss.P_s(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(ss.K_f(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("two-state model: DARE fixed point and PSD outputs")
{
    SystemModel m;
    m.A = Matrix(2, 2);
    m.A << 0.9, 0.2, 0.0, 0.7;
    m.C = Matrix(1, 2);
    m.C << 1.0, 0.0;
    m.Sigma_w = Matrix::Identity(2, 2) * 0.1;
    m.Sigma_v = scalar_matrix(0.05);
    m.x0_mean = Vector::Zero(2);
    m.P_x0 = Matrix::Identity(2, 2);
    CHECK(m.validate().empty());
    const auto ss = solve_dare(m);
    CHECK(dare_residual(m, ss.P_s) < 1e-12);
    CHECK(is_psd(ss.P_s));
    CHECK(is_psd(ss.Sigma_s));
    CHECK((ss.K_s - m.A * ss.K_f).norm() < 1e-14);
    CHECK((ss.filt_est_cov - ss.Sigma_s - ss.innov_cov).norm() < 1e-14);
}

TEST_CASE("validation rejects bad models")
{
    CHECK_THROWS_AS(SystemModel::scalar(1.01, 1.0, 0.25, 0.01).validate(), DomainError);
    CHECK_THROWS_AS(SystemModel::scalar(0.95, 1.0, 0.25, 0.0).validate(), DomainError);
    CHECK_THROWS_AS(SystemModel::scalar(0.95, 1.0, -0.1, 0.01).validate(), DomainError);
    CHECK_THROWS_AS(SystemModel::scalar(0.95, 1.0, 0.25, 0.01, 0.0, -1.0).validate(), DomainError);
    auto m = fixture::reference_model();
    m.C = Matrix::Zero(1, 1);
    // unobservable but stable: only a warning
    CHECK(m.validate().empty());
}

TEST_CASE("undetectable modes are reported")
{
    SystemModel m;
    m.A = Matrix(2, 2);
    m.A << 0.5, 0.0, 0.0, 0.99;
    m.C = Matrix(1, 2);
    m.C << 1.0, 0.0;
    m.Sigma_w = Matrix::Identity(2, 2);
    m.Sigma_v = scalar_matrix(1.0);
    m.x0_mean = Vector::Zero(2);
    m.P_x0 = Matrix::Identity(2, 2);
    CHECK(is_detectable(m));
    CHECK(is_detectable(fixture::reference_model()));
}

TEST_CASE("solver budget and singular innovation")
{
    CHECK_THROWS_AS(solve_dare(fixture::reference_model(), 1e-12, 3), NonConvergence);
    // two identical, almost noiseless sensors
    auto m = fixture::reference_model();
    m.C = Matrix(2, 1);
    m.C << 1.0, 1.0;
    m.Sigma_v = Matrix::Identity(2, 2) * 1e-14;
    CHECK_THROWS_AS(solve_dare(m), SingularInnovation);
}

TEST_CASE("Lyapunov solver matches the scalar closed form")
{
    const Matrix X = solve_lyapunov(scalar_matrix(0.9), scalar_matrix(1.0));
    CHECK(X(0, 0) == doctest::Approx(1.0 / (1.0 - 0.81)).epsilon(1e-10));
}

TEST_CASE("Gaussian sampler: empirical covariance and singular input")
{
    Matrix cov(2, 2);
    cov << 2.0, 0.6, 0.6, 1.0;
    GaussianSampler g(cov);
    Rng rng(5);
    Matrix acc = Matrix::Zero(2, 2);
    const int n = 200'000;
    for (int i = 0; i < n; ++i) {
        const Vector x = g.sample(rng);
        acc += x * x.transpose();
    }
    acc /= n;
    CHECK((acc - cov).cwiseAbs().maxCoeff() < 0.03);

    Matrix rank1(2, 2);
    rank1 << 1.0, 1.0, 1.0, 1.0;
    GaussianSampler s(rank1);
    const Vector x = s.sample(rng);
    CHECK(std::abs(x(0) - x(1)) < 1e-6);

    // zero covariance still advances the stream by dim draws
    GaussianSampler zero(Matrix::Zero(2, 2));
    Rng r1(9), r2(9);
    CHECK(zero.sample(r1).norm() == 0.0);
    g.sample(r2);
    CHECK(r1() == r2());
}

TEST_CASE("sensor filter reproduces the stationary recursion")
{
    const auto m = fixture::reference_model();
    const auto ss = solve_dare(m);
    const auto out = sensor_filter_step(scalar_vector(1.0), scalar_vector(2.0), ss, m);
    CHECK(out.innov(0) == doctest::Approx(fixture::kKf * 1.0));
    CHECK(out.xhat_filt(0) == doctest::Approx(1.0 + fixture::kKf));
    CHECK(out.xhat_pred_next(0) == doctest::Approx(0.95 + fixture::kKs));
}

TEST_CASE("sensor prediction error variance converges to P_s")
{
    const auto m = fixture::reference_model();
    const auto ss = solve_dare(m);
    Plant plant(m);
    Rng rng(11);
    Vector x = plant.initial_state(rng);
    Vector xp = m.x0_mean;
    double acc = 0.0;
    const int n = 200'000;
    for (int k = 0; k < n; ++k) {
        const auto po = plant.step(x, rng);
        const auto f = sensor_filter_step(xp, po.y, ss, m);
        x = po.x_next;
        xp = f.xhat_pred_next;
        if (k >= 1000) acc += (x(0) - xp(0)) * (x(0) - xp(0));
    }
    CHECK(acc / (n - 1000) == doctest::Approx(fixture::kPs).epsilon(0.02));
}

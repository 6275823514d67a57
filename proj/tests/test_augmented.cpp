#include "common.hpp"

#include "remest/augmented.hpp"
#include "remest/errors.hpp"

using namespace remest;

namespace {

struct Setup {
    SystemModel model = fixture::reference_model();
    SensorSteadyState ss = solve_dare(model);
    AugmentedModel aug = AugmentedModel::shared_noise(model, ss, 0.01);
};

}  // namespace

TEST_CASE("augmented blocks")
{
    const Setup s;
    const double Kf = fixture::kKf, Ks = fixture::kKs;
    CHECK(s.aug.Acal(0, 0) == doctest::Approx(0.95));
    CHECK(s.aug.Acal(0, 1) == 0.0);
    CHECK(s.aug.Acal(1, 0) == doctest::Approx(Ks));
    CHECK(s.aug.Acal(1, 1) == doctest::Approx(0.95 - Ks));
    CHECK(s.aug.Ccal[0](0, 1) == doctest::Approx(-Kf));
    CHECK(s.aug.Ccal[1](0, 1) == doctest::Approx(1.0 - Kf));
    CHECK(s.aug.Q(1, 1) == doctest::Approx(Ks * Ks * 0.01));
    CHECK(s.aug.R[0](0, 0) == doctest::Approx(Kf * Kf * 0.01 + 0.01));
    CHECK(s.aug.R[0](0, 0) == s.aug.R[1](0, 0));
    CHECK(s.aug.S(0, 0) == 0.0);
    CHECK(s.aug.S(1, 0) == doctest::Approx(Ks * 0.01 * Kf));
}

TEST_CASE("Riccati steps against the Python oracle")
{
    const Setup s;
    const auto rec = ScalarRiccati::from(s.aug);
    struct Row {
        double X, nu0, nu1, open;
    };
    const Row rows[] = {{0.5, 0.485148815057, 0.267533744201, 0.70125},
                        {1.0, 0.936398815057, 0.267623893521, 1.1525},
                        {2.0, 1.838898815057, 0.267668993340, 2.055}};
    for (const auto& r : rows) {
        const Matrix P = lift(scalar_matrix(r.X), s.aug.Ps);
        CHECK(riccati_step(P, 1, 0, s.aug)(0, 0) == doctest::Approx(r.nu0).epsilon(1e-11));
        CHECK(riccati_step(P, 1, 1, s.aug)(0, 0) == doctest::Approx(r.nu1).epsilon(1e-11));
        CHECK(riccati_step(P, 0, 1, s.aug)(0, 0) == doctest::Approx(r.open).epsilon(1e-12));
        CHECK(rec.update(r.X, 0) == doctest::Approx(r.nu0).epsilon(1e-11));
        CHECK(rec.update(r.X, 1) == doctest::Approx(r.nu1).epsilon(1e-11));
    }
    // both packet types collapse to the same update at P = P_s
    CHECK(rec.update(rec.Ps, 0) == doctest::Approx(rec.update(rec.Ps, 1)).epsilon(1e-12));
    CHECK(rec.update(rec.Ps, 0) == doctest::Approx(0.267365736782).epsilon(1e-11));
}

TEST_CASE("structure closure on random chains")
{
    const Setup s;
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
        Matrix P = lift(scalar_matrix(s.ss.P_s(0, 0) + 3.0 * u(rng)), s.aug.Ps);
        for (int k = 0; k < 200; ++k) {
            P = riccati_step(P, u(rng) < 0.5, u(rng) < 0.5, s.aug);
            worst = std::max(worst, structure_deviation(P, s.aug.Ps));
        }
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("closure for a two-state plant")
{
    SystemModel m;
    m.A = Matrix(2, 2);
    m.A << 0.8, 0.3, -0.1, 0.6;
    m.C = Matrix(1, 2);
    m.C << 1.0, 0.5;
    m.Sigma_w = Matrix::Identity(2, 2) * 0.2;
    m.Sigma_v = scalar_matrix(0.05);
    m.x0_mean = Vector::Zero(2);
    m.P_x0 = Matrix::Identity(2, 2);
    const auto ss = solve_dare(m);
    const auto aug = AugmentedModel::shared_noise(m, ss, 0.02);
    Rng rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix P = lift(ss.P_s + Matrix::Identity(2, 2), ss.P_s);
    double worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
        P = riccati_step(P, u(rng) < 0.7, u(rng) < 0.5, aug);
        worst = std::max(worst, structure_deviation(P, ss.P_s));
        CHECK(is_psd(project(P, ss.P_s) - ss.P_s, 1e-9));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("expectation is the loss-weighted mix")
{
    const Setup s;
    const auto rec = ScalarRiccati::from(s.aug);
    for (double p : {0.0, 0.2, 0.9, 1.0})
        for (double X : {0.3, 0.8, 1.7})
            for (int nu = 0; nu < 2; ++nu) {
                const double mix = p * rec.step(X, 0, nu) + (1.0 - p) * rec.step(X, 1, nu);
                CHECK(rec.expected(X, nu, p) == doctest::Approx(mix).epsilon(1e-13));
                const StructuredCov sc{scalar_matrix(X), s.aug.Ps};
                CHECK(expected_riccati(sc, nu, p, s.aug).P11(0, 0) == doctest::Approx(mix).epsilon(1e-12));
            }
}

TEST_CASE("project rejects unstructured input")
{
    const Setup s;
    Matrix P = lift(scalar_matrix(1.0), s.aug.Ps);
    P(0, 1) += 1e-3;
    P(1, 0) += 1e-3;
    CHECK_THROWS_AS(project(P, s.aug.Ps), StructureViolation);
    const StructuredCov below{scalar_matrix(0.1), s.aug.Ps};
    CHECK_THROWS_AS(below.validate(), DomainError);
}

TEST_CASE("white quantization noise keeps R invertible when n > m")
{
    SystemModel m;
    m.A = Matrix(2, 2);
    m.A << 0.8, 0.3, -0.1, 0.6;
    m.C = Matrix(1, 2);
    m.C << 1.0, 0.5;
    m.Sigma_w = Matrix::Identity(2, 2) * 0.2;
    m.Sigma_v = scalar_matrix(0.05);
    m.x0_mean = Vector::Zero(2);
    m.P_x0 = Matrix::Identity(2, 2);
    const auto ss = solve_dare(m);
    // K_f Sigma_v K_f^T has rank one here
    const auto aug = AugmentedModel::shared_noise(m, ss, 0.3);
    for (int nu = 0; nu < 2; ++nu) CHECK(is_pd(aug.R[nu], 1e-6));
    const Matrix white = white_noise_cov(2, 0.3);
    CHECK(white(0, 0) == doctest::Approx(0.15));
    CHECK(white(0, 1) == 0.0);
}

TEST_CASE("receiver gain zeroes on loss")
{
    const Setup s;
    const Matrix P = lift(scalar_matrix(1.0), s.aug.Ps);
    Vector theta(2);
    theta << 1.0, 0.5;
    const Vector next = receiver_estimate_step(theta, P, scalar_vector(3.0), 0, 1, s.aug);
    CHECK((next - s.aug.Acal * theta).norm() < 1e-15);
}

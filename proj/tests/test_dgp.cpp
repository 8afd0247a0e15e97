#include <doctest.h>

#include <cmath>

#include "medtest/dgp.hpp"
#include "medtest/ml.hpp"

using namespace medtest;

namespace {

Eigen::VectorXd ols(const std::vector<const Eigen::MatrixXd*>& blocks, const Eigen::VectorXd& y) {
    Eigen::Index cols = 1;
    for (const auto* b : blocks) cols += b->cols();
    Eigen::MatrixXd design(y.size(), cols);
    design.col(0).setOnes();
    Eigen::Index at = 1;
    for (const auto* b : blocks) {
        design.middleCols(at, b->cols()) = *b;
        at += b->cols();
    }
    return design.colPivHouseholderQr().solve(y);
}

double corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
    return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
}

}  // namespace

TEST_CASE("covariate coefficients decay quadratically") {
    const auto b = dgp::covariate_coefficients(4, 2.0);
    CHECK(b(0) == 1.0);
    CHECK(b(1) == 0.25);
    CHECK(b(3) == doctest::Approx(1.0 / 16.0));
}

TEST_CASE("Toeplitz factor reproduces the covariance") {
    const auto& l = dgp::toeplitz_cholesky(6);
    const Eigen::MatrixXd cov = l * l.transpose();
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) CHECK(cov(i, j) == doctest::Approx(std::pow(0.5, std::abs(i - j))).epsilon(1e-12));
    }
    CHECK(&dgp::toeplitz_cholesky(6) == &l);
}

TEST_CASE("simulated covariates have the Toeplitz correlation") {
    dgp::DgpConfig c;
    c.n = 20000;
    c.p = 4;
    c.seed = 3;
    const Dataset d = dgp::simulate(c);
    CHECK(d.x.rows() == 20000);
    CHECK(corr(d.x.col(0), d.x.col(1)) == doctest::Approx(0.5).epsilon(0.05));
    CHECK(corr(d.x.col(0), d.x.col(2)) == doctest::Approx(0.25).epsilon(0.1));
    CHECK(std::abs(d.x.col(3).mean()) < 0.03);
    CHECK(d.d.mean() > 0.3);
    CHECK(d.d.mean() < 0.7);
    CHECK(ml::is_binary(d.d));
}

TEST_CASE("structural coefficients are recovered under the null") {
    dgp::DgpConfig c;
    c.n = 40000;
    c.p = 5;
    c.seed = 4;
    const Dataset d = dgp::simulate(c);
    const Eigen::MatrixXd dd = d.d, mm = d.m;
    const Eigen::VectorXd y_fit = ols({&dd, &mm, &d.x}, d.y);
    CHECK(y_fit(1) == doctest::Approx(1.0).epsilon(0.03));
    CHECK(y_fit(2) == doctest::Approx(0.5).epsilon(0.03));
    CHECK(y_fit(3) == doctest::Approx(0.5).epsilon(0.05));
    const Eigen::VectorXd m_fit = ols({&dd, &d.z2, &d.x}, d.m);
    CHECK(m_fit(1) == doctest::Approx(0.5).epsilon(0.05));
    CHECK(m_fit(2) == doctest::Approx(0.5).epsilon(0.03));
    // Instruments are excluded from the outcome equation.
    const Eigen::VectorXd full = ols({&dd, &mm, &d.x, &d.z1, &d.z2}, d.y);
    CHECK(std::abs(full(full.size() - 1)) < 0.03);
    CHECK(std::abs(full(full.size() - 2)) < 0.03);
}

TEST_CASE("violations show up in the structural regressions") {
    dgp::DgpConfig c;
    c.n = 40000;
    c.p = 5;
    c.seed = 5;
    c.gamma = 0.2;
    const Dataset g = dgp::simulate(c);
    const Eigen::MatrixXd gd = g.d, gm = g.m;
    const Eigen::VectorXd full = ols({&gd, &gm, &g.x, &g.z1, &g.z2}, g.y);
    CHECK(full(full.size() - 2) == doctest::Approx(0.2).epsilon(0.15));
    CHECK(full(full.size() - 1) == doctest::Approx(0.2).epsilon(0.15));

    c.gamma = 0.0;
    c.delta = 1.0;
    const Dataset u = dgp::simulate(c);
    const Eigen::MatrixXd ud = u.d, um = u.m;
    const Eigen::VectorXd biased = ols({&ud, &um, &u.x}, u.y);
    CHECK(std::abs(biased(1) - 1.0) > 0.1);
}

TEST_CASE("design 2 links the instruments") {
    dgp::DgpConfig c;
    c.n = 30000;
    c.p = 2;
    c.design = 2;
    c.seed = 6;
    const Dataset d = dgp::simulate(c);
    const Eigen::VectorXd z1 = d.z1.col(0), z2 = d.z2.col(0);
    const double cov = ((z1.array() - z1.mean()) * (z2.array() - z2.mean())).mean();
    CHECK(cov == doctest::Approx(0.5).epsilon(0.05));
    CHECK((z2.array() - z2.mean()).square().mean() == doctest::Approx(1.25).epsilon(0.05));
}

TEST_CASE("simulation is a pure function of the configuration") {
    dgp::DgpConfig c;
    c.n = 50;
    c.p = 7;
    c.seed = 9;
    const Dataset a = dgp::simulate(c), b = dgp::simulate(c);
    CHECK(a.y == b.y);
    CHECK(a.x == b.x);
    c.seed = 10;
    CHECK(dgp::simulate(c).y != a.y);
    c.binary_mediator = true;
    CHECK(ml::is_binary(dgp::simulate(c).m));
    c.design = 3;
    CHECK_THROWS_AS(dgp::simulate(c), std::invalid_argument);
}

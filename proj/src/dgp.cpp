#include "medtest/dgp.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

#include "medtest/rng.hpp"

namespace medtest::dgp {

Eigen::VectorXd covariate_coefficients(Eigen::Index p, double beta_scale) {
    Eigen::VectorXd beta(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double k = static_cast<double>(i + 1);
        beta(i) = beta_scale * 0.5 / (k * k);
    }
    return beta;
}

const Eigen::MatrixXd& toeplitz_cholesky(Eigen::Index p) {
    static std::mutex mutex;
    static std::map<Eigen::Index, std::unique_ptr<Eigen::MatrixXd>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[p];
    if (!slot) {
        Eigen::MatrixXd cov(p, p);
        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) cov(i, j) = std::pow(0.5, static_cast<double>(std::abs(i - j)));
        }
        slot = std::make_unique<Eigen::MatrixXd>(cov.llt().matrixL());
    }
    return *slot;
}

Dataset simulate(const DgpConfig& c) {
    if (c.n < 1 || c.p < 1) throw std::invalid_argument("simulation needs n >= 1 and p >= 1");
    if (c.design != 1 && c.design != 2) throw std::invalid_argument("design must be 1 or 2");
    const Eigen::MatrixXd& chol = toeplitz_cholesky(c.p);
    const Eigen::VectorXd beta = covariate_coefficients(c.p, c.beta_scale);

    Rng rng(c.seed);
    Eigen::MatrixXd normals(c.n, c.p);
    Eigen::MatrixXd shocks(c.n, 6);
    for (Eigen::Index i = 0; i < c.n; ++i) {
        for (Eigen::Index j = 0; j < c.p; ++j) normals(i, j) = rng.normal();
        for (Eigen::Index j = 0; j < (c.design == 2 ? 6 : 5); ++j) shocks(i, j) = rng.normal();
    }

    Dataset data;
    data.x = normals * chol.transpose();
    const Eigen::VectorXd index = data.x * beta;
    const auto z1 = shocks.col(0);
    const auto u1 = shocks.col(2);
    const auto u2 = shocks.col(3);
    const auto u3 = shocks.col(4);
    Eigen::VectorXd z2 = shocks.col(1);
    if (c.design == 2) z2 = shocks.col(5) + 0.5 * z1;

    data.d = ((index + 0.5 * z1 + u1).array() > 0.0).cast<double>();
    data.m = 0.5 * data.d + 0.5 * z2 + index + c.delta * u1 + u2;
    if (c.binary_mediator) data.m = (data.m.array() > 0.0).cast<double>();
    data.y = data.d + 0.5 * data.m + index + c.gamma * z1 + c.gamma * z2 + c.delta * u1 + u3;
    data.z1 = z1;
    data.z2 = z2;
    data.w = Eigen::MatrixXd(c.n, 0);
    return data;
}

}  // namespace medtest::dgp

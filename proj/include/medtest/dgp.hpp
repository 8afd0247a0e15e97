#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "medtest/dataset.hpp"

namespace medtest::dgp {

struct DgpConfig {
    Eigen::Index n = 1000;
    Eigen::Index p = 200;
    /// Strength of the unobserved confounder U1 in the M and Y equations.
    double delta = 0.0;
    /// Direct effect of each instrument on Y.
    double gamma = 0.0;
    /// 1: independent instruments; 2: Z2 = U4 + 0.5 Z1.
    int design = 1;
    std::uint64_t seed = 1;
    /// Replace M by the indicator 1{M* > 0} of the linear index.
    bool binary_mediator = false;
    /// Multiplies the covariate coefficients 0.5 / i^2.
    double beta_scale = 1.0;
};

/// True effects of the continuous-mediator designs.
inline constexpr double kTrueTotal = 1.25;
inline constexpr double kTrueDirect = 1.0;
inline constexpr double kTrueIndirect = 0.25;
/// E[Y(1,1) - Y(0,0)] for either mediator type.
inline constexpr double kTrueDynamic = 1.5;

/// Covariate coefficient vector beta_i = beta_scale * 0.5 / i^2, i = 1..p.
Eigen::VectorXd covariate_coefficients(Eigen::Index p, double beta_scale = 1.0);

/// Lower Cholesky factor of the p x p Toeplitz matrix 0.5^|i-j|, computed
/// once per p and shared between threads.
const Eigen::MatrixXd& toeplitz_cholesky(Eigen::Index p);

/// Draws one sample. Per row: p standard normals for X, then Z1, Z2, U1, U2,
/// U3 (and U4 in design 2), all from a single stream seeded by `seed`.
Dataset simulate(const DgpConfig& config);

}  // namespace medtest::dgp

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medtest/dataset.hpp"

namespace medtest::ml {

struct LassoOptions {
    /// Convergence threshold on the largest coefficient change in one sweep
    /// (standardized scale).
    double tolerance = 1e-7;
    int max_sweeps = 10000;
};

/// Lasso fit on standardized columns, reported on the original scale.
struct LassoFit {
    double intercept = 0.0;
    /// Original-scale slopes: prediction = intercept + x' coefficients.
    Eigen::VectorXd coefficients;
    /// Slopes on the standardized columns (the penalized parameters).
    Eigen::VectorXd standardized;
    double lambda = 0.0;
    /// Column means and population standard deviations used for scaling;
    /// scale 0 marks a constant column, whose coefficient is fixed at 0.
    Eigen::VectorXd means;
    Eigen::VectorXd scales;
    int sweeps = 0;
    bool converged = true;

    Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

/// Coordinate-descent minimizer of (1/2n) sum r_i^2 + lambda sum |b_j| over
/// standardized columns with an unpenalized intercept. If `objective_trace`
/// is given, the objective after every sweep is appended to it.
LassoFit lasso_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, double lambda,
                   const LassoOptions& options = {}, std::vector<double>* objective_trace = nullptr);

/// Smallest penalty giving an all-zero fit: max_j |x_j' y| / n over
/// standardized columns and centered target.
double lambda_max(const Eigen::MatrixXd& features, const Eigen::VectorXd& target);

/// Geometric grid of `count` penalties from `top` down to `top * ratio`.
std::vector<double> lambda_grid(double top, std::size_t count = 50, double ratio = 1e-3);

/// Random partition of 0..n-1 into k folds whose sizes differ by at most one.
struct FoldAssignment {
    int k = 0;
    /// 0-based fold index of each observation.
    std::vector<int> fold_of;
    std::uint64_t seed = 0;

    std::vector<std::vector<Eigen::Index>> members() const;
};

FoldAssignment make_folds(Eigen::Index n, int k, std::uint64_t seed);

struct LambdaSelection {
    double lambda = 0.0;
    std::vector<double> grid;
    std::vector<double> cv_mse;
};

/// K-fold cross-validated choice over lambda_grid(lambda_max). Ties favour the
/// larger penalty. Throws data_error when n < folds.
LambdaSelection select_lambda(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, int folds,
                              std::uint64_t seed, const LassoOptions& options = {});

/// select_lambda followed by a fit on all rows at the chosen penalty.
LassoFit cv_lasso_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, int folds, std::uint64_t seed,
                      const LassoOptions& options = {});

struct CrossfitOptions {
    int inner_folds = 5;
    /// Fit separate models per treatment arm for regressions that condition on D.
    bool stratify_d = false;
    /// Minimum complement observations per arm before stratification is used.
    Eigen::Index min_arm_size = 100;
    unsigned threads = 1;
    LassoOptions lasso;
};

/// Held-out predictions of the three conditional means without (eta1) and
/// with (eta2) the relevant instrument.
///
/// Columns: 0 = E[Y | D, X], 1 = E[M | D, X], 2 = E[Y | D, M, X]; eta2 adds Z1,
/// Z1 and Z2 respectively. z2linked adds Z2 to both sets of columns 0 and 1;
/// posttreatment adds W to both sets of column 2.
struct CrossfitPredictions {
    Eigen::MatrixXd eta1;
    Eigen::MatrixXd eta2;
    Variant variant = Variant::baseline;
    FoldAssignment folds;
    std::vector<std::string> warnings;
};

CrossfitPredictions crossfit_means(const Dataset& data, Variant variant, int k, std::uint64_t seed,
                                   const CrossfitOptions& options = {});

/// Feature matrix for component `component` (0..2), without or with the instrument.
Eigen::MatrixXd component_features(const Dataset& data, Variant variant, int component, bool with_instrument);
const Eigen::VectorXd& component_target(const Dataset& data, int component);

/// True when every entry is 0 or 1.
bool is_binary(const Eigen::VectorXd& v);

}  // namespace medtest::ml

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "medtest/dataset.hpp"
#include "medtest/ml.hpp"

namespace medtest::idtest {

enum class Sidedness { two_sided, one_sided_upper };

std::string_view sidedness_name(Sidedness s);
std::optional<Sidedness> parse_sidedness(std::string_view name);

struct TestSetup {
    Variant variant = Variant::baseline;
    /// Standard deviation of the perturbation; unset means 500 / n.
    std::optional<double> sigma_zeta;
    int folds = 10;
    Sidedness sidedness = Sidedness::two_sided;
    ml::CrossfitOptions crossfit;
};

struct TestResult {
    double theta_hat = 0.0;
    double se = 0.0;
    double tstat = 0.0;
    double pval = 1.0;
    Eigen::Index n = 0;
    /// Mean squared gap (eta1 - eta2)^2 of each component.
    std::array<double, 3> component_means{};
    double zeta_sd = 0.0;
    /// Set when all subject contributions coincide; pval is then 1.
    bool degenerate = false;
    std::uint64_t seed = 0;
    /// median_run only: p-values of every run, in run order.
    std::vector<double> run_pvals;
    std::vector<std::string> warnings;
};

struct ThetaEstimate {
    double theta_hat = 0.0;
    /// u_i = sum over components of (g_ij^2 + zeta_i).
    Eigen::VectorXd contributions;
    std::array<double, 3> component_means{};
};

/// theta_hat = (1/3n) sum_i u_i with g_ij = eta1_ij - eta2_ij.
ThetaEstimate compute_theta(const Eigen::MatrixXd& eta1, const Eigen::MatrixXd& eta2, const Eigen::VectorXd& zeta);
ThetaEstimate compute_theta(const ml::CrossfitPredictions& preds, const Eigen::VectorXd& zeta);

/// Subject-clustered standard error sqrt(sum_i (u_i - 3 theta_hat)^2) / (3n).
double cluster_se(const Eigen::VectorXd& contributions, double theta_hat);

/// p-value of a standard normal statistic.
double p_value(double tstat, Sidedness sidedness);

TestResult run_test(const Dataset& data, const TestSetup& setup, std::uint64_t seed);

/// Runs the test `runs` times (odd) and returns the run with the median
/// p-value. Run r uses `seed` for r = 0 and derive_seed(seed, {r}) otherwise.
TestResult median_run(const Dataset& data, const TestSetup& setup, int runs, std::uint64_t seed);

struct FirstStageResult {
    /// D on Z1 given X.
    double stat_treatment = 0.0;
    double pval_treatment = 1.0;
    Eigen::Index df_treatment = 0;
    /// M on Z2 given D, X (and W for the posttreatment variant).
    double stat_mediator = 0.0;
    double pval_mediator = 1.0;
    Eigen::Index df_mediator = 0;
};

/// Instrument relevance: cross-fitted partialling-out of the controls from
/// both sides, OLS of residual on residual instruments, and a robust (HC0)
/// Wald test of all instrument coefficients.
FirstStageResult first_stage_check(const Dataset& data, const TestSetup& setup, std::uint64_t seed);

}  // namespace medtest::idtest

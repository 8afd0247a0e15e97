#include "medtest/idtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "medtest/error.hpp"
#include "medtest/parallel.hpp"
#include "medtest/rng.hpp"
#include "medtest/stats.hpp"

namespace medtest::idtest {

namespace {

/// Held-out residuals of `target` after a cross-fitted lasso on `controls`.
Eigen::VectorXd crossfit_residual(const Eigen::MatrixXd& controls, const Eigen::VectorXd& target,
                                  const ml::FoldAssignment& folds, const ml::CrossfitOptions& opt,
                                  std::uint64_t seed) {
    const auto members = folds.members();
    Eigen::VectorXd resid(target.size());
    for (int f = 0; f < folds.k; ++f) {
        const auto& test = members[static_cast<std::size_t>(f)];
        std::vector<Eigen::Index> train;
        for (Eigen::Index i = 0; i < target.size(); ++i) {
            if (folds.fold_of[static_cast<std::size_t>(i)] != f) train.push_back(i);
        }
        const ml::LassoFit fit = ml::cv_lasso_fit(controls(train, Eigen::all), target(train), opt.inner_folds,
                                                  derive_seed(seed, {static_cast<std::uint64_t>(f)}), opt.lasso);
        for (Eigen::Index i : test) resid(i) = target(i) - fit.predict_row(controls.row(i));
    }
    return resid;
}

struct Wald {
    double stat = 0.0;
    double pval = 1.0;
    Eigen::Index df = 0;
};

Wald robust_wald(const Eigen::MatrixXd& controls, const Eigen::VectorXd& outcome, const Eigen::MatrixXd& instruments,
                 const TestSetup& setup, std::uint64_t seed, const char* what) {
    for (Eigen::Index j = 0; j < instruments.cols(); ++j) {
        const auto col = instruments.col(j);
        if ((col.array() == col(0)).all()) throw data_error(std::string("zero-variance instrument in ") + what);
    }
    const ml::FoldAssignment folds = ml::make_folds(outcome.size(), setup.folds, derive_seed(seed, {0}));
    const Eigen::VectorXd y = crossfit_residual(controls, outcome, folds, setup.crossfit, derive_seed(seed, {1}));
    Eigen::MatrixXd z(instruments.rows(), instruments.cols());
    for (Eigen::Index j = 0; j < instruments.cols(); ++j) {
        z.col(j) = crossfit_residual(controls, instruments.col(j), folds, setup.crossfit,
                                     derive_seed(seed, {2, static_cast<std::uint64_t>(j)}));
    }
    const Eigen::MatrixXd zz = z.transpose() * z;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(zz);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 1e-12 * zz.diagonal().maxCoeff()).all()) {
        throw data_error(std::string("instruments are collinear after partialling out in ") + what);
    }
    const Eigen::VectorXd coef = ldlt.solve(z.transpose() * y);
    const Eigen::VectorXd e = y - z * coef;
    const Eigen::MatrixXd meat = z.transpose() * e.array().square().matrix().asDiagonal() * z;
    const Eigen::MatrixXd bread = ldlt.solve(Eigen::MatrixXd::Identity(z.cols(), z.cols()));
    const Eigen::MatrixXd vcov = bread * meat * bread;
    Wald w;
    w.df = z.cols();
    w.stat = coef.dot(vcov.ldlt().solve(coef));
    w.pval = stats::chi_squared_sf(w.stat, static_cast<double>(w.df));
    return w;
}

}  // namespace

std::string_view sidedness_name(Sidedness s) {
    return s == Sidedness::two_sided ? "two-sided" : "one-sided";
}

std::optional<Sidedness> parse_sidedness(std::string_view name) {
    if (name == "two-sided" || name == "two_sided") return Sidedness::two_sided;
    if (name == "one-sided" || name == "one_sided" || name == "one-sided-upper") return Sidedness::one_sided_upper;
    return std::nullopt;
}

ThetaEstimate compute_theta(const Eigen::MatrixXd& eta1, const Eigen::MatrixXd& eta2, const Eigen::VectorXd& zeta) {
    if (eta1.rows() != eta2.rows() || eta1.cols() != 3 || eta2.cols() != 3 || zeta.size() != eta1.rows()) {
        throw data_error("prediction matrices must be n x 3 with a perturbation per row");
    }
    if (!eta1.allFinite() || !eta2.allFinite() || !zeta.allFinite()) throw data_error("non-finite prediction");
    const Eigen::Index n = eta1.rows();
    if (n == 0) throw data_error("no observations");
    const Eigen::ArrayXXd gap2 = (eta1 - eta2).array().square();
    ThetaEstimate out;
    out.contributions = gap2.rowwise().sum().matrix() + 3.0 * zeta;
    out.theta_hat = out.contributions.sum() / (3.0 * static_cast<double>(n));
    for (int j = 0; j < 3; ++j) out.component_means[static_cast<std::size_t>(j)] = gap2.col(j).mean();
    return out;
}

ThetaEstimate compute_theta(const ml::CrossfitPredictions& preds, const Eigen::VectorXd& zeta) {
    return compute_theta(preds.eta1, preds.eta2, zeta);
}

double cluster_se(const Eigen::VectorXd& contributions, double theta_hat) {
    const Eigen::Index n = contributions.size();
    if (n < 2) throw data_error("standard error needs at least two subjects");
    const double ss = (contributions.array() - 3.0 * theta_hat).square().sum();
    return std::sqrt(ss) / (3.0 * static_cast<double>(n));
}

double p_value(double tstat, Sidedness sidedness) {
    if (sidedness == Sidedness::one_sided_upper) return stats::normal_sf(tstat);
    return std::min(1.0, 2.0 * stats::normal_sf(std::abs(tstat)));
}

TestResult run_test(const Dataset& data, const TestSetup& setup, std::uint64_t seed) {
    const Eigen::Index n = data.n();
    const ml::CrossfitPredictions preds =
        ml::crossfit_means(data, setup.variant, setup.folds, derive_seed(seed, {10}), setup.crossfit);
    TestResult r;
    r.n = n;
    r.seed = seed;
    r.zeta_sd = setup.sigma_zeta.value_or(500.0 / static_cast<double>(n));
    if (!(r.zeta_sd >= 0.0) || !std::isfinite(r.zeta_sd)) throw std::invalid_argument("sigma_zeta must be non-negative");
    Rng rng(derive_seed(seed, {11}));
    Eigen::VectorXd zeta(n);
    for (Eigen::Index i = 0; i < n; ++i) zeta(i) = r.zeta_sd * rng.normal();
    const ThetaEstimate est = compute_theta(preds, zeta);
    r.theta_hat = est.theta_hat;
    r.component_means = est.component_means;
    r.se = cluster_se(est.contributions, est.theta_hat);
    r.warnings = preds.warnings;
    if (r.se > 0.0) {
        r.tstat = r.theta_hat / r.se;
        r.pval = p_value(r.tstat, setup.sidedness);
    } else {
        r.degenerate = true;
        r.tstat = 0.0;
        r.pval = 1.0;
        r.warnings.push_back("degenerate standard error: all subject contributions are equal");
    }
    return r;
}

TestResult median_run(const Dataset& data, const TestSetup& setup, int runs, std::uint64_t seed) {
    if (runs < 1 || runs % 2 == 0) throw std::invalid_argument("number of runs must be odd");
    std::vector<TestResult> results(static_cast<std::size_t>(runs));
    TestSetup inner = setup;
    if (runs > 1) inner.crossfit.threads = 1;
    parallel_for(results.size(), runs > 1 ? setup.crossfit.threads : 1, [&](std::size_t r) {
        const std::uint64_t s = r == 0 ? seed : derive_seed(seed, {static_cast<std::uint64_t>(r)});
        results[r] = run_test(data, inner, s);
    });
    std::vector<std::size_t> order(results.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return results[a].pval < results[b].pval; });
    TestResult out = results[order[order.size() / 2]];
    for (const auto& r : results) out.run_pvals.push_back(r.pval);
    return out;
}

FirstStageResult first_stage_check(const Dataset& data, const TestSetup& setup, std::uint64_t seed) {
    data.validate();
    if (setup.variant == Variant::posttreatment && !data.has_w()) {
        throw data_error("variant posttreatment needs post-treatment covariates W");
    }
    FirstStageResult out;
    const Wald treatment = robust_wald(data.x, data.d, data.z1, setup, derive_seed(seed, {20}), "Z1");
    out.stat_treatment = treatment.stat;
    out.pval_treatment = treatment.pval;
    out.df_treatment = treatment.df;

    const bool with_w = setup.variant == Variant::posttreatment;
    Eigen::MatrixXd controls(data.n(), 1 + data.x.cols() + (with_w ? data.w.cols() : 0));
    controls.col(0) = data.d;
    controls.middleCols(1, data.x.cols()) = data.x;
    if (with_w) controls.rightCols(data.w.cols()) = data.w;
    const Wald mediator = robust_wald(controls, data.m, data.z2, setup, derive_seed(seed, {21}), "Z2");
    out.stat_mediator = mediator.stat;
    out.pval_mediator = mediator.pval;
    out.df_mediator = mediator.df;
    return out;
}

}  // namespace medtest::idtest

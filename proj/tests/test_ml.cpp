#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "medtest/dgp.hpp"
#include "medtest/error.hpp"
#include "medtest/ml.hpp"
#include "medtest/rng.hpp"

using namespace medtest;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = rng.normal();
    }
    return out;
}

/// Columns with mean 0, population variance 1 and X'X / n = I.
Eigen::MatrixXd orthonormal_design(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    Eigen::MatrixXd a = gaussian(n, p, seed);
    a.rowwise() -= a.colwise().mean();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(n, p)) * std::sqrt(static_cast<double>(n));
}

double soft(double z, double l) { return z > l ? z - l : (z < -l ? z + l : 0.0); }

}  // namespace

TEST_CASE("lasso matches soft thresholding on an orthonormal design") {
    const Eigen::Index n = 200, p = 8;
    const Eigen::MatrixXd x = orthonormal_design(n, p, 1);
    Eigen::VectorXd beta(p);
    beta << 2, -1.5, 0.8, 0.3, 0, 0, -0.2, 1;
    const Eigen::VectorXd y = (x * beta).array() + 0.5 * gaussian(n, 1, 2).col(0).array() + 3.0;
    const Eigen::VectorXd yc = y.array() - y.mean();
    for (double lambda : {0.0, 0.05, 0.25, 0.7, 1.2}) {
        const auto fit = ml::lasso_fit(x, y, lambda);
        for (Eigen::Index j = 0; j < p; ++j) {
            const double expected = soft(x.col(j).dot(yc) / static_cast<double>(n), lambda);
            CHECK(std::abs(fit.coefficients(j) - expected) <= 1e-6);
        }
        CHECK(std::abs(fit.intercept - y.mean()) <= 1e-9);
    }
}

TEST_CASE("lasso at zero penalty is least squares") {
    const Eigen::MatrixXd x = gaussian(120, 6, 3);
    const Eigen::VectorXd y = x * Eigen::VectorXd::LinSpaced(6, -1, 1) + gaussian(120, 1, 4).col(0);
    ml::LassoOptions opt;
    opt.tolerance = 1e-12;
    opt.max_sweeps = 100000;
    const auto fit = ml::lasso_fit(x, y, 0.0, opt);
    Eigen::MatrixXd design(120, 7);
    design << Eigen::VectorXd::Ones(120), x;
    const Eigen::VectorXd ols = design.colPivHouseholderQr().solve(y);
    CHECK(std::abs(fit.intercept - ols(0)) < 1e-8);
    CHECK((fit.coefficients - ols.tail(6)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(fit.converged);
}

TEST_CASE("penalties at or above lambda_max give exact zeros") {
    const Eigen::MatrixXd x = gaussian(80, 15, 5);
    const Eigen::VectorXd y = x.col(2) * 0.7 + gaussian(80, 1, 6).col(0);
    const double top = ml::lambda_max(x, y);
    for (double scale : {1.0, 1.5, 10.0}) {
        const auto fit = ml::lasso_fit(x, y, top * scale);
        CHECK((fit.coefficients.array() == 0.0).all());
        CHECK(fit.intercept == doctest::Approx(y.mean()).epsilon(1e-12));
    }
    CHECK((ml::lasso_fit(x, y, top * 0.9).coefficients.array() != 0.0).any());
}

TEST_CASE("objective never increases across sweeps") {
    const Eigen::MatrixXd x = gaussian(60, 100, 7);
    const Eigen::VectorXd y = x.leftCols(5).rowwise().sum() + gaussian(60, 1, 8).col(0);
    std::vector<double> trace;
    ml::lasso_fit(x, y, 0.02, {}, &trace);
    REQUIRE(trace.size() > 2);
    for (std::size_t s = 1; s < trace.size(); ++s) CHECK(trace[s] <= trace[s - 1] + 1e-12);
}

TEST_CASE("constant columns are ignored") {
    Eigen::MatrixXd x = gaussian(50, 3, 9);
    x.col(1).setConstant(4.0);
    const Eigen::VectorXd y = x.col(0) * 2.0;
    const auto fit = ml::lasso_fit(x, y, 0.01);
    CHECK(fit.coefficients(1) == 0.0);
    CHECK(fit.scales(1) == 0.0);
    CHECK(fit.predict(x).allFinite());
}

TEST_CASE("lambda grid is geometric from the top") {
    const auto g = ml::lambda_grid(2.0, 50, 1e-3);
    REQUIRE(g.size() == 50);
    CHECK(g.front() == 2.0);
    CHECK(g.back() == doctest::Approx(2e-3));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] / g[i - 1] == doctest::Approx(std::pow(1e-3, 1.0 / 49)));
}

TEST_CASE("fold assignment is balanced and reproducible") {
    const auto a = ml::make_folds(103, 5, 11);
    const auto b = ml::make_folds(103, 5, 11);
    CHECK(a.fold_of == b.fold_of);
    std::vector<int> size(5, 0);
    for (int f : a.fold_of) ++size[static_cast<std::size_t>(f)];
    CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 1);
    CHECK(ml::make_folds(103, 5, 12).fold_of != a.fold_of);
    CHECK_THROWS_AS(ml::make_folds(3, 5, 1), data_error);
    CHECK_THROWS_AS(ml::make_folds(10, 1, 1), std::invalid_argument);
}

TEST_CASE("cross-validated penalty picks a sparse signal") {
    const Eigen::MatrixXd x = gaussian(400, 30, 13);
    const Eigen::VectorXd y = 1.5 * x.col(0) - x.col(1) + 0.5 * gaussian(400, 1, 14).col(0);
    const auto sel = ml::select_lambda(x, y, 5, 15);
    REQUIRE(sel.grid.size() == sel.cv_mse.size());
    const auto best = std::min_element(sel.cv_mse.begin(), sel.cv_mse.end());
    CHECK(sel.lambda == sel.grid[static_cast<std::size_t>(best - sel.cv_mse.begin())]);
    const auto fit = ml::cv_lasso_fit(x, y, 5, 15);
    CHECK(fit.lambda == sel.lambda);
    CHECK(fit.coefficients(0) == doctest::Approx(1.5).epsilon(0.05));
    CHECK(fit.coefficients(1) == doctest::Approx(-1.0).epsilon(0.08));
}

TEST_CASE("cross-validation MSE agrees with refitting each fold") {
    const Eigen::MatrixXd x = gaussian(90, 6, 16);
    const Eigen::VectorXd y = x.col(3) + gaussian(90, 1, 17).col(0);
    ml::LassoOptions opt;
    opt.tolerance = 1e-10;
    const auto sel = ml::select_lambda(x, y, 3, 18, opt);
    const auto folds = ml::make_folds(90, 3, 18);
    const auto members = folds.members();
    for (std::size_t g : {std::size_t{0}, std::size_t{20}, std::size_t{49}}) {
        double sse = 0.0;
        for (int f = 0; f < 3; ++f) {
            std::vector<Eigen::Index> train;
            for (Eigen::Index i = 0; i < 90; ++i) {
                if (folds.fold_of[static_cast<std::size_t>(i)] != f) train.push_back(i);
            }
            const auto fit = ml::lasso_fit(x(train, Eigen::all), y(train), sel.grid[g], opt);
            for (Eigen::Index i : members[static_cast<std::size_t>(f)]) {
                sse += std::pow(y(i) - fit.predict_row(x.row(i)), 2);
            }
        }
        CHECK(sel.cv_mse[g] == doctest::Approx(sse / 90.0).epsilon(1e-6));
    }
}

TEST_CASE("component feature sets follow the variant") {
    dgp::DgpConfig c;
    c.n = 60;
    c.p = 4;
    Dataset d = dgp::simulate(c);
    CHECK(ml::component_features(d, Variant::baseline, 0, false).cols() == 5);
    CHECK(ml::component_features(d, Variant::baseline, 0, true).cols() == 6);
    CHECK(ml::component_features(d, Variant::baseline, 2, true).cols() == 7);
    CHECK(ml::component_features(d, Variant::z2linked, 1, false).cols() == 6);
    CHECK(ml::component_features(d, Variant::z2linked, 2, false).cols() == 6);
    CHECK_THROWS_AS(ml::component_features(d, Variant::posttreatment, 2, false), data_error);
    d.w = Eigen::MatrixXd::Ones(60, 2);
    CHECK(ml::component_features(d, Variant::posttreatment, 2, false).cols() == 8);
    CHECK(ml::component_features(d, Variant::posttreatment, 0, false).cols() == 5);
    const auto with = ml::component_features(d, Variant::baseline, 1, true);
    CHECK(with.col(0) == d.d);
    CHECK(with.rightCols(1) == d.z1);
}

TEST_CASE("cross-fitted predictions are deterministic and thread independent") {
    dgp::DgpConfig c;
    c.n = 300;
    c.p = 20;
    c.seed = 21;
    const Dataset d = dgp::simulate(c);
    ml::CrossfitOptions one, three;
    three.threads = 3;
    const auto a = ml::crossfit_means(d, Variant::baseline, 3, 5, one);
    const auto b = ml::crossfit_means(d, Variant::baseline, 3, 5, three);
    CHECK(a.eta1 == b.eta1);
    CHECK(a.eta2 == b.eta2);
    CHECK(a.warnings.empty());
    CHECK(ml::crossfit_means(d, Variant::baseline, 3, 6, one).eta1 != a.eta1);
    const auto small = ml::crossfit_means(d.subset({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19,
                                                    20, 21, 22, 23, 24, 25, 26, 27, 28, 29}),
                                          Variant::baseline, 2, 5, one);
    CHECK(small.warnings.size() == 1);
}

TEST_CASE("stratified fits fall back to pooling for small arms") {
    dgp::DgpConfig c;
    c.n = 300;
    c.p = 10;
    const Dataset d = dgp::simulate(c);
    ml::CrossfitOptions opt;
    opt.stratify_d = true;
    opt.min_arm_size = 50;
    const auto split = ml::crossfit_means(d, Variant::baseline, 2, 3, opt);
    CHECK(split.warnings.empty());
    CHECK(split.eta1.allFinite());
    opt.min_arm_size = 1000;
    const auto pooled = ml::crossfit_means(d, Variant::baseline, 2, 3, opt);
    CHECK_FALSE(pooled.warnings.empty());
    Dataset cont = d;
    cont.d = cont.m;
    CHECK_THROWS_AS(ml::crossfit_means(cont, Variant::baseline, 2, 3, opt), data_error);
}

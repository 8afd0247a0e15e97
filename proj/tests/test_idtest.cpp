#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "medtest/dgp.hpp"
#include "medtest/error.hpp"
#include "medtest/idtest.hpp"
#include "medtest/rng.hpp"
#include "medtest/stats.hpp"

using namespace medtest;

namespace {

Dataset sample(std::uint64_t seed, double delta = 0.0, double gamma = 0.0, Eigen::Index n = 400) {
    dgp::DgpConfig c;
    c.n = n;
    c.p = 20;
    c.delta = delta;
    c.gamma = gamma;
    c.seed = seed;
    return dgp::simulate(c);
}

idtest::TestSetup quick_setup() {
    idtest::TestSetup s;
    s.folds = 2;
    return s;
}

}  // namespace

TEST_CASE("theta from a hand-computed example") {
    Eigen::MatrixXd eta1(2, 3), eta2(2, 3);
    eta1 << 1, 2, 3, 0, 0, 0;
    eta2 << 0, 2, 1, 1, 1, 0;
    const Eigen::Vector2d zeta(0.5, -1.0);
    const auto est = idtest::compute_theta(eta1, eta2, zeta);
    // u = (1 + 0 + 4 + 1.5, 1 + 1 + 0 - 3) = (6.5, -1)
    CHECK(est.contributions(0) == 6.5);
    CHECK(est.contributions(1) == -1.0);
    CHECK(est.theta_hat == doctest::Approx(5.5 / 6.0));
    CHECK(est.component_means[0] == 1.0);
    CHECK(est.component_means[1] == 0.5);
    CHECK(est.component_means[2] == 2.0);
    // sqrt((6.5 - 2.75)^2 + (-1 - 2.75)^2) / 6
    CHECK(idtest::cluster_se(est.contributions, est.theta_hat) == doctest::Approx(std::sqrt(2 * 3.75 * 3.75) / 6.0));
    CHECK_THROWS_AS(idtest::cluster_se(Eigen::VectorXd::Ones(1), 1.0), data_error);
    CHECK_THROWS_AS(idtest::compute_theta(eta1, eta2, Eigen::VectorXd::Zero(3)), data_error);
}

TEST_CASE("clustered standard error is the standard error of the subject means") {
    Rng rng(3);
    Eigen::VectorXd u(500);
    for (auto& v : u) v = rng.normal() + 2.0;
    const double theta = u.mean() / 3.0;
    std::vector<double> means(500);
    for (int i = 0; i < 500; ++i) means[static_cast<std::size_t>(i)] = u(i) / 3.0;
    const double classic = stats::stddev(means) / std::sqrt(500.0);
    CHECK(idtest::cluster_se(u, theta) == doctest::Approx(classic * std::sqrt(499.0 / 500.0)).epsilon(1e-12));
}

TEST_CASE("p-values by sidedness") {
    using idtest::Sidedness;
    CHECK(idtest::p_value(1.959963984540054, Sidedness::two_sided) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(idtest::p_value(1.644853626951472, Sidedness::one_sided_upper) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(idtest::p_value(-1.0, Sidedness::two_sided) == doctest::Approx(idtest::p_value(1.0, Sidedness::two_sided)));
    CHECK(idtest::p_value(-3.0, Sidedness::one_sided_upper) > 0.99);
    CHECK(idtest::p_value(0.0, Sidedness::two_sided) == 1.0);
    CHECK(idtest::parse_sidedness("one-sided") == Sidedness::one_sided_upper);
    CHECK_FALSE(idtest::parse_sidedness("left").has_value());
}

TEST_CASE("degenerate standard error gives p-value one") {
    const Dataset d = sample(1, 0.0, 0.0, 100);
    auto setup = quick_setup();
    setup.sigma_zeta = 0.0;
    // Constant outcome and mediator with no perturbation: every contribution is 0.
    Dataset same = d;
    same.y.setConstant(2.0);
    same.m.setConstant(1.0);
    const auto r = idtest::run_test(same, setup, 3);
    CHECK(r.degenerate);
    CHECK(r.pval == 1.0);
    CHECK(r.tstat == 0.0);
    CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("test result is deterministic in the seed") {
    const Dataset d = sample(2);
    auto setup = quick_setup();
    const auto a = idtest::run_test(d, setup, 17);
    setup.crossfit.threads = 2;
    const auto b = idtest::run_test(d, setup, 17);
    CHECK(a.theta_hat == b.theta_hat);
    CHECK(a.se == b.se);
    CHECK(a.pval == b.pval);
    CHECK(a.zeta_sd == 500.0 / 400.0);
    CHECK(idtest::run_test(d, setup, 18).theta_hat != a.theta_hat);
}

TEST_CASE("strong violations are detected") {
    const Dataset d = sample(4, 0.0, 1.0, 1000);
    auto setup = quick_setup();
    setup.sigma_zeta = 0.01;
    const auto r = idtest::run_test(d, setup, 5);
    CHECK(r.pval < 0.01);
    CHECK(r.component_means[0] > r.component_means[1]);
}

TEST_CASE("median run reports the median order statistic") {
    const Dataset d = sample(6, 0.0, 0.0, 200);
    auto setup = quick_setup();
    const auto med = idtest::median_run(d, setup, 5, 21);
    REQUIRE(med.run_pvals.size() == 5);
    auto sorted = med.run_pvals;
    std::sort(sorted.begin(), sorted.end());
    CHECK(med.pval == sorted[2]);
    CHECK(med.run_pvals[0] == idtest::run_test(d, setup, 21).pval);
    CHECK(med.run_pvals[3] == idtest::run_test(d, setup, derive_seed(21, {3})).pval);
    CHECK_THROWS_AS(idtest::median_run(d, setup, 4, 21), std::invalid_argument);
    setup.crossfit.threads = 3;
    CHECK(idtest::median_run(d, setup, 5, 21).run_pvals == med.run_pvals);
}

TEST_CASE("first-stage checks detect relevant instruments") {
    const Dataset d = sample(7, 0.0, 0.0, 800);
    auto setup = quick_setup();
    const auto r = idtest::first_stage_check(d, setup, 1);
    CHECK(r.pval_treatment < 1e-6);
    CHECK(r.pval_mediator < 1e-6);
    CHECK(r.df_treatment == 1);

    Dataset irrelevant = d;
    Rng rng(8);
    for (Eigen::Index i = 0; i < irrelevant.n(); ++i) irrelevant.z2(i, 0) = rng.normal();
    CHECK(idtest::first_stage_check(irrelevant, setup, 1).pval_mediator > 0.001);

    Dataset flat = d;
    flat.z1.setConstant(2.0);
    CHECK_THROWS_AS(idtest::first_stage_check(flat, setup, 1), data_error);
    setup.variant = Variant::posttreatment;
    CHECK_THROWS_AS(idtest::first_stage_check(d, setup, 1), data_error);
}

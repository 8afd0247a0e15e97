#include "medtest/ml.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "medtest/error.hpp"
#include "medtest/parallel.hpp"
#include "medtest/rng.hpp"

namespace medtest::ml {

namespace {

/// Sums of a_i and a_i a_i' over a set of rows, where a_i = (x_i, y_i) - shift.
struct Moments {
    double n = 0.0;
    Eigen::VectorXd s1;
    Eigen::MatrixXd s2;
};

Moments moments_of(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, const Eigen::VectorXd& shift,
                   const std::vector<Eigen::Index>* rows) {
    const Eigen::Index p = features.cols();
    const Eigen::Index m = rows ? static_cast<Eigen::Index>(rows->size()) : features.rows();
    Eigen::MatrixXd a(m, p + 1);
    if (rows) {
        a.leftCols(p) = features(*rows, Eigen::all);
        a.col(p) = target(*rows);
    } else {
        a.leftCols(p) = features;
        a.col(p) = target;
    }
    a.rowwise() -= shift.transpose();
    Moments out;
    out.n = static_cast<double>(m);
    out.s1 = a.colwise().sum().transpose();
    out.s2 = Eigen::MatrixXd::Zero(p + 1, p + 1);
    out.s2.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
    out.s2.triangularView<Eigen::StrictlyUpper>() = out.s2.transpose();
    return out;
}

Moments minus(const Moments& total, const Moments& part) {
    return Moments{total.n - part.n, total.s1 - part.s1, total.s2 - part.s2};
}

/// Lasso problem in standardized coordinates.
struct Problem {
    Eigen::Index p = 0;
    Eigen::VectorXd means;  // original-scale column means (features then target)
    Eigen::VectorXd scales;
    Eigen::MatrixXd gram;  // correlation-type matrix of standardized columns
    Eigen::VectorXd corr;  // standardized column' centered target / n
    double yy = 0.0;
    std::vector<Eigen::Index> live;
    Eigen::VectorXd centered_means;  // means in shifted coordinates
};

Problem make_problem(const Moments& mom, const Eigen::VectorXd& shift) {
    const Eigen::Index p = mom.s1.size() - 1;
    Problem pr;
    pr.p = p;
    pr.centered_means = mom.s1 / mom.n;
    pr.means = shift + pr.centered_means;
    Eigen::MatrixXd cov = mom.s2 / mom.n - pr.centered_means * pr.centered_means.transpose();
    pr.scales = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double v = cov(j, j);
        const double raw = mom.s2(j, j) / mom.n;
        if (v > 1e-12 * raw && v > 0.0) {
            pr.scales(j) = std::sqrt(v);
            pr.live.push_back(j);
        }
    }
    pr.gram = Eigen::MatrixXd::Zero(p, p);
    pr.corr = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j : pr.live) {
        pr.corr(j) = cov(j, p) / pr.scales(j);
        for (Eigen::Index k : pr.live) pr.gram(j, k) = cov(j, k) / (pr.scales(j) * pr.scales(k));
    }
    pr.yy = std::max(0.0, cov(p, p));
    return pr;
}

double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

double objective(const Problem& pr, const Eigen::VectorXd& beta, const Eigen::VectorXd& resid_corr, double lambda) {
    return 0.5 * (pr.yy - pr.corr.dot(beta) - resid_corr.dot(beta)) + lambda * beta.lpNorm<1>();
}

struct Solution {
    int sweeps = 0;
    bool converged = false;
};

/// Covariance-mode coordinate descent with active-set cycling; `beta` is the
/// warm start on entry and the solution on exit.
Solution coordinate_descent(const Problem& pr, double lambda, Eigen::VectorXd& beta, const LassoOptions& opt,
                            std::vector<double>* trace) {
    Eigen::VectorXd r = pr.corr - pr.gram * beta;
    Solution sol;
    std::vector<Eigen::Index> active;
    auto sweep = [&](const std::vector<Eigen::Index>& coords) {
        double max_change = 0.0;
        for (Eigen::Index j : coords) {
            const double g = pr.gram(j, j);
            const double old = beta(j);
            const double updated = soft_threshold(r(j) + g * old, lambda) / g;
            const double change = updated - old;
            if (change != 0.0) {
                r.noalias() -= pr.gram.col(j) * change;
                beta(j) = updated;
                max_change = std::max(max_change, std::abs(change));
            }
        }
        ++sol.sweeps;
        if (trace) trace->push_back(objective(pr, beta, r, lambda));
        return max_change;
    };
    while (sol.sweeps < opt.max_sweeps) {
        if (sweep(pr.live) < opt.tolerance) {
            sol.converged = true;
            break;
        }
        active.clear();
        for (Eigen::Index j : pr.live) {
            if (beta(j) != 0.0) active.push_back(j);
        }
        while (sol.sweeps < opt.max_sweeps) {
            if (sweep(active) < opt.tolerance) break;
        }
    }
    return sol;
}

LassoFit make_fit(const Problem& pr, const Eigen::VectorXd& beta, double lambda, const Solution& sol) {
    LassoFit fit;
    fit.lambda = lambda;
    fit.standardized = beta;
    fit.means = pr.means.head(pr.p);
    fit.scales = pr.scales;
    fit.coefficients = Eigen::VectorXd::Zero(pr.p);
    for (Eigen::Index j : pr.live) fit.coefficients(j) = beta(j) / pr.scales(j);
    fit.intercept = pr.means(pr.p) - fit.means.dot(fit.coefficients);
    fit.sweeps = sol.sweeps;
    fit.converged = sol.converged;
    return fit;
}

double max_abs_corr(const Problem& pr) { return pr.corr.size() ? pr.corr.cwiseAbs().maxCoeff() : 0.0; }

void check_inputs(const Eigen::MatrixXd& features, const Eigen::VectorXd& target) {
    if (features.rows() != target.size()) throw data_error("feature rows and target length differ");
    if (target.size() < 2) throw data_error("lasso needs at least two observations");
    if (!features.allFinite() || !target.allFinite()) throw data_error("non-finite value in lasso input");
}

Eigen::VectorXd column_shift(const Eigen::MatrixXd& features, const Eigen::VectorXd& target) {
    Eigen::VectorXd shift(features.cols() + 1);
    shift.head(features.cols()) = features.colwise().mean().transpose();
    shift(features.cols()) = target.mean();
    return shift;
}

/// Held-out sum of squared errors of a fit (train mean `mu`, slopes `b` on
/// shifted coordinates) over rows summarized by `fold`.
double held_out_sse(const Moments& fold, const Eigen::VectorXd& mu, const Eigen::VectorXd& b,
                    const std::vector<Eigen::Index>& support) {
    const Eigen::Index p = b.size();
    // Residual of row i: w'(a_i - mu) with w = (-b, 1).
    double quad = fold.s2(p, p);
    double lin = fold.s1(p);
    double shift = mu(p);
    for (Eigen::Index j : support) {
        const double wj = -b(j);
        quad += 2.0 * wj * fold.s2(j, p);
        for (Eigen::Index k : support) quad += wj * -b(k) * fold.s2(j, k);
        lin += wj * fold.s1(j);
        shift += wj * mu(j);
    }
    return quad - 2.0 * lin * shift + fold.n * shift * shift;
}

struct Selected {
    LambdaSelection selection;
    LassoFit fit;
};

Selected select_and_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, int folds,
                        std::uint64_t seed, const LassoOptions& opt, bool refit) {
    check_inputs(features, target);
    const Eigen::Index n = target.size();
    if (folds < 2) throw std::invalid_argument("cross-validation needs at least two folds");
    if (n < folds) throw data_error("insufficient data: " + std::to_string(n) + " observations for " +
                                    std::to_string(folds) + " folds");
    const Eigen::VectorXd shift = column_shift(features, target);
    const FoldAssignment assignment = make_folds(n, folds, seed);
    const auto members = assignment.members();
    std::vector<Moments> parts;
    Moments total{0.0, Eigen::VectorXd::Zero(features.cols() + 1),
                  Eigen::MatrixXd::Zero(features.cols() + 1, features.cols() + 1)};
    for (const auto& rows : members) {
        parts.push_back(moments_of(features, target, shift, &rows));
        total.n += parts.back().n;
        total.s1 += parts.back().s1;
        total.s2 += parts.back().s2;
    }
    const Problem full = make_problem(total, shift);
    Selected out;
    const double top = max_abs_corr(full);
    if (top > 0.0) {
        out.selection.grid = lambda_grid(top);
        out.selection.cv_mse.assign(out.selection.grid.size(), 0.0);
        for (const Moments& part : parts) {
            const Problem train = make_problem(minus(total, part), shift);
            Eigen::VectorXd beta = Eigen::VectorXd::Zero(train.p);
            for (std::size_t g = 0; g < out.selection.grid.size(); ++g) {
                coordinate_descent(train, out.selection.grid[g], beta, opt, nullptr);
                Eigen::VectorXd b = Eigen::VectorXd::Zero(train.p);
                std::vector<Eigen::Index> support;
                for (Eigen::Index j : train.live) {
                    if (beta(j) != 0.0) {
                        b(j) = beta(j) / train.scales(j);
                        support.push_back(j);
                    }
                }
                out.selection.cv_mse[g] += held_out_sse(part, train.centered_means, b, support);
            }
        }
        std::size_t best = 0;
        for (std::size_t g = 0; g < out.selection.grid.size(); ++g) {
            out.selection.cv_mse[g] /= static_cast<double>(n);
            if (out.selection.cv_mse[g] < out.selection.cv_mse[best]) best = g;
        }
        out.selection.lambda = out.selection.grid[best];
    }
    if (refit) {
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(full.p);
        const Solution sol = coordinate_descent(full, out.selection.lambda, beta, opt, nullptr);
        out.fit = make_fit(full, beta, out.selection.lambda, sol);
    }
    return out;
}

}  // namespace

Eigen::VectorXd LassoFit::predict(const Eigen::MatrixXd& features) const {
    if (features.cols() != coefficients.size()) throw data_error("prediction features have the wrong width");
    return (features * coefficients).array() + intercept;
}

double LassoFit::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    return intercept + row.dot(coefficients);
}

LassoFit lasso_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, double lambda,
                   const LassoOptions& options, std::vector<double>* objective_trace) {
    check_inputs(features, target);
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
    const Eigen::VectorXd shift = column_shift(features, target);
    const Problem pr = make_problem(moments_of(features, target, shift, nullptr), shift);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(pr.p);
    if (objective_trace) objective_trace->push_back(objective(pr, beta, pr.corr, lambda));
    const Solution sol = coordinate_descent(pr, lambda, beta, options, objective_trace);
    return make_fit(pr, beta, lambda, sol);
}

double lambda_max(const Eigen::MatrixXd& features, const Eigen::VectorXd& target) {
    check_inputs(features, target);
    const Eigen::VectorXd shift = column_shift(features, target);
    return max_abs_corr(make_problem(moments_of(features, target, shift, nullptr), shift));
}

std::vector<double> lambda_grid(double top, std::size_t count, double ratio) {
    std::vector<double> grid(count);
    for (std::size_t g = 0; g < count; ++g) {
        const double t = count > 1 ? static_cast<double>(g) / static_cast<double>(count - 1) : 0.0;
        grid[g] = top * std::pow(ratio, t);
    }
    return grid;
}

std::vector<std::vector<Eigen::Index>> FoldAssignment::members() const {
    std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < fold_of.size(); ++i) out[static_cast<std::size_t>(fold_of[i])].push_back(static_cast<Eigen::Index>(i));
    return out;
}

FoldAssignment make_folds(Eigen::Index n, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("fold count must be at least 2");
    if (n < k) throw data_error("insufficient data: " + std::to_string(n) + " observations for " + std::to_string(k) +
                                " folds");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(std::span<Eigen::Index>(order));
    FoldAssignment out;
    out.k = k;
    out.seed = seed;
    out.fold_of.assign(static_cast<std::size_t>(n), 0);
    for (std::size_t i = 0; i < order.size(); ++i) out.fold_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(k));
    return out;
}

LambdaSelection select_lambda(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, int folds,
                              std::uint64_t seed, const LassoOptions& options) {
    return select_and_fit(features, target, folds, seed, options, false).selection;
}

LassoFit cv_lasso_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, int folds, std::uint64_t seed,
                      const LassoOptions& options) {
    return select_and_fit(features, target, folds, seed, options, true).fit;
}

bool is_binary(const Eigen::VectorXd& v) {
    return (v.array() == 0.0 || v.array() == 1.0).all();
}

const Eigen::VectorXd& component_target(const Dataset& data, int component) {
    switch (component) {
        case 0: return data.y;
        case 1: return data.m;
        case 2: return data.y;
    }
    throw std::invalid_argument("component must be 0, 1 or 2");
}

Eigen::MatrixXd component_features(const Dataset& data, Variant variant, int component, bool with_instrument) {
    if (component < 0 || component > 2) throw std::invalid_argument("component must be 0, 1 or 2");
    if (variant == Variant::posttreatment && !data.has_w()) {
        throw data_error("variant posttreatment needs post-treatment covariates W");
    }
    std::vector<const Eigen::MatrixXd*> blocks;
    Eigen::MatrixXd d = data.d;
    Eigen::MatrixXd m = data.m;
    blocks.push_back(&d);
    if (component == 2) blocks.push_back(&m);
    blocks.push_back(&data.x);
    if (component < 2 && variant == Variant::z2linked) blocks.push_back(&data.z2);
    if (component == 2 && variant == Variant::posttreatment) blocks.push_back(&data.w);
    if (with_instrument) blocks.push_back(component < 2 ? &data.z1 : &data.z2);
    Eigen::Index cols = 0;
    for (const auto* b : blocks) cols += b->cols();
    Eigen::MatrixXd out(data.n(), cols);
    Eigen::Index at = 0;
    for (const auto* b : blocks) {
        out.middleCols(at, b->cols()) = *b;
        at += b->cols();
    }
    return out;
}

CrossfitPredictions crossfit_means(const Dataset& data, Variant variant, int k, std::uint64_t seed,
                                   const CrossfitOptions& options) {
    data.validate();
    const Eigen::Index n = data.n();
    CrossfitPredictions out;
    out.variant = variant;
    out.folds = make_folds(n, k, derive_seed(seed, {1}));
    if (static_cast<double>(n) / k < 20.0) {
        out.warnings.push_back("fewer than 20 observations per fold (n/k = " +
                               std::to_string(static_cast<double>(n) / k) + ")");
    }
    if (options.stratify_d && !is_binary(data.d)) throw data_error("--stratify-d needs a binary treatment");

    std::array<Eigen::MatrixXd, 6> features;
    for (int j = 0; j < 3; ++j) {
        features[2 * j] = component_features(data, variant, j, false);
        features[2 * j + 1] = component_features(data, variant, j, true);
    }
    const auto members = out.folds.members();
    out.eta1.resize(n, 3);
    out.eta2.resize(n, 3);

    const std::size_t tasks = static_cast<std::size_t>(k) * 6;
    std::vector<std::string> task_warnings(tasks);
    parallel_for(tasks, options.threads, [&](std::size_t task) {
        const int f = static_cast<int>(task / 6);
        const int reg = static_cast<int>(task % 6);
        const int j = reg / 2;
        const bool with = reg % 2 == 1;
        const Eigen::MatrixXd& feat = features[static_cast<std::size_t>(reg)];
        const Eigen::VectorXd& target = component_target(data, j);
        const auto& test = members[static_cast<std::size_t>(f)];
        std::vector<Eigen::Index> train;
        train.reserve(static_cast<std::size_t>(n) - test.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            if (out.folds.fold_of[static_cast<std::size_t>(i)] != f) train.push_back(i);
        }
        Eigen::MatrixXd& eta = with ? out.eta2 : out.eta1;
        const auto stream = [&](std::uint64_t arm) {
            // eta1 and eta2 of a component share inner folds, so their
            // penalty choices differ only through the instrument columns.
            return derive_seed(seed, {2, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(j), arm});
        };

        if (options.stratify_d) {
            std::array<std::vector<Eigen::Index>, 2> arms;
            for (Eigen::Index i : train) arms[data.d(i) == 1.0 ? 1 : 0].push_back(i);
            const auto min_arm = static_cast<std::size_t>(options.min_arm_size);
            if (arms[0].size() >= min_arm && arms[1].size() >= min_arm) {
                const Eigen::MatrixXd rest = feat.rightCols(feat.cols() - 1);
                for (int a = 0; a < 2; ++a) {
                    const auto& rows = arms[static_cast<std::size_t>(a)];
                    const LassoFit fit = cv_lasso_fit(rest(rows, Eigen::all), target(rows), options.inner_folds,
                                                      stream(static_cast<std::uint64_t>(a) + 1), options.lasso);
                    for (Eigen::Index i : test) {
                        if ((data.d(i) == 1.0) == (a == 1)) eta(i, j) = fit.predict_row(rest.row(i));
                    }
                }
                return;
            }
            task_warnings[task] = "fold " + std::to_string(f) + ", component " + std::to_string(j) +
                                  ": a treatment arm has fewer than " + std::to_string(options.min_arm_size) +
                                  " observations, pooled fit used";
        }
        const LassoFit fit =
            cv_lasso_fit(feat(train, Eigen::all), target(train), options.inner_folds, stream(0), options.lasso);
        for (Eigen::Index i : test) eta(i, j) = fit.predict_row(feat.row(i));
    });
    for (auto& w : task_warnings) {
        if (!w.empty()) out.warnings.push_back(std::move(w));
    }
    return out;
}

}  // namespace medtest::ml

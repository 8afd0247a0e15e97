#include "medtest/effects.hpp"

#include <algorithm>
#include <cmath>

#include "medtest/error.hpp"
#include "medtest/parallel.hpp"
#include "medtest/rng.hpp"
#include "medtest/stats.hpp"

namespace medtest::effects {

namespace {

constexpr double kClipLow = 0.001;
constexpr double kClipHigh = 0.999;

double clip(double p) { return std::clamp(p, kClipLow, kClipHigh); }

void check_treatment(const Eigen::VectorXd& d, const char* role) {
    if (!ml::is_binary(d)) throw data_error(std::string(role) + " must be binary (0/1)");
    const double share = d.mean();
    if (share == 0.0 || share == 1.0) throw data_error(std::string("degenerate propensity: ") + role + " is constant");
}

Eigen::MatrixXd hcat(std::initializer_list<const Eigen::MatrixXd*> blocks) {
    Eigen::Index rows = (*blocks.begin())->rows(), cols = 0;
    for (const auto* b : blocks) cols += b->cols();
    Eigen::MatrixXd out(rows, cols);
    Eigen::Index at = 0;
    for (const auto* b : blocks) {
        out.middleCols(at, b->cols()) = *b;
        at += b->cols();
    }
    return out;
}

struct FoldRows {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
};

std::vector<FoldRows> split(Eigen::Index n, int folds, std::uint64_t seed) {
    const ml::FoldAssignment a = ml::make_folds(n, folds, seed);
    std::vector<FoldRows> out(static_cast<std::size_t>(folds));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto f = static_cast<std::size_t>(a.fold_of[static_cast<std::size_t>(i)]);
        for (std::size_t g = 0; g < out.size(); ++g) (g == f ? out[g].test : out[g].train).push_back(i);
    }
    return out;
}

ml::LassoFit fit_rows(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                      const std::vector<Eigen::Index>& rows, const ml::CrossfitOptions& opt, std::uint64_t seed) {
    return ml::cv_lasso_fit(features(rows, Eigen::all), target(rows), opt.inner_folds, seed, opt.lasso);
}

/// Features with column `col` overwritten by `value`.
Eigen::MatrixXd with_column(Eigen::MatrixXd features, Eigen::Index col, double value) {
    features.col(col).setConstant(value);
    return features;
}

double mean_of(const std::vector<double>& v) { return stats::mean(v); }

double se_of(const std::vector<double>& v) {
    return v.size() > 1 ? stats::stddev(v) / std::sqrt(static_cast<double>(v.size())) : 0.0;
}

}  // namespace

EffectEstimates estimate_mediation(const Dataset& data, const TrimPolicy& trim, int folds, std::uint64_t seed,
                                   const ml::CrossfitOptions& options) {
    data.validate();
    check_treatment(data.d, "treatment D");
    if (!(trim.lower >= 0.0 && trim.lower < 0.5)) throw std::invalid_argument("trimming threshold must lie in [0, 0.5)");
    const Eigen::Index n = data.n();
    const Eigen::MatrixXd d = data.d, m = data.m;
    const Eigen::MatrixXd mx = hcat({&m, &data.x});
    const Eigen::MatrixXd dmx = hcat({&d, &m, &data.x});
    const auto parts = split(n, folds, derive_seed(seed, {1}));

    // Scores for (d, d') = (1,1), (1,0), (0,1), (0,0).
    Eigen::MatrixXd psi(n, 4);
    std::vector<char> keep(static_cast<std::size_t>(n), 1);
    parallel_for(parts.size(), options.threads, [&](std::size_t f) {
        const auto& rows = parts[f];
        auto stream = [&](std::uint64_t r) { return derive_seed(seed, {2, f, r}); };
        const ml::LassoFit ps_x = fit_rows(data.x, data.d, rows.train, options, stream(0));
        const ml::LassoFit ps_mx = fit_rows(mx, data.d, rows.train, options, stream(1));
        const ml::LassoFit outcome = fit_rows(dmx, data.y, rows.train, options, stream(2));

        // nested[d] regresses mu(d, M, X) on (D, X); evaluated at D = d' it
        // gives E[mu(d, M, X) | D = d', X].
        const Eigen::MatrixXd dx = hcat({&d, &data.x});
        std::array<ml::LassoFit, 2> nested;
        for (int t = 0; t < 2; ++t) {
            const Eigen::VectorXd mu = outcome.predict(with_column(dmx, 0, t));
            nested[static_cast<std::size_t>(t)] = fit_rows(dx, mu, rows.train, options, stream(3 + static_cast<std::uint64_t>(t)));
        }

        for (Eigen::Index i : rows.test) {
            const double px = clip(ps_x.predict_row(data.x.row(i)));
            const double pmx = clip(ps_mx.predict_row(mx.row(i)));
            if (px < trim.lower || px > trim.upper() || pmx < trim.lower || pmx > trim.upper()) {
                keep[static_cast<std::size_t>(i)] = 0;
            }
            const double di = data.d(i);
            int col = 0;
            for (int t : {1, 0}) {
                for (int s : {1, 0}) {
                    const double p_t_x = t ? px : 1.0 - px;
                    const double p_s_x = s ? px : 1.0 - px;
                    const double p_t_mx = t ? pmx : 1.0 - pmx;
                    const double p_s_mx = s ? pmx : 1.0 - pmx;
                    Eigen::RowVectorXd row = dmx.row(i);
                    row(0) = t;
                    const double mu = outcome.predict_row(row);
                    Eigen::RowVectorXd at = dx.row(i);
                    at(0) = s;
                    const double nu = nested[static_cast<std::size_t>(t)].predict_row(at);
                    const double weight = t == s ? 1.0 / p_t_x : p_s_mx / (p_t_mx * p_s_x);
                    double value = nu;
                    if (di == t) value += weight * (data.y(i) - mu);
                    if (di == s) value += (mu - nu) / p_s_x;
                    psi(i, col++) = value;
                }
            }
        }
    });

    EffectEstimates out;
    std::array<std::vector<double>, 5> diffs;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!keep[static_cast<std::size_t>(i)]) {
            ++out.n_trimmed;
            continue;
        }
        const double t11 = psi(i, 0), t10 = psi(i, 1), t01 = psi(i, 2), t00 = psi(i, 3);
        diffs[0].push_back(t11 - t00);
        diffs[1].push_back(t11 - t01);
        diffs[2].push_back(t10 - t00);
        diffs[3].push_back(t11 - t10);
        diffs[4].push_back(t01 - t00);
    }
    out.n_used = n - out.n_trimmed;
    if (out.n_used == 0) throw data_error("no observations left after propensity trimming");
    out.total = mean_of(diffs[0]);
    out.dir1 = mean_of(diffs[1]);
    out.dir0 = mean_of(diffs[2]);
    out.indir1 = mean_of(diffs[3]);
    out.indir0 = mean_of(diffs[4]);
    for (std::size_t k = 0; k < 5; ++k) out.ses[k] = se_of(diffs[k]);
    return out;
}

DynamicEffect estimate_dynamic_ate(const Dataset& data, const TrimPolicy& trim, int folds, std::uint64_t seed,
                                   const ml::CrossfitOptions& options) {
    data.validate();
    check_treatment(data.d, "treatment D");
    check_treatment(data.m, "second treatment M");
    if (!(trim.lower >= 0.0 && trim.lower < 0.5)) throw std::invalid_argument("trimming threshold must lie in [0, 0.5)");
    const Eigen::Index n = data.n();
    const Eigen::MatrixXd d = data.d, m = data.m;
    const Eigen::MatrixXd dwx = hcat({&d, &data.w, &data.x});
    const Eigen::MatrixXd dmwx = hcat({&d, &m, &data.w, &data.x});
    const auto parts = split(n, folds, derive_seed(seed, {1}));

    Eigen::VectorXd psi(n);
    std::vector<char> keep(static_cast<std::size_t>(n), 1);
    parallel_for(parts.size(), options.threads, [&](std::size_t f) {
        const auto& rows = parts[f];
        auto stream = [&](std::uint64_t r) { return derive_seed(seed, {3, f, r}); };
        const ml::LassoFit ps_d = fit_rows(data.x, data.d, rows.train, options, stream(0));
        const ml::LassoFit ps_m = fit_rows(dwx, data.m, rows.train, options, stream(1));
        const ml::LassoFit outcome = fit_rows(dmwx, data.y, rows.train, options, stream(2));
        const Eigen::MatrixXd dx = hcat({&d, &data.x});
        std::array<ml::LassoFit, 2> nested;
        for (int t = 0; t < 2; ++t) {
            Eigen::MatrixXd at = dmwx;
            at.col(0).setConstant(t);
            at.col(1).setConstant(t);
            const Eigen::VectorXd mu = outcome.predict(at);
            nested[static_cast<std::size_t>(t)] = fit_rows(dx, mu, rows.train, options, stream(3 + static_cast<std::uint64_t>(t)));
        }
        for (Eigen::Index i : rows.test) {
            const double p1 = clip(ps_d.predict_row(data.x.row(i)));
            std::array<double, 2> score{};
            for (int t = 0; t < 2; ++t) {
                Eigen::RowVectorXd r2 = dwx.row(i);
                r2(0) = t;
                const double q1 = clip(ps_m.predict_row(r2));
                const double p = t ? p1 : 1.0 - p1;
                const double q = t ? q1 : 1.0 - q1;
                if (p * q < trim.lower || p * q > trim.upper()) keep[static_cast<std::size_t>(i)] = 0;
                Eigen::RowVectorXd r3 = dmwx.row(i);
                r3(0) = t;
                r3(1) = t;
                const double mu = outcome.predict_row(r3);
                Eigen::RowVectorXd r1 = dx.row(i);
                r1(0) = t;
                const double nu = nested[static_cast<std::size_t>(t)].predict_row(r1);
                double value = nu;
                if (data.d(i) == t) {
                    value += (mu - nu) / p;
                    if (data.m(i) == t) value += (data.y(i) - mu) / (p * q);
                }
                score[static_cast<std::size_t>(t)] = value;
            }
            psi(i) = score[1] - score[0];
        }
    });

    std::vector<double> kept;
    DynamicEffect out;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (keep[static_cast<std::size_t>(i)]) kept.push_back(psi(i));
        else ++out.n_trimmed;
    }
    out.n_used = static_cast<Eigen::Index>(kept.size());
    if (kept.empty()) throw data_error("no observations left after propensity trimming");
    out.ate = mean_of(kept);
    out.se = se_of(kept);
    out.pval = out.se > 0.0 ? std::min(1.0, 2.0 * stats::normal_sf(std::abs(out.ate / out.se))) : 1.0;
    return out;
}

}  // namespace medtest::effects

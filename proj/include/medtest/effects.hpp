#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

#include "medtest/dataset.hpp"
#include "medtest/ml.hpp"

namespace medtest::effects {

/// Observations whose estimated propensities fall outside [lower, 1 - lower]
/// are discarded before averaging.
struct TrimPolicy {
    double lower = 0.01;
    double upper() const { return 1.0 - lower; }
};

inline constexpr std::array<std::string_view, 5> kEffectNames = {"total", "dir1", "dir0", "indir1", "indir0"};

/// Natural effects; dir(d) fixes the mediator distribution at treatment d,
/// indir(d) fixes the treatment at d.
struct EffectEstimates {
    double total = 0.0;
    double dir1 = 0.0;
    double dir0 = 0.0;
    double indir1 = 0.0;
    double indir0 = 0.0;
    std::array<double, 5> ses{};
    Eigen::Index n_trimmed = 0;
    Eigen::Index n_used = 0;

    /// Effects in kEffectNames order.
    std::array<double, 5> values() const { return {total, dir1, dir0, indir1, indir0}; }
};

/// Cross-fitted multiply-robust estimator of E[Y(d, M(d'))] for the four
/// (d, d') combinations, with lasso nuisances: P(D=1|X), P(D=1|M,X),
/// E[Y|D,M,X], and the nested regression of mu(d, M, X) on (D, X), read off
/// at D = d'.
/// Propensities are clipped to [0.001, 0.999]; trimming uses both.
EffectEstimates estimate_mediation(const Dataset& data, const TrimPolicy& trim, int folds, std::uint64_t seed,
                                   const ml::CrossfitOptions& options = {});

struct DynamicEffect {
    double ate = 0.0;
    double se = 0.0;
    double pval = 1.0;
    Eigen::Index n_trimmed = 0;
    Eigen::Index n_used = 0;
};

/// E[Y(1,1) - Y(0,0)] for the treatment sequence (D, M) under sequential
/// ignorability given X (first period) and W, X (second period). Observations
/// where the product P(D=d|X) P(M=d|D=d,W,X) of either sequence leaves
/// [lower, 1 - lower] are discarded.
DynamicEffect estimate_dynamic_ate(const Dataset& data, const TrimPolicy& trim, int folds, std::uint64_t seed,
                                   const ml::CrossfitOptions& options = {});

}  // namespace medtest::effects

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "medtest/idtest.hpp"

namespace medtest::harness {

/// One simulation cell: a design, a sample size and a violation pattern.
struct CellConfig {
    int design = 1;
    Eigen::Index n = 1000;
    Eigen::Index p = 200;
    double delta = 0.0;
    double gamma = 0.0;
    int reps = 100;
    std::uint64_t seed = 1;
    /// Cross-fitting folds of the test and of the effect estimator.
    int folds = 2;
    bool with_effects = true;
    idtest::Sidedness sidedness = idtest::Sidedness::two_sided;
    double alpha = 0.05;
    double trim = 0.01;
    unsigned threads = 0;
    /// Line-delimited record file; existing replications are reused.
    std::optional<std::filesystem::path> checkpoint;
};

/// Outcome of one replication.
struct ReplicationRecord {
    int rep = 0;
    std::uint64_t seed = 0;
    double theta_hat = 0.0;
    double se = 0.0;
    double tstat = 0.0;
    double pval = 1.0;
    bool degenerate = false;
    bool has_effects = false;
    /// Estimates in effects::kEffectNames order.
    std::array<double, 5> effects{};
    Eigen::Index n_trimmed = 0;
};

struct SimulationRow {
    int design = 1;
    Eigen::Index n = 0;
    double delta = 0.0;
    double gamma = 0.0;
    int reps = 0;
    double rej_rate = 0.0;
    double mean_pval = 0.0;
    bool has_effects = false;
    /// Absolute mean error and root mean squared error per effect.
    std::array<double, 5> bias{};
    std::array<double, 5> rmse{};
};

/// True total, dir(1), dir(0), indir(1), indir(0).
std::array<double, 5> effect_truths();

/// Seed of replication `rep`, a function of the cell coordinates only.
std::uint64_t replication_seed(const CellConfig& cell, int rep);

/// Variant tested in `design`: baseline for 1, z2linked for 2.
Variant design_variant(int design);

ReplicationRecord run_replication(const CellConfig& cell, int rep);

/// Fold over records (any order; sorted by rep before summing).
SimulationRow aggregate(const CellConfig& cell, std::vector<ReplicationRecord> records);

/// Runs replications 0..reps-1 in parallel, reusing and extending the
/// checkpoint file when configured. `records`, if given, receives the
/// replications sorted by index.
SimulationRow run_cell(const CellConfig& cell, std::vector<ReplicationRecord>* records = nullptr);

/// Replications already stored in a checkpoint; throws data_error if the
/// file belongs to a different cell. A truncated final line is ignored.
std::vector<ReplicationRecord> load_checkpoint(const std::filesystem::path& path, const CellConfig& cell);

struct PanelSpec {
    double delta;
    double gamma;
};

/// The three violation patterns of the simulation tables, in display order.
const std::vector<PanelSpec>& table_panels();

}  // namespace medtest::harness

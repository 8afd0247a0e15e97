#include "medtest/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "medtest/dgp.hpp"
#include "medtest/effects.hpp"
#include "medtest/error.hpp"
#include "medtest/parallel.hpp"
#include "medtest/records.hpp"
#include "medtest/rng.hpp"

namespace medtest::harness {

namespace {

void check_cell(const CellConfig& cell) {
    if (cell.reps < 1) throw std::invalid_argument("reps must be at least 1");
    if (cell.design != 1 && cell.design != 2) throw std::invalid_argument("design must be 1 or 2");
    if (cell.folds < 2) throw std::invalid_argument("folds must be at least 2");
}

}  // namespace

std::array<double, 5> effect_truths() {
    return {dgp::kTrueTotal, dgp::kTrueDirect, dgp::kTrueDirect, dgp::kTrueIndirect, dgp::kTrueIndirect};
}

std::uint64_t replication_seed(const CellConfig& cell, int rep) {
    return derive_seed(cell.seed, {static_cast<std::uint64_t>(cell.design), static_cast<std::uint64_t>(cell.n),
                                   seed_tag(cell.delta), seed_tag(cell.gamma), static_cast<std::uint64_t>(rep)});
}

Variant design_variant(int design) { return design == 2 ? Variant::z2linked : Variant::baseline; }

ReplicationRecord run_replication(const CellConfig& cell, int rep) {
    ReplicationRecord out;
    out.rep = rep;
    out.seed = replication_seed(cell, rep);

    dgp::DgpConfig config;
    config.n = cell.n;
    config.p = cell.p;
    config.delta = cell.delta;
    config.gamma = cell.gamma;
    config.design = cell.design;
    config.seed = derive_seed(out.seed, {0});
    const Dataset data = dgp::simulate(config);

    idtest::TestSetup setup;
    setup.variant = design_variant(cell.design);
    setup.folds = cell.folds;
    setup.sidedness = cell.sidedness;
    setup.crossfit.threads = 1;
    const idtest::TestResult test = idtest::run_test(data, setup, derive_seed(out.seed, {1}));
    out.theta_hat = test.theta_hat;
    out.se = test.se;
    out.tstat = test.tstat;
    out.pval = test.pval;
    out.degenerate = test.degenerate;

    if (cell.with_effects) {
        const auto est = effects::estimate_mediation(data, effects::TrimPolicy{cell.trim}, cell.folds,
                                                     derive_seed(out.seed, {2}), setup.crossfit);
        out.has_effects = true;
        out.effects = est.values();
        out.n_trimmed = est.n_trimmed;
    }
    return out;
}

SimulationRow aggregate(const CellConfig& cell, std::vector<ReplicationRecord> records) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.rep < b.rep; });
    SimulationRow row;
    row.design = cell.design;
    row.n = cell.n;
    row.delta = cell.delta;
    row.gamma = cell.gamma;
    row.reps = static_cast<int>(records.size());
    if (records.empty()) return row;
    row.has_effects = std::all_of(records.begin(), records.end(), [](const auto& r) { return r.has_effects; });
    const auto truths = effect_truths();
    std::array<double, 5> err{}, sq{};
    double rejections = 0.0, pvals = 0.0;
    for (const auto& r : records) {
        if (r.pval < cell.alpha) rejections += 1.0;
        pvals += r.pval;
        if (!row.has_effects) continue;
        for (std::size_t k = 0; k < 5; ++k) {
            const double e = r.effects[k] - truths[k];
            err[k] += e;
            sq[k] += e * e;
        }
    }
    const double reps = static_cast<double>(records.size());
    row.rej_rate = rejections / reps;
    row.mean_pval = pvals / reps;
    if (row.has_effects) {
        for (std::size_t k = 0; k < 5; ++k) {
            row.bias[k] = std::abs(err[k] / reps);
            row.rmse[k] = std::sqrt(sq[k] / reps);
        }
    }
    return row;
}

std::vector<ReplicationRecord> load_checkpoint(const std::filesystem::path& path, const CellConfig& cell) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open checkpoint " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();
    // An interrupted writer can leave a partial last line.
    if (!text.empty() && text.back() != '\n') text.erase(text.find_last_of('\n') + 1);

    const auto lines = records::parse_lines(text, path.string());
    if (lines.empty()) return {};
    const CellConfig stored = records::parse_cell(lines.front());
    if (records::dump(records::to_record(stored)) != records::dump(records::to_record(cell))) {
        throw data_error("checkpoint " + path.string() + " was written for a different simulation cell");
    }
    std::vector<ReplicationRecord> out;
    std::set<int> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        ReplicationRecord r = records::parse_replication(lines[i]);
        if (r.rep < 0 || r.rep >= cell.reps || !seen.insert(r.rep).second) continue;
        out.push_back(r);
    }
    return out;
}

SimulationRow run_cell(const CellConfig& cell, std::vector<ReplicationRecord>* records_out) {
    check_cell(cell);
    std::vector<ReplicationRecord> done;
    std::ofstream sink;
    if (cell.checkpoint) {
        const auto& path = *cell.checkpoint;
        const bool resume = std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
        if (resume) {
            done = load_checkpoint(path, cell);
            // Rewrite so a truncated tail from an interrupted run does not linger.
            std::ofstream rewrite(path, std::ios::binary | std::ios::trunc);
            records::write_line(rewrite, records::to_record(cell));
            for (const auto& r : done) records::write_line(rewrite, records::to_record(r));
        } else {
            if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
            std::ofstream header(path, std::ios::binary | std::ios::trunc);
            records::write_line(header, records::to_record(cell));
        }
        sink.open(path, std::ios::binary | std::ios::app);
        if (!sink) throw data_error("cannot write checkpoint " + path.string());
    }

    std::vector<char> have(static_cast<std::size_t>(cell.reps), 0);
    for (const auto& r : done) have[static_cast<std::size_t>(r.rep)] = 1;
    std::vector<int> todo;
    for (int r = 0; r < cell.reps; ++r) {
        if (!have[static_cast<std::size_t>(r)]) todo.push_back(r);
    }

    std::vector<ReplicationRecord> fresh(todo.size());
    std::mutex sink_mutex;
    parallel_for(todo.size(), cell.threads, [&](std::size_t i) {
        fresh[i] = run_replication(cell, todo[i]);
        if (sink.is_open()) {
            const std::string line = records::dump(records::to_record(fresh[i]));
            std::lock_guard lock(sink_mutex);
            sink << line << '\n';
            sink.flush();
        }
    });

    done.insert(done.end(), fresh.begin(), fresh.end());
    std::sort(done.begin(), done.end(), [](const auto& a, const auto& b) { return a.rep < b.rep; });
    if (sink.is_open()) {
        // Completed cells are stored in replication order, independent of scheduling.
        sink.close();
        std::ofstream sorted(*cell.checkpoint, std::ios::binary | std::ios::trunc);
        records::write_line(sorted, records::to_record(cell));
        for (const auto& r : done) records::write_line(sorted, records::to_record(r));
    }
    const SimulationRow row = aggregate(cell, done);
    if (records_out) *records_out = std::move(done);
    return row;
}

const std::vector<PanelSpec>& table_panels() {
    static const std::vector<PanelSpec> panels = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 0.2}};
    return panels;
}

}  // namespace medtest::harness

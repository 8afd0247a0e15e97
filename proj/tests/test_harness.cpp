#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "medtest/error.hpp"
#include "medtest/harness.hpp"
#include "medtest/records.hpp"

using namespace medtest;

namespace {

harness::CellConfig small_cell() {
    harness::CellConfig c;
    c.n = 300;
    c.p = 10;
    c.reps = 6;
    c.seed = 7;
    c.threads = 2;
    return c;
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "medtest_harness_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::filesystem::remove(path);
    return path;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("a single replication") {
    auto cell = small_cell();
    cell.reps = 1;
    std::vector<harness::ReplicationRecord> recs;
    const auto row = harness::run_cell(cell, &recs);
    REQUIRE(recs.size() == 1);
    CHECK((row.rej_rate == 0.0 || row.rej_rate == 1.0));
    CHECK(row.mean_pval == recs[0].pval);
    const auto truth = harness::effect_truths();
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(row.bias[k] == doctest::Approx(std::abs(recs[0].effects[k] - truth[k])));
        CHECK(row.rmse[k] == doctest::Approx(row.bias[k]));
    }
}

TEST_CASE("aggregates are consistent with the stored replications") {
    const auto cell = small_cell();
    std::vector<harness::ReplicationRecord> recs;
    const auto row = harness::run_cell(cell, &recs);
    REQUIRE(recs.size() == 6);
    double rejected = 0.0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(recs[i].rep == static_cast<int>(i));
        CHECK(recs[i].seed == harness::replication_seed(cell, static_cast<int>(i)));
        if (recs[i].pval < 0.05) rejected += 1.0;
    }
    CHECK(row.rej_rate == rejected / 6.0);
    CHECK(row.rej_rate >= 0.0);
    CHECK(row.mean_pval <= 1.0);
    for (std::size_t k = 0; k < 5; ++k) CHECK(row.rmse[k] >= row.bias[k]);
    // Replications depend only on their index.
    CHECK(harness::run_replication(cell, 4).pval == recs[4].pval);
    auto more = cell;
    more.threads = 1;
    CHECK(harness::run_cell(more).mean_pval == row.mean_pval);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
    auto cell = small_cell();
    cell.with_effects = false;
    const auto full = harness::run_cell(cell);

    const auto path = scratch("resume.jsonl");
    auto partial = cell;
    partial.reps = 3;
    partial.checkpoint = path;
    harness::run_cell(partial);
    // Simulate an interruption in the middle of writing a record.
    {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out << "{\"record\":\"replication\",\"rep\":5,\"se";
    }
    auto resumed = cell;
    resumed.checkpoint = path;
    const auto row = harness::run_cell(resumed);
    CHECK(records::dump(records::to_record(row)) == records::dump(records::to_record(full)));

    const auto lines = records::parse_lines(slurp(path));
    CHECK(lines.size() == 7);
    CHECK(records::kind(lines.front()) == "cell");
    CHECK(harness::load_checkpoint(path, cell).size() == 6);

    auto other = cell;
    other.delta = 1.0;
    CHECK_THROWS_AS(harness::load_checkpoint(path, other), data_error);
}

TEST_CASE("cell validation and table panels") {
    auto cell = small_cell();
    cell.reps = 0;
    CHECK_THROWS_AS(harness::run_cell(cell), std::invalid_argument);
    CHECK(harness::table_panels().size() == 3);
    CHECK(harness::design_variant(2) == Variant::z2linked);
    CHECK(harness::replication_seed(small_cell(), 0) != harness::replication_seed(small_cell(), 1));
}

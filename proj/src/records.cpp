#include "medtest/records.hpp"

#include <ostream>

#include "medtest/error.hpp"
#include "medtest/graph.hpp"

namespace medtest::records {

namespace {

template <typename T>
T field(const Json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw data_error(std::string("record lacks field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw data_error(std::string("record field '") + key + "' has the wrong type");
    }
}

void expect_kind(const Json& j, std::string_view expected) {
    if (kind(j) != expected) {
        throw data_error("expected a '" + std::string(expected) + "' record, found '" + kind(j) + "'");
    }
}

Json tagged(std::string_view name) {
    Json j = Json::object();
    j["record"] = name;
    return j;
}

Json effect_object(const std::array<double, 5>& values) {
    Json j = Json::object();
    for (std::size_t k = 0; k < 5; ++k) j[std::string(effects::kEffectNames[k])] = values[k];
    return j;
}

std::array<double, 5> effect_values(const Json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_object()) throw data_error(std::string("record lacks object '") + key + "'");
    std::array<double, 5> out{};
    for (std::size_t k = 0; k < 5; ++k) out[k] = field<double>(*it, std::string(effects::kEffectNames[k]).c_str());
    return out;
}

}  // namespace

std::string kind(const Json& j) {
    if (!j.is_object() || !j.contains("record") || !j["record"].is_string()) {
        throw data_error("not a tagged record");
    }
    return j["record"].get<std::string>();
}

std::string dump(const Json& j) { return j.dump(); }

void write_line(std::ostream& out, const Json& j) { out << j.dump() << '\n'; }

std::vector<Json> parse_lines(std::string_view text, std::string_view source) {
    std::vector<Json> out;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            out.push_back(Json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw data_error(std::string(source) + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
        }
    }
    return out;
}

Json to_record(const theorems::VerificationReport& report) {
    Json j = tagged("verification_report");
    j["theorem"] = report.theorem;
    j["family_size"] = report.family_size;
    j["satisfying_preconditions"] = report.satisfying_preconditions;
    j["both_sides_hold"] = report.both_sides_hold;
    j["neither_side_holds"] = report.neither_side_holds;
    j["vacuous"] = report.vacuous;
    j["counterexample_count"] = report.counterexample_count;
    Json cex = Json::array();
    for (const auto& c : report.counterexamples) {
        cex.push_back(Json{{"mask", c.mask}, {"graph", graph::to_edge_list(c.graph)}});
    }
    j["counterexamples"] = cex;
    return j;
}

theorems::VerificationReport parse_verification_report(const Json& j) {
    expect_kind(j, "verification_report");
    theorems::VerificationReport r;
    r.theorem = field<std::string>(j, "theorem");
    r.family_size = field<std::uint64_t>(j, "family_size");
    r.satisfying_preconditions = field<std::uint64_t>(j, "satisfying_preconditions");
    r.both_sides_hold = field<std::uint64_t>(j, "both_sides_hold");
    r.neither_side_holds = field<std::uint64_t>(j, "neither_side_holds");
    r.vacuous = field<std::uint64_t>(j, "vacuous");
    r.counterexample_count = field<std::uint64_t>(j, "counterexample_count");
    for (const auto& c : field<Json>(j, "counterexamples")) {
        r.counterexamples.push_back(
            {field<std::uint64_t>(c, "mask"), graph::parse_edge_list(field<std::string>(c, "graph"))});
    }
    return r;
}

Json to_record(const idtest::TestResult& result) {
    Json j = tagged("test_result");
    j["teststat"] = result.theta_hat;
    j["se"] = result.se;
    j["tstat"] = result.tstat;
    j["pval"] = result.pval;
    j["n"] = result.n;
    j["component_means"] = result.component_means;
    j["zeta_sd"] = result.zeta_sd;
    j["degenerate"] = result.degenerate;
    j["seed"] = result.seed;
    j["run_pvals"] = result.run_pvals;
    j["warnings"] = result.warnings;
    return j;
}

idtest::TestResult parse_test_result(const Json& j) {
    expect_kind(j, "test_result");
    idtest::TestResult r;
    r.theta_hat = field<double>(j, "teststat");
    r.se = field<double>(j, "se");
    r.tstat = field<double>(j, "tstat");
    r.pval = field<double>(j, "pval");
    r.n = field<Eigen::Index>(j, "n");
    r.component_means = field<std::array<double, 3>>(j, "component_means");
    r.zeta_sd = field<double>(j, "zeta_sd");
    r.degenerate = field<bool>(j, "degenerate");
    r.seed = field<std::uint64_t>(j, "seed");
    r.run_pvals = field<std::vector<double>>(j, "run_pvals");
    r.warnings = field<std::vector<std::string>>(j, "warnings");
    return r;
}

Json to_record(const idtest::FirstStageResult& result) {
    Json j = tagged("first_stage");
    j["stat_treatment"] = result.stat_treatment;
    j["df_treatment"] = result.df_treatment;
    j["pval_treatment"] = result.pval_treatment;
    j["stat_mediator"] = result.stat_mediator;
    j["df_mediator"] = result.df_mediator;
    j["pval_mediator"] = result.pval_mediator;
    return j;
}

idtest::FirstStageResult parse_first_stage(const Json& j) {
    expect_kind(j, "first_stage");
    idtest::FirstStageResult r;
    r.stat_treatment = field<double>(j, "stat_treatment");
    r.df_treatment = field<Eigen::Index>(j, "df_treatment");
    r.pval_treatment = field<double>(j, "pval_treatment");
    r.stat_mediator = field<double>(j, "stat_mediator");
    r.df_mediator = field<Eigen::Index>(j, "df_mediator");
    r.pval_mediator = field<double>(j, "pval_mediator");
    return r;
}

Json to_record(const effects::EffectEstimates& estimates) {
    Json j = tagged("mediation_effects");
    j["estimates"] = effect_object(estimates.values());
    j["se"] = effect_object(estimates.ses);
    j["n_trimmed"] = estimates.n_trimmed;
    j["n_used"] = estimates.n_used;
    return j;
}

effects::EffectEstimates parse_effects(const Json& j) {
    expect_kind(j, "mediation_effects");
    effects::EffectEstimates e;
    const auto v = effect_values(j, "estimates");
    e.total = v[0];
    e.dir1 = v[1];
    e.dir0 = v[2];
    e.indir1 = v[3];
    e.indir0 = v[4];
    e.ses = effect_values(j, "se");
    e.n_trimmed = field<Eigen::Index>(j, "n_trimmed");
    e.n_used = field<Eigen::Index>(j, "n_used");
    return e;
}

Json to_record(const effects::DynamicEffect& effect) {
    Json j = tagged("dynamic_effect");
    j["effect"] = effect.ate;
    j["effect_se"] = effect.se;
    j["effect_pval"] = effect.pval;
    j["effect_ntrimmed"] = effect.n_trimmed;
    j["n_used"] = effect.n_used;
    return j;
}

effects::DynamicEffect parse_dynamic_effect(const Json& j) {
    expect_kind(j, "dynamic_effect");
    effects::DynamicEffect e;
    e.ate = field<double>(j, "effect");
    e.se = field<double>(j, "effect_se");
    e.pval = field<double>(j, "effect_pval");
    e.n_trimmed = field<Eigen::Index>(j, "effect_ntrimmed");
    e.n_used = field<Eigen::Index>(j, "n_used");
    return e;
}

Json to_record(const harness::ReplicationRecord& rec) {
    Json j = tagged("replication");
    j["rep"] = rec.rep;
    j["seed"] = rec.seed;
    j["teststat"] = rec.theta_hat;
    j["se"] = rec.se;
    j["tstat"] = rec.tstat;
    j["pval"] = rec.pval;
    j["degenerate"] = rec.degenerate;
    if (rec.has_effects) {
        j["effects"] = effect_object(rec.effects);
        j["n_trimmed"] = rec.n_trimmed;
    }
    return j;
}

harness::ReplicationRecord parse_replication(const Json& j) {
    expect_kind(j, "replication");
    harness::ReplicationRecord r;
    r.rep = field<int>(j, "rep");
    r.seed = field<std::uint64_t>(j, "seed");
    r.theta_hat = field<double>(j, "teststat");
    r.se = field<double>(j, "se");
    r.tstat = field<double>(j, "tstat");
    r.pval = field<double>(j, "pval");
    r.degenerate = field<bool>(j, "degenerate");
    r.has_effects = j.contains("effects");
    if (r.has_effects) {
        r.effects = effect_values(j, "effects");
        r.n_trimmed = field<Eigen::Index>(j, "n_trimmed");
    }
    return r;
}

Json to_record(const harness::SimulationRow& row) {
    Json j = tagged("simulation_row");
    j["design"] = row.design;
    j["n"] = row.n;
    j["delta"] = row.delta;
    j["gamma"] = row.gamma;
    j["reps"] = row.reps;
    j["rej_rate"] = row.rej_rate;
    j["mean_pval"] = row.mean_pval;
    if (row.has_effects) {
        j["bias"] = effect_object(row.bias);
        j["rmse"] = effect_object(row.rmse);
    }
    return j;
}

harness::SimulationRow parse_simulation_row(const Json& j) {
    expect_kind(j, "simulation_row");
    harness::SimulationRow row;
    row.design = field<int>(j, "design");
    row.n = field<Eigen::Index>(j, "n");
    row.delta = field<double>(j, "delta");
    row.gamma = field<double>(j, "gamma");
    row.reps = field<int>(j, "reps");
    row.rej_rate = field<double>(j, "rej_rate");
    row.mean_pval = field<double>(j, "mean_pval");
    row.has_effects = j.contains("bias");
    if (row.has_effects) {
        row.bias = effect_values(j, "bias");
        row.rmse = effect_values(j, "rmse");
    }
    return row;
}

Json to_record(const harness::CellConfig& cell) {
    Json j = tagged("cell");
    j["design"] = cell.design;
    j["n"] = cell.n;
    j["p"] = cell.p;
    j["delta"] = cell.delta;
    j["gamma"] = cell.gamma;
    j["seed"] = cell.seed;
    j["folds"] = cell.folds;
    j["with_effects"] = cell.with_effects;
    j["sidedness"] = idtest::sidedness_name(cell.sidedness);
    j["trim"] = cell.trim;
    return j;
}

harness::CellConfig parse_cell(const Json& j) {
    expect_kind(j, "cell");
    harness::CellConfig c;
    c.design = field<int>(j, "design");
    c.n = field<Eigen::Index>(j, "n");
    c.p = field<Eigen::Index>(j, "p");
    c.delta = field<double>(j, "delta");
    c.gamma = field<double>(j, "gamma");
    c.seed = field<std::uint64_t>(j, "seed");
    c.folds = field<int>(j, "folds");
    c.with_effects = field<bool>(j, "with_effects");
    const auto side = idtest::parse_sidedness(field<std::string>(j, "sidedness"));
    if (!side) throw data_error("unknown sidedness in cell record");
    c.sidedness = *side;
    c.trim = field<double>(j, "trim");
    return c;
}

}  // namespace medtest::records

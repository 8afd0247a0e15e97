#include "medtest/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "medtest/dataset.hpp"
#include "medtest/dgp.hpp"
#include "medtest/effects.hpp"
#include "medtest/error.hpp"
#include "medtest/graph.hpp"
#include "medtest/harness.hpp"
#include "medtest/idtest.hpp"
#include "medtest/records.hpp"
#include "medtest/rng.hpp"
#include "medtest/theorems.hpp"

namespace medtest::cli {

namespace {

/// Semantically invalid arguments that the parser cannot catch.
class usage_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Format { text, records };

std::string num(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string fixed(double v, int decimals = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

/// Left-aligned columns separated by two spaces; the first row is the header.
std::vector<std::string> aligned(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& row : rows) {
        if (width.size() < row.size()) width.resize(row.size(), 0);
        for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
    }
    std::vector<std::string> out;
    for (const auto& row : rows) {
        std::string line;
        for (std::size_t j = 0; j < row.size(); ++j) {
            line += row[j];
            if (j + 1 < row.size()) line += std::string(width[j] - row[j].size() + 2, ' ');
        }
        out.push_back(line);
    }
    return out;
}

void print_lines(std::ostream& out, const std::vector<std::string>& lines) {
    for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto a = item.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        out.push_back(item.substr(a, item.find_last_not_of(" \t") - a + 1));
    }
    return out;
}

const std::map<std::string, Format> kFormats = {{"text", Format::text}, {"records", Format::records}};

void add_format(CLI::App* sub, Format& format) {
    sub->add_option("--format", format, "Output format: text or records")
        ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case))
        ->option_text("text|records");
}

// verify-theorems

struct VerifyArgs {
    std::string theorem = "t1";
    std::string fixture;
    unsigned threads = 0;
    std::size_t max_confounders = 1;
    std::size_t max_counterexamples = 100;
    std::string emit;
    std::uint64_t seed = 1;
    Format format = Format::text;
};

std::vector<theorems::Theorem> selected_theorems(const std::string& name) {
    using theorems::Theorem;
    if (name == "l1") return {Theorem::l1a, Theorem::l1b};
    if (name == "all") return {Theorem::t1, Theorem::t2, Theorem::l1a, Theorem::l1b};
    const auto t = theorems::parse_theorem(name);
    if (!t) throw usage_error("unknown theorem '" + name + "'");
    return {*t};
}

int run_fixture_check(const VerifyArgs& a, std::ostream& out) {
    const auto results = theorems::check_fixture(a.fixture);
    if (a.format == Format::records) {
        records::Json j = records::Json::object();
        j["record"] = "fixture_check";
        j["fixture"] = a.fixture;
        records::Json q = records::Json::object();
        for (const auto& [id, holds] : results) q[id] = holds;
        j["queries"] = q;
        records::write_line(out, j);
        return kExitOk;
    }
    std::vector<std::vector<std::string>> rows = {{"query", "holds"}};
    for (const auto& [id, holds] : results) rows.push_back({id, holds ? "true" : "false"});
    out << "fixture " << a.fixture << '\n';
    print_lines(out, aligned(rows));
    return kExitOk;
}

int run_verify(const VerifyArgs& a, std::ostream& out) {
    if (!a.fixture.empty()) return run_fixture_check(a, out);
    theorems::VerifyOptions opt;
    opt.threads = a.threads;
    opt.max_confounders = a.max_confounders;
    opt.max_counterexamples = a.max_counterexamples;

    std::vector<theorems::VerificationReport> reports;
    for (auto t : selected_theorems(a.theorem)) reports.push_back(theorems::verify_theorem(t, opt));

    if (!a.emit.empty()) {
        std::ofstream cex(a.emit, std::ios::binary | std::ios::trunc);
        if (!cex) throw data_error("cannot write counterexamples to " + a.emit);
        for (const auto& r : reports) {
            for (const auto& c : r.counterexamples) {
                records::Json j = records::Json::object();
                j["record"] = "counterexample";
                j["theorem"] = r.theorem;
                j["mask"] = c.mask;
                j["graph"] = graph::to_edge_list(c.graph);
                records::write_line(cex, j);
            }
        }
    }

    bool any = false;
    for (const auto& r : reports) any = any || r.counterexample_count > 0;
    if (a.format == Format::records) {
        for (const auto& r : reports) records::write_line(out, records::to_record(r));
        return any ? kExitFailure : kExitOk;
    }

    std::vector<std::vector<std::string>> rows = {
        {"theorem", "family", "preconditions", "both_sides", "neither_side", "vacuous", "counterexamples", "seconds"}};
    for (const auto& r : reports) {
        rows.push_back({r.theorem, std::to_string(r.family_size), std::to_string(r.satisfying_preconditions),
                        std::to_string(r.both_sides_hold), std::to_string(r.neither_side_holds),
                        std::to_string(r.vacuous), std::to_string(r.counterexample_count),
                        fixed(r.elapsed_seconds, 2)});
    }
    print_lines(out, aligned(rows));
    for (const auto& r : reports) {
        if (r.theorem != "t1" && r.theorem != "t2") continue;
        out << "note " << r.theorem << ": reference figures are 480 graphs with both sides holding and 735232 graphs"
            << " meeting the assumptions, the latter also quoted as 73523 (73043 + 480), which cannot both be right;"
            << " recounted here: " << r.both_sides_hold << " and " << r.satisfying_preconditions << '\n';
    }
    for (const auto& r : reports) {
        for (const auto& c : r.counterexamples) {
            out << "counterexample " << r.theorem << " mask " << c.mask << ":\n" << graph::to_edge_list(c.graph);
        }
    }
    return any ? kExitFailure : kExitOk;
}

// dsep

struct DsepArgs {
    std::string graph_path;
    std::string fixture;
    std::string a, b, given, intervene;
    std::uint64_t seed = 1;
    Format format = Format::text;
};

int run_dsep(const DsepArgs& a, std::ostream& out) {
    if (a.graph_path.empty() == a.fixture.empty()) throw usage_error("give exactly one of --graph and --fixture");
    graph::Dag g = a.fixture.empty() ? graph::load_edge_list(a.graph_path) : theorems::load_fixture(a.fixture);
    const auto cut = split_list(a.intervene);
    if (!cut.empty()) g = graph::mutilate(g, cut);
    const auto lhs = split_list(a.a), rhs = split_list(a.b), given = split_list(a.given);
    if (lhs.empty() || rhs.empty()) throw usage_error("--a and --b need at least one node");
    const bool separated = graph::is_dseparated(g, lhs, rhs, given);
    if (a.format == Format::records) {
        records::Json j = records::Json::object();
        j["record"] = "dsep";
        j["a"] = lhs;
        j["b"] = rhs;
        j["given"] = given;
        j["intervene"] = cut;
        j["separated"] = separated;
        records::write_line(out, j);
    } else {
        out << (separated ? "d-separated" : "d-connected") << '\n';
    }
    return kExitOk;
}

// simulate

struct SimulateArgs {
    dgp::DgpConfig config;
    std::string out_path;
    Format format = Format::text;
};

int run_simulate(const SimulateArgs& a, std::ostream& out) {
    if (a.config.design != 1 && a.config.design != 2) throw usage_error("--design must be 1 or 2");
    if (a.config.n < 1 || a.config.p < 0) throw usage_error("--n must be positive and --p non-negative");
    const Dataset data = dgp::simulate(a.config);
    if (a.out_path.empty()) {
        write_csv(out, data);
        return kExitOk;
    }
    std::ofstream file(a.out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw data_error("cannot write " + a.out_path);
    write_csv(file, data);
    if (a.format == Format::records) {
        records::Json j = records::Json::object();
        j["record"] = "dataset";
        j["path"] = a.out_path;
        j["n"] = data.n();
        j["p"] = data.x.cols();
        j["design"] = a.config.design;
        j["seed"] = a.config.seed;
        records::write_line(out, j);
    } else {
        out << "wrote " << data.n() << " rows with " << data.x.cols() << " covariates to " << a.out_path << '\n';
    }
    return kExitOk;
}

// test / first-stage

struct DataArgs {
    std::string path;
    std::string y, d, m, z1, z2, x, w;
    std::string variant = "baseline";
    int folds = 10;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    Format format = Format::text;
};

void add_data_options(CLI::App* sub, DataArgs& a) {
    sub->add_option("--data", a.path, "CSV file with a header line")->required();
    sub->add_option("--y", a.y, "Outcome column (default y)");
    sub->add_option("--d", a.d, "Treatment column (default d)");
    sub->add_option("--m", a.m, "Mediator or selection column (default m)");
    sub->add_option("--z1", a.z1, "Treatment instrument column(s) (default z1 or z1_*)");
    sub->add_option("--z2", a.z2, "Mediator instrument column(s) (default z2 or z2_*)");
    sub->add_option("--x", a.x, "Covariate columns, ranges like x1..x200 allowed (default x<k>)");
    sub->add_option("--w", a.w, "Post-treatment covariate columns (default w<k>)");
    sub->add_option("--variant", a.variant, "Conditioning sets: baseline, z2linked or posttreatment")
        ->check(CLI::IsMember({"baseline", "z2linked", "posttreatment"}));
    sub->add_option("--folds", a.folds, "Cross-fitting folds")->check(CLI::Range(2, 1000));
    sub->add_option("--seed", a.seed, "Random seed");
    sub->add_option("--threads", a.threads, "Worker threads (0 = all cores)");
    add_format(sub, a.format);
}

Dataset load_data(const DataArgs& a, Variant variant) {
    const CsvTable table = read_csv(a.path);
    ColumnMap map = default_columns(table);
    if (!a.y.empty()) map.y = a.y;
    if (!a.d.empty()) map.d = a.d;
    if (!a.m.empty()) map.m = a.m;
    if (!a.z1.empty()) map.z1 = expand_columns(a.z1);
    if (!a.z2.empty()) map.z2 = expand_columns(a.z2);
    if (!a.x.empty()) map.x = expand_columns(a.x);
    if (!a.w.empty()) map.w = expand_columns(a.w);
    if (map.z1.empty()) throw data_error(a.path + ": no column for role z1; pass --z1");
    if (map.z2.empty()) throw data_error(a.path + ": no column for role z2; pass --z2");
    if (variant == Variant::posttreatment && map.w.empty()) {
        throw data_error(a.path + ": variant posttreatment needs post-treatment covariates; pass --w");
    }
    if (variant != Variant::posttreatment) map.w.clear();
    return dataset_from_table(table, map);
}

struct TestArgs {
    DataArgs data;
    int runs = 1;
    double sigma_zeta = -1.0;
    std::string sidedness = "two-sided";
    std::string effect = "none";
    double trim = 0.01;
};

int run_test_command(const TestArgs& a, std::ostream& out, std::ostream& err) {
    if (a.runs < 1 || a.runs % 2 == 0) throw usage_error("--runs must be a positive odd number");
    const Variant variant = *parse_variant(a.data.variant);
    const Dataset data = load_data(a.data, variant);
    idtest::TestSetup setup;
    setup.variant = variant;
    setup.folds = a.data.folds;
    setup.sidedness = *idtest::parse_sidedness(a.sidedness);
    if (a.sigma_zeta >= 0.0) setup.sigma_zeta = a.sigma_zeta;
    setup.crossfit.threads = a.data.threads;
    const idtest::TestResult result = idtest::median_run(data, setup, a.runs, a.data.seed);
    for (const auto& w : result.warnings) err << "warning: " << w << '\n';

    const effects::TrimPolicy trim{a.trim};
    ml::CrossfitOptions eopt;
    eopt.threads = a.data.threads;
    const std::uint64_t effect_seed = derive_seed(a.data.seed, {30});
    std::optional<effects::DynamicEffect> dynamic;
    std::optional<effects::EffectEstimates> mediation;
    if (a.effect == "dynamic") dynamic = effects::estimate_dynamic_ate(data, trim, a.data.folds, effect_seed, eopt);
    if (a.effect == "mediation") mediation = effects::estimate_mediation(data, trim, a.data.folds, effect_seed, eopt);

    if (a.data.format == Format::records) {
        records::write_line(out, records::to_record(result));
        if (dynamic) records::write_line(out, records::to_record(*dynamic));
        if (mediation) records::write_line(out, records::to_record(*mediation));
        return kExitOk;
    }
    std::vector<std::string> head = {"teststat", "se", "pval"};
    std::vector<std::string> row = {num(result.theta_hat, 5), num(result.se, 5), fixed(result.pval, 5)};
    if (dynamic) {
        head.insert(head.end(), {"effect", "effect_se", "effect_pval", "effect_ntrimmed"});
        row.insert(row.end(), {num(dynamic->ate, 4), num(dynamic->se, 4), fixed(dynamic->pval, 4),
                               std::to_string(dynamic->n_trimmed)});
    }
    head.insert(head.end(), {"n", "runs", "variant", "folds", "zeta_sd"});
    row.insert(row.end(), {std::to_string(result.n), std::to_string(a.runs), a.data.variant,
                           std::to_string(a.data.folds), num(result.zeta_sd, 4)});
    print_lines(out, aligned({head, row}));
    if (mediation) {
        std::vector<std::vector<std::string>> rows = {{"effect", "estimate", "se"}};
        const auto v = mediation->values();
        for (std::size_t k = 0; k < 5; ++k) {
            rows.push_back({std::string(effects::kEffectNames[k]), num(v[k], 5), num(mediation->ses[k], 4)});
        }
        rows.push_back({"trimmed", std::to_string(mediation->n_trimmed), ""});
        print_lines(out, aligned(rows));
    }
    return kExitOk;
}

int run_first_stage(const DataArgs& a, std::ostream& out) {
    const Variant variant = *parse_variant(a.variant);
    const Dataset data = load_data(a, variant);
    idtest::TestSetup setup;
    setup.variant = variant;
    setup.folds = a.folds;
    setup.crossfit.threads = a.threads;
    const auto r = idtest::first_stage_check(data, setup, a.seed);
    if (a.format == Format::records) {
        records::write_line(out, records::to_record(r));
        return kExitOk;
    }
    print_lines(out, aligned({{"relation", "wald", "df", "pval"},
                              {"D ~ Z1 | X", num(r.stat_treatment, 6), std::to_string(r.df_treatment),
                               num(r.pval_treatment, 4)},
                              {"M ~ Z2 | controls", num(r.stat_mediator, 6), std::to_string(r.df_mediator),
                               num(r.pval_mediator, 4)}}));
    return kExitOk;
}

// replicate-table

struct TableArgs {
    int table = 1;
    int reps = 100;
    std::string n = "1000,4000";
    Eigen::Index p = 200;
    unsigned threads = 0;
    std::string out_dir;
    std::uint64_t seed = 1;
    int folds = 2;
    bool no_effects = false;
    std::string sidedness = "two-sided";
    Format format = Format::text;
};

std::string cell_file(const harness::CellConfig& c) {
    return "design" + std::to_string(c.design) + "_n" + std::to_string(c.n) + "_delta" + num(c.delta) + "_gamma" +
           num(c.gamma) + ".jsonl";
}

std::vector<std::string> render_table(int table, const std::vector<harness::SimulationRow>& rows, bool effects_on) {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> head = {"sample size", "rej. rate", "mean pval"};
    if (effects_on) {
        for (const char* part : {"bias", "RMSE"}) {
            for (auto name : {"total", "dir.(1)", "dir.(0)", "indir.(1)", "indir.(0)"}) {
                head.push_back(std::string(part) + " " + name);
            }
        }
    }
    grid.push_back(head);
    for (const auto& r : rows) {
        std::vector<std::string> line = {std::to_string(r.n), fixed(r.rej_rate), fixed(r.mean_pval)};
        if (effects_on) {
            for (double v : r.bias) line.push_back(fixed(v));
            for (double v : r.rmse) line.push_back(fixed(v));
        }
        grid.push_back(line);
    }
    const auto body = aligned(grid);
    std::vector<std::string> out = {"Table " + std::to_string(table) + ": design " + std::to_string(table) + ", " +
                                        std::to_string(rows.empty() ? 0 : rows.front().reps) + " replications",
                                    body.front()};
    std::size_t at = 1;
    std::string panel;
    for (const auto& r : rows) {
        const std::string title = "delta = " + num(r.delta) + " & gamma = " + num(r.gamma);
        if (title != panel) {
            out.push_back("-- " + title + " --");
            panel = title;
        }
        out.push_back(body[at++]);
    }
    return out;
}

int run_replicate(const TableArgs& a, std::ostream& out) {
    if (a.table != 1 && a.table != 2) throw usage_error("--table must be 1 or 2");
    if (a.reps < 1) throw usage_error("--reps must be positive");
    std::vector<Eigen::Index> sizes;
    for (const auto& s : split_list(a.n)) {
        try {
            std::size_t used = 0;
            const long v = std::stol(s, &used);
            if (used != s.size() || v < 10) throw std::invalid_argument(s);
            sizes.push_back(v);
        } catch (const std::exception&) {
            throw usage_error("--n expects a comma-separated list of sample sizes, got '" + a.n + "'");
        }
    }
    if (sizes.empty()) throw usage_error("--n needs at least one sample size");
    if (!a.out_dir.empty()) std::filesystem::create_directories(a.out_dir);

    std::vector<harness::SimulationRow> rows;
    for (const auto& panel : harness::table_panels()) {
        for (Eigen::Index n : sizes) {
            harness::CellConfig cell;
            cell.design = a.table;
            cell.n = n;
            cell.p = a.p;
            cell.delta = panel.delta;
            cell.gamma = panel.gamma;
            cell.reps = a.reps;
            cell.seed = a.seed;
            cell.folds = a.folds;
            cell.with_effects = !a.no_effects;
            cell.sidedness = *idtest::parse_sidedness(a.sidedness);
            cell.threads = a.threads;
            if (!a.out_dir.empty()) cell.checkpoint = std::filesystem::path(a.out_dir) / cell_file(cell);
            rows.push_back(harness::run_cell(cell));
        }
    }
    const auto text = render_table(a.table, rows, !a.no_effects);
    if (!a.out_dir.empty()) {
        const auto dir = std::filesystem::path(a.out_dir);
        std::ofstream txt(dir / ("table" + std::to_string(a.table) + ".txt"), std::ios::binary | std::ios::trunc);
        print_lines(txt, text);
        std::ofstream rec(dir / ("table" + std::to_string(a.table) + "_rows.jsonl"), std::ios::binary | std::ios::trunc);
        for (const auto& r : rows) records::write_line(rec, records::to_record(r));
    }
    if (a.format == Format::records) {
        for (const auto& r : rows) records::write_line(out, records::to_record(r));
    } else {
        print_lines(out, text);
    }
    return kExitOk;
}

const std::vector<std::string> kCommands = {"verify-theorems", "dsep", "simulate", "test", "first-stage",
                                            "replicate-table"};

/// Splices `--config FILE` entries in front of the command's own flags so
/// explicit flags win (options keep the last value given).
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::vector<std::string> from_file;
    for (std::size_t i = 0; i < args.size();) {
        std::string path;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw usage_error("--config needs a file name");
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            ++i;
            continue;
        }
        const auto extra = config_arguments(path);
        from_file.insert(from_file.end(), extra.begin(), extra.end());
    }
    if (from_file.empty()) return args;
    const auto cmd = std::find_first_of(args.begin(), args.end(), kCommands.begin(), kCommands.end());
    if (cmd == args.end()) throw usage_error("--config must accompany a command");
    args.insert(cmd + 1, from_file.begin(), from_file.end());
    return args;
}

}  // namespace

std::vector<std::string> config_arguments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config file " + path);
    std::vector<std::string> out;
    std::string line;
    for (int line_no = 1; std::getline(in, line); ++line_no) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw usage_error(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        auto strip = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
        };
        std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key.rfind("--", 0) == 0) key.erase(0, 2);
        if (key.empty() || value.empty()) {
            throw usage_error(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        out.push_back("--" + key + "=" + value);
    }
    return out;
}

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Graph-based identification checks and machine-learning identification tests for mediation models",
                 "medtest"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_help_all_flag("--help-all", "Show help for all commands");
    app.footer("Any command also accepts --config FILE with `key = value` lines; explicit flags take precedence.");

    VerifyArgs verify;
    auto* v = app.add_subcommand("verify-theorems", "Exhaustive d-separation check of the identification results");
    v->add_option("--theorem", verify.theorem, "t1, t2, l1 (both lemma directions), l1a, l1b, t3 or all")
        ->check(CLI::IsMember({"t1", "t2", "l1", "l1a", "l1b", "t3", "all"}));
    v->add_option("--fixture", verify.fixture, "Evaluate all queries on a drawn graph instead")
        ->check(CLI::IsMember(theorems::fixture_names()));
    v->add_option("--threads", verify.threads, "Worker threads (0 = all cores)");
    v->add_option("--max-confounders", verify.max_confounders, "Confounder cap for t3")->check(CLI::Range(0, 15));
    v->add_option("--max-counterexamples", verify.max_counterexamples, "Counterexamples kept per theorem");
    v->add_option("--emit-counterexamples", verify.emit, "Write counterexample graphs as records to this file");
    v->add_option("--seed", verify.seed, "Accepted for uniformity; enumeration is deterministic");
    add_format(v, verify.format);

    DsepArgs dsep;
    auto* ds = app.add_subcommand("dsep", "d-separation query on an edge-list graph");
    ds->add_option("--graph", dsep.graph_path, "Edge-list file");
    ds->add_option("--fixture", dsep.fixture, "Built-in graph")->check(CLI::IsMember(theorems::fixture_names()));
    ds->add_option("--a", dsep.a, "First node set (comma-separated)")->required();
    ds->add_option("--b", dsep.b, "Second node set")->required();
    ds->add_option("--given", dsep.given, "Conditioning set");
    ds->add_option("--intervene", dsep.intervene, "Remove edges leaving these nodes first");
    ds->add_option("--seed", dsep.seed, "Accepted for uniformity");
    add_format(ds, dsep.format);

    SimulateArgs sim;
    auto* sm = app.add_subcommand("simulate", "Draw a sample from a simulation design and write CSV");
    sm->add_option("--design", sim.config.design, "1 or 2");
    sm->add_option("--n", sim.config.n, "Sample size");
    sm->add_option("--p", sim.config.p, "Number of covariates");
    sm->add_option("--delta", sim.config.delta, "Confounding strength");
    sm->add_option("--gamma", sim.config.gamma, "Direct instrument effect on the outcome");
    sm->add_option("--seed", sim.config.seed, "Random seed");
    sm->add_flag("--binary-mediator", sim.config.binary_mediator, "Dichotomize the mediator");
    sm->add_option("--beta-scale", sim.config.beta_scale, "Scale of the covariate coefficients");
    sm->add_option("--out", sim.out_path, "Output CSV (default: standard output)");
    add_format(sm, sim.format);

    TestArgs test;
    auto* ts = app.add_subcommand("test", "Identification test on tabular data");
    add_data_options(ts, test.data);
    ts->add_option("--runs", test.runs, "Independent runs; the median p-value run is reported");
    ts->add_option("--sigma-zeta", test.sigma_zeta, "Perturbation standard deviation (default 500/n)");
    ts->add_option("--sidedness", test.sidedness, "two-sided or one-sided")
        ->check(CLI::IsMember({"two-sided", "one-sided"}));
    ts->add_option("--effect", test.effect, "Also estimate effects: none, dynamic or mediation")
        ->check(CLI::IsMember({"none", "dynamic", "mediation"}));
    ts->add_option("--trim", test.trim, "Propensity trimming threshold")->check(CLI::Range(0.0, 0.49));

    DataArgs first;
    auto* fs = app.add_subcommand("first-stage", "Instrument relevance checks");
    add_data_options(fs, first);

    TableArgs table;
    auto* rt = app.add_subcommand("replicate-table", "Monte Carlo reproduction of a simulation table");
    rt->add_option("--table", table.table, "1 (design 1) or 2 (design 2)");
    rt->add_option("--reps", table.reps, "Replications per cell");
    rt->add_option("--n", table.n, "Comma-separated sample sizes");
    rt->add_option("--p", table.p, "Number of covariates");
    rt->add_option("--threads", table.threads, "Worker threads (0 = all cores)");
    rt->add_option("--out", table.out_dir, "Directory for checkpoints, tables and row records");
    rt->add_option("--seed", table.seed, "Master seed");
    rt->add_option("--folds", table.folds, "Cross-fitting folds")->check(CLI::Range(2, 100));
    rt->add_flag("--no-effects", table.no_effects, "Skip effect estimation");
    rt->add_option("--sidedness", table.sidedness, "two-sided or one-sided")
        ->check(CLI::IsMember({"two-sided", "one-sided"}));
    add_format(rt, table.format);

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const usage_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }

    try {
        if (v->parsed()) return run_verify(verify, out);
        if (ds->parsed()) return run_dsep(dsep, out);
        if (sm->parsed()) return run_simulate(sim, out);
        if (ts->parsed()) return run_test_command(test, out, err);
        if (fs->parsed()) return run_first_stage(first, out);
        if (rt->parsed()) return run_replicate(table, out);
    } catch (const usage_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace medtest::cli

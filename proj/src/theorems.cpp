#include "medtest/theorems.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <filesystem>

#include "medtest/error.hpp"
#include "medtest/parallel.hpp"

namespace medtest::theorems {

namespace {

QuerySpec sep(std::string id, GraphKind kind, std::string a, std::string b, std::vector<std::string> given) {
    return QuerySpec{std::move(id), kind, Relation::separated, {std::move(a)}, {std::move(b)}, std::move(given)};
}

QuerySpec conn(std::string id, std::string a, std::string b, std::vector<std::string> given) {
    return QuerySpec{std::move(id), GraphKind::G, Relation::connected, {std::move(a)}, {std::move(b)}, std::move(given)};
}

std::vector<QuerySpec> build_catalog() {
    using enum GraphKind;
    std::vector<QuerySpec> c;
    c.push_back(QuerySpec{"A1", G, Relation::structural, {}, {}, {}});
    c.push_back(QuerySpec{"A1m", G, Relation::structural, {}, {}, {}});
    c.push_back(conn("A4", "D", "Z1", {"X"}));
    c.push_back(conn("A5", "M", "Z2", {"D", "X"}));
    c.push_back(conn("A5m", "M", "Z2", {"D", "X", "W"}));
    c.push_back(sep("A6a", G_DM, "Y", "D", {"X"}));
    c.push_back(sep("A6b", G_D, "M", "D", {"X"}));
    c.push_back(sep("A6am", G_DM, "Y", "D", {"X", "Z2"}));
    c.push_back(sep("A6bm", G_D, "M", "D", {"X", "Z2"}));
    c.push_back(sep("A7", G_DM, "Y", "M", {"D", "X"}));
    c.push_back(sep("A7m", G_DM, "Y", "M", {"D", "X", "W"}));
    c.push_back(sep("A8a", G_DM, "Y", "Z1", {"X"}));
    c.push_back(sep("A8b", G_D, "M", "Z1", {"X"}));
    c.push_back(sep("A8am", G_DM, "Y", "Z1", {"X", "Z2"}));
    c.push_back(sep("A8bm", G_D, "M", "Z1", {"X", "Z2"}));
    c.push_back(sep("A9", G_DM, "Y", "Z2", {"D", "X"}));
    c.push_back(sep("A9m", G_DM, "Y", "Z2", {"D", "X", "W"}));
    c.push_back(sep("TIa", G, "Y", "Z1", {"X", "D"}));
    c.push_back(sep("TIam", G, "Y", "Z1", {"X", "D", "Z2"}));
    c.push_back(sep("TIb", G, "M", "Z1", {"X", "D"}));
    c.push_back(sep("TIbm", G, "M", "Z1", {"X", "D", "Z2"}));
    c.push_back(sep("TIc", G, "Y", "Z2", {"X", "D", "M"}));
    c.push_back(sep("TId", G, "Y", "Z1", {"X", "D", "M"}));
    c.push_back(sep("TIe", G, "Y", "Z2", {"X", "D", "M", "W"}));
    return c;
}

std::vector<std::string> cut_of(GraphKind kind) {
    switch (kind) {
        case GraphKind::G: return {};
        case GraphKind::G_D: return {"D"};
        case GraphKind::G_DM: return {"D", "M"};
    }
    return {};
}

constexpr std::string_view kImplicit = "X";

// ---------------------------------------------------------------------------
// Bitset graphs for the enumeration inner loop. Node v is bit v; at most 32
// nodes (6 observed plus 15 latent in the largest family).

using Bits = std::uint32_t;
constexpr std::size_t kMaxBits = 32;

struct BitGraph {
    std::array<Bits, kMaxBits> parents{};
    std::array<Bits, kMaxBits> children{};

    void add(unsigned from, unsigned to) {
        children[from] |= Bits{1} << to;
        parents[to] |= Bits{1} << from;
    }

    BitGraph mutilated(Bits cut) const {
        BitGraph out = *this;
        for (Bits rest = cut; rest; rest &= rest - 1) out.children[std::countr_zero(rest)] = 0;
        for (auto& p : out.parents) p &= ~cut;
        return out;
    }
};

Bits closure(const std::array<Bits, kMaxBits>& step, Bits start) {
    Bits seen = start;
    Bits frontier = start;
    while (frontier) {
        const unsigned v = std::countr_zero(frontier);
        frontier &= frontier - 1;
        const Bits fresh = step[v] & ~seen;
        seen |= fresh;
        frontier |= fresh;
    }
    return seen;
}

bool bits_dseparated(const BitGraph& g, Bits a, Bits b, Bits c) {
    const Bits anc = closure(g.parents, c);
    Bits up = a, down = 0;
    Bits pending_up = a, pending_down = 0;
    auto push_up = [&](Bits x) {
        x &= ~up;
        up |= x;
        pending_up |= x;
    };
    auto push_down = [&](Bits x) {
        x &= ~down;
        down |= x;
        pending_down |= x;
    };
    while (pending_up | pending_down) {
        if (pending_up) {
            const unsigned v = std::countr_zero(pending_up);
            pending_up &= pending_up - 1;
            if (c >> v & 1) continue;
            push_up(g.parents[v]);
            push_down(g.children[v]);
        } else {
            const unsigned v = std::countr_zero(pending_down);
            pending_down &= pending_down - 1;
            if (!(c >> v & 1)) push_down(g.children[v]);
            if (anc >> v & 1) push_up(g.parents[v]);
        }
        if ((up | down) & b & ~c) return false;
    }
    return true;
}

struct CompiledQuery {
    Relation relation;
    unsigned graph;  // index into {G, G_D, G_DM}
    Bits a = 0, b = 0, c = 0;
    std::vector<std::pair<unsigned, unsigned>> forbidden;
};

class Compiler {
public:
    explicit Compiler(const std::vector<std::string>& observed) : observed_(observed) {}

    std::optional<unsigned> index(std::string_view label) const {
        for (std::size_t i = 0; i < observed_.size(); ++i) {
            if (observed_[i] == label) return static_cast<unsigned>(i);
        }
        return std::nullopt;
    }

    Bits set(const std::vector<std::string>& labels, bool allow_implicit) const {
        Bits out = 0;
        for (const auto& l : labels) {
            if (auto v = index(l)) {
                out |= Bits{1} << *v;
            } else if (!(allow_implicit && l == kImplicit)) {
                throw invalid_query("query node " + l + " is not part of the family");
            }
        }
        return out;
    }

    CompiledQuery compile(const QuerySpec& q) const {
        CompiledQuery out;
        out.relation = q.relation;
        out.graph = static_cast<unsigned>(q.graph);
        if (q.relation == Relation::structural) {
            for (const auto& [from, to] : forbidden_directions(q.id == "A1m")) {
                const auto f = index(from), t = index(to);
                if (f && t) out.forbidden.emplace_back(*f, *t);
            }
            return out;
        }
        out.a = set(q.a, false);
        out.b = set(q.b, false);
        out.c = set(q.given, true);
        return out;
    }

private:
    const std::vector<std::string>& observed_;
};

bool evaluate(const CompiledQuery& q, const std::array<BitGraph, 3>& graphs) {
    const BitGraph& g = graphs[q.graph];
    switch (q.relation) {
        case Relation::structural:
            for (const auto& [from, to] : q.forbidden) {
                if (closure(g.children, g.children[from]) >> to & 1) return false;
            }
            return true;
        case Relation::separated: return bits_dseparated(g, q.a, q.b, q.c);
        case Relation::connected: return !bits_dseparated(g, q.a, q.b, q.c);
    }
    return false;
}

std::vector<std::uint64_t> confounder_subsets(std::size_t count, std::size_t cap) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << count); ++s) {
        if (static_cast<std::size_t>(std::popcount(s)) <= cap) out.push_back(s);
    }
    return out;
}

std::uint64_t binomial(std::size_t n, std::size_t k) {
    std::uint64_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

std::vector<Direction> all_pairs(const std::vector<std::string>& nodes) {
    std::vector<Direction> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) out.emplace_back(nodes[i], nodes[j]);
    }
    return out;
}

}  // namespace

const std::vector<QuerySpec>& query_catalog() {
    static const std::vector<QuerySpec> catalog = build_catalog();
    return catalog;
}

const QuerySpec& query(std::string_view id) {
    for (const auto& q : query_catalog()) {
        if (q.id == id) return q;
    }
    throw invalid_query("unknown query " + std::string(id));
}

const std::vector<Direction>& forbidden_directions(bool with_w) {
    static const std::vector<Direction> base = {
        {"Y", "M"},  {"Y", "X"},  {"Y", "Z1"}, {"Y", "Z2"}, {"Y", "D"},  {"M", "D"},  {"M", "X"},
        {"M", "Z1"}, {"M", "Z2"}, {"Z2", "D"}, {"Z2", "X"}, {"Z2", "Z1"}, {"D", "X"}, {"D", "Z1"},
    };
    static const std::vector<Direction> extended = [] {
        auto out = base;
        out.emplace_back("M", "W");
        return out;
    }();
    return with_w ? extended : base;
}

std::vector<Direction> derive_allowed_edges(const std::vector<std::string>& nodes,
                                            const std::vector<Direction>& forbidden) {
    auto is_forbidden = [&](const std::string& from, const std::string& to) {
        return std::find(forbidden.begin(), forbidden.end(), Direction{from, to}) != forbidden.end();
    };
    std::vector<Direction> out;
    for (const auto& [a, b] : all_pairs(nodes)) {
        const bool ab = !is_forbidden(a, b);
        const bool ba = !is_forbidden(b, a);
        if (ab && ba) throw graph_error("both directions allowed between " + a + " and " + b);
        if (ab) out.emplace_back(a, b);
        if (ba) out.emplace_back(b, a);
    }
    return out;
}

bool check_query(const graph::Dag& g, const QuerySpec& q) {
    if (q.relation == Relation::structural) {
        if (q.id != "A1" && q.id != "A1m") throw invalid_query("unknown structural query " + q.id);
        for (const auto& [from, to] : forbidden_directions(q.id == "A1m")) {
            const auto f = g.find(from), t = g.find(to);
            if (f && t && graph::has_directed_path(g, *f, *t)) return false;
        }
        return true;
    }
    if (q.a.empty() || q.b.empty()) throw invalid_query("query " + q.id + " has an empty endpoint set");
    std::vector<std::string> given;
    for (const auto& l : q.given) {
        if (l == kImplicit && !g.find(l)) continue;
        given.push_back(l);
    }
    const graph::Dag mutilated = graph::mutilate(g, cut_of(q.graph));
    const bool separated = graph::is_dseparated(mutilated, q.a, q.b, given);
    return q.relation == Relation::separated ? separated : !separated;
}

std::uint64_t Family::size() const {
    std::uint64_t subsets = 0;
    for (std::size_t k = 0; k <= std::min(max_confounders, confounders.size()); ++k) {
        subsets += binomial(confounders.size(), k);
    }
    return (std::uint64_t{1} << edges.size()) * subsets;
}

bool Family::contains(std::uint64_t mask) const {
    if (mask >> bit_count()) return false;
    return static_cast<std::size_t>(std::popcount(mask >> edges.size())) <= max_confounders;
}

graph::Dag Family::graph(std::uint64_t mask) const {
    if (!contains(mask)) throw invalid_query("mask is not a member of the family");
    graph::GraphSpec spec;
    for (const auto& label : observed) spec.node(label);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (mask >> i & 1) spec.add_edge(edges[i].first, edges[i].second);
    }
    for (std::size_t i = 0; i < confounders.size(); ++i) {
        if (!(mask >> (edges.size() + i) & 1)) continue;
        const auto& [a, b] = confounders[i];
        const std::string u = graph::confounder_label(a, b);
        spec.add_edge(u, a);
        spec.add_edge(u, b);
    }
    return graph::Dag::build(std::move(spec));
}

Family mediation_family(Setup) {
    Family f;
    f.observed = {"Y", "D", "M", "Z1", "Z2"};
    f.edges = derive_allowed_edges(f.observed, forbidden_directions(false));
    f.confounders = all_pairs(f.observed);
    f.max_confounders = f.confounders.size();
    return f;
}

Family posttreatment_family(std::size_t max_confounders) {
    Family f;
    f.observed = {"Y", "D", "M", "Z1", "Z2", "W"};
    // W is measured after D and before M; it can be caused by D and Z1 and can
    // cause M, Y and Z2.
    auto forbidden = forbidden_directions(true);
    for (const char* target : {"D", "Z1"}) forbidden.emplace_back("W", target);
    for (const char* source : {"Z2", "Y"}) forbidden.emplace_back(source, "W");
    f.edges = derive_allowed_edges(f.observed, forbidden);
    f.confounders = all_pairs(f.observed);
    f.max_confounders = std::min(max_confounders, f.confounders.size());
    return f;
}

void enumerate_family(const Family& family, const std::function<void(std::uint64_t, const graph::Dag&)>& visit) {
    const std::uint64_t edge_masks = std::uint64_t{1} << family.edges.size();
    for (std::uint64_t conf : confounder_subsets(family.confounders.size(), family.max_confounders)) {
        for (std::uint64_t e = 0; e < edge_masks; ++e) {
            const std::uint64_t mask = e | conf << family.edges.size();
            visit(mask, family.graph(mask));
        }
    }
}

std::vector<bool> evaluate_member(const Family& family, std::uint64_t mask, const std::vector<std::string>& ids) {
    if (!family.contains(mask)) throw invalid_query("mask is not a member of the family");
    const Compiler compiler(family.observed);
    const unsigned n_obs = static_cast<unsigned>(family.observed.size());
    BitGraph g;
    for (std::size_t i = 0; i < family.edges.size(); ++i) {
        if (mask >> i & 1) g.add(*compiler.index(family.edges[i].first), *compiler.index(family.edges[i].second));
    }
    for (std::size_t i = 0; i < family.confounders.size(); ++i) {
        if (!(mask >> (family.edges.size() + i) & 1)) continue;
        const auto u = n_obs + static_cast<unsigned>(i);
        g.add(u, *compiler.index(family.confounders[i].first));
        g.add(u, *compiler.index(family.confounders[i].second));
    }
    const Bits cut_d = Bits{1} << *compiler.index("D");
    const Bits cut_dm = cut_d | Bits{1} << *compiler.index("M");
    const std::array<BitGraph, 3> graphs = {g, g.mutilated(cut_d), g.mutilated(cut_dm)};
    std::vector<bool> out;
    for (const auto& id : ids) out.push_back(evaluate(compiler.compile(query(id)), graphs));
    return out;
}

std::string_view theorem_name(Theorem t) {
    switch (t) {
        case Theorem::t1: return "t1";
        case Theorem::t2: return "t2";
        case Theorem::l1a: return "l1a";
        case Theorem::l1b: return "l1b";
        case Theorem::t3: return "t3";
    }
    return "";
}

std::optional<Theorem> parse_theorem(std::string_view name) {
    for (Theorem t : {Theorem::t1, Theorem::t2, Theorem::l1a, Theorem::l1b, Theorem::t3}) {
        if (theorem_name(t) == name) return t;
    }
    return std::nullopt;
}

const TheoremSpec& theorem_spec(Theorem t) {
    static const std::array<TheoremSpec, 5> specs = {
        TheoremSpec{Theorem::t1,
                    {"A1", "A4", "A5"},
                    {{"A6a", "A6b", "A7", "A8a", "A8b", "A9"}, {"TIa", "TIb", "TIc"}}},
        TheoremSpec{Theorem::t2,
                    {"A1", "A4", "A5"},
                    {{"A6am", "A6bm", "A7", "A8am", "A8bm", "A9"}, {"TIam", "TIbm", "TIc"}, {"TIbm", "TIc", "TId"}}},
        TheoremSpec{Theorem::l1a, {"A1"}, {{"TIam", "TIbm", "TIc"}, {"TId"}}, true},
        TheoremSpec{Theorem::l1b, {"A1"}, {{"TIbm", "TIc", "TId"}, {"TIam"}}, true},
        TheoremSpec{Theorem::t3,
                    {"A1m", "A4", "A5m"},
                    {{"A6a", "A6b", "A7m", "A8a", "A8b", "A9m"}, {"TIa", "TIb", "TIe"}}},
    };
    return specs[static_cast<std::size_t>(t)];
}

VerificationReport verify_theorem(Theorem t, const VerifyOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const TheoremSpec& spec = theorem_spec(t);
    const Family family = t == Theorem::t3 ? posttreatment_family(options.max_confounders)
                                           : mediation_family(t == Theorem::t2 ? Setup::z2linked : Setup::baseline);
    const Compiler compiler(family.observed);

    auto compile_all = [&](const std::vector<std::string>& ids) {
        std::vector<CompiledQuery> out;
        for (const auto& id : ids) out.push_back(compiler.compile(query(id)));
        return out;
    };
    const auto pre = compile_all(spec.preconditions);
    std::vector<std::vector<CompiledQuery>> sides;
    for (const auto& side : spec.sides) sides.push_back(compile_all(side));

    const Bits cut_d = Bits{1} << *compiler.index("D");
    const Bits cut_dm = cut_d | Bits{1} << *compiler.index("M");
    const unsigned n_obs = static_cast<unsigned>(family.observed.size());
    std::vector<std::pair<unsigned, unsigned>> edges, latent;
    for (const auto& [from, to] : family.edges) edges.emplace_back(*compiler.index(from), *compiler.index(to));
    for (const auto& [a, b] : family.confounders) latent.emplace_back(*compiler.index(a), *compiler.index(b));

    const auto subsets = confounder_subsets(family.confounders.size(), family.max_confounders);
    const std::uint64_t edge_masks = std::uint64_t{1} << edges.size();

    struct Partial {
        VerificationReport report;
        std::vector<std::uint64_t> masks;
    };
    std::vector<Partial> partials(subsets.size());

    parallel_for(subsets.size(), options.threads, [&](std::size_t chunk) {
        Partial& part = partials[chunk];
        const std::uint64_t conf = subsets[chunk];
        BitGraph base;
        for (std::size_t i = 0; i < latent.size(); ++i) {
            if (conf >> i & 1) {
                base.add(n_obs + static_cast<unsigned>(i), latent[i].first);
                base.add(n_obs + static_cast<unsigned>(i), latent[i].second);
            }
        }
        for (std::uint64_t e = 0; e < edge_masks; ++e) {
            BitGraph g = base;
            for (std::size_t i = 0; i < edges.size(); ++i) {
                if (e >> i & 1) g.add(edges[i].first, edges[i].second);
            }
            const std::array<BitGraph, 3> graphs = {g, g.mutilated(cut_d), g.mutilated(cut_dm)};
            ++part.report.family_size;
            const bool pre_ok = std::all_of(pre.begin(), pre.end(), [&](const auto& q) { return evaluate(q, graphs); });
            if (!pre_ok) continue;
            ++part.report.satisfying_preconditions;
            std::vector<bool> holds;
            for (const auto& side : sides) {
                holds.push_back(std::all_of(side.begin(), side.end(), [&](const auto& q) { return evaluate(q, graphs); }));
            }
            const bool all = std::all_of(holds.begin(), holds.end(), [](bool h) { return h; });
            const bool none = std::none_of(holds.begin(), holds.end(), [](bool h) { return h; });
            bool violated = false;
            if (all) {
                ++part.report.both_sides_hold;
            } else if (none) {
                ++part.report.neither_side_holds;
            } else if (spec.implication && !holds[0]) {
                ++part.report.vacuous;
            } else {
                violated = true;
            }
            if (violated) {
                ++part.report.counterexample_count;
                if (part.masks.size() < options.max_counterexamples) {
                    part.masks.push_back(e | conf << edges.size());
                }
            }
        }
    });

    VerificationReport report;
    report.theorem = std::string(theorem_name(t));
    for (const Partial& part : partials) {
        report.family_size += part.report.family_size;
        report.satisfying_preconditions += part.report.satisfying_preconditions;
        report.both_sides_hold += part.report.both_sides_hold;
        report.neither_side_holds += part.report.neither_side_holds;
        report.vacuous += part.report.vacuous;
        report.counterexample_count += part.report.counterexample_count;
        for (std::uint64_t mask : part.masks) {
            if (report.counterexamples.size() >= options.max_counterexamples) break;
            report.counterexamples.push_back({mask, family.graph(mask)});
        }
    }
    report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::vector<std::string> fixture_names() {
    return {"figure1", "figure2-left", "figure2-right", "figure5", "figure5-no-z1w"};
}

graph::Dag load_fixture(std::string_view name) {
    std::string file(name == "figure3" ? "figure5" : name);
    const auto names = fixture_names();
    if (std::find(names.begin(), names.end(), file) == names.end()) {
        throw invalid_query("unknown fixture " + std::string(name));
    }
    return graph::load_edge_list(std::filesystem::path(MEDTEST_FIXTURE_DIR) / (file + ".txt"));
}

std::map<std::string, bool> check_all_queries(const graph::Dag& g) {
    std::map<std::string, bool> out;
    const bool has_w = g.find("W").has_value();
    for (const auto& q : query_catalog()) {
        if (q.relation == Relation::structural) {
            if (q.id == "A1m" && !has_w) continue;
            out[q.id] = check_query(g, q);
            continue;
        }
        bool applicable = true;
        for (const auto* set : {&q.a, &q.b, &q.given}) {
            for (const auto& l : *set) {
                if (!g.find(l) && l != kImplicit) applicable = false;
            }
        }
        if (applicable) out[q.id] = check_query(g, q);
    }
    return out;
}

std::map<std::string, bool> check_fixture(std::string_view name) { return check_all_queries(load_fixture(name)); }

}  // namespace medtest::theorems

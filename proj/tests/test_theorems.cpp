#include "doctest.h"

#include <algorithm>
#include <set>

#include "medtest/error.hpp"
#include "medtest/graph.hpp"
#include "medtest/rng.hpp"
#include "medtest/theorems.hpp"

using namespace medtest;
using namespace medtest::theorems;

TEST_CASE("allowed edges follow from the forbidden directions") {
    const auto& forbidden = forbidden_directions();
    CHECK(std::count(forbidden.begin(), forbidden.end(), Direction{"Y", "D"}) == 1);
    const Family f = mediation_family();
    REQUIRE(f.edges.size() == 10);
    const std::set<Direction> expected = {
        {"D", "Y"}, {"M", "Y"}, {"Z1", "Y"}, {"Z2", "Y"}, {"D", "M"},
        {"Z1", "D"}, {"D", "Z2"}, {"Z1", "M"}, {"Z2", "M"}, {"Z1", "Z2"},
    };
    CHECK(std::set<Direction>(f.edges.begin(), f.edges.end()) == expected);
    for (const auto& e : f.edges) {
        CHECK(std::find(forbidden.begin(), forbidden.end(), e) == forbidden.end());
    }
    CHECK(f.confounders.size() == 10);
    CHECK_THROWS_AS(derive_allowed_edges({"A", "B"}, {}), graph_error);
}

TEST_CASE("family members") {
    const Family f = mediation_family();
    CHECK(f.size() == 1048576);
    CHECK(mediation_family(Setup::z2linked).edges == f.edges);
    const graph::Dag empty = f.graph(0);
    CHECK(empty.node_count() == 5);
    CHECK(empty.edge_count() == 0);
    const graph::Dag full = f.graph(f.size() - 1);
    CHECK(full.node_count() == 15);
    CHECK(full.edge_count() == 30);

    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t mask = rng.next_u64() & (f.size() - 1);
        const graph::Dag g = f.graph(mask);
        CHECK(graph::is_acyclic(g));
        CHECK(check_query(g, query("A1")));
    }

    const Family w = posttreatment_family(1);
    CHECK(w.edges.size() == 15);
    CHECK(w.confounders.size() == 15);
    CHECK(w.size() == 32768u * 16u);
    CHECK_FALSE(w.contains(std::uint64_t{3} << 15));
    std::uint64_t visited = 0;
    enumerate_family(posttreatment_family(0), [&](std::uint64_t, const graph::Dag& g) {
        visited += graph::is_acyclic(g) && check_query(g, query("A1m"));
    });
    CHECK(visited == 32768);
}

TEST_CASE("bitset evaluation agrees with the graph routine") {
    std::vector<std::string> ids;
    for (const auto& q : query_catalog()) {
        const bool uses_w = std::find(q.given.begin(), q.given.end(), "W") != q.given.end();
        if (!uses_w && q.id != "A1m") ids.push_back(q.id);
    }
    const Family f = mediation_family();
    Rng rng(11);
    for (int i = 0; i < 3000; ++i) {
        const std::uint64_t mask = rng.next_u64() & (f.size() - 1);
        const graph::Dag g = f.graph(mask);
        const auto fast = evaluate_member(f, mask, ids);
        for (std::size_t k = 0; k < ids.size(); ++k) REQUIRE(fast[k] == check_query(g, query(ids[k])));
    }

    std::vector<std::string> all_ids;
    for (const auto& q : query_catalog()) all_ids.push_back(q.id);
    const Family w = posttreatment_family(2);
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t mask;
        do {
            mask = rng.next_u64() & ((std::uint64_t{1} << w.bit_count()) - 1);
        } while (!w.contains(mask));
        const graph::Dag g = w.graph(mask);
        const auto fast = evaluate_member(w, mask, all_ids);
        for (std::size_t k = 0; k < all_ids.size(); ++k) REQUIRE(fast[k] == check_query(g, query(all_ids[k])));
    }
}

TEST_CASE("fixture queries") {
    CHECK(check_fixture("figure1").at("TIa"));
    CHECK_FALSE(check_fixture("figure2-left").at("A6b"));
    CHECK_FALSE(check_fixture("figure2-right").at("TIam"));
    CHECK_THROWS_AS(check_fixture("figure9"), invalid_query);

    const auto edgeless = graph::parse_edge_list("Y\nD\nM\nZ1\nZ2\n");
    CHECK_FALSE(check_query(edgeless, query("A4")));

    graph::GraphSpec spec;
    const auto fig1 = load_fixture("figure1");
    for (std::size_t v = 0; v < fig1.node_count(); ++v) spec.node(fig1.label(static_cast<graph::NodeIndex>(v)));
    for (const auto& e : fig1.edges()) spec.edges.push_back(e);
    spec.add_edge("U_DY", "D");
    spec.add_edge("U_DY", "Y");
    CHECK_FALSE(check_query(graph::Dag::build(spec), query("TIa")));
}

TEST_CASE("figures satisfying the theorems") {
    for (const char* name : {"figure1", "figure2-right"}) {
        const auto r = check_fixture(name);
        for (const char* id : {"A1", "A4", "A5", "A6a", "A6b", "A7", "A8a", "A8b", "A9", "TIa", "TIb", "TIc"}) {
            INFO(name << " " << id);
            CHECK(r.at(id));
        }
    }
    const auto left = check_fixture("figure2-left");
    CHECK_FALSE(left.at("TIa"));
    CHECK(left.at("TIam"));
    CHECK(left.at("TIbm"));
}

TEST_CASE("post-treatment fixtures") {
    const auto drawn = check_fixture("figure5");
    CHECK(drawn.at("TIe"));
    CHECK(drawn.at("A1m"));
    // With Z1 -> W the paths Z1 -> W -> Y and Z1 -> W -> M stay open given D.
    CHECK_FALSE(drawn.at("TIa"));
    CHECK_FALSE(drawn.at("TIb"));
    CHECK_FALSE(drawn.at("A8a"));
    CHECK_FALSE(drawn.at("A8b"));
    CHECK(check_fixture("figure3") == drawn);

    const auto pruned = check_fixture("figure5-no-z1w");
    for (const char* id : {"A1m", "A4", "A5m", "A6a", "A6b", "A7m", "A8a", "A8b", "A9m", "TIa", "TIb", "TIe"}) {
        INFO(id);
        CHECK(pruned.at(id));
    }
}

TEST_CASE("query errors") {
    CHECK_THROWS_AS(query("A42"), invalid_query);
    QuerySpec bad{"bad", GraphKind::G, Relation::separated, {"Y"}, {"Q"}, {}};
    CHECK_THROWS_AS(check_query(load_fixture("figure1"), bad), invalid_query);
    QuerySpec empty{"empty", GraphKind::G, Relation::separated, {}, {"Y"}, {}};
    CHECK_THROWS_AS(check_query(load_fixture("figure1"), empty), invalid_query);
    CHECK(parse_theorem("t2") == Theorem::t2);
    CHECK_FALSE(parse_theorem("t9").has_value());
}

TEST_CASE("reduced post-treatment enumeration") {
    VerifyOptions opt;
    opt.max_confounders = 1;
    const auto r = verify_theorem(Theorem::t3, opt);
    CHECK(r.family_size == 32768u * 16u);
    CHECK(r.satisfying_preconditions ==
          r.both_sides_hold + r.neither_side_holds + r.vacuous + r.counterexample_count);
    CHECK(r.counterexamples.size() == std::min<std::uint64_t>(r.counterexample_count, opt.max_counterexamples));
}

TEST_CASE("lemma directions and determinism") {
    for (Theorem t : {Theorem::l1a, Theorem::l1b}) {
        VerifyOptions one;
        one.threads = 1;
        VerifyOptions many;
        many.threads = 3;
        const auto a = verify_theorem(t, one);
        const auto b = verify_theorem(t, many);
        CHECK(a.family_size == 1048576);
        CHECK(a.counterexample_count == 0);
        CHECK(a.satisfying_preconditions == a.family_size);
        CHECK(a.satisfying_preconditions == a.both_sides_hold + a.neither_side_holds + a.vacuous);
        CHECK(a.both_sides_hold == b.both_sides_hold);
        CHECK(a.vacuous == b.vacuous);
        CHECK(a.neither_side_holds == b.neither_side_holds);
    }
}

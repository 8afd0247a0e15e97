#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medtest/graph.hpp"

namespace medtest::theorems {

enum class GraphKind { G, G_D, G_DM };

enum class Relation { separated, connected, structural };

/// One assumption or testable implication in d-separation form.
///
/// Separation queries test `a` against `b` given `given` in the graph selected
/// by `graph`. Structural queries (A1, A1m) ignore the node sets and require
/// the absence of directed paths in the forbidden directions.
struct QuerySpec {
    std::string id;
    GraphKind graph = GraphKind::G;
    Relation relation = Relation::separated;
    std::vector<std::string> a;
    std::vector<std::string> b;
    std::vector<std::string> given;
};

/// All assumptions (A1 ... A9m) and testable implications (TIa ... TIe).
const std::vector<QuerySpec>& query_catalog();

/// Catalog lookup; throws invalid_query for unknown ids.
const QuerySpec& query(std::string_view id);

using Direction = std::pair<std::string, std::string>;

/// Directions in which no directed path may exist. `with_w` selects the
/// variant that also covers post-treatment covariates.
const std::vector<Direction>& forbidden_directions(bool with_w = false);

/// For every unordered pair of `nodes`, the direction not forbidden by
/// `forbidden`. Throws graph_error when a pair admits both directions.
/// Pairs whose both directions are forbidden contribute no edge.
std::vector<Direction> derive_allowed_edges(const std::vector<std::string>& nodes,
                                            const std::vector<Direction>& forbidden);

/// Evaluates `q` on `g`. The covariate node X may be left implicit: when `g`
/// has no node X it is dropped from conditioning sets. Any other unknown node
/// raises invalid_query.
bool check_query(const graph::Dag& g, const QuerySpec& q);

enum class Setup { baseline, z2linked };

/// A family of graphs over fixed observed nodes: each member switches on a
/// subset of the allowed directed edges and a subset of the pairwise latent
/// confounders. Bit i < edges.size() of a member mask toggles edges[i]; the
/// following bits toggle confounders in `confounders` order.
struct Family {
    std::vector<std::string> observed;
    std::vector<Direction> edges;
    std::vector<Direction> confounders;
    /// Members with more active confounders than this are skipped.
    std::size_t max_confounders;

    std::size_t bit_count() const { return edges.size() + confounders.size(); }
    /// Number of members after the confounder cap.
    std::uint64_t size() const;
    bool contains(std::uint64_t mask) const;
    graph::Dag graph(std::uint64_t mask) const;
};

/// Observed nodes Y, D, M, Z1, Z2 with X implicit: 10 edges and 10 confounders.
/// Both setups share the same family; the setup only changes which queries
/// are evaluated on it.
Family mediation_family(Setup setup = Setup::baseline);

/// Adds the post-treatment node W; confounder subsets capped at `max_confounders`.
Family posttreatment_family(std::size_t max_confounders);

/// Streams every member of `family` in mask order.
void enumerate_family(const Family& family, const std::function<void(std::uint64_t, const graph::Dag&)>& visit);

/// Evaluates the catalog queries `ids` on family member `mask` with the
/// bitset routine used by verify_theorem.
std::vector<bool> evaluate_member(const Family& family, std::uint64_t mask, const std::vector<std::string>& ids);

enum class Theorem { t1, t2, l1a, l1b, t3 };

std::string_view theorem_name(Theorem t);
std::optional<Theorem> parse_theorem(std::string_view name);

/// Preconditions and sides of an equivalence (all sides agree) or of an
/// implication (sides[0] implies sides[1]); each side is a conjunction.
struct TheoremSpec {
    Theorem theorem;
    std::vector<std::string> preconditions;
    std::vector<std::vector<std::string>> sides;
    bool implication = false;
};

const TheoremSpec& theorem_spec(Theorem t);

struct Counterexample {
    std::uint64_t mask;
    graph::Dag graph;
};

struct VerificationReport {
    std::string theorem;
    std::uint64_t family_size = 0;
    std::uint64_t satisfying_preconditions = 0;
    std::uint64_t both_sides_hold = 0;
    std::uint64_t neither_side_holds = 0;
    /// Implications only: antecedent false, consequent true.
    std::uint64_t vacuous = 0;
    std::uint64_t counterexample_count = 0;
    /// The first max_counterexamples violating graphs in mask order.
    std::vector<Counterexample> counterexamples;
    double elapsed_seconds = 0.0;
};

struct VerifyOptions {
    unsigned threads = 0;
    std::size_t max_counterexamples = 100;
    /// Confounder cap for the post-treatment family (t3 only).
    std::size_t max_confounders = 1;
};

VerificationReport verify_theorem(Theorem t, const VerifyOptions& options = {});

/// Names accepted by load_fixture / check_fixture.
std::vector<std::string> fixture_names();
graph::Dag load_fixture(std::string_view name);

/// Every catalog query whose nodes all exist in the fixture graph.
std::map<std::string, bool> check_fixture(std::string_view name);
std::map<std::string, bool> check_all_queries(const graph::Dag& g);

}  // namespace medtest::theorems

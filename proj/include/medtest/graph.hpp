#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace medtest::graph {

using NodeIndex = std::uint32_t;

/// Symbolic node name: Y, D, M, Z1, Z2, X, W, or U_<a><b> for the latent
/// confounder of the observed pair (a, b).
struct NodeId {
    std::string label;

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Latent nodes are recognised by the `U_` prefix.
bool is_latent_label(std::string_view label);

/// Conventional label of the latent confounder of `a` and `b`.
std::string confounder_label(std::string_view a, std::string_view b);

struct Edge {
    NodeIndex from;
    NodeIndex to;

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Unvalidated node and edge lists; the input to Dag::build.
struct GraphSpec {
    std::vector<NodeId> nodes;
    std::vector<bool> observed;
    std::vector<Edge> edges;

    /// Index of `label`, adding it if absent. Latent status follows the label.
    NodeIndex node(std::string_view label);
    void add_edge(std::string_view from, std::string_view to);
    std::optional<NodeIndex> find(std::string_view label) const;
};

bool is_acyclic(std::size_t node_count, std::span<const Edge> edges);
bool is_acyclic(const GraphSpec& spec);

/// Immutable directed acyclic graph with explicit latent confounder nodes.
///
/// Invariants enforced by build(): unique labels, edge endpoints in range,
/// no duplicate edges or self loops, no directed cycle, and every latent node
/// has no parents and exactly two children whose labels it names.
class Dag {
public:
    Dag() = default;

    /// Validates `spec` and builds the graph; throws graph_error on violation.
    static Dag build(GraphSpec spec);

    std::size_t node_count() const { return labels_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const std::string& label(NodeIndex v) const { return labels_[v]; }
    bool observed(NodeIndex v) const { return observed_[v] != 0; }
    std::span<const NodeIndex> parents(NodeIndex v) const { return parents_[v]; }
    std::span<const NodeIndex> children(NodeIndex v) const { return children_[v]; }
    std::span<const Edge> edges() const { return edges_; }
    bool has_edge(NodeIndex from, NodeIndex to) const;

    std::optional<NodeIndex> find(std::string_view label) const;
    /// Like find(), but throws invalid_query for unknown labels.
    NodeIndex index_of(std::string_view label) const;

private:
    friend Dag mutilate(const Dag& g, std::span<const NodeIndex> cut);

    void index_edges();

    std::vector<std::string> labels_;
    std::vector<char> observed_;
    std::vector<Edge> edges_;
    std::vector<std::vector<NodeIndex>> parents_;
    std::vector<std::vector<NodeIndex>> children_;
};

bool is_acyclic(const Dag& g);

/// Interventional graph: removes every edge whose source lies in `cut`.
/// `cut` must contain observed nodes only (invalid_query otherwise).
Dag mutilate(const Dag& g, std::span<const NodeIndex> cut);
Dag mutilate(const Dag& g, const std::vector<std::string>& cut);

/// True when a directed path from `from` to `to` exists (length >= 1).
bool has_directed_path(const Dag& g, NodeIndex from, NodeIndex to);

/// d-separation of node sets `a` and `b` given `c`, by reachability of active
/// trails (ancestors of `c` computed first, then a breadth-first search over
/// (node, direction) states). Sets must be pairwise disjoint.
bool is_dseparated(const Dag& g, std::span<const NodeIndex> a, std::span<const NodeIndex> b,
                   std::span<const NodeIndex> c);
bool is_dseparated(const Dag& g, const std::vector<std::string>& a, const std::vector<std::string>& b,
                   const std::vector<std::string>& c);

/// Reference implementation for testing: enumerates every simple path of the
/// skeleton between `a` and `b` and applies the blocking rules to each one.
/// Refuses graphs with more than kOracleMaxNodes nodes.
inline constexpr std::size_t kOracleMaxNodes = 12;
bool dsep_bruteforce_oracle(const Dag& g, std::span<const NodeIndex> a, std::span<const NodeIndex> b,
                            std::span<const NodeIndex> c);

/// Plain-text edge list: one `from -> to` per line, `#` comments, a bare
/// label declares an isolated node, `U_<a><b>` names a latent confounder.
Dag parse_edge_list(std::string_view text);
Dag load_edge_list(const std::filesystem::path& path);
std::string to_edge_list(const Dag& g);

}  // namespace medtest::graph

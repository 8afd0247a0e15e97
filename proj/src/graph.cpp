#include "medtest/graph.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "medtest/error.hpp"

namespace medtest::graph {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

void check_disjoint(const Dag& g, std::span<const NodeIndex> a, std::span<const NodeIndex> b,
                    std::span<const NodeIndex> c) {
    std::vector<char> seen(g.node_count(), 0);
    for (auto set : {a, b, c}) {
        for (NodeIndex v : set) {
            if (v >= g.node_count()) throw invalid_query("node index out of range");
        }
    }
    for (auto set : {a, b, c}) {
        std::vector<char> here(g.node_count(), 0);
        for (NodeIndex v : set) here[v] = 1;
        for (std::size_t v = 0; v < here.size(); ++v) {
            if (!here[v]) continue;
            if (seen[v]) throw invalid_query("query sets overlap at node " + g.label(static_cast<NodeIndex>(v)));
            seen[v] = 1;
        }
    }
}

/// Marks every node that is in `c` or has a descendant in `c`.
std::vector<char> ancestors_of(const Dag& g, std::span<const NodeIndex> c) {
    std::vector<char> mark(g.node_count(), 0);
    std::vector<NodeIndex> stack(c.begin(), c.end());
    while (!stack.empty()) {
        const NodeIndex v = stack.back();
        stack.pop_back();
        if (mark[v]) continue;
        mark[v] = 1;
        for (NodeIndex p : g.parents(v)) {
            if (!mark[p]) stack.push_back(p);
        }
    }
    return mark;
}

std::vector<NodeIndex> resolve(const Dag& g, const std::vector<std::string>& labels) {
    std::vector<NodeIndex> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(g.index_of(l));
    return out;
}

}  // namespace

bool is_latent_label(std::string_view label) { return label.starts_with("U_"); }

std::string confounder_label(std::string_view a, std::string_view b) {
    std::string out = "U_";
    out += a;
    out += b;
    return out;
}

NodeIndex GraphSpec::node(std::string_view label) {
    if (auto found = find(label)) return *found;
    nodes.push_back(NodeId{std::string(label)});
    observed.push_back(!is_latent_label(label));
    return static_cast<NodeIndex>(nodes.size() - 1);
}

void GraphSpec::add_edge(std::string_view from, std::string_view to) {
    const NodeIndex f = node(from);
    const NodeIndex t = node(to);
    edges.push_back(Edge{f, t});
}

std::optional<NodeIndex> GraphSpec::find(std::string_view label) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].label == label) return static_cast<NodeIndex>(i);
    }
    return std::nullopt;
}

bool is_acyclic(std::size_t node_count, std::span<const Edge> edges) {
    std::vector<std::size_t> indegree(node_count, 0);
    std::vector<std::vector<NodeIndex>> out(node_count);
    for (const Edge& e : edges) {
        if (e.from >= node_count || e.to >= node_count) return false;
        out[e.from].push_back(e.to);
        ++indegree[e.to];
    }
    std::vector<NodeIndex> ready;
    for (std::size_t v = 0; v < node_count; ++v) {
        if (indegree[v] == 0) ready.push_back(static_cast<NodeIndex>(v));
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        const NodeIndex v = ready.back();
        ready.pop_back();
        ++visited;
        for (NodeIndex w : out[v]) {
            if (--indegree[w] == 0) ready.push_back(w);
        }
    }
    return visited == node_count;
}

bool is_acyclic(const GraphSpec& spec) { return is_acyclic(spec.nodes.size(), spec.edges); }

bool is_acyclic(const Dag& g) { return is_acyclic(g.node_count(), g.edges()); }

Dag Dag::build(GraphSpec spec) {
    const std::size_t n = spec.nodes.size();
    if (spec.observed.size() != n) throw graph_error("observed mask does not match node list");
    for (std::size_t i = 0; i < n; ++i) {
        if (spec.nodes[i].label.empty()) throw graph_error("empty node label");
        for (std::size_t j = 0; j < i; ++j) {
            if (spec.nodes[i].label == spec.nodes[j].label) {
                throw graph_error("duplicate node label " + spec.nodes[i].label);
            }
        }
    }
    for (const Edge& e : spec.edges) {
        if (e.from >= n || e.to >= n) throw graph_error("edge endpoint out of range");
        if (e.from == e.to) throw graph_error("self loop at " + spec.nodes[e.from].label);
    }
    std::vector<Edge> sorted = spec.edges;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw graph_error("duplicate edge");
    }
    if (!is_acyclic(n, spec.edges)) throw graph_error("graph contains a directed cycle");

    Dag g;
    g.labels_.reserve(n);
    for (auto& node : spec.nodes) g.labels_.push_back(std::move(node.label));
    g.observed_.assign(spec.observed.begin(), spec.observed.end());
    g.edges_ = std::move(spec.edges);
    g.index_edges();

    for (NodeIndex v = 0; v < n; ++v) {
        if (g.observed(v)) continue;
        const auto& kids = g.children_[v];
        if (!g.parents_[v].empty() || kids.size() != 2) {
            throw graph_error("latent node " + g.labels_[v] + " must have no parents and exactly two children");
        }
        const std::string& a = g.labels_[kids[0]];
        const std::string& b = g.labels_[kids[1]];
        if (g.labels_[v] != confounder_label(a, b) && g.labels_[v] != confounder_label(b, a)) {
            throw graph_error("latent node " + g.labels_[v] + " does not name the pair " + a + ", " + b);
        }
    }
    return g;
}

void Dag::index_edges() {
    const std::size_t n = labels_.size();
    parents_.assign(n, {});
    children_.assign(n, {});
    for (const Edge& e : edges_) {
        children_[e.from].push_back(e.to);
        parents_[e.to].push_back(e.from);
    }
}

bool Dag::has_edge(NodeIndex from, NodeIndex to) const {
    if (from >= node_count()) return false;
    const auto& kids = children_[from];
    return std::find(kids.begin(), kids.end(), to) != kids.end();
}

std::optional<NodeIndex> Dag::find(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == label) return static_cast<NodeIndex>(i);
    }
    return std::nullopt;
}

NodeIndex Dag::index_of(std::string_view label) const {
    if (auto v = find(label)) return *v;
    throw invalid_query("unknown node " + std::string(label));
}

Dag mutilate(const Dag& g, std::span<const NodeIndex> cut) {
    std::vector<char> in_cut(g.node_count(), 0);
    for (NodeIndex v : cut) {
        if (v >= g.node_count()) throw invalid_query("mutilation node out of range");
        if (!g.observed(v)) throw invalid_query("cannot intervene on latent node " + g.label(v));
        in_cut[v] = 1;
    }
    Dag out;
    out.labels_ = g.labels_;
    out.observed_ = g.observed_;
    out.edges_.reserve(g.edges_.size());
    for (const Edge& e : g.edges_) {
        if (!in_cut[e.from]) out.edges_.push_back(e);
    }
    out.index_edges();
    return out;
}

Dag mutilate(const Dag& g, const std::vector<std::string>& cut) { return mutilate(g, resolve(g, cut)); }

bool has_directed_path(const Dag& g, NodeIndex from, NodeIndex to) {
    std::vector<char> seen(g.node_count(), 0);
    std::vector<NodeIndex> stack(g.children(from).begin(), g.children(from).end());
    while (!stack.empty()) {
        const NodeIndex v = stack.back();
        stack.pop_back();
        if (v == to) return true;
        if (seen[v]) continue;
        seen[v] = 1;
        for (NodeIndex w : g.children(v)) stack.push_back(w);
    }
    return false;
}

bool is_dseparated(const Dag& g, std::span<const NodeIndex> a, std::span<const NodeIndex> b,
                   std::span<const NodeIndex> c) {
    check_disjoint(g, a, b, c);
    const std::size_t n = g.node_count();
    const std::vector<char> anc = ancestors_of(g, c);
    std::vector<char> in_c(n, 0), in_b(n, 0);
    for (NodeIndex v : c) in_c[v] = 1;
    for (NodeIndex v : b) in_b[v] = 1;

    // State (v, up): v reached from one of its children, i.e. the trail
    // arrives at v against an edge; (v, down): reached from a parent.
    std::vector<char> visited_up(n, 0), visited_down(n, 0);
    struct State {
        NodeIndex node;
        bool up;
    };
    std::vector<State> frontier;
    for (NodeIndex v : a) frontier.push_back({v, true});
    while (!frontier.empty()) {
        const State s = frontier.back();
        frontier.pop_back();
        auto& visited = s.up ? visited_up : visited_down;
        if (visited[s.node]) continue;
        visited[s.node] = 1;
        if (!in_c[s.node] && in_b[s.node]) return false;
        if (s.up) {
            if (in_c[s.node]) continue;
            for (NodeIndex p : g.parents(s.node)) frontier.push_back({p, true});
            for (NodeIndex ch : g.children(s.node)) frontier.push_back({ch, false});
        } else {
            if (!in_c[s.node]) {
                for (NodeIndex ch : g.children(s.node)) frontier.push_back({ch, false});
            }
            if (anc[s.node]) {
                for (NodeIndex p : g.parents(s.node)) frontier.push_back({p, true});
            }
        }
    }
    return true;
}

bool is_dseparated(const Dag& g, const std::vector<std::string>& a, const std::vector<std::string>& b,
                   const std::vector<std::string>& c) {
    const auto ia = resolve(g, a);
    const auto ib = resolve(g, b);
    const auto ic = resolve(g, c);
    return is_dseparated(g, ia, ib, ic);
}

bool dsep_bruteforce_oracle(const Dag& g, std::span<const NodeIndex> a, std::span<const NodeIndex> b,
                            std::span<const NodeIndex> c) {
    if (g.node_count() > kOracleMaxNodes) {
        throw invalid_query("path-enumeration oracle limited to " + std::to_string(kOracleMaxNodes) + " nodes");
    }
    check_disjoint(g, a, b, c);
    const std::size_t n = g.node_count();
    const std::vector<char> anc = ancestors_of(g, c);
    std::vector<char> in_c(n, 0), in_b(n, 0);
    for (NodeIndex v : c) in_c[v] = 1;
    for (NodeIndex v : b) in_b[v] = 1;

    std::vector<std::vector<NodeIndex>> neighbours(n);
    for (const Edge& e : g.edges()) {
        neighbours[e.from].push_back(e.to);
        neighbours[e.to].push_back(e.from);
    }

    auto path_is_open = [&](const std::vector<NodeIndex>& path) {
        for (std::size_t k = 1; k + 1 < path.size(); ++k) {
            const NodeIndex prev = path[k - 1], mid = path[k], next = path[k + 1];
            const bool collider = g.has_edge(prev, mid) && g.has_edge(next, mid);
            if (collider) {
                if (!anc[mid]) return false;
            } else if (in_c[mid]) {
                return false;
            }
        }
        return true;
    };

    std::vector<NodeIndex> path;
    std::vector<char> on_path(n, 0);
    bool open_found = false;
    std::function<void(NodeIndex)> extend = [&](NodeIndex v) {
        if (open_found) return;
        if (path.size() > 1 && in_b[v]) {
            if (path_is_open(path)) open_found = true;
        }
        for (NodeIndex w : neighbours[v]) {
            if (on_path[w]) continue;
            on_path[w] = 1;
            path.push_back(w);
            extend(w);
            path.pop_back();
            on_path[w] = 0;
        }
    };
    for (NodeIndex start : a) {
        path.assign(1, start);
        std::fill(on_path.begin(), on_path.end(), 0);
        on_path[start] = 1;
        extend(start);
        if (open_found) return false;
    }
    return true;
}

Dag parse_edge_list(std::string_view text) {
    GraphSpec spec;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto arrow = line.find("->");
        if (arrow == std::string_view::npos) {
            if (line.find_first_of(" \t") != std::string_view::npos) {
                throw graph_error("line " + std::to_string(line_no) + ": expected `from -> to`");
            }
            spec.node(line);
            continue;
        }
        const auto from = trim(line.substr(0, arrow));
        const auto to = trim(line.substr(arrow + 2));
        if (from.empty() || to.empty() || to.find("->") != std::string_view::npos) {
            throw graph_error("line " + std::to_string(line_no) + ": expected `from -> to`");
        }
        spec.add_edge(from, to);
    }
    return Dag::build(std::move(spec));
}

Dag load_edge_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw graph_error("cannot open graph file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_edge_list(buffer.str());
}

std::string to_edge_list(const Dag& g) {
    std::ostringstream out;
    std::vector<char> touched(g.node_count(), 0);
    for (const Edge& e : g.edges()) touched[e.from] = touched[e.to] = 1;
    for (NodeIndex v = 0; v < g.node_count(); ++v) {
        if (!touched[v]) out << g.label(v) << '\n';
    }
    for (const Edge& e : g.edges()) out << g.label(e.from) << " -> " << g.label(e.to) << '\n';
    return out.str();
}

}  // namespace medtest::graph

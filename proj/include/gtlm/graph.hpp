#pragma once

#include <algorithm>
#include <deque>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gtlm/common.hpp"

namespace gtlm {

struct NodeRecord {
    std::string node_id;
    std::string raw_text;
};

// Directed text-attributed graph. Node 0 is the generation target; the
// question/label pair (when present) is appended to its text at layout
// time and the label span is supervised.
struct TextAttributedGraph {
    std::vector<NodeRecord> nodes;
    std::vector<std::pair<int, int>> edges;
    std::string question;  // empty until append_question
    std::string label;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_edges() const { return static_cast<int>(edges.size()); }

    bool has_question() const { return !question.empty(); }

    // Target node text as serialized for the model: raw_text plus the
    // question template. `with_label` controls whether the supervised
    // label is included (training) or left open for decoding.
    std::string target_text(bool with_label) const {
        std::string t = nodes.at(0).raw_text;
        if (has_question()) {
            t += "\n\n" + question + "\n A: ";
            if (with_label) t += label;
        }
        return t;
    }
};

struct ValidationIssue {
    std::string code;
    std::string detail;
};

inline std::vector<ValidationIssue> validate_graph(const TextAttributedGraph& g) {
    std::vector<ValidationIssue> issues;
    if (g.nodes.empty()) {
        issues.push_back({"MissingTarget", "graph has no nodes; node 0 must exist"});
        return issues;
    }
    const int n = g.num_nodes();
    for (int i = 0; i < n; ++i) {
        if (g.nodes[i].raw_text.empty())
            issues.push_back({"EmptyText", "node " + std::to_string(i) + " has empty raw_text"});
    }
    std::set<std::pair<int, int>> seen;
    for (const auto& [src, dst] : g.edges) {
        if (src < 0 || src >= n || dst < 0 || dst >= n) {
            issues.push_back({"DanglingEndpoint",
                              "edge (" + std::to_string(src) + ", " + std::to_string(dst) +
                                  ") references a missing node"});
            continue;
        }
        if (src == dst)
            issues.push_back({"SelfLoop", "self-loop at node " + std::to_string(src)});
        if (!seen.insert({src, dst}).second)
            issues.push_back({"DuplicateEdge",
                              "edge (" + std::to_string(src) + ", " + std::to_string(dst) +
                                  ") appears more than once"});
    }
    return issues;
}

inline void require_valid(const TextAttributedGraph& g) {
    auto issues = validate_graph(g);
    if (!issues.empty()) fail(issues.front().code, issues.front().detail);
}

// Bipartite incidence lift: each directed edge e=(u,v) becomes a node
// with text "(u, v)" on the path u -> e -> v. Original node order is
// preserved and edge-nodes are appended in edge order.
inline TextAttributedGraph to_incidence(const TextAttributedGraph& g) {
    require_valid(g);
    TextAttributedGraph out;
    out.nodes = g.nodes;
    out.question = g.question;
    out.label = g.label;
    const int n = g.num_nodes();
    for (int e = 0; e < g.num_edges(); ++e) {
        const auto& [u, v] = g.edges[e];
        NodeRecord rec;
        rec.node_id = "edge_" + std::to_string(e);
        rec.raw_text = "(" + std::to_string(u) + ", " + std::to_string(v) + ")";
        out.nodes.push_back(rec);
        out.edges.push_back({u, n + e});
        out.edges.push_back({n + e, v});
    }
    return out;
}

// Closeness-first ego sample on the undirected view: whole BFS rings are
// admitted while the budget allows; a partially affordable ring is
// subsampled uniformly under `seed`. The center is relabeled to node 0
// and all induced edges are retained.
inline TextAttributedGraph sample_ego_subgraph(const TextAttributedGraph& g, int center,
                                               int max_neighbors, int hops,
                                               std::uint64_t seed) {
    const int n = g.num_nodes();
    if (center < 0 || center >= n) fail("InvalidCenter", "center index out of range");
    if (hops < 1) fail("InvalidCenter", "hops must be >= 1");

    std::vector<std::vector<int>> adj(n);
    for (const auto& [u, v] : g.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }

    std::vector<int> dist(n, -1);
    dist[center] = 0;
    std::deque<int> queue{center};
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        if (dist[u] >= hops) continue;
        for (int v : adj[u])
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
    }

    Rng rng = make_rng(seed);
    std::vector<int> chosen{center};
    int budget = max_neighbors;
    for (int ring = 1; ring <= hops && budget > 0; ++ring) {
        std::vector<int> members;
        for (int v = 0; v < n; ++v)
            if (dist[v] == ring) members.push_back(v);
        if (members.empty()) break;
        if (static_cast<int>(members.size()) > budget) {
            std::shuffle(members.begin(), members.end(), rng);
            members.resize(budget);
            std::sort(members.begin(), members.end());
        }
        budget -= static_cast<int>(members.size());
        chosen.insert(chosen.end(), members.begin(), members.end());
    }

    std::vector<int> relabel(n, -1);
    for (int i = 0; i < static_cast<int>(chosen.size()); ++i) relabel[chosen[i]] = i;

    TextAttributedGraph out;
    out.question = g.question;
    out.label = g.label;
    for (int v : chosen) out.nodes.push_back(g.nodes[v]);
    for (const auto& [u, v] : g.edges)
        if (relabel[u] >= 0 && relabel[v] >= 0) out.edges.push_back({relabel[u], relabel[v]});
    return out;
}

inline TextAttributedGraph append_question(const TextAttributedGraph& g,
                                           const std::string& question,
                                           const std::string& label) {
    require_valid(g);
    if (question.empty()) fail("EmptyQuestion", "question must be non-empty");
    if (label.empty()) fail("EmptyQuestion", "label must be non-empty");
    if (g.has_question()) fail("QuestionAlreadyPresent", "question template already appended");
    TextAttributedGraph out = g;
    out.question = question;
    out.label = label;
    return out;
}

// --- line-delimited dataset format ------------------------------------

inline nlohmann::json graph_to_json(const TextAttributedGraph& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nr : g.nodes) nodes.push_back({{"id", nr.node_id}, {"text", nr.raw_text}});
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [u, v] : g.edges) edges.push_back({u, v});
    return {{"nodes", nodes}, {"edges", edges}, {"question", g.question}, {"label", g.label}};
}

inline TextAttributedGraph graph_from_json(const nlohmann::json& j) {
    TextAttributedGraph g;
    for (const auto& nj : j.at("nodes"))
        g.nodes.push_back({nj.at("id").get<std::string>(), nj.at("text").get<std::string>()});
    for (const auto& ej : j.at("edges"))
        g.edges.push_back({ej.at(0).get<int>(), ej.at(1).get<int>()});
    g.question = j.value("question", "");
    g.label = j.value("label", "");
    return g;
}

inline void save_graphs(const std::string& path, const std::vector<TextAttributedGraph>& graphs) {
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot open " + path + " for writing");
    for (const auto& g : graphs) out << graph_to_json(g).dump() << "\n";
}

inline std::vector<TextAttributedGraph> load_graphs(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open " + path);
    std::vector<TextAttributedGraph> graphs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            graphs.push_back(graph_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail("ParseError", path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return graphs;
}

}  // namespace gtlm

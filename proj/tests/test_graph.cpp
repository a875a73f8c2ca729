#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "gtlm/graph.hpp"

using namespace gtlm;

namespace {

TextAttributedGraph triangle() {
    TextAttributedGraph g;
    g.nodes = {{"a", "alpha"}, {"b", "beta"}, {"c", "gamma"}};
    g.edges = {{0, 1}, {1, 2}, {2, 0}};
    return g;
}

bool has_issue(const std::vector<ValidationIssue>& issues, const std::string& code) {
    for (const auto& i : issues)
        if (i.code == code) return true;
    return false;
}

}  // namespace

TEST_CASE("validation flags every defect class") {
    TextAttributedGraph empty;
    CHECK(has_issue(validate_graph(empty), "MissingTarget"));

    TextAttributedGraph g = triangle();
    g.nodes[1].raw_text = "";
    g.edges.push_back({0, 5});
    g.edges.push_back({2, 2});
    g.edges.push_back({0, 1});
    auto issues = validate_graph(g);
    CHECK(has_issue(issues, "EmptyText"));
    CHECK(has_issue(issues, "DanglingEndpoint"));
    CHECK(has_issue(issues, "SelfLoop"));
    CHECK(has_issue(issues, "DuplicateEdge"));

    CHECK(validate_graph(triangle()).empty());
}

TEST_CASE("incidence lift of a 3-cycle is bipartite with 6 nodes and 6 edges") {
    TextAttributedGraph inc = to_incidence(triangle());
    REQUIRE(inc.num_nodes() == 6);
    REQUIRE(inc.num_edges() == 6);
    // every edge connects an original node (id < 3) and an edge node
    for (const auto& [u, v] : inc.edges) {
        bool u_orig = u < 3, v_orig = v < 3;
        CHECK(u_orig != v_orig);
    }
    CHECK(inc.nodes[3].raw_text == "(0, 1)");
    CHECK(inc.nodes[4].raw_text == "(1, 2)");
    CHECK(inc.nodes[5].raw_text == "(2, 0)");
    // edge e = (u, v) becomes the path u -> e -> v
    CHECK(inc.edges[0] == std::pair<int, int>(0, 3));
    CHECK(inc.edges[1] == std::pair<int, int>(3, 1));
}

TEST_CASE("ego sampling keeps whole rings, subsamples the last, relabels center to 0") {
    // star of 6 leaves around node 0, plus a 2-hop tail
    TextAttributedGraph g;
    for (int i = 0; i < 8; ++i) g.nodes.push_back({"n" + std::to_string(i), "x"});
    for (int i = 1; i <= 6; ++i) g.edges.push_back({0, i});
    g.edges.push_back({6, 7});

    TextAttributedGraph full = sample_ego_subgraph(g, 0, 10, 2, 1);
    CHECK(full.num_nodes() == 8);
    CHECK(full.nodes[0].node_id == "n0");

    TextAttributedGraph capped = sample_ego_subgraph(g, 0, 4, 2, 1);
    CHECK(capped.num_nodes() == 5);  // center + 4 ring-1 nodes
    CHECK(capped.nodes[0].node_id == "n0");

    // determinism: same seed, same sample; different seed may differ
    TextAttributedGraph again = sample_ego_subgraph(g, 0, 4, 2, 1);
    REQUIRE(again.num_nodes() == capped.num_nodes());
    for (int i = 0; i < capped.num_nodes(); ++i)
        CHECK(again.nodes[i].node_id == capped.nodes[i].node_id);

    // induced edges only reference retained nodes
    for (const auto& [u, v] : capped.edges) {
        CHECK(u < capped.num_nodes());
        CHECK(v < capped.num_nodes());
    }

    CHECK_THROWS_AS(sample_ego_subgraph(g, 99, 4, 2, 1), GtlmError);
}

TEST_CASE("append_question validates and refuses double application") {
    TextAttributedGraph g = triangle();
    CHECK_THROWS_AS(append_question(g, "", "Yes"), GtlmError);
    CHECK_THROWS_AS(append_question(g, "Connected?", ""), GtlmError);
    TextAttributedGraph q = append_question(g, "Connected?", "Yes");
    CHECK(q.target_text(true) == "alpha\n\nConnected?\n A: Yes");
    CHECK(q.target_text(false) == "alpha\n\nConnected?\n A: ");
    CHECK_THROWS_AS(append_question(q, "Again?", "No"), GtlmError);
}

TEST_CASE("jsonl round trip preserves every field") {
    std::string path = "test_graph_roundtrip.jsonl";
    TextAttributedGraph q = append_question(triangle(), "Connected?", "Yes");
    save_graphs(path, {q, triangle()});
    auto back = load_graphs(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].question == "Connected?");
    CHECK(back[0].label == "Yes");
    CHECK(back[0].edges == q.edges);
    CHECK(back[0].nodes[2].raw_text == "gamma");
    CHECK(back[1].question.empty());
    std::remove(path.c_str());
}

TEST_CASE("malformed jsonl reports path and line") {
    std::string path = "test_graph_bad.jsonl";
    {
        std::ofstream out(path);
        out << graph_to_json(triangle()).dump() << "\n";
        out << "{not json\n";
    }
    try {
        load_graphs(path);
        FAIL("expected ParseError");
    } catch (const GtlmError& e) {
        CHECK(e.code() == "ParseError");
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
    std::remove(path.c_str());
}

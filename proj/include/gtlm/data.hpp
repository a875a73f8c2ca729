#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gtlm/common.hpp"
#include "gtlm/graph.hpp"

namespace gtlm {

struct TaskSpec {
    std::string task;
    int count = 100;
    std::uint64_t seed = 0;
    int min_nodes = 5;
    int max_nodes = 15;
    double geometric_p = 0.5;  // KG edge-count distribution
};

namespace datagen {

inline int rand_int(Rng& rng, int lo, int hi) {  // inclusive
    return lo + (int)(rng() % (std::uint64_t)(hi - lo + 1));
}

inline bool rand_bool(Rng& rng, double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

inline int rand_geometric(Rng& rng, double p, int cap) {
    int k = 1;
    while (k < cap && !rand_bool(rng, p)) ++k;
    return k;
}

// Undirected random graph over labels 1..n (node 0 reserved for the
// prompt node); every undirected edge is stored as both directions.
struct UndirectedTopology {
    int n = 0;
    std::set<std::pair<int, int>> pairs;  // (a < b), labels 1..n

    bool has(int a, int b) const {
        return pairs.count({std::min(a, b), std::max(a, b)}) > 0;
    }
    std::vector<std::vector<int>> adjacency() const {
        std::vector<std::vector<int>> adj(n + 1);
        for (auto [a, b] : pairs) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        return adj;
    }
};

inline UndirectedTopology random_undirected(Rng& rng, int n, double p) {
    UndirectedTopology t;
    t.n = n;
    for (int a = 1; a <= n; ++a)
        for (int b = a + 1; b <= n; ++b)
            if (rand_bool(rng, p)) t.pairs.insert({a, b});
    return t;
}

inline std::vector<int> bfs_distances(const UndirectedTopology& t, int start) {
    auto adj = t.adjacency();
    std::vector<int> dist(t.n + 1, -1);
    dist[start] = 0;
    std::vector<int> queue{start};
    for (size_t q = 0; q < queue.size(); ++q)
        for (int v : adj[queue[q]])
            if (dist[v] < 0) {
                dist[v] = dist[queue[q]] + 1;
                queue.push_back(v);
            }
    return dist;
}

inline bool has_cycle(const UndirectedTopology& t) {
    // Union-find free: DFS with parent tracking.
    auto adj = t.adjacency();
    std::vector<int> state(t.n + 1, 0);
    for (int s = 1; s <= t.n; ++s) {
        if (state[s]) continue;
        std::vector<std::pair<int, int>> stack{{s, 0}};
        state[s] = 1;
        while (!stack.empty()) {
            auto [u, parent] = stack.back();
            stack.pop_back();
            for (int v : adj[u]) {
                if (v == parent) {
                    parent = -1;  // skip one copy of the tree edge back
                    continue;
                }
                if (state[v]) return true;
                state[v] = 1;
                stack.push_back({v, u});
            }
        }
    }
    return false;
}

inline int triangle_count(const UndirectedTopology& t) {
    int count = 0;
    for (int a = 1; a <= t.n; ++a)
        for (int b = a + 1; b <= t.n; ++b)
            for (int c = b + 1; c <= t.n; ++c)
                if (t.has(a, b) && t.has(b, c) && t.has(a, c)) ++count;
    return count;
}

// Builds the text-attributed graph: prompt node 0 plus nodes 1..n whose
// texts are their own IDs; directed prompt edges point at referenced nodes.
inline TextAttributedGraph attach_prompt(const UndirectedTopology& t,
                                         const std::vector<int>& referenced,
                                         const std::string& question,
                                         const std::string& label) {
    TextAttributedGraph g;
    g.nodes.push_back({"prompt", "Q"});
    for (int i = 1; i <= t.n; ++i)
        g.nodes.push_back({"n" + std::to_string(i), std::to_string(i)});
    for (auto [a, b] : t.pairs) {
        g.edges.push_back({a, b});
        g.edges.push_back({b, a});
    }
    for (int r : referenced) g.edges.push_back({0, r});
    return append_question(g, question, label);
}

}  // namespace datagen

// --- GraphQA-style abstract tasks -----------------------------------------

inline std::vector<TextAttributedGraph> gen_graphqa(const TaskSpec& spec) {
    using namespace datagen;
    std::vector<TextAttributedGraph> out;
    Rng rng = make_rng(spec.seed);
    int attempts = 0;
    while ((int)out.size() < spec.count) {
        if (++attempts > spec.count * 200)
            fail("RejectionBudgetExceeded", "task " + spec.task);
        int n = rand_int(rng, spec.min_nodes, spec.max_nodes);
        UndirectedTopology t = random_undirected(rng, n, 0.3);

        if (spec.task == "node_count") {
            out.push_back(attach_prompt(t, {}, "How many nodes are in the graph?",
                                        std::to_string(n)));
        } else if (spec.task == "edge_count") {
            out.push_back(attach_prompt(t, {}, "How many edges are in the graph?",
                                        std::to_string((int)t.pairs.size())));
        } else if (spec.task == "cycle_check") {
            out.push_back(attach_prompt(t, {}, "Does the graph contain a cycle?",
                                        has_cycle(t) ? "Yes" : "No"));
        } else if (spec.task == "triangle_count") {
            out.push_back(attach_prompt(t, {}, "How many triangles are in the graph?",
                                        std::to_string(triangle_count(t))));
        } else if (spec.task == "node_degree") {
            int i = rand_int(rng, 1, n);
            int deg = (int)t.adjacency()[i].size();
            out.push_back(attach_prompt(t, {i},
                                        "What is the degree of node " + std::to_string(i) + "?",
                                        std::to_string(deg)));
        } else if (spec.task == "connected_nodes") {
            int i = rand_int(rng, 1, n);
            auto nb = t.adjacency()[i];
            std::sort(nb.begin(), nb.end());
            std::string label = "none";
            if (!nb.empty()) {
                std::ostringstream os;
                for (size_t j = 0; j < nb.size(); ++j) os << (j ? ", " : "") << nb[j];
                label = os.str();
            }
            out.push_back(attach_prompt(
                t, {i}, "List the nodes connected to node " + std::to_string(i) + ".", label));
        } else if (spec.task == "edge_existence") {
            int a = rand_int(rng, 1, n), b = rand_int(rng, 1, n);
            if (a == b) continue;
            out.push_back(attach_prompt(t, {a, b},
                                        "Is there an edge between node " + std::to_string(a) +
                                            " and node " + std::to_string(b) + "?",
                                        t.has(a, b) ? "Yes" : "No"));
        } else if (spec.task == "reachability") {
            int a = rand_int(rng, 1, n), b = rand_int(rng, 1, n);
            if (a == b) continue;
            bool reach = bfs_distances(t, a)[b] >= 0;
            // keep the label distribution roughly balanced
            if (reach != (out.size() % 2 == 0)) continue;
            out.push_back(attach_prompt(t, {a, b},
                                        "Is there a path from node " + std::to_string(a) +
                                            " to node " + std::to_string(b) + "?",
                                        reach ? "Yes" : "No"));
        } else if (spec.task == "shortest_path") {
            int a = rand_int(rng, 1, n), b = rand_int(rng, 1, n);
            if (a == b) continue;
            int d = bfs_distances(t, a)[b];
            if (d < 1) continue;
            out.push_back(attach_prompt(
                t, {a, b},
                "What is the length of the shortest path from node " + std::to_string(a) +
                    " to node " + std::to_string(b) + "?",
                std::to_string(d)));
        } else {
            fail("UnknownTask", spec.task);
        }
    }
    return out;
}

// Directed reachability over random DAGs. Question pairs come in
// forward/reverse twins so the symmetrized features cannot separate the
// labels; direction is the only signal. The prompt arcs encode the query
// roles as flow through the prompt node (qa -> prompt -> qb, matching the
// claimed direction), so a "Yes" instance is globally acyclic while its
// reversed twin contains a directed cycle src ~> dst -> prompt -> src.
// That cycle flux is exactly what the magnetic spectrum is sensitive to,
// while the symmetrized shortest-path buckets and the one-step walk
// profile of the twins agree up to the role swap.
inline std::vector<TextAttributedGraph> gen_directed_reachability(const TaskSpec& spec) {
    using namespace datagen;
    std::vector<TextAttributedGraph> out;
    Rng rng = make_rng(spec.seed);
    int attempts = 0;
    while ((int)out.size() < spec.count) {
        if (++attempts > spec.count * 200)
            fail("RejectionBudgetExceeded", "directed_reachability");
        int n = rand_int(rng, spec.min_nodes, spec.max_nodes);
        // DAG: edges only from lower to higher label
        std::set<std::pair<int, int>> arcs;
        for (int a = 1; a <= n; ++a)
            for (int b = a + 1; b <= n; ++b)
                if (rand_bool(rng, 0.25)) arcs.insert({a, b});
        // directed BFS distances
        std::vector<std::vector<int>> adj(n + 1);
        for (auto [a, b] : arcs) adj[a].push_back(b);
        int src = rand_int(rng, 1, n);
        std::vector<int> dist(n + 1, -1);
        dist[src] = 0;
        std::vector<int> queue{src};
        for (size_t q = 0; q < queue.size(); ++q)
            for (int v : adj[queue[q]])
                if (dist[v] < 0) {
                    dist[v] = dist[queue[q]] + 1;
                    queue.push_back(v);
                }
        std::vector<int> far;
        for (int v = 1; v <= n; ++v)
            if (dist[v] >= 2) far.push_back(v);
        if (far.empty()) continue;
        int dst = far[rand_int(rng, 0, (int)far.size() - 1)];

        bool want_yes = out.size() % 2 == 0;
        // hide the topological order: nodes are relabeled by a random
        // permutation, otherwise "smaller name first" would give the label
        // away in the question text and serialization order
        std::vector<int> relabel(n + 1);
        for (int i = 1; i <= n; ++i) relabel[i] = i;
        std::shuffle(relabel.begin() + 1, relabel.end(), rng);
        int qa = relabel[want_yes ? src : dst];
        int qb = relabel[want_yes ? dst : src];
        TextAttributedGraph g;
        g.nodes.push_back({"prompt", "Q"});
        for (int i = 1; i <= n; ++i)
            g.nodes.push_back({"n" + std::to_string(i), std::to_string(i)});
        for (auto [a, b] : arcs) g.edges.push_back({relabel[a], relabel[b]});
        g.edges.push_back({qa, 0});
        g.edges.push_back({0, qb});
        out.push_back(append_question(g,
                                      "Is there a path from node " + std::to_string(qa) +
                                          " to node " + std::to_string(qb) + "?",
                                      want_yes ? "Yes" : "No"));
    }
    return out;
}

// --- letter presence (backbone warm-up corpus) ------------------------------

// Text-only curriculum in the component-probe prompt format: the label is
// "Yes" iff both queried letters appear among the node texts, so it is
// decidable from the token stream alone and carries zero information about
// the graph structure. Training a backbone on it (with biases disabled)
// teaches the format and the evidence-to-Yes/No readout without leaking
// anything a structural task could be solved with. Half the instances use
// a shortened question sharing the same suffix, which keeps the letter
// offsets from the answer position identical while reducing dilution of
// the query-letter pickup early in training.
inline std::vector<TextAttributedGraph> gen_letter_presence(const TaskSpec& spec) {
    using namespace datagen;
    std::vector<TextAttributedGraph> out;
    Rng rng = make_rng(spec.seed);
    while ((int)out.size() < spec.count) {
        int n = rand_int(rng, std::min(spec.min_nodes, 3), spec.max_nodes);
        if (n > 25) continue;
        std::vector<char> alphabet;
        for (char c = 'A'; c <= 'Z'; ++c) alphabet.push_back(c);
        std::shuffle(alphabet.begin(), alphabet.end(), rng);
        bool want_yes = out.size() % 2 == 0;
        int xi = rand_int(rng, 0, n - 1);
        char x = alphabet[xi];
        char y = want_yes ? alphabet[rand_int(rng, 0, n - 1)] : alphabet[rand_int(rng, n, 25)];
        if (y == x) continue;
        std::vector<char> letters(alphabet.begin(), alphabet.begin() + n);
        // sometimes a query letter occupies two nodes: a letter found at
        // multiple positions must still read out as present
        if (n >= 4 && rand_bool(rng, 0.4)) {
            int slot = rand_int(rng, 0, n - 1);
            char dup = rand_bool(rng, 0.5) ? x : y;
            if (letters[slot] != x && letters[slot] != y && (dup == x || want_yes))
                letters[slot] = dup;
        }
        TextAttributedGraph g;
        g.nodes.push_back({"prompt", "Q"});
        for (int i = 0; i < n; ++i)
            g.nodes.push_back({"n" + std::to_string(i), std::string(1, letters[i])});
        for (int i = 2; i <= n; i += 2) {
            g.edges.push_back({i - 1, i});
            g.edges.push_back({i, i - 1});
        }
        g.edges.push_back({0, xi + 1});
        if (want_yes)
            for (int i = 0; i < n; ++i)
                if (letters[i] == y) { g.edges.push_back({0, i + 1}); break; }
        std::string prefix = rand_bool(rng, 0.5) ? std::string("Are the nodes ") : std::string();
        out.push_back(append_question(g, prefix + x + " and " + y + " connected? [Yes/No]",
                                      want_yes ? "Yes" : "No"));
    }
    return out;
}

// --- connected-component probe ---------------------------------------------

// Two or more disjoint components with single-letter node texts; the
// prompt node asks whether two letters share a component. Strictly
// balanced labels by construction.
inline std::vector<TextAttributedGraph> gen_component_probe(const TaskSpec& spec) {
    using namespace datagen;
    std::vector<TextAttributedGraph> out;
    Rng rng = make_rng(spec.seed);
    while ((int)out.size() < spec.count) {
        int n = rand_int(rng, spec.min_nodes, spec.max_nodes);
        int n_components = rand_int(rng, 2, 3);
        if (n < 2 * n_components) continue;

        // assign nodes to components, each of size >= 2
        std::vector<int> comp_of(n);
        for (int i = 0; i < n; ++i) comp_of[i] = i % n_components;
        std::shuffle(comp_of.begin(), comp_of.end(), rng);

        std::vector<char> letters(n);
        {
            std::vector<char> alphabet;
            for (char c = 'A'; c <= 'Z'; ++c) alphabet.push_back(c);
            std::shuffle(alphabet.begin(), alphabet.end(), rng);
            for (int i = 0; i < n; ++i) letters[i] = alphabet[i];
        }

        // spanning tree plus extra edges inside each component
        std::set<std::pair<int, int>> pairs;
        for (int c = 0; c < n_components; ++c) {
            std::vector<int> members;
            for (int i = 0; i < n; ++i)
                if (comp_of[i] == c) members.push_back(i);
            for (size_t k = 1; k < members.size(); ++k) {
                int prev = members[rand_int(rng, 0, (int)k - 1)];
                pairs.insert({std::min(prev, members[k]), std::max(prev, members[k])});
            }
            for (size_t a = 0; a < members.size(); ++a)
                for (size_t b = a + 1; b < members.size(); ++b)
                    if (rand_bool(rng, 0.25))
                        pairs.insert({members[a], members[b]});
        }

        bool want_yes = out.size() % 2 == 0;
        int x = rand_int(rng, 0, n - 1);
        int y = -1;
        if (want_yes) {
            // sample the partner uniformly over graph distance rather than
            // uniformly over nodes; otherwise most positive pairs are direct
            // neighbors and the long-range signal is barely represented
            std::vector<int> dist(n, -1);
            dist[x] = 0;
            std::vector<int> queue{x};
            for (size_t qh = 0; qh < queue.size(); ++qh)
                for (auto [a, b] : pairs) {
                    int u = -1;
                    if (a == queue[qh]) u = b;
                    if (b == queue[qh]) u = a;
                    if (u >= 0 && dist[u] < 0) {
                        dist[u] = dist[queue[qh]] + 1;
                        queue.push_back(u);
                    }
                }
            int max_d = 0;
            for (int i = 0; i < n; ++i)
                if (comp_of[i] == comp_of[x]) max_d = std::max(max_d, dist[i]);
            if (max_d == 0) continue;
            int d = rand_int(rng, 1, max_d);
            std::vector<int> at_d;
            for (int i = 0; i < n; ++i)
                if (comp_of[i] == comp_of[x] && dist[i] == d) at_d.push_back(i);
            y = at_d[rand_int(rng, 0, (int)at_d.size() - 1)];
        } else {
            std::vector<int> candidates;
            for (int i = 0; i < n; ++i)
                if (comp_of[i] != comp_of[x]) candidates.push_back(i);
            if (candidates.empty()) continue;
            y = candidates[rand_int(rng, 0, (int)candidates.size() - 1)];
        }

        TextAttributedGraph g;
        g.nodes.push_back({"prompt", "Q"});
        for (int i = 0; i < n; ++i)
            g.nodes.push_back({"n" + std::to_string(i), std::string(1, letters[i])});
        for (auto [a, b] : pairs) {
            g.edges.push_back({a + 1, b + 1});
            g.edges.push_back({b + 1, a + 1});
        }
        g.edges.push_back({0, x + 1});
        g.edges.push_back({0, y + 1});
        out.push_back(append_question(g,
                                      std::string("Are the nodes ") + letters[x] + " and " +
                                          letters[y] + " connected? [Yes/No]",
                                      want_yes ? "Yes" : "No"));
    }
    return out;
}

// --- family tree ------------------------------------------------------------

namespace family {

inline const std::vector<std::string>& male_names() {
    static const std::vector<std::string> v = {
        "James", "John",  "Robert", "Michael", "David", "Richard", "Joseph",
        "Thomas", "Daniel", "Matthew", "Anthony", "Mark", "Paul", "Steven"};
    return v;
}
inline const std::vector<std::string>& female_names() {
    static const std::vector<std::string> v = {
        "Mary",  "Patricia", "Jennifer", "Linda", "Elizabeth", "Barbara", "Susan",
        "Jessica", "Sarah", "Karen", "Lisa", "Nancy", "Betty", "Margaret"};
    return v;
}
inline const std::vector<std::string>& last_names() {
    static const std::vector<std::string> v = {"Smith",  "Johnson", "Williams", "Brown",
                                               "Jones",  "Garcia",  "Miller",   "Davis",
                                               "Wilson", "Moore",   "Taylor",   "Clark"};
    return v;
}
inline const std::vector<std::string>& colors() {
    static const std::vector<std::string> v = {"red",    "blue",  "green", "yellow",
                                               "purple", "orange", "teal",  "pink"};
    return v;
}
inline const std::vector<std::string>& foods() {
    static const std::vector<std::string> v = {"pasta", "sushi",  "tacos",   "pizza",
                                               "curry", "ramen",  "paella",  "falafel"};
    return v;
}
inline const std::vector<std::string>& cities() {
    static const std::vector<std::string> v = {"Paris", "Tokyo",  "Rome",   "Oslo",
                                               "Lima",  "Vienna", "Dublin", "Madrid"};
    return v;
}

struct Person {
    std::string first, last;
    bool male = false;
    int born = 0;
    std::string color, food, city;
    int spouse = -1;
    std::vector<int> children;
    std::vector<int> parents;

    std::string full_name() const { return first + " " + last; }
    std::string text() const {
        return full_name() + ". Gender: " + (male ? "male" : "female") +
               ". Born: " + std::to_string(born) + ". Favorite color: " + color +
               ". Favorite food: " + food + ". Favorite city: " + city + ".";
    }
};

struct Tree {
    std::vector<Person> people;

    int add(Rng& rng, bool male, const std::string& last, int born) {
        using datagen::rand_int;
        Person p;
        const auto& firsts = male ? male_names() : female_names();
        p.first = firsts[rand_int(rng, 0, (int)firsts.size() - 1)];
        p.last = last;
        p.male = male;
        p.born = born;
        p.color = colors()[rand_int(rng, 0, (int)colors().size() - 1)];
        p.food = foods()[rand_int(rng, 0, (int)foods().size() - 1)];
        p.city = cities()[rand_int(rng, 0, (int)cities().size() - 1)];
        people.push_back(p);
        return (int)people.size() - 1;
    }
};

inline Tree generate_tree(Rng& rng, int generations) {
    using datagen::rand_bool;
    using datagen::rand_int;
    Tree t;
    std::string family = last_names()[rand_int(rng, 0, (int)last_names().size() - 1)];
    int him = t.add(rng, true, family, 1930 + rand_int(rng, 0, 10));
    int her = t.add(rng, false, family, 1930 + rand_int(rng, 0, 10));
    t.people[him].spouse = her;
    t.people[her].spouse = him;
    std::vector<std::pair<int, int>> couples{{him, her}};
    for (int g = 1; g < generations; ++g) {
        std::vector<std::pair<int, int>> next;
        for (auto [a, b] : couples) {
            int n_children = rand_int(rng, 1, 3);
            for (int c = 0; c < n_children; ++c) {
                bool male = rand_bool(rng, 0.5);
                int born = std::max(t.people[a].born, t.people[b].born) + 20 +
                           rand_int(rng, 0, 12);
                int child = t.add(rng, male, t.people[a].last, born);
                t.people[child].parents = {a, b};
                t.people[a].children.push_back(child);
                t.people[b].children.push_back(child);
                if (g + 1 < generations && rand_bool(rng, 0.8)) {
                    int sp = t.add(rng, !male,
                                   last_names()[rand_int(rng, 0, (int)last_names().size() - 1)],
                                   born + rand_int(rng, -3, 3));
                    t.people[child].spouse = sp;
                    t.people[sp].spouse = child;
                    next.push_back({child, sp});
                }
            }
        }
        couples = std::move(next);
    }
    return t;
}

inline std::string ordinal(int k) {
    if (k == 1) return "1st";
    if (k == 2) return "2nd";
    if (k == 3) return "3rd";
    return std::to_string(k) + "th";
}

// Relatives sorted oldest first; birth-year ties broken by index order.
inline std::vector<int> sorted_relatives(const Tree& t, int anchor, const std::string& kind) {
    std::vector<int> rel;
    if (kind == "son" || kind == "daughter") {
        for (int c : t.people[anchor].children)
            if (t.people[c].male == (kind == "son")) rel.push_back(c);
    } else {  // grandson / granddaughter
        for (int c : t.people[anchor].children)
            for (int gc : t.people[c].children)
                if (t.people[gc].male == (kind == "grandson")) rel.push_back(gc);
    }
    std::stable_sort(rel.begin(), rel.end(),
                     [&](int a, int b) { return t.people[a].born < t.people[b].born; });
    return rel;
}

inline std::string attribute(const Person& p, const std::string& attr) {
    if (attr == "color") return p.color;
    if (attr == "food") return p.food;
    return p.city;
}

}  // namespace family

inline std::vector<TextAttributedGraph> gen_family_tree(const TaskSpec& spec) {
    using namespace datagen;
    std::vector<TextAttributedGraph> out;
    Rng rng = make_rng(spec.seed);
    int attempts = 0;
    const std::vector<std::string> attrs = {"color", "food", "city"};
    const std::vector<std::string> kinds = {"son", "daughter", "grandson", "granddaughter"};
    while ((int)out.size() < spec.count) {
        if (++attempts > spec.count * 300) fail("RejectionBudgetExceeded", "family_tree");
        family::Tree t = family::generate_tree(rng, 3);

        // anchors must have a unique full name in the graph
        std::map<std::string, int> name_count;
        for (const auto& p : t.people) ++name_count[p.full_name()];
        std::vector<int> anchors;
        for (int i = 0; i < (int)t.people.size(); ++i)
            if (name_count[t.people[i].full_name()] == 1) anchors.push_back(i);
        if (anchors.empty()) continue;
        int anchor = anchors[rand_int(rng, 0, (int)anchors.size() - 1)];

        std::string attr = attrs[rand_int(rng, 0, 2)];
        std::string question, label;
        if (rand_bool(rng, 0.5) && t.people[anchor].spouse >= 0) {
            question = "What is the favorite " + attr + " of " +
                       t.people[anchor].full_name() + "'s spouse?";
            label = family::attribute(t.people[t.people[anchor].spouse], attr);
        } else {
            std::string kind = kinds[rand_int(rng, 0, 3)];
            auto rel = family::sorted_relatives(t, anchor, kind);
            if (rel.empty()) continue;
            int k = rand_int(rng, 1, (int)rel.size());
            question = "What is the favorite " + attr + " of " +
                       t.people[anchor].full_name() + "'s " + family::ordinal(k) +
                       " oldest " + kind + "?";
            label = family::attribute(t.people[rel[k - 1]], attr);
        }

        // prompt node 0, people shifted by one; SPOUSE edges bidirectional,
        // CHILD edges parent -> child (direction encodes the relation kind)
        TextAttributedGraph g;
        g.nodes.push_back({"prompt", "Q"});
        for (int i = 0; i < (int)t.people.size(); ++i)
            g.nodes.push_back({"p" + std::to_string(i), t.people[i].text()});
        for (int i = 0; i < (int)t.people.size(); ++i) {
            if (t.people[i].spouse > i) {
                g.edges.push_back({i + 1, t.people[i].spouse + 1});
                g.edges.push_back({t.people[i].spouse + 1, i + 1});
            }
            for (int c : t.people[i].children) g.edges.push_back({i + 1, c + 1});
        }
        g.edges.push_back({0, anchor + 1});
        out.push_back(append_question(g, question, label));
    }
    return out;
}

// --- corporate knowledge-graph QA -------------------------------------------

namespace kg {

struct Entity {
    enum Kind { kPerson, kProject, kResource } kind;
    std::string name;
    int boss = -1;                 // REPORTS_TO target, persons only
    std::vector<int> works_on;     // person -> projects
    std::vector<int> requires_;    // project -> resources
    std::vector<int> can_access;   // person -> resources
};

struct Corp {
    std::vector<Entity> entities;
    std::vector<int> people, projects, resources;

    bool reports_transitively(int a, int b) const {
        int cur = entities[a].boss;
        while (cur >= 0) {
            if (cur == b) return true;
            cur = entities[cur].boss;
        }
        return false;
    }
};

inline Corp generate(Rng& rng, int n_nodes, double geometric_p) {
    using datagen::rand_geometric;
    using datagen::rand_int;
    Corp c;
    int n_people = std::max(2, (int)std::lround(n_nodes * 0.55));
    int n_projects = std::max(1, (int)std::lround(n_nodes * 0.20));
    int n_resources = std::max(1, n_nodes - n_people - n_projects);
    for (int i = 0; i < n_people; ++i) {
        Entity e;
        e.kind = Entity::kPerson;
        const auto& firsts = (i % 2) ? family::male_names() : family::female_names();
        e.name = firsts[rand_int(rng, 0, (int)firsts.size() - 1)] + " " +
                 family::last_names()[rand_int(rng, 0, (int)family::last_names().size() - 1)] +
                 " #" + std::to_string(i + 1);
        c.people.push_back((int)c.entities.size());
        c.entities.push_back(e);
    }
    for (int i = 0; i < n_projects; ++i) {
        Entity e;
        e.kind = Entity::kProject;
        e.name = "Project-" + std::to_string(i + 1);
        c.projects.push_back((int)c.entities.size());
        c.entities.push_back(e);
    }
    for (int i = 0; i < n_resources; ++i) {
        Entity e;
        e.kind = Entity::kResource;
        e.name = "Resource-" + std::to_string(i + 1);
        c.resources.push_back((int)c.entities.size());
        c.entities.push_back(e);
    }
    // REPORTS_TO: strict tree rooted at the first person
    for (int i = 1; i < n_people; ++i)
        c.entities[c.people[i]].boss = c.people[rand_int(rng, 0, i - 1)];
    for (int p : c.people) {
        int k = rand_geometric(rng, geometric_p, (int)c.projects.size());
        std::vector<int> pool = c.projects;
        std::shuffle(pool.begin(), pool.end(), rng);
        c.entities[p].works_on.assign(pool.begin(), pool.begin() + std::min<size_t>(k, pool.size()));
        k = rand_geometric(rng, geometric_p, (int)c.resources.size());
        pool = c.resources;
        std::shuffle(pool.begin(), pool.end(), rng);
        c.entities[p].can_access.assign(pool.begin(),
                                        pool.begin() + std::min<size_t>(k, pool.size()));
    }
    for (int pr : c.projects) {
        int k = rand_geometric(rng, geometric_p, (int)c.resources.size()) - 1;  // may be 0
        std::vector<int> pool = c.resources;
        std::shuffle(pool.begin(), pool.end(), rng);
        c.entities[pr].requires_.assign(pool.begin(),
                                        pool.begin() + std::min<size_t>(k, pool.size()));
    }
    return c;
}

}  // namespace kg

// KG records carry the graph plus one Yes/No question; labels alternate by
// rejection sampling, which keeps the ratio within [0.45, 0.55] for any
// split of ten or more records.
inline std::vector<TextAttributedGraph> gen_kgqa(const TaskSpec& spec) {
    using namespace datagen;
    std::vector<TextAttributedGraph> out;
    Rng rng = make_rng(spec.seed);
    int attempts = 0;
    while ((int)out.size() < spec.count) {
        if (++attempts > spec.count * 500) fail("RejectionBudgetExceeded", "kgqa");
        int n = rand_int(rng, spec.min_nodes, spec.max_nodes);
        kg::Corp c = kg::generate(rng, n, spec.geometric_p);

        std::string question, label;
        std::vector<int> referenced;
        int which = rand_int(rng, 0, 2);
        if (which == 0) {
            int p = c.people[rand_int(rng, 0, (int)c.people.size() - 1)];
            question = "Is " + c.entities[p].name + " the CEO (has no boss)?";
            label = (c.entities[p].boss < 0) ? "Yes" : "No";
            referenced = {p};
        } else if (which == 1) {
            int a = c.people[rand_int(rng, 0, (int)c.people.size() - 1)];
            int b = c.people[rand_int(rng, 0, (int)c.people.size() - 1)];
            if (a == b) continue;
            question = "Does " + c.entities[a].name + " report to " + c.entities[b].name +
                       ", directly or indirectly?";
            label = c.reports_transitively(a, b) ? "Yes" : "No";
            referenced = {a, b};
        } else {
            int p = c.people[rand_int(rng, 0, (int)c.people.size() - 1)];
            int pr = c.projects[rand_int(rng, 0, (int)c.projects.size() - 1)];
            question = "Can " + c.entities[p].name + " access all resources required by " +
                       c.entities[pr].name + "?";
            bool all = true;  // vacuous truth when nothing is required
            for (int r : c.entities[pr].requires_)
                all = all && std::count(c.entities[p].can_access.begin(),
                                        c.entities[p].can_access.end(), r) > 0;
            label = all ? "Yes" : "No";
            referenced = {p, pr};
        }

        if ((label == "Yes") != (out.size() % 2 == 0)) continue;

        TextAttributedGraph g;
        g.nodes.push_back({"prompt", "Q"});
        for (int i = 0; i < (int)c.entities.size(); ++i) {
            const kg::Entity& e = c.entities[i];
            std::string kind = e.kind == kg::Entity::kPerson
                                   ? "Person"
                                   : (e.kind == kg::Entity::kProject ? "Project" : "Resource");
            g.nodes.push_back({"e" + std::to_string(i), kind + ": " + e.name});
        }
        // relation kinds are separated by the incidence-style id ordering:
        // REPORTS_TO person->boss, WORKS_ON person->project,
        // REQUIRES project->resource, CAN_ACCESS person->resource
        for (int i = 0; i < (int)c.entities.size(); ++i) {
            const kg::Entity& e = c.entities[i];
            if (e.boss >= 0) g.edges.push_back({i + 1, e.boss + 1});
            for (int t : e.works_on) g.edges.push_back({i + 1, t + 1});
            for (int t : e.requires_) g.edges.push_back({i + 1, t + 1});
            for (int t : e.can_access) g.edges.push_back({i + 1, t + 1});
        }
        for (int r : referenced) g.edges.push_back({0, r + 1});
        out.push_back(append_question(g, question, label));
    }
    return out;
}

inline std::vector<TextAttributedGraph> generate_dataset(const TaskSpec& spec) {
    if (spec.task == "component_probe") return gen_component_probe(spec);
    if (spec.task == "letter_presence") return gen_letter_presence(spec);
    if (spec.task == "family_tree") return gen_family_tree(spec);
    if (spec.task == "kgqa") return gen_kgqa(spec);
    if (spec.task == "directed_reachability") return gen_directed_reachability(spec);
    return gen_graphqa(spec);
}

}  // namespace gtlm

#include <catch2/catch_amalgamated.hpp>

#include "gtlm/features.hpp"
#include "gtlm/verify.hpp"

using namespace gtlm;

namespace {

TextAttributedGraph single_arc() {
    TextAttributedGraph g;
    g.nodes = {{"a", "a"}, {"b", "b"}};
    g.edges = {{0, 1}};
    return g;
}

}  // namespace

TEST_CASE("spd clamps long distances and marks unreachable pairs") {
    // path 0-1-2-3-4 plus an isolated node 5, max_spd = 3
    TextAttributedGraph g = path_graph(5);
    g.nodes.push_back({"iso", "iso"});
    IntMatrix spd = shortest_path_distances(g, 3);
    CHECK(spd(0, 0) == 0);
    CHECK(spd(0, 1) == 1);
    CHECK(spd(0, 2) == 2);
    CHECK(spd(0, 3) == 2);  // distance 3 clamps to max_spd - 1
    CHECK(spd(0, 4) == 2);
    CHECK(spd(4, 0) == 2);  // symmetrized
    CHECK(spd(0, 5) == 3);  // unreachable sentinel = max_spd
    CHECK_THROWS_AS(shortest_path_distances(g, 1), GtlmError);
}

TEST_CASE("spd matches floyd-warshall on random graphs") {
    Rng rng = make_rng(404);
    for (int t = 0; t < 50; ++t) {
        TextAttributedGraph g = random_oracle_graph(rng, 12);
        IntMatrix fast = shortest_path_distances(g, 8);
        IntMatrix slow = oracle_spd(g, 8);
        REQUIRE(fast.data == slow.data);
    }
}

TEST_CASE("rrwp step 0 is the identity and rows are sub-stochastic") {
    Rng rng = make_rng(405);
    TextAttributedGraph g = random_oracle_graph(rng, 10);
    const int n = g.num_nodes();
    auto p = rrwp(g, 4);
    REQUIRE((int)p.size() == 4);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) CHECK(p[0](i, j) == (i == j ? 1.0 : 0.0));
    for (int k = 1; k < 4; ++k)
        for (int i = 0; i < n; ++i) {
            double row = 0;
            for (int j = 0; j < n; ++j) {
                CHECK(p[k](i, j) >= 0.0);
                row += p[k](i, j);
            }
            CHECK(row <= 1.0 + 1e-12);  // sink rows lose mass
        }
}

TEST_CASE("rrwp matches the independent matrix-power oracle") {
    Rng rng = make_rng(406);
    for (int t = 0; t < 25; ++t) {
        TextAttributedGraph g = random_oracle_graph(rng, 10);
        auto fast = rrwp(g, 6);
        auto slow = oracle_rrwp(g, 6);
        for (int k = 0; k < 6; ++k)
            for (size_t i = 0; i < fast[k].data.size(); ++i)
                REQUIRE(std::abs(fast[k].data[i] - slow[k].data[i]) <= 1e-12);
    }
}

TEST_CASE("magnetic laplacian of a single arc has known closed form") {
    // Directed 0 -> 1 with q = 0.25: Theta = pi/2 and the degree-normalized
    // symmetric weight is 1, so L = [[1, -i], [i, 1]] with spectrum {0, 2}.
    ComplexMatrix lap = magnetic_laplacian(single_arc(), 0.25);
    CHECK(lap(0, 0) == Complex(1.0, 0.0));
    CHECK(lap(1, 1) == Complex(1.0, 0.0));
    CHECK(std::abs(lap(0, 1) - Complex(0.0, -1.0)) <= 1e-15);
    CHECK(std::abs(lap(0, 1) - std::conj(lap(1, 0))) <= 1e-15);

    auto eig = hermitian_eigendecomposition(lap);
    CHECK(std::abs(eig.eigenvalues[0] - 0.0) <= 1e-12);
    CHECK(std::abs(eig.eigenvalues[1] - 2.0) <= 1e-12);
}

TEST_CASE("edge reversal conjugates the magnetic laplacian") {
    Rng rng = make_rng(407);
    TextAttributedGraph g = random_oracle_graph(rng, 9);
    TextAttributedGraph rev = g;
    for (auto& [u, v] : rev.edges) std::swap(u, v);
    ComplexMatrix a = magnetic_laplacian(g, 0.25);
    ComplexMatrix b = magnetic_laplacian(rev, 0.25);
    for (size_t i = 0; i < a.data.size(); ++i)
        CHECK(std::abs(a.data[i] - std::conj(b.data[i])) <= 1e-14);
}

TEST_CASE("isolated nodes get a unit diagonal") {
    TextAttributedGraph g;
    g.nodes = {{"a", "a"}, {"b", "b"}, {"c", "c"}};
    g.edges = {{0, 1}};
    ComplexMatrix lap = magnetic_laplacian(g, 0.25);
    CHECK(lap(2, 2) == Complex(1.0, 0.0));
    CHECK(lap(2, 0) == Complex(0.0, 0.0));
}

TEST_CASE("eigendecomposition: hermiticity guard, psd range, reconstruction, orthonormality") {
    Rng rng = make_rng(408);
    for (int t = 0; t < 20; ++t) {
        TextAttributedGraph g = random_oracle_graph(rng, 12);
        const int n = g.num_nodes();
        ComplexMatrix lap = magnetic_laplacian(g, 0.25);
        auto eig = hermitian_eigendecomposition(lap);

        for (int i = 0; i + 1 < n; ++i) REQUIRE(eig.eigenvalues[i] <= eig.eigenvalues[i + 1]);
        for (double lambda : eig.eigenvalues) {
            REQUIRE(lambda >= -1e-9);
            REQUIRE(lambda <= 2.0 + 1e-9);
        }
        // V diag(lambda) V^dagger == L
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Complex sum = 0;
                for (int k = 0; k < n; ++k)
                    sum += eig.eigenvectors(i, k) * eig.eigenvalues[k] *
                           std::conj(eig.eigenvectors(j, k));
                REQUIRE(std::abs(sum - lap(i, j)) <= 1e-8);
            }
        // V^dagger V == I
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                Complex dot = 0;
                for (int r = 0; r < n; ++r)
                    dot += std::conj(eig.eigenvectors(r, a)) * eig.eigenvectors(r, b);
                REQUIRE(std::abs(dot - (a == b ? 1.0 : 0.0)) <= 1e-10);
            }
    }

    ComplexMatrix not_hermitian(2, 2);
    not_hermitian(0, 1) = Complex(1.0, 0.0);
    CHECK_THROWS_AS(hermitian_eigendecomposition(not_hermitian), GtlmError);
}

#include <catch2/catch_amalgamated.hpp>

#include "gtlm/bias.hpp"
#include "gtlm/features.hpp"
#include "gtlm/verify.hpp"

using namespace gtlm;

namespace {

BiasConfig small_config() {
    BiasConfig c;
    c.n_layers = 2;
    c.n_heads = 3;
    c.max_spd = 4;
    c.rrwp_steps = 3;
    c.rrwp_hidden = 5;
    c.mag_dim = 4;
    c.deepset_hidden = 4;
    c.mag_hidden = 6;
    return c;
}

// Evaluates the node-pair bias tensors for one graph on a fresh tape.
std::vector<std::vector<double>> eval_bias(const ParamStore& store, const BiasConfig& cfg,
                                           const BiasFlags& flags,
                                           const TextAttributedGraph& g) {
    StructuralFeatures f = compute_features(g, cfg.max_spd, cfg.rrwp_steps, cfg.mag_q);
    PairFeatures pf = PairFeatures::from(f);
    Tape<double> tape;
    std::unordered_map<std::string, Tape<double>::Ref> leaves;
    for (const ParamArray& a : store.arrays)
        leaves[a.name] = tape.leaf(a.rows, a.cols, a.value.data());
    std::function<Tape<double>::Ref(const std::string&)> leaf =
        [&](const std::string& name) { return leaves.at(name); };
    auto refs = build_node_bias<double>(tape, cfg, flags, pf, leaf);
    std::vector<std::vector<double>> out;
    for (auto r : refs) {
        const auto& v = tape.value(r);
        out.emplace_back(v.begin(), v.end());
    }
    return out;
}

ParamStore random_store(const BiasConfig& cfg, std::uint64_t seed) {
    ParamStore store;
    init_bias_params(store, cfg, seed);
    Rng rng = make_rng(seed + 1);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (ParamArray& a : store.arrays)
        for (size_t j = a.pinned_prefix; j < a.size(); ++j) a.value[j] = dist(rng);
    return store;
}

}  // namespace

TEST_CASE("parameter counts match the published breakdown") {
    BiasConfig paper;
    paper.n_layers = 16;
    paper.n_heads = 32;
    paper.max_spd = 8;
    paper.rrwp_steps = 16;
    paper.rrwp_hidden = 64;
    ParamCountBreakdown b = count_parameters(paper);
    CHECK(b.spd == 4096);
    CHECK(b.rrwp == 50688);
    CHECK(b.total == b.spd + b.rrwp + b.mag);

    // the closed form equals what the store actually registers
    BiasConfig cfg = small_config();
    ParamStore store;
    init_bias_params(store, cfg, 0);
    CHECK((long)store.trainable_count(/*bias_only=*/true) == count_parameters(cfg).total);
}

TEST_CASE("spd table starts at zero with the bucket-0 row pinned") {
    BiasConfig cfg = small_config();
    ParamStore store;
    init_bias_params(store, cfg, 7);
    const ParamArray& t = store.by_name("bias.layer0.spd_table");
    CHECK(t.rows == cfg.max_spd + 1);
    CHECK(t.cols == cfg.n_heads);
    CHECK(t.pinned_prefix == cfg.n_heads);
    for (double v : t.value) CHECK(v == 0.0);
}

TEST_CASE("diagonal node-pair bias is exactly zero for arbitrary parameters") {
    BiasConfig cfg = small_config();
    ParamStore store = random_store(cfg, 11);
    Rng rng = make_rng(12);
    TextAttributedGraph g = random_oracle_graph(rng, 8);
    const int n = g.num_nodes();
    for (auto flags : {BiasFlags{true, true, true}, BiasFlags{true, false, false},
                       BiasFlags{false, true, false}, BiasFlags{false, false, true}}) {
        auto layers = eval_bias(store, cfg, flags, g);
        REQUIRE((int)layers.size() == cfg.n_layers);
        for (const auto& layer : layers)
            for (int u = 0; u < n; ++u)
                for (int h = 0; h < cfg.n_heads; ++h)
                    REQUIRE(layer[((size_t)u * n + u) * cfg.n_heads + h] == 0.0);
    }
}

TEST_CASE("zeroed second-layer weights reduce each MLP bias to its constant") {
    BiasConfig cfg = small_config();
    ParamStore store = random_store(cfg, 13);
    // rrwp-only, layer 0: w2 = 0 so every off-diagonal row must equal b2
    auto& w2 = store.by_name("bias.layer0.rrwp2_w");
    std::fill(w2.value.begin(), w2.value.end(), 0.0);
    const auto& b2 = store.by_name("bias.layer0.rrwp2_b").value;
    Rng rng = make_rng(14);
    TextAttributedGraph g = random_oracle_graph(rng, 7);
    const int n = g.num_nodes();
    auto layers = eval_bias(store, cfg, BiasFlags{false, true, false}, g);
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
            for (int h = 0; h < cfg.n_heads; ++h) {
                double got = layers[0][((size_t)u * n + v) * cfg.n_heads + h];
                CHECK(got == (u == v ? 0.0 : b2[h]));
            }
}

TEST_CASE("spd bias reads the table at the bucket index") {
    BiasConfig cfg = small_config();
    ParamStore store = random_store(cfg, 15);
    const auto& table = store.by_name("bias.layer1.spd_table");
    TextAttributedGraph g = path_graph(6);
    StructuralFeatures f = compute_features(g, cfg.max_spd, cfg.rrwp_steps, cfg.mag_q);
    auto layers = eval_bias(store, cfg, BiasFlags{true, false, false}, g);
    const int n = g.num_nodes();
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
            for (int h = 0; h < cfg.n_heads; ++h) {
                double expected = (u == v) ? 0.0 : table.value[(size_t)f.spd(u, v) * cfg.n_heads + h];
                CHECK(layers[1][((size_t)u * n + v) * cfg.n_heads + h] == expected);
            }
}

TEST_CASE("deep set phi is a permutation-equivariant function of the eigenvalues") {
    BiasConfig cfg = small_config();
    ParamStore store = random_store(cfg, 17);
    std::vector<double> lambda = {0.1, 0.7, 1.3, 1.9, 0.4};
    RealMatrix phi = deepset_phi_matrix(store, cfg, lambda);

    std::vector<int> perm = {3, 0, 4, 1, 2};
    std::vector<double> shuffled;
    for (int i : perm) shuffled.push_back(lambda[i]);
    RealMatrix phi2 = deepset_phi_matrix(store, cfg, shuffled);
    for (int i = 0; i < (int)perm.size(); ++i)
        for (int c = 0; c < cfg.mag_dim; ++c)
            CHECK(phi2(i, c) == Catch::Approx(phi(perm[i], c)).margin(1e-14));

    // equal eigenvalues produce identical rows (the degeneracy requirement)
    RealMatrix phi3 = deepset_phi_matrix(store, cfg, {0.5, 0.5, 1.0});
    for (int c = 0; c < cfg.mag_dim; ++c) CHECK(phi3(0, c) == phi3(1, c));
}

TEST_CASE("kernel with phi == 1 collapses to the identity") {
    Rng rng = make_rng(19);
    TextAttributedGraph g = random_oracle_graph(rng, 8);
    StructuralFeatures f = compute_features(g, 8, 3, 0.25);
    const int n = f.num_nodes();
    RealMatrix ones(n, 2, 1.0);
    auto kernel = mag_kernel(f.mag_eigvecs, ones);
    for (const auto& channel : kernel)
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v)
                CHECK(std::abs(channel(u, v) - (u == v ? 1.0 : 0.0)) <= 1e-10);
}

TEST_CASE("kernel basis invariance holds on fixtures and the negative control fails") {
    for (const CheckResult& r : check_kernel_fixtures(23)) {
        INFO(r.name << " worst=" << r.worst << " note=" << r.note);
        CHECK(r.pass);
    }
}

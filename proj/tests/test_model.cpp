#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "gtlm/model.hpp"
#include "gtlm/verify.hpp"

using namespace gtlm;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.n_layers = 2;
    c.n_heads = 2;
    c.d_model = 16;
    c.d_head = 8;
    c.d_ffn = 32;
    c.bias.rrwp_steps = 4;
    c.bias.rrwp_hidden = 8;
    c.bias.mag_dim = 4;
    c.bias.deepset_hidden = 4;
    c.bias.mag_hidden = 8;
    return c;
}

TextAttributedGraph two_node_question() {
    TextAttributedGraph g;
    g.nodes = {{"t", "hub"}, {"a", "spoke"}};
    g.edges = {{0, 1}};
    return append_question(g, "Q?", "Yes");
}

}  // namespace

TEST_CASE("byte tokenizer round-trips arbitrary text") {
    std::string text = "Hello, graphs! \xc3\xa9\n tab\t";
    auto ids = Tokenizer::encode(text);
    REQUIRE(ids.size() == text.size());
    for (int id : ids) {
        CHECK(id >= 0);
        CHECK(id < Tokenizer::kBos);
    }
    CHECK(Tokenizer::decode(ids) == text);
    CHECK(Tokenizer::kVocabSize == 257);
}

TEST_CASE("layout restarts positions at every node and marks the answer span") {
    TextAttributedGraph g;
    g.nodes = {{"t", "ab"}, {"x", "cde"}, {"y", "f"}};
    g = append_question(g, "Q?", "Yes");
    TokenLayout layout = build_layout(g, {2, 1}, /*with_label=*/true);

    // node order: 2, 1, then target 0; BOS + bytes per node, plus the
    // supervised terminating newline appended after the label
    REQUIRE(layout.size() == 2 + 4 + (int)(1 + g.target_text(true).size()) + 1);
    CHECK(layout.node_of[0] == 2);
    CHECK(layout.pos_in_node[0] == 0);  // BOS
    CHECK(layout.pos_in_node[1] == 1);  // 'f'
    CHECK(layout.node_of[2] == 1);
    CHECK(layout.pos_in_node[2] == 0);  // positions reset at the boundary
    CHECK(layout.pos_in_node[3] == 1);
    CHECK(layout.tokens[0] == Tokenizer::kBos);

    // the supervised positions are exactly the label bytes plus the newline
    int span = 0;
    for (int i = 0; i < layout.size(); ++i) span += layout.answer_span[i];
    CHECK(span == 4);
    std::string tail;
    for (int i = 0; i < layout.size(); ++i)
        if (layout.answer_span[i]) tail.push_back((char)layout.tokens[i]);
    CHECK(tail == "Yes\n");

    CHECK_THROWS_AS(build_layout(g, {1, 1}, true), GtlmError);
    CHECK_THROWS_AS(build_layout(g, {1}, true), GtlmError);
}

TEST_CASE("prefix-lm mask: prefix bidirectional, target causal, prefix blind to target") {
    TextAttributedGraph g = two_node_question();
    TokenLayout layout = build_layout(g, {1}, true);
    auto visible = build_mask(layout);
    const int t = layout.size();
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j) {
            bool v = visible[(size_t)i * t + j];
            if (!layout.is_target[i] && !layout.is_target[j])
                CHECK(v);  // prefix sees all of the prefix, both directions
            else if (!layout.is_target[i] && layout.is_target[j])
                CHECK_FALSE(v);  // prefix never sees the target
            else if (layout.is_target[i] && !layout.is_target[j])
                CHECK(v);  // target sees the whole prefix
            else
                CHECK(v == (j <= i));  // causal within the target
        }
}

TEST_CASE("rope preserves norms and depends only on relative position") {
    Tape<double> tape;
    const int d = 8;
    std::vector<double> qdata(d), kdata(d);
    Rng rng = make_rng(31);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto* vec : {&qdata, &kdata})
        for (double& x : *vec) x = dist(rng);

    auto rotate = [&](const std::vector<double>& data, int pos) {
        std::vector<int> positions = {pos};
        Tape<double>::Ref leafr = tape.leaf(1, d, data.data());
        return tape.value(tape.rope(leafr, positions, 10000.0));
    };

    auto norm = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0;
        for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };

    // position 0 is the identity rotation
    auto q0 = rotate(qdata, 0);
    for (int i = 0; i < d; ++i) CHECK(q0[i] == Catch::Approx(qdata[i]).margin(1e-15));

    // norms survive any rotation
    CHECK(norm(rotate(qdata, 17)) == Catch::Approx(norm(qdata)).margin(1e-12));

    // <rope(q,p1), rope(k,p2)> is a function of p1 - p2 alone
    double d53 = dot(rotate(qdata, 5), rotate(kdata, 3));
    double d97 = dot(rotate(qdata, 9), rotate(kdata, 7));
    CHECK(d53 == Catch::Approx(d97).margin(1e-12));
}

TEST_CASE("all-zero parameters give the uniform cross entropy") {
    ModelConfig cfg = tiny_config();
    GtlmModel model = GtlmModel::init(cfg, 1);
    for (ParamArray& a : model.params.arrays) std::fill(a.value.begin(), a.value.end(), 0.0);
    TextAttributedGraph g = two_node_question();
    ForwardPass<double> fp;
    run_forward<double>(model, g, model.features_for(g), {1}, {}, fp);
    CHECK(fp.loss_value() == Catch::Approx(std::log(257.0)).margin(1e-12));
}

TEST_CASE("attention rows are probability distributions over visible positions") {
    ModelConfig cfg = tiny_config();
    GtlmModel model = GtlmModel::init(cfg, 2);
    randomize_bias_params(model, 3);
    TextAttributedGraph g = two_node_question();
    ForwardPass<double> fp;
    ForwardOptions opts;
    opts.capture_attention = true;
    run_forward<double>(model, g, model.features_for(g), {1}, opts, fp);
    REQUIRE((int)fp.attention.size() == cfg.n_layers * cfg.n_heads);
    TokenLayout layout = fp.layout;
    auto visible = build_mask(layout);
    const int t = layout.size();
    for (auto probs_ref : fp.attention) {
        const auto& probs = fp.tape.value(probs_ref);
        for (int i = 0; i < t; ++i) {
            double row = 0;
            for (int j = 0; j < t; ++j) {
                REQUIRE(probs[(size_t)i * t + j] >= 0.0);
                if (!visible[(size_t)i * t + j])
                    REQUIRE(probs[(size_t)i * t + j] == 0.0);  // masking is airtight
                row += probs[(size_t)i * t + j];
            }
            REQUIRE(row == Catch::Approx(1.0).margin(1e-12));
        }
    }
}

TEST_CASE("forward passes are deterministic for a fixed model and input") {
    ModelConfig cfg = tiny_config();
    GtlmModel model = GtlmModel::init(cfg, 4);
    TextAttributedGraph g = two_node_question();
    StructuralFeatures f = model.features_for(g);
    ForwardPass<double> a, b;
    run_forward<double>(model, g, f, {1}, {}, a);
    run_forward<double>(model, g, f, {1}, {}, b);
    CHECK(a.tape.value(a.logits) == b.tape.value(b.logits));
}

TEST_CASE("checkpoint round trip reproduces logits bit for bit") {
    std::string path = "test_model_ckpt.bin";
    ModelConfig cfg = tiny_config();
    GtlmModel model = GtlmModel::init(cfg, 5);
    randomize_bias_params(model, 6);
    save_checkpoint(path, model);
    GtlmModel back = load_checkpoint(path);

    TextAttributedGraph g = two_node_question();
    ForwardPass<double> a, b;
    run_forward<double>(model, g, model.features_for(g), {1}, {}, a);
    run_forward<double>(back, g, back.features_for(g), {1}, {}, b);
    CHECK(a.tape.value(a.logits) == b.tape.value(b.logits));

    // truncated files are rejected
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "GTLM";
    }
    CHECK_THROWS_AS(load_checkpoint(path), GtlmError);
    std::remove(path.c_str());
}

TEST_CASE("training reduces the loss and leaves pinned entries untouched") {
    ModelConfig cfg = tiny_config();
    GtlmModel model = GtlmModel::init(cfg, 7);
    TaskSpec spec{"reachability", 4, 8, 4, 5, 0.5};
    std::vector<TrainExample> batch;
    for (const auto& g : generate_dataset(spec)) batch.push_back(make_example(model, g));

    OptimizerState opt;
    double first = 0, last = 0;
    for (int step = 0; step < 30; ++step) {
        double loss = train_step(model, batch, 1e-3, 1e-2, opt);
        if (step == 0) first = loss;
        last = loss;
    }
    CHECK(last < first);
    const ParamArray& t = model.params.by_name("bias.layer0.spd_table");
    for (int h = 0; h < t.pinned_prefix; ++h) CHECK(t.value[h] == 0.0);
}

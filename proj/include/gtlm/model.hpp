#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gtlm/bias.hpp"
#include "gtlm/features.hpp"
#include "gtlm/graph.hpp"
#include "gtlm/params.hpp"
#include "gtlm/tape.hpp"
#include "gtlm/tokenizer.hpp"

namespace gtlm {

struct ModelConfig {
    int n_layers = 2;
    int n_heads = 4;
    int d_model = 64;
    int d_head = 16;
    int d_ffn = 128;
    int vocab_size = Tokenizer::kVocabSize;
    double rope_base = 10000.0;
    int max_seq_len = 2048;
    BiasConfig bias;
    BiasFlags bias_flags;

    void validate() const {
        if (d_model != n_heads * d_head) fail("InvalidConfig", "d_model != n_heads * d_head");
        if (d_head % 2 != 0) fail("InvalidConfig", "d_head must be even for rotary pairing");
    }

    // Bias config mirrors the backbone depth/width.
    BiasConfig synced_bias() const {
        BiasConfig b = bias;
        b.n_layers = n_layers;
        b.n_heads = n_heads;
        return b;
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"n_layers", c.n_layers},       {"n_heads", c.n_heads},
         {"d_model", c.d_model},         {"d_head", c.d_head},
         {"d_ffn", c.d_ffn},             {"vocab_size", c.vocab_size},
         {"rope_base", c.rope_base},     {"max_seq_len", c.max_seq_len},
         {"max_spd", c.bias.max_spd},    {"rrwp_steps", c.bias.rrwp_steps},
         {"rrwp_hidden", c.bias.rrwp_hidden},
         {"mag_q", c.bias.mag_q},        {"mag_dim", c.bias.mag_dim},
         {"deepset_hidden", c.bias.deepset_hidden},
         {"mag_hidden", c.bias.mag_hidden},
         {"use_spd", c.bias_flags.spd},  {"use_rrwp", c.bias_flags.rrwp},
         {"use_mag", c.bias_flags.mag}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.n_layers = j.value("n_layers", d.n_layers);
    c.n_heads = j.value("n_heads", d.n_heads);
    c.d_model = j.value("d_model", d.d_model);
    c.d_head = j.value("d_head", d.d_head);
    c.d_ffn = j.value("d_ffn", d.d_ffn);
    c.vocab_size = j.value("vocab_size", d.vocab_size);
    c.rope_base = j.value("rope_base", d.rope_base);
    c.max_seq_len = j.value("max_seq_len", d.max_seq_len);
    c.bias.max_spd = j.value("max_spd", d.bias.max_spd);
    c.bias.rrwp_steps = j.value("rrwp_steps", d.bias.rrwp_steps);
    c.bias.rrwp_hidden = j.value("rrwp_hidden", d.bias.rrwp_hidden);
    c.bias.mag_q = j.value("mag_q", d.bias.mag_q);
    c.bias.mag_dim = j.value("mag_dim", d.bias.mag_dim);
    c.bias.deepset_hidden = j.value("deepset_hidden", d.bias.deepset_hidden);
    c.bias.mag_hidden = j.value("mag_hidden", d.bias.mag_hidden);
    c.bias_flags.spd = j.value("use_spd", true);
    c.bias_flags.rrwp = j.value("use_rrwp", true);
    c.bias_flags.mag = j.value("use_mag", true);
}

// --- token layout -------------------------------------------------------

struct TokenLayout {
    std::vector<int> tokens;
    std::vector<int> node_of;
    std::vector<int> pos_in_node;  // resets to 0 at every node boundary
    std::vector<char> is_target;
    std::vector<char> answer_span;  // supervised label positions
    int num_nodes = 0;

    int size() const { return static_cast<int>(tokens.size()); }
};

// Identity ordering of the prefix nodes 1..N-1.
inline std::vector<int> identity_permutation(int num_nodes) {
    std::vector<int> p;
    for (int u = 1; u < num_nodes; ++u) p.push_back(u);
    return p;
}

inline TokenLayout build_layout(const TextAttributedGraph& g,
                                const std::vector<int>& permutation, bool with_label) {
    const int n = g.num_nodes();
    if (static_cast<int>(permutation.size()) != n - 1)
        fail("InvalidPermutation", "permutation must cover prefix nodes 1..N-1");
    std::vector<char> seen(n, 0);
    for (int u : permutation) {
        if (u < 1 || u >= n || seen[u])
            fail("InvalidPermutation", "not a bijection over prefix nodes");
        seen[u] = 1;
    }

    TokenLayout layout;
    layout.num_nodes = n;
    auto push_node = [&](int node, const std::string& text, bool target) {
        std::vector<int> ids = Tokenizer::encode(text);
        ids.insert(ids.begin(), Tokenizer::kBos);
        int pos = 0;
        for (int id : ids) {
            layout.tokens.push_back(id);
            layout.node_of.push_back(node);
            layout.pos_in_node.push_back(pos++);
            layout.is_target.push_back(target ? 1 : 0);
            layout.answer_span.push_back(0);
        }
    };
    for (int u : permutation) push_node(u, g.nodes[u].raw_text, false);
    push_node(0, g.target_text(with_label), true);

    if (with_label && g.has_question()) {
        // A supervised terminating newline teaches greedy decoding to stop
        // after the label.
        layout.tokens.push_back('\n');
        layout.node_of.push_back(0);
        layout.pos_in_node.push_back(layout.pos_in_node.back() + 1);
        layout.is_target.push_back(1);
        layout.answer_span.push_back(0);
        int span = static_cast<int>(Tokenizer::encode(g.label).size()) + 1;
        for (int i = layout.size() - span; i < layout.size(); ++i)
            layout.answer_span[i] = 1;
    }
    return layout;
}

// PrefixLM visibility: bidirectional over the prefix, causal over the
// target suffix, prefix blind to the target.
inline std::vector<char> build_mask(const TokenLayout& layout) {
    const int t = layout.size();
    std::vector<char> visible((size_t)t * t, 0);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j) {
            bool ok = layout.is_target[i] ? (!layout.is_target[j] || j <= i)
                                          : !layout.is_target[j];
            visible[(size_t)i * t + j] = ok ? 1 : 0;
        }
    return visible;
}

// --- model ---------------------------------------------------------------

struct GtlmModel {
    ModelConfig cfg;
    ParamStore params;

    static GtlmModel init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        GtlmModel m;
        m.cfg = cfg;
        Rng rng = make_rng(seed);
        auto matrix = [&](const std::string& name, int rows, int cols, double scale) {
            int i = m.params.add(name, rows, cols, false);
            detail::fill_uniform(m.params.arrays[i].value, scale, rng);
            return i;
        };
        auto gain = [&](const std::string& name, int cols) {
            int i = m.params.add(name, 1, cols, false);
            std::fill(m.params.arrays[i].value.begin(), m.params.arrays[i].value.end(), 1.0);
        };
        // Random orthogonal d x d matrix (Gram-Schmidt on a Gaussian draw).
        auto orthogonal = [&](int d) {
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::vector<double> q((size_t)d * d);
            for (double& x : q) x = gauss(rng);
            for (int c = 0; c < d; ++c) {
                for (int prev = 0; prev < c; ++prev) {
                    double dot = 0;
                    for (int r = 0; r < d; ++r) dot += q[(size_t)r * d + prev] * q[(size_t)r * d + c];
                    for (int r = 0; r < d; ++r) q[(size_t)r * d + c] -= dot * q[(size_t)r * d + prev];
                }
                double norm = 0;
                for (int r = 0; r < d; ++r) norm += q[(size_t)r * d + c] * q[(size_t)r * d + c];
                norm = std::sqrt(norm);
                for (int r = 0; r < d; ++r) q[(size_t)r * d + c] /= norm;
            }
            return q;
        };

        // Embedding rows at unit expected norm; readout tied to its
        // transpose so attention acts as token copying under the
        // orthogonal value/output pair below.
        const int d = cfg.d_model;
        int embed = matrix("embed", cfg.vocab_size, d, std::sqrt(3.0 / d));
        for (int l = 0; l < cfg.n_layers; ++l) {
            std::string p = "layer" + std::to_string(l) + ".";
            gain(p + "attn_norm", d);
            // query/key start from one shared draw (similarity attention):
            // equal tokens then score positively at every head from step 0,
            // which conditions the early optimization of matching circuits
            int wq = matrix(p + "wq", d, d, 1.0 / std::sqrt((double)d));
            int wk = m.params.add(p + "wk", d, d, false);
            m.params.arrays[wk].value = m.params.arrays[wq].value;
            // value/output share a random orthogonal basis: W_o = g W_v^T,
            // so the concatenated heads copy the attended residual content
            // instead of scrambling it
            std::vector<double> q = orthogonal(d);
            int wv = m.params.add(p + "wv", d, d, false);
            int wo = m.params.add(p + "wo", d, d, false);
            const double residual_gain = 1.5;
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) {
                    m.params.arrays[wv].value[(size_t)r * d + c] = q[(size_t)r * d + c];
                    m.params.arrays[wo].value[(size_t)r * d + c] =
                        residual_gain * q[(size_t)c * d + r];
                }
            gain(p + "ffn_norm", d);
            matrix(p + "ffn_w1", d, cfg.d_ffn, 1.0 / std::sqrt((double)d));
            m.params.add(p + "ffn_b1", 1, cfg.d_ffn, false);
            // small output scale keeps the random FFN from drowning the
            // copy path
            matrix(p + "ffn_w2", cfg.d_ffn, d, 0.1 / std::sqrt((double)cfg.d_ffn));
            m.params.add(p + "ffn_b2", 1, d, false);
        }
        gain("final_norm", d);
        int unembed = m.params.add("unembed", d, cfg.vocab_size, false);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < cfg.vocab_size; ++c)
                m.params.arrays[unembed].value[(size_t)r * cfg.vocab_size + c] =
                    m.params.arrays[embed].value[(size_t)c * d + r];
        init_bias_params(m.params, cfg.synced_bias(), substream(seed, 1));
        return m;
    }

    StructuralFeatures features_for(const TextAttributedGraph& g) const {
        return compute_features(g, cfg.bias.max_spd, cfg.bias.rrwp_steps, cfg.bias.mag_q);
    }
};

template <typename Real>
struct ForwardPass {
    Tape<Real> tape;
    TokenLayout layout;
    typename Tape<Real>::Ref logits;
    typename Tape<Real>::Ref loss;                        // invalid unless supervised
    std::vector<typename Tape<Real>::Ref> attention;      // L*H entries when captured
    std::vector<typename Tape<Real>::Ref> param_leaves;   // aligned with params.arrays

    double loss_value() const {
        return loss.valid() ? (double)tape.value(loss)[0] : 0.0;
    }
    std::vector<double> logits_row(int row) const {
        std::vector<double> out(logits.cols);
        const auto& v = tape.value(logits);
        for (int j = 0; j < logits.cols; ++j) out[j] = (double)v[(size_t)row * logits.cols + j];
        return out;
    }
};

struct ForwardOptions {
    bool with_label = true;
    bool capture_attention = false;
    // Extra tokens decoded so far, appended to the target node (generation).
    std::vector<int> extra_target_tokens;
};

template <typename Real>
void run_forward(const GtlmModel& model, const TextAttributedGraph& g,
                 const StructuralFeatures& feats, const std::vector<int>& permutation,
                 const ForwardOptions& opts, ForwardPass<Real>& out) {
    using Ref = typename Tape<Real>::Ref;
    const ModelConfig& cfg = model.cfg;
    Tape<Real>& tape = out.tape;

    out.layout = build_layout(g, permutation, opts.with_label);
    for (int id : opts.extra_target_tokens) {
        out.layout.tokens.push_back(id);
        out.layout.node_of.push_back(0);
        out.layout.pos_in_node.push_back(out.layout.pos_in_node.back() + 1);
        out.layout.is_target.push_back(1);
        out.layout.answer_span.push_back(0);
    }
    const TokenLayout& layout = out.layout;
    const int t = layout.size();
    if (t > cfg.max_seq_len) fail("SequenceTooLong", "token stream exceeds max_seq_len");

    out.param_leaves.resize(model.params.arrays.size());
    std::unordered_map<std::string, Ref> leaf_by_name;
    for (size_t i = 0; i < model.params.arrays.size(); ++i) {
        const ParamArray& a = model.params.arrays[i];
        out.param_leaves[i] = tape.leaf(a.rows, a.cols, a.value.data());
        leaf_by_name[a.name] = out.param_leaves[i];
    }
    std::function<Ref(const std::string&)> leaf = [&](const std::string& name) {
        auto it = leaf_by_name.find(name);
        if (it == leaf_by_name.end()) fail("UnknownParameter", name);
        return it->second;
    };

    std::vector<Ref> node_bias;
    if (cfg.bias_flags.any()) {
        PairFeatures pf = PairFeatures::from(feats);
        node_bias = build_node_bias<Real>(tape, cfg.synced_bias(), cfg.bias_flags, pf, leaf);
    }

    const std::vector<char> visible = build_mask(layout);
    const double inv_sqrt_dh = 1.0 / std::sqrt((double)cfg.d_head);

    Ref x = tape.gather_rows(leaf("embed"), layout.tokens);
    for (int l = 0; l < cfg.n_layers; ++l) {
        std::string p = "layer" + std::to_string(l) + ".";
        Ref xn = tape.rmsnorm(x, leaf(p + "attn_norm"));
        Ref q = tape.matmul(xn, leaf(p + "wq"));
        Ref k = tape.matmul(xn, leaf(p + "wk"));
        Ref v = tape.matmul(xn, leaf(p + "wv"));
        std::vector<Ref> head_outputs;
        for (int h = 0; h < cfg.n_heads; ++h) {
            Ref qh = tape.rope(tape.slice_cols(q, h * cfg.d_head, cfg.d_head),
                               layout.pos_in_node, cfg.rope_base);
            Ref kh = tape.rope(tape.slice_cols(k, h * cfg.d_head, cfg.d_head),
                               layout.pos_in_node, cfg.rope_base);
            Ref scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dh);
            if (!node_bias.empty())
                scores = tape.add(scores, tape.broadcast_pairs(node_bias[l], layout.node_of,
                                                               layout.num_nodes, h));
            Ref probs = tape.softmax_masked(scores, visible);
            if (opts.capture_attention) out.attention.push_back(probs);
            head_outputs.push_back(
                tape.matmul(probs, tape.slice_cols(v, h * cfg.d_head, cfg.d_head)));
        }
        x = tape.add(x, tape.matmul(tape.concat_cols(head_outputs), leaf(p + "wo")));
        Ref fn = tape.rmsnorm(x, leaf(p + "ffn_norm"));
        Ref hidden = tape.gelu(
            tape.add_row(tape.matmul(fn, leaf(p + "ffn_w1")), leaf(p + "ffn_b1")));
        x = tape.add(x, tape.add_row(tape.matmul(hidden, leaf(p + "ffn_w2")),
                                     leaf(p + "ffn_b2")));
    }
    out.logits = tape.matmul(tape.rmsnorm(x, leaf("final_norm")), leaf("unembed"));

    bool has_span = false;
    for (char s : layout.answer_span) has_span |= (s != 0);
    if (opts.with_label && has_span)
        out.loss = tape.cross_entropy_span(out.logits, layout.tokens, layout.answer_span);
}

// --- training ------------------------------------------------------------

struct TrainExample {
    TextAttributedGraph graph;
    StructuralFeatures features;
    std::vector<int> permutation;
};

inline TrainExample make_example(const GtlmModel& model, const TextAttributedGraph& g) {
    return TrainExample{g, model.features_for(g), identity_permutation(g.num_nodes())};
}

struct LossAndGradients {
    double loss = 0.0;
    std::vector<std::vector<double>> grads;  // aligned with params.arrays
};

inline LossAndGradients compute_gradients(const GtlmModel& model,
                                          const std::vector<TrainExample>& batch) {
    LossAndGradients out;
    out.grads.resize(model.params.arrays.size());
    for (size_t i = 0; i < out.grads.size(); ++i)
        out.grads[i].assign(model.params.arrays[i].size(), 0.0);

    const double inv_b = 1.0 / (double)batch.size();
    for (const TrainExample& ex : batch) {
        ForwardPass<double> fp;
        run_forward<double>(model, ex.graph, ex.features, ex.permutation, {}, fp);
        if (!fp.loss.valid()) fail("EmptyAnswerSpan", "example has no supervised span");
        out.loss += fp.tape.value(fp.loss)[0] * inv_b;
        fp.tape.backward(fp.loss);
        for (size_t i = 0; i < out.grads.size(); ++i) {
            const auto& leaf_grad = fp.tape.grad(fp.param_leaves[i]);
            for (size_t j = 0; j < out.grads[i].size(); ++j)
                out.grads[i][j] += leaf_grad[j] * inv_b;
        }
    }
    return out;
}

struct OptimizerState {
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Adam with a differential learning rate: lr on backbone arrays, lr_bias
// on the structural bias group. Pinned entries are never touched.
inline double train_step(GtlmModel& model, const std::vector<TrainExample>& batch,
                         double lr, double lr_bias, OptimizerState& state) {
    LossAndGradients lg = compute_gradients(model, batch);
    if (!std::isfinite(lg.loss)) fail("NonFiniteLoss", "loss is not finite; step aborted");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, (double)state.step);
    const double bc2 = 1.0 - std::pow(state.beta2, (double)state.step);
    for (size_t i = 0; i < model.params.arrays.size(); ++i) {
        ParamArray& a = model.params.arrays[i];
        const double rate = a.bias_group ? lr_bias : lr;
        if (rate == 0.0) continue;
        if (a.adam_m.empty()) {
            a.adam_m.assign(a.size(), 0.0);
            a.adam_v.assign(a.size(), 0.0);
        }
        for (size_t j = a.pinned_prefix; j < a.size(); ++j) {
            double g = lg.grads[i][j];
            a.adam_m[j] = state.beta1 * a.adam_m[j] + (1.0 - state.beta1) * g;
            a.adam_v[j] = state.beta2 * a.adam_v[j] + (1.0 - state.beta2) * g * g;
            a.value[j] -=
                rate * (a.adam_m[j] / bc1) / (std::sqrt(a.adam_v[j] / bc2) + state.eps);
        }
    }
    return lg.loss;
}

// --- decoding -------------------------------------------------------------

inline std::string generate(const GtlmModel& model, const TextAttributedGraph& g,
                            int max_new_tokens) {
    if (!g.has_question()) fail("EmptyQuestion", "generation needs an appended question");
    StructuralFeatures feats = model.features_for(g);
    std::vector<int> perm = identity_permutation(g.num_nodes());
    std::vector<int> generated;
    for (int step = 0; step < max_new_tokens; ++step) {
        ForwardPass<double> fp;
        ForwardOptions opts;
        opts.with_label = false;
        opts.extra_target_tokens = generated;
        run_forward<double>(model, g, feats, perm, opts, fp);
        std::vector<double> row = fp.logits_row(fp.layout.size() - 1);
        int best = 0;
        for (int j = 1; j < (int)row.size(); ++j)
            if (row[j] > row[best]) best = j;
        if (best == '\n' || best == Tokenizer::kBos) break;
        generated.push_back(best);
    }
    return Tokenizer::decode(generated);
}

// --- checkpoint io ---------------------------------------------------------

inline void save_checkpoint(const std::string& path, const GtlmModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open " + path + " for writing");
    nlohmann::json cfg = model.cfg;
    std::string header = cfg.dump();
    const char magic[4] = {'G', 'T', 'L', 'M'};
    out.write(magic, 4);
    auto write_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<char*>(&v), 8); };
    write_u64(header.size());
    out.write(header.data(), (std::streamsize)header.size());
    write_u64(model.params.arrays.size());
    for (const ParamArray& a : model.params.arrays) {
        write_u64(a.name.size());
        out.write(a.name.data(), (std::streamsize)a.name.size());
        write_u64((std::uint64_t)a.rows);
        write_u64((std::uint64_t)a.cols);
        out.write(reinterpret_cast<const char*>(a.value.data()),
                  (std::streamsize)(a.size() * sizeof(double)));
    }
}

inline GtlmModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "GTLM") fail("ParseError", "bad checkpoint magic");
    auto read_u64 = [&]() {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        if (!in) fail("ParseError", "truncated checkpoint");
        return v;
    };
    std::string header(read_u64(), '\0');
    in.read(header.data(), (std::streamsize)header.size());
    GtlmModel model = GtlmModel::init(nlohmann::json::parse(header).get<ModelConfig>(), 0);
    std::uint64_t count = read_u64();
    if (count != model.params.arrays.size()) fail("ParseError", "parameter array count mismatch");
    for (ParamArray& a : model.params.arrays) {
        std::string name(read_u64(), '\0');
        in.read(name.data(), (std::streamsize)name.size());
        std::uint64_t rows = read_u64(), cols = read_u64();
        if (name != a.name || (int)rows != a.rows || (int)cols != a.cols)
            fail("ParseError", "parameter layout mismatch at " + name);
        in.read(reinterpret_cast<char*>(a.value.data()),
                (std::streamsize)(a.size() * sizeof(double)));
        if (!in) fail("ParseError", "truncated checkpoint payload");
    }
    return model;
}

}  // namespace gtlm

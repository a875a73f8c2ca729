#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gtlm/data.hpp"
#include "gtlm/model.hpp"

namespace gtlm {

struct CheckResult {
    std::string name;
    bool pass = false;
    double worst = 0.0;
    double tolerance = 0.0;
    std::vector<double> magnitudes;
    std::string note;
};

// Fills every trainable bias parameter (including the SPD table beyond the
// pinned bucket) with a symmetric random draw. Property checks must hold
// for arbitrary bias values.
inline void randomize_bias_params(GtlmModel& model, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (ParamArray& a : model.params.arrays) {
        if (!a.bias_group) continue;
        for (size_t j = a.pinned_prefix; j < a.size(); ++j) a.value[j] = dist(rng);
    }
}

inline TextAttributedGraph random_single_node_graph(Rng& rng) {
    static const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ 0123456789.,";
    int len = 12 + (int)(rng() % 24);
    std::string text;
    for (int i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
    TextAttributedGraph g;
    g.nodes.push_back({"solo", text});
    return g;
}

// Property 2: on single-node inputs the biased forward pass equals the
// bias-stripped twin's, for any bias parameter values.
template <typename Real>
CheckResult check_backward_compat(const GtlmModel& model, int trials, std::uint64_t seed,
                                  double tolerance) {
    CheckResult r{"backward_compat", true, 0.0, tolerance, {}, ""};
    GtlmModel stripped = model;
    stripped.cfg.bias_flags = BiasFlags{false, false, false};
    Rng rng = make_rng(seed);
    for (int t = 0; t < trials; ++t) {
        TextAttributedGraph g = random_single_node_graph(rng);
        StructuralFeatures feats = model.features_for(g);
        ForwardPass<Real> biased, plain;
        ForwardOptions opts;
        opts.with_label = false;
        run_forward<Real>(model, g, feats, {}, opts, biased);
        run_forward<Real>(stripped, g, feats, {}, opts, plain);
        double delta = 0.0;
        const auto& a = biased.tape.value(biased.logits);
        const auto& b = plain.tape.value(plain.logits);
        for (size_t i = 0; i < a.size(); ++i)
            delta = std::max(delta, std::abs((double)a[i] - (double)b[i]));
        r.magnitudes.push_back(delta);
        r.worst = std::max(r.worst, delta);
    }
    r.pass = r.worst <= tolerance;
    return r;
}

// Property 1: permuting the prefix nodes permutes the logits per node
// block without changing their values.
template <typename Real>
CheckResult check_equivariance(const GtlmModel& model, const TextAttributedGraph& g,
                               int n_permutations, std::uint64_t seed, double tolerance) {
    CheckResult r{"permutation_equivariance", true, 0.0, tolerance, {}, ""};
    StructuralFeatures feats = model.features_for(g);
    ForwardOptions opts;
    opts.with_label = true;

    auto logits_by_slot = [&](const ForwardPass<Real>& fp) {
        // canonical key: (node, within-node position) -> logits row
        std::map<std::pair<int, int>, std::vector<double>> rows;
        for (int i = 0; i < fp.layout.size(); ++i)
            rows[{fp.layout.node_of[i], fp.layout.pos_in_node[i]}] = fp.logits_row(i);
        return rows;
    };

    ForwardPass<Real> base;
    run_forward<Real>(model, g, feats, identity_permutation(g.num_nodes()), opts, base);
    auto canonical = logits_by_slot(base);

    Rng rng = make_rng(seed);
    for (int t = 0; t < n_permutations; ++t) {
        std::vector<int> perm = identity_permutation(g.num_nodes());
        std::shuffle(perm.begin(), perm.end(), rng);
        ForwardPass<Real> fp;
        run_forward<Real>(model, g, feats, perm, opts, fp);
        auto shuffled = logits_by_slot(fp);
        double delta = 0.0;
        for (const auto& [key, row] : canonical) {
            const auto& other = shuffled.at(key);
            for (size_t j = 0; j < row.size(); ++j)
                delta = std::max(delta, std::abs(row[j] - other[j]));
        }
        r.magnitudes.push_back(delta);
        r.worst = std::max(r.worst, delta);
    }
    r.pass = r.worst <= tolerance;
    return r;
}

// Central-difference gradient check over coordinates sampled uniformly
// across parameter arrays (64-bit arithmetic only).
inline CheckResult check_gradients(GtlmModel& model, const std::vector<TrainExample>& batch,
                                   int n_coords, double eps, double tol,
                                   std::uint64_t seed) {
    CheckResult r{"gradient_check", true, 0.0, tol, {}, ""};
    LossAndGradients analytic = compute_gradients(model, batch);
    auto batch_loss = [&]() {
        double total = 0.0;
        for (const TrainExample& ex : batch) {
            ForwardPass<double> fp;
            run_forward<double>(model, ex.graph, ex.features, ex.permutation, {}, fp);
            total += fp.tape.value(fp.loss)[0];
        }
        return total / (double)batch.size();
    };
    Rng rng = make_rng(seed);
    for (int c = 0; c < n_coords; ++c) {
        int ai = (int)(rng() % model.params.arrays.size());
        ParamArray& a = model.params.arrays[ai];
        size_t j = rng() % a.size();
        double saved = a.value[j];
        a.value[j] = saved + eps;
        double lp = batch_loss();
        a.value[j] = saved - eps;
        double lm = batch_loss();
        a.value[j] = saved;
        double numeric = (lp - lm) / (2.0 * eps);
        double exact = analytic.grads[ai][j];
        double rel = std::abs(exact - numeric) / std::max({std::abs(exact), std::abs(numeric), 1e-6});
        r.magnitudes.push_back(rel);
        r.worst = std::max(r.worst, rel);
    }
    r.pass = r.worst <= tol;
    return r;
}

// --- structural-feature oracles (independent implementations) ---------------

// Floyd-Warshall on the symmetrized adjacency, bucketed with the same
// clamp/sentinel convention as the primary path.
inline IntMatrix oracle_spd(const TextAttributedGraph& g, int max_spd) {
    const int n = g.num_nodes();
    const int inf = 1 << 28;
    std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
    for (int i = 0; i < n; ++i) d[i][i] = 0;
    for (const auto& [u, v] : g.edges) d[u][v] = d[v][u] = 1;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
    IntMatrix buckets(n, n, max_spd);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (d[i][j] < inf) buckets(i, j) = std::min(d[i][j], max_spd - 1);
    return buckets;
}

// Walk probabilities by recomputing each power M^k from scratch.
inline std::vector<RealMatrix> oracle_rrwp(const TextAttributedGraph& g, int steps) {
    const int n = g.num_nodes();
    RealMatrix m(n, n);
    std::vector<int> deg(n, 0);
    for (const auto& [u, v] : g.edges) ++deg[u];
    for (const auto& [u, v] : g.edges) m(u, v) = 1.0 / deg[u];
    auto multiply = [n](const RealMatrix& a, const RealMatrix& b) {
        RealMatrix c(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0;
                for (int k = 0; k < n; ++k) s += a(i, k) * b(k, j);
                c(i, j) = s;
            }
        return c;
    };
    std::vector<RealMatrix> out;
    for (int k = 0; k < steps; ++k) {
        RealMatrix p(n, n);
        for (int i = 0; i < n; ++i) p(i, i) = 1.0;
        for (int t = 0; t < k; ++t) p = multiply(p, m);
        out.push_back(p);
    }
    return out;
}

// --- spectral-kernel basis invariance ----------------------------------------

namespace detail {

inline double kernel_max_delta(const std::vector<ComplexMatrix>& a,
                               const std::vector<ComplexMatrix>& b) {
    double worst = 0.0;
    for (size_t c = 0; c < a.size(); ++c)
        for (size_t i = 0; i < a[c].data.size(); ++i)
            worst = std::max(worst, std::abs(a[c].data[i] - b[c].data[i]));
    return worst;
}

inline ComplexMatrix random_unitary(int n, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    ComplexMatrix m(n, n);
    for (auto& x : m.data) x = Complex(gauss(rng), gauss(rng));
    // Gram-Schmidt columns
    for (int c = 0; c < n; ++c) {
        for (int prev = 0; prev < c; ++prev) {
            Complex dot = 0;
            for (int r = 0; r < n; ++r) dot += std::conj(m(r, prev)) * m(r, c);
            for (int r = 0; r < n; ++r) m(r, c) -= dot * m(r, prev);
        }
        double norm = 0;
        for (int r = 0; r < n; ++r) norm += std::norm(m(r, c));
        norm = std::sqrt(norm);
        for (int r = 0; r < n; ++r) m(r, c) /= norm;
    }
    return m;
}

}  // namespace detail

// Applies (a) random per-column unit phases and (b) random unitary mixing
// inside numerically degenerate eigenvalue blocks; the kernel must not
// move. A non-unitary column rescale serves as the negative control.
inline CheckResult oracle_kernel_invariance(const StructuralFeatures& feats,
                                            const RealMatrix& phi, std::uint64_t seed,
                                            double tolerance = 1e-8,
                                            double degeneracy_gap = 1e-9) {
    CheckResult r{"kernel_basis_invariance", true, 0.0, tolerance, {}, ""};
    const int n = feats.num_nodes();
    Rng rng = make_rng(seed);
    auto base = mag_kernel(feats.mag_eigvecs, phi);

    // (a) unit phases
    ComplexMatrix phased = feats.mag_eigvecs;
    std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
    for (int c = 0; c < n; ++c) {
        Complex ph = std::exp(Complex(0.0, angle(rng)));
        for (int row = 0; row < n; ++row) phased(row, c) *= ph;
    }
    double d1 = detail::kernel_max_delta(base, mag_kernel(phased, phi));
    r.magnitudes.push_back(d1);

    // (b) block unitaries inside degenerate eigenspaces
    ComplexMatrix mixed = feats.mag_eigvecs;
    int start = 0;
    while (start < n) {
        int end = start + 1;
        while (end < n &&
               std::abs(feats.mag_eigvals[end] - feats.mag_eigvals[end - 1]) < degeneracy_gap)
            ++end;
        int width = end - start;
        if (width > 1) {
            ComplexMatrix u = detail::random_unitary(width, rng);
            ComplexMatrix block(n, width);
            for (int row = 0; row < n; ++row)
                for (int c = 0; c < width; ++c) {
                    Complex sum = 0;
                    for (int k = 0; k < width; ++k)
                        sum += feats.mag_eigvecs(row, start + k) * u(k, c);
                    block(row, c) = sum;
                }
            for (int row = 0; row < n; ++row)
                for (int c = 0; c < width; ++c) mixed(row, start + c) = block(row, c);
        }
        start = end;
    }
    double d2 = detail::kernel_max_delta(base, mag_kernel(mixed, phi));
    r.magnitudes.push_back(d2);

    // negative control: a non-unitary scale must break the kernel
    ComplexMatrix broken = feats.mag_eigvecs;
    for (int row = 0; row < n; ++row) broken(row, 0) *= 1.5;
    double d3 = detail::kernel_max_delta(base, mag_kernel(broken, phi));
    r.magnitudes.push_back(d3);

    r.worst = std::max(d1, d2);
    r.pass = r.worst <= tolerance && d3 > tolerance;
    if (d3 <= tolerance) r.note = "negative control failed to move the kernel";
    return r;
}

// Random undirected-ish graph for oracle sweeps: n nodes, random directed
// arcs, no self loops or duplicates.
inline TextAttributedGraph random_oracle_graph(Rng& rng, int max_nodes) {
    int n = 2 + (int)(rng() % (std::uint64_t)(max_nodes - 1));
    TextAttributedGraph g;
    for (int i = 0; i < n; ++i) g.nodes.push_back({"n" + std::to_string(i), std::to_string(i)});
    std::set<std::pair<int, int>> arcs;
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
            if (u != v && rng() % 4 == 0) arcs.insert({u, v});
    for (auto [u, v] : arcs) g.edges.push_back({u, v});
    return g;
}

// SPD vs Floyd-Warshall, RRWP vs matrix powers, Hermiticity, eigenvalue
// range, and reconstruction residual, over a sweep of random graphs.
inline std::vector<CheckResult> check_feature_oracles(int n_graphs, int max_nodes,
                                                      std::uint64_t seed) {
    CheckResult spd_r{"spd_oracle", true, 0.0, 0.0, {}, ""};
    CheckResult rrwp_r{"rrwp_oracle", true, 0.0, 1e-12, {}, ""};
    CheckResult herm_r{"mag_hermitian", true, 0.0, 1e-12, {}, ""};
    CheckResult range_r{"mag_eig_range", true, 0.0, 1e-9, {}, ""};
    CheckResult recon_r{"mag_reconstruction", true, 0.0, 1e-8, {}, ""};

    Rng rng = make_rng(seed);
    const int max_spd = 8, steps = 8;
    const double q = 0.25;
    for (int t = 0; t < n_graphs; ++t) {
        TextAttributedGraph g = random_oracle_graph(rng, max_nodes);
        const int n = g.num_nodes();
        StructuralFeatures f = compute_features(g, max_spd, steps, q);

        IntMatrix fw = oracle_spd(g, max_spd);
        for (size_t i = 0; i < fw.data.size(); ++i)
            spd_r.worst = std::max(spd_r.worst, (double)std::abs(fw.data[i] - f.spd.data[i]));

        auto powers = oracle_rrwp(g, steps);
        for (int k = 0; k < steps; ++k)
            for (size_t i = 0; i < powers[k].data.size(); ++i)
                rrwp_r.worst = std::max(rrwp_r.worst,
                                        std::abs(powers[k].data[i] - f.rrwp[k].data[i]));

        ComplexMatrix lap = magnetic_laplacian(g, q);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                herm_r.worst = std::max(herm_r.worst,
                                        std::abs(lap(i, j) - std::conj(lap(j, i))));

        for (double lambda : f.mag_eigvals)
            range_r.worst = std::max({range_r.worst, -lambda, lambda - 2.0});

        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Complex sum = 0;
                for (int k = 0; k < n; ++k)
                    sum += f.mag_eigvecs(i, k) * f.mag_eigvals[k] * std::conj(f.mag_eigvecs(j, k));
                recon_r.worst = std::max(recon_r.worst, std::abs(sum - lap(i, j)));
            }
    }
    spd_r.pass = spd_r.worst == 0.0;
    rrwp_r.pass = rrwp_r.worst <= rrwp_r.tolerance;
    herm_r.pass = herm_r.worst <= herm_r.tolerance;
    range_r.pass = range_r.worst <= range_r.tolerance;
    recon_r.pass = recon_r.worst <= recon_r.tolerance;
    return {spd_r, rrwp_r, herm_r, range_r, recon_r};
}

// Path graph P_n (directed i -> i+1).
inline TextAttributedGraph path_graph(int n) {
    TextAttributedGraph g;
    for (int i = 0; i < n; ++i) g.nodes.push_back({"n" + std::to_string(i), std::to_string(i)});
    for (int i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1});
    return g;
}

// Complete graph K_n (both directions, so Theta vanishes and the spectrum
// is heavily degenerate; exercises the block-unitary branch).
inline TextAttributedGraph complete_graph(int n) {
    TextAttributedGraph g;
    for (int i = 0; i < n; ++i) g.nodes.push_back({"n" + std::to_string(i), std::to_string(i)});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) g.edges.push_back({i, j});
    return g;
}

// Kernel basis invariance on the two standard fixtures. phi must be a
// function of the eigenvalues (equal lambda -> equal phi row), otherwise
// the kernel is not invariant under degenerate-block mixing; the Deep Set
// from a randomly initialized bias store provides exactly that.
inline std::vector<CheckResult> check_kernel_fixtures(std::uint64_t seed) {
    std::vector<CheckResult> out;
    Rng rng = make_rng(seed);
    BiasConfig cfg;
    cfg.mag_dim = 3;
    cfg.deepset_hidden = 4;
    ParamStore store;
    init_bias_params(store, cfg, seed);
    int which = 0;
    for (TextAttributedGraph g : {path_graph(6), complete_graph(4)}) {
        StructuralFeatures f = compute_features(g, 8, 4, 0.25);
        RealMatrix phi = deepset_phi_matrix(store, cfg, f.mag_eigvals);
        CheckResult r = oracle_kernel_invariance(f, phi, rng(), 1e-8, 1e-8);
        r.name = which++ == 0 ? "kernel_invariance_path6" : "kernel_invariance_k4";
        out.push_back(r);
    }
    return out;
}

// --- message-passing probe ----------------------------------------------------

struct ProbeResult {
    // node-aggregated attention per (layer, head): N x N mean over token pairs
    std::vector<RealMatrix> node_attention;
    // per (layer, head): mean over prefix rows of (same-component mass -
    // cross-component mass), rows renormalized over prefix columns
    std::vector<double> separation;
    int n_layers = 0, n_heads = 0;
    bool cross_defined = true;
};

inline std::vector<int> undirected_components_excluding_prompt(const TextAttributedGraph& g) {
    const int n = g.num_nodes();
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    for (const auto& [u, v] : g.edges)
        if (u != 0 && v != 0) parent[find(u)] = find(v);
    std::vector<int> comp(n);
    for (int i = 0; i < n; ++i) comp[i] = find(i);
    return comp;
}

inline ProbeResult probe_message_passing(const GtlmModel& model,
                                         const TextAttributedGraph& g) {
    ProbeResult result;
    result.n_layers = model.cfg.n_layers;
    result.n_heads = model.cfg.n_heads;

    StructuralFeatures feats = model.features_for(g);
    ForwardPass<double> fp;
    ForwardOptions opts;
    opts.with_label = false;
    opts.capture_attention = true;
    run_forward<double>(model, g, feats, identity_permutation(g.num_nodes()), opts, fp);

    const int n = g.num_nodes();
    const int t = fp.layout.size();
    std::vector<int> comp = undirected_components_excluding_prompt(g);
    bool multi_component = false;
    for (int u = 1; u < n; ++u) multi_component |= (comp[u] != comp[1]);
    result.cross_defined = multi_component;

    for (const auto& probs_ref : fp.attention) {
        const auto& probs = fp.tape.value(probs_ref);
        RealMatrix agg(n, n);
        RealMatrix count(n, n);
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < t; ++j) {
                agg(fp.layout.node_of[i], fp.layout.node_of[j]) += probs[(size_t)i * t + j];
                count(fp.layout.node_of[i], fp.layout.node_of[j]) += 1.0;
            }
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v)
                if (count(u, v) > 0) agg(u, v) /= count(u, v);
        result.node_attention.push_back(agg);

        if (!multi_component) {
            result.separation.push_back(0.0);
            continue;
        }
        double stat = 0.0;
        int rows = 0;
        for (int u = 1; u < n; ++u) {
            double intra = 0.0, cross = 0.0;
            for (int v = 1; v < n; ++v) {
                if (v == u) continue;
                (comp[v] == comp[u] ? intra : cross) += agg(u, v);
            }
            double total = intra + cross;
            if (total <= 0) continue;
            stat += (intra - cross) / total;
            ++rows;
        }
        result.separation.push_back(rows > 0 ? stat / rows : 0.0);
    }
    return result;
}

inline void write_attention_dump(std::ostream& os, const ProbeResult& probe) {
    for (int l = 0; l < probe.n_layers; ++l)
        for (int h = 0; h < probe.n_heads; ++h) {
            const RealMatrix& m = probe.node_attention[(size_t)l * probe.n_heads + h];
            os << "layer " << l << " head " << h << " separation "
               << probe.separation[(size_t)l * probe.n_heads + h] << "\n";
            for (int u = 0; u < m.rows; ++u) {
                for (int v = 0; v < m.cols; ++v) os << (v ? " " : "") << m(u, v);
                os << "\n";
            }
        }
}

// --- evaluation ----------------------------------------------------------------

inline std::string normalize_answer(const std::string& s) {
    size_t first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    size_t last = s.find_last_not_of(" \t\r\n");
    std::string out = s.substr(first, last - first + 1);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return (char)std::tolower(c); });
    return out;
}

struct EvalRecord {
    std::string predicted, gold;
    bool correct = false;
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<EvalRecord> records;
};

// Forced-choice scoring: each candidate label is appended in turn and the
// one with the lowest mean answer-span NLL wins. This is the standard
// cloze evaluation for closed answer sets; a randomly initialized frozen
// backbone has no language prior, so greedy byte decoding cannot surface
// the label strings even when the span likelihoods separate them cleanly.
inline EvalResult evaluate_forced_choice(const GtlmModel& model,
                                         const std::vector<TextAttributedGraph>& dataset,
                                         const std::vector<std::string>& candidates) {
    EvalResult result;
    for (const TextAttributedGraph& g : dataset) {
        StructuralFeatures feats = model.features_for(g);
        std::vector<int> perm = identity_permutation(g.num_nodes());
        EvalRecord rec;
        rec.gold = g.label;
        double best = 0.0;
        for (const std::string& candidate : candidates) {
            TextAttributedGraph scored = g;
            scored.label = candidate;
            ForwardPass<double> fp;
            run_forward<double>(model, scored, feats, perm, {}, fp);
            double nll = fp.loss_value();
            if (rec.predicted.empty() || nll < best) {
                best = nll;
                rec.predicted = candidate;
            }
        }
        rec.correct = normalize_answer(rec.predicted) == normalize_answer(rec.gold);
        result.records.push_back(rec);
        if (rec.correct) result.accuracy += 1.0;
    }
    if (!dataset.empty()) result.accuracy /= (double)dataset.size();
    return result;
}

inline EvalResult evaluate_accuracy(const GtlmModel& model,
                                    const std::vector<TextAttributedGraph>& dataset,
                                    int max_new_tokens = 12) {
    EvalResult result;
    for (const TextAttributedGraph& g : dataset) {
        EvalRecord rec;
        rec.gold = g.label;
        rec.predicted = generate(model, g, max_new_tokens);
        rec.correct = normalize_answer(rec.predicted) == normalize_answer(rec.gold);
        result.records.push_back(rec);
        if (rec.correct) result.accuracy += 1.0;
    }
    if (!dataset.empty()) result.accuracy /= (double)dataset.size();
    return result;
}

// --- dataset-generator oracles ---------------------------------------------

namespace oracle {

// Node labels in GraphQA graphs are the node texts themselves; node 0 is
// the prompt node and excluded from topology questions.
inline std::map<std::string, int> id_by_text(const TextAttributedGraph& g) {
    std::map<std::string, int> m;
    for (int i = 1; i < g.num_nodes(); ++i) m[g.nodes[i].raw_text] = i;
    return m;
}

inline std::vector<int> question_ints(const std::string& q) {
    std::vector<int> out;
    for (size_t i = 0; i < q.size();) {
        if (std::isdigit((unsigned char)q[i])) {
            size_t j = i;
            while (j < q.size() && std::isdigit((unsigned char)q[j])) ++j;
            out.push_back(std::stoi(q.substr(i, j - i)));
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Undirected pair set among non-prompt nodes, by original label (text).
inline std::set<std::pair<int, int>> undirected_pairs(const TextAttributedGraph& g) {
    std::set<std::pair<int, int>> pairs;
    for (const auto& [u, v] : g.edges)
        if (u != 0 && v != 0) pairs.insert({std::min(u, v), std::max(u, v)});
    return pairs;
}

inline std::string graphqa_label(const std::string& task, const TextAttributedGraph& g) {
    const int n = g.num_nodes() - 1;  // exclude prompt
    auto pairs = undirected_pairs(g);
    auto ints = question_ints(g.question);
    auto ids = id_by_text(g);
    auto node = [&](int label) { return ids.at(std::to_string(label)); };

    if (task == "node_count") return std::to_string(n);
    if (task == "edge_count") return std::to_string((int)pairs.size());
    if (task == "cycle_check") {
        UnionFind uf(g.num_nodes());
        for (auto [a, b] : pairs) {
            if (uf.find(a) == uf.find(b)) return "Yes";
            uf.unite(a, b);
        }
        return "No";
    }
    if (task == "triangle_count") {
        // trace(A^3) / 6 on the undirected adjacency
        RealMatrix a(n + 1, n + 1);
        for (auto [x, y] : pairs) a(x, y) = a(y, x) = 1.0;
        double trace = 0;
        for (int i = 1; i <= n; ++i)
            for (int j = 1; j <= n; ++j)
                for (int k = 1; k <= n; ++k) trace += a(i, j) * a(j, k) * a(k, i);
        return std::to_string((int)std::lround(trace / 6.0));
    }
    if (task == "node_degree") {
        int i = node(ints[0]);
        int deg = 0;
        for (auto [a, b] : pairs) deg += (a == i) + (b == i);
        return std::to_string(deg);
    }
    if (task == "connected_nodes") {
        int i = node(ints[0]);
        std::vector<int> nb;
        for (auto [a, b] : pairs) {
            if (a == i) nb.push_back(b);
            if (b == i) nb.push_back(a);
        }
        std::vector<std::string> labels;
        for (int v : nb) labels.push_back(g.nodes[v].raw_text);
        std::sort(labels.begin(), labels.end(),
                  [](const std::string& x, const std::string& y) {
                      return std::stoi(x) < std::stoi(y);
                  });
        if (labels.empty()) return "none";
        std::string out;
        for (size_t j = 0; j < labels.size(); ++j) out += (j ? ", " : "") + labels[j];
        return out;
    }
    if (task == "edge_existence") {
        int a = node(ints[0]), b = node(ints[1]);
        return pairs.count({std::min(a, b), std::max(a, b)}) ? "Yes" : "No";
    }
    if (task == "reachability") {
        UnionFind uf(g.num_nodes());
        for (auto [a, b] : pairs) uf.unite(a, b);
        return uf.find(node(ints[0])) == uf.find(node(ints[1])) ? "Yes" : "No";
    }
    if (task == "shortest_path") {
        // Floyd-Warshall; the generator used BFS
        const int inf = 1 << 28;
        std::vector<std::vector<int>> d(g.num_nodes(), std::vector<int>(g.num_nodes(), inf));
        for (int i = 0; i < g.num_nodes(); ++i) d[i][i] = 0;
        for (auto [a, b] : pairs) d[a][b] = d[b][a] = 1;
        for (int k = 1; k <= n; ++k)
            for (int i = 1; i <= n; ++i)
                for (int j = 1; j <= n; ++j)
                    if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
        return std::to_string(d[node(ints[0])][node(ints[1])]);
    }
    if (task == "directed_reachability") {
        // Warshall transitive closure on the directed arcs; arcs touching the
        // prompt node are query markers, not graph structure
        const int m = g.num_nodes();
        std::vector<std::vector<char>> reach(m, std::vector<char>(m, 0));
        for (const auto& [u, v] : g.edges)
            if (u != 0 && v != 0) reach[u][v] = 1;
        for (int i = 0; i < m; ++i) reach[i][i] = 1;
        for (int k = 0; k < m; ++k)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    if (reach[i][k] && reach[k][j]) reach[i][j] = 1;
        return reach[node(ints[0])][node(ints[1])] ? "Yes" : "No";
    }
    fail("UnknownTask", task);
}

inline std::string component_probe_label(const TextAttributedGraph& g) {
    // letters appear in "Are the nodes X and Y connected? [Yes/No]"
    std::vector<char> letters;
    const std::string& q = g.question;
    size_t at = q.find("nodes ");
    letters.push_back(q[at + 6]);
    letters.push_back(q[at + 12]);
    int x = -1, y = -1;
    for (int i = 1; i < g.num_nodes(); ++i) {
        if (g.nodes[i].raw_text == std::string(1, letters[0])) x = i;
        if (g.nodes[i].raw_text == std::string(1, letters[1])) y = i;
    }
    UnionFind uf(g.num_nodes());
    for (const auto& [u, v] : g.edges)
        if (u != 0 && v != 0) uf.unite(u, v);
    return uf.find(x) == uf.find(y) ? "Yes" : "No";
}

// Text-only oracle: both queried letters must appear among the node texts.
inline std::string letter_presence_label(const TextAttributedGraph& g) {
    const std::string& q = g.question;
    size_t at = q.find(" and ");
    char x = q[at - 1];
    char y = q[at + 5];
    bool have_x = false, have_y = false;
    for (int i = 1; i < g.num_nodes(); ++i) {
        if (g.nodes[i].raw_text == std::string(1, x)) have_x = true;
        if (g.nodes[i].raw_text == std::string(1, y)) have_y = true;
    }
    return have_x && have_y ? "Yes" : "No";
}

// Re-parses the family-tree graph from node texts and edge directions
// (bidirectional pair = spouse, single direction = parent -> child) and
// resolves the templated question independently.
inline std::string family_tree_label(const TextAttributedGraph& g) {
    struct P {
        std::string name, color, food, city;
        bool male = false;
        int born = 0;
        int spouse = -1;
        std::vector<int> children;
    };
    auto field = [](const std::string& text, const std::string& key) {
        size_t at = text.find(key);
        size_t start = at + key.size();
        size_t end = text.find('.', start);
        return text.substr(start, end - start);
    };
    const int n = g.num_nodes();
    std::vector<P> people(n);
    for (int i = 1; i < n; ++i) {
        const std::string& t = g.nodes[i].raw_text;
        people[i].name = t.substr(0, t.find('.'));
        people[i].male = field(t, "Gender: ") == "male";
        people[i].born = std::stoi(field(t, "Born: "));
        people[i].color = field(t, "Favorite color: ");
        people[i].food = field(t, "Favorite food: ");
        people[i].city = field(t, "Favorite city: ");
    }
    std::set<std::pair<int, int>> arc_set;
    for (const auto& [u, v] : g.edges)
        if (u != 0) arc_set.insert({u, v});
    for (auto [u, v] : arc_set) {
        if (arc_set.count({v, u})) {
            if (u < v) {
                people[u].spouse = v;
                people[v].spouse = u;
            }
        } else {
            people[u].children.push_back(v);
        }
    }

    const std::string& q = g.question;
    // "What is the favorite {attr} of {name}'s {rest}"
    size_t attr_start = std::string("What is the favorite ").size();
    size_t attr_end = q.find(" of ", attr_start);
    std::string attr = q.substr(attr_start, attr_end - attr_start);
    size_t poss = q.find("'s ", attr_end);
    std::string name = q.substr(attr_end + 4, poss - (attr_end + 4));
    std::string rest = q.substr(poss + 3);
    if (!rest.empty() && rest.back() == '?') rest.pop_back();

    int anchor = -1;
    for (int i = 1; i < n; ++i)
        if (people[i].name == name) anchor = i;
    if (anchor < 0) fail("OracleError", "anchor not found: " + name);

    int target = -1;
    if (rest == "spouse") {
        target = people[anchor].spouse;
    } else {
        // "{ord} oldest {kind}"
        std::istringstream is(rest);
        std::string ord, oldest, kind;
        is >> ord >> oldest >> kind;
        int k = std::stoi(ord);  // "2nd" -> 2
        bool male = kind == "son" || kind == "grandson";
        std::vector<int> pool;
        if (kind == "son" || kind == "daughter") {
            for (int c : people[anchor].children)
                if (people[c].male == male) pool.push_back(c);
        } else {
            for (int c : people[anchor].children)
                for (int gc : people[c].children)
                    if (people[gc].male == male) pool.push_back(gc);
        }
        std::stable_sort(pool.begin(), pool.end(),
                         [&](int a, int b) { return people[a].born < people[b].born; });
        target = pool.at(k - 1);
    }
    if (attr == "color") return people[target].color;
    if (attr == "food") return people[target].food;
    return people[target].city;
}

// Rebuilds the typed corporate KG from node texts (relation kind follows
// from endpoint types) and answers by exhaustive traversal.
inline std::string kgqa_label(const TextAttributedGraph& g) {
    const int n = g.num_nodes();
    enum Kind { kPerson, kProject, kResource, kPrompt };
    std::vector<Kind> kind(n, kPrompt);
    std::vector<std::string> name(n);
    std::map<std::string, int> by_name;
    for (int i = 1; i < n; ++i) {
        const std::string& t = g.nodes[i].raw_text;
        size_t colon = t.find(": ");
        std::string prefix = t.substr(0, colon);
        kind[i] = prefix == "Person" ? kPerson : (prefix == "Project" ? kProject : kResource);
        name[i] = t.substr(colon + 2);
        by_name[name[i]] = i;
    }
    std::vector<int> boss(n, -1);
    std::vector<std::set<int>> can_access(n), requires_(n);
    for (const auto& [u, v] : g.edges) {
        if (u == 0) continue;
        if (kind[u] == kPerson && kind[v] == kPerson) boss[u] = v;
        if (kind[u] == kPerson && kind[v] == kResource) can_access[u].insert(v);
        if (kind[u] == kProject && kind[v] == kResource) requires_[u].insert(v);
    }

    const std::string& q = g.question;
    if (q.rfind("Is ", 0) == 0) {  // CEO question
        std::string who = q.substr(3, q.find(" the CEO") - 3);
        return boss[by_name.at(who)] < 0 ? "Yes" : "No";
    }
    if (q.rfind("Does ", 0) == 0) {  // transitive reports-to
        size_t rep = q.find(" report to ");
        std::string a = q.substr(5, rep - 5);
        size_t tail = q.find(", directly");
        std::string b = q.substr(rep + 11, tail - (rep + 11));
        int cur = boss[by_name.at(a)];
        int target = by_name.at(b);
        while (cur >= 0) {
            if (cur == target) return "Yes";
            cur = boss[cur];
        }
        return "No";
    }
    // "Can {person} access all resources required by {project}?"
    size_t acc = q.find(" access all resources required by ");
    std::string person = q.substr(4, acc - 4);
    std::string project = q.substr(acc + 34);
    project.pop_back();  // '?'
    for (int r : requires_[by_name.at(project)])
        if (!can_access[by_name.at(person)].count(r)) return "No";
    return "Yes";
}

inline std::string dataset_label(const std::string& task, const TextAttributedGraph& g) {
    if (task == "component_probe") return component_probe_label(g);
    if (task == "letter_presence") return letter_presence_label(g);
    if (task == "family_tree") return family_tree_label(g);
    if (task == "kgqa") return kgqa_label(g);
    return graphqa_label(task, g);
}

}  // namespace oracle

// Generator vs oracle agreement. `task` names either a GraphQA question
// family or one of the dedicated generators.
inline CheckResult check_generator_oracle(const std::string& task, int count,
                                          std::uint64_t seed) {
    CheckResult r{"generator_oracle_" + task, true, 0.0, 0.0, {}, ""};
    TaskSpec spec;
    spec.task = task;
    spec.count = count;
    spec.seed = seed;
    if (task == "component_probe") {
        spec.min_nodes = 8;
        spec.max_nodes = 14;
    }
    int mismatches = 0;
    for (const TextAttributedGraph& g : generate_dataset(spec)) {
        if (oracle::dataset_label(task, g) != g.label) ++mismatches;
    }
    r.worst = mismatches;
    r.pass = mismatches == 0;
    if (mismatches) r.note = std::to_string(mismatches) + " label mismatches";
    return r;
}

}  // namespace gtlm

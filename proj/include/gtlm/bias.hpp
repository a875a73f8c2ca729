#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gtlm/features.hpp"
#include "gtlm/params.hpp"
#include "gtlm/tape.hpp"

namespace gtlm {

struct BiasConfig {
    int n_layers = 2;
    int n_heads = 4;
    int max_spd = 8;
    int rrwp_steps = 16;
    int rrwp_hidden = 64;
    double mag_q = 0.25;
    int mag_dim = 32;
    int deepset_hidden = 16;
    int mag_hidden = 64;
};

struct ParamCountBreakdown {
    long spd = 0, rrwp = 0, mag = 0, total = 0;
};

// Closed-form trainable parameter counts. The SPD table stores max_spd + 1
// columns per layer/head but bucket 0 is pinned, so L*H*max_spd entries train.
inline ParamCountBreakdown count_parameters(const BiasConfig& c) {
    ParamCountBreakdown b;
    const long L = c.n_layers, H = c.n_heads;
    b.spd = L * H * c.max_spd;
    b.rrwp = L * ((long)c.rrwp_steps * c.rrwp_hidden + c.rrwp_hidden +
                  (long)c.rrwp_hidden * H + H);
    long deepset = (long)c.deepset_hidden + c.deepset_hidden +        // shared lift
                   2L * c.deepset_hidden * c.mag_dim + c.mag_dim;     // combiner W2
    b.mag = deepset + L * (2L * c.mag_dim * c.mag_hidden + c.mag_hidden +
                           (long)c.mag_hidden * H + H);
    b.total = b.spd + b.rrwp + b.mag;
    return b;
}

namespace detail {

inline void fill_uniform(std::vector<double>& v, double scale, Rng& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& x : v) x = dist(rng);
}

}  // namespace detail

// Registers and initializes all structure-to-attention parameters in the
// store. SPD tables start at zero (bucket 0 stays pinned there); affine
// weights use a symmetric fan-in-scaled draw.
inline void init_bias_params(ParamStore& store, const BiasConfig& c, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    auto affine = [&](const std::string& name, int in, int out) {
        int wi = store.add(name + "_w", in, out, true);
        detail::fill_uniform(store.arrays[wi].value, 1.0 / std::sqrt((double)in), rng);
        store.add(name + "_b", 1, out, true);
    };
    for (int l = 0; l < c.n_layers; ++l) {
        std::string p = "bias.layer" + std::to_string(l) + ".";
        store.add(p + "spd_table", c.max_spd + 1, c.n_heads, true,
                  /*pinned_prefix=*/c.n_heads);
        affine(p + "rrwp1", c.rrwp_steps, c.rrwp_hidden);
        affine(p + "rrwp2", c.rrwp_hidden, c.n_heads);
        affine(p + "mag1", 2 * c.mag_dim, c.mag_hidden);
        affine(p + "mag2", c.mag_hidden, c.n_heads);
    }
    affine("bias.deepset.lift", 1, c.deepset_hidden);
    affine("bias.deepset.combine", 2 * c.deepset_hidden, c.mag_dim);
}

// Per-graph constants feeding the bias MLPs, derived once from the
// structural features.
struct PairFeatures {
    int num_nodes = 0;
    std::vector<int> spd_bucket;        // N^2, row-major (u, v)
    std::vector<double> rrwp_rows;      // N^2 x K
    std::vector<double> kernel_re;      // N^2 x N  Re(V(u,i) conj(V(v,i)))
    std::vector<double> kernel_im;      // N^2 x N
    std::vector<double> eigvals;        // N x 1
    int rrwp_steps = 0;

    static PairFeatures from(const StructuralFeatures& f) {
        PairFeatures p;
        const int n = f.num_nodes();
        const int k = f.rrwp_steps();
        p.num_nodes = n;
        p.rrwp_steps = k;
        p.spd_bucket.resize((size_t)n * n);
        p.rrwp_rows.resize((size_t)n * n * k);
        p.kernel_re.resize((size_t)n * n * n);
        p.kernel_im.resize((size_t)n * n * n);
        p.eigvals = f.mag_eigvals;
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v) {
                size_t row = (size_t)u * n + v;
                p.spd_bucket[row] = (u == v) ? 0 : f.spd(u, v);
                for (int s = 0; s < k; ++s) p.rrwp_rows[row * k + s] = f.rrwp[s](u, v);
                for (int i = 0; i < n; ++i) {
                    Complex prod = f.mag_eigvecs(u, i) * std::conj(f.mag_eigvecs(v, i));
                    p.kernel_re[row * n + i] = prod.real();
                    p.kernel_im[row * n + i] = prod.imag();
                }
            }
        return p;
    }
};

// Plain-double Deep Set evaluation: phi(lambda_i) = gelu(W2 [lift(lambda_i)
// (+) mean(lift(lambda))]). Row i of the result is the d_Mag feature of
// eigenvalue i. Mirrors the tape path; used for spectral-kernel checks.
inline RealMatrix deepset_phi_matrix(const ParamStore& store, const BiasConfig& cfg,
                                     const std::vector<double>& lambda) {
    const int n = static_cast<int>(lambda.size());
    const int dh = cfg.deepset_hidden;
    const auto& lw = store.by_name("bias.deepset.lift_w").value;
    const auto& lb = store.by_name("bias.deepset.lift_b").value;
    const auto& cw = store.by_name("bias.deepset.combine_w").value;
    const auto& cb = store.by_name("bias.deepset.combine_b").value;

    RealMatrix lift(n, dh);
    std::vector<double> pooled(dh, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dh; ++j) {
            lift(i, j) = lambda[i] * lw[j] + lb[j];
            pooled[j] += lift(i, j) / n;
        }
    RealMatrix phi(n, cfg.mag_dim);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < cfg.mag_dim; ++c) {
            double z = cb[c];
            for (int j = 0; j < dh; ++j) z += lift(i, j) * cw[(size_t)j * cfg.mag_dim + c];
            for (int j = 0; j < dh; ++j)
                z += pooled[j] * cw[(size_t)(dh + j) * cfg.mag_dim + c];
            phi(i, c) = Tape<double>::gelu_value(z);
        }
    return phi;
}

// Basis-invariant spectral kernel K[:, :, c] = V diag(phi[:, c]) V^dagger,
// evaluated densely for inspection and invariance checks.
inline std::vector<ComplexMatrix> mag_kernel(const ComplexMatrix& eigvecs,
                                             const RealMatrix& phi) {
    const int n = eigvecs.rows;
    const int channels = phi.cols;
    std::vector<ComplexMatrix> kernel(channels, ComplexMatrix(n, n));
    for (int c = 0; c < channels; ++c)
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v) {
                Complex sum = 0;
                for (int i = 0; i < n; ++i)
                    sum += eigvecs(u, i) * phi(i, c) * std::conj(eigvecs(v, i));
                kernel[c](u, v) = sum;
            }
    return kernel;
}

struct BiasFlags {
    bool spd = true, rrwp = true, mag = true;
    bool any() const { return spd || rrwp || mag; }
};

// Builds the per-layer N^2 x H node-pair bias tensors on an autodiff tape.
// `leaf` resolves a parameter name to its tape leaf. Diagonal (u == v) rows
// are structurally zero: the SPD gather skips the pinned bucket and the
// MLP outputs are multiplied by a zero row mask.
template <typename Real>
std::vector<typename Tape<Real>::Ref> build_node_bias(
    Tape<Real>& tape, const BiasConfig& cfg, const BiasFlags& flags,
    const PairFeatures& pf,
    const std::function<typename Tape<Real>::Ref(const std::string&)>& leaf) {
    using Ref = typename Tape<Real>::Ref;
    const int n = pf.num_nodes;
    const size_t n2 = (size_t)n * n;

    std::vector<Real> diag_mask(n2, Real(1));
    for (int u = 0; u < n; ++u) diag_mask[(size_t)u * n + u] = Real(0);

    auto mlp = [&](Ref input, const std::string& prefix) {
        Ref h = tape.gelu(tape.add_row(tape.matmul(input, leaf(prefix + "1_w")),
                                       leaf(prefix + "1_b")));
        return tape.add_row(tape.matmul(h, leaf(prefix + "2_w")), leaf(prefix + "2_b"));
    };

    Ref rrwp_input, kernel_input;
    if (flags.rrwp)
        rrwp_input = tape.leaf((int)n2, pf.rrwp_steps, pf.rrwp_rows.data());
    if (flags.mag) {
        // Deep Set eigenvalue transform phi, shared across layers.
        Ref lambda = tape.leaf(n, 1, pf.eigvals.data());
        Ref lift = tape.add_row(tape.matmul(lambda, leaf("bias.deepset.lift_w")),
                                leaf("bias.deepset.lift_b"));
        Ref pooled = tape.repeat_rows(tape.mean_rows(lift), n);
        Ref phi = tape.gelu(
            tape.add_row(tape.matmul(tape.concat_cols({lift, pooled}),
                                     leaf("bias.deepset.combine_w")),
                         leaf("bias.deepset.combine_b")));
        // K[u,v,c] = sum_i V(u,i) phi(i,c) conj(V(v,i)); phi is real so the
        // real/imag channels are linear in phi.
        Ref re = tape.matmul(tape.leaf((int)n2, n, pf.kernel_re.data()), phi);
        Ref im = tape.matmul(tape.leaf((int)n2, n, pf.kernel_im.data()), phi);
        kernel_input = tape.concat_cols({re, im});
    }

    std::vector<Ref> per_layer(cfg.n_layers);
    for (int l = 0; l < cfg.n_layers; ++l) {
        std::string p = "bias.layer" + std::to_string(l) + ".";
        Ref acc;
        if (flags.spd) {
            acc = tape.gather_rows(leaf(p + "spd_table"), pf.spd_bucket,
                                   /*structural_zero_row0=*/true);
        }
        if (flags.rrwp) {
            Ref b = tape.row_scale(mlp(rrwp_input, p + "rrwp"), diag_mask);
            acc = acc.valid() ? tape.add(acc, b) : b;
        }
        if (flags.mag) {
            Ref b = tape.row_scale(mlp(kernel_input, p + "mag"), diag_mask);
            acc = acc.valid() ? tape.add(acc, b) : b;
        }
        per_layer[l] = acc;
    }
    return per_layer;
}

}  // namespace gtlm

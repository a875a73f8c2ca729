#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "gtlm/common.hpp"

namespace gtlm {

// Reverse-mode autodiff over dense row-major matrices. One Tape instance
// corresponds to one forward pass; nodes are replayed in reverse creation
// order during backward(). Real is float or double so the same graph can
// run in either precision.
template <typename Real>
class Tape {
public:
    struct Ref {
        int idx = -1;
        int rows = 0;
        int cols = 0;
        bool valid() const { return idx >= 0; }
    };

    // Leaf fed from a double array (parameters or constants).
    Ref leaf(int rows, int cols, const double* data) {
        Ref r = alloc(rows, cols);
        auto& v = value(r);
        for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Real>(data[i]);
        return r;
    }

    Ref zeros(int rows, int cols) { return alloc(rows, cols); }

    std::vector<Real>& value(Ref r) { return nodes_[r.idx].val; }
    std::vector<Real>& grad(Ref r) { return nodes_[r.idx].grad; }
    const std::vector<Real>& value(Ref r) const { return nodes_[r.idx].val; }

    // C = A * B
    Ref matmul(Ref a, Ref b) {
        if (a.cols != b.rows) fail("ShapeMismatch", "matmul inner dims");
        Ref c = alloc(a.rows, b.cols);
        gemm(value(a).data(), value(b).data(), value(c).data(), a.rows, a.cols, b.cols,
             false, false);
        nodes_[c.idx].backward = [this, a, b, c]() {
            // gA += gC * B^T ; gB += A^T * gC
            gemm_acc(grad(c).data(), value(b).data(), grad(a).data(), c.rows, c.cols, a.cols,
                     false, true);
            gemm_acc(value(a).data(), grad(c).data(), grad(b).data(), a.cols, a.rows, c.cols,
                     true, false);
        };
        return c;
    }

    // C = A * B^T  (A: m x k, B: n x k)
    Ref matmul_nt(Ref a, Ref b) {
        if (a.cols != b.cols) fail("ShapeMismatch", "matmul_nt inner dims");
        Ref c = alloc(a.rows, b.rows);
        gemm(value(a).data(), value(b).data(), value(c).data(), a.rows, a.cols, b.rows,
             false, true);
        nodes_[c.idx].backward = [this, a, b, c]() {
            // gA += gC * B ; gB += gC^T * A
            gemm_acc(grad(c).data(), value(b).data(), grad(a).data(), c.rows, b.rows, a.cols,
                     false, false);
            gemm_acc(grad(c).data(), value(a).data(), grad(b).data(), c.cols, c.rows, a.cols,
                     true, false);
        };
        return c;
    }

    Ref add(Ref a, Ref b) {
        if (a.rows != b.rows || a.cols != b.cols) fail("ShapeMismatch", "add shapes");
        Ref c = alloc(a.rows, a.cols);
        auto& va = value(a);
        auto& vb = value(b);
        auto& vc = value(c);
        for (size_t i = 0; i < vc.size(); ++i) vc[i] = va[i] + vb[i];
        nodes_[c.idx].backward = [this, a, b, c]() {
            auto& gc = grad(c);
            auto& ga = grad(a);
            auto& gb = grad(b);
            for (size_t i = 0; i < gc.size(); ++i) {
                ga[i] += gc[i];
                gb[i] += gc[i];
            }
        };
        return c;
    }

    // A (m x n) + row vector b (1 x n) broadcast over rows.
    Ref add_row(Ref a, Ref b) {
        if (b.rows != 1 || a.cols != b.cols) fail("ShapeMismatch", "add_row shapes");
        Ref c = alloc(a.rows, a.cols);
        auto& va = value(a);
        auto& vb = value(b);
        auto& vc = value(c);
        for (int r = 0; r < a.rows; ++r)
            for (int j = 0; j < a.cols; ++j)
                vc[idx2(r, j, a.cols)] = va[idx2(r, j, a.cols)] + vb[j];
        nodes_[c.idx].backward = [this, a, b, c]() {
            auto& gc = grad(c);
            auto& ga = grad(a);
            auto& gb = grad(b);
            for (int r = 0; r < c.rows; ++r)
                for (int j = 0; j < c.cols; ++j) {
                    ga[idx2(r, j, c.cols)] += gc[idx2(r, j, c.cols)];
                    gb[j] += gc[idx2(r, j, c.cols)];
                }
        };
        return c;
    }

    Ref scale(Ref a, double factor) {
        Ref c = alloc(a.rows, a.cols);
        auto& va = value(a);
        auto& vc = value(c);
        const Real f = static_cast<Real>(factor);
        for (size_t i = 0; i < vc.size(); ++i) vc[i] = va[i] * f;
        nodes_[c.idx].backward = [this, a, c, f]() {
            auto& gc = grad(c);
            auto& ga = grad(a);
            for (size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i] * f;
        };
        return c;
    }

    // Multiplies each row r by mask[r]; used to pin intra-node bias rows to 0.
    Ref row_scale(Ref a, std::vector<Real> mask) {
        if (static_cast<int>(mask.size()) != a.rows) fail("ShapeMismatch", "row_scale mask");
        Ref c = alloc(a.rows, a.cols);
        auto& va = value(a);
        auto& vc = value(c);
        for (int r = 0; r < a.rows; ++r)
            for (int j = 0; j < a.cols; ++j)
                vc[idx2(r, j, a.cols)] = va[idx2(r, j, a.cols)] * mask[r];
        nodes_[c.idx].backward = [this, a, c, mask = std::move(mask)]() {
            auto& gc = grad(c);
            auto& ga = grad(a);
            for (int r = 0; r < c.rows; ++r)
                for (int j = 0; j < c.cols; ++j)
                    ga[idx2(r, j, c.cols)] += gc[idx2(r, j, c.cols)] * mask[r];
        };
        return c;
    }

    Ref gelu(Ref a) {
        Ref c = alloc(a.rows, a.cols);
        auto& va = value(a);
        auto& vc = value(c);
        for (size_t i = 0; i < vc.size(); ++i) vc[i] = gelu_value(va[i]);
        nodes_[c.idx].backward = [this, a, c]() {
            auto& gc = grad(c);
            auto& ga = grad(a);
            auto& va = value(a);
            for (size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i] * gelu_derivative(va[i]);
        };
        return c;
    }

    // Row-wise RMS normalization with a learned per-channel gain.
    Ref rmsnorm(Ref a, Ref gain) {
        if (gain.rows != 1 || gain.cols != a.cols) fail("ShapeMismatch", "rmsnorm gain");
        Ref c = alloc(a.rows, a.cols);
        const int n = a.cols;
        auto& va = value(a);
        auto& vg = value(gain);
        auto& vc = value(c);
        std::vector<Real> inv_rms(a.rows);
        for (int r = 0; r < a.rows; ++r) {
            Real ss = 0;
            for (int j = 0; j < n; ++j) ss += va[idx2(r, j, n)] * va[idx2(r, j, n)];
            inv_rms[r] = Real(1) / std::sqrt(ss / Real(n) + Real(1e-8));
            for (int j = 0; j < n; ++j)
                vc[idx2(r, j, n)] = va[idx2(r, j, n)] * inv_rms[r] * vg[j];
        }
        nodes_[c.idx].backward = [this, a, gain, c, inv_rms = std::move(inv_rms)]() {
            const int n = c.cols;
            auto& gc = grad(c);
            auto& ga = grad(a);
            auto& gg = grad(gain);
            auto& va = value(a);
            auto& vg = value(gain);
            for (int r = 0; r < c.rows; ++r) {
                Real dot = 0;
                for (int j = 0; j < n; ++j)
                    dot += gc[idx2(r, j, n)] * vg[j] * va[idx2(r, j, n)];
                for (int j = 0; j < n; ++j) {
                    Real x = va[idx2(r, j, n)];
                    ga[idx2(r, j, n)] += gc[idx2(r, j, n)] * vg[j] * inv_rms[r] -
                                         x * dot * inv_rms[r] * inv_rms[r] * inv_rms[r] /
                                             Real(n);
                    gg[j] += gc[idx2(r, j, n)] * x * inv_rms[r];
                }
            }
        };
        return c;
    }

    // Rotary rotation of every row by its token position (angles
    // position * base^(-2m/d) per 2-D pair). Isometry; backward rotates
    // the gradient by the opposite angle.
    Ref rope(Ref a, const std::vector<int>& positions, double base) {
        if (static_cast<int>(positions.size()) != a.rows) fail("ShapeMismatch", "rope positions");
        if (a.cols % 2 != 0) fail("ShapeMismatch", "rope needs even head dim");
        Ref c = alloc(a.rows, a.cols);
        const int d = a.cols;
        std::vector<double> freq(d / 2);
        for (int m = 0; m < d / 2; ++m) freq[m] = std::pow(base, -2.0 * m / d);
        auto& va = value(a);
        auto& vc = value(c);
        for (int r = 0; r < a.rows; ++r)
            for (int m = 0; m < d / 2; ++m) {
                double ang = positions[r] * freq[m];
                Real cs = static_cast<Real>(std::cos(ang));
                Real sn = static_cast<Real>(std::sin(ang));
                Real x = va[idx2(r, 2 * m, d)], y = va[idx2(r, 2 * m + 1, d)];
                vc[idx2(r, 2 * m, d)] = x * cs - y * sn;
                vc[idx2(r, 2 * m + 1, d)] = x * sn + y * cs;
            }
        nodes_[c.idx].backward = [this, a, c, positions, freq = std::move(freq)]() {
            const int d = c.cols;
            auto& gc = grad(c);
            auto& ga = grad(a);
            for (int r = 0; r < c.rows; ++r)
                for (int m = 0; m < d / 2; ++m) {
                    double ang = positions[r] * freq[m];
                    Real cs = static_cast<Real>(std::cos(ang));
                    Real sn = static_cast<Real>(std::sin(ang));
                    Real gx = gc[idx2(r, 2 * m, d)], gy = gc[idx2(r, 2 * m + 1, d)];
                    ga[idx2(r, 2 * m, d)] += gx * cs + gy * sn;
                    ga[idx2(r, 2 * m + 1, d)] += -gx * sn + gy * cs;
                }
        };
        return c;
    }

    Ref slice_cols(Ref a, int start, int width) {
        if (start < 0 || start + width > a.cols) fail("ShapeMismatch", "slice_cols range");
        Ref c = alloc(a.rows, width);
        auto& va = value(a);
        auto& vc = value(c);
        for (int r = 0; r < a.rows; ++r)
            for (int j = 0; j < width; ++j)
                vc[idx2(r, j, width)] = va[idx2(r, start + j, a.cols)];
        nodes_[c.idx].backward = [this, a, c, start]() {
            auto& gc = grad(c);
            auto& ga = grad(a);
            for (int r = 0; r < c.rows; ++r)
                for (int j = 0; j < c.cols; ++j)
                    ga[idx2(r, start + j, a.cols)] += gc[idx2(r, j, c.cols)];
        };
        return c;
    }

    Ref concat_cols(const std::vector<Ref>& parts) {
        int total = 0;
        for (const Ref& p : parts) total += p.cols;
        Ref c = alloc(parts.front().rows, total);
        auto& vc = value(c);
        int offset = 0;
        for (const Ref& p : parts) {
            auto& vp = value(p);
            for (int r = 0; r < p.rows; ++r)
                for (int j = 0; j < p.cols; ++j)
                    vc[idx2(r, offset + j, total)] = vp[idx2(r, j, p.cols)];
            offset += p.cols;
        }
        nodes_[c.idx].backward = [this, parts, c]() {
            auto& gc = grad(c);
            int offset = 0;
            for (const Ref& p : parts) {
                auto& gp = grad(p);
                for (int r = 0; r < p.rows; ++r)
                    for (int j = 0; j < p.cols; ++j)
                        gp[idx2(r, j, p.cols)] += gc[idx2(r, offset + j, c.cols)];
                offset += p.cols;
            }
        };
        return c;
    }

    Ref mean_rows(Ref a) {
        Ref c = alloc(1, a.cols);
        auto& va = value(a);
        auto& vc = value(c);
        for (int r = 0; r < a.rows; ++r)
            for (int j = 0; j < a.cols; ++j) vc[j] += va[idx2(r, j, a.cols)];
        for (int j = 0; j < a.cols; ++j) vc[j] /= Real(a.rows);
        nodes_[c.idx].backward = [this, a, c]() {
            auto& gc = grad(c);
            auto& ga = grad(a);
            const Real inv = Real(1) / Real(a.rows);
            for (int r = 0; r < a.rows; ++r)
                for (int j = 0; j < a.cols; ++j) ga[idx2(r, j, a.cols)] += gc[j] * inv;
        };
        return c;
    }

    Ref repeat_rows(Ref a, int count) {
        if (a.rows != 1) fail("ShapeMismatch", "repeat_rows expects a row vector");
        Ref c = alloc(count, a.cols);
        auto& va = value(a);
        auto& vc = value(c);
        for (int r = 0; r < count; ++r)
            for (int j = 0; j < a.cols; ++j) vc[idx2(r, j, a.cols)] = va[j];
        nodes_[c.idx].backward = [this, a, c]() {
            auto& gc = grad(c);
            auto& ga = grad(a);
            for (int r = 0; r < c.rows; ++r)
                for (int j = 0; j < c.cols; ++j) ga[j] += gc[idx2(r, j, c.cols)];
        };
        return c;
    }

    // Row gather. With structural_zero_row0, index 0 emits a zero row and
    // routes no gradient back to the table (the pinned SPD bucket).
    Ref gather_rows(Ref table, std::vector<int> indices, bool structural_zero_row0 = false) {
        Ref c = alloc(static_cast<int>(indices.size()), table.cols);
        auto& vt = value(table);
        auto& vc = value(c);
        for (int r = 0; r < c.rows; ++r) {
            int src = indices[r];
            if (src < 0 || src >= table.rows) fail("BucketOutOfRange", "gather index");
            if (structural_zero_row0 && src == 0) continue;
            for (int j = 0; j < table.cols; ++j)
                vc[idx2(r, j, table.cols)] = vt[idx2(src, j, table.cols)];
        }
        nodes_[c.idx].backward = [this, table, c, indices = std::move(indices),
                                  structural_zero_row0]() {
            auto& gc = grad(c);
            auto& gt = grad(table);
            for (int r = 0; r < c.rows; ++r) {
                int src = indices[r];
                if (structural_zero_row0 && src == 0) continue;
                for (int j = 0; j < c.cols; ++j)
                    gt[idx2(src, j, c.cols)] += gc[idx2(r, j, c.cols)];
            }
        };
        return c;
    }

    // Broadcast of an N^2 x H node-pair bias to a T x T token-pair matrix
    // for one head: out(i, j) = bias(node[i] * N + node[j], head).
    Ref broadcast_pairs(Ref node_bias, const std::vector<int>& node_of, int num_nodes,
                        int head) {
        const int t = static_cast<int>(node_of.size());
        Ref c = alloc(t, t);
        auto& vb = value(node_bias);
        auto& vc = value(c);
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < t; ++j)
                vc[idx2(i, j, t)] =
                    vb[idx2(node_of[i] * num_nodes + node_of[j], head, node_bias.cols)];
        nodes_[c.idx].backward = [this, node_bias, c, node_of, num_nodes, head]() {
            auto& gc = grad(c);
            auto& gb = grad(node_bias);
            const int t = c.rows;
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < t; ++j)
                    gb[idx2(node_of[i] * num_nodes + node_of[j], head, node_bias.cols)] +=
                        gc[idx2(i, j, t)];
        };
        return c;
    }

    // Row softmax over visible positions; invisible entries get a -1e30
    // additive penalty so they underflow to exactly 0 in both precisions.
    Ref softmax_masked(Ref scores, const std::vector<char>& visible) {
        if (static_cast<int>(visible.size()) !=
            scores.rows * scores.cols)
            fail("ShapeMismatch", "softmax mask size");
        Ref c = alloc(scores.rows, scores.cols);
        const int n = scores.cols;
        auto& vs = value(scores);
        auto& vc = value(c);
        for (int r = 0; r < scores.rows; ++r) {
            Real mx = -std::numeric_limits<Real>::infinity();
            for (int j = 0; j < n; ++j) {
                Real s = visible[idx2(r, j, n)] ? vs[idx2(r, j, n)] : Real(-1e30);
                if (s > mx) mx = s;
            }
            Real sum = 0;
            for (int j = 0; j < n; ++j) {
                Real s = visible[idx2(r, j, n)] ? std::exp(vs[idx2(r, j, n)] - mx) : Real(0);
                vc[idx2(r, j, n)] = s;
                sum += s;
            }
            for (int j = 0; j < n; ++j) vc[idx2(r, j, n)] /= sum;
        }
        nodes_[c.idx].backward = [this, scores, c]() {
            const int n = c.cols;
            auto& gc = grad(c);
            auto& gs = grad(scores);
            auto& vc = value(c);
            for (int r = 0; r < c.rows; ++r) {
                Real dot = 0;
                for (int j = 0; j < n; ++j) dot += gc[idx2(r, j, n)] * vc[idx2(r, j, n)];
                for (int j = 0; j < n; ++j)
                    gs[idx2(r, j, n)] += vc[idx2(r, j, n)] * (gc[idx2(r, j, n)] - dot);
            }
        };
        return c;
    }

    // Mean next-token NLL over positions where span[t] != 0; the logit row
    // used for position t is t-1 (shifted prediction).
    Ref cross_entropy_span(Ref logits, const std::vector<int>& tokens,
                           const std::vector<char>& span) {
        const int t = logits.rows;
        const int v = logits.cols;
        int count = 0;
        for (int i = 1; i < t; ++i)
            if (span[i]) ++count;
        if (count == 0) fail("EmptyAnswerSpan", "no supervised positions");
        Ref c = alloc(1, 1);
        auto& vl = value(logits);
        auto& vc = value(c);
        // log-sum-exp per supervised row, stored for backward reuse
        auto row_lse = std::make_shared<std::vector<Real>>(t, Real(0));
        Real total = 0;
        for (int i = 1; i < t; ++i) {
            if (!span[i]) continue;
            const Real* row = &vl[idx2(i - 1, 0, v)];
            Real mx = row[0];
            for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
            Real sum = 0;
            for (int j = 0; j < v; ++j) sum += std::exp(row[j] - mx);
            Real lse = mx + std::log(sum);
            (*row_lse)[i] = lse;
            total += lse - row[tokens[i]];
        }
        vc[0] = total / Real(count);
        nodes_[c.idx].backward = [this, logits, c, tokens, span, count, row_lse]() {
            const int t = logits.rows;
            const int v = logits.cols;
            auto& gl = grad(logits);
            auto& vl = value(logits);
            const Real up = grad(c)[0] / Real(count);
            for (int i = 1; i < t; ++i) {
                if (!span[i]) continue;
                const Real lse = (*row_lse)[i];
                Real* grow = &gl[idx2(i - 1, 0, v)];
                const Real* row = &vl[idx2(i - 1, 0, v)];
                for (int j = 0; j < v; ++j) grow[j] += up * std::exp(row[j] - lse);
                grow[tokens[i]] -= up;
            }
        };
        return c;
    }

    void backward(Ref loss) {
        if (loss.rows != 1 || loss.cols != 1) fail("ShapeMismatch", "backward expects scalar");
        grad(loss)[0] = Real(1);
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
            if (nodes_[i].backward) nodes_[i].backward();
    }

    static Real gelu_value(Real x) {
        return Real(0.5) * x * (Real(1) + std::erf(x * Real(0.7071067811865475)));
    }

    static Real gelu_derivative(Real x) {
        constexpr double kInvSqrt2Pi = 0.3989422804014327;
        return Real(0.5) * (Real(1) + std::erf(x * Real(0.7071067811865475))) +
               x * Real(kInvSqrt2Pi) * std::exp(Real(-0.5) * x * x);
    }

private:
    struct Node {
        int rows = 0, cols = 0;
        std::vector<Real> val;
        std::vector<Real> grad;
        std::function<void()> backward;
    };

    static size_t idx2(int r, int c, int cols) { return static_cast<size_t>(r) * cols + c; }

    Ref alloc(int rows, int cols) {
        Node n;
        n.rows = rows;
        n.cols = cols;
        n.val.assign(static_cast<size_t>(rows) * cols, Real(0));
        n.grad.assign(static_cast<size_t>(rows) * cols, Real(0));
        nodes_.push_back(std::move(n));
        return Ref{static_cast<int>(nodes_.size()) - 1, rows, cols};
    }

    // c (m x n) = op(a) * op(b); op per transpose flags over (m x k)/(k x n) views.
    void gemm(const Real* a, const Real* b, Real* c, int m, int k, int n, bool ta, bool tb) {
        for (int i = 0; i < m; ++i)
            for (int l = 0; l < k; ++l) {
                Real av = ta ? a[idx2(l, i, m)] : a[idx2(i, l, k)];
                if (av == Real(0)) continue;
                if (!tb) {
                    const Real* brow = &b[idx2(l, 0, n)];
                    Real* crow = &c[idx2(i, 0, n)];
                    for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
                } else {
                    Real* crow = &c[idx2(i, 0, n)];
                    for (int j = 0; j < n; ++j) crow[j] += av * b[idx2(j, l, k)];
                }
            }
    }

    void gemm_acc(const Real* a, const Real* b, Real* c, int m, int k, int n, bool ta,
                  bool tb) {
        gemm(a, b, c, m, k, n, ta, tb);
    }

    std::vector<Node> nodes_;
};

}  // namespace gtlm

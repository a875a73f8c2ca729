#pragma once

#include <cmath>
#include <complex>
#include <deque>
#include <numeric>
#include <vector>

#include "gtlm/common.hpp"
#include "gtlm/graph.hpp"

namespace gtlm {

using Complex = std::complex<double>;

// Dense row-major matrices; desk scale keeps N small so no sparse paths.
template <typename T>
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(int r, int c, T fill = T{}) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    T& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    const T& operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

using RealMatrix = Matrix<double>;
using IntMatrix = Matrix<int>;
using ComplexMatrix = Matrix<Complex>;

struct StructuralFeatures {
    IntMatrix spd;                      // N x N bucket indices
    std::vector<RealMatrix> rrwp;       // K matrices, each N x N (walk step k)
    std::vector<double> mag_eigvals;    // ascending
    ComplexMatrix mag_eigvecs;          // columns orthonormal
    int max_spd = 0;

    int num_nodes() const { return spd.rows; }
    int rrwp_steps() const { return static_cast<int>(rrwp.size()); }
};

// BFS shortest-path buckets on the symmetrized graph. Distances >= max_spd
// clamp to max_spd - 1; unreachable pairs get the sentinel bucket max_spd.
inline IntMatrix shortest_path_distances(const TextAttributedGraph& g, int max_spd) {
    if (max_spd < 2) fail("InvalidConfig", "max_spd must be >= 2");
    const int n = g.num_nodes();
    std::vector<std::vector<int>> adj(n);
    for (const auto& [u, v] : g.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    IntMatrix buckets(n, n, max_spd);
    for (int s = 0; s < n; ++s) {
        std::vector<int> dist(n, -1);
        dist[s] = 0;
        std::deque<int> queue{s};
        while (!queue.empty()) {
            int u = queue.front();
            queue.pop_front();
            for (int v : adj[u])
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
        }
        for (int t = 0; t < n; ++t)
            if (dist[t] >= 0) buckets(s, t) = std::min(dist[t], max_spd - 1);
    }
    return buckets;
}

// K-step walk probabilities [I, M, M^2, ..., M^{K-1}] with M = D^{-1} A on
// the directed adjacency. Zero out-degree rows of M stay all-zero.
inline std::vector<RealMatrix> rrwp(const TextAttributedGraph& g, int steps) {
    if (steps < 1) fail("InvalidConfig", "rrwp steps must be >= 1");
    const int n = g.num_nodes();
    RealMatrix transition(n, n);
    std::vector<int> out_degree(n, 0);
    for (const auto& [u, v] : g.edges) ++out_degree[u];
    for (const auto& [u, v] : g.edges)
        transition(u, v) = 1.0 / static_cast<double>(out_degree[u]);

    std::vector<RealMatrix> powers;
    powers.reserve(steps);
    RealMatrix current(n, n);
    for (int i = 0; i < n; ++i) current(i, i) = 1.0;
    powers.push_back(current);
    for (int k = 1; k < steps; ++k) {
        RealMatrix next(n, n);
        for (int i = 0; i < n; ++i)
            for (int l = 0; l < n; ++l) {
                double c = current(i, l);
                if (c == 0.0) continue;
                for (int j = 0; j < n; ++j) next(i, j) += c * transition(l, j);
            }
        powers.push_back(next);
        current = std::move(next);
    }
    return powers;
}

// Normalized Magnetic Laplacian L = I - (Ds^{-1/2} As Ds^{-1/2}) .* exp(i Theta),
// Theta(u,v) = 2 pi q (A(u,v) - A(v,u)). Isolated nodes keep L(u,u) = 1.
inline ComplexMatrix magnetic_laplacian(const TextAttributedGraph& g, double q) {
    const int n = g.num_nodes();
    RealMatrix adjacency(n, n);
    for (const auto& [u, v] : g.edges) adjacency(u, v) = 1.0;

    std::vector<double> sym_degree(n, 0.0);
    RealMatrix sym(n, n);
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
            sym(u, v) = 0.5 * (adjacency(u, v) + adjacency(v, u));
            sym_degree[u] += sym(u, v);
        }

    ComplexMatrix laplacian(n, n);
    for (int u = 0; u < n; ++u) laplacian(u, u) = Complex(1.0, 0.0);
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
            if (u == v || sym(u, v) == 0.0) continue;
            if (sym_degree[u] <= 0.0 || sym_degree[v] <= 0.0) continue;
            double normalized = sym(u, v) / std::sqrt(sym_degree[u] * sym_degree[v]);
            double theta = kTwoPi * q * (adjacency(u, v) - adjacency(v, u));
            laplacian(u, v) -= normalized * std::exp(Complex(0.0, theta));
        }
    return laplacian;
}

struct EigenDecomposition {
    std::vector<double> eigenvalues;  // ascending
    ComplexMatrix eigenvectors;       // column i pairs with eigenvalues[i]
};

// Cyclic Jacobi diagonalization for complex Hermitian matrices. Sweeps
// until the off-diagonal Frobenius mass drops below 1e-10, capped at
// 100 * N^2 sweeps.
inline EigenDecomposition hermitian_eigendecomposition(ComplexMatrix a) {
    const int n = a.rows;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (std::abs(a(i, j) - std::conj(a(j, i))) > 1e-10)
                fail("NotHermitian", "matrix is not Hermitian within 1e-10");

    ComplexMatrix vectors(n, n);
    for (int i = 0; i < n; ++i) vectors(i, i) = Complex(1.0, 0.0);

    auto off_norm = [&]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) s += std::norm(a(i, j));
        return std::sqrt(s);
    };

    const long max_sweeps = 100L * n * n;
    long sweep = 0;
    while (off_norm() > 1e-10) {
        if (++sweep > max_sweeps)
            fail("ConvergenceFailure", "Jacobi sweep cap reached");
        for (int p = 0; p < n - 1; ++p)
            for (int qi = p + 1; qi < n; ++qi) {
                Complex apq = a(p, qi);
                double mag = std::abs(apq);
                if (mag < 1e-300) continue;
                Complex phase = apq / mag;  // e^{i arg(apq)}
                double app = a(p, p).real();
                double aqq = a(qi, qi).real();
                double theta = 0.5 * std::atan2(2.0 * mag, aqq - app);
                double c = std::cos(theta);
                Complex s = std::sin(theta) * phase;
                // Columns: [p q] <- [p q] * [[c, s], [-conj(s), c]]... apply
                // the plane rotation J on the right and J^dagger on the left.
                for (int k = 0; k < n; ++k) {
                    Complex akp = a(k, p), akq = a(k, qi);
                    a(k, p) = c * akp - std::conj(s) * akq;
                    a(k, qi) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    Complex apk = a(p, k), aqk = a(qi, k);
                    a(p, k) = c * apk - s * aqk;
                    a(qi, k) = std::conj(s) * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    Complex vkp = vectors(k, p), vkq = vectors(k, qi);
                    vectors(k, p) = c * vkp - std::conj(s) * vkq;
                    vectors(k, qi) = s * vkp + c * vkq;
                }
            }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return a(i, i).real() < a(j, j).real(); });

    EigenDecomposition result;
    result.eigenvalues.resize(n);
    result.eigenvectors = ComplexMatrix(n, n);
    for (int i = 0; i < n; ++i) {
        result.eigenvalues[i] = a(order[i], order[i]).real();
        for (int k = 0; k < n; ++k) result.eigenvectors(k, i) = vectors(k, order[i]);
    }
    return result;
}

inline StructuralFeatures compute_features(const TextAttributedGraph& g, int max_spd,
                                           int rrwp_steps, double mag_q) {
    StructuralFeatures f;
    f.max_spd = max_spd;
    f.spd = shortest_path_distances(g, max_spd);
    f.rrwp = rrwp(g, rrwp_steps);
    auto eig = hermitian_eigendecomposition(magnetic_laplacian(g, mag_q));
    f.mag_eigvals = std::move(eig.eigenvalues);
    f.mag_eigvecs = std::move(eig.eigenvectors);
    return f;
}

}  // namespace gtlm

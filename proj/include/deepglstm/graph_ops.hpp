#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "featurizer.hpp"
#include "tensor.hpp"

namespace deepglstm {

/// How A^2 and A^3 are formed: k-hop reachability (0/1, zero diagonal) or raw walk counts.
enum class PowerMode { Binarized, Raw };

inline const char* to_string(PowerMode m) { return m == PowerMode::Binarized ? "binarized" : "raw"; }

inline PowerMode parse_power_mode(const std::string& s) {
    if (s == "binarized") return PowerMode::Binarized;
    if (s == "raw") return PowerMode::Raw;
    throw std::invalid_argument("unknown power mode '" + s + "' (expected binarized|raw)");
}

class BadExponent : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

template <class T>
struct NormalizedAdjacency {
    Tensor<T> values;
    int power = 1;
};

namespace detail {

inline void check_exponent(int k) {
    if (k < 1 || k > 3) throw BadExponent("power graph exponent must be 1, 2 or 3, got " + std::to_string(k));
}

}  // namespace detail

/// Power graph: (i, j) = 1 iff i != j and the shortest path between them has at most k edges.
inline chem::AdjacencyMatrix power_graph(const chem::AdjacencyMatrix& adj, int k) {
    detail::check_exponent(k);
    if (k == 1) return adj;
    const std::size_t n = adj.rows();
    chem::AdjacencyMatrix out(n, n);
    std::vector<int> dist(n);
    std::deque<std::size_t> queue;
    for (std::size_t src = 0; src < n; ++src) {
        std::fill(dist.begin(), dist.end(), -1);
        dist[src] = 0;
        queue.assign(1, src);
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            if (dist[u] == k) continue;
            for (std::size_t v = 0; v < n; ++v)
                if (adj(u, v) && dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
        }
        for (std::size_t v = 0; v < n; ++v)
            if (v != src && dist[v] > 0) out(src, v) = 1;
    }
    return out;
}

/// Raw matrix power A^k (walk counts, diagonal included).
inline Tensor<std::uint32_t> walk_count_power(const chem::AdjacencyMatrix& adj, int k) {
    detail::check_exponent(k);
    const Tensor<std::uint32_t> base = adj.cast<std::uint32_t>();
    Tensor<std::uint32_t> out = base;
    for (int step = 1; step < k; ++step) out = matmul(out, base);
    return out;
}

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
template <class T, class U>
NormalizedAdjacency<T> sym_normalize(const Tensor<U>& adj, int power = 1) {
    const std::size_t n = adj.rows();
    if (adj.cols() != n) throw ShapeMismatch("sym_normalize needs a square matrix, got " + adj.shape().str());
    std::vector<T> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        T deg{1};
        for (std::size_t j = 0; j < n; ++j) deg += static_cast<T>(adj(i, j));
        inv_sqrt[i] = T{1} / std::sqrt(deg);
    }
    NormalizedAdjacency<T> out{Tensor<T>(n, n), power};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const T a = static_cast<T>(adj(i, j)) + (i == j ? T{1} : T{});
            out.values(i, j) = a == T{} ? T{} : a * (inv_sqrt[i] * inv_sqrt[j]);
        }
    return out;
}

/// Node features plus the normalized A, A^2, A^3 inputs of the three GCN blocks.
template <class T>
struct GraphInputs {
    Tensor<T> features;
    std::array<NormalizedAdjacency<T>, 3> adjacency;

    std::size_t atom_count() const { return features.rows(); }

    template <class U>
    GraphInputs<U> cast() const {
        GraphInputs<U> g;
        g.features = features.template cast<U>();
        for (std::size_t b = 0; b < 3; ++b) g.adjacency[b] = {adjacency[b].values.template cast<U>(), adjacency[b].power};
        return g;
    }
};

template <class T>
GraphInputs<T> graph_inputs_from(const chem::NodeFeatureMatrix& x, const chem::AdjacencyMatrix& adj,
                                 PowerMode mode = PowerMode::Binarized) {
    GraphInputs<T> in;
    in.features = x.cast<T>();
    for (int k = 1; k <= 3; ++k) {
        in.adjacency[k - 1] = mode == PowerMode::Binarized || k == 1
                                  ? sym_normalize<T>(power_graph(adj, k), k)
                                  : sym_normalize<T>(walk_count_power(adj, k), k);
    }
    return in;
}

template <class T>
GraphInputs<T> build_graph_inputs(const chem::MolecularGraph& g, PowerMode mode = PowerMode::Binarized) {
    const auto [x, adj] = chem::featurize(g);
    return graph_inputs_from<T>(x, adj, mode);
}

}  // namespace deepglstm

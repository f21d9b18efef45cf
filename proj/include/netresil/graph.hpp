#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "netresil/matrix.hpp"

namespace netresil {

struct Edge {
    std::size_t i;
    std::size_t j;
    double w;
};

// Weighted graph over a dense adjacency. Undirected by default: set_edge
// writes both triangles and the Laplacian operators require symmetry.
class Graph {
public:
    Graph() = default;
    explicit Graph(std::size_t n, bool undirected = true)
        : n_(n), undirected_(undirected), adj_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    bool undirected() const { return undirected_; }

    double at(std::size_t i, std::size_t j) const { return adj_[i * n_ + j]; }

    void set_edge(std::size_t i, std::size_t j, double w) {
        if (i >= n_ || j >= n_) throw std::out_of_range("set_edge: node index out of range");
        if (i == j) throw std::invalid_argument("set_edge: self-loops are not allowed");
        adj_[i * n_ + j] = w;
        if (undirected_) adj_[j * n_ + i] = w;
    }

    void remove_edge(std::size_t i, std::size_t j) { set_edge(i, j, 0.0); }

    bool has_edge(std::size_t i, std::size_t j) const { return at(i, j) != 0.0; }

    double degree(std::size_t i) const {
        double d = 0.0;
        for (std::size_t j = 0; j < n_; ++j) d += adj_[i * n_ + j];
        return d;
    }

    std::vector<std::size_t> neighbors(std::size_t i) const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < n_; ++j)
            if (adj_[i * n_ + j] != 0.0) out.push_back(j);
        return out;
    }

    // Each undirected edge once, i < j.
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                if (adj_[i * n_ + j] != 0.0) out.push_back({i, j, adj_[i * n_ + j]});
        return out;
    }

    std::vector<std::pair<std::size_t, std::size_t>> non_edges() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                if (adj_[i * n_ + j] == 0.0) out.emplace_back(i, j);
        return out;
    }

    std::size_t edge_count() const {
        std::size_t c = 0;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                if (adj_[i * n_ + j] != 0.0) ++c;
        return c;
    }

    bool is_symmetric() const {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                if (adj_[i * n_ + j] != adj_[j * n_ + i]) return false;
        return true;
    }

    const std::vector<double>& adjacency() const { return adj_; }

    Matrix adjacency_matrix() const {
        Matrix m(n_, n_);
        m.v = adj_;
        return m;
    }

    void drop_incident_edges(std::size_t i) {
        for (std::size_t j = 0; j < n_; ++j) {
            adj_[i * n_ + j] = 0.0;
            adj_[j * n_ + i] = 0.0;
        }
    }

    // Relabel nodes: new index perm[i] hosts old node i.
    Graph permuted(const std::vector<std::size_t>& perm) const {
        Graph g(n_, undirected_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) g.adj_[perm[i] * n_ + perm[j]] = adj_[i * n_ + j];
        return g;
    }

private:
    std::size_t n_ = 0;
    bool undirected_ = true;
    std::vector<double> adj_;
};

// Degree, Laplacian L = D - A, and the self-loop-augmented symmetric
// normalization used by graph convolutions.
struct LaplacianBundle {
    std::size_t n = 0;
    std::vector<double> degree;          // diagonal of D
    Matrix laplacian;                    // D - A
    Matrix sym_norm_adjacency;           // D~^{-1/2} (A+I) D~^{-1/2}
    std::vector<double> augmented_degree;  // degrees of A+I (always >= 1)
};

inline LaplacianBundle laplacian(const Graph& g) {
    if (g.undirected() && !g.is_symmetric())
        throw std::invalid_argument("laplacian: adjacency must be symmetric in undirected mode");
    std::size_t n = g.size();
    LaplacianBundle b;
    b.n = n;
    b.degree.resize(n);
    b.laplacian = Matrix(n, n);
    b.sym_norm_adjacency = Matrix(n, n);
    b.augmented_degree.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        b.degree[i] = g.degree(i);
        b.augmented_degree[i] = b.degree[i] + 1.0;  // self-loop keeps isolated nodes defined
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double a = g.at(i, j);
            b.laplacian.at(i, j) = (i == j ? b.degree[i] : 0.0) - a;
            double aug = a + (i == j ? 1.0 : 0.0);
            b.sym_norm_adjacency.at(i, j) =
                aug / (std::sqrt(b.augmented_degree[i]) * std::sqrt(b.augmented_degree[j]));
        }
    }
    return b;
}

struct Components {
    std::size_t count = 0;
    std::vector<std::size_t> labels;  // component id per node, ids in discovery order
};

inline Components connected_components(const Graph& g) {
    std::size_t n = g.size();
    Components c;
    c.labels.assign(n, static_cast<std::size_t>(-1));
    std::vector<std::size_t> queue;
    for (std::size_t start = 0; start < n; ++start) {
        if (c.labels[start] != static_cast<std::size_t>(-1)) continue;
        std::size_t id = c.count++;
        queue.clear();
        queue.push_back(start);
        c.labels[start] = id;
        while (!queue.empty()) {
            std::size_t u = queue.back();
            queue.pop_back();
            for (std::size_t v = 0; v < n; ++v) {
                if ((g.at(u, v) != 0.0 || g.at(v, u) != 0.0) &&
                    c.labels[v] == static_cast<std::size_t>(-1)) {
                    c.labels[v] = id;
                    queue.push_back(v);
                }
            }
        }
    }
    return c;
}

// (L U) row i = D_ii u_i - sum_j A_ij u_j
inline Matrix graph_laplacian_apply(const LaplacianBundle& b, const Matrix& u) {
    if (u.rows != b.n)
        throw std::invalid_argument("graph_laplacian_apply: state rows " +
                                    std::to_string(u.rows) + " != node count " +
                                    std::to_string(b.n));
    Matrix out(u.rows, u.cols);
    for (std::size_t i = 0; i < b.n; ++i)
        for (std::size_t j = 0; j < b.n; ++j) {
            double l = b.laplacian.at(i, j);
            if (l == 0.0) continue;
            for (std::size_t m = 0; m < u.cols; ++m) out.at(i, m) += l * u.at(j, m);
        }
    return out;
}

inline Matrix graph_laplacian_apply(const Graph& g, const Matrix& u) {
    return graph_laplacian_apply(laplacian(g), u);
}

}  // namespace netresil

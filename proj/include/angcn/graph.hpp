#pragma once

#include "angcn/error.hpp"
#include "angcn/linalg.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace angcn {

/// Undirected weighted edge. Stored canonically with u < v.
struct Edge {
    std::size_t u = 0;
    std::size_t v = 0;
    double weight = 1.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct Masks {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

enum class LaplacianKind { combinatorial, symmetric_normalized };

inline std::string to_string(LaplacianKind kind) {
    return kind == LaplacianKind::combinatorial ? "combinatorial" : "symmetric-normalized";
}

inline LaplacianKind parse_laplacian_kind(const std::string& s) {
    if (s == "combinatorial" || s == "comb") return LaplacianKind::combinatorial;
    if (s == "symmetric-normalized" || s == "sym" || s == "normalized")
        return LaplacianKind::symmetric_normalized;
    throw std::invalid_argument("unknown laplacian kind '" + s + "'");
}

/// Immutable attributed graph: node features, undirected edge set, optional
/// labels and train/val/test masks. Every constructor validates the invariants.
class Graph {
public:
    Graph() = default;

    Graph(std::size_t n_nodes, Matrix features, std::vector<Edge> edges,
          std::optional<std::vector<int>> labels = std::nullopt, Masks masks = {})
        : n_nodes_(n_nodes), features_(std::move(features)), labels_(std::move(labels)),
          masks_(std::move(masks)) {
        require(n_nodes_ > 0, "graph must have at least one node");
        require(static_cast<std::size_t>(features_.rows()) == n_nodes_,
                "feature matrix has " + std::to_string(features_.rows()) + " rows, expected " +
                    std::to_string(n_nodes_));
        require(features_.cols() > 0, "feature dimension must be positive");
        require(all_finite(features_), "feature matrix contains non-finite entries");

        std::set<std::pair<std::size_t, std::size_t>> seen;
        edges_.reserve(edges.size());
        for (Edge e : edges) {
            require(e.u < n_nodes_ && e.v < n_nodes_,
                    "edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") out of range");
            require(e.u != e.v, "self loop on node " + std::to_string(e.u));
            require(std::isfinite(e.weight), "non-finite edge weight");
            if (e.u > e.v) std::swap(e.u, e.v);
            require(seen.emplace(e.u, e.v).second,
                    "duplicate edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
            edges_.push_back(e);
        }
        std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
            return a.u != b.u ? a.u < b.u : a.v < b.v;
        });

        if (labels_) {
            require(labels_->size() == n_nodes_, "label count does not match node count");
            for (int l : *labels_) require(l >= 0, "labels must be non-negative class ids");
        }

        std::vector<char> used(n_nodes_, 0);
        for (const auto* mask : {&masks_.train, &masks_.val, &masks_.test}) {
            for (std::size_t i : *mask) {
                require(i < n_nodes_, "mask index " + std::to_string(i) + " out of range");
                require(!used[i], "masks overlap at node " + std::to_string(i));
                used[i] = 1;
            }
        }
    }

    std::size_t n_nodes() const noexcept { return n_nodes_; }
    Index n_features() const noexcept { return features_.cols(); }
    const Matrix& features() const noexcept { return features_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const std::optional<std::vector<int>>& labels() const noexcept { return labels_; }
    const Masks& masks() const noexcept { return masks_; }
    bool has_labels() const noexcept { return labels_.has_value(); }

    int label(std::size_t i) const {
        require(labels_.has_value(), "graph has no labels");
        return labels_->at(i);
    }

    /// Number of classes: 1 + the largest label (0 for unlabeled graphs).
    int num_classes() const {
        if (!labels_ || labels_->empty()) return 0;
        return *std::max_element(labels_->begin(), labels_->end()) + 1;
    }

    /// Copy with a different edge set; features, labels and masks are shared.
    Graph with_edges(std::vector<Edge> edges) const {
        return Graph(n_nodes_, features_, std::move(edges), labels_, masks_);
    }

    Graph with_masks(Masks masks) const {
        return Graph(n_nodes_, features_, edges_, labels_, std::move(masks));
    }

private:
    std::size_t n_nodes_ = 0;
    Matrix features_;
    std::vector<Edge> edges_;
    std::optional<std::vector<int>> labels_;
    Masks masks_;
};

inline Matrix build_adjacency(const Graph& g) {
    const auto n = static_cast<Index>(g.n_nodes());
    Matrix a = Matrix::Zero(n, n);
    for (const Edge& e : g.edges()) {
        a(static_cast<Index>(e.u), static_cast<Index>(e.v)) = e.weight;
        a(static_cast<Index>(e.v), static_cast<Index>(e.u)) = e.weight;
    }
    return a;
}

inline Vector degrees(const Matrix& adjacency) { return adjacency.rowwise().sum(); }

/// Laplacian of an adjacency matrix. Isolated nodes get an identity row in the
/// normalized form.
inline Matrix laplacian_from_adjacency(const Matrix& a, LaplacianKind kind) {
    const Vector deg = degrees(a);
    if (kind == LaplacianKind::combinatorial) {
        Matrix l = -a;
        l.diagonal() += deg;
        return l;
    }
    Vector inv_sqrt(deg.size());
    for (Index i = 0; i < deg.size(); ++i) inv_sqrt(i) = deg(i) > 0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
    Matrix l = -(inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal());
    l.diagonal().array() += 1.0;
    return l;
}

inline Matrix build_laplacian(const Graph& g, LaplacianKind kind) {
    return laplacian_from_adjacency(build_adjacency(g), kind);
}

/// Sorted neighbor lists (unweighted view of the edge set).
inline std::vector<std::vector<std::size_t>> adjacency_lists(const Graph& g) {
    std::vector<std::vector<std::size_t>> adj(g.n_nodes());
    for (const Edge& e : g.edges()) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    for (auto& list : adj) std::sort(list.begin(), list.end());
    return adj;
}

inline std::vector<std::size_t> node_degrees(const Graph& g) {
    std::vector<std::size_t> deg(g.n_nodes(), 0);
    for (const Edge& e : g.edges()) {
        ++deg[e.u];
        ++deg[e.v];
    }
    return deg;
}

/// Hop distances from `source`; unreachable nodes get -1.
inline std::vector<int> bfs_distances(const std::vector<std::vector<std::size_t>>& adj,
                                      std::size_t source) {
    std::vector<int> dist(adj.size(), -1);
    std::queue<std::size_t> queue;
    dist[source] = 0;
    queue.push(source);
    while (!queue.empty()) {
        const std::size_t x = queue.front();
        queue.pop();
        for (std::size_t y : adj[x]) {
            if (dist[y] < 0) {
                dist[y] = dist[x] + 1;
                queue.push(y);
            }
        }
    }
    return dist;
}

inline bool is_connected(const Graph& g) {
    const auto dist = bfs_distances(adjacency_lists(g), 0);
    return std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; });
}

/// Edge list of the nonzero upper triangle of a symmetric matrix.
inline std::vector<Edge> edges_from_adjacency(const Matrix& a) {
    std::vector<Edge> edges;
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = i + 1; j < a.cols(); ++j)
            if (a(i, j) != 0.0)
                edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), a(i, j)});
    return edges;
}

} // namespace angcn

#pragma once

// Experiments that probe how strongly a node's spectral row u(.) determines its
// embedding: scaling rows of U, and deleting a node then reconnecting its
// neighbors.

#include "angcn/error.hpp"
#include "angcn/graph.hpp"
#include "angcn/io.hpp"
#include "angcn/spectral_basis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace angcn {

/// delta = 1 - k/100 for k = 1..50.
inline std::vector<double> default_deltas() {
    std::vector<double> d;
    for (int k = 1; k <= 50; ++k) d.push_back(1.0 - k / 100.0);
    return d;
}

struct PerturbResult {
    std::size_t node = 0;
    std::vector<std::size_t> acting;  // node first, then its neighbors
    std::vector<double> deltas;
    Matrix deviation;                 // acting.size() x deltas.size()

    CsvTable table() const {
        CsvTable t;
        t.header.push_back("target");
        for (double d : deltas) t.header.push_back("delta_" + format_double(d, 6));
        for (std::size_t r = 0; r < acting.size(); ++r) {
            std::vector<std::string> row{std::to_string(acting[r])};
            for (Index c = 0; c < deviation.cols(); ++c) row.push_back(format_double(deviation(static_cast<Index>(r), c)));
            t.add_row(std::move(row));
        }
        return t;
    }
};

/// For each acting node i (v and its first c_v neighbors by index) and each
/// delta, scales row u(i) of U by delta and reports ||f^{e,delta}(v) - f^e(v)||_2
/// where f^e = U diag(theta) U^T f.
inline PerturbResult perturb_u_experiment(const Graph& g, const SpectralBasis& basis, const Vector& theta,
                                          const Matrix& f, std::size_t v, std::size_t c_v,
                                          const std::vector<double>& deltas) {
    const auto n = static_cast<Index>(g.n_nodes());
    require(basis.size() == n && theta.size() == n && f.rows() == n, "perturb-u inputs disagree on node count");
    require(v < g.n_nodes(), "node " + std::to_string(v) + " out of range");
    const auto nbrs = adjacency_lists(g)[v];
    require(!nbrs.empty(), "node " + std::to_string(v) + " is isolated");
    require(c_v <= nbrs.size(), "c_v = " + std::to_string(c_v) + " exceeds the " + std::to_string(nbrs.size()) +
                                    " neighbors of node " + std::to_string(v));

    PerturbResult r;
    r.node = v;
    r.deltas = deltas;
    r.acting.push_back(v);
    r.acting.insert(r.acting.end(), nbrs.begin(), nbrs.begin() + static_cast<std::ptrdiff_t>(c_v));

    const Matrix& U = basis.vectors;
    const Matrix utf = U.transpose() * f;
    const auto vi = static_cast<Index>(v);
    const RowVector uv_theta = U.row(vi).cwiseProduct(theta.transpose());
    const RowVector base = uv_theta * utf;

    r.deviation.resize(static_cast<Index>(r.acting.size()), static_cast<Index>(deltas.size()));
    for (std::size_t a = 0; a < r.acting.size(); ++a) {
        const auto i = static_cast<Index>(r.acting[a]);
        for (std::size_t k = 0; k < deltas.size(); ++k) {
            const double d = deltas[k];
            // U_hat^T f = U^T f + (d - 1) u(i)^T f(i)
            const Matrix utf_hat = utf + (d - 1.0) * U.row(i).transpose() * f.row(i);
            const RowVector row_v = (i == vi ? d : 1.0) * uv_theta;
            r.deviation(static_cast<Index>(a), static_cast<Index>(k)) = (row_v * utf_hat - base).norm();
        }
    }
    return r;
}

/// Graph without node tau: every pair (i, j) of tau's neighbors gains weight
/// (w_tau_i + w_tau_j) / 2 on top of any existing edge. Survivors keep their
/// relative order (index j > tau shifts down by one).
inline Graph deleted_graph(const Graph& g, std::size_t tau) {
    require(tau < g.n_nodes(), "node " + std::to_string(tau) + " out of range");
    require(g.n_nodes() >= 2, "cannot delete from a single-node graph");
    const Matrix a = build_adjacency(g);
    const auto n = static_cast<Index>(g.n_nodes());
    const auto t = static_cast<Index>(tau);
    Matrix d(n - 1, n - 1);
    std::vector<Index> keep;
    for (Index i = 0; i < n; ++i)
        if (i != t) keep.push_back(i);
    for (Index x = 0; x < n - 1; ++x)
        for (Index y = 0; y < n - 1; ++y) {
            const Index i = keep[static_cast<std::size_t>(x)], j = keep[static_cast<std::size_t>(y)];
            double w = a(i, j);
            if (x != y && a(t, i) != 0.0 && a(t, j) != 0.0) w += (a(t, i) + a(t, j)) / 2.0;
            d(x, y) = x == y ? 0.0 : w;
        }
    Matrix f(n - 1, g.n_features());
    for (Index x = 0; x < n - 1; ++x) f.row(x) = g.features().row(keep[static_cast<std::size_t>(x)]);
    std::optional<std::vector<int>> labels;
    if (g.labels()) {
        labels.emplace();
        for (Index i : keep) labels->push_back((*g.labels())[static_cast<std::size_t>(i)]);
    }
    return Graph(static_cast<std::size_t>(n - 1), std::move(f), edges_from_adjacency(d), std::move(labels));
}

inline constexpr double kLogFloor = 1e-12;

/// C = sum_l [log|u_l|^2 - log|u_l^(d)|^2] over the N - 1 shared coordinates.
inline double change_metric(const RowVector& clean_row, const RowVector& deleted_row) {
    require(clean_row.size() >= deleted_row.size(), "clean row is shorter than the deleted row");
    double c = 0.0;
    for (Index l = 0; l < deleted_row.size(); ++l) {
        const double a = std::max(std::abs(clean_row(l)), kLogFloor);
        const double b = std::max(std::abs(deleted_row(l)), kLogFloor);
        c += 2.0 * std::log(a) - 2.0 * std::log(b);
    }
    return c;
}

struct DeleteNodeResult {
    std::size_t tau = 0;
    std::vector<int> orders;
    std::vector<std::tuple<int, std::size_t, double>> rows; // (order, node, C) with node in clean indexing
    std::map<int, double> mean_abs_c;                       // per order; orders without nodes are absent

    CsvTable table() const {
        CsvTable t;
        t.header = {"order", "node", "C"};
        for (const auto& [o, node, c] : rows) t.add_row({std::to_string(o), std::to_string(node), format_double(c)});
        return t;
    }
};

inline DeleteNodeResult delete_node_experiment(const Graph& g, std::size_t tau, const std::vector<int>& orders,
                                               LaplacianKind kind = LaplacianKind::combinatorial) {
    require(is_connected(g), "delete-node experiment needs a connected graph");
    const Graph gd = deleted_graph(g, tau);
    require(is_connected(gd), "deleting node " + std::to_string(tau) +
                                  " disconnects the graph even after reconnecting its neighbors");
    const SpectralBasis clean = graph_basis(g, kind);
    const SpectralBasis del = graph_basis(gd, kind);
    const auto dist = bfs_distances(adjacency_lists(g), tau);

    DeleteNodeResult r;
    r.tau = tau;
    r.orders = orders;
    for (int o : orders) {
        require(o >= 1, "neighbor orders start at 1");
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < g.n_nodes(); ++i) {
            if (dist[i] != o) continue;
            const auto di = static_cast<Index>(i > tau ? i - 1 : i);
            const double c = change_metric(clean.vectors.row(static_cast<Index>(i)), del.vectors.row(di));
            r.rows.emplace_back(o, i, c);
            total += std::abs(c);
            ++count;
        }
        if (count) r.mean_abs_c[o] = total / static_cast<double>(count);
    }
    return r;
}

/// The k highest-degree nodes, ties broken by lower index.
inline std::vector<std::size_t> top_k_by_degree(const Graph& g, std::size_t k) {
    const auto deg = node_degrees(g);
    std::vector<std::size_t> idx(g.n_nodes());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return deg[a] > deg[b]; });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

/// Runs the experiment for every tau and averages mean |C| per order over the
/// runs in which that order has nodes.
inline std::map<int, double> delete_node_sweep(const Graph& g, const std::vector<std::size_t>& taus,
                                               const std::vector<int>& orders, LaplacianKind kind,
                                               std::vector<DeleteNodeResult>* runs = nullptr) {
    std::map<int, double> sum;
    std::map<int, int> cnt;
    for (std::size_t tau : taus) {
        DeleteNodeResult r = delete_node_experiment(g, tau, orders, kind);
        for (const auto& [o, m] : r.mean_abs_c) {
            sum[o] += m;
            ++cnt[o];
        }
        if (runs) runs->push_back(std::move(r));
    }
    for (auto& [o, s] : sum) s /= cnt[o];
    return sum;
}

} // namespace angcn

#pragma once

#include "angcn/error.hpp"
#include "angcn/graph.hpp"
#include "angcn/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace angcn {

// ---------------------------------------------------------------------------
// Cora-style citation data
// ---------------------------------------------------------------------------

struct SplitSizes {
    std::size_t train = 140; // divided evenly across classes
    std::size_t val = 500;
    std::size_t test = 1000;
};

struct CoraData {
    Graph graph;
    std::vector<std::string> node_ids;
    std::vector<std::string> class_names;
    std::size_t skipped_cites = 0;    // lines naming an id absent from the content file
    std::size_t self_citations = 0;   // dropped
    std::size_t duplicate_cites = 0;  // repeated undirected pairs
};

/// Deterministic split: the first train/ι nodes of each class (index order) are
/// training nodes; the remaining nodes fill validation then test in index order.
inline Masks split_per_class(const std::vector<int>& labels, int num_classes, SplitSizes sizes) {
    require(num_classes > 0, "split needs at least one class");
    const std::size_t per_class = sizes.train / static_cast<std::size_t>(num_classes);
    std::vector<std::size_t> taken(static_cast<std::size_t>(num_classes), 0);
    std::vector<char> in_train(labels.size(), 0);
    Masks m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& t = taken[static_cast<std::size_t>(labels[i])];
        if (t < per_class) {
            ++t;
            in_train[i] = 1;
            m.train.push_back(i);
        }
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (in_train[i]) continue;
        if (m.val.size() < sizes.val)
            m.val.push_back(i);
        else if (m.test.size() < sizes.test)
            m.test.push_back(i);
    }
    return m;
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    for (std::string tok; ss >> tok;) out.push_back(std::move(tok));
    return out;
}

inline double parse_number(const std::string& tok, std::size_t line_no) {
    double x = 0.0;
    const char* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, x);
    if (ec != std::errc() || ptr != end || !std::isfinite(x))
        throw ParseError("invalid feature value '" + tok + "'", line_no);
    return x;
}

} // namespace detail

inline CoraData load_cora(const std::filesystem::path& content_path,
                          const std::filesystem::path& cites_path, SplitSizes sizes = {}) {
    std::ifstream content(content_path);
    if (!content) throw std::invalid_argument("cannot open '" + content_path.string() + "'");

    CoraData out;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> raw_labels;
    std::size_t dim = 0;
    std::size_t line_no = 0;
    for (std::string line; std::getline(content, line);) {
        ++line_no;
        auto tok = detail::split_ws(line);
        if (tok.empty()) continue;
        if (tok.size() < 3) throw ParseError("content line needs an id, features and a label", line_no);
        const std::size_t d = tok.size() - 2;
        if (rows.empty())
            dim = d;
        else if (d != dim)
            throw ParseError("feature dimension " + std::to_string(d) + " differs from " +
                                 std::to_string(dim),
                             line_no);
        if (!index.emplace(tok.front(), rows.size()).second)
            throw ParseError("duplicate node id '" + tok.front() + "'", line_no);
        std::vector<double> row(d);
        for (std::size_t k = 0; k < d; ++k) row[k] = detail::parse_number(tok[k + 1], line_no);
        rows.push_back(std::move(row));
        out.node_ids.push_back(tok.front());
        raw_labels.push_back(tok.back());
    }
    require(!rows.empty(), "content file '" + content_path.string() + "' has no nodes");

    std::set<std::string> names(raw_labels.begin(), raw_labels.end());
    out.class_names.assign(names.begin(), names.end());
    std::map<std::string, int> class_of;
    for (std::size_t c = 0; c < out.class_names.size(); ++c) class_of[out.class_names[c]] = static_cast<int>(c);
    std::vector<int> labels;
    labels.reserve(raw_labels.size());
    for (const auto& l : raw_labels) labels.push_back(class_of.at(l));

    std::ifstream cites(cites_path);
    if (!cites) throw std::invalid_argument("cannot open '" + cites_path.string() + "'");
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    line_no = 0;
    for (std::string line; std::getline(cites, line);) {
        ++line_no;
        auto tok = detail::split_ws(line);
        if (tok.empty()) continue;
        if (tok.size() != 2) throw ParseError("cites line needs exactly two ids", line_no);
        auto a = index.find(tok[0]);
        auto b = index.find(tok[1]);
        if (a == index.end() || b == index.end()) {
            ++out.skipped_cites;
            continue;
        }
        if (a->second == b->second) {
            ++out.self_citations;
            continue;
        }
        if (!pairs.emplace(std::min(a->second, b->second), std::max(a->second, b->second)).second)
            ++out.duplicate_cites;
    }

    const std::size_t n = rows.size();
    Matrix f(static_cast<Index>(n), static_cast<Index>(dim));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < dim; ++k) f(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
    std::vector<Edge> edges;
    edges.reserve(pairs.size());
    for (auto [u, v] : pairs) edges.push_back({u, v, 1.0});
    Masks masks = split_per_class(labels, static_cast<int>(out.class_names.size()), sizes);
    out.graph = Graph(n, std::move(f), std::move(edges), std::move(labels), std::move(masks));
    return out;
}

/// Scales every nonzero feature row to unit sum.
inline Graph row_normalize_features(const Graph& g) {
    Matrix f = g.features();
    for (Index i = 0; i < f.rows(); ++i) {
        const double s = f.row(i).sum();
        if (s != 0.0) f.row(i) /= s;
    }
    return Graph(g.n_nodes(), std::move(f), g.edges(), g.labels(), g.masks());
}

// ---------------------------------------------------------------------------
// Synthetic graphs
// ---------------------------------------------------------------------------

struct SynthSpec {
    enum class Kind { ring, barbell, sbm } kind = Kind::ring;
    std::size_t n = 0;                // ring size or barbell clique size
    std::vector<std::size_t> blocks;  // sbm block sizes
    double p_in = 0.0;
    double p_out = 0.0;
    std::uint64_t seed = 0;
    double noise = 0.1; // sbm feature noise standard deviation

    static SynthSpec ring(std::size_t n) { return {Kind::ring, n, {}, 0, 0, 0}; }
    static SynthSpec barbell(std::size_t k) { return {Kind::barbell, k, {}, 0, 0, 0}; }
    static SynthSpec sbm(std::vector<std::size_t> blocks, double p_in, double p_out, std::uint64_t seed) {
        return {Kind::sbm, 0, std::move(blocks), p_in, p_out, seed};
    }
};

/// Masks taking, per group, the first 20% of members for training, the next
/// 20% for validation and the rest for test (at least one training node each).
inline Masks split_groups(const std::vector<int>& group) {
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < group.size(); ++i) members[group[i]].push_back(i);
    Masks m;
    for (auto& [_, idx] : members) {
        const std::size_t n = idx.size();
        const std::size_t tr = std::max<std::size_t>(1, n / 5);
        const std::size_t va = std::min(n - tr, n / 5);
        for (std::size_t k = 0; k < n; ++k) (k < tr ? m.train : k < tr + va ? m.val : m.test).push_back(idx[k]);
    }
    for (auto* v : {&m.train, &m.val, &m.test}) std::sort(v->begin(), v->end());
    return m;
}

inline Graph synth_graph(const SynthSpec& spec) {
    using Kind = SynthSpec::Kind;
    if (spec.kind == Kind::ring) {
        require(spec.n >= 3, "ring needs at least 3 nodes");
        std::vector<Edge> edges;
        for (std::size_t i = 0; i < spec.n; ++i) edges.push_back({i, (i + 1) % spec.n, 1.0});
        const auto n = static_cast<Index>(spec.n);
        return Graph(spec.n, Matrix::Identity(n, n), std::move(edges));
    }
    if (spec.kind == Kind::barbell) {
        require(spec.n >= 2, "barbell cliques need at least 2 nodes");
        const std::size_t k = spec.n;
        std::vector<Edge> edges;
        for (std::size_t side = 0; side < 2; ++side)
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = i + 1; j < k; ++j) edges.push_back({side * k + i, side * k + j, 1.0});
        edges.push_back({k - 1, k, 1.0});
        std::vector<int> labels(2 * k);
        for (std::size_t i = 0; i < 2 * k; ++i) labels[i] = i < k ? 0 : 1;
        const auto n = static_cast<Index>(2 * k);
        Masks masks = split_groups(labels);
        return Graph(2 * k, Matrix::Identity(n, n), std::move(edges), std::move(labels), std::move(masks));
    }

    require(!spec.blocks.empty(), "sbm needs at least one block");
    for (std::size_t b : spec.blocks) require(b > 0, "sbm block sizes must be positive");
    require(spec.p_in >= 0 && spec.p_in <= 1 && spec.p_out >= 0 && spec.p_out <= 1,
            "sbm probabilities must lie in [0, 1]");
    require(spec.noise >= 0, "sbm feature noise must be non-negative");
    std::vector<int> labels;
    for (std::size_t b = 0; b < spec.blocks.size(); ++b)
        labels.insert(labels.end(), spec.blocks[b], static_cast<int>(b));
    const std::size_t n = labels.size();

    Rng edge_rng = make_rng(spec.seed, "sbm-edges");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (unif(edge_rng) < (labels[i] == labels[j] ? spec.p_in : spec.p_out)) edges.push_back({i, j, 1.0});

    Rng feat_rng = make_rng(spec.seed, "sbm-features");
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto k = static_cast<Index>(spec.blocks.size());
    Matrix f = Matrix::Zero(static_cast<Index>(n), k);
    for (std::size_t i = 0; i < n; ++i) {
        f(static_cast<Index>(i), labels[i]) = 1.0;
        for (Index c = 0; c < k; ++c) f(static_cast<Index>(i), c) += spec.noise * gauss(feat_rng);
    }
    Masks masks = split_groups(labels);
    return Graph(n, std::move(f), std::move(edges), std::move(labels), std::move(masks));
}

/// Parses "ring:8", "barbell:3", "sbm:50x2:0.3:0.02:7" or "sbm:40,60:0.3:0.02:7".
inline SynthSpec parse_synth_spec(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    auto bad = [&]() { return std::invalid_argument("invalid synthetic graph spec '" + text + "'"); };
    auto to_size = [&](const std::string& s) {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) throw bad();
        return v;
    };
    auto to_double = [&](const std::string& s) {
        double v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) throw bad();
        return v;
    };
    if (parts.empty()) throw bad();
    if (parts[0] == "ring" && parts.size() == 2) return SynthSpec::ring(to_size(parts[1]));
    if (parts[0] == "barbell" && parts.size() == 2) return SynthSpec::barbell(to_size(parts[1]));
    if (parts[0] == "sbm" && (parts.size() == 4 || parts.size() == 5)) {
        std::vector<std::size_t> blocks;
        const std::string& b = parts[1];
        if (auto x = b.find('x'); x != std::string::npos) {
            blocks.assign(to_size(b.substr(x + 1)), to_size(b.substr(0, x)));
        } else {
            std::stringstream bs(b);
            for (std::string s; std::getline(bs, s, ',');) blocks.push_back(to_size(s));
        }
        return SynthSpec::sbm(std::move(blocks), to_double(parts[2]), to_double(parts[3]),
                              parts.size() == 5 ? to_size(parts[4]) : 0);
    }
    throw bad();
}

} // namespace angcn

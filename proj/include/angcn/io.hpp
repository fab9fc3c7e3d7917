#pragma once

// File formats: native graph JSON, parameter checkpoints, JSON-lines traces and
// CSV tables.

#include "angcn/error.hpp"
#include "angcn/graph.hpp"
#include "angcn/linalg.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace angcn {

using json = nlohmann::json;

inline std::string format_double(double x, int digits = 17) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Native graph format
// ---------------------------------------------------------------------------

inline json graph_to_json(const Graph& g) {
    json j;
    j["n_nodes"] = g.n_nodes();
    j["n_features"] = g.n_features();
    const Matrix& f = g.features();
    j["features"] = std::vector<double>(f.data(), f.data() + f.size());
    json edges = json::array();
    for (const Edge& e : g.edges()) edges.push_back({e.u, e.v, e.weight});
    j["edges"] = std::move(edges);
    j["labels"] = g.labels() ? json(*g.labels()) : json(nullptr);
    j["masks"] = {{"train", g.masks().train}, {"val", g.masks().val}, {"test", g.masks().test}};
    return j;
}

namespace detail {

inline Matrix features_from_json(const json& j, std::size_t n) {
    const json& jf = j.at("features");
    require(jf.is_array(), "graph JSON: 'features' must be an array");
    if (!jf.empty() && jf.front().is_array()) {
        require(jf.size() == n, "graph JSON: feature row count does not match n_nodes");
        const std::size_t d = jf.front().size();
        Matrix f(static_cast<Index>(n), static_cast<Index>(d));
        for (std::size_t i = 0; i < n; ++i) {
            require(jf[i].size() == d, "graph JSON: ragged feature rows");
            for (std::size_t k = 0; k < d; ++k)
                f(static_cast<Index>(i), static_cast<Index>(k)) = jf[i][k].get<double>();
        }
        return f;
    }
    const auto d = j.at("n_features").get<std::size_t>();
    require(jf.size() == n * d, "graph JSON: feature length " + std::to_string(jf.size()) +
                                    " does not equal n_nodes*n_features");
    Matrix f(static_cast<Index>(n), static_cast<Index>(d));
    for (std::size_t k = 0; k < jf.size(); ++k) f.data()[k] = jf[k].get<double>();
    return f;
}

inline std::optional<std::vector<int>> labels_from_json(const json& j) {
    if (!j.contains("labels") || j.at("labels").is_null()) return std::nullopt;
    return j.at("labels").get<std::vector<int>>();
}

} // namespace detail

inline Graph graph_from_json(const json& j) {
    try {
        const auto n = j.at("n_nodes").get<std::size_t>();
        Matrix f = detail::features_from_json(j, n);
        std::vector<Edge> edges;
        for (const json& e : j.at("edges")) {
            require(e.is_array() && (e.size() == 2 || e.size() == 3),
                    "graph JSON: edges must be [i, j] or [i, j, weight]");
            const auto a = e[0].get<long long>();
            const auto b = e[1].get<long long>();
            require(a >= 0 && b >= 0, "graph JSON: negative edge endpoint");
            edges.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(b),
                             e.size() == 3 ? e[2].get<double>() : 1.0});
        }
        Masks masks;
        if (j.contains("masks") && !j.at("masks").is_null()) {
            const json& m = j.at("masks");
            if (m.contains("train")) masks.train = m.at("train").get<std::vector<std::size_t>>();
            if (m.contains("val")) masks.val = m.at("val").get<std::vector<std::size_t>>();
            if (m.contains("test")) masks.test = m.at("test").get<std::vector<std::size_t>>();
        }
        return Graph(n, std::move(f), std::move(edges), detail::labels_from_json(j), std::move(masks));
    } catch (const json::exception& e) {
        throw ParseError(std::string("graph JSON: ") + e.what());
    }
}

inline Graph read_graph(const std::filesystem::path& path) { return graph_from_json(read_json(path)); }

inline void write_graph(const std::filesystem::path& path, const Graph& g) {
    write_json(path, graph_to_json(g));
}

/// Node features and labels only. Any edge data in the document is never read.
struct FeatureTable {
    Matrix features;
    std::optional<std::vector<int>> labels;
};

inline FeatureTable read_features(const std::filesystem::path& path) {
    const json j = read_json(path);
    try {
        const auto n = j.at("n_nodes").get<std::size_t>();
        FeatureTable t{detail::features_from_json(j, n), detail::labels_from_json(j)};
        require(all_finite(t.features), "feature matrix contains non-finite entries");
        if (t.labels) require(t.labels->size() == n, "label count does not match node count");
        return t;
    } catch (const json::exception& e) {
        throw ParseError(std::string("feature JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Named parameter matrices plus scalar/string metadata. Values are written as
/// 17-significant-digit decimals, which read back to the identical doubles.
struct Checkpoint {
    std::map<std::string, Matrix> params;
    json meta = json::object();
};

inline std::string checkpoint_to_string(const Checkpoint& ck) {
    std::map<std::string, std::string> entries;
    for (auto& [key, value] : ck.meta.items()) {
        require(!ck.params.count(key), "checkpoint meta key '" + key + "' clashes with a parameter");
        entries[key] = value.dump();
    }
    for (const auto& [name, m] : ck.params) {
        std::string s = "{\"rows\": " + std::to_string(m.rows()) +
                        ", \"cols\": " + std::to_string(m.cols()) + ", \"data\": [";
        for (Index k = 0; k < m.size(); ++k) {
            require(std::isfinite(m.data()[k]), "checkpoint parameter '" + name + "' is not finite");
            if (k) s += ", ";
            s += format_double(m.data()[k]);
        }
        s += "]}";
        entries[name] = std::move(s);
    }
    std::string out = "{\n";
    bool first = true;
    for (const auto& [key, value] : entries) {
        if (!first) out += ",\n";
        first = false;
        out += "  " + json(key).dump() + ": " + value;
    }
    out += "\n}\n";
    return out;
}

inline Checkpoint checkpoint_from_json(const json& j) {
    require(j.is_object(), "checkpoint must be a JSON object");
    Checkpoint ck;
    for (auto& [key, value] : j.items()) {
        if (value.is_object() && value.contains("rows") && value.contains("cols") &&
            value.contains("data")) {
            const auto r = value.at("rows").get<Index>();
            const auto c = value.at("cols").get<Index>();
            const auto& data = value.at("data");
            require(r >= 0 && c >= 0 && data.size() == static_cast<std::size_t>(r * c),
                    "checkpoint parameter '" + key + "' has inconsistent shape");
            Matrix m(r, c);
            for (Index k = 0; k < r * c; ++k) m.data()[k] = data[static_cast<std::size_t>(k)].get<double>();
            ck.params.emplace(key, std::move(m));
        } else {
            ck.meta[key] = value;
        }
    }
    return ck;
}

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    write_text(path, checkpoint_to_string(ck));
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
    return checkpoint_from_json(read_json(path));
}

inline const Matrix& checkpoint_param(const Checkpoint& ck, const std::string& name) {
    auto it = ck.params.find(name);
    require(it != ck.params.end(), "checkpoint has no parameter '" + name + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// Traces and tables
// ---------------------------------------------------------------------------

inline std::string to_jsonl(const std::vector<json>& records) {
    std::string out;
    for (const json& r : records) out += r.dump() + "\n";
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) {
        require(row.size() == header.size(), "CSV row width does not match header");
        rows.push_back(std::move(row));
    }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
        return out;
    }
};

} // namespace angcn

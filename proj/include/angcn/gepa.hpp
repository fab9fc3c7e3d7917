#pragma once

// Edge-perturbing attack: a trainable perturbation matrix H is optimized against
// a frozen copy of a trained semi-GCN so that chosen target nodes are classified
// as chosen labels, while target rows stay untouched and the total edit volume
// is penalized.

#include "angcn/autodiff.hpp"
#include "angcn/error.hpp"
#include "angcn/graph.hpp"
#include "angcn/io.hpp"
#include "angcn/optim.hpp"
#include "angcn/spectral_gcn.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace angcn {

enum class AttackMode { single, multi };

inline std::string to_string(AttackMode m) { return m == AttackMode::single ? "single" : "multi"; }

inline AttackMode parse_attack_mode(const std::string& s) {
    if (s == "single") return AttackMode::single;
    if (s == "multi") return AttackMode::multi;
    throw std::invalid_argument("unknown attack mode '" + s + "'");
}

struct AttackSpec {
    std::vector<std::size_t> targets;
    std::vector<int> desired_labels;
    AttackMode mode = AttackMode::single;
    double vartheta = 1.0;   // multi mode: weight on the target rows of H
    double reg_weight = 0.05;
    int epochs = 300;
    double lr = 0.01;
    std::uint64_t seed = 0;
    double target_weight = 1.0; // extra weight on the target rows of the label loss

    Propagation surrogate = Propagation::renormalized;
    bool binarize_in_loop = false; // hard threshold with straight-through gradient
    bool early_stop = true;        // stop at the first epoch whose emitted graph succeeds
    bool prune = true;             // drop edits that are not needed for success
    int escalations = 3;           // retries with halved reg_weight after a failed run
    bool ranked_rounding = true;   // fallback when thresholding the final H' fails
    int rounding_budget = 500;     // candidate flips tried by the fallback
};

struct AttackResult {
    Matrix H;        // trained perturbation matrix
    Matrix H_prime;  // symmetrized, target lines frozen
    Matrix A_hat;    // emitted binary adjacency
    std::vector<Edge> edits_added;
    std::vector<Edge> edits_removed;
    std::vector<std::size_t> targets;
    std::vector<int> desired_labels;
    std::vector<bool> success;
    std::size_t perturbation_count = 0;
    int epochs_run = 0;
    int attempts = 1;
    double reg_weight_used = 0.0;
    std::vector<double> loss_trace;
    std::vector<int> clean_predictions;
    std::vector<int> attacked_predictions;

    bool all_success() const {
        return std::all_of(success.begin(), success.end(), [](bool b) { return b; });
    }
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

inline Tensor symmetrize(const Tensor& h) {
    require(h.rows() == h.cols(), "symmetrize needs a square matrix, got " + shape_str(h.value()));
    return add(h, transpose(h));
}

inline Matrix symmetrize(const Matrix& h) {
    require(h.rows() == h.cols(), "symmetrize needs a square matrix, got " + shape_str(h));
    return h + h.transpose();
}

/// Copies rows (and optionally columns) `lines` of `src` into x. No gradient
/// reaches the replaced entries.
inline Tensor replace_lines(const Tensor& x, const Matrix& src, const std::vector<std::size_t>& lines,
                            bool columns) {
    require(src.rows() == x.rows() && src.cols() == x.cols(),
            "replace_lines: shape mismatch " + shape_str(x.value()) + " vs " + shape_str(src));
    for (std::size_t k : lines)
        require(static_cast<Index>(k) < x.rows() && (!columns || static_cast<Index>(k) < x.cols()),
                "line index " + std::to_string(k) + " out of range");
    Matrix out = x.value();
    for (std::size_t k : lines) {
        out.row(static_cast<Index>(k)) = src.row(static_cast<Index>(k));
        if (columns) out.col(static_cast<Index>(k)) = src.col(static_cast<Index>(k));
    }
    return detail::make_op(std::move(out), {x}, [lines, columns](const Matrix& g, auto p) {
        Matrix gx = g;
        for (std::size_t k : lines) {
            gx.row(static_cast<Index>(k)).setZero();
            if (columns) gx.col(static_cast<Index>(k)).setZero();
        }
        p[0]->accumulate(gx);
    });
}

/// Rows in `targets` replaced by the corresponding rows of A.
inline Tensor freeze_target_rows(const Tensor& h_prime, const Matrix& a,
                                 const std::vector<std::size_t>& targets, bool mirror_columns = false) {
    require(h_prime.rows() == h_prime.cols() && a.rows() == h_prime.rows() && a.cols() == h_prime.cols(),
            "freeze_target_rows: shape mismatch " + shape_str(h_prime.value()) + " vs " + shape_str(a));
    return replace_lines(h_prime, a, targets, mirror_columns);
}

/// Sum(A - H'_k (.) Abar).
inline Tensor concealment_reg(const Matrix& a, const Tensor& hk, const Matrix& abar) {
    require(a.rows() == hk.rows() && a.cols() == hk.cols() && abar.rows() == a.rows() &&
                abar.cols() == a.cols(),
            "concealment_reg: shape mismatch");
    return sum(sub(Tensor::constant(a), hadamard(hk, Tensor::constant(abar))));
}

/// concealment_reg + vartheta * sum of the target rows of H.
inline Tensor multi_target_reg(const Matrix& a, const Tensor& hk, const Matrix& abar,
                               const std::vector<std::size_t>& targets, double vartheta, const Tensor& h) {
    std::vector<Index> rows(targets.begin(), targets.end());
    Tensor reg = concealment_reg(a, hk, abar);
    if (rows.empty()) return reg;
    return add(reg, scale(sum(gather_rows(h, rows)), vartheta));
}

/// Threshold rule: 1 where A < O, 0 where A >= O.
inline Matrix binarize(const Matrix& o, const Matrix& a) {
    require(o.rows() == a.rows() && o.cols() == a.cols(),
            "binarize: shape mismatch " + shape_str(o) + " vs " + shape_str(a));
    return (a.array() < o.array()).cast<double>().matrix();
}

/// binarize with an identity (straight-through) gradient to O.
inline Tensor binarize(const Tensor& o, const Matrix& a) {
    return detail::make_op(binarize(o.value(), a), {o}, [](const Matrix& g, auto p) { p[0]->accumulate(g); });
}

struct BlockShape {
    Index rows = 0;
    Index cols = 0;
    friend bool operator==(const BlockShape&, const BlockShape&) = default;
};

struct Perturbation {
    Tensor H;
    Matrix trainable;               // 1 where the entry is optimized
    std::vector<BlockShape> blocks; // single mode: the four blocks around the target
    std::size_t trainable_count = 0;
};

/// H initialized to A. In single mode the target's row and column are held
/// fixed and the trainable entries form four blocks (above-left, above-right,
/// below-left, below-right of the target, 0-based index kappa).
inline Perturbation init_perturbation(const Matrix& a, AttackMode mode, const std::vector<std::size_t>& targets) {
    require(a.rows() == a.cols(), "init_perturbation needs a square adjacency");
    const Index n = a.rows();
    Perturbation p;
    p.H = Tensor::parameter(a);
    p.trainable = Matrix::Ones(n, n);
    if (mode == AttackMode::single) {
        require(targets.size() == 1, "single mode needs exactly one target");
        const auto k = static_cast<Index>(targets[0]);
        require(k < n, "target out of range");
        p.trainable.row(k).setZero();
        p.trainable.col(k).setZero();
        p.blocks = {{k, k}, {k, n - k - 1}, {n - k - 1, k}, {n - k - 1, n - k - 1}};
    }
    p.trainable_count = static_cast<std::size_t>(p.trainable.sum());
    return p;
}

inline SemiGcnModel freeze(const SemiGcnModel& m) { return {m.w1.detach(), m.w2.detach(), m.propagation}; }

/// Added and removed undirected edges of `a_hat` relative to `a`.
inline std::pair<std::vector<Edge>, std::vector<Edge>> edge_edits(const Matrix& a, const Matrix& a_hat) {
    std::vector<Edge> added, removed;
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = i + 1; j < a.cols(); ++j) {
            const bool before = a(i, j) != 0.0, after = a_hat(i, j) != 0.0;
            if (before == after) continue;
            (after ? added : removed).push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), 1.0});
        }
    return {added, removed};
}

// ---------------------------------------------------------------------------
// Attack runner
// ---------------------------------------------------------------------------

/// The attack objective at perturbation H: cross-entropy of the surrogate
/// output against Y_hat, plus reg_weight times the edit volume sum|A - R|, plus
/// (multi mode) vartheta times the sum of the target rows of H.
inline Tensor attack_loss(const SemiGcnModel& target, const Tensor& h, const Matrix& a, const Matrix& f,
                          const Matrix& y_hat, const AttackSpec& spec) {
    require(h.rows() == a.rows() && h.cols() == a.cols(), "attack_loss: H does not match A");
    std::vector<Index> target_rows(spec.targets.begin(), spec.targets.end());
    Tensor hp = symmetrize(h);
    // Relaxed adjacency: entries of H' above A read as edges, so H = A
    // reproduces the clean graph.
    Tensor r = clamp(sub(hp, Tensor::constant(a)), 0.0, 1.0);
    if (spec.binarize_in_loop) r = binarize(add(r, Tensor::constant((a.array() - 0.5).matrix())), a);
    r = replace_lines(r, a, spec.targets, true);
    Tensor P = spec.surrogate == Propagation::renormalized ? sym_renormalize(r) : r;
    Tensor out = forward_semi(target, P, Tensor::constant(f));
    Tensor loss = cross_entropy(out, y_hat);
    if (spec.target_weight != 1.0) {
        Matrix y_target(static_cast<Index>(target_rows.size()), y_hat.cols());
        for (std::size_t k = 0; k < target_rows.size(); ++k) y_target.row(static_cast<Index>(k)) = y_hat.row(target_rows[k]);
        loss = add(loss, scale(cross_entropy(gather_rows(out, target_rows), y_target), spec.target_weight - 1.0));
    }
    // Edit volume sum|A - R| written as Sum(A) + Sum((1 - 2A) (.) R) for R in [0, 1].
    Tensor penalty = add(Tensor::scalar(a.sum()), sum(hadamard(r, Tensor::constant((1.0 - 2.0 * a.array()).matrix()))));
    loss = add(loss, scale(penalty, spec.reg_weight));
    if (spec.mode == AttackMode::multi) loss = add(loss, scale(sum(gather_rows(h, target_rows)), spec.vartheta));
    return loss;
}

namespace detail {

inline void validate_attack(const SemiGcnModel& target, const Graph& g, const AttackSpec& spec,
                            const std::vector<int>& clean) {
    require(!target.w1.requires_grad() && !target.w2.requires_grad(),
            "run_attack needs a frozen target model (see freeze())");
    require(!spec.targets.empty(), "attack needs at least one target");
    require(spec.desired_labels.size() == spec.targets.size(), "one desired label per target is required");
    require(spec.mode == AttackMode::multi || spec.targets.size() == 1, "single mode needs exactly one target");
    require(spec.epochs >= 0 && spec.lr >= 0 && spec.reg_weight >= 0 && spec.vartheta >= 0,
            "attack epochs, learning rate and weights must be non-negative");
    require(target.w1.rows() == g.n_features(), "target model does not match feature dimension");
    std::set<std::size_t> seen;
    const int classes = static_cast<int>(target.w2.cols());
    for (std::size_t k = 0; k < spec.targets.size(); ++k) {
        const std::size_t t = spec.targets[k];
        require(t < g.n_nodes(), "target " + std::to_string(t) + " out of range");
        require(seen.insert(t).second, "duplicate target " + std::to_string(t));
        const int want = spec.desired_labels[k];
        require(want >= 0 && want < classes, "desired label " + std::to_string(want) + " out of range");
        require(want != clean[t], "desired label for target " + std::to_string(t) +
                                      " equals its current prediction " + std::to_string(clean[t]));
    }
}

/// Pre-constraint matrix O = R + A - 1/2 with R = clamp(H' - A, 0, 1), so the
/// threshold rule rounds the relaxed adjacency R at 1/2.
inline Matrix pre_constraint(const Matrix& h_prime, const Matrix& a) {
    return (h_prime - a).cwiseMax(0.0).cwiseMin(1.0) + a - Matrix::Constant(a.rows(), a.cols(), 0.5);
}

/// Emitted adjacency: threshold O against A, then restore target lines from A.
inline Matrix emit_adjacency(const Matrix& h_prime, const Matrix& a, const std::vector<std::size_t>& targets) {
    Matrix out = binarize(pre_constraint(h_prime, a), a);
    for (std::size_t k : targets) {
        out.row(static_cast<Index>(k)) = a.row(static_cast<Index>(k));
        out.col(static_cast<Index>(k)) = a.col(static_cast<Index>(k));
    }
    out.diagonal().setZero();
    return out;
}

inline std::vector<bool> target_success(const std::vector<int>& pred, const AttackSpec& spec) {
    std::vector<bool> ok;
    for (std::size_t k = 0; k < spec.targets.size(); ++k) ok.push_back(pred[spec.targets[k]] == spec.desired_labels[k]);
    return ok;
}

inline AttackResult attack_once(const SemiGcnModel& target, const Graph& g, const AttackSpec& spec) {
    const Matrix a = (build_adjacency(g).array() != 0.0).cast<double>().matrix();
    const Matrix& f = g.features();
    const std::vector<int> clean = predict_semi(target, a, f);
    detail::validate_attack(target, g, spec, clean);

    std::vector<int> wanted = clean;
    for (std::size_t k = 0; k < spec.targets.size(); ++k) wanted[spec.targets[k]] = spec.desired_labels[k];
    const Matrix y_hat = one_hot(wanted, static_cast<int>(target.w2.cols()));

    Perturbation pert = init_perturbation(a, spec.mode, spec.targets);
    require(pert.trainable_count > 0, "attack has no trainable entries");
    Optimizer opt({pert.H}, OptimizerKind::adam, spec.lr);

    AttackResult res;
    res.targets = spec.targets;
    res.desired_labels = spec.desired_labels;
    res.reg_weight_used = spec.reg_weight;
    res.clean_predictions = clean;

    auto emitted = [&](const Matrix& h) { return detail::emit_adjacency(symmetrize(h), a, spec.targets); };
    Matrix best = emitted(pert.H.value());
    bool done = spec.early_stop && detail::target_success(predict_semi(target, best, f), spec) ==
                                       std::vector<bool>(spec.targets.size(), true);

    for (int epoch = 1; epoch <= spec.epochs && !done; ++epoch) {
        Tensor loss = attack_loss(target, pert.H, a, f, y_hat, spec);
        res.loss_trace.push_back(loss.item());

        opt.zero_grad();
        backward(loss);
        pert.H.node().grad = pert.H.grad().cwiseProduct(pert.trainable);
        opt.step();
        pert.H.mutable_value() = pert.H.value().cwiseMax(0.0).cwiseMin(1.0);
        res.epochs_run = epoch;

        if (spec.early_stop) {
            Matrix cand = emitted(pert.H.value());
            if (detail::target_success(predict_semi(target, cand, f), spec) ==
                std::vector<bool>(spec.targets.size(), true)) {
                best = std::move(cand);
                done = true;
            }
        }
    }
    auto all_ok = [&](const Matrix& adj) {
        return detail::target_success(predict_semi(target, adj, f), spec) ==
               std::vector<bool>(spec.targets.size(), true);
    };
    if (!done) {
        best = emitted(pert.H.value());
        if (spec.ranked_rounding && !all_ok(best)) {
            // Apply flips in decreasing order of relaxed change |R - A| until
            // every target is flipped.
            const Matrix r = (symmetrize(pert.H.value()) - a).cwiseMax(0.0).cwiseMin(1.0);
            std::set<std::size_t> frozen(spec.targets.begin(), spec.targets.end());
            std::vector<std::tuple<double, Index, Index>> cand;
            for (Index i = 0; i < a.rows(); ++i)
                for (Index j = i + 1; j < a.cols(); ++j) {
                    if (frozen.count(static_cast<std::size_t>(i)) || frozen.count(static_cast<std::size_t>(j))) continue;
                    const double change = std::abs(r(i, j) - a(i, j));
                    if (change > 1e-9) cand.emplace_back(-change, i, j);
                }
            std::sort(cand.begin(), cand.end());
            if (cand.size() > static_cast<std::size_t>(spec.rounding_budget)) cand.resize(static_cast<std::size_t>(spec.rounding_budget));
            Matrix trial = a;
            for (const auto& [neg, i, j] : cand) {
                trial(i, j) = trial(j, i) = 1.0 - a(i, j);
                if (all_ok(trial)) {
                    best = trial;
                    break;
                }
            }
        }
    }

    if (spec.prune) {
        auto [added, removed] = edge_edits(a, best);
        std::vector<Edge> edits = added;
        edits.insert(edits.end(), removed.begin(), removed.end());
        auto& ok = all_ok;
        if (ok(best)) {
            for (const Edge& e : edits) {
                Matrix trial = best;
                const auto u = static_cast<Index>(e.u), v = static_cast<Index>(e.v);
                trial(u, v) = trial(v, u) = a(u, v);
                if (ok(trial)) best = std::move(trial);
            }
        }
    }

    res.H = pert.H.value();
    Tensor hk = replace_lines(Tensor::constant(symmetrize(res.H)), a, spec.targets, true);
    res.H_prime = hk.value();
    res.A_hat = best;
    std::tie(res.edits_added, res.edits_removed) = edge_edits(a, best);
    res.perturbation_count = res.edits_added.size() + res.edits_removed.size();
    res.attacked_predictions = predict_semi(target, best, f);
    res.success = detail::target_success(res.attacked_predictions, spec);
    return res;
}

} // namespace detail

/// Runs the attack; when a target is not flipped the run is repeated from
/// scratch with reg_weight halved, up to `escalations` times.
inline AttackResult run_attack(const SemiGcnModel& target, const Graph& g, const AttackSpec& spec) {
    AttackSpec cur = spec;
    AttackResult res = detail::attack_once(target, g, cur);
    res.attempts = 1;
    for (int k = 0; k < spec.escalations && !res.all_success() && cur.reg_weight > 0; ++k) {
        cur.reg_weight *= 0.5;
        AttackResult next = detail::attack_once(target, g, cur);
        next.attempts = res.attempts + 1;
        res = std::move(next);
    }
    return res;
}

inline Graph extract_victim_graph(const AttackResult& r, const Graph& g) {
    require(r.A_hat.rows() == static_cast<Index>(g.n_nodes()), "attack result does not match graph size");
    return g.with_edges(edges_from_adjacency(r.A_hat));
}

inline json to_json(const AttackResult& r) {
    auto edges = [](const std::vector<Edge>& es) {
        json out = json::array();
        for (const Edge& e : es) out.push_back({e.u, e.v});
        return out;
    };
    std::size_t kept = 0, others = 0;
    std::set<std::size_t> tset(r.targets.begin(), r.targets.end());
    for (std::size_t i = 0; i < r.clean_predictions.size(); ++i) {
        if (tset.count(i)) continue;
        ++others;
        kept += r.clean_predictions[i] == r.attacked_predictions[i];
    }
    return {{"targets", r.targets},
            {"desired_labels", r.desired_labels},
            {"success", r.success},
            {"perturbation_count", r.perturbation_count},
            {"edits_added", edges(r.edits_added)},
            {"edits_removed", edges(r.edits_removed)},
            {"epochs_run", r.epochs_run},
            {"attempts", r.attempts},
            {"reg_weight_used", r.reg_weight_used},
            {"non_target_retention", others ? static_cast<double>(kept) / static_cast<double>(others) : 1.0}};
}

// ---------------------------------------------------------------------------
// Degree distribution
// ---------------------------------------------------------------------------

struct DegreeReport {
    std::vector<std::size_t> clean;  // clean[k] = number of nodes with degree k
    std::vector<std::size_t> victim;
    std::size_t l1 = 0;
    std::size_t max_deviation = 0;
};

inline DegreeReport degree_distribution_report(const Graph& clean, const Graph& victim) {
    require(clean.n_nodes() == victim.n_nodes(), "degree report needs graphs of the same size");
    auto hist = [](const Graph& g) {
        std::vector<std::size_t> h;
        for (std::size_t d : node_degrees(g)) {
            if (d >= h.size()) h.resize(d + 1, 0);
            ++h[d];
        }
        return h;
    };
    DegreeReport r{hist(clean), hist(victim)};
    const std::size_t len = std::max(r.clean.size(), r.victim.size());
    r.clean.resize(len, 0);
    r.victim.resize(len, 0);
    for (std::size_t k = 0; k < len; ++k) {
        const std::size_t d = r.clean[k] > r.victim[k] ? r.clean[k] - r.victim[k] : r.victim[k] - r.clean[k];
        r.l1 += d;
        r.max_deviation = std::max(r.max_deviation, d);
    }
    return r;
}

inline json to_json(const DegreeReport& r) {
    return {{"clean", r.clean}, {"victim", r.victim}, {"l1", r.l1}, {"max_deviation", r.max_deviation}};
}

} // namespace angcn

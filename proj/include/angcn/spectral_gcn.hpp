#pragma once

#include "angcn/autodiff.hpp"
#include "angcn/error.hpp"
#include "angcn/graph.hpp"
#include "angcn/io.hpp"
#include "angcn/optim.hpp"
#include "angcn/rng.hpp"
#include "angcn/spectral_basis.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace angcn {

inline Matrix glorot(Index fan_in, Index fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> unif(-limit, limit);
    Matrix w(fan_in, fan_out);
    for (Index k = 0; k < w.size(); ++k) w.data()[k] = unif(rng);
    return w;
}

inline std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Index i = 0; i < m.rows(); ++i) {
        Index best = 0;
        m.row(i).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels,
                       const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i : idx) hit += predicted.at(i) == labels.at(i);
    return static_cast<double>(hit) / static_cast<double>(idx.size());
}

inline std::string to_string(Activation a) {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    default: return "identity";
    }
}

inline Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "leaky_relu" || s == "leaky") return Activation::leaky_relu;
    if (s == "identity" || s == "linear") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

// ---------------------------------------------------------------------------
// Single-layer spectral model
// ---------------------------------------------------------------------------

struct SpectralModel {
    SpectralBasisPtr basis;
    Tensor filter;  // N x 1, the diagonal of g_theta(Lambda)
    Tensor decoder; // d x classes
    Activation activation = Activation::relu;
};

/// Low-pass response (1 - lambda/lambda_max)^power; power 0 gives all ones.
inline Matrix lowpass_filter(const Vector& eigenvalues, int power = 1) {
    const double top = eigenvalues.maxCoeff();
    Matrix theta(eigenvalues.size(), 1);
    for (Index l = 0; l < eigenvalues.size(); ++l) {
        const double x = top > 0 ? 1.0 - eigenvalues(l) / top : 1.0;
        theta(l, 0) = std::pow(x, power);
    }
    return theta;
}

inline SpectralModel make_spectral_model(SpectralBasisPtr basis, Index n_features, int n_classes,
                                         std::uint64_t seed, int filter_power = 1,
                                         Activation act = Activation::relu) {
    require(basis != nullptr, "spectral model needs a basis");
    require(n_classes > 0, "spectral model needs at least one class");
    Rng rng = make_rng(seed, "model-init");
    SpectralModel m;
    m.filter = Tensor::parameter(lowpass_filter(basis->eigenvalues, filter_power));
    m.decoder = Tensor::parameter(glorot(n_features, n_classes, rng));
    m.basis = std::move(basis);
    m.activation = act;
    return m;
}

/// Constant pieces of the spectral forward pass for one feature matrix.
struct SpectralInputs {
    Tensor U;    // N x N
    Tensor Utf;  // U^T f, N x d
};

inline SpectralInputs spectral_inputs(const SpectralBasis& basis, const Matrix& f) {
    require(f.rows() == basis.size(), "basis has " + std::to_string(basis.size()) +
                                          " nodes but features have " + std::to_string(f.rows()) + " rows");
    return {Tensor::constant(basis.vectors), Tensor::constant(basis.vectors.transpose() * f)};
}

/// sigma(U diag(theta) U^T f), the pre-decoder embedding.
inline Tensor spectral_embedding(const SpectralModel& m, const SpectralInputs& in) {
    require(m.filter.rows() == in.U.rows() && m.filter.cols() == 1,
            "filter shape " + shape_str(m.filter.value()) + " does not match basis size");
    return activate(matmul(in.U, diag_scale(m.filter, in.Utf)), m.activation);
}

inline Tensor forward_spectral(const SpectralModel& m, const SpectralInputs& in) {
    Tensor emb = spectral_embedding(m, in);
    require(m.decoder.rows() == emb.cols(), "decoder expects " + std::to_string(m.decoder.rows()) +
                                                " features, embedding has " + std::to_string(emb.cols()));
    return matmul(emb, m.decoder);
}

inline Tensor forward_spectral(const SpectralModel& m, const Matrix& f) {
    return forward_spectral(m, spectral_inputs(*m.basis, f));
}

/// Embedding row of node v: sigma(u(v) diag(theta) U^T f).
inline RowVector node_embedding(const SpectralModel& m, const Matrix& f, Index v) {
    require(v >= 0 && v < m.basis->size(), "node " + std::to_string(v) + " out of range");
    require(f.rows() == m.basis->size(), "feature rows do not match basis size");
    const Eigen::Map<const Vector> theta(m.filter.value().data(), m.filter.value().size());
    RowVector pre = m.basis->row_of(v).cwiseProduct(theta.transpose()) *
                    (m.basis->vectors.transpose() * f);
    return activate(Matrix(pre), m.activation);
}

// ---------------------------------------------------------------------------
// Two-layer semi-supervised GCN
// ---------------------------------------------------------------------------

enum class Propagation { raw, renormalized };

inline std::string to_string(Propagation p) { return p == Propagation::raw ? "raw" : "renormalized"; }

inline Propagation parse_propagation(const std::string& s) {
    if (s == "raw") return Propagation::raw;
    if (s == "renormalized" || s == "renorm") return Propagation::renormalized;
    throw std::invalid_argument("unknown propagation '" + s + "'");
}

/// D~^{-1/2} (A + I) D~^{-1/2} with D~ the row sums of A + I.
inline Matrix renormalized_adjacency(const Matrix& a) {
    Matrix m = a;
    m.diagonal().array() += 1.0;
    Vector s = m.rowwise().sum().cwiseInverse().cwiseSqrt();
    return s.asDiagonal() * m * s.asDiagonal();
}

inline Matrix propagation_matrix(const Matrix& a, Propagation p) {
    return p == Propagation::raw ? a : renormalized_adjacency(a);
}

/// Differentiable D~^{-1/2} (R + I) D~^{-1/2} with D~ the row sums of R + I.
/// R must have non-negative row sums.
inline Tensor sym_renormalize(const Tensor& r) {
    require(r.rows() == r.cols(), "sym_renormalize needs a square matrix, got " + shape_str(r.value()));
    Matrix m = r.value();
    m.diagonal().array() += 1.0;
    Vector d = m.rowwise().sum();
    require((d.array() > 0).all(), "sym_renormalize: row sums must be positive");
    Vector s = d.cwiseInverse().cwiseSqrt();
    Matrix out = s.asDiagonal() * m * s.asDiagonal();
    return detail::make_op(std::move(out), {r}, [m, d, s](const Matrix& g, auto p) {
        // out_ij = s_i m_ij s_j, s_i = d_i^{-1/2}, d_i = sum_j m_ij
        Matrix gm = s.asDiagonal() * g * s.asDiagonal();
        Vector gs = (g.cwiseProduct(m) * s) + (g.cwiseProduct(m)).transpose() * s;
        Vector gd = gs.cwiseProduct((-0.5) * d.cwiseInverse().cwiseProduct(s));
        gm.colwise() += gd;
        p[0]->accumulate(gm);
    });
}

struct SemiGcnModel {
    Tensor w1; // d x h
    Tensor w2; // h x classes
    Propagation propagation = Propagation::renormalized;
};

inline SemiGcnModel make_semi_model(Index n_features, Index hidden, int n_classes, std::uint64_t seed,
                                    Propagation prop = Propagation::renormalized) {
    require(hidden > 0 && n_classes > 0, "semi-GCN needs positive hidden width and classes");
    Rng rng = make_rng(seed, "model-init");
    SemiGcnModel m;
    m.w1 = Tensor::parameter(glorot(n_features, hidden, rng));
    m.w2 = Tensor::parameter(glorot(hidden, n_classes, rng));
    m.propagation = prop;
    return m;
}

/// Hidden layer relu(P f W1).
inline Tensor semi_hidden(const SemiGcnModel& m, const Tensor& P, const Tensor& f) {
    require(P.rows() == P.cols() && P.cols() == f.rows(),
            "forward_semi: propagation " + shape_str(P.value()) + " vs features " + shape_str(f.value()));
    return relu(matmul(P, matmul(f, m.w1)));
}

/// softmax_rows(P relu(P f W1) W2).
inline Tensor forward_semi(const SemiGcnModel& m, const Tensor& P, const Tensor& f) {
    return softmax_rows(matmul(P, matmul(semi_hidden(m, P, f), m.w2)));
}

inline Matrix forward_semi(const SemiGcnModel& m, const Matrix& P, const Matrix& f) {
    SemiGcnModel frozen{m.w1.detach(), m.w2.detach(), m.propagation};
    return forward_semi(frozen, Tensor::constant(P), Tensor::constant(f)).value();
}

/// Class predictions of a semi-GCN on adjacency `a` (propagation per model tag).
inline std::vector<int> predict_semi(const SemiGcnModel& m, const Matrix& a, const Matrix& f) {
    return argmax_rows(forward_semi(m, propagation_matrix(a, m.propagation), f));
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 200;
    OptimizerKind optimizer = OptimizerKind::adam;
    double lr = 0.01;
    double l2 = 5e-4;
    /// Called once per epoch with the pre-decoder embedding of the forward
    /// pass that produced that epoch's gradient.
    std::function<void(int epoch, const Matrix& embedding)> on_epoch;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

inline json to_json(const EpochMetrics& m) {
    return {{"epoch", m.epoch}, {"train_loss", m.train_loss}, {"train_acc", m.train_acc}, {"val_acc", m.val_acc}};
}

namespace detail {

/// Shared loop. `forward` returns (probabilities N x classes, embedding).
template <class Forward>
std::vector<EpochMetrics> train_loop(const Graph& g, const TrainConfig& cfg, std::vector<Tensor> params,
                                     std::vector<Tensor> weights, Forward forward) {
    require(g.has_labels(), "training needs a labeled graph");
    require(!g.masks().train.empty(), "training needs a non-empty train mask");
    require(cfg.epochs >= 0, "epoch count must be non-negative");
    const std::vector<int>& labels = *g.labels();
    std::vector<Index> train_idx(g.masks().train.begin(), g.masks().train.end());
    std::vector<int> train_labels;
    for (Index i : train_idx) train_labels.push_back(labels[static_cast<std::size_t>(i)]);

    Optimizer opt(std::move(params), cfg.optimizer, cfg.lr);
    std::vector<EpochMetrics> trace;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto [probs, embedding] = forward();
        const Matrix target = one_hot(train_labels, static_cast<int>(probs.cols()));
        Tensor loss = scale(cross_entropy(gather_rows(probs, train_idx), target),
                            1.0 / static_cast<double>(train_idx.size()));
        for (const Tensor& w : weights) loss = add(loss, scale(sum(hadamard(w, w)), cfg.l2));

        const std::vector<int> pred = argmax_rows(probs.value());
        trace.push_back({epoch, loss.item(), accuracy(pred, labels, g.masks().train),
                         accuracy(pred, labels, g.masks().val)});
        if (cfg.on_epoch) cfg.on_epoch(epoch, embedding.value());

        opt.zero_grad();
        backward(loss);
        opt.step();
    }
    return trace;
}

} // namespace detail

inline std::vector<EpochMetrics> train_model(SpectralModel& m, const Graph& g, const TrainConfig& cfg) {
    require(m.basis->size() == static_cast<Index>(g.n_nodes()), "model basis does not match graph size");
    const SpectralInputs in = spectral_inputs(*m.basis, g.features());
    return detail::train_loop(g, cfg, {m.filter, m.decoder}, {m.decoder}, [&] {
        Tensor emb = spectral_embedding(m, in);
        return std::pair{softmax_rows(matmul(emb, m.decoder)), emb};
    });
}

inline std::vector<EpochMetrics> train_model(SemiGcnModel& m, const Graph& g, const TrainConfig& cfg) {
    const Tensor P = Tensor::constant(propagation_matrix(build_adjacency(g), m.propagation));
    const Tensor f = Tensor::constant(g.features());
    return detail::train_loop(g, cfg, {m.w1, m.w2}, {m.w1, m.w2}, [&] {
        Tensor h = semi_hidden(m, P, f);
        return std::pair{softmax_rows(matmul(P, matmul(h, m.w2))), h};
    });
}

inline Matrix predict_proba(const SpectralModel& m, const Matrix& f) {
    SpectralModel frozen{m.basis, m.filter.detach(), m.decoder.detach(), m.activation};
    return softmax_rows(forward_spectral(frozen, f)).value();
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline Checkpoint to_checkpoint(const SpectralModel& m) {
    Checkpoint ck;
    ck.params["filter"] = m.filter.value();
    ck.params["decoder"] = m.decoder.value();
    ck.meta = {{"model", "spectral"},
               {"laplacian", to_string(m.basis->kind)},
               {"activation", to_string(m.activation)},
               {"n_nodes", m.basis->size()}};
    return ck;
}

inline SpectralModel spectral_from_checkpoint(const Checkpoint& ck, SpectralBasisPtr basis) {
    require(ck.meta.value("model", "") == "spectral", "checkpoint is not a spectral model");
    SpectralModel m;
    m.filter = Tensor::parameter(checkpoint_param(ck, "filter"));
    m.decoder = Tensor::parameter(checkpoint_param(ck, "decoder"));
    m.activation = parse_activation(ck.meta.value("activation", "relu"));
    require(m.filter.rows() == basis->size(), "checkpoint filter does not match graph size");
    m.basis = std::move(basis);
    return m;
}

inline Checkpoint to_checkpoint(const SemiGcnModel& m) {
    Checkpoint ck;
    ck.params["w1"] = m.w1.value();
    ck.params["w2"] = m.w2.value();
    ck.meta = {{"model", "semi"}, {"propagation", to_string(m.propagation)}};
    return ck;
}

inline SemiGcnModel semi_from_checkpoint(const Checkpoint& ck) {
    require(ck.meta.value("model", "") == "semi", "checkpoint is not a semi-GCN model");
    SemiGcnModel m;
    m.w1 = Tensor::parameter(checkpoint_param(ck, "w1"));
    m.w2 = Tensor::parameter(checkpoint_param(ck, "w2"));
    require(m.w1.cols() == m.w2.rows(), "checkpoint layer shapes do not chain");
    m.propagation = parse_propagation(ck.meta.value("propagation", "renormalized"));
    return m;
}

} // namespace angcn

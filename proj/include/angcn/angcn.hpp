#pragma once

// Anonymous GCN: a generator learns to produce spectral positions from
// node-indexed staggered noise while a spectral discriminator learns to tell
// them apart from the real positions. Inference uses generated positions on
// both sides of the filter, so it never touches the graph's edges.

#include "angcn/autodiff.hpp"
#include "angcn/error.hpp"
#include "angcn/graph.hpp"
#include "angcn/io.hpp"
#include "angcn/optim.hpp"
#include "angcn/rng.hpp"
#include "angcn/spectral_basis.hpp"
#include "angcn/spectral_gcn.hpp"
#include "angcn/staggered.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace angcn {

// ---------------------------------------------------------------------------
// Generator and discriminator
// ---------------------------------------------------------------------------

/// Two-layer MLP: noise (m x k) -> relu(z s W1 + b1) W2 + b2 (m x N), where s
/// is a fixed input scale.
struct Generator {
    Tensor w1, b1, w2, b2;
    double input_scale = 1.0;

    Index noise_width() const { return w1.rows(); }
    Index output_width() const { return w2.cols(); }
    std::vector<Tensor> params() const { return {w1, b1, w2, b2}; }
};

inline Generator make_generator(Index k, Index hidden, Index n, double input_scale, std::uint64_t seed) {
    require(k > 0 && hidden > 0 && n > 0, "generator sizes must be positive");
    Rng rng = make_rng(seed, "generator-init");
    Generator g;
    g.w1 = Tensor::parameter(glorot(k, hidden, rng));
    g.b1 = Tensor::parameter(Matrix::Zero(1, hidden));
    g.w2 = Tensor::parameter(glorot(hidden, n, rng));
    g.b2 = Tensor::parameter(Matrix::Zero(1, n));
    g.input_scale = input_scale;
    return g;
}

inline Generator detached(const Generator& g) {
    return {g.w1.detach(), g.b1.detach(), g.w2.detach(), g.b2.detach(), g.input_scale};
}

inline Tensor generate_rows(const Generator& g, const Tensor& z) {
    require(z.cols() == g.noise_width(), "generator expects noise width " + std::to_string(g.noise_width()) +
                                             ", got " + std::to_string(z.cols()));
    Tensor h = relu(add_row_broadcast(matmul(scale(z, g.input_scale), g.w1), g.b1));
    return add_row_broadcast(matmul(h, g.w2), g.b2);
}

/// u^G(v) = G(z) for a single noise vector.
inline RowVector generate_row(const Generator& g, const RowVector& z) {
    return generate_rows(detached(g), Tensor::constant(Matrix(z))).value().row(0);
}

struct Discriminator {
    Tensor enc; // N x 1 diagonal filter
    Tensor dec; // d x classes
    Activation activation = Activation::relu;

    std::vector<Tensor> params() const { return {enc, dec}; }
};

inline Discriminator make_discriminator(const SpectralBasis& basis, Index n_features, int n_classes,
                                        std::uint64_t seed, int filter_power = 1,
                                        Activation act = Activation::relu) {
    Rng rng = make_rng(seed, "discriminator-init");
    return {Tensor::parameter(lowpass_filter(basis.eigenvalues, filter_power)),
            Tensor::parameter(glorot(n_features, n_classes, rng)), act};
}

inline Discriminator detached(const Discriminator& d) { return {d.enc.detach(), d.dec.detach(), d.activation}; }

// ---------------------------------------------------------------------------
// Training state
// ---------------------------------------------------------------------------

struct AnGcnState {
    SpectralBasisPtr basis;
    Matrix UD;   // N x N; column l approximates node l's position u(l)^T
    Matrix P;    // UD * f, kept in sync by update_UD
    Matrix Utf;  // U^T f for the real positions
    Matrix f;
    double q = 0.1;
    int epoch = 0;
};

/// U^D starts at U^T so that its columns hold node positions, the layout the
/// generated rows are written into.
inline AnGcnState make_state(SpectralBasisPtr basis, const Matrix& f, double q) {
    require(basis != nullptr, "AN-GCN state needs a basis");
    require(f.rows() == basis->size(), "feature rows do not match basis size");
    require(q >= 0.0 && q <= 1.0, "q must lie in [0, 1]");
    AnGcnState s;
    s.UD = basis->vectors.transpose();
    s.Utf = basis->vectors.transpose() * f;
    s.P = s.Utf;
    s.f = f;
    s.q = q;
    s.basis = std::move(basis);
    return s;
}

/// Column l of U^D moves a fraction q toward the generated row.
inline void update_UD(AnGcnState& s, Index l, const RowVector& generated) {
    require(l >= 0 && l < s.UD.cols(), "node " + std::to_string(l) + " out of range");
    require(generated.size() == s.UD.rows(), "generated row has the wrong length");
    const Vector delta = s.q * (generated.transpose() - s.UD.col(l));
    s.UD.col(l) += delta;
    s.P.noalias() += delta * s.f.row(l);
}

namespace detail {

/// act(pos (.) enc^T * rhs) * dec for a batch of position rows.
inline Tensor spectral_logits(const Tensor& pos, const Discriminator& d, const Tensor& rhs) {
    require(pos.cols() == d.enc.rows(), "position width does not match the discriminator filter");
    Tensor enc_row = transpose(d.enc);
    Tensor scaled = pos.rows() == 1 ? hadamard(pos, enc_row) : transpose(diag_scale(d.enc, transpose(pos)));
    return matmul(activate(matmul(scaled, rhs), d.activation), d.dec);
}

inline Matrix spectral_logits(const Matrix& pos, const Discriminator& d, const Matrix& rhs) {
    const Eigen::Map<const Vector> enc(d.enc.value().data(), d.enc.value().size());
    Matrix pre = (pos * enc.asDiagonal()) * rhs;
    pre = activate(pre, d.activation);
    return pre * d.dec.value();
}

} // namespace detail

inline Tensor real_logits(const AnGcnState& s, const Discriminator& d, Index v) {
    return detail::spectral_logits(Tensor::constant(Matrix(s.basis->row_of(v))), d, Tensor::constant(s.Utf));
}

inline Tensor fake_logits(const AnGcnState& s, const Discriminator& d, const Tensor& generated_row) {
    return detail::spectral_logits(generated_row, d, Tensor::constant(s.P));
}

/// (y_fake, y_real) for node v given a generated row.
inline std::pair<RowVector, RowVector> fake_and_real_labels(const AnGcnState& s, const Discriminator& d, Index v,
                                                            const RowVector& generated) {
    const Discriminator fd = detached(d);
    return {fake_logits(s, fd, Tensor::constant(Matrix(generated))).value().row(0),
            real_logits(s, fd, v).value().row(0)};
}

enum class SampleKind { real, fake };

/// Uniform decoy label among the classes other than `label`.
inline int sample_decoy(int label, int n_classes, Rng& rng) {
    require(n_classes >= 2, "decoy labels need at least two classes");
    require(label >= 0 && label < n_classes, "label out of range");
    std::uniform_int_distribution<int> pick(0, n_classes - 2);
    const int k = pick(rng);
    return k >= label ? k + 1 : k;
}

/// How a row of logits is scored against a one-hot class.
///   sigmoid_ce:  -sum t log sigmoid(y)          (target class only)
///   sigmoid_bce: -sum t log sigmoid(y) + (1 - t) log(1 - sigmoid(y))
enum class LabelLoss { sigmoid_ce, sigmoid_bce };

inline LabelLoss parse_label_loss(const std::string& s) {
    if (s == "sigmoid-ce" || s == "ce") return LabelLoss::sigmoid_ce;
    if (s == "sigmoid-bce" || s == "bce") return LabelLoss::sigmoid_bce;
    throw std::invalid_argument("unknown label loss '" + s + "'");
}

inline std::string to_string(LabelLoss l) { return l == LabelLoss::sigmoid_ce ? "sigmoid-ce" : "sigmoid-bce"; }

inline Tensor label_loss(const Tensor& y, int cls, LabelLoss kind) {
    const std::vector<int> one{cls};
    const Matrix t = one_hot(one, static_cast<int>(y.cols()));
    Tensor loss = cross_entropy(sigmoid(y), t);
    if (kind == LabelLoss::sigmoid_bce)
        loss = add(loss, weighted_nll(sigmoid(scale(y, -1.0)), (1.0 - t.array()).matrix()));
    return loss;
}

/// Loss of sigmoid(y) against the true label (real) or a decoy (fake).
inline Tensor loss_discriminator(const Tensor& y, SampleKind kind, std::optional<int> label, Rng& rng,
                                 LabelLoss loss = LabelLoss::sigmoid_ce) {
    require(label.has_value(), "discriminator loss needs the node label");
    require(y.rows() == 1, "discriminator loss expects a single row");
    const int classes = static_cast<int>(y.cols());
    const int t = kind == SampleKind::real ? *label : sample_decoy(*label, classes, rng);
    return label_loss(y, t, loss);
}

struct NoiseSource {
    StaggeredNoiseSpec spec;
    Index width = 32;
};

/// One optimizer step on D_enc and D_dec from a real and a generated sample of
/// node v. The generated row is supplied as a constant.
inline double discriminator_step(const AnGcnState& s, Discriminator& d, Index v, const RowVector& generated,
                                 int label, Optimizer& opt, Rng& decoy_rng,
                                 LabelLoss kind = LabelLoss::sigmoid_ce, double fake_weight = 1.0) {
    Tensor loss = add(loss_discriminator(real_logits(s, d, v), SampleKind::real, label, decoy_rng, kind),
                      scale(loss_discriminator(fake_logits(s, d, Tensor::constant(Matrix(generated))),
                                               SampleKind::fake, label, decoy_rng, kind),
                            fake_weight));
    opt.zero_grad();
    backward(loss);
    opt.step();
    return loss.item();
}

/// Generator loss for one noise draw: D (frozen) should assign the true label.
inline Tensor generator_loss(const AnGcnState& s, const Generator& g, const Discriminator& frozen_d,
                             const RowVector& z, int label, LabelLoss kind = LabelLoss::sigmoid_ce) {
    Tensor row = generate_rows(g, Tensor::constant(Matrix(z)));
    return label_loss(fake_logits(s, frozen_d, row), label, kind);
}

/// `inner` optimizer steps on the generator, drawing fresh noise for node v
/// each step. Returns the last loss.
inline double generator_step(const AnGcnState& s, Generator& g, const Discriminator& d, Index v, int label,
                             const NoiseSource& noise, Optimizer& opt, int inner, Rng& noise_rng,
                             LabelLoss kind = LabelLoss::sigmoid_ce) {
    const Discriminator fd = detached(d);
    double last = 0.0;
    for (int k = 0; k < inner; ++k) {
        const RowVector z = sample_noise(noise.spec, static_cast<std::size_t>(v) + 1, noise.width, noise_rng);
        Tensor loss = generator_loss(s, g, fd, z, label, kind);
        opt.zero_grad();
        backward(loss);
        opt.step();
        last = loss.item();
    }
    return last;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

inline Matrix noise_matrix(const NoiseSource& noise, const std::vector<std::size_t>& nodes, Rng& rng) {
    Matrix z(static_cast<Index>(nodes.size()), noise.width);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        z.row(static_cast<Index>(i)) = sample_noise(noise.spec, nodes[i] + 1, noise.width, rng);
    return z;
}

/// Accuracy with real positions u(v) and the exact U^T f.
inline double accuracy_real(const AnGcnState& s, const Discriminator& d, const std::vector<int>& labels,
                            const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    Matrix pos(static_cast<Index>(idx.size()), s.basis->size());
    for (std::size_t i = 0; i < idx.size(); ++i) pos.row(static_cast<Index>(i)) = s.basis->row_of(static_cast<Index>(idx[i]));
    const auto pred = argmax_rows(detail::spectral_logits(pos, d, s.Utf));
    std::size_t hit = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) hit += pred[i] == labels[idx[i]];
    return static_cast<double>(hit) / static_cast<double>(idx.size());
}

/// Accuracy with generated positions u^G(v) against the approximation U^D.
inline double accuracy_generated(const AnGcnState& s, const Generator& g, const Discriminator& d,
                                 const NoiseSource& noise, const std::vector<int>& labels,
                                 const std::vector<std::size_t>& idx, Rng& rng) {
    if (idx.empty()) return 0.0;
    const Matrix rows = generate_rows(detached(g), Tensor::constant(noise_matrix(noise, idx, rng))).value();
    const auto pred = argmax_rows(detail::spectral_logits(rows, d, s.P));
    std::size_t hit = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) hit += pred[i] == labels[idx[i]];
    return static_cast<double>(hit) / static_cast<double>(idx.size());
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

enum class NodePool { all, train };

inline NodePool parse_node_pool(const std::string& s) {
    if (s == "all") return NodePool::all;
    if (s == "train") return NodePool::train;
    throw std::invalid_argument("unknown node pool '" + s + "'");
}

inline std::string to_string(NodePool p) { return p == NodePool::all ? "all" : "train"; }

struct AnGcnConfig {
    int epochs = 1500;
    Index noise_width = 32;
    Index hidden = 64;
    double q = 0.1;
    double lr_d = 0.01;
    double lr_g = 0.001;
    int inner_epochs = 5;
    double sigma = 1.0;
    double eps = default_staggered_eps();
    LaplacianKind laplacian = LaplacianKind::symmetric_normalized;
    Activation activation = Activation::relu;
    int filter_power = 1;
    NodePool sample_from = NodePool::all;
    LabelLoss label_loss = LabelLoss::sigmoid_bce;
    double fake_weight = 1.0;
    int eval_every = 10;
    std::uint64_t seed = 0;
};

struct AnGcnEpoch {
    int epoch = 0;
    std::size_t node = 0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    std::optional<double> acc_d;
    std::optional<double> acc_g;
};

inline json to_json(const AnGcnEpoch& e) {
    return {{"epoch", e.epoch},
            {"node", e.node},
            {"loss_D", e.loss_d},
            {"loss_G", e.loss_g},
            {"acc_D", e.acc_d ? json(*e.acc_d) : json(nullptr)},
            {"acc_G", e.acc_g ? json(*e.acc_g) : json(nullptr)}};
}

/// Parameters needed for anonymous inference. No edge-derived data.
struct AnGcnModel {
    Generator generator;
    Discriminator discriminator;
    StaggeredNoiseSpec noise;
    Index noise_width = 32;
};

struct AnGcnResult {
    AnGcnModel final_model;
    AnGcnModel best_model;
    AnGcnState state;
    std::vector<AnGcnEpoch> trace;
    int best_epoch = 0;
    double best_acc_g = 0.0;
};

inline AnGcnModel snapshot(const Generator& g, const Discriminator& d, const NoiseSource& n) {
    return {detached(g), detached(d), n.spec, n.width};
}

inline AnGcnResult train_angcn(const Graph& g, const AnGcnConfig& cfg, SpectralBasisPtr basis = nullptr) {
    require(g.has_labels(), "AN-GCN training needs a labeled graph");
    require(cfg.epochs >= 0 && cfg.inner_epochs >= 0 && cfg.eval_every >= 1, "invalid AN-GCN epoch settings");
    const int classes = g.num_classes();
    require(classes >= 2, "AN-GCN training needs at least two classes");
    if (!basis) basis = std::make_shared<const SpectralBasis>(graph_basis(g, cfg.laplacian));
    require(basis->size() == static_cast<Index>(g.n_nodes()), "basis does not match the graph");

    const std::size_t n = g.n_nodes();
    const std::vector<int>& labels = *g.labels();
    NoiseSource noise{staggered_spec(n, cfg.sigma, cfg.eps), cfg.noise_width};
    const double input_scale = 1.0 / (static_cast<double>(n) * noise.spec.r);

    Generator gen = make_generator(cfg.noise_width, cfg.hidden, static_cast<Index>(n), input_scale, cfg.seed);
    Discriminator disc = make_discriminator(*basis, g.n_features(), classes, cfg.seed, cfg.filter_power, cfg.activation);
    AnGcnResult res;
    res.state = make_state(basis, g.features(), cfg.q);
    AnGcnState& st = res.state;

    Optimizer opt_d(disc.params(), OptimizerKind::adam, cfg.lr_d);
    Optimizer opt_g(gen.params(), OptimizerKind::adam, cfg.lr_g);
    Rng node_rng = make_rng(cfg.seed, "angcn-node");
    Rng noise_rng = make_rng(cfg.seed, "noise");
    Rng decoy_rng = make_rng(cfg.seed, "decoy");

    std::vector<std::size_t> pool;
    if (cfg.sample_from == NodePool::train) {
        pool = g.masks().train;
        require(!pool.empty(), "sampling from the train mask needs training nodes");
    } else {
        pool.resize(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::vector<std::size_t>& eval_idx = g.masks().test.empty() ? pool : g.masks().test;

    auto evaluate = [&](AnGcnEpoch& rec) {
        Rng eval_rng = make_rng(cfg.seed, "eval-noise");
        rec.acc_d = accuracy_real(st, disc, labels, eval_idx);
        rec.acc_g = accuracy_generated(st, gen, disc, noise, labels, eval_idx, eval_rng);
    };

    res.final_model = res.best_model = snapshot(gen, disc, noise);
    res.best_acc_g = -1.0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        AnGcnEpoch rec;
        rec.epoch = epoch;
        const std::size_t v = pool[pick(node_rng)];
        rec.node = v;
        const auto vi = static_cast<Index>(v);

        const RowVector z = sample_noise(noise.spec, v + 1, noise.width, noise_rng);
        const RowVector generated = generate_row(gen, z);
        update_UD(st, vi, generated);
        rec.loss_d = discriminator_step(st, disc, vi, generated, labels[v], opt_d, decoy_rng, cfg.label_loss, cfg.fake_weight);
        rec.loss_g = generator_step(st, gen, disc, vi, labels[v], noise, opt_g, cfg.inner_epochs, noise_rng, cfg.label_loss);
        st.epoch = epoch;

        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            evaluate(rec);
            if (*rec.acc_g > res.best_acc_g) {
                res.best_acc_g = *rec.acc_g;
                res.best_epoch = epoch;
                res.best_model = snapshot(gen, disc, noise);
            }
        }
        res.trace.push_back(rec);
    }
    if (res.best_acc_g < 0) res.best_acc_g = 0.0;
    res.final_model = snapshot(gen, disc, noise);
    return res;
}

// ---------------------------------------------------------------------------
// Anonymous inference
// ---------------------------------------------------------------------------

/// Labels for `indices` using only features and generator output: positions on
/// both sides of the filter are generated rows [G(Z_1); ...; G(Z_N)].
inline std::vector<int> infer_anonymous(const AnGcnModel& m, const Matrix& f, const std::vector<std::size_t>& indices,
                                        std::uint64_t seed) {
    const std::size_t n = m.noise.n;
    require(static_cast<std::size_t>(f.rows()) == n, "feature rows do not match the trained node count");
    require(m.discriminator.dec.rows() == f.cols(), "feature width does not match the trained decoder");
    for (std::size_t i : indices) require(i < n, "index " + std::to_string(i) + " out of range");
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    Rng rng = make_rng(seed, "infer-noise");
    const NoiseSource noise{m.noise, m.noise_width};
    const Matrix ug = generate_rows(m.generator, Tensor::constant(noise_matrix(noise, all, rng))).value();
    const Matrix rhs = ug.transpose() * f;
    Matrix rows(static_cast<Index>(indices.size()), ug.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) rows.row(static_cast<Index>(i)) = ug.row(static_cast<Index>(indices[i]));
    return argmax_rows(detail::spectral_logits(rows, m.discriminator, rhs));
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline Checkpoint to_checkpoint(const AnGcnModel& m, double q, std::uint64_t seed) {
    Checkpoint ck;
    ck.params["g_w1"] = m.generator.w1.value();
    ck.params["g_b1"] = m.generator.b1.value();
    ck.params["g_w2"] = m.generator.w2.value();
    ck.params["g_b2"] = m.generator.b2.value();
    ck.params["d_enc"] = m.discriminator.enc.value();
    ck.params["d_dec"] = m.discriminator.dec.value();
    ck.meta = {{"model", "angcn"},
               {"N", m.noise.n},
               {"sigma", m.noise.sigma},
               {"eps", m.noise.eps},
               {"q", q},
               {"seed", seed},
               {"noise_width", m.noise_width},
               {"input_scale", m.generator.input_scale},
               {"activation", to_string(m.discriminator.activation)}};
    return ck;
}

inline AnGcnModel angcn_from_checkpoint(const Checkpoint& ck) {
    require(ck.meta.value("model", "") == "angcn", "checkpoint is not an AN-GCN model");
    AnGcnModel m;
    m.generator = {Tensor::constant(checkpoint_param(ck, "g_w1")), Tensor::constant(checkpoint_param(ck, "g_b1")),
                   Tensor::constant(checkpoint_param(ck, "g_w2")), Tensor::constant(checkpoint_param(ck, "g_b2")),
                   ck.meta.at("input_scale").get<double>()};
    m.discriminator = {Tensor::constant(checkpoint_param(ck, "d_enc")), Tensor::constant(checkpoint_param(ck, "d_dec")),
                       parse_activation(ck.meta.value("activation", "relu"))};
    m.noise = staggered_spec(ck.meta.at("N").get<std::size_t>(), ck.meta.at("sigma").get<double>(),
                             ck.meta.at("eps").get<double>());
    m.noise_width = ck.meta.at("noise_width").get<Index>();
    require(m.generator.output_width() == static_cast<Index>(m.noise.n) && m.discriminator.enc.rows() == m.generator.output_width(),
            "checkpoint shapes are inconsistent");
    return m;
}

} // namespace angcn

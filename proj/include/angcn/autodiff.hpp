#pragma once

// Minimal reverse-mode automatic differentiation over dense matrices.
//
// A Tensor is a shared handle to a node in a dynamically recorded graph. Ops
// record a backward closure on their output whenever any input requires a
// gradient; backward(loss) walks the recorded graph in reverse topological
// order. Leaf gradients accumulate across calls until zero_grad().

#include "angcn/error.hpp"
#include "angcn/linalg.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace angcn {

namespace detail {

struct Node {
    Matrix value;
    Matrix grad; // empty until a gradient arrives
    bool requires_grad = false;
    bool leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Matrix&)> backward_fn;

    void accumulate(const Matrix& g) {
        if (grad.size() == 0)
            grad = g;
        else
            grad += g;
    }
};

} // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }
    static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }
    static Tensor scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

    bool defined() const noexcept { return static_cast<bool>(node_); }
    Index rows() const { return node().value.rows(); }
    Index cols() const { return node().value.cols(); }
    const Matrix& value() const { return node().value; }
    bool requires_grad() const { return node().requires_grad; }
    bool is_leaf() const { return node().leaf; }

    /// Gradient accumulated so far; a zero matrix when none arrived yet.
    Matrix grad() const {
        const auto& n = node();
        return n.grad.size() == 0 ? Matrix::Zero(n.value.rows(), n.value.cols()) : n.grad;
    }
    bool has_grad() const { return node().grad.size() != 0; }

    void zero_grad() { node().grad.resize(0, 0); }

    /// In-place update of a leaf value (optimizers, projections).
    Matrix& mutable_value() {
        require(node().leaf, "only leaf tensors can be modified in place");
        return node().value;
    }
    void set_value(Matrix v) {
        require(v.rows() == rows() && v.cols() == cols(),
                "set_value shape mismatch: " + shape_str(v) + " vs " + shape_str(value()));
        mutable_value() = std::move(v);
    }

    double item() const {
        require(rows() == 1 && cols() == 1, "item() needs a 1x1 tensor, got " + shape_str(value()));
        return value()(0, 0);
    }

    /// Constant copy of the current value, cut from the graph.
    Tensor detach() const { return constant(value()); }

    // Internal: used by op implementations.
    detail::Node& node() const {
        require(node_ != nullptr, "use of an undefined tensor");
        return *node_;
    }
    const std::shared_ptr<detail::Node>& handle() const { return node_; }

    static Tensor from_node(std::shared_ptr<detail::Node> n) {
        Tensor t;
        t.node_ = std::move(n);
        return t;
    }

private:
    Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    std::shared_ptr<detail::Node> node_;
};

namespace detail {

/// Builds an op output. `fn(grad_out, parents)` must accumulate into every
/// parent that requires a gradient.
template <class Backward>
Tensor make_op(Matrix value, std::initializer_list<Tensor> inputs, Backward fn) {
    auto out = std::make_shared<Node>();
    out->value = std::move(value);
    out->leaf = false;
    for (const Tensor& in : inputs) out->requires_grad = out->requires_grad || in.requires_grad();
    if (out->requires_grad) {
        for (const Tensor& in : inputs) out->parents.push_back(in.handle());
        Node* self = out.get();
        out->backward_fn = [self, fn = std::move(fn)](const Matrix& g) {
            fn(g, std::span<const std::shared_ptr<Node>>(self->parents));
        };
    }
    return Tensor::from_node(std::move(out));
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(),
            std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                shape_str(b.value()));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.cols() == b.rows(),
            "matmul: shape mismatch " + shape_str(a.value()) + " vs " + shape_str(b.value()));
    Matrix out = a.value() * b.value();
    return detail::make_op(std::move(out), {a, b}, [](const Matrix& g, auto p) {
        if (p[0]->requires_grad) p[0]->accumulate(g * p[1]->value.transpose());
        if (p[1]->requires_grad) p[1]->accumulate(p[0]->value.transpose() * g);
    });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("add", a, b);
    return detail::make_op(a.value() + b.value(), {a, b}, [](const Matrix& g, auto p) {
        if (p[0]->requires_grad) p[0]->accumulate(g);
        if (p[1]->requires_grad) p[1]->accumulate(g);
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("sub", a, b);
    return detail::make_op(a.value() - b.value(), {a, b}, [](const Matrix& g, auto p) {
        if (p[0]->requires_grad) p[0]->accumulate(g);
        if (p[1]->requires_grad) p[1]->accumulate(-g);
    });
}

/// x + b with the 1 x c row vector b added to every row of x.
inline Tensor add_row_broadcast(const Tensor& x, const Tensor& b) {
    require(b.rows() == 1 && b.cols() == x.cols(),
            "add_row_broadcast: shape mismatch " + shape_str(x.value()) + " vs " +
                shape_str(b.value()));
    Matrix out = x.value().rowwise() + b.value().row(0);
    return detail::make_op(std::move(out), {x, b}, [](const Matrix& g, auto p) {
        if (p[0]->requires_grad) p[0]->accumulate(g);
        if (p[1]->requires_grad) p[1]->accumulate(g.colwise().sum());
    });
}

inline Tensor scale(const Tensor& a, double s) {
    return detail::make_op(a.value() * s, {a}, [s](const Matrix& g, auto p) {
        p[0]->accumulate(g * s);
    });
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("hadamard", a, b);
    return detail::make_op(a.value().cwiseProduct(b.value()), {a, b}, [](const Matrix& g, auto p) {
        if (p[0]->requires_grad) p[0]->accumulate(g.cwiseProduct(p[1]->value));
        if (p[1]->requires_grad) p[1]->accumulate(g.cwiseProduct(p[0]->value));
    });
}

inline Tensor transpose(const Tensor& a) {
    return detail::make_op(a.value().transpose(), {a}, [](const Matrix& g, auto p) {
        p[0]->accumulate(g.transpose());
    });
}

/// diag(d) * x, where d is an N x 1 or 1 x N vector and x has N rows.
inline Tensor diag_scale(const Tensor& d, const Tensor& x) {
    require((d.cols() == 1 || d.rows() == 1) && d.value().size() == x.rows(),
            "diag_scale: shape mismatch " + shape_str(d.value()) + " vs " + shape_str(x.value()));
    const Eigen::Map<const Vector> dv(d.value().data(), d.value().size());
    Matrix out = dv.asDiagonal() * x.value();
    return detail::make_op(std::move(out), {d, x}, [](const Matrix& g, auto p) {
        const Matrix& dval = p[0]->value;
        const Eigen::Map<const Vector> dv(dval.data(), dval.size());
        if (p[0]->requires_grad) {
            Vector gd = g.cwiseProduct(p[1]->value).rowwise().sum();
            Matrix gm(dval.rows(), dval.cols());
            std::copy(gd.data(), gd.data() + gd.size(), gm.data());
            p[0]->accumulate(gm);
        }
        if (p[1]->requires_grad) p[1]->accumulate(dv.asDiagonal() * g);
    });
}

/// Rows of x selected by idx (repeats allowed).
inline Tensor gather_rows(const Tensor& x, std::vector<Index> idx) {
    Matrix out(static_cast<Index>(idx.size()), x.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        require(idx[k] >= 0 && idx[k] < x.rows(), "gather_rows: row index out of range");
        out.row(static_cast<Index>(k)) = x.value().row(idx[k]);
    }
    return detail::make_op(std::move(out), {x}, [idx = std::move(idx)](const Matrix& g, auto p) {
        Matrix gx = Matrix::Zero(p[0]->value.rows(), p[0]->value.cols());
        for (std::size_t k = 0; k < idx.size(); ++k) gx.row(idx[k]) += g.row(static_cast<Index>(k));
        p[0]->accumulate(gx);
    });
}

inline Tensor sum(const Tensor& a) {
    return detail::make_op(Matrix::Constant(1, 1, a.value().sum()), {a},
                           [](const Matrix& g, auto p) {
                               p[0]->accumulate(Matrix::Constant(p[0]->value.rows(),
                                                                 p[0]->value.cols(), g(0, 0)));
                           });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

inline Tensor relu(const Tensor& a) {
    return detail::make_op(a.value().cwiseMax(0.0), {a}, [](const Matrix& g, auto p) {
        p[0]->accumulate((p[0]->value.array() > 0.0).select(g, 0.0));
    });
}

inline Tensor sigmoid(const Tensor& a) {
    Matrix s = (1.0 + (-a.value().array()).exp()).inverse().matrix();
    return detail::make_op(s, {a}, [s](const Matrix& g, auto p) {
        p[0]->accumulate(g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
    });
}

inline Tensor softmax_rows(const Tensor& a) {
    Matrix s = a.value();
    for (Index i = 0; i < s.rows(); ++i) {
        const double m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp();
        s.row(i) /= s.row(i).sum();
    }
    return detail::make_op(s, {a}, [s](const Matrix& g, auto p) {
        // d/dx_j = s_j (g_j - sum_k g_k s_k)
        Vector dot = g.cwiseProduct(s).rowwise().sum();
        Matrix gx = s.cwiseProduct((g.colwise() - dot));
        p[0]->accumulate(gx);
    });
}

/// Elementwise clamp; the gradient passes through wherever lo <= x <= hi.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
    return detail::make_op(a.value().cwiseMax(lo).cwiseMin(hi), {a}, [lo, hi](const Matrix& g, auto p) {
        const auto& x = p[0]->value.array();
        p[0]->accumulate(((x >= lo) && (x <= hi)).select(g, 0.0));
    });
}

enum class Activation { identity, relu, leaky_relu };

inline constexpr double kLeakySlope = 0.1;

inline Tensor activate(const Tensor& a, Activation act) {
    switch (act) {
    case Activation::relu: return relu(a);
    case Activation::leaky_relu: return add(scale(a, kLeakySlope), scale(relu(a), 1.0 - kLeakySlope));
    default: return a;
    }
}

inline Matrix activate(const Matrix& a, Activation act) {
    switch (act) {
    case Activation::relu: return a.cwiseMax(0.0);
    case Activation::leaky_relu: return a.cwiseMax(kLeakySlope * a);
    default: return a;
    }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

inline constexpr double kProbabilityFloor = 1e-12;

/// -sum(w * log(max(p, 1e-12))) for arbitrary non-negative weights w.
inline Tensor weighted_nll(const Tensor& probabilities, const Matrix& weights) {
    require(weights.rows() == probabilities.rows() && weights.cols() == probabilities.cols(),
            "weighted_nll: shape mismatch " + shape_str(probabilities.value()) + " vs " + shape_str(weights));
    const Matrix& pv = probabilities.value();
    double loss = 0.0;
    for (Index i = 0; i < pv.rows(); ++i)
        for (Index j = 0; j < pv.cols(); ++j)
            if (weights(i, j) != 0.0) loss -= weights(i, j) * std::log(std::max(pv(i, j), kProbabilityFloor));
    return detail::make_op(Matrix::Constant(1, 1, loss), {probabilities}, [weights](const Matrix& g, auto p) {
        const Matrix& pv = p[0]->value;
        Matrix gp = Matrix::Zero(pv.rows(), pv.cols());
        for (Index i = 0; i < pv.rows(); ++i)
            for (Index j = 0; j < pv.cols(); ++j)
                if (weights(i, j) != 0.0 && pv(i, j) > kProbabilityFloor) gp(i, j) = -g(0, 0) * weights(i, j) / pv(i, j);
        p[0]->accumulate(gp);
    });
}

/// -sum(target * log(max(p, 1e-12))) over all rows. Every target row must be
/// one-hot.
inline Tensor cross_entropy(const Tensor& probabilities, const Matrix& target) {
    require(target.rows() == probabilities.rows() && target.cols() == probabilities.cols(),
            "cross_entropy: shape mismatch " + shape_str(probabilities.value()) + " vs " +
                shape_str(target));
    for (Index i = 0; i < target.rows(); ++i) {
        int ones = 0;
        for (Index j = 0; j < target.cols(); ++j) {
            const double t = target(i, j);
            require(t == 0.0 || t == 1.0, "cross_entropy: target row is not one-hot");
            ones += t == 1.0;
        }
        require(ones == 1, "cross_entropy: target row is not one-hot");
    }
    return weighted_nll(probabilities, target);
}

inline Matrix one_hot(std::span<const int> labels, int num_classes) {
    Matrix m = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] >= 0 && labels[i] < num_classes, "one_hot: label out of range");
        m(static_cast<Index>(i), labels[i]) = 1.0;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

/// Accumulates d(loss)/d(leaf) into every leaf that requires a gradient.
/// Intermediate gradients are recomputed on each call, so calling backward
/// twice on the same graph doubles the leaf gradients exactly.
inline void backward(const Tensor& loss) {
    require(loss.rows() == 1 && loss.cols() == 1,
            "backward needs a scalar loss, got " + shape_str(loss.value()));
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{&loss.node(), 0}};
    visited.insert(&loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (detail::Node* n : order)
        if (!n->leaf) n->grad.resize(0, 0);
    loss.node().accumulate(Matrix::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (!n->leaf && n->grad.size() != 0 && n->backward_fn) n->backward_fn(n->grad);
    }
}

} // namespace angcn

#pragma once

#include "angcn/autodiff.hpp"
#include "angcn/error.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace angcn {

enum class OptimizerKind { sgd, adam };

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("unknown optimizer '" + s + "'");
}

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

/// One update of `params` given `grads`. Adam moments are created lazily on the
/// first call and must keep their shapes afterwards.
inline void optimizer_step(OptimizerState& st, std::vector<Matrix*> params,
                           const std::vector<Matrix>& grads) {
    require(params.size() == grads.size(), "optimizer_step: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        require(params[i]->rows() == grads[i].rows() && params[i]->cols() == grads[i].cols(),
                "optimizer_step: shape mismatch " + shape_str(*params[i]) + " vs " +
                    shape_str(grads[i]));

    ++st.step;
    if (st.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= st.lr * grads[i];
        return;
    }

    if (st.m.empty()) {
        for (const Matrix* p : params) {
            st.m.push_back(Matrix::Zero(p->rows(), p->cols()));
            st.v.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
    }
    require(st.m.size() == params.size(), "optimizer_step: parameter set changed between steps");
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(st.m[i].rows() == grads[i].rows() && st.m[i].cols() == grads[i].cols(),
                "optimizer_step: moment shape mismatch");
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grads[i];
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grads[i].cwiseProduct(grads[i]);
        const auto mhat = st.m[i].array() / bc1;
        const auto vhat = st.v[i].array() / bc2;
        params[i]->array() -= st.lr * mhat / (vhat.sqrt() + st.eps);
    }
}

/// Optimizer bound to a fixed list of leaf tensors.
class Optimizer {
public:
    Optimizer(std::vector<Tensor> params, OptimizerKind kind, double lr) : params_(std::move(params)) {
        state_.kind = kind;
        state_.lr = lr;
        for (const Tensor& p : params_) require(p.is_leaf(), "optimizer parameters must be leaves");
    }

    void zero_grad() {
        for (Tensor& p : params_) p.zero_grad();
    }

    void step() {
        std::vector<Matrix*> ptrs;
        std::vector<Matrix> grads;
        for (Tensor& p : params_) {
            ptrs.push_back(&p.mutable_value());
            grads.push_back(p.grad());
        }
        optimizer_step(state_, std::move(ptrs), grads);
    }

    const OptimizerState& state() const noexcept { return state_; }
    const std::vector<Tensor>& params() const noexcept { return params_; }

private:
    std::vector<Tensor> params_;
    OptimizerState state_;
};

} // namespace angcn

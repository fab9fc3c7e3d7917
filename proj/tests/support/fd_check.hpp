#pragma once

// Central-difference gradient checker for scalar-valued autodiff graphs.

#include "angcn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace testing_support {

using angcn::Matrix;
using angcn::Tensor;

struct FdReport {
    double worst_rel = 0.0;   // largest relative error among entries above the absolute floor
    double worst_abs = 0.0;
    std::size_t checked = 0;
    std::size_t failed = 0;
    std::string first_failure;

    bool ok() const { return failed == 0; }
};

/// `loss` maps the parameter tensors to a 1x1 tensor. Every parameter value is
/// perturbed by +-h per entry; analytic gradients come from one backward pass.
/// An entry passes when |a - n| <= rel * max(|a|, |n|) or |a - n| <= abs_floor.
inline FdReport fd_check(const std::function<Tensor(const std::vector<Tensor>&)>& loss,
                         const std::vector<Matrix>& values, double h = 1e-5, double rel = 1e-4,
                         double abs_floor = 1e-6) {
    std::vector<Tensor> params;
    for (const Matrix& v : values) params.push_back(Tensor::parameter(v));
    Tensor out = loss(params);
    angcn::backward(out);
    std::vector<Matrix> analytic;
    for (const Tensor& p : params) analytic.push_back(p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols()));

    auto eval = [&](std::size_t which, angcn::Index r, angcn::Index c, double delta) {
        std::vector<Tensor> ps;
        for (std::size_t k = 0; k < values.size(); ++k) {
            Matrix v = values[k];
            if (k == which) v(r, c) += delta;
            ps.push_back(Tensor::constant(v));
        }
        return loss(ps).item();
    };

    FdReport rep;
    for (std::size_t k = 0; k < values.size(); ++k) {
        for (angcn::Index r = 0; r < values[k].rows(); ++r) {
            for (angcn::Index c = 0; c < values[k].cols(); ++c) {
                const double num = (eval(k, r, c, h) - eval(k, r, c, -h)) / (2.0 * h);
                const double a = analytic[k](r, c);
                const double diff = std::abs(a - num);
                ++rep.checked;
                rep.worst_abs = std::max(rep.worst_abs, diff);
                if (diff > abs_floor) rep.worst_rel = std::max(rep.worst_rel, diff / std::max(std::abs(a), std::abs(num)));
                if (diff > abs_floor && diff > rel * std::max(std::abs(a), std::abs(num))) {
                    if (!rep.failed)
                        rep.first_failure = "param " + std::to_string(k) + " (" + std::to_string(r) + "," +
                                            std::to_string(c) + "): analytic " + std::to_string(a) + " numeric " +
                                            std::to_string(num);
                    ++rep.failed;
                }
            }
        }
    }
    return rep;
}

/// Uniform entries in [lo, hi] that stay at least `gap` away from zero, so relu
/// kinks are not straddled by the +-h probes.
template <class RngT>
Matrix random_matrix(angcn::Index rows, angcn::Index cols, RngT& rng, double lo = -1.0, double hi = 1.0,
                     double gap = 1e-3) {
    std::uniform_real_distribution<double> d(lo, hi);
    Matrix m(rows, cols);
    for (angcn::Index i = 0; i < m.size(); ++i) {
        double x = d(rng);
        while (std::abs(x) < gap) x = d(rng);
        m.data()[i] = x;
    }
    return m;
}

} // namespace testing_support

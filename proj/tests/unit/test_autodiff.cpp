#include "angcn/autodiff.hpp"
#include "angcn/optim.hpp"
#include "angcn/rng.hpp"

#include "fd_check.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace angcn;
using testing_support::fd_check;
using testing_support::random_matrix;

namespace {

Matrix row(std::initializer_list<double> v) {
    Matrix m(1, static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) m(0, i++) = x;
    return m;
}

} // namespace

TEST(Ops, Relu) {
    EXPECT_EQ(relu(Tensor::constant(row({-1, 0, 2}))).value(), row({0, 0, 2}));
}

TEST(Ops, HadamardWithAllOnesIsIdentity) {
    Rng rng = make_rng(1, "t");
    const Matrix h = random_matrix(4, 4, rng);
    EXPECT_EQ(hadamard(Tensor::constant(Matrix::Ones(4, 4)), Tensor::constant(h)).value(), h);
}

TEST(Ops, SoftmaxUniform) {
    const Matrix s = softmax_rows(Tensor::constant(row({0, 0}))).value();
    EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(Ops, SoftmaxRowsSumToOneAndSigmoidInRange) {
    Rng rng = make_rng(2, "t");
    const Matrix x = random_matrix(5, 7, rng, -30, 30);
    const Matrix s = softmax_rows(Tensor::constant(x)).value();
    for (Index i = 0; i < s.rows(); ++i) EXPECT_NEAR(s.row(i).sum(), 1.0, 1e-12);
    const Matrix g = sigmoid(Tensor::constant(random_matrix(5, 7, rng, -10, 10))).value();
    EXPECT_GT(g.minCoeff(), 0.0);
    EXPECT_LT(g.maxCoeff(), 1.0);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
    try {
        matmul(Tensor::constant(Matrix::Zero(2, 3)), Tensor::constant(Matrix::Zero(2, 3)));
        FAIL();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    }
    EXPECT_THROW(add(Tensor::constant(Matrix::Zero(2, 2)), Tensor::constant(Matrix::Zero(3, 2))), std::invalid_argument);
    EXPECT_THROW(hadamard(Tensor::constant(Matrix::Zero(2, 2)), Tensor::constant(Matrix::Zero(2, 1))), std::invalid_argument);
}

TEST(Ops, DiagScale) {
    const Matrix d = (Matrix(2, 1) << 2, 3).finished();
    const Matrix x = (Matrix(2, 2) << 1, 1, 1, 1).finished();
    EXPECT_EQ(diag_scale(Tensor::constant(d), Tensor::constant(x)).value(), (Matrix(2, 2) << 2, 2, 3, 3).finished());
}

TEST(Loss, CrossEntropyNearZeroForCertainPrediction) {
    const Tensor l = cross_entropy(Tensor::constant(row({1, 0, 0})), row({1, 0, 0}));
    EXPECT_NEAR(l.item(), 0.0, 1e-15);
}

TEST(Loss, CrossEntropyHalf) {
    EXPECT_NEAR(cross_entropy(Tensor::constant(row({0.5, 0.5})), row({1, 0})).item(), std::log(2.0), 1e-15);
}

TEST(Loss, CrossEntropyMatchesLogSumOracle) {
    Rng rng = make_rng(3, "t");
    const Matrix z = random_matrix(1, 4, rng, -3, 3);
    const Matrix target = row({0, 0, 1, 0});
    const double got = cross_entropy(softmax_rows(Tensor::constant(z)), target).item();
    double lse = 0.0;
    for (Index i = 0; i < 4; ++i) lse += std::exp(z(0, i));
    EXPECT_NEAR(got, std::log(lse) - z(0, 2), 1e-12);
}

TEST(Loss, CrossEntropyRejectsNonOneHot) {
    EXPECT_THROW(cross_entropy(Tensor::constant(row({0.5, 0.5})), row({0.5, 0.5})), std::invalid_argument);
    EXPECT_THROW(cross_entropy(Tensor::constant(row({0.5, 0.5})), row({1, 1})), std::invalid_argument);
}

TEST(Loss, ZeroProbabilityIsClamped) {
    const double l = cross_entropy(Tensor::constant(row({0, 1})), row({1, 0})).item();
    EXPECT_NEAR(l, -std::log(kProbabilityFloor), 1e-9);
}

TEST(Backward, SumGivesOnes) {
    Tensor x = Tensor::parameter(Matrix::Constant(2, 2, 3.0));
    backward(sum(x));
    EXPECT_EQ(x.grad(), Matrix::Ones(2, 2));
}

TEST(Backward, SquareSum) {
    Tensor x = Tensor::parameter(row({1, 2}));
    backward(sum(hadamard(x, x)));
    EXPECT_EQ(x.grad(), row({2, 4}));
}

TEST(Backward, AccumulatesWithoutZeroing) {
    Tensor x = Tensor::parameter(row({1, 2}));
    backward(sum(x));
    backward(sum(x));
    EXPECT_EQ(x.grad(), row({2, 2}));
    x.zero_grad();
    backward(sum(x));
    EXPECT_EQ(x.grad(), row({1, 1}));
}

TEST(Backward, RejectsNonScalar) {
    Tensor x = Tensor::parameter(row({1, 2}));
    EXPECT_THROW(backward(x), std::invalid_argument);
}

TEST(Backward, DeterministicForward) {
    Rng r1 = make_rng(4, "t"), r2 = make_rng(4, "t");
    const Matrix a = random_matrix(3, 3, r1), b = random_matrix(3, 3, r2);
    const Matrix y1 = softmax_rows(matmul(Tensor::constant(a), Tensor::constant(a))).value();
    const Matrix y2 = softmax_rows(matmul(Tensor::constant(b), Tensor::constant(b))).value();
    EXPECT_EQ(y1, y2);
}

// Finite-difference agreement for every differentiable op, each wrapped in a
// random linear functional so that all output entries contribute.
class FdOps : public ::testing::Test {
protected:
    Rng rng = make_rng(11, "fd-ops");
    Tensor probe(const Tensor& y) {
        const Matrix w = random_matrix(y.rows(), y.cols(), probe_rng);
        return sum(hadamard(y, Tensor::constant(w)));
    }
    Rng probe_rng = make_rng(12, "fd-probe");

    void expect_fd(const std::function<Tensor(const std::vector<Tensor>&)>& f, const std::vector<Matrix>& v) {
        probe_rng = make_rng(12, "fd-probe");
        const auto wrapped = [&](const std::vector<Tensor>& p) {
            probe_rng = make_rng(12, "fd-probe");
            return probe(f(p));
        };
        const auto rep = fd_check(wrapped, v);
        EXPECT_TRUE(rep.ok()) << rep.first_failure;
        EXPECT_GT(rep.checked, 0u);
    }
};

TEST_F(FdOps, Matmul) { expect_fd([](auto& p) { return matmul(p[0], p[1]); }, {random_matrix(3, 4, rng), random_matrix(4, 2, rng)}); }
TEST_F(FdOps, Add) { expect_fd([](auto& p) { return add(p[0], p[1]); }, {random_matrix(3, 4, rng), random_matrix(3, 4, rng)}); }
TEST_F(FdOps, Sub) { expect_fd([](auto& p) { return sub(p[0], p[1]); }, {random_matrix(3, 4, rng), random_matrix(3, 4, rng)}); }
TEST_F(FdOps, AddRowBroadcast) {
    expect_fd([](auto& p) { return add_row_broadcast(p[0], p[1]); }, {random_matrix(3, 4, rng), random_matrix(1, 4, rng)});
}
TEST_F(FdOps, Scale) { expect_fd([](auto& p) { return scale(p[0], -2.5); }, {random_matrix(2, 3, rng)}); }
TEST_F(FdOps, Hadamard) { expect_fd([](auto& p) { return hadamard(p[0], p[1]); }, {random_matrix(3, 3, rng), random_matrix(3, 3, rng)}); }
TEST_F(FdOps, Transpose) { expect_fd([](auto& p) { return transpose(p[0]); }, {random_matrix(2, 5, rng)}); }
TEST_F(FdOps, DiagScale) { expect_fd([](auto& p) { return diag_scale(p[0], p[1]); }, {random_matrix(4, 1, rng), random_matrix(4, 3, rng)}); }
TEST_F(FdOps, GatherRows) { expect_fd([](auto& p) { return gather_rows(p[0], {2, 0, 2}); }, {random_matrix(4, 3, rng)}); }
TEST_F(FdOps, Sum) { expect_fd([](auto& p) { return sum(p[0]); }, {random_matrix(3, 3, rng)}); }
TEST_F(FdOps, Relu) { expect_fd([](auto& p) { return relu(p[0]); }, {random_matrix(4, 4, rng)}); }
TEST_F(FdOps, LeakyRelu) { expect_fd([](auto& p) { return activate(p[0], Activation::leaky_relu); }, {random_matrix(4, 4, rng)}); }
TEST_F(FdOps, Sigmoid) { expect_fd([](auto& p) { return sigmoid(p[0]); }, {random_matrix(3, 4, rng, -4, 4)}); }
TEST_F(FdOps, SoftmaxRows) { expect_fd([](auto& p) { return softmax_rows(p[0]); }, {random_matrix(3, 5, rng, -3, 3)}); }
TEST_F(FdOps, Clamp) {
    // entries well inside and well outside [0, 1]
    Matrix x = random_matrix(3, 4, rng, -1, 2);
    for (Index i = 0; i < x.size(); ++i)
        if (std::abs(x.data()[i]) < 0.05 || std::abs(x.data()[i] - 1) < 0.05) x.data()[i] = 0.5;
    expect_fd([](auto& p) { return clamp(p[0], 0.0, 1.0); }, {x});
}
TEST_F(FdOps, CrossEntropyThroughSoftmax) {
    const Matrix t = one_hot(std::vector<int>{1, 0, 2}, 3);
    const auto rep = fd_check([&](const std::vector<Tensor>& p) { return cross_entropy(softmax_rows(p[0]), t); },
                              {random_matrix(3, 3, rng, -2, 2)});
    EXPECT_TRUE(rep.ok()) << rep.first_failure;
}
TEST_F(FdOps, WeightedNll) {
    const Matrix w = random_matrix(2, 3, rng, 0.1, 1.0);
    const auto rep = fd_check([&](const std::vector<Tensor>& p) { return weighted_nll(sigmoid(p[0]), w); },
                              {random_matrix(2, 3, rng, -2, 2)});
    EXPECT_TRUE(rep.ok()) << rep.first_failure;
}
TEST_F(FdOps, Composite) {
    const Matrix t = one_hot(std::vector<int>{0, 1, 1, 0}, 2);
    const auto rep = fd_check(
        [&](const std::vector<Tensor>& p) {
            Tensor h = relu(add_row_broadcast(matmul(p[0], p[1]), p[2]));
            Tensor y = softmax_rows(matmul(diag_scale(p[3], h), p[4]));
            return add(cross_entropy(y, t), scale(sum(hadamard(p[1], p[1])), 0.01));
        },
        {random_matrix(4, 3, rng), random_matrix(3, 5, rng), random_matrix(1, 5, rng), random_matrix(4, 1, rng),
         random_matrix(5, 2, rng)});
    EXPECT_TRUE(rep.ok()) << rep.first_failure;
}

TEST(Optimizer, SgdStep) {
    OptimizerState st;
    st.kind = OptimizerKind::sgd;
    st.lr = 0.1;
    Matrix p = Matrix::Constant(1, 1, 1.0);
    optimizer_step(st, {&p}, {Matrix::Constant(1, 1, 2.0)});
    EXPECT_NEAR(p(0, 0), 0.8, 1e-15);
}

TEST(Optimizer, AdamFirstStep) {
    OptimizerState st;
    st.lr = 0.01;
    Matrix p = Matrix::Constant(1, 1, 1.0);
    optimizer_step(st, {&p}, {Matrix::Constant(1, 1, 1.0)});
    EXPECT_NEAR(p(0, 0), 1.0 - 0.01 / (1.0 + 1e-8), 1e-15);
    EXPECT_EQ(st.step, 1u);
}

TEST(Optimizer, ZeroGradient) {
    OptimizerState sgd;
    sgd.kind = OptimizerKind::sgd;
    Matrix p = Matrix::Constant(2, 2, 0.7);
    optimizer_step(sgd, {&p}, {Matrix::Zero(2, 2)});
    EXPECT_EQ(p, Matrix::Constant(2, 2, 0.7));
    OptimizerState adam;
    optimizer_step(adam, {&p}, {Matrix::Zero(2, 2)});
    EXPECT_LE(max_abs_diff(p, Matrix::Constant(2, 2, 0.7)), 1e-12);
}

TEST(Optimizer, ShapeMismatchRejected) {
    OptimizerState st;
    Matrix p = Matrix::Zero(2, 2);
    EXPECT_THROW(optimizer_step(st, {&p}, {Matrix::Zero(2, 3)}), std::invalid_argument);
}

TEST(Optimizer, TensorWrapperMinimizesQuadratic) {
    Tensor x = Tensor::parameter(row({3, -2}));
    Optimizer opt({x}, OptimizerKind::adam, 0.1);
    for (int i = 0; i < 500; ++i) {
        opt.zero_grad();
        backward(sum(hadamard(x, x)));
        opt.step();
    }
    EXPECT_LT(x.value().cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Optimizer, ParseKind) {
    EXPECT_EQ(parse_optimizer_kind("sgd"), OptimizerKind::sgd);
    EXPECT_THROW(parse_optimizer_kind("rmsprop"), std::invalid_argument);
}

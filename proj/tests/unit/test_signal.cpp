#include "angcn/datasets.hpp"
#include "angcn/localization.hpp"
#include "angcn/signal.hpp"
#include "angcn/spectral_gcn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace angcn;

namespace {

std::vector<double> random_series(std::size_t e, Rng& rng) {
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    std::vector<double> x(e);
    for (double& v : x) v = d(rng);
    return x;
}

// Textbook O(E^2) transform, written independently of the library.
std::vector<Complex> naive_dft(const std::vector<double>& x) {
    const std::size_t e = x.size();
    std::vector<Complex> out(e);
    for (std::size_t k = 0; k < e; ++k)
        for (std::size_t t = 0; t < e; ++t)
            out[k] += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k) * double(t) / double(e));
    return out;
}

} // namespace

TEST(Dft, Constant) {
    for (std::size_t e : {1u, 2u, 7u, 16u}) {
        const Spectrum s = dft(std::vector<double>(e, 2.5));
        EXPECT_NEAR(std::abs(s.coeffs[0] - Complex(2.5 * double(e), 0)), 0.0, 1e-12);
        for (std::size_t k = 1; k < e; ++k) EXPECT_LT(std::abs(s.coeffs[k]), 1e-12);
    }
}

TEST(Dft, SmallExamples) {
    const Spectrum s = dft(std::vector<double>{1, -1});
    EXPECT_LT(std::abs(s.coeffs[0]), 1e-15);
    EXPECT_LT(std::abs(s.coeffs[1] - Complex(2, 0)), 1e-15);
    std::vector<double> imp(9, 0.0);
    imp[0] = 1.0;
    for (const Complex& c : dft(imp).coeffs) EXPECT_LT(std::abs(c - Complex(1, 0)), 1e-15);
    EXPECT_THROW(dft(std::vector<double>{}), std::invalid_argument);
}

TEST(Dft, MatchesNaiveAndIsLinear) {
    Rng rng = make_rng(1, "t");
    for (std::size_t e : {3u, 10u, 33u}) {
        const auto x = random_series(e, rng), y = random_series(e, rng);
        const Spectrum sx = dft(x), sy = dft(y);
        const auto ref = naive_dft(x);
        std::vector<double> comb(e);
        for (std::size_t t = 0; t < e; ++t) comb[t] = 2.0 * x[t] - 0.5 * y[t];
        const Spectrum sc = dft(comb);
        for (std::size_t k = 0; k < e; ++k) {
            EXPECT_LT(std::abs(sx.coeffs[k] - ref[k]), 1e-10);
            EXPECT_LT(std::abs(sc.coeffs[k] - (2.0 * sx.coeffs[k] - 0.5 * sy.coeffs[k])), 1e-10);
        }
        for (std::size_t k = 1; k < e; ++k) EXPECT_LT(std::abs(sx.coeffs[e - k] - std::conj(sx.coeffs[k])), 1e-10);
    }
}

TEST(Reconstruct, RoundTrip) {
    Rng rng = make_rng(2, "t");
    for (std::size_t e = 1; e <= 64; e += 7) {
        const auto x = random_series(e, rng);
        const Reconstruction r = reconstruct(dft(x));
        double mx = 0;
        for (double v : x) mx = std::max(mx, std::abs(v));
        for (std::size_t t = 0; t < e; ++t) {
            EXPECT_LE(std::abs(r.standard[t] - x[t]), 1e-9 * mx);
            EXPECT_LE(std::abs(r.paired[t] - x[t]), 1e-9 * mx);
        }
        EXPECT_LE(r.paired_discrepancy, 1e-9 * mx);
    }
}

TEST(Reconstruct, ZeroSpectrum) {
    Spectrum s;
    s.coeffs.assign(5, Complex(0, 0));
    const Reconstruction r = reconstruct(s);
    for (std::size_t t = 0; t < 5; ++t) {
        EXPECT_EQ(r.standard[t], 0.0);
        EXPECT_EQ(r.paired[t], 0.0);
        EXPECT_EQ(std::abs(r.literal[t]), 0.0);
    }
}

TEST(Reconstruct, EvenSignalPairedForm) {
    // x[t] = x[E - t]
    const std::vector<double> x{4, 1, -2, 3, -2, 1};
    const Reconstruction r = reconstruct(dft(x));
    for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(r.paired[t], r.standard[t], 1e-9);
}

TEST(InitialSignal, Examples) {
    const RowVector u = (RowVector(4) << 0.3, -0.1, 0.5, 0.2).finished();
    EXPECT_DOUBLE_EQ(initial_signal(0.5, u), u.sum());
    EXPECT_EQ(initial_signal(3.0, (RowVector(4) << 0.5, -0.25, 0.25, -0.5).finished()), 0.0);
    Rng rng = make_rng(3, "t");
    std::uniform_real_distribution<double> d(-1, 1);
    RowVector w(11);
    double s = 0;
    for (Index i = 0; i < 11; ++i) s += (w(i) = d(rng));
    EXPECT_NEAR(initial_signal(2.0, w), 4.0 * s, 1e-12);
}

TEST(SignalModel, Examples) {
    SignalModelParams p;
    p.theta_bar.assign(6, 1.0);
    p.c = Vector::Zero(3);
    p.lambda = (Vector(3) << 0.0, 0.3, 1.1).finished();
    p.u_row = (RowVector(3) << 0.5, -0.2, 0.7).finished();
    for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(eval_signal_model(p, t).standard_value, 0.0);

    p.c = (Vector(3) << 1.0, 2.0, -0.5).finished();
    p.lambda.setZero();
    const double constant = 1.0 * 0.5 + 2.0 * -0.2 + -0.5 * 0.7;
    for (std::size_t t = 0; t < 6; ++t) {
        const SignalEvaluation ev = eval_signal_model(p, t);
        EXPECT_NEAR(ev.trajectory[t], constant, 1e-15);
        EXPECT_NEAR(ev.standard_value, constant, 1e-12);
    }

    SignalModelParams b;
    b.theta_bar = {0.5};
    b.lambda = (Vector(3) << 0.0, 0.3, 1.1).finished();
    b.u_row = p.u_row;
    b.blocked = true;
    const SignalEvaluation ev = eval_signal_model(b, 0);
    // the amplitude-phase form carries the factor 2 of the initial signal; the
    // standard inverse returns the trajectory value theta0 * sum(u) itself
    EXPECT_NEAR(ev.value, initial_signal(0.5, b.u_row), 1e-12);
    EXPECT_NEAR(ev.standard_value, 0.5 * b.u_row.sum(), 1e-12);
    EXPECT_THROW(eval_signal_model(b, 1), std::invalid_argument);
}

TEST(Trajectories, RecorderOnTraining) {
    const Graph g = synth_graph(SynthSpec::sbm({5, 5}, 0.8, 0.1, 3));
    const auto basis = std::make_shared<const SpectralBasis>(graph_basis(g, LaplacianKind::symmetric_normalized));
    auto run = [&](int epochs, double lr) {
        SpectralModel m = make_spectral_model(basis, g.n_features(), 2, 4);
        TrajectoryRecorder rec;
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.lr = lr;
        cfg.on_epoch = rec.hook();
        train_model(m, g, cfg);
        return rec;
    };
    EXPECT_THROW(run(0, 0.01).trajectories(), std::invalid_argument);

    const auto a = run(12, 0.01).trajectories(), b = run(12, 0.01).trajectories();
    ASSERT_EQ(a.size(), 10u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].values.size(), 12u);
        EXPECT_EQ(a[i].values, b[i].values);
    }
    for (const auto& tr : run(8, 0.0).trajectories())
        for (double v : tr.values) EXPECT_EQ(v, tr.values.front());
}

TEST(PerturbU, UnitDeltaGivesZeroDeviation) {
    const Graph g = synth_graph(SynthSpec::sbm({10, 10}, 0.5, 0.1, 2));
    const SpectralBasis b = graph_basis(g, LaplacianKind::symmetric_normalized);
    const auto v = top_k_by_degree(g, 1)[0];
    const std::size_t cv = adjacency_lists(g)[v].size();
    const PerturbResult r = perturb_u_experiment(g, b, lowpass_filter(b.eigenvalues).col(0), g.features(), v, cv, {1.0, 0.5});
    EXPECT_EQ(r.acting.size(), cv + 1);
    EXPECT_EQ(r.acting.front(), v);
    for (Index i = 0; i < r.deviation.rows(); ++i) {
        EXPECT_LE(r.deviation(i, 0), 1e-12);
        EXPECT_GT(r.deviation(i, 1), 0.0);
    }
    EXPECT_THROW(perturb_u_experiment(g, b, lowpass_filter(b.eigenvalues).col(0), g.features(), v, cv + 1, {1.0}),
                 std::invalid_argument);
}

TEST(PerturbU, MatchesDirectRecomputation) {
    const Graph g = synth_graph(SynthSpec::sbm({6, 6}, 0.6, 0.2, 5));
    const SpectralBasis b = graph_basis(g, LaplacianKind::combinatorial);
    const Vector theta = lowpass_filter(b.eigenvalues, 2).col(0);
    const std::size_t v = 3;
    const PerturbResult r = perturb_u_experiment(g, b, theta, g.features(), v, 2, {0.7});
    const Matrix fe = b.vectors * theta.asDiagonal() * b.vectors.transpose() * g.features();
    for (std::size_t a = 0; a < r.acting.size(); ++a) {
        Matrix uh = b.vectors;
        uh.row(static_cast<Index>(r.acting[a])) *= 0.7;
        const Matrix fd = uh * theta.asDiagonal() * uh.transpose() * g.features();
        EXPECT_NEAR(r.deviation(static_cast<Index>(a), 0), (fd.row(3) - fe.row(3)).norm(), 1e-12);
    }
}

TEST(PerturbU, DefaultDeltas) {
    const auto d = default_deltas();
    ASSERT_EQ(d.size(), 50u);
    EXPECT_DOUBLE_EQ(d.front(), 0.99);
    EXPECT_DOUBLE_EQ(d.back(), 0.5);
}

TEST(DeleteNode, ReconnectionRule) {
    const Graph tri(3, Matrix::Identity(3, 3), {{0, 1}, {0, 2}, {1, 2}});
    const Graph d = deleted_graph(tri, 0);
    ASSERT_EQ(d.n_nodes(), 2u);
    ASSERT_EQ(d.edges().size(), 1u);
    EXPECT_EQ(d.edges()[0].weight, 2.0);

    // path 0-1-2: removing the middle joins the ends with weight 1
    const Graph path(3, Matrix::Identity(3, 3), {{0, 1}, {1, 2}});
    const Graph p = deleted_graph(path, 1);
    ASSERT_EQ(p.edges().size(), 1u);
    EXPECT_EQ(p.edges()[0].weight, 1.0);
    EXPECT_EQ(p.features().row(1), path.features().row(2));
}

TEST(DeleteNode, ChangeMetric) {
    const RowVector u = (RowVector(4) << 0.5, -0.3, 0.1, 0.8).finished();
    EXPECT_EQ(change_metric(u, u.head(3)), 0.0);
    const RowVector w = (RowVector(3) << 0.25, 0.3, -0.2).finished();
    double expect = 0;
    for (Index l = 0; l < 3; ++l) expect += std::log(u(l) * u(l)) - std::log(w(l) * w(l));
    EXPECT_NEAR(change_metric(u, w), expect, 1e-12);
    EXPECT_TRUE(std::isfinite(change_metric(u, RowVector::Zero(3))));
}

TEST(DeleteNode, OrdersOnConnectedSbm) {
    const Graph g = synth_graph(SynthSpec::sbm({20, 20}, 0.3, 0.05, 1));
    ASSERT_TRUE(is_connected(g));
    const DeleteNodeResult r = delete_node_experiment(g, top_k_by_degree(g, 1)[0], {1, 2}, LaplacianKind::symmetric_normalized);
    const auto dist = bfs_distances(adjacency_lists(g), r.tau);
    for (const auto& [o, node, c] : r.rows) {
        EXPECT_EQ(dist[node], o);
        EXPECT_TRUE(std::isfinite(c));
    }
    EXPECT_EQ(r.table().header, (std::vector<std::string>{"order", "node", "C"}));

    const Graph star(4, Matrix::Identity(4, 4), {{0, 1}, {0, 2}, {0, 3}});
    EXPECT_NO_THROW(delete_node_experiment(star, 0, {1}));
    EXPECT_THROW(delete_node_experiment(Graph(4, Matrix::Identity(4, 4), {{0, 1}, {2, 3}}), 0, {1}), std::invalid_argument);
}

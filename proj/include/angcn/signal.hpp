#pragma once

// Node feature trajectories treated as discrete signals over training epochs.

#include "angcn/error.hpp"
#include "angcn/linalg.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace angcn {

using Complex = std::complex<double>;

struct NodeTrajectory {
    Index node = 0;
    std::vector<double> values; // one scalar per epoch

    std::size_t epochs() const noexcept { return values.size(); }
};

struct Spectrum {
    std::vector<Complex> coeffs;

    std::size_t size() const noexcept { return coeffs.size(); }
    double amplitude(std::size_t nu) const { return std::abs(coeffs.at(nu)); }
    double phase(std::size_t nu) const { return std::arg(coeffs.at(nu)); }
};

/// f^[nu] = sum_t f[t] exp(-2 pi j nu t / E).
inline Spectrum dft(const std::vector<double>& x) {
    require(!x.empty(), "dft needs at least one sample");
    const std::size_t e = x.size();
    Spectrum s;
    s.coeffs.resize(e);
    for (std::size_t nu = 0; nu < e; ++nu) {
        Complex acc = 0.0;
        for (std::size_t t = 0; t < e; ++t) {
            // reduce nu*t mod E first so the angle stays small
            const double ang = -2.0 * std::numbers::pi * static_cast<double>((nu * t) % e) / static_cast<double>(e);
            acc += x[t] * Complex(std::cos(ang), std::sin(ang));
        }
        s.coeffs[nu] = acc;
    }
    return s;
}

inline Spectrum dft(const NodeTrajectory& traj) { return dft(traj.values); }

struct Reconstruction {
    std::vector<double> standard;       // (1/E) sum f^[nu] e^{j 2 pi nu t / E}, real part
    std::vector<double> paired;         // amplitude-phase form over nu and E - nu
    std::vector<Complex> literal;       // amplitude-phase form with the extra e^{j 2 pi t nu / E}
    double paired_discrepancy = 0.0;    // max |paired - standard|
    double literal_discrepancy = 0.0;   // max |literal - standard|
};

namespace detail {

inline Complex unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

inline double angle_of(std::size_t nu, std::size_t t, std::size_t e) {
    return 2.0 * std::numbers::pi * static_cast<double>((nu * t) % e) / static_cast<double>(e);
}

} // namespace detail

inline Reconstruction reconstruct(const Spectrum& s) {
    require(s.size() > 0, "reconstruct needs a non-empty spectrum");
    const std::size_t e = s.size();
    const double ed = static_cast<double>(e);
    Reconstruction r;
    r.standard.resize(e);
    r.paired.resize(e);
    r.literal.resize(e);
    for (std::size_t t = 0; t < e; ++t) {
        Complex acc = 0.0;
        for (std::size_t nu = 0; nu < e; ++nu) acc += s.coeffs[nu] * detail::unit(detail::angle_of(nu, t, e));
        r.standard[t] = acc.real() / ed;

        // nu = 0 (and E/2 for even E) stand alone with weight 1/E; every other
        // nu < E/2 absorbs its mirror E - nu with weight 2/E.
        double paired = 0.0;
        for (std::size_t nu = 0; 2 * nu <= e; ++nu) {
            const bool alone = nu == 0 || 2 * nu == e;
            const double w = (alone ? 1.0 : 2.0) / ed;
            paired += w * s.amplitude(nu) * std::cos(detail::angle_of(nu, t, e) + s.phase(nu));
        }
        r.paired[t] = paired;

        Complex lit = 0.0;
        for (std::size_t nu = 0; nu < e; ++nu) {
            const double ang = detail::angle_of(nu, t, e);
            lit += (2.0 / ed) * s.amplitude(nu) * std::cos(ang + s.phase(nu)) * detail::unit(ang);
        }
        r.literal[t] = lit;

        r.paired_discrepancy = std::max(r.paired_discrepancy, std::abs(paired - r.standard[t]));
        r.literal_discrepancy = std::max(r.literal_discrepancy, std::abs(lit - Complex(r.standard[t], 0.0)));
    }
    return r;
}

/// f_alpha[0] = 2 * theta0 * sum_l u_l(alpha).
inline double initial_signal(double theta0, const RowVector& u_row) { return 2.0 * theta0 * u_row.sum(); }

struct SignalModelParams {
    std::vector<double> theta_bar; // length E
    Vector c;                      // per-eigenvector coefficients c_i
    Vector lambda;                 // eigenvalues
    RowVector u_row;               // u(alpha)
    bool blocked = false;          // c_i = e^{-lambda_i t}: no transmission over time
};

struct SignalEvaluation {
    std::vector<double> trajectory; // analytic f_alpha[0..E-1]
    Spectrum spectrum;
    Reconstruction reconstruction;
    double value = 0.0;          // real part of the literal amplitude-phase form at t
    double standard_value = 0.0; // standard inverse at t
};

/// Builds f[t] = theta_t * sum_i c_i e^{lambda_i t} u_i(alpha), transforms it,
/// and evaluates the reconstructions at epoch t.
inline SignalEvaluation eval_signal_model(const SignalModelParams& p, std::size_t t) {
    const std::size_t e = p.theta_bar.size();
    require(e >= 1, "signal model needs at least one epoch");
    require(t < e, "epoch index out of range");
    require(p.lambda.size() == p.u_row.size() && (p.blocked || p.c.size() == p.u_row.size()),
            "signal model parameter lengths are inconsistent");
    SignalEvaluation out;
    out.trajectory.resize(e);
    for (std::size_t s = 0; s < e; ++s) {
        const double ts = static_cast<double>(s);
        double acc = 0.0;
        for (Index i = 0; i < p.u_row.size(); ++i) {
            const double ci = p.blocked ? std::exp(-p.lambda(i) * ts) : p.c(i);
            acc += ci * std::exp(p.lambda(i) * ts) * p.u_row(i);
        }
        out.trajectory[s] = p.theta_bar[s] * acc;
    }
    out.spectrum = dft(out.trajectory);
    out.reconstruction = reconstruct(out.spectrum);
    out.value = out.reconstruction.literal[t].real();
    out.standard_value = out.reconstruction.standard[t];
    return out;
}

/// Collects one scalar per node per epoch from a training hook.
class TrajectoryRecorder {
public:
    using Projection = std::function<RowVector(const Matrix&)>; // embedding -> one value per node

    TrajectoryRecorder() : projection_([](const Matrix& emb) { return RowVector(emb.col(0).transpose()); }) {}
    explicit TrajectoryRecorder(Projection p) : projection_(std::move(p)) {}

    std::function<void(int, const Matrix&)> hook() {
        return [this](int, const Matrix& emb) {
            const RowVector v = projection_(emb);
            if (series_.empty()) series_.resize(static_cast<std::size_t>(v.size()));
            require(static_cast<std::size_t>(v.size()) == series_.size(), "projection width changed between epochs");
            for (Index i = 0; i < v.size(); ++i) series_[static_cast<std::size_t>(i)].push_back(v(i));
        };
    }

    std::vector<NodeTrajectory> trajectories() const {
        require(!series_.empty() && !series_.front().empty(), "no epochs recorded (E must be at least 1)");
        std::vector<NodeTrajectory> out;
        for (std::size_t i = 0; i < series_.size(); ++i) out.push_back({static_cast<Index>(i), series_[i]});
        return out;
    }

private:
    Projection projection_;
    std::vector<std::vector<double>> series_;
};

} // namespace angcn

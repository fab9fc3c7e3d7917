#pragma once

#include "angcn/error.hpp"
#include "angcn/linalg.hpp"
#include "angcn/rng.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace angcn {

/// N Gaussians with common sigma whose eps-level points abut: node n (1-based)
/// has mean (2n - N - 1) r, where pdf(mu +- r) = eps.
struct StaggeredNoiseSpec {
    std::size_t n = 0;
    double sigma = 1.0;
    double eps = 0.0;
    double r = 0.0;
    std::vector<double> means; // means[n - 1] = mu_n

    double mean(std::size_t node) const {
        require(node >= 1 && node <= n, "node " + std::to_string(node) + " outside [1, " + std::to_string(n) + "]");
        return means[node - 1];
    }
};

inline double gaussian_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

/// Default eps for sigma = 1: the pdf one standard deviation from the mean,
/// which makes r = 1.
inline double default_staggered_eps() { return std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi); }

inline StaggeredNoiseSpec staggered_spec(std::size_t n, double sigma = 1.0, double eps = default_staggered_eps()) {
    require(n >= 1, "staggered noise needs at least one node");
    require(sigma > 0 && std::isfinite(sigma), "sigma must be positive");
    const double peak = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma);
    require(eps > 0 && eps < peak, "eps must lie in (0, 1/(sqrt(2 pi) sigma)) = (0, " + std::to_string(peak) + ")");
    StaggeredNoiseSpec s;
    s.n = n;
    s.sigma = sigma;
    s.eps = eps;
    s.r = sigma * std::sqrt(-2.0 * std::log(std::sqrt(2.0 * std::numbers::pi) * sigma * eps));
    s.means.resize(n);
    for (std::size_t k = 1; k <= n; ++k)
        s.means[k - 1] = (2.0 * static_cast<double>(k) - static_cast<double>(n) - 1.0) * s.r;
    return s;
}

/// k independent draws from Norm(mu_v, sigma^2), v 1-based.
inline RowVector sample_noise(const StaggeredNoiseSpec& spec, std::size_t v, Index k, Rng& rng) {
    require(k >= 1, "noise width must be positive");
    std::normal_distribution<double> dist(spec.mean(v), spec.sigma);
    RowVector z(k);
    for (Index i = 0; i < k; ++i) z(i) = dist(rng);
    return z;
}

} // namespace angcn

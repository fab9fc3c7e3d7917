#pragma once

// Exhaustive search over every 1- and 2-edge flip that leaves the target's
// row and column untouched.

#include "angcn/spectral_gcn.hpp"

#include <utility>
#include <vector>

namespace testing_support {

struct FlipSearch {
    int min_flips = 0; // 0 when no 1- or 2-flip perturbation works
    std::vector<std::pair<angcn::Index, angcn::Index>> witness;
};

inline FlipSearch exhaustive_flip_search(const angcn::SemiGcnModel& m, const angcn::Matrix& a,
                                         const angcn::Matrix& f, std::size_t target, int desired) {
    using angcn::Index;
    const Index n = a.rows();
    const auto t = static_cast<Index>(target);
    std::vector<std::pair<Index, Index>> pairs;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (i != t && j != t) pairs.emplace_back(i, j);
    auto flip = [](angcn::Matrix& x, std::pair<Index, Index> p) {
        x(p.first, p.second) = x(p.second, p.first) = 1.0 - x(p.first, p.second);
    };
    auto hits = [&](const angcn::Matrix& x) { return angcn::predict_semi(m, x, f)[target] == desired; };

    for (const auto& p : pairs) {
        angcn::Matrix x = a;
        flip(x, p);
        if (hits(x)) return {1, {p}};
    }
    for (std::size_t i = 0; i < pairs.size(); ++i)
        for (std::size_t j = i + 1; j < pairs.size(); ++j) {
            angcn::Matrix x = a;
            flip(x, pairs[i]);
            flip(x, pairs[j]);
            if (hits(x)) return {2, {pairs[i], pairs[j]}};
        }
    return {};
}

} // namespace testing_support

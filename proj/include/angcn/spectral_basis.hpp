#pragma once

#include "angcn/error.hpp"
#include "angcn/graph.hpp"
#include "angcn/linalg.hpp"

#include <memory>

namespace angcn {

/// Eigen-pairs of a graph Laplacian. Column l of `vectors` is eigenvector u_l;
/// row a is the node's spectral position u(a).
struct SpectralBasis {
    Vector eigenvalues; // ascending
    Matrix vectors;     // N x N, orthonormal columns
    LaplacianKind kind = LaplacianKind::combinatorial;

    Index size() const noexcept { return eigenvalues.size(); }
    RowVector row_of(Index node) const {
        require(node >= 0 && node < size(), "node index out of range for spectral basis");
        return vectors.row(node);
    }
};

using SpectralBasisPtr = std::shared_ptr<const SpectralBasis>;

/// Symmetric eigendecomposition with ascending eigenvalues and a deterministic
/// sign: the first entry of each eigenvector with magnitude above 1e-12 is positive.
inline SpectralBasis eigendecompose(const Matrix& laplacian,
                                    LaplacianKind kind = LaplacianKind::combinatorial) {
    require(laplacian.rows() == laplacian.cols() && laplacian.rows() > 0,
            "eigendecompose needs a non-empty square matrix, got " + shape_str(laplacian));
    require(is_symmetric(laplacian, 1e-10), "eigendecompose input is not symmetric");

    Eigen::MatrixXd dense = laplacian; // column-major copy for the solver
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");

    SpectralBasis basis;
    basis.kind = kind;
    basis.eigenvalues = solver.eigenvalues();
    basis.vectors = solver.eigenvectors();
    for (Index c = 0; c < basis.vectors.cols(); ++c) {
        for (Index r = 0; r < basis.vectors.rows(); ++r) {
            const double x = basis.vectors(r, c);
            if (std::abs(x) > 1e-12) {
                if (x < 0) basis.vectors.col(c) *= -1.0;
                break;
            }
        }
    }
    return basis;
}

inline SpectralBasis graph_basis(const Graph& g, LaplacianKind kind) {
    return eigendecompose(build_laplacian(g, kind), kind);
}

} // namespace angcn

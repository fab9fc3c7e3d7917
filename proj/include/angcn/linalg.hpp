#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>

namespace angcn {

/// Dense row-major matrix used for every value in the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

inline std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline std::string shape_str(Index rows, Index cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.size() == 0 && b.size() == 0) return 0.0;
    return (a - b).cwiseAbs().maxCoeff();
}

inline bool is_symmetric(const Matrix& m, double tol) {
    return m.rows() == m.cols() && max_abs_diff(m, m.transpose()) <= tol;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

} // namespace angcn

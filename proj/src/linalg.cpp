#include "linmix/linalg.hpp"

#include <cmath>
#include <limits>

namespace linmix {

double min_eigenvalue(const Mat& m) {
    if (m.rows() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Mat> solver(symmetrized(m), Eigen::EigenvaluesOnly);
    return solver.eigenvalues()(0);
}

double log_det_i_plus(const Mat& sigma, double x) {
    Eigen::SelfAdjointEigenSolver<Mat> solver(symmetrized(sigma), Eigen::EigenvaluesOnly);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        acc += std::log1p(x * std::max(solver.eigenvalues()(i), 0.0));
    }
    return acc;
}

Mat psd_sqrt(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> solver(symmetrized(m));
    const Vec root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace linmix

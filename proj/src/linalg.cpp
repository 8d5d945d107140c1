#include "attdet/linalg.hpp"

#include "attdet/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace attdet {

TimeGrid TimeGrid::over(double t0, double t1, double dt) {
    if (dt <= 0.0) throw ParameterError("time grid spacing must be positive");
    if (t1 < t0) throw ParameterError("time grid end precedes start");
    const auto steps = static_cast<std::size_t>(std::llround((t1 - t0) / dt));
    return TimeGrid{t0, dt, steps + 1};
}

double min_eigenvalue(const Matrix& sym) {
    if (sym.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

double max_eigenvalue(const Matrix& sym) {
    if (sym.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().maxCoeff();
}

bool is_symmetric(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

bool is_spd(const Matrix& m, double strict_tol, double sym_tol) {
    if (m.rows() == 0 || !is_symmetric(m, sym_tol)) return false;
    return min_eigenvalue(m) > strict_tol;
}

Matrix symmetric_sqrt(const Matrix& spd) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(spd);
    Vector roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

Matrix spd_inverse(const Matrix& spd) {
    return spd.llt().solve(Matrix::Identity(spd.rows(), spd.cols()));
}

double trapezoid(const std::vector<double>& samples, double dt) {
    if (samples.size() < 2) return 0.0;
    double sum = 0.5 * (samples.front() + samples.back());
    for (std::size_t k = 1; k + 1 < samples.size(); ++k) sum += samples[k];
    return sum * dt;
}

}  // namespace attdet

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace attdet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Uniform time grid t_k = t0 + k*dt, k = 0..count-1.
struct TimeGrid {
    double t0 = 0.0;
    double dt = 0.0;
    std::size_t count = 0;

    double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
    double t_end() const { return count == 0 ? t0 : time(count - 1); }

    /// Grid covering [t0, t1] with spacing dt; the last point lands on t1
    /// (t1 - t0 must be an integer multiple of dt up to rounding).
    static TimeGrid over(double t0, double t1, double dt);

    bool operator==(const TimeGrid&) const = default;
};

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& sym);

/// Largest eigenvalue of a symmetric matrix.
double max_eigenvalue(const Matrix& sym);

/// True iff m is symmetric to `tol` and its smallest eigenvalue exceeds `strict_tol`.
bool is_spd(const Matrix& m, double strict_tol = 1e-12, double sym_tol = 1e-9);

/// True iff ||m - m'||_inf <= tol.
bool is_symmetric(const Matrix& m, double tol = 1e-9);

/// Symmetric positive semidefinite square root via eigendecomposition;
/// negative eigenvalues (roundoff) are clamped to zero.
Matrix symmetric_sqrt(const Matrix& spd);

/// Inverse of an SPD matrix via Cholesky.
Matrix spd_inverse(const Matrix& spd);

/// Trapezoidal integral of uniformly sampled values with spacing dt.
double trapezoid(const std::vector<double>& samples, double dt);

}  // namespace attdet

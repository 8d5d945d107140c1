#pragma once

#include "attdet/linalg.hpp"

#include <variant>
#include <vector>

namespace attdet {

/// One a*sin(w*t + phi) term of a sinusoid-sum entry.
struct SinusoidTerm {
    double amplitude = 0.0;
    double omega = 0.0;  // rad/s
    double phase = 0.0;  // rad
};

/// c0 + sum_k a_k*sin(w_k*t + phi_k).
struct SinusoidEntry {
    double offset = 0.0;
    std::vector<SinusoidTerm> terms;

    double eval(double t) const;
};

/// Piecewise-constant schedule: values[k] on [breaks[k-1], breaks[k]) with
/// values.size() == breaks.size() + 1; right-continuous at the breakpoints.
struct PiecewiseEntry {
    std::vector<double> breaks;  // strictly increasing
    std::vector<double> values;

    double eval(double t) const;
};

using MatrixEntry = std::variant<double, SinusoidEntry, PiecewiseEntry>;

double eval_entry(const MatrixEntry& entry, double t);

/// A matrix whose entries are constants, sinusoid sums, or piecewise-constant
/// schedules of time. Evaluation is pure: equal (matrix, t) gives bit-identical
/// results.
class TimeVaryingMatrix {
public:
    TimeVaryingMatrix() = default;
    TimeVaryingMatrix(Eigen::Index rows, Eigen::Index cols);

    static TimeVaryingMatrix constant(const Matrix& value);

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }

    MatrixEntry& entry(Eigen::Index r, Eigen::Index c) { return entries_[index(r, c)]; }
    const MatrixEntry& entry(Eigen::Index r, Eigen::Index c) const { return entries_[index(r, c)]; }

    Matrix eval(double t) const;

    /// All entries are plain constants.
    bool is_constant() const;

    /// Times in (0, horizon) where some piecewise entry switches value.
    std::vector<double> breakpoints(double horizon) const;

private:
    std::size_t index(Eigen::Index r, Eigen::Index c) const {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
               static_cast<std::size_t>(c);
    }

    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
    std::vector<MatrixEntry> entries_;
};

}  // namespace attdet

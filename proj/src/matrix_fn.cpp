#include "attdet/matrix_fn.hpp"

#include "attdet/errors.hpp"

#include <algorithm>
#include <cmath>

namespace attdet {

double SinusoidEntry::eval(double t) const {
    double value = offset;
    for (const auto& term : terms) {
        value += term.amplitude * std::sin(term.omega * t + term.phase);
    }
    return value;
}

double PiecewiseEntry::eval(double t) const {
    // values[k] on [breaks[k-1], breaks[k]); right-continuous at breakpoints.
    const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
    return values[static_cast<std::size_t>(it - breaks.begin())];
}

double eval_entry(const MatrixEntry& entry, double t) {
    return std::visit(
        [t](const auto& e) -> double {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, double>) {
                return e;
            } else {
                return e.eval(t);
            }
        },
        entry);
}

TimeVaryingMatrix::TimeVaryingMatrix(Eigen::Index rows, Eigen::Index cols)
    : rows_(rows), cols_(cols),
      entries_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0) {}

TimeVaryingMatrix TimeVaryingMatrix::constant(const Matrix& value) {
    TimeVaryingMatrix m(value.rows(), value.cols());
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
        for (Eigen::Index c = 0; c < value.cols(); ++c) {
            m.entry(r, c) = value(r, c);
        }
    }
    return m;
}

Matrix TimeVaryingMatrix::eval(double t) const {
    Matrix out(rows_, cols_);
    for (Eigen::Index r = 0; r < rows_; ++r) {
        for (Eigen::Index c = 0; c < cols_; ++c) {
            out(r, c) = eval_entry(entry(r, c), t);
        }
    }
    return out;
}

bool TimeVaryingMatrix::is_constant() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const MatrixEntry& e) { return std::holds_alternative<double>(e); });
}

std::vector<double> TimeVaryingMatrix::breakpoints(double horizon) const {
    std::vector<double> points;
    for (const auto& e : entries_) {
        if (const auto* pwc = std::get_if<PiecewiseEntry>(&e)) {
            for (double b : pwc->breaks) {
                if (b > 0.0 && b < horizon) points.push_back(b);
            }
        }
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    return points;
}

}  // namespace attdet

#pragma once

#include "attdet/linalg.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace attdet {

enum class SignalKind {
    Zero,
    DecayingSinusoid,
    WindowedNoise,
    BiasStep,
    Pulse,
};

SignalKind signal_kind_from_string(const std::string& name);
std::string to_string(SignalKind kind);

/// Deterministic scalar signal generator. All kinds except bias_step are L2 on
/// [0, inf) by construction (finite window or exponential envelope); bias_step
/// is the admissible attack shape "constant + exponentially decaying transient".
///
/// windowed_noise holds a frozen uniform [-amplitude, amplitude] value on each
/// bucket of width `bucket`, derived from (seed, bucket index) by a counter-based
/// generator, so integrator stage evaluations are reproducible.
struct SignalSpec {
    SignalKind kind = SignalKind::Zero;
    double amplitude = 0.0;
    double frequency = 0.0;  // rad/s (decaying_sinusoid)
    double phase = 0.0;      // rad (decaying_sinusoid)
    double decay = 0.0;      // 1/s envelope / transient rate
    double onset = 0.0;      // s
    double window = 0.0;     // s; 0 means unwindowed where a window is optional
    double bucket = 0.01;    // s (windowed_noise)
    std::uint64_t seed = 0;  // per-channel tag, mixed with the master seed

    /// Pure: equal (spec, master_seed, t) give bit-identical values.
    double sample(double t, std::uint64_t master_seed) const;

    /// True iff the signal is square-integrable on [0, inf).
    bool is_l2() const;

    /// Times in (0, horizon) where the sample path is discontinuous or kinked
    /// (onsets, window edges, noise bucket boundaries).
    std::vector<double> discontinuities(double horizon) const;
};

/// A vector-valued channel: one SignalSpec per component.
struct VectorSignal {
    std::vector<SignalSpec> components;

    static VectorSignal zero(Eigen::Index dim);
    /// Broadcast one spec over `dim` components, offsetting each component's seed.
    static VectorSignal broadcast(const SignalSpec& spec, Eigen::Index dim);

    Eigen::Index dim() const { return static_cast<Eigen::Index>(components.size()); }
    bool is_zero() const;
    bool is_l2() const;
    Vector sample(double t, std::uint64_t master_seed) const;
    std::vector<double> discontinuities(double horizon) const;
};

/// Trapezoidal approximation of (int_0^T ||z||^2 dt)^(1/2) for a uniformly
/// sampled series. Throws InsufficientDataError on an empty series.
double l2_norm_truncated(const std::vector<Vector>& samples, double step);
double l2_norm_truncated(const std::vector<double>& samples, double step);

}  // namespace attdet

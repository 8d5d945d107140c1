#include "attdet/signals.hpp"

#include "attdet/errors.hpp"

#include <algorithm>
#include <cmath>

namespace attdet {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Frozen uniform [-1, 1] draw for (master, channel seed, bucket index).
double bucket_uniform(std::uint64_t master, std::uint64_t channel, std::uint64_t bucket) {
    const std::uint64_t key = splitmix64(master ^ splitmix64(channel));
    const std::uint64_t h = splitmix64(key ^ (bucket + 0x632BE59BD9B4E019ull));
    return 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
}

}  // namespace

SignalKind signal_kind_from_string(const std::string& name) {
    if (name == "zero") return SignalKind::Zero;
    if (name == "decaying_sinusoid") return SignalKind::DecayingSinusoid;
    if (name == "windowed_noise") return SignalKind::WindowedNoise;
    if (name == "bias_step") return SignalKind::BiasStep;
    if (name == "pulse") return SignalKind::Pulse;
    throw ConfigError("unknown signal kind: " + name);
}

std::string to_string(SignalKind kind) {
    switch (kind) {
        case SignalKind::Zero: return "zero";
        case SignalKind::DecayingSinusoid: return "decaying_sinusoid";
        case SignalKind::WindowedNoise: return "windowed_noise";
        case SignalKind::BiasStep: return "bias_step";
        case SignalKind::Pulse: return "pulse";
    }
    throw ConfigError("unknown signal kind value");
}

double SignalSpec::sample(double t, std::uint64_t master_seed) const {
    if (t < onset) return 0.0;
    const double tau = t - onset;
    switch (kind) {
        case SignalKind::Zero:
            return 0.0;
        case SignalKind::DecayingSinusoid: {
            if (window > 0.0 && tau >= window) return 0.0;
            return amplitude * std::exp(-decay * tau) * std::sin(frequency * tau + phase);
        }
        case SignalKind::WindowedNoise: {
            if (window > 0.0 && tau >= window) return 0.0;
            const auto k = static_cast<std::uint64_t>(std::floor(tau / bucket));
            return amplitude * std::exp(-decay * tau) * bucket_uniform(master_seed, seed, k);
        }
        case SignalKind::BiasStep:
            return amplitude * (1.0 - std::exp(-decay * tau));
        case SignalKind::Pulse:
            return tau < window ? amplitude : 0.0;
    }
    return 0.0;
}

bool SignalSpec::is_l2() const {
    switch (kind) {
        case SignalKind::Zero: return true;
        case SignalKind::DecayingSinusoid:
        case SignalKind::WindowedNoise: return decay > 0.0 || window > 0.0;
        case SignalKind::BiasStep: return amplitude == 0.0;
        case SignalKind::Pulse: return window > 0.0;
    }
    return false;
}

std::vector<double> SignalSpec::discontinuities(double horizon) const {
    std::vector<double> points;
    auto push = [&](double t) {
        if (t > 0.0 && t < horizon) points.push_back(t);
    };
    switch (kind) {
        case SignalKind::Zero:
            break;
        case SignalKind::DecayingSinusoid:
        case SignalKind::BiasStep:
            push(onset);
            if (kind == SignalKind::DecayingSinusoid && window > 0.0) push(onset + window);
            break;
        case SignalKind::Pulse:
            push(onset);
            push(onset + window);
            break;
        case SignalKind::WindowedNoise: {
            push(onset);
            const double stop = window > 0.0 ? std::min(onset + window, horizon) : horizon;
            for (double t = onset + bucket; t < stop; t += bucket) push(t);
            if (window > 0.0) push(onset + window);
            break;
        }
    }
    return points;
}

VectorSignal VectorSignal::zero(Eigen::Index dim) {
    VectorSignal signal;
    signal.components.assign(static_cast<std::size_t>(dim), SignalSpec{});
    return signal;
}

VectorSignal VectorSignal::broadcast(const SignalSpec& spec, Eigen::Index dim) {
    VectorSignal signal;
    signal.components.reserve(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) {
        SignalSpec component = spec;
        component.seed = spec.seed + static_cast<std::uint64_t>(i);
        signal.components.push_back(component);
    }
    return signal;
}

bool VectorSignal::is_zero() const {
    return std::all_of(components.begin(), components.end(), [](const SignalSpec& s) {
        return s.kind == SignalKind::Zero || s.amplitude == 0.0;
    });
}

bool VectorSignal::is_l2() const {
    return std::all_of(components.begin(), components.end(),
                       [](const SignalSpec& s) { return s.is_l2(); });
}

Vector VectorSignal::sample(double t, std::uint64_t master_seed) const {
    Vector out(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) {
        out[i] = components[static_cast<std::size_t>(i)].sample(t, master_seed);
    }
    return out;
}

std::vector<double> VectorSignal::discontinuities(double horizon) const {
    std::vector<double> points;
    for (const auto& c : components) {
        auto p = c.discontinuities(horizon);
        points.insert(points.end(), p.begin(), p.end());
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    return points;
}

double l2_norm_truncated(const std::vector<double>& samples, double step) {
    if (samples.empty()) throw InsufficientDataError("l2_norm_truncated: empty series");
    std::vector<double> squares(samples.size());
    std::transform(samples.begin(), samples.end(), squares.begin(),
                   [](double v) { return v * v; });
    return std::sqrt(trapezoid(squares, step));
}

double l2_norm_truncated(const std::vector<Vector>& samples, double step) {
    if (samples.empty()) throw InsufficientDataError("l2_norm_truncated: empty series");
    std::vector<double> squares(samples.size());
    std::transform(samples.begin(), samples.end(), squares.begin(),
                   [](const Vector& v) { return v.squaredNorm(); });
    return std::sqrt(trapezoid(squares, step));
}

}  // namespace attdet

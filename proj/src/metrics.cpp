#include "attdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace attdet {

namespace {

std::size_t index_at_or_after(const TimeGrid& grid, double t) {
    if (grid.count == 0 || t <= grid.t0) return 0;
    const auto k = static_cast<std::size_t>(std::ceil((t - grid.t0) / grid.dt - 1e-12));
    return std::min(k, grid.count - 1);
}

double tail_integral(const std::vector<double>& samples, const TimeGrid& grid, double fraction) {
    const double t_start = grid.t_end() - fraction * (grid.t_end() - grid.t0);
    const std::size_t k0 = index_at_or_after(grid, t_start);
    std::vector<double> tail(samples.begin() + static_cast<std::ptrdiff_t>(k0), samples.end());
    return trapezoid(tail, grid.dt);
}

}  // namespace

TrackingReport tracking_error(const SimResult& result, int node) {
    if (result.grid.count < 20) {
        throw InsufficientDataError("tracking_error needs at least 20 samples");
    }
    const auto& traj = result.nodes[static_cast<std::size_t>(node)];
    std::vector<double> squares(result.grid.count);
    for (std::size_t k = 0; k < result.grid.count; ++k) {
        squares[k] = (traj.phi[k] - traj.f[k]).squaredNorm();
    }

    TrackingReport report;
    report.integral = trapezoid(squares, result.grid.dt);
    const double tail = tail_integral(squares, result.grid, 0.10);
    report.tail_fraction = report.integral > 0.0 ? tail / report.integral : 0.0;

    const std::size_t k0 = index_at_or_after(
        result.grid, result.grid.t_end() - 0.05 * (result.grid.t_end() - result.grid.t0));
    Vector settled = Vector::Zero(traj.phi.front().size());
    for (std::size_t k = k0; k < result.grid.count; ++k) settled += traj.phi[k];
    report.settled = settled / static_cast<double>(result.grid.count - k0);
    report.converged = report.tail_fraction < 0.01;
    return report;
}

std::vector<Vector> reconstruct_tracker_state(const ValidatedScenario& scenario,
                                              const SimResult& result, int node) {
    const auto& tracker = scenario.node(node).tracker;
    const auto& f = result.nodes[static_cast<std::size_t>(node)].f;
    // d eps/dt = (Omega + Gamma Upsilon) eps - Gamma f, eps(0) = 0; the recorded
    // attack input is interpolated linearly at the half-step stages.
    const Matrix drift = tracker.omega + tracker.gamma_in * tracker.upsilon;
    const double h = result.grid.dt;

    std::vector<Vector> eps;
    eps.reserve(result.grid.count);
    Vector state = Vector::Zero(2 * tracker.n_f);
    eps.push_back(state);
    for (std::size_t k = 0; k + 1 < result.grid.count; ++k) {
        const Vector f_mid = 0.5 * (f[k] + f[k + 1]);
        auto rhs = [&](const Vector& x, const Vector& f_t) -> Vector {
            return drift * x - tracker.gamma_in * f_t;
        };
        const Vector k1 = rhs(state, f[k]);
        const Vector k2 = rhs(state + 0.5 * h * k1, f_mid);
        const Vector k3 = rhs(state + 0.5 * h * k2, f_mid);
        const Vector k4 = rhs(state + h * k3, f[k + 1]);
        state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        eps.push_back(state);
    }
    return eps;
}

NodeErrorSignals error_signals(const ValidatedScenario& scenario, const SimResult& result,
                               int node) {
    const auto& traj = result.nodes[static_cast<std::size_t>(node)];
    NodeErrorSignals signals;
    signals.z.reserve(result.grid.count);
    signals.delta.reserve(result.grid.count);
    const std::vector<Vector> eps = reconstruct_tracker_state(scenario, result, node);
    for (std::size_t k = 0; k < result.grid.count; ++k) {
        signals.z.push_back(traj.e[k] - traj.ehat[k]);
        signals.delta.push_back(eps[k] - traj.epshat[k]);
    }
    return signals;
}

std::vector<double> stacked_error_norms(const ValidatedScenario& scenario,
                                        const SimResult& result) {
    std::vector<double> norms(result.grid.count, 0.0);
    for (int i = 0; i < scenario.node_count(); ++i) {
        const NodeErrorSignals signals = error_signals(scenario, result, i);
        for (std::size_t k = 0; k < result.grid.count; ++k) {
            norms[k] += signals.z[k].squaredNorm() + signals.delta[k].squaredNorm();
        }
    }
    for (auto& v : norms) v = std::sqrt(v);
    return norms;
}

HinfReport hinf_ratio(const SimResult& result, const ValidatedScenario& scenario, int node,
                      double slack) {
    const auto& config = scenario.config();
    const auto& weights = scenario.node(node).weights;
    const double gamma = config.design.gamma;
    const auto idx = static_cast<std::size_t>(node);

    const NodeErrorSignals own = error_signals(scenario, result, node);
    std::vector<NodeErrorSignals> neighbor_errors;
    std::vector<Matrix> z_inv;
    for (std::size_t e : scenario.in_edges(node)) {
        neighbor_errors.push_back(error_signals(scenario, result, scenario.edge(e).source));
        z_inv.push_back(spd_inverse(scenario.edge(e).z));
    }

    std::vector<double> lhs_integrand(result.grid.count);
    std::vector<double> rhs_integrand(result.grid.count);
    for (std::size_t k = 0; k < result.grid.count; ++k) {
        const double t = result.grid.time(k);
        lhs_integrand[k] = own.z[k].dot(weights.r * own.z[k]) +
                           own.delta[k].dot(weights.r_check * own.delta[k]);

        double rhs = config.w.sample(t, result.seed).squaredNorm() +
                     config.v_nodes[idx].sample(t, result.seed).squaredNorm();
        std::size_t local = 0;
        for (std::size_t e : scenario.in_edges(node)) {
            rhs += config.v_edges[e].sample(t, result.seed).squaredNorm();
            const Vector eta = scenario.edge(e).w * neighbor_errors[local].z[k];
            rhs += eta.dot(z_inv[local] * eta);
            ++local;
        }
        rhs_integrand[k] = rhs;
    }

    const Vector init = config.plant.x0 - scenario.node(node).xi;
    HinfReport report;
    report.lhs = trapezoid(lhs_integrand, result.grid.dt);
    report.rhs = gamma * gamma *
                 (init.dot(weights.x * init) + trapezoid(rhs_integrand, result.grid.dt));
    if (report.rhs == 0.0) {
        report.ratio = 0.0;
        report.satisfied = report.lhs == 0.0;
    } else {
        report.ratio = report.lhs / report.rhs;
        report.satisfied = report.ratio <= 1.0 + slack;
    }
    return report;
}

DecayFit decay_fit(const std::vector<double>& norms, const TimeGrid& grid) {
    if (norms.size() != grid.count || norms.empty()) {
        throw InsufficientDataError("decay_fit needs one sample per grid point");
    }
    // Fit over the post-transient half; stop at the first exact zero.
    std::size_t start = norms.size() / 2;
    std::size_t stop = norms.size();
    for (std::size_t k = start; k < stop; ++k) {
        if (norms[k] == 0.0) {
            stop = k;
            break;
        }
    }
    DecayFit fit;
    if (stop - start < 2) {
        fit.c = stop > start ? norms[start] : 0.0;
        return fit;
    }
    double mean_t = 0.0;
    double mean_y = 0.0;
    const auto count = static_cast<double>(stop - start);
    for (std::size_t k = start; k < stop; ++k) {
        mean_t += grid.time(k);
        mean_y += std::log(std::max(norms[k], 1e-300));
    }
    mean_t /= count;
    mean_y /= count;
    double cov = 0.0;
    double var = 0.0;
    for (std::size_t k = start; k < stop; ++k) {
        const double dt = grid.time(k) - mean_t;
        cov += dt * (std::log(std::max(norms[k], 1e-300)) - mean_y);
        var += dt * dt;
    }
    const double slope = var > 0.0 ? cov / var : 0.0;
    fit.lambda_rate = -slope;
    fit.c = std::exp(mean_y + fit.lambda_rate * mean_t);
    return fit;
}

std::vector<DetectionEvent> detect(const std::vector<Vector>& phi, const TimeGrid& grid,
                                   double threshold, double dwell) {
    if (!(threshold > 0.0)) throw ParameterError("detection threshold must be positive");
    if (!(dwell > 0.0)) throw ParameterError("detection dwell time must be positive");

    std::vector<DetectionEvent> events;
    bool in_run = false;
    DetectionEvent current;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        const double t = grid.time(k);
        const double norm = phi[k].norm();
        if (norm > threshold) {
            if (!in_run) {
                in_run = true;
                current = DetectionEvent{};
                current.onset = t;
                current.peak = norm;
            }
            current.peak = std::max(current.peak, norm);
        } else if (in_run) {
            if (t - current.onset >= dwell) {
                current.confirmed_at = current.onset + dwell;
                current.end = t;
                events.push_back(current);
            }
            in_run = false;
        }
    }
    if (in_run && grid.t_end() - current.onset >= dwell) {
        current.confirmed_at = current.onset + dwell;
        current.end = grid.t_end();
        events.push_back(current);
    }
    return events;
}

double calibration_threshold(const std::vector<Vector>& phi_calibration) {
    if (phi_calibration.empty()) {
        throw InsufficientDataError("calibration needs a nonempty series");
    }
    std::vector<double> norms(phi_calibration.size());
    std::transform(phi_calibration.begin(), phi_calibration.end(), norms.begin(),
                   [](const Vector& v) { return v.norm(); });
    std::sort(norms.begin(), norms.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(norms.size())));
    return 3.0 * norms[std::min(rank == 0 ? 0 : rank - 1, norms.size() - 1)];
}

ResidualReport equation_residual(const ValidatedScenario& scenario, const SimResult& result,
                                 const GainSet& gains, int node) {
    const auto& config = scenario.config();
    const auto idx = static_cast<std::size_t>(node);
    const auto& tracker = scenario.node(node).tracker;
    const double h = result.grid.dt;

    const NodeErrorSignals own = error_signals(scenario, result, node);
    std::vector<NodeErrorSignals> neighbors;
    for (std::size_t e : scenario.in_edges(node)) {
        neighbors.push_back(error_signals(scenario, result, scenario.edge(e).source));
    }
    const std::vector<Vector> eps = reconstruct_tracker_state(scenario, result, node);

    // Grid times adjacent to a signal discontinuity; the centered difference is
    // not a consistent derivative estimator across them.
    std::vector<double> kinks = config.w.discontinuities(result.grid.t_end());
    for (const auto& v : config.v_nodes) {
        auto d = v.discontinuities(result.grid.t_end());
        kinks.insert(kinks.end(), d.begin(), d.end());
    }
    for (const auto& v : config.v_edges) {
        auto d = v.discontinuities(result.grid.t_end());
        kinks.insert(kinks.end(), d.begin(), d.end());
    }
    for (const auto& n : config.nodes) {
        if (n.attack) {
            auto d = n.attack->discontinuities(result.grid.t_end());
            kinks.insert(kinks.end(), d.begin(), d.end());
        }
    }
    std::sort(kinks.begin(), kinks.end());
    auto near_kink = [&](double t) {
        auto it = std::lower_bound(kinks.begin(), kinks.end(), t - 2.0 * h);
        return it != kinks.end() && *it <= t + 2.0 * h;
    };

    std::vector<double> err_all;
    std::vector<double> err_smooth;
    double scale = 0.0;
    for (std::size_t k = 1; k + 1 < result.grid.count; ++k) {
        const double t = result.grid.time(k);
        const Matrix a = config.plant.a.eval(t);
        const Matrix b = config.plant.b.eval(t);
        const Matrix c = scenario.node(node).sensor.c.eval(t);
        const Matrix d = scenario.node(node).sensor.d.eval(t);
        const DetectorGains g = split_detector_gain(
            gains.detector[idx].at(t), gains.detector[idx].partition());

        const Vector w_t = config.w.sample(t, result.seed);
        const Vector v_t = config.v_nodes[idx].sample(t, result.seed);
        const Vector nu = tracker.upsilon * eps[k] -
                          result.nodes[idx].f[k];

        Vector rhs_z = a * own.z[k] - g.l_hat * (c * own.z[k]) -
                       tracker.f_inject * (tracker.upsilon * own.delta[k]) + b * w_t -
                       g.l_hat * (d * v_t) + tracker.f_inject * nu;
        Vector rhs_d = tracker.omega * own.delta[k] - g.l_check * (c * own.z[k]) +
                       tracker.gamma_in * nu - g.l_check * (d * v_t);
        std::size_t local = 0;
        for (std::size_t e : scenario.in_edges(node)) {
            const auto& link = scenario.edge(e);
            const Vector v_e = config.v_edges[e].sample(t, result.seed);
            // +K W (z_j - z_i) but -K H v_e: the z_j coupling flips sign between
            // the observer error and the detector correction, the noise does not.
            const Vector coupling = link.w * (neighbors[local].z[k] - own.z[k]);
            const Vector noise = link.h * v_e;
            rhs_z += g.k_hat[local] * (coupling - noise);
            rhs_d += g.k_check[local] * (coupling - noise);
            ++local;
        }

        const Vector fd_z = (own.z[k + 1] - own.z[k - 1]) / (2.0 * h);
        const Vector fd_d = (own.delta[k + 1] - own.delta[k - 1]) / (2.0 * h);
        const double err = std::max((fd_z - rhs_z).norm(), (fd_d - rhs_d).norm());
        scale = std::max({scale, rhs_z.norm(), rhs_d.norm()});
        err_all.push_back(err);
        if (!near_kink(t)) err_smooth.push_back(err);
    }

    ResidualReport report;
    const double denom = std::max(scale, 1e-30);
    for (double err : err_all) report.max_rel = std::max(report.max_rel, err / denom);
    for (double err : err_smooth) {
        report.max_rel_smooth = std::max(report.max_rel_smooth, err / denom);
    }
    return report;
}

std::vector<NodeReport> node_reports(const ValidatedScenario& scenario, const SimResult& result,
                                     const std::vector<double>& detection_thresholds,
                                     double dwell) {
    if (detection_thresholds.size() != static_cast<std::size_t>(scenario.node_count())) {
        throw ParameterError("node_reports needs one detection threshold per node");
    }
    std::vector<NodeReport> reports;
    reports.reserve(static_cast<std::size_t>(scenario.node_count()));
    for (int i = 0; i < scenario.node_count(); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        NodeReport report;
        report.node = i + 1;
        report.tracking = tracking_error(result, i);
        report.hinf = hinf_ratio(result, scenario, i);
        const NodeErrorSignals signals = error_signals(scenario, result, i);
        std::vector<double> norms(result.grid.count);
        for (std::size_t k = 0; k < result.grid.count; ++k) {
            norms[k] = std::sqrt(signals.z[k].squaredNorm() + signals.delta[k].squaredNorm());
        }
        report.decay = decay_fit(norms, result.grid);
        report.detections =
            detect(result.nodes[idx].phi, result.grid, detection_thresholds[idx], dwell);
        reports.push_back(std::move(report));
    }
    return reports;
}

}  // namespace attdet

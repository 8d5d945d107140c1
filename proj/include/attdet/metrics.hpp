#pragma once

#include "attdet/runtime.hpp"

#include <vector>

namespace attdet {

/// Convergence of the detector output onto the injected attack:
/// integral = int_0^T ||phi - f||^2 dt, tail share over the last 10% of the
/// horizon, and the mean of phi over the last 5% as the settled value.
struct TrackingReport {
    double integral = 0.0;
    double tail_fraction = 0.0;
    Vector settled;
    bool converged = false;  // tail_fraction < 0.01
};

TrackingReport tracking_error(const SimResult& result, int node);

/// Local disturbance-attenuation check:
///   lhs = int (z' R z + delta' R_check delta) dt
///   rhs = gamma^2 (||x0 - xi||^2_X + int [||w||^2 + ||v_i||^2
///         + sum_j (||v_ij||^2 + ||W_ij z_j||^2_{Z^-1})] dt)
struct HinfReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    bool satisfied = false;
};

HinfReport hinf_ratio(const SimResult& result, const ValidatedScenario& scenario, int node,
                      double slack = 0.05);

/// Least-squares fit of log||series|| ~ log c - lambda_rate * t over the
/// post-transient half of the horizon (prefix before the first exact zero).
struct DecayFit {
    double c = 0.0;
    double lambda_rate = 0.0;
};

DecayFit decay_fit(const std::vector<double>& norms, const TimeGrid& grid);

/// A sustained threshold crossing: opened at `onset` (first crossing),
/// confirmed after `dwell` seconds continuously above threshold.
struct DetectionEvent {
    double onset = 0.0;
    double confirmed_at = 0.0;
    double end = 0.0;  // first sample back below threshold (horizon end if never)
    double peak = 0.0;
};

std::vector<DetectionEvent> detect(const std::vector<Vector>& phi, const TimeGrid& grid,
                                   double threshold, double dwell);

/// Default detection threshold: 3x the 95th percentile of ||phi|| on a
/// disturbance-only calibration run.
double calibration_threshold(const std::vector<Vector>& phi_calibration);

/// Tracker state of Eq. (8) reconstructed offline by RK4 along the realized
/// attack input: d eps/dt = Omega eps + Gamma (Upsilon eps - f), eps(0) = 0.
/// (eps is not a physical simulation state; the H-infinity report needs it.)
std::vector<Vector> reconstruct_tracker_state(const ValidatedScenario& scenario,
                                              const SimResult& result, int node);

/// Detector error signals z = e - ehat and delta = eps - epshat per grid point.
struct NodeErrorSignals {
    std::vector<Vector> z;
    std::vector<Vector> delta;
};

NodeErrorSignals error_signals(const ValidatedScenario& scenario, const SimResult& result,
                               int node);

/// ||(z_1..N, delta_1..N)(t_k)|| stacked over all nodes.
std::vector<double> stacked_error_norms(const ValidatedScenario& scenario,
                                        const SimResult& result);

/// Consistency of the recorded trajectory with the closed-loop error dynamics:
/// centered finite differences of (z, delta) against the right-hand side
/// evaluated from recorded signals, scaled by the trajectory's peak derivative
/// norm. `max_rel_smooth` skips grid points within two steps of a signal
/// discontinuity, where the centered difference is not a consistent estimator.
struct ResidualReport {
    double max_rel = 0.0;
    double max_rel_smooth = 0.0;
};

ResidualReport equation_residual(const ValidatedScenario& scenario, const SimResult& result,
                                 const GainSet& gains, int node);

/// Per-node report bundle matching the metrics JSON schema.
struct NodeReport {
    int node = 0;  // 1-based, as in the scenario file
    TrackingReport tracking;
    HinfReport hinf;
    DecayFit decay;
    std::vector<DetectionEvent> detections;
};

std::vector<NodeReport> node_reports(const ValidatedScenario& scenario, const SimResult& result,
                                     const std::vector<double>& detection_thresholds,
                                     double dwell);

}  // namespace attdet

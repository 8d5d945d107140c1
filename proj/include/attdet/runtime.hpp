#pragma once

#include "attdet/model.hpp"
#include "attdet/synthesis.hpp"

#include <optional>
#include <vector>

namespace attdet {

/// Innovation pair of one node: zeta = y - C xhat from the local measurement,
/// zeta_edges[k] = c_ij - W_ij xhat from the k-th in-edge message. Recomputed
/// from current states at every evaluation, never integrated.
struct Innovations {
    Vector zeta;
    std::vector<Vector> zeta_edges;
};

Innovations innovations(const Vector& y, const Matrix& c, const std::vector<Vector>& messages,
                        const std::vector<Matrix>& w, const Vector& xhat);

/// Observer derivative A xhat + L zeta + sum K_ij zeta_ij (+ F f when the node
/// is misappropriated; the honest observer is the f = 0 special case).
Vector observer_rhs(const Matrix& a, const Vector& xhat, const Matrix& l,
                    const std::vector<Matrix>& k, const Innovations& innov,
                    const Matrix& f_inject, const std::optional<Vector>& attack_input);

/// Detector gain blocks of one node evaluated at one time.
struct DetectorGains {
    Matrix l_hat;                 // n x p_i
    std::vector<Matrix> k_hat;    // n x p_ij
    Matrix l_check;               // 2n_f x p_i
    std::vector<Matrix> k_check;  // 2n_f x p_ij
};

/// Splits an evaluated stacked detector gain into its (Ldef) blocks.
DetectorGains split_detector_gain(const Matrix& stacked, const GainPartition& partition);

/// Both blocks of the detector node: the ehat drift with baseline gains, the
/// neighbor coupling, the -F Upsilon epshat cross term, and the correction
/// terms driven by zeta - C ehat and zeta_ij - W_ij (ehat_i - ehat_j). The
/// detector-only corrections use l_hat - l_base and k_hat - k_base. Node i
/// reads W_ij ehat_j for each in-neighbor at every evaluation.
struct DetectorRhs {
    Vector dehat;
    Vector depshat;
};

DetectorRhs detector_rhs(const Matrix& a, const Matrix& c, const TrackerSpec& tracker,
                         const Matrix& l_base, const std::vector<Matrix>& k_base,
                         const DetectorGains& gains, const std::vector<Matrix>& w,
                         const Vector& ehat, const Vector& epshat, const Innovations& innov,
                         const std::vector<Vector>& neighbor_ehat);

enum class GainReplay {
    Scheduled,  // linear interpolation on the design grid (default)
    Frozen,     // hold the final design sample
};

/// Baseline + detector gain schedules for every node.
struct GainSet {
    std::vector<GainSchedule> baseline;
    std::vector<GainSchedule> detector;
};

GainSet gain_set(const DesignResult& design);

struct SimOptions {
    std::optional<double> horizon;       // default: scenario sim.horizon
    std::optional<double> step;          // default: scenario sim.step
    std::optional<std::uint64_t> seed;   // default: scenario sim.seed
    GainReplay replay = GainReplay::Scheduled;
    std::optional<bool> attacks_enabled; // default true; false strips attacks
    double divergence_norm = 1e12;
};

struct NodeTrajectory {
    std::vector<Vector> xhat;
    std::vector<Vector> e;       // x - xhat
    std::vector<Vector> ehat;
    std::vector<Vector> epshat;
    std::vector<Vector> phi;     // Upsilon epshat
    std::vector<Vector> f;       // injected attack input (zero when honest)
    std::vector<Vector> zeta;
    std::vector<std::vector<Vector>> zeta_edges;  // [time][local edge]
};

struct SimResult {
    TimeGrid grid;
    std::uint64_t seed = 0;
    std::vector<Vector> x;
    std::vector<NodeTrajectory> nodes;
};

/// Fixed-step RK4 over the stacked state (x, all xhat, all ehat, all epshat);
/// disturbances and attacks are sampled at the RK4 stage times; deterministic
/// given the seed. Throws DivergenceError when the state norm passes the bound.
SimResult simulate(const ValidatedScenario& scenario, const GainSet& gains,
                   const SimOptions& options = {});

}  // namespace attdet

#pragma once

#include "attdet/errors.hpp"
#include "attdet/linalg.hpp"
#include "attdet/matrix_fn.hpp"
#include "attdet/signals.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace attdet {

/// Time-varying plant dx/dt = A(t)x + B(t)w, x(0) = x0.
struct PlantModel {
    Eigen::Index n = 0;  // state dimension
    Eigen::Index m = 0;  // disturbance dimension
    TimeVaryingMatrix a;  // n x n
    TimeVaryingMatrix b;  // n x m
    Vector x0;
    double horizon = std::numeric_limits<double>::infinity();  // seconds
};

/// Evaluates A(t), B(t). Throws DomainError when t is outside [0, horizon].
std::pair<Matrix, Matrix> eval_plant(const PlantModel& model, double t);

/// Node measurement y_i = C_i(t)x + D_i(t)v_i.
struct SensorModel {
    Eigen::Index p = 0;    // measurement dimension
    Eigen::Index m_v = 0;  // noise dimension
    TimeVaryingMatrix c;   // p x n
    TimeVaryingMatrix d;   // p x m_v
};

/// Attack-tracking model realization (Omega_i, Gamma_i, Upsilon_i) for the
/// first-order low-pass choice G_i(s) = g_i/(s + 2 beta_i) I, together with the
/// injection matrix F_i of the hijacked observer.
struct TrackerSpec {
    Eigen::Index n_f = 0;  // attack input dimension
    double beta = 0.0;     // filter pole parameter, 1/s
    double g = 0.0;        // filter gain
    Matrix omega;          // 2n_f x 2n_f
    Matrix gamma_in;       // 2n_f x n_f
    Matrix upsilon;        // n_f x 2n_f
    Matrix f_inject;       // n x n_f; set by the scenario, not by build_tracker
};

/// Builds Omega = [[0, I], [0, -2 beta I]], Gamma = [0; -g I], Upsilon = [I 0].
/// Throws ParameterError on nonpositive beta/g or n_f < 1.
TrackerSpec build_tracker(double beta, double g, Eigen::Index n_f);

/// Directed communication link: node `source` sends c = W xhat_source + H v to
/// node `target`.
struct LinkModel {
    int source = -1;
    int target = -1;
    Eigen::Index p = 0;    // message dimension
    Eigen::Index m_v = 0;  // link noise dimension
    Matrix w;              // p x n
    Matrix h;              // p x m_v
    Matrix z;              // p x p, SPD weight
    Matrix z_sqrt;         // symmetric sqrt of z; filled during validation
};

/// Node count plus directed edges; neighborhoods are derived, keeping each
/// node's in-edges in configuration order (this order fixes all row/column
/// stackings downstream).
struct Topology {
    int node_count = 0;
    std::vector<LinkModel> edges;
    std::vector<std::vector<std::size_t>> in_edges;

    static Topology build(int node_count, std::vector<LinkModel> edges);
    int in_degree(int node) const { return static_cast<int>(in_edges[node].size()); }
};

/// Per-node H-infinity design weights; all SPD. r/x are n-square, the checked
/// blocks live on the tracker state and are 2n_f-square.
struct DesignWeights {
    Matrix r;
    Matrix r_check;
    Matrix x;
    Matrix x_check;
};

/// User-supplied constant baseline observer gains (optional; otherwise the
/// baseline is auto-designed).
struct BaselineGainsConfig {
    Matrix l;               // n x p_i
    std::vector<Matrix> k;  // per in-edge, n x p_ij
};

struct NodeConfig {
    SensorModel sensor;
    TrackerSpec tracker;
    DesignWeights weights;
    Vector xi;  // observer initial estimate
    std::optional<VectorSignal> attack;  // hijacked iff present
    std::optional<BaselineGainsConfig> baseline_gains;
};

struct DesignParams {
    double gamma = 1.0;
    double grid_dt = 0.0;  // 0 -> sim.step
    double substep = 0.0;  // 0 -> min(1e-3, grid_dt/10)
};

struct SimParams {
    double horizon = 10.0;  // s
    double step = 1e-3;     // s
    std::uint64_t seed = 0;
};

/// Full problem description; the unit consumed by validation, synthesis and
/// simulation.
struct ScenarioConfig {
    PlantModel plant;
    std::vector<NodeConfig> nodes;
    std::vector<LinkModel> edges;
    DesignParams design;
    SimParams sim;
    VectorSignal w;                     // plant disturbance channel, dim m
    std::vector<VectorSignal> v_nodes;  // measurement noise per node, dim m_i
    std::vector<VectorSignal> v_edges;  // link noise per edge, dim m_ij

    double design_grid_dt() const { return design.grid_dt > 0 ? design.grid_dt : sim.step; }
    double riccati_substep() const;
};

/// Runs every coherence check (dimensions, SPD weights, graph shape, L2
/// disturbance classes, E_i(t) > 0 on the synthesis grid) and returns the full
/// list of violations; empty means valid.
std::vector<Violation> validate_scenario(const ScenarioConfig& config);

/// A validated, immutable scenario with derived topology and dimension tables.
/// Safe to share read-only across workers.
class ValidatedScenario {
public:
    /// Throws ValidationError listing every failed check.
    explicit ValidatedScenario(ScenarioConfig config);

    const ScenarioConfig& config() const { return config_; }
    const Topology& topology() const { return topology_; }

    int node_count() const { return static_cast<int>(config_.nodes.size()); }
    Eigen::Index n() const { return config_.plant.n; }
    Eigen::Index m() const { return config_.plant.m; }

    const NodeConfig& node(int i) const { return config_.nodes[static_cast<std::size_t>(i)]; }
    const LinkModel& edge(std::size_t e) const { return topology_.edges[e]; }
    const std::vector<std::size_t>& in_edges(int i) const {
        return topology_.in_edges[static_cast<std::size_t>(i)];
    }

    Eigen::Index n_f(int i) const { return node(i).tracker.n_f; }
    /// n + 2 n_f, the per-node augmented state dimension.
    Eigen::Index aug_dim(int i) const { return n() + 2 * n_f(i); }
    /// p_i + sum of in-edge p_ij, the stacked innovation dimension.
    Eigen::Index stacked_meas_dim(int i) const;
    bool hijacked(int i) const { return node(i).attack.has_value(); }

private:
    ScenarioConfig config_;
    Topology topology_;
};

}  // namespace attdet

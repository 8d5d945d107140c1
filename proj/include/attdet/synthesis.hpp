#pragma once

#include "attdet/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace attdet {

/// Network coupling data for the centralized setup: per-edge U_ij = H H' + Z,
/// per-node Delta_i = sum_j W' U^-1 Z U^-1 W, and the (N*n)-square block matrix
/// Phi with Phi_ii = Delta_i and Phi_ij = -W_ij' U_ij^-1 W_ij for j in N_i.
struct CouplingData {
    std::vector<Matrix> u;      // per edge, config order
    std::vector<Matrix> delta;  // per node
    Matrix phi;                 // (N*n) x (N*n)
    Eigen::Index n = 0;
    int node_count = 0;

    /// True iff block (i, j) of phi may be nonzero (i == j or j in N_i).
    bool block_allowed(int i, int j, const Topology& topology) const;
};

CouplingData build_coupling(const Topology& topology, Eigen::Index n);

/// Result of the global LMI check R + gamma^2 (Phi + Phi' - Delta) > I.
struct FeasibilityReport {
    double min_eigenvalue = 0.0;  // of R + gamma^2 (Phi + Phi' - Delta) - I
    bool feasible = false;        // min_eigenvalue > strictness tolerance
    double gamma = 0.0;
};

inline constexpr double kLmiStrictTol = 1e-9;

/// r_stack = diag(R_1 ... R_N). Strict feasibility with tolerance 1e-9.
FeasibilityReport check_lmi_global(const Matrix& r_stack, double gamma,
                                   const CouplingData& coupling);

/// R_check > I, strict with tolerance 1e-9. Throws ParameterError when the
/// input is not symmetric.
bool check_lmi_local(const Matrix& r_check);

/// Row/column block sizes of the stacked gain: rows split [n, 2n_f] (or just
/// [n] for the baseline observer), columns split [p_i, p_ij_1, ...].
struct GainPartition {
    std::vector<Eigen::Index> row_blocks;
    std::vector<Eigen::Index> col_blocks;

    Eigen::Index rows() const;
    Eigen::Index cols() const;
    Eigen::Index row_offset(std::size_t block) const;
    Eigen::Index col_offset(std::size_t block) const;
};

/// One node's augmented design-time system (Eq. 21-22 layout):
///   A = [[A(t), -F Upsilon], [0, Omega]],  B = [[B(t), F], [0, Gamma]],
///   C = [[C_i(t), 0], [W_ij, 0], ...],
///   D = [[D_i(t), 0, ..., 0], [0, H_ij, ..., Z_ij^(1/2), ...]],  E = D D'.
class AugmentedNode {
public:
    AugmentedNode(const ValidatedScenario& scenario, int node);

    Matrix a(double t) const;
    Matrix b(double t) const;
    Matrix c(double t) const;
    Matrix d(double t) const;
    /// Throws AssumptionError naming node and time when E(t) is not PD.
    Matrix e(double t) const;

    Eigen::Index state_dim() const { return state_dim_; }
    const GainPartition& gain_partition() const { return partition_; }
    int node() const { return node_; }
    const ValidatedScenario& scenario() const { return *scenario_; }

    /// diag(R_i, R_check_i) and diag(X_i, X_check_i).
    Matrix weight() const;
    Matrix init_weight() const;

private:
    const ValidatedScenario* scenario_;
    int node_;
    Eigen::Index state_dim_;
    GainPartition partition_;
};

/// Coefficients of one differential Riccati equation
///   dY/dt = A Y + Y A' - Y (C' E^-1 C - gamma^-2 R) Y + B B',  Y(0) = X^-1.
struct RiccatiProblem {
    std::function<Matrix(double)> a;
    std::function<Matrix(double)> b;
    std::function<Matrix(double)> c;
    std::function<Matrix(double)> e;
    Matrix weight;       // R (symmetric)
    Matrix init_weight;  // X (SPD)
    double gamma = 1.0;
};

RiccatiProblem augmented_riccati_problem(const AugmentedNode& aug);

/// Boundedness corridor: integration aborts outside it.
struct RiccatiBounds {
    double alpha1_min = 1e-8;
    double alpha2_max = 1e8;
};

/// Time-sampled DRE solution with the empirically observed eigenvalue corridor.
struct RiccatiSolution {
    TimeGrid grid;
    std::vector<Matrix> y;  // per grid point, symmetric PD
    double alpha1 = 0.0;    // min eigenvalue over the grid
    double alpha2 = 0.0;    // max eigenvalue over the grid
};

/// Fixed-step RK4 with post-step symmetrization Y <- (Y + Y')/2. `substep` is
/// the RK4 step; each grid interval is an integer number of substeps. Throws
/// RiccatiUnboundedError (with the failure time) when Y leaves the corridor or
/// stops being finite.
RiccatiSolution integrate_riccati(const RiccatiProblem& problem, const TimeGrid& grid,
                                  double substep, const RiccatiBounds& bounds = {});

/// Time-sampled stacked gain schedule with its (Ldef) partition. Values between
/// grid points are linearly interpolated; outside the grid the boundary sample
/// is held. Frozen replay always returns the final sample.
class GainSchedule {
public:
    GainSchedule() = default;
    GainSchedule(TimeGrid grid, std::vector<Matrix> gains, GainPartition partition);

    static GainSchedule constant(const Matrix& gain, GainPartition partition);

    const TimeGrid& grid() const { return grid_; }
    const std::vector<Matrix>& samples() const { return gains_; }
    const GainPartition& partition() const { return partition_; }

    Matrix at(double t) const;      // scheduled replay
    const Matrix& frozen() const;   // final sample

    /// Block (row_block, col_block) of an evaluated stacked gain.
    Matrix block(const Matrix& stacked, std::size_t row_block, std::size_t col_block) const;

    /// Reassembles a full stacked gain from its partition blocks; the exact
    /// inverse of block extraction.
    static Matrix reassemble(const std::vector<std::vector<Matrix>>& blocks);

private:
    TimeGrid grid_;
    std::vector<Matrix> gains_;
    GainPartition partition_;
};

/// L_i(t_k) = Y(t_k) C(t_k)' E(t_k)^-1 on the solution grid.
GainSchedule gains_from_solution(const RiccatiSolution& solution, const AugmentedNode& aug);

/// Per-node design output: the detector schedule (rows n + 2n_f) and the
/// baseline observer schedule (rows n).
struct NodeDesign {
    GainSchedule detector;
    GainSchedule baseline;
    RiccatiSolution riccati;
};

struct DesignResult {
    FeasibilityReport lmi;
    std::vector<bool> lmi_local_ok;   // per node, R_check > I
    std::vector<NodeDesign> nodes;    // valid where node_errors[i] is empty
    std::vector<std::string> node_errors;          // Riccati failure messages
    std::vector<double> node_failure_times;        // NaN when no failure
    double gamma = 0.0;

    bool ok() const;
};

/// Baseline observer gains: user-supplied constants passed through, otherwise
/// the same Riccati machinery on the non-augmented per-node system (A, B, the
/// same stacked C and E, weights R_i / X_i).
GainSchedule design_baseline_observer(const ValidatedScenario& scenario, int node,
                                      const TimeGrid& grid, double substep,
                                      const RiccatiBounds& bounds = {});

/// The full two-step design over [0, horizon]: global LMI + local checks, then
/// one DRE (detector and baseline) per node. Failures are recorded on the
/// result, not thrown, so callers can report them.
DesignResult design_detectors(const ValidatedScenario& scenario,
                              std::optional<double> gamma_override = {},
                              std::optional<double> horizon_override = {});

/// One row of the gamma sweep table.
struct GammaSweepRow {
    double gamma = 0.0;
    double lmi_min_eigenvalue = 0.0;
    bool lmi_feasible = false;
    std::vector<bool> riccati_bounded;        // per node
    std::vector<std::string> riccati_errors;  // per node, empty when bounded
};

/// Runs the LMI check and all node DREs for each gamma; failures are recorded
/// per row, never thrown.
std::vector<GammaSweepRow> sweep_gamma(const ValidatedScenario& scenario,
                                       const std::vector<double>& gammas);

}  // namespace attdet

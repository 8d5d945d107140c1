#include "attdet/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace attdet {

namespace {

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
    Eigen::Index dim = 0;
    for (const auto& b : blocks) dim += b.rows();
    Matrix out = Matrix::Zero(dim, dim);
    Eigen::Index offset = 0;
    for (const auto& b : blocks) {
        out.block(offset, offset, b.rows(), b.cols()) = b;
        offset += b.rows();
    }
    return out;
}

}  // namespace

bool CouplingData::block_allowed(int i, int j, const Topology& topology) const {
    if (i == j) return true;
    for (std::size_t e : topology.in_edges[static_cast<std::size_t>(i)]) {
        if (topology.edges[e].source == j) return true;
    }
    return false;
}

CouplingData build_coupling(const Topology& topology, Eigen::Index n) {
    CouplingData data;
    data.n = n;
    data.node_count = topology.node_count;
    data.u.reserve(topology.edges.size());
    for (std::size_t e = 0; e < topology.edges.size(); ++e) {
        const auto& link = topology.edges[e];
        Matrix u = link.h * link.h.transpose() + link.z;
        if (min_eigenvalue(u) <= 0.0) {
            std::ostringstream os;
            os << "U block of edge " << link.source + 1 << "->" << link.target + 1
               << " is singular; Z was expected SPD";
            throw Error(os.str());
        }
        data.u.push_back(std::move(u));
    }

    const auto node_count = static_cast<std::size_t>(topology.node_count);
    data.delta.assign(node_count, Matrix::Zero(n, n));
    data.phi = Matrix::Zero(static_cast<Eigen::Index>(node_count) * n,
                            static_cast<Eigen::Index>(node_count) * n);
    for (std::size_t i = 0; i < node_count; ++i) {
        for (std::size_t e : topology.in_edges[i]) {
            const auto& link = topology.edges[e];
            const Matrix u_inv = spd_inverse(data.u[e]);
            data.delta[i] += link.w.transpose() * u_inv * link.z * u_inv * link.w;
            const auto j = static_cast<Eigen::Index>(link.source);
            data.phi.block(static_cast<Eigen::Index>(i) * n, j * n, n, n) =
                -link.w.transpose() * u_inv * link.w;
        }
        data.phi.block(static_cast<Eigen::Index>(i) * n, static_cast<Eigen::Index>(i) * n, n,
                       n) = data.delta[i];
    }
    return data;
}

FeasibilityReport check_lmi_global(const Matrix& r_stack, double gamma,
                                   const CouplingData& coupling) {
    if (r_stack.rows() != coupling.phi.rows() || r_stack.cols() != coupling.phi.cols()) {
        throw ParameterError("stacked R dimension does not match the coupling matrix");
    }
    const Matrix delta_stack = block_diagonal(coupling.delta);
    const Matrix m = r_stack +
                     gamma * gamma * (coupling.phi + coupling.phi.transpose() - delta_stack) -
                     Matrix::Identity(r_stack.rows(), r_stack.cols());
    FeasibilityReport report;
    report.gamma = gamma;
    report.min_eigenvalue = min_eigenvalue(0.5 * (m + m.transpose()));
    report.feasible = report.min_eigenvalue > kLmiStrictTol;
    return report;
}

bool check_lmi_local(const Matrix& r_check) {
    if (!is_symmetric(r_check, 1e-9)) {
        throw ParameterError("local LMI check requires a symmetric matrix");
    }
    const Matrix m = r_check - Matrix::Identity(r_check.rows(), r_check.cols());
    return min_eigenvalue(m) > kLmiStrictTol;
}

Eigen::Index GainPartition::rows() const {
    return std::accumulate(row_blocks.begin(), row_blocks.end(), Eigen::Index{0});
}

Eigen::Index GainPartition::cols() const {
    return std::accumulate(col_blocks.begin(), col_blocks.end(), Eigen::Index{0});
}

Eigen::Index GainPartition::row_offset(std::size_t block) const {
    return std::accumulate(row_blocks.begin(), row_blocks.begin() + block, Eigen::Index{0});
}

Eigen::Index GainPartition::col_offset(std::size_t block) const {
    return std::accumulate(col_blocks.begin(), col_blocks.begin() + block, Eigen::Index{0});
}

AugmentedNode::AugmentedNode(const ValidatedScenario& scenario, int node)
    : scenario_(&scenario), node_(node) {
    state_dim_ = scenario.aug_dim(node);
    partition_.row_blocks = {scenario.n(), 2 * scenario.n_f(node)};
    partition_.col_blocks = {scenario.node(node).sensor.p};
    for (std::size_t e : scenario.in_edges(node)) {
        partition_.col_blocks.push_back(scenario.edge(e).p);
    }
}

Matrix AugmentedNode::a(double t) const {
    const auto& tracker = scenario_->node(node_).tracker;
    const Eigen::Index n = scenario_->n();
    const Eigen::Index nf2 = 2 * tracker.n_f;
    Matrix out = Matrix::Zero(n + nf2, n + nf2);
    out.topLeftCorner(n, n) = scenario_->config().plant.a.eval(t);
    out.topRightCorner(n, nf2) = -tracker.f_inject * tracker.upsilon;
    out.bottomRightCorner(nf2, nf2) = tracker.omega;
    return out;
}

Matrix AugmentedNode::b(double t) const {
    const auto& tracker = scenario_->node(node_).tracker;
    const Eigen::Index n = scenario_->n();
    const Eigen::Index m = scenario_->m();
    const Eigen::Index nf = tracker.n_f;
    Matrix out = Matrix::Zero(n + 2 * nf, m + nf);
    out.topLeftCorner(n, m) = scenario_->config().plant.b.eval(t);
    out.block(0, m, n, nf) = tracker.f_inject;
    out.bottomRightCorner(2 * nf, nf) = tracker.gamma_in;
    return out;
}

Matrix AugmentedNode::c(double t) const {
    const auto& node = scenario_->node(node_);
    const Eigen::Index n = scenario_->n();
    Matrix out = Matrix::Zero(scenario_->stacked_meas_dim(node_), state_dim_);
    out.topLeftCorner(node.sensor.p, n) = node.sensor.c.eval(t);
    Eigen::Index row = node.sensor.p;
    for (std::size_t e : scenario_->in_edges(node_)) {
        const auto& link = scenario_->edge(e);
        out.block(row, 0, link.p, n) = link.w;
        row += link.p;
    }
    return out;
}

Matrix AugmentedNode::d(double t) const {
    const auto& node = scenario_->node(node_);
    const auto& in = scenario_->in_edges(node_);
    Eigen::Index noise_cols = node.sensor.m_v;
    Eigen::Index eta_cols = 0;
    for (std::size_t e : in) {
        noise_cols += scenario_->edge(e).m_v;
        eta_cols += scenario_->edge(e).p;
    }
    Matrix out = Matrix::Zero(scenario_->stacked_meas_dim(node_), noise_cols + eta_cols);
    out.topLeftCorner(node.sensor.p, node.sensor.m_v) = node.sensor.d.eval(t);

    Eigen::Index row = node.sensor.p;
    Eigen::Index v_col = node.sensor.m_v;
    Eigen::Index eta_col = noise_cols;
    for (std::size_t e : in) {
        const auto& link = scenario_->edge(e);
        out.block(row, v_col, link.p, link.m_v) = link.h;
        out.block(row, eta_col, link.p, link.p) = link.z_sqrt;
        row += link.p;
        v_col += link.m_v;
        eta_col += link.p;
    }
    return out;
}

Matrix AugmentedNode::e(double t) const {
    const Matrix dd = d(t);
    Matrix out = dd * dd.transpose();
    if (min_eigenvalue(out) <= 1e-12) {
        std::ostringstream os;
        os << "E of node " << node_ + 1 << " is not positive definite at t=" << t;
        throw AssumptionError(os.str());
    }
    return out;
}

Matrix AugmentedNode::weight() const {
    const auto& w = scenario_->node(node_).weights;
    return block_diagonal({w.r, w.r_check});
}

Matrix AugmentedNode::init_weight() const {
    const auto& w = scenario_->node(node_).weights;
    return block_diagonal({w.x, w.x_check});
}

RiccatiProblem augmented_riccati_problem(const AugmentedNode& aug) {
    RiccatiProblem problem;
    problem.a = [aug](double t) { return aug.a(t); };
    problem.b = [aug](double t) { return aug.b(t); };
    problem.c = [aug](double t) { return aug.c(t); };
    problem.e = [aug](double t) { return aug.e(t); };
    problem.weight = aug.weight();
    problem.init_weight = aug.init_weight();
    problem.gamma = aug.scenario().config().design.gamma;
    return problem;
}

RiccatiSolution integrate_riccati(const RiccatiProblem& problem, const TimeGrid& grid,
                                  double substep, const RiccatiBounds& bounds) {
    if (!(substep > 0.0)) throw ParameterError("Riccati substep must be positive");
    if (grid.count == 0) throw ParameterError("Riccati grid is empty");
    if (!is_spd(problem.init_weight)) {
        throw ParameterError("Riccati initial weight X must be symmetric positive definite");
    }
    const double gamma2 = problem.gamma * problem.gamma;

    // dY/dt = A Y + Y A' - Y (C' E^-1 C - gamma^-2 R) Y + B B'
    auto rhs = [&](double t, const Matrix& y) {
        const Matrix a = problem.a(t);
        const Matrix c = problem.c(t);
        const Matrix e = problem.e(t);
        const Matrix b = problem.b(t);
        const Matrix s = c.transpose() * e.llt().solve(c) - problem.weight / gamma2;
        return Matrix(a * y + y * a.transpose() - y * s * y + b * b.transpose());
    };

    RiccatiSolution sol;
    sol.grid = grid;
    sol.y.reserve(grid.count);
    sol.alpha1 = std::numeric_limits<double>::infinity();
    sol.alpha2 = 0.0;

    Matrix y = spd_inverse(problem.init_weight);

    auto record = [&](const Matrix& value, double t) {
        const double lo = min_eigenvalue(value);
        const double hi = max_eigenvalue(value);
        if (!value.allFinite() || lo < bounds.alpha1_min || hi > bounds.alpha2_max) {
            std::ostringstream os;
            os << "Riccati solution left the boundedness corridor at t=" << t
               << " (min eig " << lo << ", max eig " << hi << ")";
            throw RiccatiUnboundedError(os.str(), t);
        }
        sol.alpha1 = std::min(sol.alpha1, lo);
        sol.alpha2 = std::max(sol.alpha2, hi);
        sol.y.push_back(value);
    };

    record(y, grid.time(0));
    if (grid.count > 1 && !(grid.dt > 0.0)) {
        throw ParameterError("Riccati grid spacing must be positive");
    }

    const auto n_sub =
        grid.count > 1
            ? std::max<std::size_t>(
                  1, static_cast<std::size_t>(std::ceil(grid.dt / substep - 1e-12)))
            : 1;
    const double h = grid.count > 1 ? grid.dt / static_cast<double>(n_sub) : 0.0;

    for (std::size_t k = 0; k + 1 < grid.count; ++k) {
        const double t_k = grid.time(k);
        for (std::size_t s = 0; s < n_sub; ++s) {
            const double t = t_k + static_cast<double>(s) * h;
            const Matrix k1 = rhs(t, y);
            const Matrix k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
            const Matrix k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
            const Matrix k4 = rhs(t + h, y + h * k3);
            y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            y = 0.5 * (y + y.transpose()).eval();
            if (!y.allFinite() || y.cwiseAbs().maxCoeff() > bounds.alpha2_max) {
                // The step starting at t escaped; t is the last trusted time.
                std::ostringstream os;
                os << "Riccati solution became unbounded during the step beginning at t=" << t;
                throw RiccatiUnboundedError(os.str(), t);
            }
        }
        record(y, grid.time(k + 1));
    }
    return sol;
}

GainSchedule::GainSchedule(TimeGrid grid, std::vector<Matrix> gains, GainPartition partition)
    : grid_(grid), gains_(std::move(gains)), partition_(std::move(partition)) {
    if (gains_.size() != grid_.count) {
        throw ParameterError("gain schedule sample count does not match its grid");
    }
    for (const auto& g : gains_) {
        if (g.rows() != partition_.rows() || g.cols() != partition_.cols()) {
            throw ParameterError("gain sample dimensions do not match the partition");
        }
    }
}

GainSchedule GainSchedule::constant(const Matrix& gain, GainPartition partition) {
    return GainSchedule(TimeGrid{0.0, 0.0, 1}, {gain}, std::move(partition));
}

Matrix GainSchedule::at(double t) const {
    if (gains_.empty()) throw ParameterError("empty gain schedule");
    if (gains_.size() == 1 || t <= grid_.t0) return gains_.front();
    if (t >= grid_.t_end()) return gains_.back();
    auto k = static_cast<std::size_t>((t - grid_.t0) / grid_.dt);
    k = std::min(k, grid_.count - 2);
    const double alpha = (t - grid_.time(k)) / grid_.dt;
    return (1.0 - alpha) * gains_[k] + alpha * gains_[k + 1];
}

const Matrix& GainSchedule::frozen() const {
    if (gains_.empty()) throw ParameterError("empty gain schedule");
    return gains_.back();
}

Matrix GainSchedule::block(const Matrix& stacked, std::size_t row_block,
                           std::size_t col_block) const {
    return stacked.block(partition_.row_offset(row_block), partition_.col_offset(col_block),
                         partition_.row_blocks[row_block], partition_.col_blocks[col_block]);
}

Matrix GainSchedule::reassemble(const std::vector<std::vector<Matrix>>& blocks) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const auto& row : blocks) rows += row.front().rows();
    for (const auto& b : blocks.front()) cols += b.cols();
    Matrix out(rows, cols);
    Eigen::Index r = 0;
    for (const auto& row : blocks) {
        Eigen::Index c = 0;
        for (const auto& b : row) {
            out.block(r, c, b.rows(), b.cols()) = b;
            c += b.cols();
        }
        r += row.front().rows();
    }
    return out;
}

GainSchedule gains_from_solution(const RiccatiSolution& solution, const AugmentedNode& aug) {
    std::vector<Matrix> gains;
    gains.reserve(solution.y.size());
    for (std::size_t k = 0; k < solution.y.size(); ++k) {
        const double t = solution.grid.time(k);
        const Matrix c = aug.c(t);
        const Matrix e = aug.e(t);
        // L = Y C' E^-1 == (E^-1 C Y)' since Y is symmetric.
        gains.push_back(e.llt().solve(c * solution.y[k]).transpose());
    }
    return GainSchedule(solution.grid, std::move(gains), aug.gain_partition());
}

GainSchedule design_baseline_observer(const ValidatedScenario& scenario, int node,
                                      const TimeGrid& grid, double substep,
                                      const RiccatiBounds& bounds) {
    const auto& cfg = scenario.node(node);
    GainPartition partition;
    partition.row_blocks = {scenario.n()};
    partition.col_blocks = {cfg.sensor.p};
    for (std::size_t e : scenario.in_edges(node)) {
        partition.col_blocks.push_back(scenario.edge(e).p);
    }

    if (cfg.baseline_gains) {
        Matrix stacked(scenario.n(), partition.cols());
        stacked.leftCols(cfg.sensor.p) = cfg.baseline_gains->l;
        Eigen::Index col = cfg.sensor.p;
        for (std::size_t k = 0; k < cfg.baseline_gains->k.size(); ++k) {
            const auto& block = cfg.baseline_gains->k[k];
            stacked.middleCols(col, block.cols()) = block;
            col += block.cols();
        }
        return GainSchedule::constant(stacked, partition);
    }

    const AugmentedNode aug(scenario, node);
    const Eigen::Index n = scenario.n();
    RiccatiProblem problem;
    problem.a = [&scenario](double t) { return scenario.config().plant.a.eval(t); };
    problem.b = [&scenario](double t) { return scenario.config().plant.b.eval(t); };
    problem.c = [aug, n](double t) { return Matrix(aug.c(t).leftCols(n)); };
    problem.e = [aug](double t) { return aug.e(t); };
    problem.weight = cfg.weights.r;
    problem.init_weight = cfg.weights.x;
    problem.gamma = scenario.config().design.gamma;

    const RiccatiSolution sol = integrate_riccati(problem, grid, substep, bounds);
    std::vector<Matrix> gains;
    gains.reserve(sol.y.size());
    for (std::size_t k = 0; k < sol.y.size(); ++k) {
        const double t = sol.grid.time(k);
        const Matrix c = problem.c(t);
        const Matrix e = problem.e(t);
        gains.push_back(e.llt().solve(c * sol.y[k]).transpose());
    }
    return GainSchedule(sol.grid, std::move(gains), partition);
}

bool DesignResult::ok() const {
    if (!lmi.feasible) return false;
    if (std::find(lmi_local_ok.begin(), lmi_local_ok.end(), false) != lmi_local_ok.end()) {
        return false;
    }
    return std::all_of(node_errors.begin(), node_errors.end(),
                       [](const std::string& e) { return e.empty(); });
}

DesignResult design_detectors(const ValidatedScenario& scenario,
                              std::optional<double> gamma_override,
                              std::optional<double> horizon_override) {
    const auto& config = scenario.config();
    const double gamma = gamma_override.value_or(config.design.gamma);
    const double horizon = horizon_override.value_or(config.sim.horizon);
    const TimeGrid grid = TimeGrid::over(0.0, horizon, config.design_grid_dt());
    const double substep = config.riccati_substep();

    DesignResult result;
    result.gamma = gamma;
    const CouplingData coupling = build_coupling(scenario.topology(), scenario.n());
    std::vector<Matrix> r_blocks;
    r_blocks.reserve(static_cast<std::size_t>(scenario.node_count()));
    for (int i = 0; i < scenario.node_count(); ++i) r_blocks.push_back(scenario.node(i).weights.r);
    result.lmi = check_lmi_global(block_diagonal(r_blocks), gamma, coupling);

    result.lmi_local_ok.reserve(static_cast<std::size_t>(scenario.node_count()));
    for (int i = 0; i < scenario.node_count(); ++i) {
        result.lmi_local_ok.push_back(check_lmi_local(scenario.node(i).weights.r_check));
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < scenario.node_count(); ++i) {
        NodeDesign node;
        std::string error;
        double failure_time = nan;
        try {
            const AugmentedNode aug(scenario, i);
            RiccatiProblem problem = augmented_riccati_problem(aug);
            problem.gamma = gamma;
            node.riccati = integrate_riccati(problem, grid, substep);
            node.detector = gains_from_solution(node.riccati, aug);
            node.baseline = design_baseline_observer(scenario, i, grid, substep);
        } catch (const RiccatiUnboundedError& err) {
            error = err.what();
            failure_time = err.failure_time();
        }
        result.nodes.push_back(std::move(node));
        result.node_errors.push_back(std::move(error));
        result.node_failure_times.push_back(failure_time);
    }
    return result;
}

std::vector<GammaSweepRow> sweep_gamma(const ValidatedScenario& scenario,
                                       const std::vector<double>& gammas) {
    std::vector<GammaSweepRow> rows;
    rows.reserve(gammas.size());
    for (double gamma : gammas) {
        GammaSweepRow row;
        row.gamma = gamma;
        const DesignResult design = design_detectors(scenario, gamma);
        row.lmi_min_eigenvalue = design.lmi.min_eigenvalue;
        row.lmi_feasible = design.lmi.feasible;
        for (const auto& err : design.node_errors) {
            row.riccati_bounded.push_back(err.empty());
            row.riccati_errors.push_back(err);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace attdet

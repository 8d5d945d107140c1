#include "attdet/runtime.hpp"

#include <cmath>
#include <sstream>

namespace attdet {

Innovations innovations(const Vector& y, const Matrix& c, const std::vector<Vector>& messages,
                        const std::vector<Matrix>& w, const Vector& xhat) {
    Innovations innov;
    innov.zeta = y - c * xhat;
    innov.zeta_edges.reserve(messages.size());
    for (std::size_t k = 0; k < messages.size(); ++k) {
        innov.zeta_edges.push_back(messages[k] - w[k] * xhat);
    }
    return innov;
}

Vector observer_rhs(const Matrix& a, const Vector& xhat, const Matrix& l,
                    const std::vector<Matrix>& k, const Innovations& innov,
                    const Matrix& f_inject, const std::optional<Vector>& attack_input) {
    Vector dx = a * xhat + l * innov.zeta;
    for (std::size_t e = 0; e < k.size(); ++e) dx += k[e] * innov.zeta_edges[e];
    if (attack_input) dx += f_inject * (*attack_input);
    return dx;
}

DetectorGains split_detector_gain(const Matrix& stacked, const GainPartition& partition) {
    DetectorGains gains;
    const Eigen::Index n = partition.row_blocks[0];
    const Eigen::Index nf2 = partition.row_blocks[1];
    Eigen::Index col = 0;
    gains.l_hat = stacked.block(0, 0, n, partition.col_blocks[0]);
    gains.l_check = stacked.block(n, 0, nf2, partition.col_blocks[0]);
    col = partition.col_blocks[0];
    for (std::size_t b = 1; b < partition.col_blocks.size(); ++b) {
        const Eigen::Index p = partition.col_blocks[b];
        gains.k_hat.push_back(stacked.block(0, col, n, p));
        gains.k_check.push_back(stacked.block(n, col, nf2, p));
        col += p;
    }
    return gains;
}

DetectorRhs detector_rhs(const Matrix& a, const Matrix& c, const TrackerSpec& tracker,
                         const Matrix& l_base, const std::vector<Matrix>& k_base,
                         const DetectorGains& gains, const std::vector<Matrix>& w,
                         const Vector& ehat, const Vector& epshat, const Innovations& innov,
                         const std::vector<Vector>& neighbor_ehat) {
    DetectorRhs rhs;
    // (A - L C - sum K_ij W_ij) ehat + sum K_ij W_ij ehat_j - F Upsilon epshat
    rhs.dehat = a * ehat - l_base * (c * ehat);
    for (std::size_t k = 0; k < w.size(); ++k) {
        rhs.dehat += k_base[k] * (w[k] * (neighbor_ehat[k] - ehat));
    }
    rhs.dehat -= tracker.f_inject * (tracker.upsilon * epshat);

    const Vector corr = innov.zeta - c * ehat;
    rhs.dehat += (gains.l_hat - l_base) * corr;
    rhs.depshat = tracker.omega * epshat + gains.l_check * corr;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const Vector corr_edge = innov.zeta_edges[k] - w[k] * (ehat - neighbor_ehat[k]);
        rhs.dehat += (gains.k_hat[k] - k_base[k]) * corr_edge;
        rhs.depshat += gains.k_check[k] * corr_edge;
    }
    return rhs;
}

GainSet gain_set(const DesignResult& design) {
    if (!design.ok()) throw Error("design is not feasible; no gain set available");
    GainSet set;
    for (const auto& node : design.nodes) {
        set.baseline.push_back(node.baseline);
        set.detector.push_back(node.detector);
    }
    return set;
}

namespace {

/// Pre-evaluated constant coefficient, or re-evaluated when time-varying.
class MatrixEval {
public:
    explicit MatrixEval(const TimeVaryingMatrix& source) : source_(&source) {
        if (source.is_constant()) cached_ = source.eval(0.0);
    }

    Matrix operator()(double t) const { return cached_ ? *cached_ : source_->eval(t); }

private:
    const TimeVaryingMatrix* source_;
    std::optional<Matrix> cached_;
};

struct StateLayout {
    Eigen::Index n = 0;
    std::vector<Eigen::Index> xhat;    // per-node offsets
    std::vector<Eigen::Index> ehat;
    std::vector<Eigen::Index> epshat;
    std::vector<Eigen::Index> nf2;
    Eigen::Index total = 0;
};

StateLayout make_layout(const ValidatedScenario& scenario) {
    StateLayout layout;
    layout.n = scenario.n();
    Eigen::Index offset = layout.n;
    const int node_count = scenario.node_count();
    for (int i = 0; i < node_count; ++i) {
        layout.xhat.push_back(offset);
        offset += layout.n;
    }
    for (int i = 0; i < node_count; ++i) {
        layout.ehat.push_back(offset);
        offset += layout.n;
    }
    for (int i = 0; i < node_count; ++i) {
        layout.epshat.push_back(offset);
        layout.nf2.push_back(2 * scenario.n_f(i));
        offset += layout.nf2.back();
    }
    layout.total = offset;
    return layout;
}

}  // namespace

SimResult simulate(const ValidatedScenario& scenario, const GainSet& gains,
                   const SimOptions& options) {
    const auto& config = scenario.config();
    const int node_count = scenario.node_count();
    if (gains.baseline.size() != static_cast<std::size_t>(node_count) ||
        gains.detector.size() != static_cast<std::size_t>(node_count)) {
        throw ParameterError("gain set does not cover every node");
    }

    const double horizon = options.horizon.value_or(config.sim.horizon);
    const double step = options.step.value_or(config.sim.step);
    const std::uint64_t seed = options.seed.value_or(config.sim.seed);
    const bool attacks_on = options.attacks_enabled.value_or(true);
    if (!(horizon > 0.0) || !(step > 0.0)) {
        throw ParameterError("simulation horizon and step must be positive");
    }

    const TimeGrid grid = TimeGrid::over(0.0, horizon, step);
    const StateLayout layout = make_layout(scenario);
    const Eigen::Index n = layout.n;

    const MatrixEval plant_a(config.plant.a);
    const MatrixEval plant_b(config.plant.b);
    std::vector<MatrixEval> sensor_c;
    std::vector<MatrixEval> sensor_d;
    std::vector<std::vector<Matrix>> edge_w(static_cast<std::size_t>(node_count));
    for (int i = 0; i < node_count; ++i) {
        sensor_c.emplace_back(scenario.node(i).sensor.c);
        sensor_d.emplace_back(scenario.node(i).sensor.d);
        for (std::size_t e : scenario.in_edges(i)) {
            edge_w[static_cast<std::size_t>(i)].push_back(scenario.edge(e).w);
        }
    }

    auto baseline_at = [&](int i, double t) {
        const auto& schedule = gains.baseline[static_cast<std::size_t>(i)];
        return options.replay == GainReplay::Frozen ? schedule.frozen() : schedule.at(t);
    };
    auto detector_at = [&](int i, double t) {
        const auto& schedule = gains.detector[static_cast<std::size_t>(i)];
        return options.replay == GainReplay::Frozen ? schedule.frozen() : schedule.at(t);
    };

    struct StageData {
        std::vector<Innovations> innov;
        std::vector<std::optional<Vector>> attack;
    };

    // Innovation and attack samples of every node at one (t, state) pair.
    auto evaluate_stage = [&](double t, const Vector& state) {
        StageData data;
        data.innov.reserve(static_cast<std::size_t>(node_count));
        data.attack.resize(static_cast<std::size_t>(node_count));
        const auto x = state.segment(0, n);
        for (int i = 0; i < node_count; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            const auto& node = scenario.node(i);
            const Matrix c = sensor_c[idx](t);
            const Vector v = config.v_nodes[idx].sample(t, seed);
            const Vector y = c * x + sensor_d[idx](t) * v;
            std::vector<Vector> messages;
            messages.reserve(scenario.in_edges(i).size());
            for (std::size_t e : scenario.in_edges(i)) {
                const auto& link = scenario.edge(e);
                const auto xhat_src = state.segment(layout.xhat[static_cast<std::size_t>(link.source)], n);
                messages.push_back(link.w * xhat_src +
                                   link.h * config.v_edges[e].sample(t, seed));
            }
            data.innov.push_back(
                innovations(y, c, messages, edge_w[idx], state.segment(layout.xhat[idx], n)));
            if (attacks_on && node.attack) {
                data.attack[idx] = node.attack->sample(t, seed);
            }
        }
        return data;
    };

    auto derivative = [&](double t, const Vector& state) {
        Vector ds(layout.total);
        const StageData stage = evaluate_stage(t, state);
        const Matrix a = plant_a(t);
        ds.segment(0, n) = a * state.segment(0, n) + plant_b(t) * config.w.sample(t, seed);
        for (int i = 0; i < node_count; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            const auto& node = scenario.node(i);
            const Matrix c = sensor_c[idx](t);
            const Matrix base = baseline_at(i, t);
            const auto& base_part = gains.baseline[idx].partition();
            const Matrix l_base = base.leftCols(base_part.col_blocks[0]);
            std::vector<Matrix> k_base;
            Eigen::Index col = base_part.col_blocks[0];
            for (std::size_t b = 1; b < base_part.col_blocks.size(); ++b) {
                k_base.push_back(base.middleCols(col, base_part.col_blocks[b]));
                col += base_part.col_blocks[b];
            }
            const DetectorGains det =
                split_detector_gain(detector_at(i, t), gains.detector[idx].partition());

            ds.segment(layout.xhat[idx], n) =
                observer_rhs(a, state.segment(layout.xhat[idx], n), l_base, k_base,
                             stage.innov[idx], node.tracker.f_inject, stage.attack[idx]);

            std::vector<Vector> neighbor_ehat;
            neighbor_ehat.reserve(scenario.in_edges(i).size());
            for (std::size_t e : scenario.in_edges(i)) {
                neighbor_ehat.emplace_back(state.segment(
                    layout.ehat[static_cast<std::size_t>(scenario.edge(e).source)], n));
            }
            const DetectorRhs det_rhs = detector_rhs(
                a, c, node.tracker, l_base, k_base, det, edge_w[idx],
                state.segment(layout.ehat[idx], n), state.segment(layout.epshat[idx], layout.nf2[idx]),
                stage.innov[idx], neighbor_ehat);
            ds.segment(layout.ehat[idx], n) = det_rhs.dehat;
            ds.segment(layout.epshat[idx], layout.nf2[idx]) = det_rhs.depshat;
        }
        return ds;
    };

    Vector state = Vector::Zero(layout.total);
    state.segment(0, n) = config.plant.x0;
    for (int i = 0; i < node_count; ++i) {
        state.segment(layout.xhat[static_cast<std::size_t>(i)], n) = scenario.node(i).xi;
    }

    SimResult result;
    result.grid = grid;
    result.seed = seed;
    result.x.reserve(grid.count);
    result.nodes.resize(static_cast<std::size_t>(node_count));
    for (int i = 0; i < node_count; ++i) {
        auto& traj = result.nodes[static_cast<std::size_t>(i)];
        traj.xhat.reserve(grid.count);
        traj.e.reserve(grid.count);
        traj.ehat.reserve(grid.count);
        traj.epshat.reserve(grid.count);
        traj.phi.reserve(grid.count);
        traj.f.reserve(grid.count);
        traj.zeta.reserve(grid.count);
        traj.zeta_edges.reserve(grid.count);
    }

    auto record = [&](double t, const Vector& s) {
        const StageData stage = evaluate_stage(t, s);
        result.x.push_back(s.segment(0, n));
        for (int i = 0; i < node_count; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            auto& traj = result.nodes[idx];
            const auto xhat = s.segment(layout.xhat[idx], n);
            traj.xhat.push_back(xhat);
            traj.e.push_back(s.segment(0, n) - xhat);
            traj.ehat.push_back(s.segment(layout.ehat[idx], n));
            const auto epshat = s.segment(layout.epshat[idx], layout.nf2[idx]);
            traj.epshat.push_back(epshat);
            traj.phi.push_back(scenario.node(i).tracker.upsilon * epshat);
            traj.f.push_back(stage.attack[idx] ? *stage.attack[idx]
                                               : Vector::Zero(scenario.n_f(i)).eval());
            traj.zeta.push_back(stage.innov[idx].zeta);
            traj.zeta_edges.push_back(stage.innov[idx].zeta_edges);
        }
    };

    record(grid.time(0), state);
    for (std::size_t k = 0; k + 1 < grid.count; ++k) {
        const double t = grid.time(k);
        const double h = grid.dt;
        const Vector k1 = derivative(t, state);
        const Vector k2 = derivative(t + 0.5 * h, state + 0.5 * h * k1);
        const Vector k3 = derivative(t + 0.5 * h, state + 0.5 * h * k2);
        const Vector k4 = derivative(t + h, state + h * k3);
        state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double t_next = grid.time(k + 1);
        if (!state.allFinite() || state.cwiseAbs().maxCoeff() > options.divergence_norm) {
            std::ostringstream os;
            os << "simulation diverged at t=" << t_next << " (state norm above "
               << options.divergence_norm << ")";
            throw DivergenceError(os.str(), t_next);
        }
        record(t_next, state);
    }
    return result;
}

}  // namespace attdet

#include "attdet/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace attdet {

namespace {

std::string node_tag(std::size_t i) {
    return "nodes[" + std::to_string(i + 1) + "]";
}

std::string edge_tag(std::size_t e, const LinkModel& link) {
    std::ostringstream os;
    os << "edges[" << e + 1 << "] (" << link.source + 1 << "->" << link.target + 1 << ")";
    return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error([&violations] {
          std::ostringstream os;
          os << "scenario validation failed with " << violations.size() << " violation(s):";
          for (const auto& v : violations) os << "\n  " << v.where << ": " << v.what;
          return os.str();
      }()),
      violations_(std::move(violations)) {}

std::pair<Matrix, Matrix> eval_plant(const PlantModel& model, double t) {
    if (!(t >= 0.0) || t > model.horizon) {
        std::ostringstream os;
        os << "plant evaluation time " << t << " outside [0, " << model.horizon << "]";
        throw DomainError(os.str());
    }
    return {model.a.eval(t), model.b.eval(t)};
}

TrackerSpec build_tracker(double beta, double g, Eigen::Index n_f) {
    if (!(beta > 0.0)) throw ParameterError("tracker beta must be positive");
    if (!(g > 0.0)) throw ParameterError("tracker gain g must be positive");
    if (n_f < 1) throw ParameterError("tracker input dimension n_f must be at least 1");

    TrackerSpec spec;
    spec.n_f = n_f;
    spec.beta = beta;
    spec.g = g;
    spec.omega = Matrix::Zero(2 * n_f, 2 * n_f);
    spec.omega.topRightCorner(n_f, n_f) = Matrix::Identity(n_f, n_f);
    spec.omega.bottomRightCorner(n_f, n_f) = -2.0 * beta * Matrix::Identity(n_f, n_f);
    spec.gamma_in = Matrix::Zero(2 * n_f, n_f);
    spec.gamma_in.bottomRows(n_f) = -g * Matrix::Identity(n_f, n_f);
    spec.upsilon = Matrix::Zero(n_f, 2 * n_f);
    spec.upsilon.leftCols(n_f) = Matrix::Identity(n_f, n_f);
    spec.f_inject = Matrix(0, n_f);  // set by the scenario
    return spec;
}

Topology Topology::build(int node_count, std::vector<LinkModel> edges) {
    Topology topology;
    topology.node_count = node_count;
    topology.edges = std::move(edges);
    topology.in_edges.assign(static_cast<std::size_t>(node_count), {});
    for (std::size_t e = 0; e < topology.edges.size(); ++e) {
        const auto& link = topology.edges[e];
        if (link.target >= 0 && link.target < node_count) {
            topology.in_edges[static_cast<std::size_t>(link.target)].push_back(e);
        }
    }
    return topology;
}

double ScenarioConfig::riccati_substep() const {
    if (design.substep > 0.0) return design.substep;
    return std::min(1e-3, design_grid_dt() / 10.0);
}

namespace {

void check_matrix_dims(std::vector<Violation>& out, const std::string& where,
                       const std::string& name, const Matrix& m, Eigen::Index rows,
                       Eigen::Index cols) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << name << " is " << m.rows() << "x" << m.cols() << ", expected " << rows << "x"
           << cols;
        out.push_back({where, os.str()});
    }
}

void check_spd(std::vector<Violation>& out, const std::string& where, const std::string& name,
               const Matrix& m) {
    if (!is_symmetric(m, 1e-9)) {
        out.push_back({where, name + " is not symmetric"});
    } else if (min_eigenvalue(m) <= 1e-12) {
        out.push_back({where, name + " is not positive definite"});
    }
}

void check_signal(std::vector<Violation>& out, const std::string& where, const std::string& name,
                  const VectorSignal& signal, Eigen::Index dim, bool require_l2) {
    if (signal.dim() != dim) {
        std::ostringstream os;
        os << name << " has " << signal.dim() << " component(s), expected " << dim;
        out.push_back({where, os.str()});
        return;
    }
    if (require_l2 && !signal.is_l2()) {
        out.push_back({where, name + " is not square-integrable (needs a finite window or a "
                              "positive decay rate; bias_step is attack-only)"});
    }
    for (const auto& c : signal.components) {
        if (c.kind == SignalKind::WindowedNoise && !(c.bucket > 0.0)) {
            out.push_back({where, name + " windowed_noise bucket width must be positive"});
            break;
        }
    }
}

}  // namespace

std::vector<Violation> validate_scenario(const ScenarioConfig& config) {
    std::vector<Violation> out;
    const Eigen::Index n = config.plant.n;
    const Eigen::Index m = config.plant.m;

    if (n < 1) out.push_back({"plant", "state dimension n must be at least 1"});
    if (m < 0) out.push_back({"plant", "disturbance dimension m must be nonnegative"});
    if (config.plant.a.rows() != n || config.plant.a.cols() != n) {
        out.push_back({"plant", "A must be n x n"});
    }
    if (config.plant.b.rows() != n || config.plant.b.cols() != m) {
        out.push_back({"plant", "B must be n x m"});
    }
    if (config.plant.x0.size() != n) out.push_back({"plant", "x0 must have length n"});
    if (!(config.sim.horizon > 0.0)) out.push_back({"sim", "horizon must be positive"});
    if (!(config.sim.step > 0.0)) out.push_back({"sim", "step must be positive"});
    if (!(config.design.gamma > 0.0)) out.push_back({"design", "gamma must be positive"});
    if (config.design.grid_dt < 0.0) out.push_back({"design", "grid_dt must be nonnegative"});
    if (config.design.substep < 0.0) out.push_back({"design", "substep must be nonnegative"});
    if (config.nodes.empty()) out.push_back({"nodes", "at least one node is required"});

    // Edges first: node checks need in-degrees for baseline gain shapes.
    const int node_count = static_cast<int>(config.nodes.size());
    for (std::size_t e = 0; e < config.edges.size(); ++e) {
        const auto& link = config.edges[e];
        const std::string where = edge_tag(e, link);
        if (link.source < 0 || link.source >= node_count) {
            out.push_back({where, "source node out of range"});
            continue;
        }
        if (link.target < 0 || link.target >= node_count) {
            out.push_back({where, "target node out of range"});
            continue;
        }
        if (link.source == link.target) {
            out.push_back({where, "self-loops are not allowed"});
            continue;
        }
        for (std::size_t prev = 0; prev < e; ++prev) {
            if (config.edges[prev].source == link.source &&
                config.edges[prev].target == link.target) {
                out.push_back({where, "duplicate link between the same node pair"});
                break;
            }
        }
        check_matrix_dims(out, where, "W", link.w, link.p, n);
        if (link.w.size() > 0 && link.w.cwiseAbs().maxCoeff() == 0.0) {
            out.push_back({where, "W must be nonzero"});
        }
        check_matrix_dims(out, where, "H", link.h, link.p, link.m_v);
        check_matrix_dims(out, where, "Z", link.z, link.p, link.p);
        if (link.z.rows() == link.p && link.z.cols() == link.p) {
            check_spd(out, where, "Z", link.z);
        }
        if (e < config.v_edges.size()) {
            check_signal(out, where, "link noise", config.v_edges[e], link.m_v, true);
        }
    }
    if (config.v_edges.size() != config.edges.size()) {
        out.push_back({"disturbances", "v_edges must have one channel per edge"});
    }

    Topology topology = Topology::build(node_count, config.edges);

    for (std::size_t i = 0; i < config.nodes.size(); ++i) {
        const auto& node = config.nodes[i];
        const std::string where = node_tag(i);
        const Eigen::Index p = node.sensor.p;
        const Eigen::Index n_f = node.tracker.n_f;

        if (p < 1) out.push_back({where, "measurement dimension p must be at least 1"});
        if (node.sensor.c.rows() != p || node.sensor.c.cols() != n) {
            out.push_back({where, "C must be p x n"});
        }
        if (node.sensor.d.rows() != p || node.sensor.d.cols() != node.sensor.m_v) {
            out.push_back({where, "D must be p x m_i"});
        }
        if (node.xi.size() != n) out.push_back({where, "xi must have length n"});

        if (n_f < 1) {
            out.push_back({where, "tracker n_f must be at least 1"});
        } else {
            if (!(node.tracker.beta > 0.0)) out.push_back({where, "tracker beta must be positive"});
            if (!(node.tracker.g > 0.0)) out.push_back({where, "tracker g must be positive"});
            check_matrix_dims(out, where, "tracker Omega", node.tracker.omega, 2 * n_f, 2 * n_f);
            check_matrix_dims(out, where, "tracker Gamma", node.tracker.gamma_in, 2 * n_f, n_f);
            check_matrix_dims(out, where, "tracker Upsilon", node.tracker.upsilon, n_f, 2 * n_f);
            check_matrix_dims(out, where, "F", node.tracker.f_inject, n, n_f);
            check_matrix_dims(out, where, "R", node.weights.r, n, n);
            check_matrix_dims(out, where, "R_check", node.weights.r_check, 2 * n_f, 2 * n_f);
            check_matrix_dims(out, where, "X", node.weights.x, n, n);
            check_matrix_dims(out, where, "X_check", node.weights.x_check, 2 * n_f, 2 * n_f);
            if (node.weights.r.rows() == n) check_spd(out, where, "R", node.weights.r);
            if (node.weights.r_check.rows() == 2 * n_f) {
                check_spd(out, where, "R_check", node.weights.r_check);
            }
            if (node.weights.x.rows() == n) check_spd(out, where, "X", node.weights.x);
            if (node.weights.x_check.rows() == 2 * n_f) {
                check_spd(out, where, "X_check", node.weights.x_check);
            }
            if (node.attack) {
                check_signal(out, where, "attack", *node.attack, n_f, false);
            }
        }

        if (i < config.v_nodes.size()) {
            check_signal(out, where, "measurement noise", config.v_nodes[i], node.sensor.m_v,
                         true);
        }

        if (node.baseline_gains && i < static_cast<std::size_t>(node_count)) {
            const auto& gains = *node.baseline_gains;
            check_matrix_dims(out, where, "baseline L", gains.l, n, p);
            const auto& in = topology.in_edges[i];
            if (gains.k.size() != in.size()) {
                out.push_back({where, "baseline K must have one block per in-edge"});
            } else {
                for (std::size_t k = 0; k < in.size(); ++k) {
                    check_matrix_dims(out, where, "baseline K[" + std::to_string(k) + "]",
                                      gains.k[k], n, topology.edges[in[k]].p);
                }
            }
        }
    }
    if (config.v_nodes.size() != config.nodes.size()) {
        out.push_back({"disturbances", "v_nodes must have one channel per node"});
    }
    check_signal(out, "disturbances", "w", config.w, m, true);

    if (!out.empty()) return out;

    // E_i(t) > 0 on the synthesis grid: the measurement block D_i D_i' must be
    // PD at every sample time (U_ij blocks are PD whenever Z is, checked above).
    const TimeGrid grid = TimeGrid::over(0.0, config.sim.horizon, config.design_grid_dt());
    for (std::size_t i = 0; i < config.nodes.size(); ++i) {
        const auto& sensor = config.nodes[i].sensor;
        const std::size_t samples = sensor.d.is_constant() ? 1 : grid.count;
        for (std::size_t k = 0; k < samples; ++k) {
            const double t = grid.time(k);
            const Matrix d = sensor.d.eval(t);
            if (min_eigenvalue(d * d.transpose()) <= 1e-12) {
                std::ostringstream os;
                os << "E block D*D' is not positive definite at t=" << t;
                out.push_back({node_tag(i), os.str()});
                break;
            }
        }
    }
    return out;
}

ValidatedScenario::ValidatedScenario(ScenarioConfig config) : config_(std::move(config)) {
    auto violations = validate_scenario(config_);
    if (!violations.empty()) throw ValidationError(std::move(violations));
    auto edges = config_.edges;
    for (auto& link : edges) link.z_sqrt = symmetric_sqrt(link.z);
    topology_ = Topology::build(static_cast<int>(config_.nodes.size()), std::move(edges));
}

Eigen::Index ValidatedScenario::stacked_meas_dim(int i) const {
    Eigen::Index dim = node(i).sensor.p;
    for (std::size_t e : in_edges(i)) dim += edge(e).p;
    return dim;
}

}  // namespace attdet

#include "attdet/synthesis.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace attdet;
using namespace attdet::testing;

namespace {

RiccatiProblem scalar_problem(double a, double b, double c, double e, double r, double gamma,
                              double x) {
    RiccatiProblem problem;
    problem.a = [a](double) { return mat({{a}}); };
    problem.b = [b](double) { return mat({{b}}); };
    problem.c = [c](double) { return mat({{c}}); };
    problem.e = [e](double) { return mat({{e}}); };
    problem.weight = mat({{r}});
    problem.init_weight = mat({{x}});
    problem.gamma = gamma;
    return problem;
}

/// Closed form of dy/dt = -0.5 y^2 + 1, y(0) = 1 (fixed point sqrt(2)).
double logistic_riccati(double t) {
    const double root = std::sqrt(2.0);
    const double u0 = (1.0 - root) / (1.0 + root);
    const double u = u0 * std::exp(-root * t);
    return root * (1.0 + u) / (1.0 - u);
}

/// Naive entry-wise assembly of Phi with explicit inverses; the independent
/// oracle for build_coupling and check_lmi_global.
Matrix brute_force_phi(const Topology& topology, Eigen::Index n) {
    const Eigen::Index dim = topology.node_count * n;
    Matrix phi = Matrix::Zero(dim, dim);
    for (int i = 0; i < topology.node_count; ++i) {
        Matrix delta = Matrix::Zero(n, n);
        for (const auto& link : topology.edges) {
            if (link.target != i) continue;
            const Matrix u = link.h * link.h.transpose() + link.z;
            const Matrix u_inv = u.inverse();
            delta += link.w.transpose() * u_inv * link.z * u_inv * link.w;
            phi.block(i * n, link.source * n, n, n) =
                -(link.w.transpose() * u_inv * link.w);
        }
        phi.block(i * n, i * n, n, n) = delta;
    }
    return phi;
}

double brute_force_lmi_min_eig(const Topology& topology, Eigen::Index n, const Matrix& r_stack,
                               double gamma) {
    const Matrix phi = brute_force_phi(topology, n);
    Matrix delta_stack = Matrix::Zero(phi.rows(), phi.cols());
    for (int i = 0; i < topology.node_count; ++i) {
        delta_stack.block(i * n, i * n, n, n) = phi.block(i * n, i * n, n, n);
    }
    const Matrix m = r_stack + gamma * gamma * (phi + phi.transpose() - delta_stack) -
                     Matrix::Identity(phi.rows(), phi.cols());
    return min_eigenvalue(m);
}

}  // namespace

// ---------------------------------------------------------------------------
// Riccati integration against closed forms

TEST_CASE("scalar Riccati converges to sqrt(2)") {
    const auto problem = scalar_problem(0.0, 1.0, 1.0, 1.0, 0.5, 1.0, 1.0);
    const TimeGrid grid = TimeGrid::over(0.0, 10.0, 1e-3);
    const RiccatiSolution sol = integrate_riccati(problem, grid, 1e-3);

    CHECK(sol.y.back()(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
    // transient matches the closed form, not just the fixed point
    const std::size_t k1 = 1000;  // t = 1
    CHECK(sol.y[k1](0, 0) == doctest::Approx(logistic_riccati(1.0)).epsilon(1e-9));
    CHECK(sol.alpha1 > 0.0);
    CHECK(sol.alpha2 < 2.0);
}

TEST_CASE("scalar Riccati reproduces y = 1/(1+t)") {
    const auto problem = scalar_problem(0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0);
    const TimeGrid grid = TimeGrid::over(0.0, 1.0, 1e-3);
    const RiccatiSolution sol = integrate_riccati(problem, grid, 1e-3);
    CHECK(sol.y.back()(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(sol.y[500](0, 0) == doctest::Approx(1.0 / 1.5).epsilon(1e-9));
}

TEST_CASE("finite-escape Riccati raises a boundedness error before t = 1") {
    const auto problem = scalar_problem(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0);
    const TimeGrid grid = TimeGrid::over(0.0, 2.0, 1e-3);
    try {
        integrate_riccati(problem, grid, 1e-3);
        FAIL("expected RiccatiUnboundedError");
    } catch (const RiccatiUnboundedError& err) {
        CHECK(err.failure_time() <= 1.0);
        CHECK(err.failure_time() > 0.9);
    }
}

TEST_CASE("integrate_riccati enforces its preconditions") {
    const auto problem = scalar_problem(0.0, 1.0, 1.0, 1.0, 0.5, 1.0, 1.0);
    const TimeGrid grid = TimeGrid::over(0.0, 1.0, 1e-2);
    CHECK_THROWS_AS(integrate_riccati(problem, grid, 0.0), ParameterError);

    auto bad = problem;
    bad.init_weight = mat({{-1.0}});
    CHECK_THROWS_AS(integrate_riccati(bad, grid, 1e-3), ParameterError);
}

TEST_CASE("Riccati solutions stay symmetric and PD on a 3-node design") {
    const ValidatedScenario scenario{ring3_scenario(true)};
    const AugmentedNode aug(scenario, 0);
    RiccatiProblem problem = augmented_riccati_problem(aug);
    const TimeGrid grid = TimeGrid::over(0.0, 2.0, 1e-2);
    const RiccatiSolution sol = integrate_riccati(problem, grid, 1e-3);
    for (const auto& y : sol.y) {
        CHECK((y - y.transpose()).norm() == 0.0);
        CHECK(min_eigenvalue(y) > 0.0);
    }
    CHECK(sol.alpha1 > 0.0);
    CHECK(sol.alpha2 > sol.alpha1);
}

TEST_CASE("Riccati residual: centered differences match the RHS") {
    const ValidatedScenario scenario{ring3_scenario(true)};
    const double gamma = scenario.config().design.gamma;
    for (int node = 0; node < 3; ++node) {
        const AugmentedNode aug(scenario, node);
        RiccatiProblem problem = augmented_riccati_problem(aug);
        const TimeGrid grid = TimeGrid::over(0.0, 2.0, 1e-3);
        const RiccatiSolution sol = integrate_riccati(problem, grid, 1e-4);

        const Matrix weight = aug.weight();
        double worst = 0.0;
        for (std::size_t k = 1; k + 1 < sol.grid.count; ++k) {
            const double t = sol.grid.time(k);
            const Matrix a = aug.a(t);
            const Matrix c = aug.c(t);
            const Matrix e = aug.e(t);
            const Matrix s = c.transpose() * e.llt().solve(c) - weight / (gamma * gamma);
            const Matrix b = aug.b(t);
            const Matrix rhs = a * sol.y[k] + sol.y[k] * a.transpose() -
                               sol.y[k] * s * sol.y[k] + b * b.transpose();
            const Matrix fd = (sol.y[k + 1] - sol.y[k - 1]) / (2.0 * sol.grid.dt);
            worst = std::max(worst, (fd - rhs).norm() / rhs.norm());
        }
        CHECK(worst < 1e-4);
    }
}

// ---------------------------------------------------------------------------
// coupling and LMI

TEST_CASE("build_coupling on a single isolated node is zero") {
    const ValidatedScenario scenario{minimal_scenario()};
    const CouplingData coupling = build_coupling(scenario.topology(), scenario.n());
    CHECK(coupling.phi == Matrix::Zero(1, 1));
    CHECK(coupling.delta[0] == Matrix::Zero(1, 1));
    CHECK(coupling.u.empty());
}

TEST_CASE("build_coupling matches the hand-derived two-node cases") {
    {
        const ValidatedScenario scenario{two_node_scenario(1.0, 1.0, 1.0)};
        const CouplingData coupling = build_coupling(scenario.topology(), 1);
        CHECK(coupling.u[0](0, 0) == doctest::Approx(2.0));
        CHECK(coupling.delta[0](0, 0) == doctest::Approx(0.25));
        CHECK(coupling.delta[1](0, 0) == doctest::Approx(0.25));
        CHECK(coupling.phi(0, 0) == doctest::Approx(0.25));
        CHECK(coupling.phi(0, 1) == doctest::Approx(-0.5));
        CHECK(coupling.phi(1, 0) == doctest::Approx(-0.5));
        CHECK(coupling.phi(1, 1) == doctest::Approx(0.25));
    }
    {
        const ValidatedScenario scenario{two_node_scenario(1.0, 0.0, 1.0)};
        const CouplingData coupling = build_coupling(scenario.topology(), 1);
        CHECK(coupling.u[0](0, 0) == doctest::Approx(1.0));
        CHECK(coupling.delta[0](0, 0) == doctest::Approx(1.0));
        CHECK(coupling.phi(0, 1) == doctest::Approx(-1.0));
    }
}

TEST_CASE("check_lmi_global simple cases") {
    // no edges, R = 2I: M = 2I - I, min eig 1
    const ValidatedScenario single{minimal_scenario()};
    const CouplingData none = build_coupling(single.topology(), 1);
    const FeasibilityReport free_report = check_lmi_global(2.0 * Matrix::Identity(1, 1), 3.0, none);
    CHECK(free_report.min_eigenvalue == doctest::Approx(1.0));
    CHECK(free_report.feasible);

    // boundary: R = I exactly is infeasible under the strict inequality
    const FeasibilityReport boundary = check_lmi_global(Matrix::Identity(1, 1), 1.0, none);
    CHECK(boundary.min_eigenvalue == doctest::Approx(0.0));
    CHECK_FALSE(boundary.feasible);

    // 2-node W=H=Z=1: Phi + Phi' - Delta has min eig -3/4, so rI is feasible
    // iff r - 0.75 gamma^2 > 1
    const ValidatedScenario pair{two_node_scenario(1.0, 1.0, 1.0)};
    const CouplingData coupling = build_coupling(pair.topology(), 1);
    const Matrix sym = coupling.phi + coupling.phi.transpose() -
                       Matrix::Identity(2, 2) * coupling.delta[0](0, 0);
    CHECK(min_eigenvalue(sym) == doctest::Approx(-0.75));

    const Matrix r2 = 2.0 * Matrix::Identity(2, 2);
    CHECK(check_lmi_global(r2, 1.0, coupling).feasible);          // 2 - 0.75 - 1 > 0
    CHECK_FALSE(check_lmi_global(r2, 1.2, coupling).feasible);    // 2 - 1.08 - 1 < 0
    const double boundary_gamma = std::sqrt(4.0 / 3.0);
    CHECK_FALSE(check_lmi_global(r2, boundary_gamma, coupling).feasible);
}

TEST_CASE("check_lmi_local") {
    CHECK(check_lmi_local(2.0 * Matrix::Identity(3, 3)));
    CHECK_FALSE(check_lmi_local(Matrix::Identity(3, 3)));
    Matrix mixed = Matrix::Zero(2, 2);
    mixed(0, 0) = 3.0;
    mixed(1, 1) = 0.5;
    CHECK_FALSE(check_lmi_local(mixed));
    Matrix skew = mat({{2.0, 1.0}, {-1.0, 2.0}});
    CHECK_THROWS_AS(check_lmi_local(skew), ParameterError);
}

TEST_CASE("check_lmi_global agrees with the brute-force oracle on random networks") {
    std::mt19937 rng(12345);
    std::uniform_int_distribution<int> node_dist(2, 6);
    std::uniform_int_distribution<int> dim_dist(1, 4);
    std::uniform_real_distribution<double> coeff(-1.5, 1.5);
    std::uniform_real_distribution<double> gamma_dist(0.3, 2.5);
    std::uniform_real_distribution<double> diag_boost(0.1, 2.0);

    for (int trial = 0; trial < 50; ++trial) {
        const int node_count = node_dist(rng);
        const Eigen::Index n = dim_dist(rng);
        std::vector<LinkModel> edges;
        for (int i = 0; i < node_count; ++i) {
            for (int j = 0; j < node_count; ++j) {
                if (i == j || rng() % 3 != 0) continue;
                const Eigen::Index p = dim_dist(rng) % 3 + 1;
                const Eigen::Index mh = dim_dist(rng) % 3 + 1;
                Matrix w(p, n);
                Matrix h(p, mh);
                for (Eigen::Index r = 0; r < p; ++r) {
                    for (Eigen::Index c = 0; c < n; ++c) w(r, c) = coeff(rng);
                    for (Eigen::Index c = 0; c < mh; ++c) h(r, c) = coeff(rng);
                }
                if (w.cwiseAbs().maxCoeff() == 0.0) w(0, 0) = 1.0;
                Matrix root(p, p);
                for (Eigen::Index r = 0; r < p; ++r) {
                    for (Eigen::Index c = 0; c < p; ++c) root(r, c) = coeff(rng);
                }
                const Matrix z = root * root.transpose() +
                                 diag_boost(rng) * Matrix::Identity(p, p);
                edges.push_back(make_edge(j, i, w, h, z));
            }
        }
        const Topology topology = Topology::build(node_count, edges);
        const CouplingData coupling = build_coupling(topology, n);

        Matrix r_stack = Matrix::Zero(node_count * n, node_count * n);
        for (int i = 0; i < node_count; ++i) {
            Matrix root(n, n);
            for (Eigen::Index r = 0; r < n; ++r) {
                for (Eigen::Index c = 0; c < n; ++c) root(r, c) = coeff(rng);
            }
            r_stack.block(i * n, i * n, n, n) =
                root * root.transpose() + diag_boost(rng) * Matrix::Identity(n, n);
        }
        const double gamma = gamma_dist(rng);

        const FeasibilityReport report = check_lmi_global(r_stack, gamma, coupling);
        const double expected = brute_force_lmi_min_eig(topology, n, r_stack, gamma);
        CHECK(report.min_eigenvalue == doctest::Approx(expected).epsilon(1e-9));
        CHECK(report.feasible == (expected > 1e-9));

        // sparsity: off-diagonal blocks only along in-edges
        for (int i = 0; i < node_count; ++i) {
            for (int j = 0; j < node_count; ++j) {
                if (coupling.block_allowed(i, j, topology)) continue;
                CHECK(coupling.phi.block(i * n, j * n, n, n).cwiseAbs().maxCoeff() == 0.0);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// augmented assembly

TEST_CASE("assemble_augmented places the tracker blocks") {
    ScenarioConfig config = minimal_scenario();
    config.plant.a = TimeVaryingMatrix::constant(mat({{-0.7}}));
    config.nodes[0].tracker = build_tracker(0.5, 1.0, 1);
    config.nodes[0].tracker.f_inject = mat({{1.0}});
    const ValidatedScenario scenario{std::move(config)};
    const AugmentedNode aug(scenario, 0);

    CHECK(aug.a(0.0) == mat({{-0.7, -1.0, 0.0}, {0.0, 0.0, 1.0}, {0.0, 0.0, -1.0}}));
    CHECK(aug.b(0.0) == mat({{1.0, 1.0}, {0.0, 0.0}, {0.0, -1.0}}));
    CHECK(aug.c(0.0) == mat({{1.0, 0.0, 0.0}}));
    CHECK(aug.e(0.0) == mat({{1.0}}));
    CHECK(aug.weight() == mat({{1.0, 0.0, 0.0}, {0.0, 2.0, 0.0}, {0.0, 0.0, 2.0}}));
}

TEST_CASE("E is block diagonal diag(DD', U_1, ..., U_q)") {
    // one receiving node with two in-edges
    ScenarioConfig config;
    config.plant.n = 2;
    config.plant.m = 1;
    config.plant.a = TimeVaryingMatrix::constant(Matrix::Zero(2, 2));
    config.plant.b = TimeVaryingMatrix::constant(mat({{1.0}, {0.0}}));
    config.plant.x0 = Vector::Zero(2);
    for (int i = 0; i < 3; ++i) {
        config.nodes.push_back(make_node(2, mat({{1.0, 0.0}}), mat({{0.4}})));
    }
    config.edges.push_back(
        make_edge(1, 0, mat({{1.0, 2.0}}), mat({{0.3}}), mat({{2.0}})));
    config.edges.push_back(
        make_edge(2, 0, mat({{0.0, 1.0}, {1.0, 0.0}}), mat({{0.1}, {0.2}}),
                  mat({{1.5, 0.2}, {0.2, 1.0}})));
    finish(config);
    const ValidatedScenario scenario{std::move(config)};
    const AugmentedNode aug(scenario, 0);

    const Matrix d = aug.d(0.0);
    const Matrix e = aug.e(0.0);
    CHECK((e - d * d.transpose()).cwiseAbs().maxCoeff() == 0.0);

    Matrix expected = Matrix::Zero(4, 4);
    expected(0, 0) = 0.16;
    expected.block(1, 1, 1, 1) = mat({{0.3 * 0.3 + 2.0}});
    const Matrix h2 = mat({{0.1}, {0.2}});
    expected.block(2, 2, 2, 2) = h2 * h2.transpose() + mat({{1.5, 0.2}, {0.2, 1.0}});
    CHECK((e - expected).cwiseAbs().maxCoeff() < 1e-12);

    // a node with no in-edges reduces to the measurement block
    const AugmentedNode leaf(scenario, 1);
    CHECK(leaf.c(0.0) == mat({{1.0, 0.0, 0.0, 0.0}}));
    CHECK(leaf.e(0.0)(0, 0) == doctest::Approx(0.16).epsilon(1e-15));
}

// ---------------------------------------------------------------------------
// gains

TEST_CASE("baseline gain converges to the sqrt(2) fixed point") {
    ScenarioConfig config = minimal_scenario();
    config.nodes[0].weights.r = mat({{0.5}});
    config.design.gamma = 1.0;
    const ValidatedScenario scenario{std::move(config)};
    const TimeGrid grid = TimeGrid::over(0.0, 10.0, 1e-2);
    const GainSchedule schedule = design_baseline_observer(scenario, 0, grid, 1e-3);
    CHECK(schedule.at(10.0)(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("zero output map gives zero gains") {
    ScenarioConfig config = minimal_scenario();
    config.nodes[0].sensor.c = TimeVaryingMatrix::constant(mat({{0.0}}));
    const ValidatedScenario scenario{std::move(config)};
    const AugmentedNode aug(scenario, 0);
    RiccatiSolution sol;
    sol.grid = TimeGrid::over(0.0, 0.2, 0.1);
    sol.y.assign(sol.grid.count, Matrix::Identity(3, 3));
    const GainSchedule schedule = gains_from_solution(sol, aug);
    for (const auto& g : schedule.samples()) CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gain partition round trip is bit exact") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);
    GainPartition partition;
    partition.row_blocks = {3, 4};
    partition.col_blocks = {2, 1, 3};
    Matrix stacked(partition.rows(), partition.cols());
    for (Eigen::Index r = 0; r < stacked.rows(); ++r) {
        for (Eigen::Index c = 0; c < stacked.cols(); ++c) stacked(r, c) = coeff(rng);
    }
    const GainSchedule schedule = GainSchedule::constant(stacked, partition);

    std::vector<std::vector<Matrix>> blocks(partition.row_blocks.size());
    for (std::size_t rb = 0; rb < partition.row_blocks.size(); ++rb) {
        for (std::size_t cb = 0; cb < partition.col_blocks.size(); ++cb) {
            blocks[rb].push_back(schedule.block(stacked, rb, cb));
        }
    }
    const Matrix rebuilt = GainSchedule::reassemble(blocks);
    CHECK(rebuilt == stacked);
}

TEST_CASE("user-supplied baseline gains pass through unchanged") {
    ScenarioConfig config = two_node_scenario();
    BaselineGainsConfig gains;
    gains.l = mat({{0.9}});
    gains.k = {mat({{0.2}})};
    config.nodes[0].baseline_gains = gains;
    const ValidatedScenario scenario{std::move(config)};
    const TimeGrid grid = TimeGrid::over(0.0, 1.0, 1e-2);
    const GainSchedule schedule = design_baseline_observer(scenario, 0, grid, 1e-3);
    CHECK(schedule.samples().size() == 1);
    CHECK(schedule.at(0.37) == mat({{0.9, 0.2}}));
    CHECK(schedule.frozen() == mat({{0.9, 0.2}}));
}

TEST_CASE("identical decoupled nodes get identical schedules") {
    ScenarioConfig config;
    config.plant.n = 1;
    config.plant.m = 1;
    config.plant.a = TimeVaryingMatrix::constant(mat({{-0.2}}));
    config.plant.b = TimeVaryingMatrix::constant(mat({{1.0}}));
    config.plant.x0 = vec({0.0});
    config.nodes.push_back(make_node(1, mat({{1.0}}), mat({{1.0}})));
    config.nodes.push_back(make_node(1, mat({{1.0}}), mat({{1.0}})));
    finish(config);
    const ValidatedScenario scenario{std::move(config)};
    const TimeGrid grid = TimeGrid::over(0.0, 2.0, 1e-2);
    const GainSchedule s0 = design_baseline_observer(scenario, 0, grid, 1e-3);
    const GainSchedule s1 = design_baseline_observer(scenario, 1, grid, 1e-3);
    REQUIRE(s0.samples().size() == s1.samples().size());
    for (std::size_t k = 0; k < s0.samples().size(); ++k) {
        CHECK(s0.samples()[k] == s1.samples()[k]);
    }
}

TEST_CASE("gain schedules interpolate linearly and hold their ends") {
    GainPartition partition;
    partition.row_blocks = {1};
    partition.col_blocks = {1};
    const TimeGrid grid{0.0, 1.0, 3};
    const GainSchedule schedule(grid, {mat({{0.0}}), mat({{2.0}}), mat({{1.0}})}, partition);
    CHECK(schedule.at(0.5)(0, 0) == doctest::Approx(1.0));
    CHECK(schedule.at(1.25)(0, 0) == doctest::Approx(1.75));
    CHECK(schedule.at(-1.0)(0, 0) == 0.0);
    CHECK(schedule.at(9.0)(0, 0) == 1.0);
    CHECK(schedule.frozen()(0, 0) == 1.0);
}

// ---------------------------------------------------------------------------
// end-to-end design and sweep

TEST_CASE("design_detectors succeeds on the ring scenario") {
    const ValidatedScenario scenario{ring3_scenario()};
    const DesignResult design = design_detectors(scenario, {}, 2.0);
    CHECK(design.lmi.feasible);
    CHECK(design.ok());
    REQUIRE(design.nodes.size() == 3);
    for (const auto& node : design.nodes) {
        CHECK(node.riccati.alpha1 > 0.0);
        CHECK(node.detector.partition().row_blocks.size() == 2);
        CHECK(node.baseline.partition().row_blocks.size() == 1);
    }
}

TEST_CASE("sweep_gamma matches the hand-derived feasibility boundary") {
    // no-edge scenario: every gamma row feasible with R = 2I
    ScenarioConfig lone = minimal_scenario();
    lone.nodes[0].weights.r = mat({{2.0}});
    lone.sim.horizon = 1.0;
    const ValidatedScenario single{std::move(lone)};
    for (const auto& row : sweep_gamma(single, {0.5, 1.0, 2.0})) CHECK(row.lmi_feasible);

    // 2-node case, R = 2I: feasible iff gamma^2 < 4/3
    ScenarioConfig pair_config = two_node_scenario(1.0, 1.0, 1.0, 2.0);
    pair_config.sim.horizon = 1.0;
    const ValidatedScenario pair{std::move(pair_config)};
    const std::vector<double> gammas = {0.5, 1.0, 1.1, 1.2, 2.0};
    const auto rows = sweep_gamma(pair, gammas);
    REQUIRE(rows.size() == gammas.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const bool expected = gammas[k] * gammas[k] < 4.0 / 3.0;
        CHECK(rows[k].lmi_feasible == expected);
    }

    CHECK(sweep_gamma(pair, {}).empty());
}

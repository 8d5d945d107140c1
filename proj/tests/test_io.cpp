#include "attdet/scenario_io.hpp"

#include "attdet/cli.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace attdet;
using namespace attdet::testing;

namespace fs = std::filesystem;

namespace {

const char* kMinimalText = R"({
  "plant": {"n": 1, "m": 1, "A": [[0]], "B": [[1]]},
  "nodes": [{"C": [[1]], "D": [[1]]}],
  "sim": {"horizon": 5.0, "step": 0.001, "seed": 3}
})";

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

fs::path scenario_path(const std::string& name) {
    return fs::path(ATTDET_SCENARIO_DIR) / name;
}

}  // namespace

TEST_CASE("parse_scenario_text applies the documented defaults") {
    const ScenarioConfig config = parse_scenario_text(kMinimalText);
    CHECK(config.plant.n == 1);
    CHECK(config.plant.x0 == Vector::Zero(1));
    CHECK(config.nodes[0].weights.r == Matrix::Identity(1, 1));
    CHECK(config.nodes[0].weights.r_check == 2.0 * Matrix::Identity(2, 2));
    CHECK(config.nodes[0].weights.x == Matrix::Identity(1, 1));
    CHECK(config.nodes[0].tracker.beta == 0.5);
    CHECK(config.nodes[0].tracker.g == 1.0);
    CHECK(config.nodes[0].tracker.f_inject == Matrix::Identity(1, 1));
    CHECK(config.nodes[0].xi == Vector::Zero(1));
    CHECK(config.design.gamma == 1.0);
    CHECK(config.w.is_zero());
    CHECK_FALSE(config.nodes[0].attack.has_value());
    CHECK(validate_scenario(config).empty());
}

TEST_CASE("schema errors carry the key path") {
    // row-length mismatch in a matrix literal
    const char* mismatch = R"({
      "plant": {"n": 2, "m": 1, "A": [[0, 1], [1]], "B": [[1], [0]]},
      "nodes": [{"C": [[1, 0]], "D": [[1]]}]
    })";
    CHECK_THROWS_WITH_AS(parse_scenario_text(mismatch),
                         doctest::Contains("plant.A"), ConfigError);

    const char* unknown = R"({
      "plant": {"n": 1, "m": 1, "A": [[0]], "B": [[1]], "bogus": 3},
      "nodes": [{"C": [[1]], "D": [[1]]}]
    })";
    CHECK_THROWS_WITH_AS(parse_scenario_text(unknown),
                         doctest::Contains("bogus"), ConfigError);

    const char* bad_kind = R"({
      "plant": {"n": 1, "m": 1, "A": [[0]], "B": [[1]]},
      "nodes": [{"C": [[1]], "D": [[1]], "attack": {"kind": "ramp"}}]
    })";
    CHECK_THROWS_AS(parse_scenario_text(bad_kind), ConfigError);

    CHECK_THROWS_AS(parse_scenario_text("{ not json"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(fs::path("/nonexistent/scenario.json")), ConfigError);
}

TEST_CASE("serialize-parse round trip is stable") {
    for (const char* name : {"ring3.json", "minimal.json", "timevarying3.json"}) {
        const ScenarioConfig parsed = parse_scenario(scenario_path(name));
        const std::string text = serialize_scenario(parsed);
        const ScenarioConfig reparsed = parse_scenario_text(text);
        CHECK(scenario_equal(parsed, reparsed));
        CHECK(validate_scenario(parsed).empty());
    }
}

TEST_CASE("tagged time-varying entries survive the round trip") {
    const ScenarioConfig config = parse_scenario(scenario_path("timevarying3.json"));
    const Matrix a0 = config.plant.a.eval(0.0);
    CHECK(a0(1, 0) == doctest::Approx(-1.0));
    const Matrix a1 = config.plant.a.eval(std::asin(1.0));
    CHECK(a1(1, 0) == doctest::Approx(-1.0 + 0.3).epsilon(1e-12));
    CHECK_FALSE(config.plant.a.is_constant());

    const ScenarioConfig reparsed = parse_scenario_text(serialize_scenario(config));
    CHECK(reparsed.plant.a.eval(0.73) == config.plant.a.eval(0.73));
}

TEST_CASE("gain CSV round trip is bit exact") {
    const ValidatedScenario scenario{ring3_scenario()};
    const TimeGrid grid = TimeGrid::over(0.0, 0.5, 1e-2);
    const GainSchedule schedule = design_baseline_observer(scenario, 0, grid, 1e-3);

    const fs::path dir = fresh_dir("attdet_gain_csv");
    write_gain_csv(dir / "g.csv", schedule);
    const GainSchedule loaded = read_gain_csv(dir / "g.csv", schedule.partition());
    REQUIRE(loaded.samples().size() == schedule.samples().size());
    for (std::size_t k = 0; k < loaded.samples().size(); ++k) {
        CHECK(loaded.samples()[k] == schedule.samples()[k]);
    }
    CHECK(loaded.grid().dt == doctest::Approx(schedule.grid().dt).epsilon(1e-15));
}

TEST_CASE("trajectories CSV round trip is bit exact") {
    ScenarioConfig config = parse_scenario(scenario_path("ring3.json"));
    config.sim.horizon = 0.5;
    const ValidatedScenario scenario{config};
    const DesignResult design = design_detectors(scenario);
    REQUIRE(design.ok());
    const SimResult result = simulate(scenario, gain_set(design), {});

    const fs::path dir = fresh_dir("attdet_traj_csv");
    write_trajectories_csv(dir / "trajectories.csv", scenario, result);
    const SimResult loaded = read_trajectories_csv(dir / "trajectories.csv", scenario);
    REQUIRE(loaded.grid.count == result.grid.count);
    for (std::size_t k = 0; k < result.grid.count; ++k) {
        CHECK(loaded.x[k] == result.x[k]);
        for (int i = 0; i < 3; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            CHECK(loaded.nodes[idx].ehat[k] == result.nodes[idx].ehat[k]);
            CHECK(loaded.nodes[idx].zeta[k] == result.nodes[idx].zeta[k]);
        }
    }
}

TEST_CASE("CSV column headers depend only on the scenario structure") {
    ScenarioConfig config = parse_scenario(scenario_path("ring3.json"));
    config.sim.horizon = 0.1;
    ScenarioConfig reseeded = config;
    reseeded.sim.seed = 777;

    const ValidatedScenario s1{config};
    const ValidatedScenario s2{reseeded};
    const DesignResult design = design_detectors(s1);
    REQUIRE(design.ok());
    const fs::path dir = fresh_dir("attdet_headers");
    write_trajectories_csv(dir / "a.csv", s1, simulate(s1, gain_set(design), {}));
    write_trajectories_csv(dir / "b.csv", s2, simulate(s2, gain_set(design), {}));
    std::istringstream a(slurp(dir / "a.csv"));
    std::istringstream b(slurp(dir / "b.csv"));
    std::string header_a;
    std::string header_b;
    std::getline(a, header_a);
    std::getline(b, header_b);
    CHECK(header_a == header_b);
    CHECK(header_a.find("node1.zeta_from3[0]") != std::string::npos);
}

// ---------------------------------------------------------------------------
// CLI workflows

TEST_CASE("cli design + simulate + verify round trip") {
    const fs::path run = fresh_dir("attdet_cli_run");
    const std::string scenario = scenario_path("ring3.json").string();

    const int design_rc = run_cli({"design", "--scenario", scenario, "--out-dir", run.string(),
                                   "--horizon", "6"});
    REQUIRE(design_rc == kExitOk);
    CHECK(fs::exists(run / "feasibility.json"));
    CHECK(fs::exists(run / "scenario.json"));
    CHECK(fs::exists(run / "gains" / "node_1.csv"));
    CHECK(fs::exists(run / "gains" / "node_3_baseline.csv"));

    const int sim_rc = run_cli({"simulate", "--scenario", scenario, "--out-dir", run.string(),
                                "--horizon", "6"});
    REQUIRE(sim_rc == kExitOk);
    CHECK(fs::exists(run / "trajectories.csv"));
    CHECK(fs::exists(run / "metrics.json"));

    const int verify_rc = run_cli({"verify", "--out-dir", run.string()});
    CHECK(verify_rc == kExitOk);
}

TEST_CASE("cli simulate without a design errors with exit 2") {
    const fs::path run = fresh_dir("attdet_cli_nogains");
    const int rc = run_cli({"simulate", "--scenario", scenario_path("ring3.json").string(),
                            "--out-dir", run.string()});
    CHECK(rc == kExitConfig);
}

TEST_CASE("cli design reports infeasibility with exit 1") {
    // two-node chain with R = 2I turns infeasible at gamma = 2
    ScenarioConfig config = two_node_scenario(1.0, 1.0, 1.0, 2.0);
    config.design.gamma = 2.0;
    config.sim.horizon = 1.0;
    const fs::path dir = fresh_dir("attdet_cli_infeasible");
    {
        std::ofstream out(dir / "scenario.json");
        out << serialize_scenario(config);
    }
    const fs::path run = dir / "run";
    const int rc = run_cli({"design", "--scenario", (dir / "scenario.json").string(),
                            "--out-dir", run.string()});
    CHECK(rc == kExitInfeasible);
    const std::string feasibility = slurp(run / "feasibility.json");
    CHECK(feasibility.find("\"feasible\": false") != std::string::npos);
}

TEST_CASE("cli rejects bad configs with exit 2") {
    const fs::path dir = fresh_dir("attdet_cli_badcfg");
    {
        std::ofstream out(dir / "broken.json");
        out << "{\"plant\": {\"n\": 0}}";
    }
    const int rc = run_cli({"design", "--scenario", (dir / "broken.json").string(), "--out-dir",
                            (dir / "run").string()});
    CHECK(rc == kExitConfig);
}

TEST_CASE("cli sweep writes the gamma table") {
    const fs::path run = fresh_dir("attdet_cli_sweep");
    const int rc = run_cli({"sweep", "--scenario", scenario_path("minimal.json").string(),
                            "--out-dir", run.string(), "--gammas", "0.8,1.0,1.5",
                            "--horizon", "2"});
    REQUIRE(rc == kExitOk);
    const std::string table = slurp(run / "gamma_sweep.csv");
    CHECK(table.find("gamma,lmi_min_eigenvalue,lmi_feasible") == 0);
    CHECK(table.find("\n0.8") != std::string::npos);
}

TEST_CASE("identical design + simulate runs are byte identical") {
    const std::string scenario = scenario_path("ring3.json").string();
    const fs::path run_a = fresh_dir("attdet_det_a");
    const fs::path run_b = fresh_dir("attdet_det_b");
    for (const auto& run : {run_a, run_b}) {
        REQUIRE(run_cli({"design", "--scenario", scenario, "--out-dir", run.string(),
                         "--horizon", "3"}) == kExitOk);
        REQUIRE(run_cli({"simulate", "--scenario", scenario, "--out-dir", run.string(),
                         "--horizon", "3"}) == kExitOk);
    }
    for (const char* name :
         {"scenario.json", "feasibility.json", "trajectories.csv", "metrics.json",
          "gains/node_1.csv", "gains/node_2.csv", "gains/node_3.csv",
          "gains/node_1_baseline.csv"}) {
        CHECK(slurp(run_a / name) == slurp(run_b / name));
    }
}

#include "attdet/cli.hpp"

#include "attdet/metrics.hpp"
#include "attdet/scenario_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace attdet {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
    std::string scenario_path;
    std::string out_dir;
    std::optional<double> gamma;
    std::optional<double> horizon;
    std::optional<double> dt;
    std::optional<std::uint64_t> seed;
};

bool parse_double(const std::string& text, std::optional<double>& out) {
    try {
        std::size_t used = 0;
        const double value = std::stod(text, &used);
        if (used != text.size()) return false;
        out = value;
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool out_required = true) {
    cmd->add_option("--scenario", flags.scenario_path, "scenario file (JSON)")->required();
    auto* out = cmd->add_option("--out-dir", flags.out_dir, "run directory");
    if (out_required) out->required();
    cmd->add_option("--gamma", [&flags](const CLI::results_t& r) {
        return parse_double(r[0], flags.gamma);
    }, "override design.gamma");
    cmd->add_option("--horizon", [&flags](const CLI::results_t& r) {
        return parse_double(r[0], flags.horizon);
    }, "override sim.horizon (s)");
    cmd->add_option("--dt", [&flags](const CLI::results_t& r) {
        return parse_double(r[0], flags.dt);
    }, "override sim.step (s)");
    cmd->add_option("--seed", [&flags](const CLI::results_t& r) {
        try {
            flags.seed = static_cast<std::uint64_t>(std::stoull(r[0]));
            return true;
        } catch (const std::exception&) {
            return false;
        }
    }, "override sim.seed");
}

ScenarioConfig load_config(const CommonFlags& flags) {
    ScenarioConfig config = parse_scenario(flags.scenario_path);
    if (flags.gamma) config.design.gamma = *flags.gamma;
    if (flags.horizon) {
        config.sim.horizon = *flags.horizon;
        config.plant.horizon = *flags.horizon;
    }
    if (flags.dt) config.sim.step = *flags.dt;
    if (flags.seed) config.sim.seed = *flags.seed;
    return config;
}

void write_scenario_copy(const fs::path& run_dir, const ScenarioConfig& config) {
    std::ofstream out(run_dir / "scenario.json");
    if (!out) throw Error("cannot write scenario copy under " + run_dir.string());
    out << serialize_scenario(config);
}

DesignSummary summarize(const DesignResult& design) {
    DesignSummary summary;
    summary.lmi = design.lmi;
    summary.lmi_local_ok = design.lmi_local_ok;
    for (std::size_t i = 0; i < design.nodes.size(); ++i) {
        const bool bounded = design.node_errors[i].empty();
        summary.riccati_bounded.push_back(bounded);
        summary.alpha1.push_back(bounded ? design.nodes[i].riccati.alpha1 : 0.0);
        summary.alpha2.push_back(bounded ? design.nodes[i].riccati.alpha2 : 0.0);
        summary.riccati_errors.push_back(design.node_errors[i]);
    }
    summary.designed = design.ok();
    return summary;
}

int do_design(const CommonFlags& flags) {
    const ScenarioConfig config = load_config(flags);
    const ValidatedScenario scenario(config);
    fs::create_directories(flags.out_dir);
    write_scenario_copy(flags.out_dir, config);

    const DesignResult design = design_detectors(scenario);
    write_feasibility_json(fs::path(flags.out_dir) / "feasibility.json", summarize(design));

    if (!design.lmi.feasible) {
        std::cerr << "design infeasible: the global LMI R + gamma^2 (Phi + Phi' - Delta) > I "
                     "fails at gamma="
                  << design.gamma << " (min eigenvalue " << design.lmi.min_eigenvalue
                  << ", needs > 0)\n";
        return kExitInfeasible;
    }
    for (std::size_t i = 0; i < design.lmi_local_ok.size(); ++i) {
        if (!design.lmi_local_ok[i]) {
            std::cerr << "design infeasible: R_check > I fails at node " << i + 1 << "\n";
            return kExitInfeasible;
        }
    }
    bool riccati_ok = true;
    for (std::size_t i = 0; i < design.node_errors.size(); ++i) {
        if (!design.node_errors[i].empty()) {
            std::cerr << "node " << i + 1 << ": " << design.node_errors[i] << "\n";
            riccati_ok = false;
        }
    }
    if (!riccati_ok) return kExitInfeasible;

    write_gain_set(flags.out_dir, scenario, gain_set(design));
    std::cout << "design complete: LMI min eigenvalue " << design.lmi.min_eigenvalue
              << ", gains written to " << gains_dir(flags.out_dir).string() << "\n";
    return kExitOk;
}

int do_simulate(const CommonFlags& flags, bool frozen, std::optional<double> threshold,
                double dwell) {
    const ScenarioConfig config = load_config(flags);
    const ValidatedScenario scenario(config);
    if (!fs::exists(gains_dir(flags.out_dir))) {
        std::cerr << "no gain schedules under " << gains_dir(flags.out_dir).string()
                  << "; run the design subcommand first\n";
        return kExitConfig;
    }
    const GainSet gains = read_gain_set(flags.out_dir, scenario);

    SimOptions options;
    options.replay = frozen ? GainReplay::Frozen : GainReplay::Scheduled;
    const SimResult result = simulate(scenario, gains, options);

    std::vector<double> thresholds;
    if (threshold) {
        thresholds.assign(static_cast<std::size_t>(scenario.node_count()), *threshold);
    } else {
        const bool any_attack = [&] {
            for (int i = 0; i < scenario.node_count(); ++i) {
                if (scenario.hijacked(i)) return true;
            }
            return false;
        }();
        const SimResult* calibration = &result;
        SimResult calibration_run;
        if (any_attack) {
            SimOptions calib_options = options;
            calib_options.attacks_enabled = false;
            calibration_run = simulate(scenario, gains, calib_options);
            calibration = &calibration_run;
        }
        for (int i = 0; i < scenario.node_count(); ++i) {
            const double calibrated =
                calibration_threshold(calibration->nodes[static_cast<std::size_t>(i)].phi);
            thresholds.push_back(std::max(calibrated, 1e-9));
        }
    }

    const std::vector<NodeReport> reports = node_reports(scenario, result, thresholds, dwell);
    write_scenario_copy(flags.out_dir, config);
    write_trajectories_csv(fs::path(flags.out_dir) / "trajectories.csv", scenario, result);
    write_metrics_json(fs::path(flags.out_dir) / "metrics.json", reports);

    for (const auto& report : reports) {
        std::cout << "node " << report.node << ": tracking tail " << report.tracking.tail_fraction
                  << " (" << (report.tracking.converged ? "pass" : "fail") << "), hinf ratio "
                  << report.hinf.ratio << ", decay rate " << report.decay.lambda_rate << ", "
                  << report.detections.size() << " detection(s)\n";
    }
    return kExitOk;
}

int do_verify(const std::string& out_dir, const std::string& scenario_override, bool frozen) {
    const fs::path run_dir(out_dir);
    const fs::path scenario_path =
        scenario_override.empty() ? run_dir / "scenario.json" : fs::path(scenario_override);
    const ScenarioConfig config = parse_scenario(scenario_path);
    const ValidatedScenario scenario(config);
    GainSet gains = read_gain_set(run_dir, scenario);
    if (frozen) {
        // the run replayed the final sample only; check against that
        for (auto& schedule : gains.detector) {
            schedule = GainSchedule::constant(schedule.frozen(), schedule.partition());
        }
        for (auto& schedule : gains.baseline) {
            schedule = GainSchedule::constant(schedule.frozen(), schedule.partition());
        }
    }
    const SimResult result =
        read_trajectories_csv(run_dir / "trajectories.csv", scenario);

    int failures = 0;
    auto report = [&failures](bool ok, const std::string& name, const std::string& detail) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
        if (!ok) ++failures;
    };

    // Closed-loop error dynamics consistency, away from signal kinks.
    for (int i = 0; i < scenario.node_count(); ++i) {
        const ResidualReport residual = equation_residual(scenario, result, gains, i);
        report(residual.max_rel_smooth < 1e-3,
               "error-dynamics residual node " + std::to_string(i + 1),
               "smooth " + std::to_string(residual.max_rel_smooth) + " (raw " +
                   std::to_string(residual.max_rel) + ", bound 1e-3)");
    }

    // E = diag(D D', U_1, ..., U_q) block identity on sampled times.
    double worst_e = 0.0;
    const std::size_t samples = std::min<std::size_t>(result.grid.count, 33);
    for (int i = 0; i < scenario.node_count(); ++i) {
        const AugmentedNode aug(scenario, i);
        for (std::size_t s = 0; s < samples; ++s) {
            const double t =
                result.grid.time(s * (result.grid.count - 1) / std::max<std::size_t>(samples - 1, 1));
            const Matrix d = aug.d(t);
            Matrix expected = Matrix::Zero(d.rows(), d.rows());
            const auto& sensor = scenario.node(i).sensor;
            const Matrix di = sensor.d.eval(t);
            expected.topLeftCorner(sensor.p, sensor.p) = di * di.transpose();
            Eigen::Index row = sensor.p;
            for (std::size_t e : scenario.in_edges(i)) {
                const auto& link = scenario.edge(e);
                expected.block(row, row, link.p, link.p) =
                    link.h * link.h.transpose() + link.z;
                row += link.p;
            }
            worst_e = std::max(worst_e,
                               (d * d.transpose() - expected).cwiseAbs().maxCoeff());
        }
    }
    report(worst_e <= 1e-12, "E block-diagonal identity",
           "max deviation " + std::to_string(worst_e));

    // Gain partition round trip must be bit exact.
    bool partition_ok = true;
    for (int i = 0; i < scenario.node_count(); ++i) {
        const auto& schedule = gains.detector[static_cast<std::size_t>(i)];
        const Matrix stacked = schedule.frozen();
        const DetectorGains split = split_detector_gain(stacked, schedule.partition());
        std::vector<Matrix> top = {split.l_hat};
        std::vector<Matrix> bottom = {split.l_check};
        for (std::size_t k = 0; k < split.k_hat.size(); ++k) {
            top.push_back(split.k_hat[k]);
            bottom.push_back(split.k_check[k]);
        }
        const Matrix rebuilt = GainSchedule::reassemble({top, bottom});
        partition_ok = partition_ok && rebuilt == stacked;
    }
    report(partition_ok, "gain partition round trip", partition_ok ? "bit exact" : "mismatch");

    // Phi block sparsity must follow the transpose adjacency.
    const CouplingData coupling = build_coupling(scenario.topology(), scenario.n());
    bool sparsity_ok = true;
    for (int i = 0; i < scenario.node_count(); ++i) {
        for (int j = 0; j < scenario.node_count(); ++j) {
            const Matrix block = coupling.phi.block(i * scenario.n(), j * scenario.n(),
                                                    scenario.n(), scenario.n());
            if (!coupling.block_allowed(i, j, scenario.topology()) &&
                block.cwiseAbs().maxCoeff() != 0.0) {
                sparsity_ok = false;
            }
        }
    }
    report(sparsity_ok, "Phi sparsity", sparsity_ok ? "pattern matches topology" : "violated");

    return failures == 0 ? kExitOk : kExitInfeasible;
}

int do_sweep(const CommonFlags& flags, const std::string& gammas_text) {
    std::vector<double> gammas;
    std::size_t start = 0;
    while (start <= gammas_text.size() && !gammas_text.empty()) {
        const std::size_t comma = gammas_text.find(',', start);
        const std::string cell = gammas_text.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!cell.empty()) {
            try {
                gammas.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("--gammas: cannot parse '" + cell + "'");
            }
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (!std::is_sorted(gammas.begin(), gammas.end())) {
        throw ConfigError("--gammas must be an ascending list");
    }

    const ScenarioConfig config = load_config(flags);
    const ValidatedScenario scenario(config);
    const std::vector<GammaSweepRow> rows = sweep_gamma(scenario, gammas);
    fs::create_directories(flags.out_dir);
    write_sweep_csv(fs::path(flags.out_dir) / "gamma_sweep.csv", rows);
    for (const auto& row : rows) {
        const bool all_bounded =
            std::all_of(row.riccati_bounded.begin(), row.riccati_bounded.end(),
                        [](bool b) { return b; });
        std::cout << "gamma " << row.gamma << ": LMI min eig " << row.lmi_min_eigenvalue << " ("
                  << (row.lmi_feasible ? "feasible" : "infeasible") << "), Riccati "
                  << (all_bounded ? "bounded" : "unbounded") << "\n";
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"decentralized H-infinity synthesis of biasing-attack detectors for "
                 "distributed observer networks"};
    app.require_subcommand(1);

    CommonFlags design_flags;
    auto* design_cmd = app.add_subcommand("design", "run the two-step detector synthesis");
    add_common(design_cmd, design_flags);

    CommonFlags sim_flags;
    bool frozen = false;
    std::optional<double> threshold;
    double dwell = 0.5;
    auto* sim_cmd = app.add_subcommand("simulate", "simulate the closed loop with designed gains");
    add_common(sim_cmd, sim_flags);
    sim_cmd->add_flag("--frozen-gains", frozen, "replay the final gain sample instead of the schedule");
    sim_cmd->add_option("--threshold", [&threshold](const CLI::results_t& r) {
        return parse_double(r[0], threshold);
    }, "detection threshold override (default: calibrated)");
    sim_cmd->add_option("--dwell", dwell, "detection dwell time (s)");

    std::string verify_dir;
    std::string verify_scenario;
    bool verify_frozen = false;
    auto* verify_cmd = app.add_subcommand("verify", "check invariants on an existing run");
    verify_cmd->add_option("--out-dir", verify_dir, "run directory")->required();
    verify_cmd->add_option("--scenario", verify_scenario, "scenario override (defaults to the run copy)");
    verify_cmd->add_flag("--frozen-gains", verify_frozen, "the run replayed frozen gains");

    CommonFlags sweep_flags;
    std::string gammas_text;
    auto* sweep_cmd = app.add_subcommand("sweep", "tabulate feasibility over a gamma grid");
    add_common(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--gammas", gammas_text, "ascending comma-separated gamma list")
        ->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (design_cmd->parsed()) return do_design(design_flags);
        if (sim_cmd->parsed()) return do_simulate(sim_flags, frozen, threshold, dwell);
        if (verify_cmd->parsed()) return do_verify(verify_dir, verify_scenario, verify_frozen);
        if (sweep_cmd->parsed()) return do_sweep(sweep_flags, gammas_text);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const RiccatiUnboundedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}

}  // namespace attdet

#pragma once

#include "attdet/metrics.hpp"
#include "attdet/model.hpp"
#include "attdet/runtime.hpp"
#include "attdet/synthesis.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace attdet {

/// Parses a scenario file (JSON; matrix literals as row lists, time-varying
/// entries as tagged {const}/{sin}/{pwc} objects). Applies the documented
/// defaults; unknown keys are rejected with their key path. Throws ConfigError.
ScenarioConfig parse_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario_text(const std::string& text);

/// Canonical serialization (defaults materialized); parse(serialize(c)) == c.
std::string serialize_scenario(const ScenarioConfig& config);

/// Structural equality of two parsed configs.
bool scenario_equal(const ScenarioConfig& a, const ScenarioConfig& b);

/// Gain schedule CSV: header "t,L[0][0],...", one row per grid point,
/// row-major entries, %.17g formatting.
void write_gain_csv(const std::filesystem::path& path, const GainSchedule& schedule);
GainSchedule read_gain_csv(const std::filesystem::path& path, const GainPartition& partition);

/// Trajectories CSV: first column t (s), then x[k] and per-node columns named
/// node{i}.{signal}[{k}] (i is 1-based, matching the scenario file).
void write_trajectories_csv(const std::filesystem::path& path, const ValidatedScenario& scenario,
                            const SimResult& result);
SimResult read_trajectories_csv(const std::filesystem::path& path,
                                const ValidatedScenario& scenario);

void write_metrics_json(const std::filesystem::path& path, const std::vector<NodeReport>& reports);

/// feasibility.json for a design run; carries the LMI report, the local checks
/// and each node's Riccati corridor (or its failure).
struct DesignSummary {
    FeasibilityReport lmi;
    std::vector<bool> lmi_local_ok;
    std::vector<bool> riccati_bounded;
    std::vector<double> alpha1;
    std::vector<double> alpha2;
    std::vector<std::string> riccati_errors;
    bool designed = false;
};

void write_feasibility_json(const std::filesystem::path& path, const DesignSummary& summary);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<GammaSweepRow>& rows);

/// Run-directory layout helpers (scenario copy, feasibility.json,
/// gains/node_{i}.csv + gains/node_{i}_baseline.csv, trajectories.csv,
/// metrics.json).
std::filesystem::path gains_dir(const std::filesystem::path& run_dir);
std::filesystem::path detector_gain_path(const std::filesystem::path& run_dir, int node);
std::filesystem::path baseline_gain_path(const std::filesystem::path& run_dir, int node);

void write_gain_set(const std::filesystem::path& run_dir, const ValidatedScenario& scenario,
                    const GainSet& gains);
GainSet read_gain_set(const std::filesystem::path& run_dir, const ValidatedScenario& scenario);

}  // namespace attdet

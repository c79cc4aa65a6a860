#pragma once

#include <string>
#include <vector>

#include "gfmlab/lstm.hpp"
#include "gfmlab/mlp.hpp"
#include "gfmlab/study.hpp"

namespace gfmlab {

// One dataset scenario together with its grid conditions and an optional
// companion unit (used by generation-outage cases).
struct ScenarioCase {
    ScenarioSpec scenario;
    GridParams grid;
    std::vector<UnitSpec> companions;
};

struct DatasetOptions {
    double window = 0.5;        // feature/target aggregation window (s)
    double brute_grid = 0.01;   // grid step of the per-scenario optimal-blend search
    std::array<double, 3> split_fractions{0.70, 0.15, 0.15};
    long long seed = 0;         // split shuffling
};

struct DatasetBuild {
    Dataset data;
    std::vector<std::string> skipped;  // failed scenarios with reasons
};

// Runs each scenario with the brute-force-optimal blend of the template's
// four controllers and extracts one feature/target row per aggregation
// window. Features: load level, event magnitude, grid strength x_th, mode
// flag, window means of P and V. Target: window mean of the blended
// reference frequency (rad/s). Failed scenarios are skipped with a report.
DatasetBuild generate_dataset(const std::vector<ScenarioCase>& cases, const UnitTemplate& tmpl,
                              const DatasetOptions& options = {});

// Convenience overload: the same grid for every scenario.
DatasetBuild generate_dataset(const std::vector<ScenarioSpec>& scenarios,
                              const UnitTemplate& tmpl, const GridParams& grid,
                              const DatasetOptions& options = {});

struct SequenceDatasetBuild {
    std::vector<SeqSample> train;
    std::vector<SeqSample> val;
    std::vector<std::string> skipped;
};

// Sequence form for the LSTM: per scenario one sequence of window-feature
// rows whose per-step target is the blended reference-angle increment over
// the window.
SequenceDatasetBuild generate_sequence_dataset(const std::vector<ScenarioCase>& cases,
                                               const UnitTemplate& tmpl,
                                               const DatasetOptions& options = {});

// Deterministic expansion of (event kind) x (seed) into jittered scenario
// cases: event magnitude, grid strength and load vary per seed via
// splitmix64 draws.
struct DatasetGenSpec {
    std::vector<EventKind> kinds;
    std::vector<long long> seeds;
    double t_end = 8.0;
    double dt = 1e-3;
    double event_time = 2.0;
    double base_magnitude = 0.25;
    double fault_level = 0.4;
    double fault_duration = 0.15;
    double load_r = 2.0;
    GridParams base_grid;
    DroopParams companion_droop;  // paired unit for generation-outage cases
    double companion_x_coupling = 0.05;
};

std::vector<ScenarioCase> expand_dataset_cases(const DatasetGenSpec& spec);

}  // namespace gfmlab

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gfmlab/dataset.hpp"
#include "gfmlab/network.hpp"
#include "gfmlab/study.hpp"

namespace gfmlab {

// All run configuration is JSON (key-value with nested sections), parsed
// strictly: unknown keys are fatal, every error names the offending
// field path. The full schema is documented in the README.

struct SimulateConfig {
    ScenarioSpec scenario;
    GridParams grid;
    std::vector<UnitSpec> units;
    PlantMeta plant;
};

struct OptimizeFileConfig {
    ScenarioSpec scenario;
    GridParams grid;
    UnitTemplate tmpl;
    ObjectiveWindow window;
    std::array<double, 4> w0{0.25, 0.25, 0.25, 0.25};
    SolverConfig solver;
    double oracle_grid = 0.005;
    PlantMeta plant;
};

struct TrainFileConfig {
    DatasetGenSpec dataset;
    UnitTemplate tmpl;
    DatasetOptions options;
    std::vector<int> hidden_layers{16};
    TrainConfig train;
    LstmTrainConfig lstm;
    int lstm_hidden = 8;
    long long lstm_seed = 0;
};

struct SweepFileConfig {
    std::string param_pointer;   // JSON pointer into the base config
    std::vector<double> values;
    std::string base_json;       // serialized base simulate-config
    std::string origin;          // file path, for diagnostics
    bool optimize = false;       // also run the four-law weight optimization
    std::optional<UnitTemplate> tmpl;
    ObjectiveWindow window;
};

SimulateConfig load_simulate_config(const std::filesystem::path& path);
SimulateConfig parse_simulate_config(const std::string& json_text, const std::string& origin);

OptimizeFileConfig load_optimize_config(const std::filesystem::path& path);
TrainFileConfig load_train_config(const std::filesystem::path& path);
SweepFileConfig load_sweep_config(const std::filesystem::path& path);

// Returns the base JSON with the pointed-to value replaced; used by sweeps.
std::string apply_override(const std::string& json_text, const std::string& pointer,
                           double value, const std::string& origin);

}  // namespace gfmlab

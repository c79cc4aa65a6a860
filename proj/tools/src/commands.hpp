#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace gfmlab::cli {

struct CommonArgs {
    std::filesystem::path config_path;
    std::filesystem::path output_dir;
    std::optional<long long> seed_override;
};

// Exit codes: 0 success, 1 runtime/numeric failure, 2 configuration error.
int cmd_simulate(const CommonArgs& args);
int cmd_optimize(const CommonArgs& args, bool oracle);
int cmd_train(const CommonArgs& args, const std::string& model);  // "mlp" or "lstm"
int cmd_sweep(const CommonArgs& args);

}  // namespace gfmlab::cli

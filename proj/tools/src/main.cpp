#include <CLI11.hpp>
#include <clocale>
#include <string>

#include "commands.hpp"
#include "gfmlab/version.hpp"

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");

    CLI::App app{"gfmlab: grid-forming converter simulation and tuning toolkit"};
    app.set_version_flag("--version", std::string(gfmlab::kToolVersion));
    app.require_subcommand(1);

    gfmlab::cli::CommonArgs args;
    std::string config;
    std::string out_dir;
    long long seed = 0;
    bool seed_given = false;
    bool oracle = false;
    std::string model = "mlp";

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "configuration file path")->required();
        cmd->add_option("--out", out_dir, "output directory")->required();
        cmd->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_given = true;
        });
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run one scenario and emit trace/plots");
    add_common(simulate);
    CLI::App* optimize =
        app.add_subcommand("optimize", "optimize blend weights over the four pure controllers");
    add_common(optimize);
    optimize->add_flag("--oracle", oracle, "also run the brute-force oracle comparison");
    CLI::App* train = app.add_subcommand("train", "generate a dataset and train a model");
    add_common(train);
    train->add_option("--model", model, "mlp or lstm")
        ->check(CLI::IsMember({"mlp", "lstm"}));
    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep and emit a summary");
    add_common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // command-line problems are configuration errors
    }

    args.config_path = config;
    args.output_dir = out_dir;
    if (seed_given) args.seed_override = seed;

    if (simulate->parsed()) return gfmlab::cli::cmd_simulate(args);
    if (optimize->parsed()) return gfmlab::cli::cmd_optimize(args, oracle);
    if (train->parsed()) return gfmlab::cli::cmd_train(args, model);
    if (sweep->parsed()) return gfmlab::cli::cmd_sweep(args);
    return 2;
}

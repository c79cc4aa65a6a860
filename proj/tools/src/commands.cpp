#include "commands.hpp"

#include <cmath>
#include <future>
#include <iostream>

#include "gfmlab/artifacts.hpp"
#include "gfmlab/config.hpp"
#include "gfmlab/dataset.hpp"
#include "gfmlab/errors.hpp"
#include "gfmlab/svg.hpp"
#include "gfmlab/textio.hpp"
#include "gfmlab/version.hpp"

namespace gfmlab::cli {

namespace {

namespace fs = std::filesystem;

struct RunContext {
    CommonArgs args;
    std::string command;
    std::string config_text;
    ArtifactHeader header;
    std::vector<std::string> artifacts;
    std::vector<std::string> notes;

    void emit(const std::string& name, const std::string& content) {
        write_file(args.output_dir / name, content);
        artifacts.push_back(name);
    }

    void write_manifest() {
        std::string out = artifact_header_line(header);
        out += "command = " + command + "\n";
        out += "config_path = " + args.config_path.string() + "\n";
        out += "output_dir = " + args.output_dir.string() + "\n";
        out += "seed = " + std::to_string(header.seed) + "\n";
        out += "artifacts =";
        for (const auto& a : artifacts) out += " " + a;
        out += "\n";
        for (const auto& n : notes) out += "note: " + n + "\n";
        write_file(args.output_dir / "manifest.txt", out);
    }
};

RunContext open_run(const CommonArgs& args, const std::string& command) {
    RunContext ctx;
    ctx.args = args;
    ctx.command = command;
    ctx.config_text = read_file(args.config_path);  // ConfigError when missing
    std::error_code ec;
    fs::create_directories(args.output_dir, ec);
    if (ec || !fs::is_directory(args.output_dir)) {
        throw ConfigError("output directory not writable: " + args.output_dir.string());
    }
    ctx.header.tool_version = kToolVersion;
    ctx.header.config_digest = hex64(fnv1a64(ctx.config_text));
    return ctx;
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const SimulationAbortError& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 1;
    }
}

PlotSeries unit_series(const SimTrace& trace, std::size_t u, const std::vector<double>& y,
                       const std::string& label) {
    PlotSeries s;
    s.label = label;
    s.x = trace.t;
    s.y = y;
    return s;
}

void emit_trace_plots(RunContext& ctx, const SimTrace& trace) {
    const std::string header = "gfmlab " + std::string(kToolVersion) +
                               " seed=" + std::to_string(ctx.header.seed) +
                               " config=" + ctx.header.config_digest;
    std::vector<PlotSeries> freq, power, volt;
    for (std::size_t u = 0; u < trace.units.size(); ++u) {
        std::vector<double> hz(trace.t.size());
        for (std::size_t i = 0; i < hz.size(); ++i) hz[i] = trace.units[u].freq_hz(i);
        freq.push_back(unit_series(trace, u, hz, trace.units[u].id));
        power.push_back(unit_series(trace, u, trace.units[u].p, trace.units[u].id));
        volt.push_back(unit_series(trace, u, trace.units[u].v, trace.units[u].id));
    }
    PlotSpec spec;
    spec.header_comment = header;
    spec.x_label = "t (s)";

    spec.title = "Frequency";
    spec.y_label = "f (Hz)";
    ctx.emit("frequency.svg", render_line_plot(spec, freq));
    spec.title = "Active power";
    spec.y_label = "P (pu)";
    ctx.emit("power.svg", render_line_plot(spec, power));
    spec.title = "Commanded voltage";
    spec.y_label = "V (pu)";
    ctx.emit("voltage.svg", render_line_plot(spec, volt));
}

double law_omega_nom(const UnitSpec& u) {
    return std::visit(
        [](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BlendParams>) return p.droop.omega_nom;
            else return p.omega_nom;
        },
        u.params);
}

double wrap_angle(double a) {
    a = std::fmod(a + kPi, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a - kPi;
}

double tail_mean(const std::vector<double>& v, std::size_t n_tail) {
    const std::size_t n = std::min(n_tail, v.size());
    double acc = 0.0;
    for (std::size_t i = v.size() - n; i < v.size(); ++i) acc += v[i];
    return acc / static_cast<double>(n);
}

}  // namespace

int cmd_simulate(const CommonArgs& args) {
    return guarded([&]() {
        RunContext ctx = open_run(args, "simulate");
        SimulateConfig cfg = parse_simulate_config(ctx.config_text, args.config_path.string());
        if (args.seed_override) cfg.scenario.seed = *args.seed_override;
        ctx.header.seed = cfg.scenario.seed;

        const SimTrace trace = run_simulation(cfg.units, cfg.grid, cfg.scenario, cfg.plant);
        ctx.emit("trace.csv", trace_to_csv(trace, ctx.header));
        ctx.emit("bus.csv", bus_to_csv(trace, ctx.header));
        emit_trace_plots(ctx, trace);
        ctx.write_manifest();
        return 0;
    });
}

int cmd_optimize(const CommonArgs& args, bool oracle) {
    return guarded([&]() {
        RunContext ctx = open_run(args, "optimize");
        OptimizeFileConfig cfg = load_optimize_config(args.config_path);
        if (args.seed_override) cfg.scenario.seed = *args.seed_override;
        ctx.header.seed = cfg.scenario.seed;

        const ControllerStudy study =
            run_pure_controllers(cfg.tmpl, cfg.grid, cfg.scenario, cfg.window);
        const OptimizeResult result = optimize_weights(
            study.traces, study.spec, BlendWeights::from_array(cfg.w0), cfg.solver);
        if (result.projected_start) {
            ctx.notes.push_back("infeasible w0 projected to the feasible set before descent");
        }

        std::optional<BruteForceComparison> comparison;
        if (oracle) {
            BruteForceComparison c;
            c.weights = brute_force_weights(study.traces, study.spec, cfg.oracle_grid);
            c.objective = objective_mse(c.weights, study.traces, study.spec);
            comparison = c;
        }

        const double final_objective = result.log.entries.back().objective;
        const int iterations = static_cast<int>(result.log.entries.size());
        ctx.emit("weights.txt",
                 weights_to_text(result.weights, final_objective, iterations, ctx.header,
                                 comparison));
        ctx.emit("iterations.csv", iteration_log_to_csv(result.log, ctx.header));

        PlotSeries series;
        series.label = "objective";
        for (const auto& e : result.log.entries) {
            series.x.push_back(e.iteration);
            series.y.push_back(e.objective);
        }
        PlotSpec spec;
        spec.title = "Frequency-error objective";
        spec.x_label = "iteration";
        spec.y_label = "objective ((rad/s)^2)";
        spec.log_y = true;
        spec.header_comment = "gfmlab " + std::string(kToolVersion) +
                              " seed=" + std::to_string(ctx.header.seed) +
                              " config=" + ctx.header.config_digest;
        ctx.emit("objective.svg", render_line_plot(spec, {series}));
        ctx.write_manifest();
        return 0;
    });
}

int cmd_train(const CommonArgs& args, const std::string& model) {
    return guarded([&]() {
        if (model != "mlp" && model != "lstm") {
            throw ConfigError("train: --model must be 'mlp' or 'lstm'");
        }
        RunContext ctx = open_run(args, "train-" + model);
        TrainFileConfig cfg = load_train_config(args.config_path);
        if (args.seed_override) {
            cfg.train.seed = *args.seed_override;
            cfg.options.seed = *args.seed_override;
            cfg.lstm_seed = *args.seed_override;
        }
        ctx.header.seed = (model == "mlp") ? cfg.train.seed : cfg.lstm_seed;

        const auto cases = expand_dataset_cases(cfg.dataset);
        const std::string plot_header = "gfmlab " + std::string(kToolVersion) +
                                        " seed=" + std::to_string(ctx.header.seed) +
                                        " config=" + ctx.header.config_digest;

        if (model == "mlp") {
            const DatasetBuild build = generate_dataset(cases, cfg.tmpl, cfg.options);
            for (const auto& s : build.skipped) ctx.notes.push_back("skipped scenario: " + s);

            std::vector<int> layers{static_cast<int>(build.data.inputs.cols())};
            layers.insert(layers.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
            layers.push_back(static_cast<int>(build.data.targets.cols()));
            MlpNetwork net = MlpNetwork::init_random(layers, cfg.train.seed);

            const TrainRecord record = lm_train(net, build.data, cfg.train);
            if (record.stop == StopReason::mu_overflow ||
                record.stop == StopReason::epoch_failed) {
                throw NumericError("lm_train failed (" + std::string(to_string(record.stop)) +
                                   ") after epoch " + std::to_string(record.epochs.size()));
            }

            ctx.emit("model_mlp.txt", mlp_to_text(net, cfg.train.seed));

            std::string csv = artifact_header_line(ctx.header);
            csv += "epoch,train_err,val_err,mu\n";
            for (const auto& e : record.epochs) {
                csv += std::to_string(e.epoch) + "," + format_double(e.train_err) + "," +
                       format_double(e.val_err) + "," + format_double(e.mu) + "\n";
            }
            ctx.emit("training.csv", csv);

            std::string report = artifact_header_line(ctx.header);
            report += "stop_reason = " + std::string(to_string(record.stop)) + "\n";
            report += "epochs = " + std::to_string(record.epochs.size()) + "\n";
            for (const auto& [name, split] :
                 {std::pair{"train", Dataset::kTrain}, std::pair{"val", Dataset::kVal},
                  std::pair{"test", Dataset::kTest}}) {
                const double r = regression_coefficient(net, build.data, split);
                report += std::string("regression_") + name + " = " + format_double(r) + "\n";
            }
            ctx.emit("regression.txt", report);

            PlotSeries tr, va;
            tr.label = "train";
            va.label = "validation";
            for (const auto& e : record.epochs) {
                tr.x.push_back(e.epoch);
                tr.y.push_back(e.train_err);
                va.x.push_back(e.epoch);
                va.y.push_back(e.val_err);
            }
            PlotSpec spec;
            spec.title = "LM training error";
            spec.x_label = "epoch";
            spec.y_label = "MSE";
            spec.log_y = true;
            spec.header_comment = plot_header;
            ctx.emit("training.svg", render_line_plot(spec, {tr, va}));
        } else {
            const SequenceDatasetBuild build =
                generate_sequence_dataset(cases, cfg.tmpl, cfg.options);
            for (const auto& s : build.skipped) ctx.notes.push_back("skipped scenario: " + s);

            LstmCell cell = LstmCell::init_random(6, cfg.lstm_hidden, cfg.lstm_seed);
            const LstmTrainRecord record = lstm_train(cell, build.train, cfg.lstm);
            if (record.clip_events > 0) {
                ctx.notes.push_back("gradient clipped " + std::to_string(record.clip_events) +
                                    " times");
            }

            ctx.emit("model_lstm.txt", lstm_to_text(cell, cfg.lstm_seed));

            std::string csv = artifact_header_line(ctx.header);
            csv += "epoch,rmse\n";
            for (std::size_t e = 0; e < record.rmse_per_epoch.size(); ++e) {
                csv += std::to_string(e + 1) + "," + format_double(record.rmse_per_epoch[e]) +
                       "\n";
            }
            ctx.emit("training.csv", csv);

            double val_rmse = 0.0;
            long n_val = 0;
            for (const auto& s : build.val) {
                const auto out = lstm_forward(cell, s.inputs);
                for (int t = 0; t < s.targets.size(); ++t) {
                    const double e = out.readout[static_cast<std::size_t>(t)] - s.targets(t);
                    val_rmse += e * e;
                    ++n_val;
                }
            }
            std::string report = artifact_header_line(ctx.header);
            report += "train_sequences = " + std::to_string(build.train.size()) + "\n";
            report += "val_sequences = " + std::to_string(build.val.size()) + "\n";
            report += "val_rmse = " +
                      (n_val > 0 ? format_double(std::sqrt(val_rmse / n_val)) : "n/a") + "\n";
            ctx.emit("regression.txt", report);

            PlotSeries series;
            series.label = "train RMSE";
            for (std::size_t e = 0; e < record.rmse_per_epoch.size(); ++e) {
                series.x.push_back(static_cast<double>(e + 1));
                series.y.push_back(record.rmse_per_epoch[e]);
            }
            PlotSpec spec;
            spec.title = "LSTM training RMSE";
            spec.x_label = "epoch";
            spec.y_label = "RMSE (rad)";
            spec.log_y = true;
            spec.header_comment = plot_header;
            ctx.emit("training.svg", render_line_plot(spec, {series}));
        }
        ctx.write_manifest();
        return 0;
    });
}

namespace {

struct SweepRow {
    double value = 0.0;
    bool ok = false;
    std::string error;
    double delta_omega = 0.0;
    std::optional<double> delta_rad;
    std::optional<double> power_ratio;
    std::optional<double> final_objective;
};

SweepRow sweep_point(const SweepFileConfig& sweep, double value,
                     const std::optional<long long>& seed_override) {
    SweepRow row;
    row.value = value;
    try {
        const std::string text =
            apply_override(sweep.base_json, sweep.param_pointer, value, sweep.origin);
        SimulateConfig cfg = parse_simulate_config(text, sweep.origin + " (/base)");
        if (seed_override) cfg.scenario.seed = *seed_override;

        const SimTrace trace = run_simulation(cfg.units, cfg.grid, cfg.scenario, cfg.plant);
        const auto n_tail = static_cast<std::size_t>(
            std::max(1.0, std::round(1.0 / cfg.scenario.dt)));  // last second

        row.delta_omega =
            tail_mean(trace.units[0].omega, n_tail) - law_omega_nom(cfg.units[0]);
        if (cfg.grid.connected) {
            const double t_end = trace.t.back();
            const double grid_angle = cfg.grid.phase0 + cfg.grid.omega_grid * t_end;
            row.delta_rad = wrap_angle(trace.units[0].theta.back() - grid_angle);
        }
        if (trace.units.size() >= 2) {
            const double p1 = tail_mean(trace.units[1].p, n_tail);
            if (p1 != 0.0) row.power_ratio = tail_mean(trace.units[0].p, n_tail) / p1;
        }
        if (sweep.optimize) {
            const ControllerStudy study =
                run_pure_controllers(*sweep.tmpl, cfg.grid, cfg.scenario, sweep.window);
            const OptimizeResult res = optimize_weights(study.traces, study.spec,
                                                        BlendWeights{0.25, 0.25, 0.25, 0.25});
            row.final_objective = res.log.entries.back().objective;
        }
        row.ok = true;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

}  // namespace

int cmd_sweep(const CommonArgs& args) {
    return guarded([&]() {
        RunContext ctx = open_run(args, "sweep");
        const SweepFileConfig sweep = load_sweep_config(args.config_path);
        {
            SimulateConfig base =
                parse_simulate_config(sweep.base_json, sweep.origin + " (/base)");
            ctx.header.seed = args.seed_override.value_or(base.scenario.seed);
        }

        std::vector<std::future<SweepRow>> futures;
        futures.reserve(sweep.values.size());
        for (double value : sweep.values) {
            futures.push_back(std::async(std::launch::async, sweep_point, std::cref(sweep),
                                         value, args.seed_override));
        }

        std::string csv = artifact_header_line(ctx.header);
        csv += "axis_value,delta_omega_rad_s,delta_rad,power_ratio,final_objective,status\n";
        std::size_t failures = 0;
        for (auto& f : futures) {
            const SweepRow row = f.get();
            csv += format_double(row.value);
            csv += ',';
            if (row.ok) csv += format_double(row.delta_omega);
            csv += ',';
            if (row.ok && row.delta_rad) csv += format_double(*row.delta_rad);
            csv += ',';
            if (row.ok && row.power_ratio) csv += format_double(*row.power_ratio);
            csv += ',';
            if (row.ok && row.final_objective) csv += format_double(*row.final_objective);
            csv += ',';
            csv += row.ok ? "ok" : "failed";
            csv += '\n';
            if (!row.ok) {
                ++failures;
                ctx.notes.push_back("value " + format_double(row.value) +
                                    " failed: " + row.error);
            }
        }
        ctx.emit("sweep.csv", csv);
        ctx.write_manifest();
        return failures == sweep.values.size() ? 1 : 0;
    });
}

}  // namespace gfmlab::cli

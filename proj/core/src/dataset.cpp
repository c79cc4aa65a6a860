#include "gfmlab/dataset.hpp"

#include <cmath>

#include "gfmlab/errors.hpp"
#include "gfmlab/prng.hpp"

namespace gfmlab {

namespace {

double load_conductance_at(const ScenarioSpec& s, double t) {
    double g = 1.0 / s.load_r;
    for (const auto& ev : s.events) {
        if (ev.t > t + 1e-12) break;
        switch (ev.kind) {
            case EventKind::load_surge:
            case EventKind::overload:
                g += ev.magnitude;
                break;
            case EventKind::load_drop:
                g = std::max(0.0, g - ev.magnitude);
                break;
            default:
                break;
        }
    }
    return g;
}

double last_event_magnitude_at(const ScenarioSpec& s, double t) {
    double m = 0.0;
    for (const auto& ev : s.events) {
        if (ev.t > t + 1e-12) break;
        m = ev.magnitude;
    }
    return m;
}

struct CaseRun {
    SimTrace trace;          // blend-unit run
    BlendWeights weights;    // brute-force optimum of the case
};

CaseRun run_case_with_optimal_blend(const ScenarioCase& c, const UnitTemplate& tmpl,
                                    double brute_grid) {
    const auto study = run_pure_controllers(tmpl, c.grid, c.scenario, {}, c.companions);
    CaseRun run;
    run.weights = brute_force_weights(study.traces, study.spec, brute_grid);
    std::vector<UnitSpec> units{make_blend_unit(tmpl, run.weights, "blend")};
    units.insert(units.end(), c.companions.begin(), c.companions.end());
    run.trace = run_simulation(units, c.grid, c.scenario);
    return run;
}

struct WindowRow {
    std::array<double, 6> features{};
    double target_omega = 0.0;      // mean blended reference frequency
    double theta_increment = 0.0;   // blended angle increment over the window
};

std::vector<WindowRow> extract_windows(const ScenarioCase& c, const CaseRun& run,
                                       double window) {
    const auto& trace = run.trace;
    const double dt = trace.dt;
    const auto steps_per_window = static_cast<std::size_t>(std::llround(window / dt));
    if (steps_per_window < 1) throw InvalidInputError("dataset window shorter than dt");
    const std::size_t n_windows = (trace.t.size() - 1) / steps_per_window;

    std::vector<WindowRow> rows;
    rows.reserve(n_windows);
    const auto& unit = trace.units[0];
    for (std::size_t k = 0; k < n_windows; ++k) {
        const std::size_t i0 = k * steps_per_window;
        const std::size_t i1 = i0 + steps_per_window;  // exclusive
        double p_mean = 0.0, v_mean = 0.0, om_mean = 0.0;
        for (std::size_t i = i0; i < i1; ++i) {
            p_mean += unit.p[i];
            v_mean += trace.v_bus[i];
            om_mean += unit.omega[i];
        }
        const double inv = 1.0 / static_cast<double>(steps_per_window);
        p_mean *= inv;
        v_mean *= inv;
        om_mean *= inv;

        const double t_end_window = trace.t[i1];
        WindowRow row;
        row.features = {load_conductance_at(c.scenario, t_end_window),
                        last_event_magnitude_at(c.scenario, t_end_window),
                        c.grid.x_th,
                        trace.grid_connected[i1 - 1] ? 1.0 : 0.0,
                        p_mean,
                        v_mean};
        row.target_omega = om_mean;
        row.theta_increment = unit.theta[i1] - unit.theta[i0];
        rows.push_back(row);
    }
    return rows;
}

std::vector<int> shuffled_indices(std::size_t n, long long seed) {
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
    SplitMix64 rng(static_cast<std::uint64_t>(seed) ^ 0x64617461ULL);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

}  // namespace

DatasetBuild generate_dataset(const std::vector<ScenarioCase>& cases, const UnitTemplate& tmpl,
                              const DatasetOptions& options) {
    if (cases.empty()) throw InvalidInputError("generate_dataset: no scenarios");

    std::vector<WindowRow> all_rows;
    DatasetBuild build;
    for (const auto& c : cases) {
        try {
            const CaseRun run = run_case_with_optimal_blend(c, tmpl, options.brute_grid);
            const auto rows = extract_windows(c, run, options.window);
            all_rows.insert(all_rows.end(), rows.begin(), rows.end());
        } catch (const Error& e) {
            build.skipped.push_back(c.scenario.name + ": " + e.what());
        }
    }
    const std::size_t n = all_rows.size();
    if (n < 3) throw InvalidInputError("generate_dataset: fewer than 3 usable rows");

    Dataset& data = build.data;
    data.feature_names = {"load_g", "event_magnitude", "x_th", "grid_mode", "p_mean", "v_mean"};
    data.inputs.resize(static_cast<int>(n), 6);
    data.targets.resize(static_cast<int>(n), 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (int f = 0; f < 6; ++f) {
            data.inputs(static_cast<int>(i), f) = all_rows[i].features[static_cast<std::size_t>(f)];
        }
        data.targets(static_cast<int>(i), 0) = all_rows[i].target_omega;
    }

    const auto order = shuffled_indices(n, options.seed);
    const auto nn = static_cast<double>(n);
    auto n_train = static_cast<std::size_t>(std::lround(options.split_fractions[0] * nn));
    n_train = std::min(std::max<std::size_t>(n_train, 1), n - 2);
    auto n_val = static_cast<std::size_t>(std::lround(options.split_fractions[1] * nn));
    n_val = std::min(std::max<std::size_t>(n_val, 1), n - n_train - 1);

    data.split.assign(n, Dataset::kTest);
    for (std::size_t i = 0; i < n_train; ++i) {
        data.split[static_cast<std::size_t>(order[i])] = Dataset::kTrain;
    }
    for (std::size_t i = n_train; i < n_train + n_val; ++i) {
        data.split[static_cast<std::size_t>(order[i])] = Dataset::kVal;
    }
    data.validate();
    return build;
}

DatasetBuild generate_dataset(const std::vector<ScenarioSpec>& scenarios,
                              const UnitTemplate& tmpl, const GridParams& grid,
                              const DatasetOptions& options) {
    std::vector<ScenarioCase> cases;
    cases.reserve(scenarios.size());
    for (const auto& s : scenarios) cases.push_back({s, grid, {}});
    return generate_dataset(cases, tmpl, options);
}

SequenceDatasetBuild generate_sequence_dataset(const std::vector<ScenarioCase>& cases,
                                               const UnitTemplate& tmpl,
                                               const DatasetOptions& options) {
    if (cases.empty()) throw InvalidInputError("generate_sequence_dataset: no scenarios");

    SequenceDatasetBuild build;
    std::size_t index = 0;
    for (const auto& c : cases) {
        try {
            const CaseRun run = run_case_with_optimal_blend(c, tmpl, options.brute_grid);
            const auto rows = extract_windows(c, run, options.window);
            if (rows.size() < 2) {
                build.skipped.push_back(c.scenario.name + ": sequence shorter than 2 windows");
                continue;
            }
            SeqSample sample;
            sample.inputs.resize(static_cast<int>(rows.size()), 6);
            sample.targets.resize(static_cast<int>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                for (int f = 0; f < 6; ++f) {
                    sample.inputs(static_cast<int>(i), f) =
                        rows[i].features[static_cast<std::size_t>(f)];
                }
                sample.targets(static_cast<int>(i)) = rows[i].theta_increment;
            }
            // every fourth sequence goes to the validation pool
            if (index % 4 == 3) {
                build.val.push_back(std::move(sample));
            } else {
                build.train.push_back(std::move(sample));
            }
            ++index;
        } catch (const Error& e) {
            build.skipped.push_back(c.scenario.name + ": " + e.what());
        }
    }
    if (build.train.empty()) {
        throw InvalidInputError("generate_sequence_dataset: no usable training sequences");
    }
    return build;
}

std::vector<ScenarioCase> expand_dataset_cases(const DatasetGenSpec& spec) {
    if (spec.kinds.empty() || spec.seeds.empty()) {
        throw InvalidInputError("expand_dataset_cases: kinds and seeds must be nonempty");
    }
    std::vector<ScenarioCase> cases;
    cases.reserve(spec.kinds.size() * spec.seeds.size());
    for (std::size_t ki = 0; ki < spec.kinds.size(); ++ki) {
        const EventKind kind = spec.kinds[ki];
        for (long long seed : spec.seeds) {
            SplitMix64 rng(static_cast<std::uint64_t>(seed) * 0x9e37ULL + ki);
            ScenarioCase c;
            c.scenario.name = std::string(to_string(kind)) + "_s" + std::to_string(seed);
            c.scenario.t_end = spec.t_end;
            c.scenario.dt = spec.dt;
            c.scenario.seed = seed;
            c.scenario.load_r = spec.load_r * rng.uniform(0.85, 1.15);
            c.grid = spec.base_grid;
            c.grid.x_th = spec.base_grid.x_th * rng.uniform(0.7, 1.3);
            c.grid.connected = (kind != EventKind::overload);

            Event ev;
            ev.t = spec.event_time;
            ev.kind = kind;
            switch (kind) {
                case EventKind::fault:
                    ev.magnitude = spec.fault_level * rng.uniform(0.8, 1.2);
                    ev.duration = spec.fault_duration;
                    break;
                case EventKind::islanding:
                case EventKind::reconnection:
                    ev.magnitude = 0.0;
                    break;
                case EventKind::generation_outage: {
                    ev.magnitude = 1.0;  // remove the companion unit
                    UnitSpec companion;
                    companion.id = "companion";
                    companion.law = ControlLaw::droop;
                    companion.params = spec.companion_droop;
                    companion.x_coupling = spec.companion_x_coupling;
                    c.companions.push_back(companion);
                    break;
                }
                default:
                    ev.magnitude = spec.base_magnitude * rng.uniform(0.7, 1.3);
                    break;
            }
            c.scenario.events.push_back(ev);
            cases.push_back(std::move(c));
        }
    }
    return cases;
}

}  // namespace gfmlab

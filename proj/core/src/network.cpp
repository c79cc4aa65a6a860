#include "gfmlab/network.hpp"

#include <cmath>
#include <complex>

#include "gfmlab/errors.hpp"

namespace gfmlab {

namespace {

using Complex = std::complex<double>;

constexpr int kRhsEvalsPerStep = 4;

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw InvalidInputError(std::string(what) + ": non-finite value");
}

}  // namespace

const char* to_string(ControlLaw law) {
    switch (law) {
        case ControlLaw::droop: return "droop";
        case ControlLaw::psl: return "psl";
        case ControlLaw::vsm: return "vsm";
        case ControlLaw::vsm_damped: return "vsm_damped";
        case ControlLaw::voc: return "voc";
        case ControlLaw::blend: return "blend";
    }
    return "?";
}

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::load_surge: return "load_surge";
        case EventKind::load_drop: return "load_drop";
        case EventKind::overload: return "overload";
        case EventKind::generation_outage: return "generation_outage";
        case EventKind::fault: return "fault";
        case EventKind::islanding: return "islanding";
        case EventKind::reconnection: return "reconnection";
    }
    return "?";
}

void GridParams::validate() const {
    for (double v : {e_th, r_th, x_th, omega_grid, phase0}) require_finite(v, "GridParams");
    if (e_th < 0.0) throw InvalidInputError("GridParams: e_th must be >= 0");
    if (r_th < 0.0) throw InvalidInputError("GridParams: r_th must be >= 0");
    if (connected && !(x_th > 0.0)) {
        throw InvalidInputError("GridParams: x_th must be > 0 when connected");
    }
}

void UnitSpec::validate() const {
    if (id.empty()) throw InvalidInputError("UnitSpec: empty id");
    if (!(x_coupling > 0.0)) throw InvalidInputError("UnitSpec: x_coupling must be > 0");
    if (!(rating > 0.0)) throw InvalidInputError("UnitSpec: rating must be > 0");
    if (tau_meas < 0.0) throw InvalidInputError("UnitSpec: tau_meas must be >= 0");
    require_finite(q_ref, "UnitSpec");

    const bool law_matches_params =
        (law == ControlLaw::droop && std::holds_alternative<DroopParams>(params)) ||
        ((law == ControlLaw::vsm || law == ControlLaw::vsm_damped) &&
         std::holds_alternative<VsmParams>(params)) ||
        (law == ControlLaw::psl && std::holds_alternative<PslParams>(params)) ||
        (law == ControlLaw::voc && std::holds_alternative<VocParams>(params)) ||
        (law == ControlLaw::blend && std::holds_alternative<BlendParams>(params));
    if (!law_matches_params) {
        throw InvalidInputError("UnitSpec '" + id + "': parameter record does not match law '" +
                                to_string(law) + "'");
    }

    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BlendParams>) {
                p.droop.validate();
                p.vsm.validate();
                p.psl.validate();
                p.voc.validate();
                const auto report = check_feasible(p.weights);
                if (!report.feasible) {
                    std::string msg = "UnitSpec '" + id + "': infeasible blend weights:";
                    for (const auto& v : report.violations) msg += " [" + v + "]";
                    throw ConstraintViolationError(msg);
                }
            } else {
                p.validate();
            }
        },
        params);

    if (secondary) {
        secondary->validate();
        if (law != ControlLaw::droop) {
            throw InvalidInputError("UnitSpec '" + id +
                                    "': secondary restoration is supported on the droop law only");
        }
    }
}

void ScenarioSpec::validate() const {
    if (!(dt > 0.0)) throw InvalidInputError("ScenarioSpec: dt must be > 0");
    if (!(t_end >= dt)) throw InvalidInputError("ScenarioSpec: t_end must be >= dt");
    if (!(load_r > 0.0)) throw InvalidInputError("ScenarioSpec: load_r must be > 0");
    const double n_steps = std::round(t_end / dt);
    if (n_steps > 2e8) throw InvalidInputError("ScenarioSpec: too many steps");
    double prev = -1.0;
    for (const auto& ev : events) {
        require_finite(ev.t, "Event");
        require_finite(ev.magnitude, "Event");
        require_finite(ev.duration, "Event");
        if (ev.duration < 0.0) throw InvalidInputError("Event: duration must be >= 0");
        if (!(ev.t >= 0.0 && ev.t <= t_end)) {
            throw InvalidInputError("Event: time must lie within [0, t_end]");
        }
        if (!(ev.t > prev)) throw InvalidInputError("Event: times must be strictly increasing");
        prev = ev.t;
    }
}

double power_flow_angle(double v1, double v2, double x, double delta) {
    for (double v : {v1, v2, x, delta}) require_finite(v, "power_flow_angle");
    if (!(x > 0.0)) throw InvalidImpedanceError("power_flow_angle: x must be > 0");
    return v1 * v2 / x * std::sin(delta);
}

double angle_from_power(double p, double v1, double v2, double x) {
    for (double v : {p, v1, v2, x}) require_finite(v, "angle_from_power");
    if (!(x > 0.0)) throw InvalidImpedanceError("angle_from_power: x must be > 0");
    const double arg = p * x / (v1 * v2);
    if (std::abs(arg) > 1.0) {
        throw TransferLimitError("angle_from_power: |p*x/(v1*v2)| > 1, transfer limit exceeded");
    }
    return std::asin(arg);
}

double sharing_ratio(double kp_i, double kp_j) {
    require_finite(kp_i, "sharing_ratio");
    require_finite(kp_j, "sharing_ratio");
    if (kp_i == 0.0) throw SingularityError("sharing_ratio: kp_i must be nonzero");
    return kp_j / kp_i;
}

void apply_event(EngineState& state, const Event& event) {
    switch (event.kind) {
        case EventKind::load_surge:
        case EventKind::overload:
            state.load_g += event.magnitude;
            break;
        case EventKind::load_drop:
            state.load_g = std::max(0.0, state.load_g - event.magnitude);
            break;
        case EventKind::islanding:
            state.grid_connected = false;
            break;
        case EventKind::reconnection:
            state.grid_connected = true;
            break;
        case EventKind::fault:
            state.fault_level = event.magnitude;
            state.fault_end_idx = state.step_idx + std::llround(event.duration / state.dt);
            break;
        case EventKind::generation_outage: {
            const auto idx = static_cast<long long>(std::llround(event.magnitude));
            if (idx < 0 || idx >= static_cast<long long>(state.unit_active.size())) {
                throw ConfigError("generation_outage: unit index out of range");
            }
            state.unit_active[static_cast<std::size_t>(idx)] = 0;
            break;
        }
    }
}

namespace {

// Flat-state layout of one unit inside the engine's global ODE vector.
struct UnitLayout {
    int base = 0;         // start offset
    int size = 0;
    // offsets relative to base; -1 when the slot does not exist for the law
    int p_f = -1, q_f = -1, v_f = -1;
    int theta = -1;       // droop/vsm/psl/voc angle; blend: droop sub-angle
    int omega = -1;       // vsm family
    int v_exc = -1;       // vsm excitation / voc amplitude
    int aux = -1;         // psl integral
    int sec = -1;         // secondary restoration integral
    // blend extra sub-blocks
    int th_vsm = -1, om_vsm = -1, vx_vsm = -1;
    int th_psl = -1, aux_psl = -1;
    int th_voc = -1, v_voc = -1;
};

struct SolveOutputs {
    Complex v_bus{0.0, 0.0};
    double p_grid = 0.0;           // into the grid branch, measured at the bus
    std::vector<double> p, q;      // PCC injections per unit
    std::vector<double> e_cmd;     // commanded magnitudes
    std::vector<double> theta_cmd; // commanded angles
    std::vector<double> omega_rep; // reported instantaneous frequency
};

class ScenarioEngine {
public:
    ScenarioEngine(const std::vector<UnitSpec>& units, const GridParams& grid,
                   const ScenarioSpec& scenario, const PlantMeta& plant)
        : units_(units), grid_(grid), scenario_(scenario), plant_(plant) {
        grid_.validate();
        scenario_.validate();
        if (units_.empty()) throw InvalidInputError("run_simulation: at least one unit required");
        for (const auto& u : units_) u.validate();
        for (const auto& ev : scenario_.events) {
            if (ev.kind == EventKind::generation_outage) {
                const auto idx = static_cast<long long>(std::llround(ev.magnitude));
                if (idx < 0 || idx >= static_cast<long long>(units_.size())) {
                    throw ConfigError("generation_outage event: unit index out of range");
                }
            }
        }

        // Commanded voltages are computed from filter states ahead of the
        // network solve, so the engine needs strictly positive filter
        // constants (an unfiltered measurement would close an algebraic loop
        // through the bus solution).
        for (const auto& u : units_) {
            if (!(u.tau_meas > 0.0)) {
                throw InvalidInputError("unit '" + u.id + "': engine requires tau_meas > 0");
            }
            if (const auto* d = std::get_if<DroopParams>(&u.params); d && !(d->tau_filter > 0.0)) {
                throw InvalidInputError("unit '" + u.id + "': engine requires tau_filter > 0");
            }
            if (const auto* b = std::get_if<BlendParams>(&u.params);
                b && !(b->droop.tau_filter > 0.0)) {
                throw InvalidInputError("unit '" + u.id + "': engine requires tau_filter > 0");
            }
        }

        n_steps_ = static_cast<long long>(std::llround(scenario_.t_end / scenario_.dt));
        build_layout();
        init_state();
    }

    SimTrace run() {
        SimTrace trace;
        trace.dt = scenario_.dt;
        trace.seed = scenario_.seed;
        trace.plant = plant_;
        trace.units.resize(units_.size());
        const auto rows = static_cast<std::size_t>(n_steps_ + 1);
        trace.t.reserve(rows);
        trace.v_bus.reserve(rows);
        trace.p_grid.reserve(rows);
        trace.grid_connected.reserve(rows);
        for (std::size_t i = 0; i < units_.size(); ++i) {
            auto& ut = trace.units[i];
            ut.id = units_[i].id;
            ut.p.reserve(rows);
            ut.q.reserve(rows);
            ut.v.reserve(rows);
            ut.omega.reserve(rows);
            ut.theta.reserve(rows);
        }

        std::size_t next_event = 0;
        const double dt = scenario_.dt;
        for (long long k = 0; k <= n_steps_; ++k) {
            es_.step_idx = k;
            const double t = static_cast<double>(k) * dt;
            while (next_event < scenario_.events.size() &&
                   event_step(scenario_.events[next_event]) <= k) {
                apply_event(es_, scenario_.events[next_event]);
                ++next_event;
            }

            try {
                SolveOutputs out;
                compute_rhs(t, y_, k1_, &out);
                record(trace, t, out);
                if (k == n_steps_) break;
                rk4_advance(t, dt);
            } catch (const SimulationAbortError&) {
                throw;
            } catch (const Error& e) {
                throw SimulationAbortError(t, e.what());
            }
        }
        return trace;
    }

private:
    long long event_step(const Event& ev) const {
        return static_cast<long long>(std::ceil(ev.t / scenario_.dt - 1e-9));
    }

    void build_layout() {
        layouts_.resize(units_.size());
        int offset = 0;
        for (std::size_t i = 0; i < units_.size(); ++i) {
            UnitLayout& L = layouts_[i];
            L.base = offset;
            int n = 0;
            L.p_f = n++;
            L.q_f = n++;
            L.v_f = n++;
            switch (units_[i].law) {
                case ControlLaw::droop:
                    L.theta = n++;
                    if (units_[i].secondary) L.sec = n++;
                    break;
                case ControlLaw::vsm:
                case ControlLaw::vsm_damped:
                    L.theta = n++;
                    L.omega = n++;
                    L.v_exc = n++;
                    break;
                case ControlLaw::psl:
                    L.theta = n++;
                    L.aux = n++;
                    break;
                case ControlLaw::voc:
                    L.theta = n++;
                    L.v_exc = n++;
                    break;
                case ControlLaw::blend:
                    L.theta = n++;     // droop sub-angle
                    L.th_vsm = n++;
                    L.om_vsm = n++;
                    L.vx_vsm = n++;
                    L.th_psl = n++;
                    L.aux_psl = n++;
                    L.th_voc = n++;
                    L.v_voc = n++;
                    break;
            }
            L.size = n;
            offset += n;
        }
        state_size_ = offset;
        y_.assign(state_size_, 0.0);
        k1_.assign(state_size_, 0.0);
        k2_.assign(state_size_, 0.0);
        k3_.assign(state_size_, 0.0);
        k4_.assign(state_size_, 0.0);
        scratch_.assign(state_size_, 0.0);
    }

    static double power_setpoint(const UnitSpec& u) {
        return std::visit(
            [](const auto& p) -> double {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, DroopParams>) return p.p_ref;
                if constexpr (std::is_same_v<T, VsmParams>) return p.p_mech;
                if constexpr (std::is_same_v<T, PslParams>) return p.p_ref;
                if constexpr (std::is_same_v<T, VocParams>) return 0.0;
                if constexpr (std::is_same_v<T, BlendParams>) return p.droop.p_ref;
                return 0.0;
            },
            u.params);
    }

    void init_state() {
        es_.load_g = 1.0 / scenario_.load_r;
        es_.grid_connected = grid_.connected;
        es_.unit_active.assign(units_.size(), 1);
        es_.step_idx = 0;
        es_.dt = scenario_.dt;

        for (std::size_t i = 0; i < units_.size(); ++i) {
            const auto& u = units_[i];
            const auto& L = layouts_[i];
            double theta0 = 0.0;
            if (grid_.connected) {
                // Start near the power-angle equilibrium so scenarios open
                // without a synthetic synchronization transient.
                const double p_set = power_setpoint(u);
                theta0 = grid_.phase0 +
                         angle_from_power(p_set, 1.0, grid_.e_th, u.x_coupling + grid_.x_th);
            }
            std::visit(
                [&](const auto& p) {
                    using T = std::decay_t<decltype(p)>;
                    if constexpr (std::is_same_v<T, DroopParams>) {
                        y_[L.base + L.theta] = theta0;
                    } else if constexpr (std::is_same_v<T, VsmParams>) {
                        y_[L.base + L.theta] = theta0;
                        y_[L.base + L.omega] = p.omega_nom;
                        y_[L.base + L.v_exc] = u.v0.value_or(p.v_nom);
                    } else if constexpr (std::is_same_v<T, PslParams>) {
                        y_[L.base + L.theta] = theta0;
                        y_[L.base + L.aux] = 0.0;
                    } else if constexpr (std::is_same_v<T, VocParams>) {
                        y_[L.base + L.theta] = theta0;
                        y_[L.base + L.v_exc] = u.v0.value_or(std::sqrt(2.0 / p.beta()));
                    } else if constexpr (std::is_same_v<T, BlendParams>) {
                        y_[L.base + L.theta] = theta0;
                        y_[L.base + L.th_vsm] = theta0;
                        y_[L.base + L.om_vsm] = p.vsm.omega_nom;
                        y_[L.base + L.vx_vsm] = p.vsm.v_nom;
                        y_[L.base + L.th_psl] = theta0;
                        y_[L.base + L.aux_psl] = 0.0;
                        y_[L.base + L.th_voc] = theta0;
                        y_[L.base + L.v_voc] = u.v0.value_or(std::sqrt(2.0 / p.voc.beta()));
                    }
                },
                u.params);
        }

        // Prime the measurement filters with the solved t=0 electrical state.
        SolveOutputs out;
        compute_rhs(0.0, y_, k1_, &out);
        for (std::size_t i = 0; i < units_.size(); ++i) {
            const auto& L = layouts_[i];
            y_[L.base + L.p_f] = out.p[i];
            y_[L.base + L.q_f] = out.q[i];
            y_[L.base + L.v_f] = std::abs(out.v_bus);
        }
    }

    // Commanded phasor of unit i given the current state vector.
    void commanded(const std::vector<double>& y, std::size_t i, double& e_mag,
                   double& theta) const {
        const auto& u = units_[i];
        const auto& L = layouts_[i];
        std::visit(
            [&](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, DroopParams>) {
                    theta = y[L.base + L.theta];
                    e_mag = p.v_nom - p.kq * (y[L.base + L.q_f] - p.q_ref);
                    if (e_mag < 0.0) {
                        throw VoltageCollapseError("unit '" + u.id + "': Q-V droop voltage < 0");
                    }
                } else if constexpr (std::is_same_v<T, VsmParams>) {
                    theta = y[L.base + L.theta];
                    e_mag = y[L.base + L.v_exc];
                } else if constexpr (std::is_same_v<T, PslParams>) {
                    theta = y[L.base + L.theta];
                    e_mag = p.v_nom + p.kv_prop * (p.v_nom - y[L.base + L.v_f]);
                } else if constexpr (std::is_same_v<T, VocParams>) {
                    theta = y[L.base + L.theta];
                    e_mag = y[L.base + L.v_exc];
                    if (e_mag <= kVocAmplitudeFloor) {
                        throw OscillatorCollapseError("unit '" + u.id +
                                                      "': oscillator amplitude at floor");
                    }
                } else if constexpr (std::is_same_v<T, BlendParams>) {
                    const auto& w = p.weights;
                    theta = w.alpha * y[L.base + L.theta] + w.beta * y[L.base + L.th_vsm] +
                            w.gamma * y[L.base + L.th_psl] + w.nu * y[L.base + L.th_voc];
                    e_mag = p.droop.v_nom - p.droop.kq * (y[L.base + L.q_f] - p.droop.q_ref);
                    if (e_mag < 0.0) {
                        throw VoltageCollapseError("unit '" + u.id + "': Q-V droop voltage < 0");
                    }
                    if (y[L.base + L.v_voc] <= kVocAmplitudeFloor) {
                        throw OscillatorCollapseError("unit '" + u.id +
                                                      "': VOC sub-oscillator at floor");
                    }
                }
            },
            u.params);
    }

    // Full right-hand side: algebraic network solve + controller/filter
    // derivatives. `out`, when non-null, receives the recorded quantities.
    void compute_rhs(double t, const std::vector<double>& y, std::vector<double>& dy,
                     SolveOutputs* out) const {
        dy.assign(state_size_, 0.0);

        const std::size_t n = units_.size();
        thread_local std::vector<double> e_mag, theta;
        thread_local std::vector<Complex> emf, y_adm;
        e_mag.assign(n, 0.0);
        theta.assign(n, 0.0);
        emf.assign(n, Complex{});
        y_adm.assign(n, Complex{});

        Complex num{0.0, 0.0};
        Complex den{es_.load_g, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            if (!es_.unit_active[i]) continue;
            commanded(y, i, e_mag[i], theta[i]);
            emf[i] = std::polar(e_mag[i], theta[i]);
            y_adm[i] = Complex{0.0, -1.0 / units_[i].x_coupling};
            num += emf[i] * y_adm[i];
            den += y_adm[i];
        }
        Complex e_grid{0.0, 0.0};
        Complex y_grid{0.0, 0.0};
        if (es_.grid_connected) {
            e_grid = std::polar(grid_.e_th, grid_.phase0 + grid_.omega_grid * t);
            y_grid = 1.0 / Complex{grid_.r_th, grid_.x_th};
            num += e_grid * y_grid;
            den += y_grid;
        }
        Complex v_bus = num / den;

        const bool fault_on = es_.fault_end_idx >= 0 && es_.step_idx < es_.fault_end_idx;
        if (fault_on) {
            v_bus = std::polar(es_.fault_level, std::arg(v_bus));
        }
        const double v_bus_mag = std::abs(v_bus);

        if (out) {
            out->v_bus = v_bus;
            out->p.assign(n, 0.0);
            out->q.assign(n, 0.0);
            out->e_cmd.assign(n, 0.0);
            out->theta_cmd.assign(n, 0.0);
            out->omega_rep.assign(n, 0.0);
            out->p_grid = 0.0;
            if (es_.grid_connected) {
                const Complex i_grid = (v_bus - e_grid) * y_grid;
                out->p_grid = (v_bus * std::conj(i_grid)).real();
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            const auto& u = units_[i];
            const auto& L = layouts_[i];
            if (!es_.unit_active[i]) {
                if (out) {
                    out->theta_cmd[i] = y[L.base + L.theta];
                }
                continue;
            }

            const Complex current = (emf[i] - v_bus) * y_adm[i];
            const Complex s = v_bus * std::conj(current);
            const double p_meas = s.real();
            const double q_meas = s.imag();

            const double tau = u.tau_meas;
            double omega_rep = 0.0;

            std::visit(
                [&](const auto& p) {
                    using T = std::decay_t<decltype(p)>;
                    if constexpr (std::is_same_v<T, DroopParams>) {
                        const double p_used = y[L.base + L.p_f];
                        double omega = p.omega_nom - p.kp * (p_used - p.p_ref);
                        if (L.sec >= 0) {
                            const auto& sec = *u.secondary;
                            omega += sec.ki_sec * y[L.base + L.sec];
                            dy[L.base + L.sec] = p.omega_nom - omega;
                        }
                        dy[L.base + L.theta] = omega;
                        dy[L.base + L.p_f] = (p_meas - y[L.base + L.p_f]) / p.tau_filter;
                        dy[L.base + L.q_f] = (q_meas - y[L.base + L.q_f]) / p.tau_filter;
                        omega_rep = omega;
                    } else if constexpr (std::is_same_v<T, VsmParams>) {
                        const double p_used = y[L.base + L.p_f];
                        const double q_used = y[L.base + L.q_f];
                        const double omega = y[L.base + L.omega];
                        if (u.law == ControlLaw::vsm) {
                            dy[L.base + L.omega] = dyn::vsm_domega(p, omega, p_used);
                        } else {
                            dy[L.base + L.omega] =
                                dyn::vsm_damped_ddev(p, omega - p.omega_nom, p_used);
                        }
                        dy[L.base + L.theta] = omega;
                        dy[L.base + L.v_exc] =
                            dyn::vsm_dv(p, y[L.base + L.v_exc], q_used, u.q_ref);
                        omega_rep = omega;
                    } else if constexpr (std::is_same_v<T, PslParams>) {
                        const double p_used = y[L.base + L.p_f];
                        dy[L.base + L.aux] = p.k_pll_i * (p.p_ref - p_used);
                        const double omega =
                            p.omega_nom + p.k_pll_p * (p.p_ref - p_used) + y[L.base + L.aux];
                        dy[L.base + L.theta] = omega;
                        omega_rep = omega;
                    } else if constexpr (std::is_same_v<T, VocParams>) {
                        const double p_used = y[L.base + L.p_f];
                        const double q_used = y[L.base + L.q_f];
                        const double v = y[L.base + L.v_exc];
                        dy[L.base + L.v_exc] = dyn::voc_dv(p, v, q_used);
                        const double omega = dyn::voc_dtheta(p, v, p_used);
                        dy[L.base + L.theta] = omega;
                        omega_rep = omega;
                    } else if constexpr (std::is_same_v<T, BlendParams>) {
                        const double p_used = y[L.base + L.p_f];
                        const double q_used = y[L.base + L.q_f];
                        // droop share
                        const double om_mp =
                            p.droop.omega_nom - p.droop.kp * (p_used - p.droop.p_ref);
                        dy[L.base + L.theta] = om_mp;
                        // vsm share
                        const double om_vsm = y[L.base + L.om_vsm];
                        dy[L.base + L.om_vsm] = dyn::vsm_domega(p.vsm, om_vsm, p_used);
                        dy[L.base + L.th_vsm] = om_vsm;
                        dy[L.base + L.vx_vsm] =
                            dyn::vsm_dv(p.vsm, y[L.base + L.vx_vsm], q_used, u.q_ref);
                        // psl share
                        dy[L.base + L.aux_psl] = p.psl.k_pll_i * (p.psl.p_ref - p_used);
                        const double om_psl = p.psl.omega_nom +
                                              p.psl.k_pll_p * (p.psl.p_ref - p_used) +
                                              y[L.base + L.aux_psl];
                        dy[L.base + L.th_psl] = om_psl;
                        // voc share
                        const double v_voc = y[L.base + L.v_voc];
                        dy[L.base + L.v_voc] = dyn::voc_dv(p.voc, v_voc, q_used);
                        const double om_voc = dyn::voc_dtheta(p.voc, v_voc, p_used);
                        dy[L.base + L.th_voc] = om_voc;

                        const auto& w = p.weights;
                        omega_rep = w.alpha * om_mp + w.beta * om_vsm + w.gamma * om_psl +
                                    w.nu * om_voc;
                    }
                },
                u.params);

            // measurement filters; droop filters with its own tau_filter
            if (const auto* d = std::get_if<DroopParams>(&u.params); d == nullptr) {
                const double tau_pq =
                    std::holds_alternative<BlendParams>(u.params)
                        ? std::get<BlendParams>(u.params).droop.tau_filter
                        : tau;
                dy[L.base + L.p_f] = (p_meas - y[L.base + L.p_f]) / tau_pq;
                dy[L.base + L.q_f] = (q_meas - y[L.base + L.q_f]) / tau_pq;
            }
            dy[L.base + L.v_f] = (v_bus_mag - y[L.base + L.v_f]) / tau;

            if (out) {
                out->p[i] = p_meas;
                out->q[i] = q_meas;
                out->e_cmd[i] = e_mag[i];
                out->theta_cmd[i] = theta[i];
                out->omega_rep[i] = omega_rep;
            }
        }
    }

    void rk4_advance(double t, double dt) {
        // k1_ already holds the derivative at (t, y_) from the recording solve
        for (int i = 0; i < state_size_; ++i) scratch_[i] = y_[i] + 0.5 * dt * k1_[i];
        compute_rhs(t + 0.5 * dt, scratch_, k2_, nullptr);
        for (int i = 0; i < state_size_; ++i) scratch_[i] = y_[i] + 0.5 * dt * k2_[i];
        compute_rhs(t + 0.5 * dt, scratch_, k3_, nullptr);
        for (int i = 0; i < state_size_; ++i) scratch_[i] = y_[i] + dt * k3_[i];
        compute_rhs(t + dt, scratch_, k4_, nullptr);
        for (int i = 0; i < state_size_; ++i) {
            y_[i] += dt / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
        }
    }

    void record(SimTrace& trace, double t, const SolveOutputs& out) {
        trace.t.push_back(t);
        trace.v_bus.push_back(std::abs(out.v_bus));
        trace.p_grid.push_back(out.p_grid);
        trace.grid_connected.push_back(es_.grid_connected ? 1 : 0);
        for (std::size_t i = 0; i < units_.size(); ++i) {
            auto& ut = trace.units[i];
            ut.p.push_back(out.p[i]);
            ut.q.push_back(out.q[i]);
            ut.v.push_back(out.e_cmd[i]);
            ut.omega.push_back(out.omega_rep[i]);
            ut.theta.push_back(out.theta_cmd[i]);
        }
    }

    std::vector<UnitSpec> units_;
    GridParams grid_;
    ScenarioSpec scenario_;
    PlantMeta plant_;
    std::vector<UnitLayout> layouts_;
    EngineState es_;
    int state_size_ = 0;
    long long n_steps_ = 0;
    std::vector<double> y_, k1_, k2_, k3_, k4_, scratch_;
};

}  // namespace

SimTrace run_simulation(const std::vector<UnitSpec>& units, const GridParams& grid,
                        const ScenarioSpec& scenario, const PlantMeta& plant) {
    ScenarioEngine engine(units, grid, scenario, plant);
    return engine.run();
}

}  // namespace gfmlab

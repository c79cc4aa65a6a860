#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gfmlab/blend.hpp"
#include "gfmlab/constants.hpp"
#include "gfmlab/controllers.hpp"

namespace gfmlab {

enum class ControlLaw { droop, psl, vsm, vsm_damped, voc, blend };
enum class EventKind {
    load_surge,
    load_drop,
    overload,
    generation_outage,
    fault,
    islanding,
    reconnection
};

const char* to_string(ControlLaw law);
const char* to_string(EventKind kind);

// Thevenin equivalent of the upstream grid.
struct GridParams {
    double e_th = 1.0;    // Thevenin voltage magnitude (pu)
    double r_th = 0.0;    // resistance (pu)
    double x_th = 0.3;    // reactance (pu)
    double omega_grid = kOmegaNominal;  // rad/s
    double phase0 = 0.0;  // grid phasor angle at t = 0 (rad)
    bool connected = true;

    void validate() const;
};

// Parameter bundle of a blended unit: the four constituent laws plus weights.
struct BlendParams {
    BlendWeights weights;
    DroopParams droop;
    VsmParams vsm;
    PslParams psl;
    VocParams voc;
};

using LawParams = std::variant<DroopParams, VsmParams, PslParams, VocParams, BlendParams>;

// One grid-forming unit attached to the common bus through x_coupling.
struct UnitSpec {
    std::string id;
    ControlLaw law = ControlLaw::droop;
    LawParams params = DroopParams{};
    std::optional<SecondaryParams> secondary;  // droop law only
    double x_coupling = 0.05;  // unit-to-bus reactance (pu)
    double rating = 230e3;     // VA base (metadata; all pu on the common base)
    double tau_meas = 0.02;    // measurement filter time constant (s)
    double q_ref = 0.0;        // reactive reference for the VSM excitation loop
    std::optional<double> v0;  // initial voltage state override (VOC amplitude)

    void validate() const;
};

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::load_surge;
    double magnitude = 0.0;
    double duration = 0.0;  // fault only: depressed-bus interval (s)
};

// Timed event script over a resistive load at the common bus.
struct ScenarioSpec {
    std::string name;
    double t_end = 1.0;
    double dt = 1e-3;
    std::vector<Event> events;  // strictly increasing times within [0, t_end]
    double load_r = 1.098;      // pu resistance
    long long seed = 0;

    void validate() const;
};

// Hardware-plant values carried as metadata only (average model).
struct PlantMeta {
    double v_base_ll = 480.0;     // line-to-line voltage base (V)
    double s_base = 230e3;        // power base (VA)
    double vdc = 800.0;           // DC link voltage (V)
    double f_switching = 20e3;    // switching frequency (Hz)
};

struct UnitTrace {
    std::string id;
    std::vector<double> p;      // pu
    std::vector<double> q;      // pu
    std::vector<double> v;      // commanded voltage magnitude (pu)
    std::vector<double> omega;  // rad/s
    std::vector<double> theta;  // rad, unwrapped

    double freq_hz(std::size_t i) const { return omega[i] / kTwoPi; }
};

struct SimTrace {
    std::vector<double> t;
    std::vector<UnitTrace> units;
    std::vector<double> v_bus;             // pu
    std::vector<double> p_grid;            // power into the grid branch at the bus (pu)
    std::vector<std::uint8_t> grid_connected;
    double dt = 0.0;
    long long seed = 0;
    PlantMeta plant;
};

// ----- phasor relations -----

// P = v1*v2/x * sin(delta). Throws InvalidImpedanceError when x <= 0.
double power_flow_angle(double v1, double v2, double x, double delta);

// delta = arcsin(p*x/(v1*v2)). Throws TransferLimitError when the argument
// magnitude exceeds 1 (weak-grid infeasibility).
double angle_from_power(double p, double v1, double v2, double x);

// Steady-state active power sharing ratio P_i/P_j = kp_j/kp_i.
double sharing_ratio(double kp_i, double kp_j);

// ----- scenario engine -----

// Mutable switchgear state of a running scenario; exposed so event handling
// is testable in isolation. Dynamic controller states live in the engine.
struct EngineState {
    double load_g = 0.0;       // load conductance (pu)
    bool grid_connected = true;
    long long fault_end_idx = -1;  // exclusive step index; < 0 when no fault armed
    double fault_level = 1.0;      // bus-voltage magnitude while the fault holds
    std::vector<std::uint8_t> unit_active;
    long long step_idx = 0;
    double dt = 1e-3;
};

// Applies one event deterministically. Unknown kinds cannot be constructed;
// generation_outage interprets magnitude as the 0-based unit index.
void apply_event(EngineState& state, const Event& event);

// Runs the fixed-step phasor simulation: the network is solved algebraically
// at every integrator stage, controller and filter states advance with one
// global classical RK4 step per dt. Deterministic for identical inputs.
SimTrace run_simulation(const std::vector<UnitSpec>& units, const GridParams& grid,
                        const ScenarioSpec& scenario, const PlantMeta& plant = {});

}  // namespace gfmlab

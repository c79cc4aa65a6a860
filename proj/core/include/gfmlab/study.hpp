#pragma once

#include <array>
#include <optional>
#include <string>

#include "gfmlab/network.hpp"

namespace gfmlab {

// Shared law-parameter template from which the pure-controller and blended
// units of an optimization study are instantiated.
struct UnitTemplate {
    DroopParams droop;
    VsmParams vsm;
    PslParams psl;
    VocParams voc;
    double x_coupling = 0.05;
    double rating = 230e3;
    double tau_meas = 0.02;
    double q_ref = 0.0;
    std::optional<SecondaryParams> secondary;  // applied to the droop instantiation
    std::optional<double> v0;
};

// Instantiates a single-law unit from the template. `law` must not be blend.
UnitSpec make_unit(const UnitTemplate& tmpl, ControlLaw law, const std::string& id);

// Instantiates a blended unit carrying all four sub-laws and the weights.
UnitSpec make_blend_unit(const UnitTemplate& tmpl, const BlendWeights& weights,
                         const std::string& id);

// Evaluation window of the frequency-error objective over a scenario trace.
struct ObjectiveWindow {
    double omega_target = kOmegaNominal;
    double t_start = 0.0;  // samples before this time are excluded
    int stride = 1;        // take every stride-th grid point
};

struct ControllerStudy {
    FreqTraces traces;
    ObjectiveSpec spec;
    std::array<SimTrace, 4> runs;  // droop, vsm, psl, voc
};

// Runs the four pure controllers on the same scenario and assembles the
// aligned frequency traces the weight optimization consumes. Companion units
// (fixed across the four runs) ride along in every simulation.
ControllerStudy run_pure_controllers(const UnitTemplate& tmpl, const GridParams& grid,
                                     const ScenarioSpec& scenario,
                                     const ObjectiveWindow& window = {},
                                     const std::vector<UnitSpec>& companions = {});

}  // namespace gfmlab

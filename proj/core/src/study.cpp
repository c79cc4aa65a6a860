#include "gfmlab/study.hpp"

#include <cmath>

#include "gfmlab/errors.hpp"

namespace gfmlab {

UnitSpec make_unit(const UnitTemplate& tmpl, ControlLaw law, const std::string& id) {
    UnitSpec u;
    u.id = id;
    u.law = law;
    u.x_coupling = tmpl.x_coupling;
    u.rating = tmpl.rating;
    u.tau_meas = tmpl.tau_meas;
    u.q_ref = tmpl.q_ref;
    u.v0 = tmpl.v0;
    switch (law) {
        case ControlLaw::droop:
            u.params = tmpl.droop;
            u.secondary = tmpl.secondary;
            break;
        case ControlLaw::vsm:
        case ControlLaw::vsm_damped:
            u.params = tmpl.vsm;
            break;
        case ControlLaw::psl:
            u.params = tmpl.psl;
            break;
        case ControlLaw::voc:
            u.params = tmpl.voc;
            break;
        case ControlLaw::blend:
            throw InvalidInputError("make_unit: use make_blend_unit for the blend law");
    }
    return u;
}

UnitSpec make_blend_unit(const UnitTemplate& tmpl, const BlendWeights& weights,
                         const std::string& id) {
    UnitSpec u;
    u.id = id;
    u.law = ControlLaw::blend;
    u.x_coupling = tmpl.x_coupling;
    u.rating = tmpl.rating;
    u.tau_meas = tmpl.tau_meas;
    u.q_ref = tmpl.q_ref;
    u.v0 = tmpl.v0;
    u.params = BlendParams{weights, tmpl.droop, tmpl.vsm, tmpl.psl, tmpl.voc};
    return u;
}

ControllerStudy run_pure_controllers(const UnitTemplate& tmpl, const GridParams& grid,
                                     const ScenarioSpec& scenario, const ObjectiveWindow& window,
                                     const std::vector<UnitSpec>& companions) {
    if (window.stride < 1) throw InvalidInputError("ObjectiveWindow: stride must be >= 1");

    ControllerStudy study;
    const std::array<ControlLaw, 4> laws{ControlLaw::droop, ControlLaw::vsm, ControlLaw::psl,
                                         ControlLaw::voc};
    for (std::size_t k = 0; k < laws.size(); ++k) {
        std::vector<UnitSpec> units{make_unit(tmpl, laws[k], std::string("study_") +
                                                                 to_string(laws[k]))};
        units.insert(units.end(), companions.begin(), companions.end());
        study.runs[k] = run_simulation(units, grid, scenario);
    }

    const auto& t = study.runs[0].t;
    study.spec.omega_target = window.omega_target;
    for (std::size_t i = 0; i < t.size(); i += static_cast<std::size_t>(window.stride)) {
        if (t[i] + 1e-12 < window.t_start) continue;
        study.spec.sample_times.push_back(t[i]);
        study.traces.droop.push_back(study.runs[0].units[0].omega[i]);
        study.traces.vsm.push_back(study.runs[1].units[0].omega[i]);
        study.traces.psl.push_back(study.runs[2].units[0].omega[i]);
        study.traces.voc.push_back(study.runs[3].units[0].omega[i]);
    }
    study.spec.validate();
    return study;
}

}  // namespace gfmlab

#pragma once

#include "gfmlab/constants.hpp"

namespace gfmlab {

// Constants of the reduced 3rd-order synchronous machine.
struct SmParams {
    double xd = 1.8;          // synchronous d-axis reactance (pu)
    double xd_tr = 0.3;       // transient d-axis reactance (pu)
    double td0_tr = 5.0;      // open-circuit transient time constant (s)
    double j_inertia = 0.1;   // rotational inertia (pu*s^2/rad)
    double omega_nom = kOmegaNominal;

    // The internal-voltage dynamic adds the reactive-current term as printed
    // in the source model. Set true to use the conventional flux-decay sign
    // (subtract) instead.
    bool conventional_ir_sign = false;

    void validate() const;  // throws InvalidInputError
};

// Dynamic state of the machine.
struct SmState {
    double e_int = 1.0;              // internal voltage magnitude (pu)
    double omega = kOmegaNominal;    // rotor speed (rad/s)
    double theta = 0.0;              // rotor angle (rad), unwrapped
};

// Advances the internal-voltage lag
//   td0_tr * dE/dt = -E + e_field + (xd - xd_tr) * i_reactive
// by one RK4 step. Only e_int changes.
SmState sm_voltage_step(const SmState& state, const SmParams& params, double e_field,
                        double i_reactive, double dt);

// Advances the swing dynamic  j_inertia * omega * domega/dt = p_mech - p_elec
// together with dtheta/dt = omega by one RK4 step.
// Throws SingularityError when state.omega <= 0.
SmState sm_swing_step(const SmState& state, const SmParams& params, double p_mech,
                      double p_elec, double dt);

// Step-current effective reactance  x(t) = xd - (xd - xd_tr) * exp(-t/td0_tr).
double effective_reactance(const SmParams& params, double t);

}  // namespace gfmlab

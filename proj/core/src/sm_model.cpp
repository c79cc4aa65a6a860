#include "gfmlab/sm_model.hpp"

#include <cmath>

#include "gfmlab/errors.hpp"
#include "gfmlab/rk4.hpp"

namespace gfmlab {

void SmParams::validate() const {
    if (!(std::isfinite(xd) && std::isfinite(xd_tr) && std::isfinite(td0_tr) &&
          std::isfinite(j_inertia) && std::isfinite(omega_nom))) {
        throw InvalidInputError("SmParams: non-finite field");
    }
    if (!(xd > xd_tr && xd_tr > 0.0)) {
        throw InvalidInputError("SmParams: requires xd > xd_tr > 0");
    }
    if (td0_tr <= 0.0) throw InvalidInputError("SmParams: td0_tr must be > 0");
    if (j_inertia <= 0.0) throw InvalidInputError("SmParams: j_inertia must be > 0");
    if (omega_nom <= 0.0) throw InvalidInputError("SmParams: omega_nom must be > 0");
}

SmState sm_voltage_step(const SmState& state, const SmParams& params, double e_field,
                        double i_reactive, double dt) {
    params.validate();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInputError("sm_voltage_step: dt must be > 0");
    if (!std::isfinite(e_field) || !std::isfinite(i_reactive) || !std::isfinite(state.e_int)) {
        throw InvalidInputError("sm_voltage_step: non-finite input");
    }

    const double ir_sign = params.conventional_ir_sign ? -1.0 : 1.0;
    const double forcing = e_field + ir_sign * (params.xd - params.xd_tr) * i_reactive;

    auto deriv = [&](double, const std::array<double, 1>& y) {
        return std::array<double, 1>{(-y[0] + forcing) / params.td0_tr};
    };

    SmState out = state;
    out.e_int = rk4_step<1>({state.e_int}, 0.0, dt, deriv)[0];
    return out;
}

SmState sm_swing_step(const SmState& state, const SmParams& params, double p_mech,
                      double p_elec, double dt) {
    params.validate();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInputError("sm_swing_step: dt must be > 0");
    if (!std::isfinite(p_mech) || !std::isfinite(p_elec)) {
        throw InvalidInputError("sm_swing_step: non-finite power input");
    }
    if (!(state.omega > 0.0)) {
        throw SingularityError("sm_swing_step: acceleration divides by J*omega, omega must be > 0");
    }

    const double accel_power = p_mech - p_elec;
    auto deriv = [&](double, const std::array<double, 2>& y) {
        // y = {omega, theta}
        return std::array<double, 2>{accel_power / (params.j_inertia * y[0]), y[0]};
    };

    const auto next = rk4_step<2>({state.omega, state.theta}, 0.0, dt, deriv);
    SmState out = state;
    out.omega = next[0];
    out.theta = next[1];
    return out;
}

double effective_reactance(const SmParams& params, double t) {
    params.validate();
    if (!(t >= 0.0)) throw InvalidInputError("effective_reactance: t must be >= 0");
    return params.xd - (params.xd - params.xd_tr) * std::exp(-t / params.td0_tr);
}

}  // namespace gfmlab

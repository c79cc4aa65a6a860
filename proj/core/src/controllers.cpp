#include "gfmlab/controllers.hpp"

#include <cmath>

#include "gfmlab/errors.hpp"
#include "gfmlab/rk4.hpp"

namespace gfmlab {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw InvalidInputError(std::string(what) + ": non-finite value");
}

void require_dt(double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInputError("dt must be > 0");
}

}  // namespace

void DroopParams::validate() const {
    for (double v : {kp, kq, omega_nom, v_nom, p_ref, q_ref, tau_filter}) require_finite(v, "DroopParams");
    if (kp < 0.0) throw InvalidInputError("DroopParams: kp must be >= 0");
    if (kq < 0.0) throw InvalidInputError("DroopParams: kq must be >= 0");
    if (tau_filter < 0.0) throw InvalidInputError("DroopParams: tau_filter must be >= 0");
}

void VsmParams::validate() const {
    for (double v : {h_inertia, d_damp, p_mech, omega_nom, nq_slope, tq_exc, v_nom}) {
        require_finite(v, "VsmParams");
    }
    if (h_inertia <= 0.0) throw InvalidInputError("VsmParams: h_inertia must be > 0");
    if (d_damp < 0.0) throw InvalidInputError("VsmParams: d_damp must be >= 0");
    if (tq_exc <= 0.0) throw InvalidInputError("VsmParams: tq_exc must be > 0");
}

void PslParams::validate() const {
    for (double v : {k_pll_p, k_pll_i, omega_nom, p_ref, kv_prop, v_nom}) require_finite(v, "PslParams");
    if (k_pll_p < 0.0 || k_pll_i < 0.0 || kv_prop < 0.0) {
        throw InvalidInputError("PslParams: gains must be >= 0");
    }
}

void VocParams::validate() const {
    for (double v : {sigma, cap, k_i, k_v, alpha_cubic, omega_nom}) require_finite(v, "VocParams");
    if (sigma <= 0.0 || cap <= 0.0 || k_i <= 0.0 || k_v <= 0.0 || alpha_cubic <= 0.0) {
        throw InvalidInputError("VocParams: sigma, cap, k_i, k_v, alpha_cubic must all be > 0");
    }
}

void SecondaryParams::validate() const {
    for (double v : {ki_sec, k_i_q, delta_omega, delta_e}) require_finite(v, "SecondaryParams");
    if (eta_mode != 0 && eta_mode != 1) {
        throw InvalidInputError("SecondaryParams: eta_mode must be exactly 0 or 1");
    }
    if (ki_sec < 0.0) throw InvalidInputError("SecondaryParams: ki_sec must be >= 0");
}

double droop_frequency(const DroopParams& params, double p_filtered) {
    params.validate();
    require_finite(p_filtered, "droop_frequency");
    return params.omega_nom - params.kp * (p_filtered - params.p_ref);
}

double qv_droop_voltage(const DroopParams& params, double q_filtered) {
    params.validate();
    require_finite(q_filtered, "qv_droop_voltage");
    const double v = params.v_nom - params.kq * (q_filtered - params.q_ref);
    if (v < 0.0) throw VoltageCollapseError("qv_droop_voltage: commanded voltage below zero");
    return v;
}

double psl_frequency(const PslParams& params, double p_meas, double aux_integral) {
    params.validate();
    require_finite(p_meas, "psl_frequency");
    return params.omega_nom + params.k_pll_p * (params.p_ref - p_meas) + aux_integral;
}

double seamless_omega(const DroopParams& params, const SecondaryParams& sec, double p_meas) {
    params.validate();
    sec.validate();
    require_finite(p_meas, "seamless_omega");
    return params.omega_nom + params.kp * (p_meas - params.p_ref) + sec.delta_omega;
}

double seamless_voltage(const DroopParams& params, const SecondaryParams& sec, double q_meas,
                        double q_int) {
    params.validate();
    sec.validate();
    require_finite(q_meas, "seamless_voltage");
    require_finite(q_int, "seamless_voltage");
    const double integral_term = (sec.eta_mode == 1) ? sec.k_i_q * q_int : 0.0;
    const double v = params.v_nom - params.kq * (q_meas - params.q_ref) + integral_term + sec.delta_e;
    if (v < 0.0) throw VoltageCollapseError("seamless_voltage: commanded voltage below zero");
    return v;
}

double mixed_voc_vsm_theta(double theta_voc, double theta_vsm) {
    require_finite(theta_voc, "mixed_voc_vsm_theta");
    require_finite(theta_vsm, "mixed_voc_vsm_theta");
    return 0.5 * (theta_voc + theta_vsm);
}

ControllerState integrate_angle(const ControllerState& state, double omega, double dt) {
    require_dt(dt);
    require_finite(omega, "integrate_angle");
    ControllerState out = state;
    out.theta = state.theta + 0.5 * (state.omega + omega) * dt;
    out.omega = omega;
    return out;
}

namespace dyn {

double vsm_domega(const VsmParams& p, double omega, double p_elec) {
    return (p.p_mech - p_elec - p.d_damp * (omega - p.omega_nom)) / p.ta();
}

double vsm_damped_ddev(const VsmParams& p, double omega_dev, double p_elec) {
    return (p.p_mech - p_elec - p.d_damp / kTwoPi * omega_dev) / p.ta();
}

double vsm_dv(const VsmParams& p, double v, double q_elec, double q_ref) {
    return ((p.v_nom - p.nq_slope * (q_elec - q_ref)) - v) / p.tq_exc;
}

double voc_dv(const VocParams& p, double v, double q) {
    const double b = p.beta();
    return p.sigma / (2.0 * p.cap) * (v - 0.5 * b * v * v * v) -
           p.k_i * p.k_v / (2.0 * p.cap * v) * q;
}

double voc_dtheta(const VocParams& p, double v, double p_meas) {
    return p.omega_nom - p.k_i * p.k_v / (2.0 * p.cap * v * v) * p_meas;
}

}  // namespace dyn

ControllerState vsm_step(const ControllerState& state, const VsmParams& params, double p_elec,
                         double dt) {
    params.validate();
    require_dt(dt);
    require_finite(p_elec, "vsm_step");

    auto deriv = [&](double, const std::array<double, 2>& y) {
        // y = {omega, theta}
        return std::array<double, 2>{dyn::vsm_domega(params, y[0], p_elec), y[0]};
    };
    const auto next = rk4_step<2>({state.omega, state.theta}, 0.0, dt, deriv);

    ControllerState out = state;
    out.omega = next[0];
    out.theta = next[1];
    return out;
}

ControllerState vsm_damped_step(const ControllerState& state, const VsmParams& params,
                                double p_elec, double dt) {
    params.validate();
    require_dt(dt);
    require_finite(p_elec, "vsm_damped_step");

    auto deriv = [&](double, const std::array<double, 2>& y) {
        // y = {omega deviation, theta}
        return std::array<double, 2>{dyn::vsm_damped_ddev(params, y[0], p_elec),
                                     params.omega_nom + y[0]};
    };
    const auto next = rk4_step<2>({state.omega - params.omega_nom, state.theta}, 0.0, dt, deriv);

    ControllerState out = state;
    out.omega = params.omega_nom + next[0];
    out.theta = next[1];
    return out;
}

ControllerState vsm_reactive_step(const ControllerState& state, const VsmParams& params,
                                  double q_elec, double q_ref, double dt) {
    params.validate();
    require_dt(dt);
    require_finite(q_elec, "vsm_reactive_step");
    require_finite(q_ref, "vsm_reactive_step");

    auto deriv = [&](double, const std::array<double, 1>& y) {
        return std::array<double, 1>{dyn::vsm_dv(params, y[0], q_elec, q_ref)};
    };
    ControllerState out = state;
    out.v_mag = rk4_step<1>({state.v_mag}, 0.0, dt, deriv)[0];
    return out;
}

ControllerState psl_step(const ControllerState& state, const PslParams& params, double p_meas,
                         double dt) {
    params.validate();
    require_dt(dt);
    require_finite(p_meas, "psl_step");

    ControllerState out = state;
    out.aux_integral = state.aux_integral + params.k_pll_i * (params.p_ref - p_meas) * dt;
    const double omega = psl_frequency(params, p_meas, out.aux_integral);
    out.theta = state.theta + 0.5 * (state.omega + omega) * dt;
    out.omega = omega;
    return out;
}

ControllerState voc_step(const ControllerState& state, const VocParams& params, double p_meas,
                         double q_meas, double dt) {
    params.validate();
    require_dt(dt);
    require_finite(p_meas, "voc_step");
    require_finite(q_meas, "voc_step");
    if (state.v_mag <= kVocAmplitudeFloor) {
        throw OscillatorCollapseError("voc_step: amplitude at or below floor");
    }

    auto deriv = [&](double, const std::array<double, 2>& y) {
        // y = {v, theta}
        return std::array<double, 2>{dyn::voc_dv(params, y[0], q_meas),
                                     dyn::voc_dtheta(params, y[0], p_meas)};
    };
    const auto next = rk4_step<2>({state.v_mag, state.theta}, 0.0, dt, deriv);

    if (!(next[0] > kVocAmplitudeFloor)) {
        throw OscillatorCollapseError("voc_step: amplitude collapsed below floor");
    }
    ControllerState out = state;
    out.v_mag = next[0];
    out.theta = next[1];
    out.omega = dyn::voc_dtheta(params, next[0], p_meas);
    return out;
}

double secondary_correction(const SecondaryParams& params, std::span<const double> omega_history,
                            double omega_nom, double dt) {
    params.validate();
    require_dt(dt);
    if (omega_history.empty()) return 0.0;
    double integral = 0.0;
    for (std::size_t i = 1; i < omega_history.size(); ++i) {
        const double a = omega_nom - omega_history[i - 1];
        const double b = omega_nom - omega_history[i];
        integral += 0.5 * (a + b) * dt;
    }
    return params.ki_sec * integral;
}

}  // namespace gfmlab

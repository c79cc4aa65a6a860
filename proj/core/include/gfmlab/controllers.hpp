#pragma once

#include <span>

#include "gfmlab/constants.hpp"

namespace gfmlab {

// P-f / Q-V droop controller parameters.
struct DroopParams {
    double kp = 3.14159;      // P-f droop gain (rad/s per pu)
    double kq = 0.05;         // Q-V droop gain (pu voltage per pu reactive power)
    double omega_nom = kOmegaNominal;
    double v_nom = 1.0;       // pu
    double p_ref = 0.0;       // pu
    double q_ref = 0.0;       // pu
    double tau_filter = 0.02; // power measurement low-pass time constant (s)

    void validate() const;
};

// Virtual synchronous machine parameters. The swing inertia is realized as
// T_a = 2H.
struct VsmParams {
    double h_inertia = 2.0;   // inertia constant H (s)
    double d_damp = 50.0;     // damping coefficient (pu power per rad/s)
    double p_mech = 0.0;      // virtual mechanical power set-point (pu)
    double omega_nom = kOmegaNominal;
    double nq_slope = 0.05;   // Q-V slope (pu/pu)
    double tq_exc = 0.1;      // excitation time constant (s)
    double v_nom = 1.0;       // excitation voltage reference (pu)

    double ta() const { return 2.0 * h_inertia; }
    void validate() const;
};

// PI power-synchronization loop parameters.
struct PslParams {
    double k_pll_p = 0.5;     // proportional gain (rad/s per pu power)
    double k_pll_i = 1.0;     // integral gain (rad/s^2 per pu power)
    double omega_nom = kOmegaNominal;
    double p_ref = 0.0;       // pu
    double kv_prop = 0.0;     // proportional voltage-controller gain (pu/pu)
    double v_nom = 1.0;       // pu

    void validate() const;
};

// Virtual oscillator (averaged dynamics) parameters.
struct VocParams {
    double sigma = 1.0;        // conductance-like gain (pu)
    double cap = 0.02;         // virtual capacitance (pu*s)
    double k_i = 0.05;         // current scaling (pu)
    double k_v = 1.0;          // voltage scaling (pu)
    double alpha_cubic = 2.0 / 3.0;  // cubic coefficient alpha (pu)
    double omega_nom = kOmegaNominal;

    // beta = 3*alpha / (k_v^2 * sigma)
    double beta() const { return 3.0 * alpha_cubic / (k_v * k_v * sigma); }
    void validate() const;
};

// Dynamic state shared by all control laws. aux_integral carries the
// law-specific integrator (PSL power-error integral; unused elsewhere).
struct ControllerState {
    double theta = 0.0;               // rad, unwrapped
    double omega = kOmegaNominal;     // rad/s
    double v_mag = 1.0;               // pu
    double aux_integral = 0.0;
};

// Secondary restoration and seamless-transition parameters.
struct SecondaryParams {
    double ki_sec = 0.0;       // integral restoration gain (1/s)
    int eta_mode = 0;          // converter operation mode: 0 islanded, 1 grid-connected
    double k_i_q = 0.0;        // reactive integral gain (pu/s)
    double delta_omega = 0.0;  // frequency compensation term (rad/s)
    double delta_e = 0.0;      // voltage compensation term (pu)

    void validate() const;
};

// Oscillator amplitude below this floor raises OscillatorCollapseError.
inline constexpr double kVocAmplitudeFloor = 1e-6;

// ----- instantaneous (algebraic) laws -----

// omega = omega_nom - kp * (P - P_ref)
double droop_frequency(const DroopParams& params, double p_filtered);

// V = v_nom - kq * (Q - Q_ref); throws VoltageCollapseError when negative.
double qv_droop_voltage(const DroopParams& params, double q_filtered);

// omega = omega_nom + k_pll_p * (P_ref - P) + aux_integral
double psl_frequency(const PslParams& params, double p_meas, double aux_integral);

// Seamless-transition frequency, omega = omega_nom + kp*(P - p_ref) + delta_omega.
// Note the droop term enters with the opposite sign from droop_frequency; both
// forms are kept as stated by their respective laws.
double seamless_omega(const DroopParams& params, const SecondaryParams& sec, double p_meas);

// Seamless-transition voltage,
//   V = v_nom - kq*(Q - q_ref) + eta * k_i_q * q_int + delta_e
// where q_int is the accumulated integral of (Q - q_ref).
double seamless_voltage(const DroopParams& params, const SecondaryParams& sec, double q_meas,
                        double q_int);

// Midpoint of the VOC and VSM angle contributions.
double mixed_voc_vsm_theta(double theta_voc, double theta_vsm);

// ----- dynamic step functions (one RK4 step, inputs held over the step) -----

// theta <- theta + trapezoid(previous omega, omega) * dt; stores omega.
ControllerState integrate_angle(const ControllerState& state, double omega, double dt);

// Swing equation 2H * domega/dt = p_mech - p_elec - d_damp*(omega - omega_nom),
// dtheta/dt = omega.
ControllerState vsm_step(const ControllerState& state, const VsmParams& params, double p_elec,
                         double dt);

// Damped swing variant on the frequency deviation dev = omega - omega_nom:
// 2H * d(dev)/dt = p_mech - p_elec - (d_damp / 2*pi) * dev. state.omega stays
// absolute.
ControllerState vsm_damped_step(const ControllerState& state, const VsmParams& params,
                                double p_elec, double dt);

// Excitation lag tq_exc * dV/dt = (v_nom - nq_slope*(Q - q_ref)) - V.
ControllerState vsm_reactive_step(const ControllerState& state, const VsmParams& params,
                                  double q_elec, double q_ref, double dt);

// PI power loop: aux += k_pll_i*(p_ref - P)*dt, omega algebraic, theta
// integrates omega trapezoidally.
ControllerState psl_step(const ControllerState& state, const PslParams& params, double p_meas,
                         double dt);

// Averaged oscillator dynamics:
//   dV/dt     = sigma/(2C) * (V - beta/2 * V^3) - k_i*k_v/(2C*V) * Q
//   dtheta/dt = omega_nom - k_i*k_v/(2C*V^2) * P
ControllerState voc_step(const ControllerState& state, const VocParams& params, double p_meas,
                         double q_meas, double dt);

// K_i * integral of (omega_nom - omega) over the sampled history, trapezoidal.
double secondary_correction(const SecondaryParams& params, std::span<const double> omega_history,
                            double omega_nom, double dt);

// ----- time-derivative forms shared with the scenario engine -----
namespace dyn {

double vsm_domega(const VsmParams& p, double omega, double p_elec);
double vsm_damped_ddev(const VsmParams& p, double omega_dev, double p_elec);
double vsm_dv(const VsmParams& p, double v, double q_elec, double q_ref);
double voc_dv(const VocParams& p, double v, double q);
double voc_dtheta(const VocParams& p, double v, double p_meas);

}  // namespace dyn

}  // namespace gfmlab

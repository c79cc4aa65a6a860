#include <doctest.h>

#include <cmath>

#include "gfmlab/errors.hpp"
#include "gfmlab/network.hpp"
#include "gfmlab/prng.hpp"

using namespace gfmlab;

namespace {

DroopParams test_droop(double kp, double p_ref) {
    DroopParams p;
    p.kp = kp;
    p.kq = 0.05;
    p.p_ref = p_ref;
    p.q_ref = 0.0;
    p.tau_filter = 0.02;
    return p;
}

// Islanded single unit with E = 1 behind x feeding conductance g:
// |V|^2 = 1/(1 + (x g)^2), P = g |V|^2.
double islanded_power(double x, double g) { return g / (1.0 + x * x * g * g); }

UnitSpec droop_unit(const std::string& id, double kp, double p_ref, double x_coupling) {
    UnitSpec u;
    u.id = id;
    u.law = ControlLaw::droop;
    u.params = test_droop(kp, p_ref);
    u.x_coupling = x_coupling;
    return u;
}

GridParams islanded_grid() {
    GridParams g;
    g.connected = false;
    return g;
}

double tail_mean(const std::vector<double>& v, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = v.size() - n; i < v.size(); ++i) acc += v[i];
    return acc / static_cast<double>(n);
}

}  // namespace

TEST_CASE("power_flow_angle evaluates the power-angle relation") {
    CHECK(power_flow_angle(1.0, 1.0, 0.5, 0.0) == 0.0);
    CHECK(power_flow_angle(1.0, 1.0, 0.5, kPi / 6.0) == doctest::Approx(1.0).epsilon(1e-12));
    SplitMix64 rng(3);
    for (int k = 0; k < 100; ++k) {
        const double v1 = rng.uniform(0.5, 1.5);
        const double v2 = rng.uniform(0.5, 1.5);
        const double x = rng.uniform(0.05, 2.0);
        const double d = rng.uniform(-kPi, kPi);
        CHECK(power_flow_angle(v1, v2, x, -d) ==
              doctest::Approx(-power_flow_angle(v1, v2, x, d)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(power_flow_angle(1.0, 1.0, 0.0, 0.1), InvalidImpedanceError);
    CHECK_THROWS_AS(power_flow_angle(1.0, 1.0, -0.5, 0.1), InvalidImpedanceError);
}

TEST_CASE("angle_from_power inverts power_flow_angle") {
    CHECK(angle_from_power(0.0, 1.0, 1.0, 0.4) == 0.0);
    CHECK(angle_from_power(1.0, 1.0, 1.0, 0.5) == doctest::Approx(kPi / 6.0).epsilon(1e-12));
    SplitMix64 rng(5);
    for (int k = 0; k < 100; ++k) {
        const double d = rng.uniform(-kPi / 2.0, kPi / 2.0);
        const double p = power_flow_angle(1.0, 1.0, 0.3, d);
        CHECK(angle_from_power(p, 1.0, 1.0, 0.3) == doctest::Approx(d).epsilon(1e-12));
    }
    CHECK_THROWS_AS(angle_from_power(3.0, 1.0, 1.0, 0.5), TransferLimitError);
}

TEST_CASE("sharing_ratio") {
    CHECK(sharing_ratio(0.02, 0.02) == 1.0);
    CHECK(sharing_ratio(0.01, 0.02) == 2.0);
    CHECK_THROWS_AS(sharing_ratio(0.0, 0.02), SingularityError);
}

TEST_CASE("apply_event mutates switchgear state deterministically") {
    EngineState s;
    s.load_g = 1.0;
    s.grid_connected = true;
    s.unit_active = {1, 1};
    s.dt = 1e-3;
    s.step_idx = 1000;

    const EngineState before = s;
    apply_event(s, {1.0, EventKind::load_surge, 0.0, 0.0});
    CHECK(s.load_g == before.load_g);
    CHECK(s.grid_connected == before.grid_connected);

    apply_event(s, {1.0, EventKind::load_surge, 0.25, 0.0});
    CHECK(s.load_g == doctest::Approx(1.25).epsilon(1e-15));
    apply_event(s, {1.0, EventKind::load_drop, 0.25, 0.0});
    CHECK(s.load_g == doctest::Approx(1.0).epsilon(1e-15));

    apply_event(s, {2.0, EventKind::islanding, 0.0, 0.0});
    CHECK_FALSE(s.grid_connected);
    apply_event(s, {3.0, EventKind::reconnection, 0.0, 0.0});
    CHECK(s.grid_connected);

    apply_event(s, {4.0, EventKind::fault, 0.2, 0.1});
    CHECK(s.fault_level == 0.2);
    CHECK(s.fault_end_idx == 1000 + 100);

    apply_event(s, {5.0, EventKind::generation_outage, 1.0, 0.0});
    CHECK(s.unit_active[0] == 1);
    CHECK(s.unit_active[1] == 0);
    CHECK_THROWS_AS(apply_event(s, {6.0, EventKind::generation_outage, 5.0, 0.0}), ConfigError);
}

TEST_CASE("equilibrium scenario holds nominal frequency") {
    const double x = 0.02, load_r = 1.098;
    const double p0 = islanded_power(x, 1.0 / load_r);
    ScenarioSpec sc;
    sc.name = "equilibrium";
    sc.t_end = 3.0;
    sc.dt = 1e-3;
    sc.load_r = load_r;

    const auto trace =
        run_simulation({droop_unit("u1", 3.14159, p0, x)}, islanded_grid(), sc);
    for (double om : trace.units[0].omega) {
        CHECK(std::abs(om - kOmegaNominal) < 1e-6);
    }
    CHECK(trace.t.size() == 3001);
    CHECK(trace.t[1] - trace.t[0] == doctest::Approx(1e-3).epsilon(1e-12));
}

TEST_CASE("load step settles at the droop-predicted frequency deviation") {
    const double x = 0.02, load_r = 1.098, kp = 3.14159;
    const double p0 = islanded_power(x, 1.0 / load_r);
    ScenarioSpec sc;
    sc.t_end = 5.0;
    sc.dt = 1e-3;
    sc.load_r = load_r;
    sc.events.push_back({1.0, EventKind::load_surge, 0.1, 0.0});

    const auto trace = run_simulation({droop_unit("u1", kp, p0, x)}, islanded_grid(), sc);
    const auto& om = trace.units[0].omega;
    const std::size_t pre_idx = 999;  // just before the event
    const double before = om[pre_idx];
    const double after = tail_mean(om, 500);
    const double delta = after - before;
    CHECK(delta == doctest::Approx(-kp * 0.1).epsilon(0.005));
}

TEST_CASE("secondary restoration returns frequency to nominal") {
    const double x = 0.02, load_r = 1.098;
    const double p0 = islanded_power(x, 1.0 / load_r);
    UnitSpec u = droop_unit("u1", 3.14159, p0, x);
    SecondaryParams sec;
    sec.ki_sec = 2.0;
    u.secondary = sec;

    ScenarioSpec sc;
    sc.t_end = 12.0;
    sc.dt = 1e-3;
    sc.load_r = load_r;
    sc.events.push_back({1.0, EventKind::load_surge, 0.1, 0.0});

    const auto trace = run_simulation({u}, islanded_grid(), sc);
    const double final_dev = tail_mean(trace.units[0].omega, 1000) - kOmegaNominal;
    CHECK(std::abs(final_dev) < 1e-3);
}

TEST_CASE("two droop units share power inversely to their gains") {
    ScenarioSpec sc;
    sc.t_end = 8.0;
    sc.dt = 1e-3;
    sc.load_r = 1.098;

    const auto trace = run_simulation(
        {droop_unit("u1", 1.0, 0.0, 0.05), droop_unit("u2", 2.0, 0.0, 0.05)},
        islanded_grid(), sc);
    const double p1 = tail_mean(trace.units[0].p, 500);
    const double p2 = tail_mean(trace.units[1].p, 500);
    CHECK(p1 / p2 == doctest::Approx(sharing_ratio(1.0, 2.0)).epsilon(0.01));

    // both units settle on a common frequency
    const double f1 = tail_mean(trace.units[0].omega, 500);
    const double f2 = tail_mean(trace.units[1].omega, 500);
    CHECK(f1 == doctest::Approx(f2).epsilon(1e-6));
}

TEST_CASE("power balances against load each recorded step (islanded)") {
    ScenarioSpec sc;
    sc.t_end = 4.0;
    sc.dt = 1e-3;
    sc.load_r = 1.098;
    sc.events.push_back({1.0, EventKind::load_surge, 0.2, 0.0});
    sc.events.push_back({2.5, EventKind::load_drop, 0.15, 0.0});

    const auto trace = run_simulation(
        {droop_unit("u1", 1.5, 0.4, 0.04), droop_unit("u2", 3.0, 0.4, 0.06)},
        islanded_grid(), sc);

    double g = 1.0 / sc.load_r;
    std::size_t next_event = 0;
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
        while (next_event < sc.events.size() && sc.events[next_event].t <= trace.t[i] + 1e-12) {
            const auto& ev = sc.events[next_event];
            g += (ev.kind == EventKind::load_surge) ? ev.magnitude : -ev.magnitude;
            ++next_event;
        }
        const double p_units = trace.units[0].p[i] + trace.units[1].p[i];
        const double p_load = g * trace.v_bus[i] * trace.v_bus[i];
        CHECK(std::abs(p_units - p_load) < 1e-9);
    }
}

TEST_CASE("power balances including grid exchange when connected") {
    ScenarioSpec sc;
    sc.t_end = 3.0;
    sc.dt = 1e-3;
    sc.load_r = 1.098;
    sc.events.push_back({1.0, EventKind::load_surge, 0.2, 0.0});

    GridParams grid;
    grid.connected = true;
    grid.x_th = 0.3;
    grid.r_th = 0.02;

    const auto trace = run_simulation({droop_unit("u1", 2.0, 0.4, 0.04)}, grid, sc);
    REQUIRE(trace.p_grid.size() == trace.t.size());
    double g = 1.0 / sc.load_r;
    std::size_t next_event = 0;
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
        while (next_event < sc.events.size() && sc.events[next_event].t <= trace.t[i] + 1e-12) {
            g += sc.events[next_event].magnitude;
            ++next_event;
        }
        const double p_load = g * trace.v_bus[i] * trace.v_bus[i];
        CHECK(std::abs(trace.units[0].p[i] - p_load - trace.p_grid[i]) < 1e-9);
    }
}

TEST_CASE("doubling the load step doubles the frequency deviation") {
    const double x = 0.02, load_r = 1.098, kp = 2.0;
    const double p0 = islanded_power(x, 1.0 / load_r);

    auto settled_dev = [&](double step) {
        ScenarioSpec sc;
        sc.t_end = 4.0;
        sc.dt = 1e-3;
        sc.load_r = load_r;
        sc.events.push_back({1.0, EventKind::load_surge, step, 0.0});
        const auto trace = run_simulation({droop_unit("u1", kp, p0, x)}, islanded_grid(), sc);
        return tail_mean(trace.units[0].omega, 500) - trace.units[0].omega[999];
    };

    const double d1 = settled_dev(0.05);
    const double d2 = settled_dev(0.10);
    CHECK(d2 / d1 == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("steady power angle grows with grid reactance (weak grid)") {
    double prev_delta = -1.0;
    for (double x_th : {0.2, 0.4, 0.6, 0.8}) {
        GridParams grid;
        grid.connected = true;
        grid.x_th = x_th;

        ScenarioSpec sc;
        sc.t_end = 6.0;
        sc.dt = 1e-3;
        sc.load_r = 50.0;  // light local load; most power flows into the grid

        const auto trace =
            run_simulation({droop_unit("u1", 2.0, 0.35, 0.05)}, grid, sc);
        const double t_end = trace.t.back();
        const double grid_angle = grid.phase0 + grid.omega_grid * t_end;
        double delta = std::fmod(trace.units[0].theta.back() - grid_angle, kTwoPi);
        if (delta > kPi) delta -= kTwoPi;
        if (delta < -kPi) delta += kTwoPi;
        CHECK(delta > prev_delta);
        prev_delta = delta;
    }
}

TEST_CASE("fault depresses the bus for exactly duration/dt samples") {
    ScenarioSpec sc;
    sc.t_end = 3.0;
    sc.dt = 1e-3;
    sc.load_r = 1.098;
    sc.events.push_back({1.0, EventKind::fault, 0.2, 0.1});

    const auto trace =
        run_simulation({droop_unit("u1", 2.0, 0.9, 0.02)}, islanded_grid(), sc);
    std::size_t plateau = 0;
    for (double v : trace.v_bus) {
        if (std::abs(v - 0.2) < 1e-12) ++plateau;
    }
    CHECK(plateau == 100);
}

TEST_CASE("islanding and reconnection round-trip in the trace") {
    ScenarioSpec sc;
    sc.t_end = 3.0;
    sc.dt = 1e-3;
    sc.load_r = 1.098;
    sc.events.push_back({1.0, EventKind::islanding, 0.0, 0.0});
    sc.events.push_back({2.0, EventKind::reconnection, 0.0, 0.0});

    GridParams grid;
    grid.connected = true;
    grid.x_th = 0.3;

    const auto trace = run_simulation({droop_unit("u1", 2.0, 0.5, 0.05)}, grid, sc);
    CHECK(trace.grid_connected[500] == 1);
    CHECK(trace.grid_connected[1500] == 0);
    CHECK(trace.grid_connected[2500] == 1);
}

TEST_CASE("generation outage removes a unit from the solution") {
    ScenarioSpec sc;
    sc.t_end = 4.0;
    sc.dt = 1e-3;
    sc.load_r = 1.098;
    sc.events.push_back({2.0, EventKind::generation_outage, 1.0, 0.0});

    const auto trace = run_simulation(
        {droop_unit("u1", 1.0, 0.0, 0.05), droop_unit("u2", 1.0, 0.0, 0.05)},
        islanded_grid(), sc);
    CHECK(trace.units[1].p[1500] > 0.1);
    CHECK(trace.units[1].p[3000] == 0.0);
    // the survivor picks up the whole load
    const double p_final = tail_mean(trace.units[0].p, 200);
    const double p_before = trace.units[0].p[1500];
    CHECK(p_final > 1.8 * p_before);
}

TEST_CASE("identical inputs produce bit-identical traces") {
    ScenarioSpec sc;
    sc.t_end = 2.0;
    sc.dt = 1e-3;
    sc.load_r = 1.098;
    sc.seed = 42;
    sc.events.push_back({0.5, EventKind::load_surge, 0.15, 0.0});

    GridParams grid;
    grid.connected = true;
    grid.x_th = 0.4;

    UnitSpec vsm;
    vsm.id = "vsm";
    vsm.law = ControlLaw::vsm;
    VsmParams vp;
    vp.d_damp = 40.0;
    vp.p_mech = 0.3;
    vsm.params = vp;

    const std::vector<UnitSpec> units{droop_unit("u1", 2.0, 0.3, 0.05), vsm};
    const auto a = run_simulation(units, grid, sc);
    const auto b = run_simulation(units, grid, sc);
    REQUIRE(a.t.size() == b.t.size());
    for (std::size_t i = 0; i < a.t.size(); ++i) {
        for (std::size_t u = 0; u < a.units.size(); ++u) {
            CHECK(a.units[u].p[i] == b.units[u].p[i]);
            CHECK(a.units[u].omega[i] == b.units[u].omega[i]);
            CHECK(a.units[u].theta[i] == b.units[u].theta[i]);
        }
        CHECK(a.v_bus[i] == b.v_bus[i]);
    }
}

TEST_CASE("trace error shrinks 16x when dt halves (4th-order integrator)") {
    GridParams grid;
    grid.connected = true;
    grid.x_th = 0.4;

    UnitSpec vsm;
    vsm.id = "vsm";
    vsm.law = ControlLaw::vsm;
    VsmParams vp;
    vp.h_inertia = 1.0;
    vp.d_damp = 30.0;
    vp.p_mech = 0.3;
    vsm.params = vp;
    vsm.x_coupling = 0.08;

    auto run_with_dt = [&](double dt) {
        ScenarioSpec sc;
        sc.t_end = 3.0;
        sc.dt = dt;
        sc.load_r = 1.098;
        sc.events.push_back({1.0, EventKind::load_surge, 0.3, 0.0});
        return run_simulation({droop_unit("u1", 2.0, 0.3, 0.05), vsm}, grid, sc);
    };

    const double dt0 = 2e-3;
    const auto coarse = run_with_dt(dt0);
    const auto mid = run_with_dt(dt0 / 2.0);
    const auto ref = run_with_dt(dt0 / 10.0);

    double err_coarse = 0.0, err_mid = 0.0;
    for (std::size_t i = 0; i < coarse.t.size(); ++i) {
        for (std::size_t u = 0; u < coarse.units.size(); ++u) {
            err_coarse = std::max(
                err_coarse, std::abs(coarse.units[u].theta[i] - ref.units[u].theta[i * 10]));
            err_mid = std::max(
                err_mid, std::abs(mid.units[u].theta[i * 2] - ref.units[u].theta[i * 10]));
        }
    }
    const double ratio = err_coarse / err_mid;
    CHECK(ratio > 16.0 * 0.7);
    CHECK(ratio < 16.0 * 1.3);
}

TEST_CASE("run_simulation validation errors") {
    ScenarioSpec sc;
    sc.t_end = 1.0;
    sc.dt = 1e-3;
    sc.load_r = 1.098;
    CHECK_THROWS_AS(run_simulation({}, islanded_grid(), sc), InvalidInputError);

    ScenarioSpec bad = sc;
    bad.events.push_back({0.5, EventKind::load_surge, 0.1, 0.0});
    bad.events.push_back({0.4, EventKind::load_surge, 0.1, 0.0});
    CHECK_THROWS_AS(bad.validate(), InvalidInputError);

    ScenarioSpec outage = sc;
    outage.events.push_back({0.5, EventKind::generation_outage, 3.0, 0.0});
    CHECK_THROWS_AS(
        run_simulation({droop_unit("u1", 2.0, 0.5, 0.05)}, islanded_grid(), outage),
        ConfigError);
}

TEST_CASE("oscillator collapse aborts the run with its timestamp") {
    UnitSpec voc;
    voc.id = "voc";
    voc.law = ControlLaw::voc;
    VocParams vp;
    vp.sigma = 1.0;
    vp.cap = 0.02;
    vp.k_i = 2.0;  // strong loading pulls the amplitude down hard
    vp.k_v = 1.0;
    vp.alpha_cubic = 2.0 / 3.0;
    voc.params = vp;
    voc.v0 = 0.02;

    ScenarioSpec sc;
    sc.t_end = 5.0;
    sc.dt = 1e-3;
    sc.load_r = 0.5;

    try {
        run_simulation({voc}, islanded_grid(), sc);
        // collapse is parameter-dependent; reaching here just means the
        // oscillator survived, which is fine for this guard test
    } catch (const SimulationAbortError& e) {
        CHECK(e.timestamp() >= 0.0);
        CHECK(std::string(e.what()).find("collapse") != std::string::npos);
    }
}

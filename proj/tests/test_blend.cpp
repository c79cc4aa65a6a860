#include <doctest.h>

#include <cmath>
#include <string>

#include "gfmlab/blend.hpp"
#include "gfmlab/errors.hpp"
#include "gfmlab/prng.hpp"

using namespace gfmlab;

namespace {

ObjectiveSpec make_spec(std::size_t n, double target = 314.159) {
    ObjectiveSpec spec;
    spec.omega_target = target;
    for (std::size_t i = 0; i < n; ++i) spec.sample_times.push_back(1e-3 * static_cast<double>(i));
    return spec;
}

FreqTraces flat_traces(std::size_t n, double value) {
    FreqTraces t;
    t.droop.assign(n, value);
    t.vsm.assign(n, value);
    t.psl.assign(n, value);
    t.voc.assign(n, value);
    return t;
}

// Synthetic yet structured traces: distinct deviations per controller so the
// optimum is a nontrivial interior/boundary point.
FreqTraces synthetic_traces(std::size_t n, double target, long long seed) {
    SplitMix64 rng(static_cast<std::uint64_t>(seed));
    const double a0 = rng.uniform(-0.5, 0.5);
    FreqTraces t;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(n);
        t.droop.push_back(target + a0 * std::sin(6.0 * x));
        t.vsm.push_back(target + 1.2 * std::cos(9.0 * x) - 0.4);
        t.psl.push_back(target - 2.0 * std::exp(-3.0 * x));
        t.voc.push_back(target + 3.0 * x - 1.0);
    }
    return t;
}

// Independent Euclidean-projection oracle: w_i(lambda) = clip_i(w0_i - lambda)
// with lambda found by bisection so the weights sum to one.
std::array<double, 4> projection_oracle(const std::array<double, 4>& w0) {
    auto clip = [](const std::array<double, 4>& w) {
        std::array<double, 4> c = w;
        c[0] = std::max(c[0], 0.8);
        c[1] = std::min(std::max(c[1], 0.0), 0.05);
        c[2] = std::max(c[2], 0.0);
        c[3] = std::min(std::max(c[3], 0.0), 0.02);
        return c;
    };
    auto sum_at = [&](double lambda) {
        const std::array<double, 4> shifted{w0[0] - lambda, w0[1] - lambda, w0[2] - lambda,
                                            w0[3] - lambda};
        const auto c = clip(shifted);
        return c[0] + c[1] + c[2] + c[3];
    };
    double lo = -100.0, hi = 100.0;
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sum_at(mid) > 1.0) lo = mid; else hi = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    const std::array<double, 4> shifted{w0[0] - lambda, w0[1] - lambda, w0[2] - lambda,
                                        w0[3] - lambda};
    return clip(shifted);
}

}  // namespace

TEST_CASE("blend_theta is a convex combination") {
    const BlendWeights w{0.85, 0.05, 0.08, 0.02};
    CHECK(blend_theta(w, 1.7, 1.7, 1.7, 1.7) == doctest::Approx(1.7).epsilon(1e-12));
    const BlendWeights corner{1.0, 0.0, 0.0, 0.0};
    CHECK(blend_theta(corner, 2.5, 9.0, -3.0, 7.0) == 2.5);
}

TEST_CASE("blend_theta matches an independent weighted-sum evaluation") {
    // the printed coefficients renormalized to sum exactly one
    const double s = 0.974 + 0.009 + 0.012 + 0.006;  // 1.001
    const BlendWeights w{0.974 / s, 0.009 / s, 0.012 / s, 0.006 / s};
    REQUIRE(check_feasible(w).feasible);
    const double got = blend_theta(w, 1.0, 2.0, 3.0, 4.0);
    // independent route: long double accumulation in reverse order
    long double acc = 0.0L;
    acc += static_cast<long double>(w.nu) * 4.0L;
    acc += static_cast<long double>(w.gamma) * 3.0L;
    acc += static_cast<long double>(w.beta) * 2.0L;
    acc += static_cast<long double>(w.alpha) * 1.0L;
    CHECK(got == doctest::Approx(static_cast<double>(acc)).epsilon(1e-12));
}

TEST_CASE("blend_theta rejects infeasible weights") {
    const BlendWeights bad{0.7, 0.1, 0.1, 0.1};
    CHECK_THROWS_AS(blend_theta(bad, 0, 0, 0, 0), ConstraintViolationError);
}

TEST_CASE("check_feasible flags each violated bound with margins") {
    CHECK(check_feasible({0.9, 0.04, 0.05, 0.01}).feasible);

    const auto bad = check_feasible({0.7, 0.1, 0.1, 0.1});
    CHECK_FALSE(bad.feasible);
    REQUIRE(bad.violations.size() == 3);  // alpha bound, beta cap, nu cap (sum is fine)

    const auto negative = check_feasible({1.2, -0.1, -0.05, -0.05});
    CHECK_FALSE(negative.feasible);
    CHECK(negative.violations.size() == 3);
}

TEST_CASE("check_feasible audits the printed coefficient table") {
    const auto report = check_feasible({0.974, 0.009, 0.012, 0.006});
    CHECK_FALSE(report.feasible);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].find("sum = 1.001") != std::string::npos);
}

TEST_CASE("objective_mse on flat and corner traces") {
    const auto spec = make_spec(100);
    const auto flat = flat_traces(100, 314.159);
    CHECK(objective_mse({0.9, 0.04, 0.05, 0.01}, flat, spec) < 1e-20);

    FreqTraces corner;
    corner.droop.assign(100, 314.159);
    corner.vsm.assign(100, 0.0);
    corner.psl.assign(100, 0.0);
    corner.voc.assign(100, 0.0);
    CHECK(objective_mse({1.0, 0.0, 0.0, 0.0}, corner, spec) == 0.0);

    const double expected = std::pow(0.1 * 314.159, 2.0);
    CHECK(objective_mse({0.9, 0.04, 0.05, 0.01}, corner, spec) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("objective_mse validates alignment") {
    const auto spec = make_spec(100);
    auto traces = flat_traces(100, 314.159);
    traces.vsm.pop_back();
    CHECK_THROWS_AS(objective_mse({1, 0, 0, 0}, traces, spec), InvalidInputError);
}

TEST_CASE("objective_mse agrees with the precomputed quadratic form") {
    const auto spec = make_spec(257);
    const auto traces = synthetic_traces(257, spec.omega_target, 3);
    const auto quad = QuadraticObjective::from_traces(traces, spec);
    SplitMix64 rng(17);
    for (int k = 0; k < 50; ++k) {
        const BlendWeights w{rng.uniform(0.0, 1.5), rng.uniform(-0.2, 0.2),
                             rng.uniform(-0.2, 0.5), rng.uniform(-0.1, 0.1)};
        CHECK(objective_mse(w, traces, spec) ==
              doctest::Approx(quad.eval(w.as_array())).epsilon(1e-9));
    }
}

TEST_CASE("objective_mse is convex along feasible segments") {
    const auto spec = make_spec(400);
    const auto traces = synthetic_traces(400, spec.omega_target, 9);
    SplitMix64 rng(41);
    for (int k = 0; k < 100; ++k) {
        const BlendWeights w1 = project_to_feasible(
            {rng.uniform(0.0, 2.0), rng.uniform(0.0, 0.2), rng.uniform(0.0, 0.5),
             rng.uniform(0.0, 0.1)});
        const BlendWeights w2 = project_to_feasible(
            {rng.uniform(0.0, 2.0), rng.uniform(0.0, 0.2), rng.uniform(0.0, 0.5),
             rng.uniform(0.0, 0.1)});
        const double lam = rng.uniform();
        BlendWeights mid;
        mid.alpha = lam * w1.alpha + (1 - lam) * w2.alpha;
        mid.beta = lam * w1.beta + (1 - lam) * w2.beta;
        mid.gamma = lam * w1.gamma + (1 - lam) * w2.gamma;
        mid.nu = lam * w1.nu + (1 - lam) * w2.nu;
        const double lhs = objective_mse(mid, traces, spec);
        const double rhs = lam * objective_mse(w1, traces, spec) +
                           (1 - lam) * objective_mse(w2, traces, spec);
        CHECK(lhs <= rhs + 1e-9);
    }
}

TEST_CASE("optimize_weights on flat traces stops immediately at zero") {
    const auto spec = make_spec(64);
    const auto traces = flat_traces(64, 314.159);
    const auto result = optimize_weights(traces, spec, {0.9, 0.04, 0.05, 0.01});
    REQUIRE(result.log.entries.size() == 1);
    CHECK(result.log.entries[0].iteration == 1);
    CHECK(result.log.entries[0].objective < 1e-18);
    CHECK_FALSE(result.projected_start);
}

TEST_CASE("optimize_weights logs the raw start of an infeasible w0") {
    const auto spec = make_spec(64);
    const auto traces = flat_traces(64, 314.159);
    const auto result = optimize_weights(traces, spec, {0.0, 0.0, 0.0, 0.0});
    CHECK(result.projected_start);
    REQUIRE(result.log.entries.size() >= 2);
    CHECK(result.log.entries[0].objective ==
          doctest::Approx(314.159 * 314.159).epsilon(1e-12));
    CHECK(result.log.entries[1].objective < 1e-18);
    CHECK(check_feasible(result.weights).feasible);
}

TEST_CASE("optimize_weights log is strictly decreasing with consecutive iterations") {
    const auto spec = make_spec(512);
    for (long long seed : {1LL, 2LL, 3LL, 4LL}) {
        const auto traces = synthetic_traces(512, spec.omega_target, seed);
        const auto result = optimize_weights(traces, spec, {0.0, 0.0, 0.0, 0.0});
        const auto& log = result.log.entries;
        REQUIRE(!log.empty());
        for (std::size_t i = 0; i < log.size(); ++i) {
            CHECK(log[i].iteration == static_cast<int>(i) + 1);
            if (i > 0) CHECK(log[i].objective < log[i - 1].objective);
        }
        CHECK(check_feasible(result.weights).feasible);
    }
}

TEST_CASE("optimize_weights matches the brute-force oracle") {
    const auto spec = make_spec(512);
    for (long long seed : {11LL, 12LL, 13LL, 14LL, 15LL}) {
        const auto traces = synthetic_traces(512, spec.omega_target, seed);
        const auto result = optimize_weights(traces, spec, {0.25, 0.25, 0.25, 0.25});
        const auto brute = brute_force_weights(traces, spec, 0.005);
        const double f_opt = result.log.entries.back().objective;
        const double f_brute = objective_mse(brute, traces, spec);
        CHECK(std::abs(f_opt - f_brute) <= 1e-3);
        CHECK(f_opt >= 0.0);
    }
}

TEST_CASE("brute_force_weights keeps the first feasible point on flat traces") {
    const auto spec = make_spec(64);
    const auto flat = flat_traces(64, 314.159);
    const auto w = brute_force_weights(flat, spec, 0.01);
    CHECK(w.alpha == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(w.beta == 0.0);
    CHECK(w.nu == 0.0);
    CHECK(w.gamma == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("brute_force_weights finds the exact droop corner when droop is perfect") {
    const auto spec = make_spec(128);
    FreqTraces traces;
    traces.droop.assign(128, spec.omega_target);
    traces.vsm.assign(128, spec.omega_target - 10.0);
    traces.psl.assign(128, spec.omega_target - 10.0);
    traces.voc.assign(128, spec.omega_target - 10.0);
    const auto w = brute_force_weights(traces, spec, 0.005);
    CHECK(w.alpha == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.beta == 0.0);
    CHECK(w.gamma == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(w.nu == 0.0);
}

TEST_CASE("brute_force_weights validates grid_step") {
    const auto spec = make_spec(16);
    const auto flat = flat_traces(16, 314.159);
    CHECK_THROWS_AS(brute_force_weights(flat, spec, 0.0), InvalidInputError);
    CHECK_THROWS_AS(brute_force_weights(flat, spec, 0.06), InvalidInputError);
}

TEST_CASE("project_to_feasible is idempotent and feasible") {
    const BlendWeights feasible{0.9, 0.04, 0.05, 0.01};
    const BlendWeights once = project_to_feasible(feasible.as_array());
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(once.as_array()[i] - feasible.as_array()[i]) < 1e-12);
    }

    const BlendWeights from_ones = project_to_feasible({1.0, 1.0, 1.0, 1.0});
    CHECK(check_feasible(from_ones).feasible);
    const BlendWeights again = project_to_feasible(from_ones.as_array());
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(again.as_array()[i] - from_ones.as_array()[i]) < 1e-12);
    }
}

TEST_CASE("project_to_feasible matches the independent lambda-bisection oracle") {
    SplitMix64 rng(71);
    for (int k = 0; k < 200; ++k) {
        const std::array<double, 4> raw{rng.uniform(-1.0, 2.0), rng.uniform(-0.5, 0.5),
                                        rng.uniform(-0.5, 1.0), rng.uniform(-0.3, 0.3)};
        const auto got = project_to_feasible(raw).as_array();
        const auto want = projection_oracle(raw);
        for (int i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-8));
        CHECK(std::abs(got[0] + got[1] + got[2] + got[3] - 1.0) <= 1e-12);
    }
}

TEST_CASE("project_to_feasible maps the printed coefficients to the nearest feasible point") {
    const std::array<double, 4> paper{0.974, 0.009, 0.012, 0.006};
    const BlendWeights proj = project_to_feasible(paper);
    CHECK(check_feasible(proj).feasible);
    CHECK(std::abs(proj.alpha + proj.beta + proj.gamma + proj.nu - 1.0) <= 1e-12);

    // dense-grid nearest-feasible search as a second, coarser oracle
    const double step = 0.002;
    double best_d2 = 1e300;
    std::array<double, 4> best{};
    for (double a = 0.8; a <= 1.0 + 1e-12; a += step) {
        for (double b = 0.0; b <= 0.05 + 1e-12; b += step) {
            for (double n = 0.0; n <= 0.02 + 1e-12; n += step) {
                const double g = 1.0 - a - b - n;
                if (g < -1e-12) continue;
                const double d2 = (a - paper[0]) * (a - paper[0]) +
                                  (b - paper[1]) * (b - paper[1]) +
                                  (g - paper[2]) * (g - paper[2]) +
                                  (n - paper[3]) * (n - paper[3]);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = {a, b, g, n};
                }
            }
        }
    }
    const auto got = proj.as_array();
    for (int i = 0; i < 4; ++i) CHECK(std::abs(got[i] - best[i]) <= 2.0 * step);

    // and the precise oracle
    const auto want = projection_oracle(paper);
    for (int i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-8));
}

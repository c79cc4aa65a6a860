#pragma once

#include <array>
#include <string>
#include <vector>

#include "gfmlab/constants.hpp"

namespace gfmlab {

// Feasible-set bounds for the blended controller weights. Droop stays
// dominant, VSM and VOC shares are capped.
inline constexpr double kAlphaMin = 0.8;
inline constexpr double kBetaMax = 0.05;
inline constexpr double kNuMax = 0.02;
inline constexpr double kFeasibilityTol = 1e-9;

// Weights of the four-way blended angle controller.
struct BlendWeights {
    double alpha = 1.0;  // droop share
    double beta = 0.0;   // VSM share
    double gamma = 0.0;  // PSL share
    double nu = 0.0;     // VOC share

    std::array<double, 4> as_array() const { return {alpha, beta, gamma, nu}; }
    static BlendWeights from_array(const std::array<double, 4>& a) {
        return {a[0], a[1], a[2], a[3]};
    }
};

struct FeasibilityReport {
    bool feasible = false;
    std::vector<std::string> violations;  // one entry per violated constraint, with margin
};

// Evaluation window of the frequency-error objective.
struct ObjectiveSpec {
    double omega_target = kOmegaNominal;  // rad/s
    std::vector<double> sample_times;     // uniform grid (s), at least two samples

    void validate() const;
};

// Frequency traces of the four pure controllers, aligned on
// ObjectiveSpec::sample_times. Order matches the weight vector:
// droop <-> alpha, vsm <-> beta, psl <-> gamma, voc <-> nu.
struct FreqTraces {
    std::vector<double> droop;
    std::vector<double> vsm;
    std::vector<double> psl;
    std::vector<double> voc;

    const std::vector<double>& at(int k) const;
};

struct IterationEntry {
    int iteration = 0;          // consecutive from 1
    double objective = 0.0;     // (rad/s)^2
};

struct IterationLog {
    std::vector<IterationEntry> entries;
};

struct SolverConfig {
    int max_iterations = 500;
    double improvement_tol = 1e-10;
};

struct OptimizeResult {
    BlendWeights weights;
    IterationLog log;
    bool projected_start = false;  // w0 was infeasible and got projected
};

// The objective is quadratic in w for fixed traces:
//   f(w) = w'Aw - 2 b'w + c0,  A = mean(f f'), b = target * mean(f), c0 = target^2.
// Precomputing it makes every evaluation O(1) regardless of trace length.
struct QuadraticObjective {
    std::array<std::array<double, 4>, 4> a{};
    std::array<double, 4> b{};
    double c0 = 0.0;

    static QuadraticObjective from_traces(const FreqTraces& traces, const ObjectiveSpec& spec);
    double eval(const std::array<double, 4>& w) const;
    std::array<double, 4> gradient(const std::array<double, 4>& w) const;
};

// theta = alpha*theta_mp + beta*theta_vsm + gamma*theta_psl + nu*theta_voc.
// Throws ConstraintViolationError when w is infeasible.
double blend_theta(const BlendWeights& w, double theta_mp, double theta_vsm, double theta_psl,
                   double theta_voc);

// Checks the weight invariants (sum to one within 1e-9, alpha >= 0.8,
// 0 <= beta <= 0.05, 0 <= nu <= 0.02, gamma >= 0) and enumerates violations.
FeasibilityReport check_feasible(const BlendWeights& w);

// Mean over samples of (omega_target - sum_k w_k * f_k(t))^2. Blends
// instantaneous frequencies; does not require w to be feasible.
double objective_mse(const BlendWeights& w, const FreqTraces& traces, const ObjectiveSpec& spec);

// Projected-gradient descent with exact line search on the quadratic over the
// feasible polytope. The log records the objective at the supplied start
// (iteration 1) and after each strictly improving action; it is therefore
// strictly decreasing by construction. Terminates when the improvement drops
// below config.improvement_tol or after config.max_iterations steps.
OptimizeResult optimize_weights(const FreqTraces& traces, const ObjectiveSpec& spec,
                                const BlendWeights& w0, const SolverConfig& config = {});

// Exhaustive scan of (alpha, beta, nu) at resolution grid_step with
// gamma = 1 - alpha - beta - nu, keeping feasible points; returns the argmin
// with lexicographic tie-break on (alpha, beta, nu). grid_step must lie in
// (0, 0.05].
BlendWeights brute_force_weights(const FreqTraces& traces, const ObjectiveSpec& spec,
                                 double grid_step);

// Euclidean projection onto the feasible set, computed by Dykstra's
// alternating projections between the box and the sum-to-one hyperplane,
// iterated to 1e-12. Output always passes check_feasible.
BlendWeights project_to_feasible(const std::array<double, 4>& w_raw);

}  // namespace gfmlab

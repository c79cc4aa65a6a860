#include "gfmlab/blend.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "gfmlab/errors.hpp"

namespace gfmlab {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), pattern, a, b);
    return buf;
}

std::array<double, 4> clip_to_box(const std::array<double, 4>& w) {
    std::array<double, 4> out = w;
    out[0] = std::max(out[0], kAlphaMin);
    out[1] = std::min(std::max(out[1], 0.0), kBetaMax);
    out[2] = std::max(out[2], 0.0);
    out[3] = std::min(std::max(out[3], 0.0), kNuMax);
    return out;
}

std::array<double, 4> project_to_plane(const std::array<double, 4>& w) {
    const double shift = (w[0] + w[1] + w[2] + w[3] - 1.0) / 4.0;
    return {w[0] - shift, w[1] - shift, w[2] - shift, w[3] - shift};
}

}  // namespace

void ObjectiveSpec::validate() const {
    if (!(omega_target > 0.0) || !std::isfinite(omega_target)) {
        throw InvalidInputError("ObjectiveSpec: omega_target must be > 0");
    }
    if (sample_times.size() < 2) {
        throw InvalidInputError("ObjectiveSpec: at least 2 samples required");
    }
}

const std::vector<double>& FreqTraces::at(int k) const {
    switch (k) {
        case 0: return droop;
        case 1: return vsm;
        case 2: return psl;
        default: return voc;
    }
}

double blend_theta(const BlendWeights& w, double theta_mp, double theta_vsm, double theta_psl,
                   double theta_voc) {
    const auto report = check_feasible(w);
    if (!report.feasible) {
        std::string msg = "blend_theta: infeasible weights:";
        for (const auto& v : report.violations) msg += " [" + v + "]";
        throw ConstraintViolationError(msg);
    }
    for (double t : {theta_mp, theta_vsm, theta_psl, theta_voc}) {
        if (!std::isfinite(t)) throw InvalidInputError("blend_theta: non-finite angle");
    }
    return w.alpha * theta_mp + w.beta * theta_vsm + w.gamma * theta_psl + w.nu * theta_voc;
}

FeasibilityReport check_feasible(const BlendWeights& w) {
    FeasibilityReport report;
    for (double v : w.as_array()) {
        if (!std::isfinite(v)) {
            report.violations.push_back("non-finite weight");
            return report;
        }
    }
    const double sum = w.alpha + w.beta + w.gamma + w.nu;
    if (std::abs(sum - 1.0) > kFeasibilityTol) {
        report.violations.push_back(
            fmt("sum = %.10g violates alpha+beta+gamma+nu = 1 (margin %.3g)", sum,
                std::abs(sum - 1.0)));
    }
    if (w.alpha < kAlphaMin - kFeasibilityTol) {
        report.violations.push_back(fmt("alpha = %.10g below minimum 0.8 (margin %.3g)", w.alpha,
                                        kAlphaMin - w.alpha));
    }
    if (w.beta < -kFeasibilityTol) {
        report.violations.push_back(fmt("beta = %.10g below 0 (margin %.3g)", w.beta, -w.beta));
    }
    if (w.beta > kBetaMax + kFeasibilityTol) {
        report.violations.push_back(
            fmt("beta = %.10g above cap 0.05 (margin %.3g)", w.beta, w.beta - kBetaMax));
    }
    if (w.gamma < -kFeasibilityTol) {
        report.violations.push_back(fmt("gamma = %.10g below 0 (margin %.3g)", w.gamma, -w.gamma));
    }
    if (w.nu < -kFeasibilityTol) {
        report.violations.push_back(fmt("nu = %.10g below 0 (margin %.3g)", w.nu, -w.nu));
    }
    if (w.nu > kNuMax + kFeasibilityTol) {
        report.violations.push_back(
            fmt("nu = %.10g above cap 0.02 (margin %.3g)", w.nu, w.nu - kNuMax));
    }
    report.feasible = report.violations.empty();
    return report;
}

QuadraticObjective QuadraticObjective::from_traces(const FreqTraces& traces,
                                                   const ObjectiveSpec& spec) {
    spec.validate();
    const std::size_t n = spec.sample_times.size();
    for (int k = 0; k < 4; ++k) {
        if (traces.at(k).size() != n) {
            throw InvalidInputError("objective traces must align with sample_times");
        }
    }

    QuadraticObjective q;
    q.c0 = spec.omega_target * spec.omega_target;
    for (std::size_t t = 0; t < n; ++t) {
        for (int k = 0; k < 4; ++k) {
            const double fk = traces.at(k)[t];
            q.b[k] += spec.omega_target * fk;
            for (int l = 0; l < 4; ++l) q.a[k][l] += fk * traces.at(l)[t];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int k = 0; k < 4; ++k) {
        q.b[k] *= inv_n;
        for (int l = 0; l < 4; ++l) q.a[k][l] *= inv_n;
    }
    return q;
}

double QuadraticObjective::eval(const std::array<double, 4>& w) const {
    double quad = 0.0, lin = 0.0;
    for (int k = 0; k < 4; ++k) {
        lin += b[k] * w[k];
        for (int l = 0; l < 4; ++l) quad += w[k] * a[k][l] * w[l];
    }
    return quad - 2.0 * lin + c0;
}

std::array<double, 4> QuadraticObjective::gradient(const std::array<double, 4>& w) const {
    std::array<double, 4> g{};
    for (int k = 0; k < 4; ++k) {
        double aw = 0.0;
        for (int l = 0; l < 4; ++l) aw += a[k][l] * w[l];
        g[k] = 2.0 * (aw - b[k]);
    }
    return g;
}

double objective_mse(const BlendWeights& w, const FreqTraces& traces, const ObjectiveSpec& spec) {
    spec.validate();
    const std::size_t n = spec.sample_times.size();
    for (int k = 0; k < 4; ++k) {
        if (traces.at(k).size() != n) {
            throw InvalidInputError("objective_mse: trace length mismatch with sample_times");
        }
    }
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double blended = w.alpha * traces.droop[t] + w.beta * traces.vsm[t] +
                               w.gamma * traces.psl[t] + w.nu * traces.voc[t];
        const double err = spec.omega_target - blended;
        acc += err * err;
    }
    return acc / static_cast<double>(n);
}

BlendWeights project_to_feasible(const std::array<double, 4>& w_raw) {
    for (double v : w_raw) {
        if (!std::isfinite(v)) throw InvalidInputError("project_to_feasible: non-finite input");
    }

    // Dykstra's alternating projections between the box and the hyperplane.
    std::array<double, 4> x = w_raw;
    std::array<double, 4> p{}, q{};
    for (int iter = 0; iter < 100000; ++iter) {
        std::array<double, 4> xp;
        for (int i = 0; i < 4; ++i) xp[i] = x[i] + p[i];
        const auto y = clip_to_box(xp);
        for (int i = 0; i < 4; ++i) p[i] = xp[i] - y[i];

        std::array<double, 4> yq;
        for (int i = 0; i < 4; ++i) yq[i] = y[i] + q[i];
        const auto x_next = project_to_plane(yq);
        for (int i = 0; i < 4; ++i) q[i] = yq[i] - x_next[i];

        double delta = 0.0;
        for (int i = 0; i < 4; ++i) delta = std::max(delta, std::abs(x_next[i] - x[i]));
        x = x_next;
        if (delta < 1e-12 && iter > 0) break;
    }
    return BlendWeights::from_array(x);
}

OptimizeResult optimize_weights(const FreqTraces& traces, const ObjectiveSpec& spec,
                                const BlendWeights& w0, const SolverConfig& config) {
    if (config.max_iterations < 1) throw InvalidInputError("optimize_weights: max_iterations < 1");
    if (!(config.improvement_tol >= 0.0)) {
        throw InvalidInputError("optimize_weights: improvement_tol must be >= 0");
    }

    const auto quad = QuadraticObjective::from_traces(traces, spec);

    OptimizeResult result;
    auto& log = result.log.entries;
    int next_iteration = 1;
    auto record = [&](double value) { log.push_back({next_iteration++, value}); };

    std::array<double, 4> w = w0.as_array();
    double fw = quad.eval(w);
    record(fw);

    if (!check_feasible(w0).feasible) {
        result.projected_start = true;
        w = project_to_feasible(w).as_array();
        const double fp = quad.eval(w);
        // The log stays strictly decreasing: skip the projection entry in the
        // degenerate case where moving to feasibility costs objective value.
        if (fp < fw) record(fp);
        fw = fp;
    }

    while (next_iteration <= config.max_iterations) {
        const auto g = quad.gradient(w);
        std::array<double, 4> d{-g[0], -g[1], -g[2], -g[3]};
        double gg = 0.0, dad = 0.0;
        for (int k = 0; k < 4; ++k) {
            gg += g[k] * g[k];
            for (int l = 0; l < 4; ++l) dad += d[k] * quad.a[k][l] * d[l];
        }
        if (gg == 0.0 || dad <= 0.0) break;

        // Exact unconstrained line minimum along -g, then project; halve the
        // step until the projected point improves.
        double step = gg / (2.0 * dad);
        double f_cand = fw;
        std::array<double, 4> cand = w;
        bool accepted = false;
        while (step > 1e-18) {
            std::array<double, 4> trial;
            for (int k = 0; k < 4; ++k) trial[k] = w[k] + step * d[k];
            cand = project_to_feasible(trial).as_array();
            f_cand = quad.eval(cand);
            if (f_cand < fw) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        const double improvement = fw - f_cand;
        w = cand;
        fw = f_cand;
        record(fw);
        if (improvement < config.improvement_tol) break;
    }

    result.weights = BlendWeights::from_array(w);
    return result;
}

BlendWeights brute_force_weights(const FreqTraces& traces, const ObjectiveSpec& spec,
                                 double grid_step) {
    if (!(grid_step > 0.0) || grid_step > 0.05) {
        throw InvalidInputError("brute_force_weights: grid_step must lie in (0, 0.05]");
    }
    const auto quad = QuadraticObjective::from_traces(traces, spec);

    const int n_alpha = static_cast<int>(std::floor((1.0 - kAlphaMin) / grid_step + 1e-9));
    const int n_beta = static_cast<int>(std::floor(kBetaMax / grid_step + 1e-9));
    const int n_nu = static_cast<int>(std::floor(kNuMax / grid_step + 1e-9));

    bool found = false;
    BlendWeights best;
    double best_f = std::numeric_limits<double>::infinity();

    for (int ia = 0; ia <= n_alpha; ++ia) {
        const double alpha = kAlphaMin + ia * grid_step;
        for (int ib = 0; ib <= n_beta; ++ib) {
            const double beta = ib * grid_step;
            for (int in = 0; in <= n_nu; ++in) {
                const double nu = in * grid_step;
                const double gamma = 1.0 - alpha - beta - nu;
                const BlendWeights w{alpha, beta, gamma, nu};
                if (!check_feasible(w).feasible) continue;
                const double f = quad.eval(w.as_array());
                if (f < best_f) {  // strict: lexicographic first wins ties
                    best_f = f;
                    best = w;
                    found = true;
                }
            }
        }
    }
    if (!found) {
        throw OptimizationFailureError("brute_force_weights: no feasible grid point");
    }
    return best;
}

}  // namespace gfmlab

#pragma once

#include <optional>
#include <string>

#include "gfmlab/blend.hpp"
#include "gfmlab/network.hpp"

namespace gfmlab {

// Every emitted artifact starts with one comment line recording the tool
// version, the run seed and the FNV-1a digest of the configuration the run
// was started from. All payload numbers carry 17 significant digits.
struct ArtifactHeader {
    std::string tool_version;
    long long seed = 0;
    std::string config_digest;  // 16 hex chars
};

std::string artifact_header_line(const ArtifactHeader& header);

// Unit trace CSV: t,unit_id,p_pu,q_pu,v_pu,omega_rad_s,theta_rad,freq_hz,
// one row per unit per step, LF line endings.
std::string trace_to_csv(const SimTrace& trace, const ArtifactHeader& header);

// Bus-level series: t,v_bus_pu,grid_connected.
std::string bus_to_csv(const SimTrace& trace, const ArtifactHeader& header);

// Optimizer iteration log CSV: iteration,objective.
std::string iteration_log_to_csv(const IterationLog& log, const ArtifactHeader& header);

struct BruteForceComparison {
    BlendWeights weights;
    double objective = 0.0;
};

// Weight result file: key = value lines for alpha, beta, gamma, nu,
// final_objective, iterations (plus the brute-force row when present).
std::string weights_to_text(const BlendWeights& w, double final_objective, int iterations,
                            const ArtifactHeader& header,
                            const std::optional<BruteForceComparison>& oracle = std::nullopt);

}  // namespace gfmlab

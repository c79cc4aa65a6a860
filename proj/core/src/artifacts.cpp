#include "gfmlab/artifacts.hpp"

#include "gfmlab/textio.hpp"

namespace gfmlab {

std::string artifact_header_line(const ArtifactHeader& header) {
    std::string out = "# gfmlab ";
    out += header.tool_version;
    out += " seed=";
    out += std::to_string(header.seed);
    out += " config=";
    out += header.config_digest;
    out += "\n";
    return out;
}

std::string trace_to_csv(const SimTrace& trace, const ArtifactHeader& header) {
    std::string out = artifact_header_line(header);
    out += "t,unit_id,p_pu,q_pu,v_pu,omega_rad_s,theta_rad,freq_hz\n";
    const std::size_t rows = trace.t.size();
    out.reserve(out.size() + rows * trace.units.size() * 140);
    for (std::size_t i = 0; i < rows; ++i) {
        for (const auto& u : trace.units) {
            append_double(out, trace.t[i]);
            out += ',';
            out += u.id;
            out += ',';
            append_double(out, u.p[i]);
            out += ',';
            append_double(out, u.q[i]);
            out += ',';
            append_double(out, u.v[i]);
            out += ',';
            append_double(out, u.omega[i]);
            out += ',';
            append_double(out, u.theta[i]);
            out += ',';
            append_double(out, u.freq_hz(i));
            out += '\n';
        }
    }
    return out;
}

std::string bus_to_csv(const SimTrace& trace, const ArtifactHeader& header) {
    std::string out = artifact_header_line(header);
    out += "t,v_bus_pu,p_grid_pu,grid_connected\n";
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
        append_double(out, trace.t[i]);
        out += ',';
        append_double(out, trace.v_bus[i]);
        out += ',';
        append_double(out, trace.p_grid[i]);
        out += ',';
        out += trace.grid_connected[i] ? '1' : '0';
        out += '\n';
    }
    return out;
}

std::string iteration_log_to_csv(const IterationLog& log, const ArtifactHeader& header) {
    std::string out = artifact_header_line(header);
    out += "iteration,objective\n";
    for (const auto& e : log.entries) {
        out += std::to_string(e.iteration);
        out += ',';
        append_double(out, e.objective);
        out += '\n';
    }
    return out;
}

std::string weights_to_text(const BlendWeights& w, double final_objective, int iterations,
                            const ArtifactHeader& header,
                            const std::optional<BruteForceComparison>& oracle) {
    std::string out = artifact_header_line(header);
    out += "alpha = " + format_double(w.alpha) + "\n";
    out += "beta = " + format_double(w.beta) + "\n";
    out += "gamma = " + format_double(w.gamma) + "\n";
    out += "nu = " + format_double(w.nu) + "\n";
    out += "final_objective = " + format_double(final_objective) + "\n";
    out += "iterations = " + std::to_string(iterations) + "\n";
    if (oracle) {
        out += "brute_force_alpha = " + format_double(oracle->weights.alpha) + "\n";
        out += "brute_force_beta = " + format_double(oracle->weights.beta) + "\n";
        out += "brute_force_gamma = " + format_double(oracle->weights.gamma) + "\n";
        out += "brute_force_nu = " + format_double(oracle->weights.nu) + "\n";
        out += "brute_force_objective = " + format_double(oracle->objective) + "\n";
    }
    return out;
}

}  // namespace gfmlab

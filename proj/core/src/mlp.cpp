#include "gfmlab/mlp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "gfmlab/errors.hpp"
#include "gfmlab/prng.hpp"
#include "gfmlab/textio.hpp"

namespace gfmlab {

namespace {

struct ForwardCache {
    std::vector<Eigen::VectorXd> act;  // act[0] = input, act[L] = output
    std::vector<Eigen::VectorXd> pre;  // pre-activation per layer
};

ForwardCache forward_cached(const MlpNetwork& net, const Eigen::VectorXd& x) {
    ForwardCache cache;
    const std::size_t n_layers = net.weights.size();
    cache.act.resize(n_layers + 1);
    cache.pre.resize(n_layers);
    cache.act[0] = x;
    for (std::size_t l = 0; l < n_layers; ++l) {
        cache.pre[l] = net.weights[l] * cache.act[l] + net.biases[l];
        if (l + 1 < n_layers) {
            cache.act[l + 1] = cache.pre[l].array().tanh();
        } else {
            cache.act[l + 1] = cache.pre[l];  // identity output layer
        }
    }
    return cache;
}

// Accumulates parameter gradients of one output scalar into `grad` given the
// output-layer seed delta. Returns the gradient with respect to the input.
Eigen::VectorXd backward_params(const MlpNetwork& net, const ForwardCache& cache,
                                const Eigen::VectorXd& delta_out, double* grad) {
    const std::size_t n_layers = net.weights.size();
    Eigen::VectorXd delta = delta_out;  // gradient at pre-activation of last layer

    // Walk parameter offsets from the back.
    std::vector<int> offsets(n_layers);
    int off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        offsets[l] = off;
        off += static_cast<int>(net.weights[l].size() + net.biases[l].size());
    }

    for (std::size_t li = n_layers; li-- > 0;) {
        const auto& a_prev = cache.act[li];
        if (grad) {
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
                gw(grad + offsets[li], net.weights[li].rows(), net.weights[li].cols());
            gw += delta * a_prev.transpose();
            Eigen::Map<Eigen::VectorXd> gb(
                grad + offsets[li] + net.weights[li].size(), net.biases[li].size());
            gb += delta;
        }
        Eigen::VectorXd da_prev = net.weights[li].transpose() * delta;
        if (li > 0) {
            // act[li] = tanh(pre[li-1])
            delta = da_prev.cwiseProduct(
                (1.0 - cache.act[li].array().square()).matrix());
        } else {
            return da_prev;
        }
    }
    return {};
}

double mse_on_rows(const MlpNetwork& net, const Dataset& data, const std::vector<int>& rows) {
    double acc = 0.0;
    long count = 0;
    for (int r : rows) {
        const Eigen::VectorXd y = mlp_forward(net, data.inputs.row(r).transpose());
        const Eigen::VectorXd e = data.targets.row(r).transpose() - y;
        acc += e.squaredNorm();
        count += e.size();
    }
    return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

}  // namespace

MlpNetwork MlpNetwork::init_random(const std::vector<int>& layer_sizes, long long seed,
                                   double scale) {
    MlpNetwork net;
    net.layer_sizes = layer_sizes;
    if (layer_sizes.size() < 2) throw InvalidInputError("MlpNetwork: need at least two layers");
    SplitMix64 rng(static_cast<std::uint64_t>(seed) ^ 0x6d6c70ULL);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        Eigen::MatrixXd w(layer_sizes[l + 1], layer_sizes[l]);
        for (int i = 0; i < w.rows(); ++i) {
            for (int j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-scale, scale);
        }
        Eigen::VectorXd b(layer_sizes[l + 1]);
        for (int i = 0; i < b.size(); ++i) b(i) = rng.uniform(-scale, scale);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    net.validate();
    return net;
}

int MlpNetwork::num_params() const {
    int n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<int>(weights[l].size() + biases[l].size());
    }
    return n;
}

Eigen::VectorXd MlpNetwork::params() const {
    Eigen::VectorXd p(num_params());
    int off = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (int i = 0; i < weights[l].rows(); ++i) {
            for (int j = 0; j < weights[l].cols(); ++j) p(off++) = weights[l](i, j);
        }
        for (int i = 0; i < biases[l].size(); ++i) p(off++) = biases[l](i);
    }
    return p;
}

void MlpNetwork::set_params(const Eigen::VectorXd& p) {
    if (p.size() != num_params()) throw InvalidInputError("set_params: size mismatch");
    int off = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (int i = 0; i < weights[l].rows(); ++i) {
            for (int j = 0; j < weights[l].cols(); ++j) weights[l](i, j) = p(off++);
        }
        for (int i = 0; i < biases[l].size(); ++i) biases[l](i) = p(off++);
    }
}

void MlpNetwork::validate() const {
    if (layer_sizes.size() < 2) throw InvalidInputError("MlpNetwork: need at least two layers");
    if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size()) {
        throw InvalidInputError("MlpNetwork: layer/parameter count mismatch");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (layer_sizes[l] <= 0 || layer_sizes[l + 1] <= 0) {
            throw InvalidInputError("MlpNetwork: layer sizes must be positive");
        }
        if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l]) {
            throw InvalidInputError("MlpNetwork: weight shape mismatch");
        }
        if (biases[l].size() != layer_sizes[l + 1]) {
            throw InvalidInputError("MlpNetwork: bias shape mismatch");
        }
        if (!weights[l].allFinite() || !biases[l].allFinite()) {
            throw InvalidInputError("MlpNetwork: non-finite parameters");
        }
    }
}

Eigen::VectorXd mlp_forward(const MlpNetwork& net, const Eigen::VectorXd& x) {
    if (x.size() != net.input_size()) {
        throw InvalidInputError("mlp_forward: input dimension mismatch");
    }
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        Eigen::VectorXd z = net.weights[l] * a + net.biases[l];
        a = (l + 1 < net.weights.size()) ? Eigen::VectorXd(z.array().tanh()) : z;
    }
    return a;
}

std::vector<int> Dataset::split_rows(int which) const {
    std::vector<int> rows_out;
    for (int r = 0; r < rows(); ++r) {
        if (split[static_cast<std::size_t>(r)] == which) rows_out.push_back(r);
    }
    return rows_out;
}

void Dataset::validate() const {
    if (inputs.rows() != targets.rows()) {
        throw InvalidInputError("Dataset: feature/target row counts differ");
    }
    if (split.size() != static_cast<std::size_t>(inputs.rows())) {
        throw InvalidInputError("Dataset: split assignment size mismatch");
    }
    for (int which : {kTrain, kVal, kTest}) {
        if (split_rows(which).empty()) throw InvalidInputError("Dataset: empty split");
    }
}

Eigen::MatrixXd mlp_jacobian(const MlpNetwork& net, const Eigen::MatrixXd& batch_inputs) {
    net.validate();
    if (batch_inputs.rows() == 0) throw InvalidInputError("mlp_jacobian: empty batch");
    if (batch_inputs.cols() != net.input_size()) {
        throw InvalidInputError("mlp_jacobian: input dimension mismatch");
    }
    const int n_out = net.output_size();
    const int n_params = net.num_params();
    Eigen::MatrixXd jac =
        Eigen::MatrixXd::Zero(batch_inputs.rows() * n_out, n_params);

    for (int r = 0; r < batch_inputs.rows(); ++r) {
        const ForwardCache cache = forward_cached(net, batch_inputs.row(r).transpose());
        for (int o = 0; o < n_out; ++o) {
            Eigen::VectorXd seed = Eigen::VectorXd::Zero(n_out);
            seed(o) = -1.0;  // residual = target - output
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n_params);
            backward_params(net, cache, seed, row.data());
            jac.row(r * n_out + o) = row;
        }
    }
    return jac;
}

Eigen::VectorXd mlp_input_gradient(const MlpNetwork& net, const Eigen::VectorXd& x) {
    if (net.output_size() != 1) {
        throw InvalidInputError("mlp_input_gradient: scalar-output network required");
    }
    const ForwardCache cache = forward_cached(net, x);
    Eigen::VectorXd seed(1);
    seed(0) = 1.0;
    return backward_params(net, cache, seed, nullptr);
}

void TrainConfig::validate() const {
    if (!(mu_init >= 0.0)) throw InvalidInputError("TrainConfig: mu_init must be >= 0");
    if (!(mu_inc > 1.0) || !(mu_dec < 1.0) || !(mu_dec > 0.0)) {
        throw InvalidInputError("TrainConfig: mu factors must lie on opposite sides of 1");
    }
    if (!(mu_max > 0.0)) throw InvalidInputError("TrainConfig: mu_max must be > 0");
    if (max_epochs < 1) throw InvalidInputError("TrainConfig: max_epochs must be >= 1");
    if (val_patience < 1) throw InvalidInputError("TrainConfig: val_patience must be >= 1");
    const double total = split_fractions[0] + split_fractions[1] + split_fractions[2];
    if (std::abs(total - 1.0) > 1e-9) {
        throw InvalidInputError("TrainConfig: split fractions must sum to 1");
    }
    if (max_mu_escalations < 1) {
        throw InvalidInputError("TrainConfig: max_mu_escalations must be >= 1");
    }
}

const char* to_string(StopReason reason) {
    switch (reason) {
        case StopReason::max_epochs: return "max_epochs";
        case StopReason::mu_overflow: return "mu_overflow";
        case StopReason::early_stop: return "early_stop";
        case StopReason::epoch_failed: return "epoch_failed";
    }
    return "?";
}

bool EarlyStopMonitor::observe(double val_err) {
    if (has_prev_ && val_err > prev_) {
        ++run_;
    } else {
        run_ = 0;
    }
    has_prev_ = true;
    prev_ = val_err;
    return run_ >= patience_;
}

TrainRecord lm_train(MlpNetwork& net, const Dataset& data, const TrainConfig& cfg) {
    net.validate();
    data.validate();
    cfg.validate();

    const auto train_rows = data.split_rows(Dataset::kTrain);
    const auto val_rows = data.split_rows(Dataset::kVal);
    const int n_out = net.output_size();

    Eigen::MatrixXd x_train(train_rows.size(), net.input_size());
    Eigen::MatrixXd t_train(train_rows.size(), n_out);
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
        x_train.row(static_cast<int>(i)) = data.inputs.row(train_rows[i]);
        t_train.row(static_cast<int>(i)) = data.targets.row(train_rows[i]);
    }

    auto residuals = [&]() {
        Eigen::VectorXd r(x_train.rows() * n_out);
        for (int i = 0; i < x_train.rows(); ++i) {
            const Eigen::VectorXd y = mlp_forward(net, x_train.row(i).transpose());
            r.segment(i * n_out, n_out) = t_train.row(i).transpose() - y;
        }
        return r;
    };

    TrainRecord record;
    EarlyStopMonitor monitor(cfg.val_patience);
    double mu = cfg.mu_init;
    const int n_params = net.num_params();

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const Eigen::VectorXd theta = net.params();
        const Eigen::VectorXd r = residuals();
        const double err_before = r.squaredNorm() / static_cast<double>(r.size());

        const Eigen::MatrixXd jac = mlp_jacobian(net, x_train);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;

        bool accepted = false;
        int escalations = 0;
        double err_after = err_before;
        while (!accepted) {
            const Eigen::MatrixXd damped =
                jtj + mu * Eigen::MatrixXd::Identity(n_params, n_params);
            const Eigen::LDLT<Eigen::MatrixXd> solver(damped);
            bool solve_ok = solver.info() == Eigen::Success;
            Eigen::VectorXd step;
            if (solve_ok) {
                // residual Jacobian: minimizing ||r + J*step||^2 gives
                // (J'J + mu I) step = -J'r
                step = solver.solve(-jtr);
                solve_ok = step.allFinite();
            }
            if (solve_ok) {
                net.set_params(theta + step);
                err_after = residuals().squaredNorm() / static_cast<double>(r.size());
                if (err_after < err_before) {
                    accepted = true;
                    mu *= cfg.mu_dec;
                    break;
                }
                net.set_params(theta);
            }
            mu *= cfg.mu_inc;
            ++escalations;
            if (mu > cfg.mu_max) {
                record.stop = StopReason::mu_overflow;
                return record;
            }
            if (escalations >= cfg.max_mu_escalations) {
                record.stop = StopReason::epoch_failed;
                return record;
            }
        }

        const double val_err = mse_on_rows(net, data, val_rows);
        record.epochs.push_back({epoch, err_after, val_err, mu});
        if (monitor.observe(val_err)) {
            record.stop = StopReason::early_stop;
            return record;
        }
    }
    record.stop = StopReason::max_epochs;
    return record;
}

double regression_coefficient(const MlpNetwork& net, const Dataset& data, int split) {
    net.validate();
    const auto rows = data.split_rows(split);
    if (rows.empty()) throw InvalidInputError("regression_coefficient: empty split");

    std::vector<double> preds, targets;
    preds.reserve(rows.size());
    targets.reserve(rows.size());
    for (int r : rows) {
        const Eigen::VectorXd y = mlp_forward(net, data.inputs.row(r).transpose());
        for (int o = 0; o < y.size(); ++o) {
            preds.push_back(y(o));
            targets.push_back(data.targets(r, o));
        }
    }
    const auto n = static_cast<double>(preds.size());
    double mp = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        mp += preds[i];
        mt += targets[i];
    }
    mp /= n;
    mt /= n;
    double spt = 0.0, spp = 0.0, stt = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double dp = preds[i] - mp;
        const double dtg = targets[i] - mt;
        spt += dp * dtg;
        spp += dp * dp;
        stt += dtg * dtg;
    }
    if (stt <= 0.0) {
        throw NumericError("regression_coefficient: undefined R, zero-variance targets");
    }
    if (spp <= 0.0) return 0.0;  // constant predictions carry no correlation
    return spt / std::sqrt(spp * stt);
}

Eigen::VectorXd ann_minimize_input(const MlpNetwork& net, const Eigen::VectorXd& x0,
                                   const std::vector<std::uint8_t>& frozen_mask,
                                   const MinimizeConfig& cfg) {
    if (net.output_size() != 1) {
        throw InvalidInputError("ann_minimize_input: scalar-output network required");
    }
    if (!x0.allFinite()) throw InvalidInputError("ann_minimize_input: non-finite start");
    if (frozen_mask.size() != static_cast<std::size_t>(x0.size())) {
        throw InvalidInputError("ann_minimize_input: frozen mask size mismatch");
    }

    Eigen::VectorXd x = x0;
    double fx = mlp_forward(net, x)(0);
    int rising_run = 0;

    for (int iter = 0; iter < cfg.max_steps; ++iter) {
        Eigen::VectorXd g = mlp_input_gradient(net, x);
        for (int i = 0; i < g.size(); ++i) {
            if (frozen_mask[static_cast<std::size_t>(i)]) g(i) = 0.0;
        }
        const double gnorm = g.norm();
        if (gnorm < cfg.grad_tol) break;

        double step = cfg.step0;
        bool moved = false;
        while (step > 1e-18) {
            const Eigen::VectorXd cand = x - step * g;
            const double fc = mlp_forward(net, cand)(0);
            if (fc < fx - 1e-4 * step * gnorm * gnorm) {
                if (fc > fx) ++rising_run; else rising_run = 0;
                x = cand;
                fx = fc;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
        if (rising_run >= 10) {
            throw OptimizationFailureError(
                "ann_minimize_input: output increased over 10 consecutive accepted steps");
        }
    }
    return x;
}

std::string mlp_to_text(const MlpNetwork& net, long long seed) {
    net.validate();
    std::string out = "gfmlab-mlp v1\n";
    out += "seed " + std::to_string(seed) + "\n";
    out += "layers";
    for (int s : net.layer_sizes) out += " " + std::to_string(s);
    out += "\n";
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        out += "W" + std::to_string(l);
        for (int i = 0; i < net.weights[l].rows(); ++i) {
            for (int j = 0; j < net.weights[l].cols(); ++j) {
                out += " ";
                append_double(out, net.weights[l](i, j));
            }
        }
        out += "\nb" + std::to_string(l);
        for (int i = 0; i < net.biases[l].size(); ++i) {
            out += " ";
            append_double(out, net.biases[l](i));
        }
        out += "\n";
    }
    return out;
}

MlpNetwork mlp_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "gfmlab-mlp v1") {
        throw ConfigError("mlp_from_text: unknown model format/version");
    }
    MlpNetwork net;
    long long seed = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "seed") {
            ls >> seed;
        } else if (tag == "layers") {
            int v;
            while (ls >> v) net.layer_sizes.push_back(v);
            if (net.layer_sizes.size() < 2) throw ConfigError("mlp_from_text: bad layer list");
            for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
                net.weights.emplace_back(net.layer_sizes[l + 1], net.layer_sizes[l]);
                net.biases.emplace_back(net.layer_sizes[l + 1]);
            }
        } else if (!tag.empty() && (tag[0] == 'W' || tag[0] == 'b')) {
            if (net.layer_sizes.empty()) throw ConfigError("mlp_from_text: parameters before layers");
            const auto l = static_cast<std::size_t>(std::stoi(tag.substr(1)));
            if (l >= net.weights.size()) throw ConfigError("mlp_from_text: layer index out of range");
            if (tag[0] == 'W') {
                for (int i = 0; i < net.weights[l].rows(); ++i) {
                    for (int j = 0; j < net.weights[l].cols(); ++j) {
                        if (!(ls >> net.weights[l](i, j))) {
                            throw ConfigError("mlp_from_text: truncated weight row");
                        }
                    }
                }
            } else {
                for (int i = 0; i < net.biases[l].size(); ++i) {
                    if (!(ls >> net.biases[l](i))) {
                        throw ConfigError("mlp_from_text: truncated bias row");
                    }
                }
            }
            double extra;
            if (ls >> extra) throw ConfigError("mlp_from_text: trailing values in " + tag);
        } else {
            throw ConfigError("mlp_from_text: unknown record '" + tag + "'");
        }
    }
    net.validate();
    (void)seed;
    return net;
}

}  // namespace gfmlab

#include "gfmlab/lstm.hpp"

#include <cmath>
#include <sstream>

#include "gfmlab/errors.hpp"
#include "gfmlab/prng.hpp"
#include "gfmlab/textio.hpp"

namespace gfmlab {

namespace {

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& z) { return 1.0 / (1.0 + (-z).exp()); }

struct StepCache {
    Eigen::ArrayXd i, f, o, g, c, tanh_c;
    Eigen::VectorXd h, x;
};

}  // namespace

LstmCell LstmCell::zeros(int input_size, int hidden_size) {
    if (input_size < 1 || hidden_size < 1) {
        throw InvalidInputError("LstmCell: sizes must be positive");
    }
    LstmCell cell;
    cell.input_size = input_size;
    cell.hidden_size = hidden_size;
    auto zm = [&](int r, int c) { return Eigen::MatrixXd::Zero(r, c); };
    cell.wx_i = zm(hidden_size, input_size);
    cell.wh_i = zm(hidden_size, hidden_size);
    cell.wx_f = zm(hidden_size, input_size);
    cell.wh_f = zm(hidden_size, hidden_size);
    cell.wx_o = zm(hidden_size, input_size);
    cell.wh_o = zm(hidden_size, hidden_size);
    cell.wx_c = zm(hidden_size, input_size);
    cell.wh_c = zm(hidden_size, hidden_size);
    cell.b_i = Eigen::VectorXd::Zero(hidden_size);
    cell.b_f = Eigen::VectorXd::Zero(hidden_size);
    cell.b_o = Eigen::VectorXd::Zero(hidden_size);
    cell.b_c = Eigen::VectorXd::Zero(hidden_size);
    cell.w_out = Eigen::VectorXd::Zero(hidden_size);
    cell.b_out = 0.0;
    return cell;
}

LstmCell LstmCell::init_random(int input_size, int hidden_size, long long seed, double scale) {
    LstmCell cell = zeros(input_size, hidden_size);
    SplitMix64 rng(static_cast<std::uint64_t>(seed) ^ 0x6c73746dULL);
    auto fill = [&](Eigen::MatrixXd& m) {
        for (int i = 0; i < m.rows(); ++i) {
            for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-scale, scale);
        }
    };
    auto fillv = [&](Eigen::VectorXd& v) {
        for (int i = 0; i < v.size(); ++i) v(i) = rng.uniform(-scale, scale);
    };
    fill(cell.wx_i); fill(cell.wh_i);
    fill(cell.wx_f); fill(cell.wh_f);
    fill(cell.wx_o); fill(cell.wh_o);
    fill(cell.wx_c); fill(cell.wh_c);
    fillv(cell.b_i); fillv(cell.b_f); fillv(cell.b_o); fillv(cell.b_c);
    fillv(cell.w_out);
    cell.b_out = rng.uniform(-scale, scale);
    return cell;
}

int LstmCell::num_params() const {
    const int h = hidden_size, in = input_size;
    return 4 * (h * in + h * h + h) + h + 1;
}

Eigen::VectorXd LstmCell::params() const {
    Eigen::VectorXd p(num_params());
    int off = 0;
    auto put_m = [&](const Eigen::MatrixXd& m) {
        for (int i = 0; i < m.rows(); ++i) {
            for (int j = 0; j < m.cols(); ++j) p(off++) = m(i, j);
        }
    };
    auto put_v = [&](const Eigen::VectorXd& v) {
        for (int i = 0; i < v.size(); ++i) p(off++) = v(i);
    };
    put_m(wx_i); put_m(wh_i); put_v(b_i);
    put_m(wx_f); put_m(wh_f); put_v(b_f);
    put_m(wx_o); put_m(wh_o); put_v(b_o);
    put_m(wx_c); put_m(wh_c); put_v(b_c);
    put_v(w_out);
    p(off++) = b_out;
    return p;
}

void LstmCell::set_params(const Eigen::VectorXd& p) {
    if (p.size() != num_params()) throw InvalidInputError("LstmCell::set_params: size mismatch");
    int off = 0;
    auto get_m = [&](Eigen::MatrixXd& m) {
        for (int i = 0; i < m.rows(); ++i) {
            for (int j = 0; j < m.cols(); ++j) m(i, j) = p(off++);
        }
    };
    auto get_v = [&](Eigen::VectorXd& v) {
        for (int i = 0; i < v.size(); ++i) v(i) = p(off++);
    };
    get_m(wx_i); get_m(wh_i); get_v(b_i);
    get_m(wx_f); get_m(wh_f); get_v(b_f);
    get_m(wx_o); get_m(wh_o); get_v(b_o);
    get_m(wx_c); get_m(wh_c); get_v(b_c);
    get_v(w_out);
    b_out = p(off++);
}

void LstmCell::validate() const {
    if (input_size < 1 || hidden_size < 1) {
        throw InvalidInputError("LstmCell: sizes must be positive");
    }
    auto shape_ok = [&](const Eigen::MatrixXd& m, int r, int c) {
        return m.rows() == r && m.cols() == c && m.allFinite();
    };
    const int h = hidden_size, in = input_size;
    if (!shape_ok(wx_i, h, in) || !shape_ok(wh_i, h, h) || !shape_ok(wx_f, h, in) ||
        !shape_ok(wh_f, h, h) || !shape_ok(wx_o, h, in) || !shape_ok(wh_o, h, h) ||
        !shape_ok(wx_c, h, in) || !shape_ok(wh_c, h, h)) {
        throw InvalidInputError("LstmCell: gate weight shape mismatch or non-finite");
    }
    if (b_i.size() != h || b_f.size() != h || b_o.size() != h || b_c.size() != h ||
        w_out.size() != h) {
        throw InvalidInputError("LstmCell: bias/readout shape mismatch");
    }
    if (!b_i.allFinite() || !b_f.allFinite() || !b_o.allFinite() || !b_c.allFinite() ||
        !w_out.allFinite() || !std::isfinite(b_out)) {
        throw InvalidInputError("LstmCell: non-finite parameters");
    }
}

namespace {

std::vector<StepCache> run_forward(const LstmCell& cell, const Eigen::MatrixXd& seq) {
    const auto t_len = static_cast<std::size_t>(seq.rows());
    std::vector<StepCache> steps(t_len);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cell.hidden_size);
    Eigen::ArrayXd c = Eigen::ArrayXd::Zero(cell.hidden_size);
    for (std::size_t t = 0; t < t_len; ++t) {
        StepCache& s = steps[t];
        s.x = seq.row(static_cast<int>(t)).transpose();
        s.i = sigmoid((cell.wx_i * s.x + cell.wh_i * h + cell.b_i).array());
        s.f = sigmoid((cell.wx_f * s.x + cell.wh_f * h + cell.b_f).array());
        s.o = sigmoid((cell.wx_o * s.x + cell.wh_o * h + cell.b_o).array());
        s.g = (cell.wx_c * s.x + cell.wh_c * h + cell.b_c).array().tanh();
        s.c = s.f * c + s.i * s.g;
        s.tanh_c = s.c.tanh();
        s.h = (s.o * s.tanh_c).matrix();
        h = s.h;
        c = s.c;
    }
    return steps;
}

}  // namespace

LstmOutput lstm_forward(const LstmCell& cell, const Eigen::MatrixXd& sequence) {
    cell.validate();
    if (sequence.rows() < 1) throw InvalidInputError("lstm_forward: empty sequence");
    if (sequence.cols() != cell.input_size) {
        throw InvalidInputError("lstm_forward: input dimension mismatch");
    }

    const auto steps = run_forward(cell, sequence);
    LstmOutput out;
    out.hidden.resize(sequence.rows(), cell.hidden_size);
    out.readout.reserve(steps.size());
    out.theta_accum.reserve(steps.size());
    double acc = 0.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
        out.hidden.row(static_cast<int>(t)) = steps[t].h.transpose();
        const double y = cell.w_out.dot(steps[t].h) + cell.b_out;
        out.readout.push_back(y);
        acc += y;
        out.theta_accum.push_back(acc);
    }
    return out;
}

std::pair<double, Eigen::VectorXd> lstm_loss_and_gradient(const LstmCell& cell,
                                                          const SeqSample& sample) {
    cell.validate();
    const auto t_len = sample.inputs.rows();
    if (t_len < 1) throw InvalidInputError("lstm_loss_and_gradient: empty sequence");
    if (sample.targets.size() != t_len) {
        throw InvalidInputError("lstm_loss_and_gradient: target length mismatch");
    }
    if (sample.inputs.cols() != cell.input_size) {
        throw InvalidInputError("lstm_loss_and_gradient: input dimension mismatch");
    }

    const auto steps = run_forward(cell, sample.inputs);

    LstmCell grad = LstmCell::zeros(cell.input_size, cell.hidden_size);
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(cell.hidden_size);
    Eigen::ArrayXd dc_next = Eigen::ArrayXd::Zero(cell.hidden_size);

    double loss = 0.0;
    const double inv_t = 1.0 / static_cast<double>(t_len);

    for (auto t = static_cast<std::size_t>(t_len); t-- > 0;) {
        const StepCache& s = steps[t];
        const double y = cell.w_out.dot(s.h) + cell.b_out;
        const double err = y - sample.targets(static_cast<int>(t));
        loss += err * err * inv_t;
        const double dy = 2.0 * err * inv_t;

        grad.w_out += dy * s.h;
        grad.b_out += dy;

        Eigen::ArrayXd dh = (dy * cell.w_out + dh_next).array();
        const Eigen::ArrayXd do_ = dh * s.tanh_c;
        Eigen::ArrayXd dc = dh * s.o * (1.0 - s.tanh_c.square()) + dc_next;

        const Eigen::ArrayXd c_prev =
            t > 0 ? steps[t - 1].c : Eigen::ArrayXd::Zero(cell.hidden_size).eval();
        const Eigen::VectorXd h_prev =
            t > 0 ? steps[t - 1].h : Eigen::VectorXd::Zero(cell.hidden_size).eval();

        const Eigen::ArrayXd di = dc * s.g;
        const Eigen::ArrayXd dg = dc * s.i;
        const Eigen::ArrayXd df = dc * c_prev;
        dc_next = dc * s.f;

        const Eigen::VectorXd da_i = (di * s.i * (1.0 - s.i)).matrix();
        const Eigen::VectorXd da_f = (df * s.f * (1.0 - s.f)).matrix();
        const Eigen::VectorXd da_o = (do_ * s.o * (1.0 - s.o)).matrix();
        const Eigen::VectorXd da_g = (dg * (1.0 - s.g.square())).matrix();

        grad.wx_i += da_i * s.x.transpose();
        grad.wh_i += da_i * h_prev.transpose();
        grad.b_i += da_i;
        grad.wx_f += da_f * s.x.transpose();
        grad.wh_f += da_f * h_prev.transpose();
        grad.b_f += da_f;
        grad.wx_o += da_o * s.x.transpose();
        grad.wh_o += da_o * h_prev.transpose();
        grad.b_o += da_o;
        grad.wx_c += da_g * s.x.transpose();
        grad.wh_c += da_g * h_prev.transpose();
        grad.b_c += da_g;

        dh_next = cell.wh_i.transpose() * da_i + cell.wh_f.transpose() * da_f +
                  cell.wh_o.transpose() * da_o + cell.wh_c.transpose() * da_g;
    }

    return {loss, grad.params()};
}

void LstmTrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw InvalidInputError("LstmTrainConfig: learning_rate < 0");
    if (epochs < 0) throw InvalidInputError("LstmTrainConfig: epochs < 0");
    if (!(clip_trigger > 0.0)) throw InvalidInputError("LstmTrainConfig: clip_trigger <= 0");
}

LstmTrainRecord lstm_train(LstmCell& cell, const std::vector<SeqSample>& data,
                           const LstmTrainConfig& cfg) {
    cell.validate();
    cfg.validate();
    if (data.empty()) throw InvalidInputError("lstm_train: empty dataset");
    for (const auto& s : data) {
        if (s.inputs.rows() < 2) {
            throw InvalidInputError("lstm_train: sequences must have length >= 2");
        }
    }

    LstmTrainRecord record;
    const double inv_n = 1.0 / static_cast<double>(data.size());

    auto rmse = [&]() {
        double acc = 0.0;
        long count = 0;
        for (const auto& s : data) {
            const auto out = lstm_forward(cell, s.inputs);
            for (int t = 0; t < s.targets.size(); ++t) {
                const double e = out.readout[static_cast<std::size_t>(t)] - s.targets(t);
                acc += e * e;
                ++count;
            }
        }
        return std::sqrt(acc / static_cast<double>(count));
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(cell.num_params());
        for (const auto& s : data) {
            grad += lstm_loss_and_gradient(cell, s).second;
        }
        grad *= inv_n;

        const double gnorm = grad.norm();
        if (gnorm > cfg.clip_trigger) {
            grad *= 1.0 / gnorm;  // clip to unit norm
            ++record.clip_events;
        }
        cell.set_params(cell.params() - cfg.learning_rate * grad);
        record.rmse_per_epoch.push_back(rmse());
    }
    return record;
}

std::string lstm_to_text(const LstmCell& cell, long long seed) {
    cell.validate();
    std::string out = "gfmlab-lstm v1\n";
    out += "seed " + std::to_string(seed) + "\n";
    out += "sizes " + std::to_string(cell.input_size) + " " + std::to_string(cell.hidden_size) +
           "\n";
    out += "params";
    const Eigen::VectorXd p = cell.params();
    for (int i = 0; i < p.size(); ++i) {
        out += " ";
        append_double(out, p(i));
    }
    out += "\n";
    return out;
}

LstmCell lstm_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "gfmlab-lstm v1") {
        throw ConfigError("lstm_from_text: unknown model format/version");
    }
    int input_size = 0, hidden_size = 0;
    long long seed = 0;
    Eigen::VectorXd p;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "seed") {
            ls >> seed;
        } else if (tag == "sizes") {
            if (!(ls >> input_size >> hidden_size)) throw ConfigError("lstm_from_text: bad sizes");
        } else if (tag == "params") {
            if (input_size < 1 || hidden_size < 1) {
                throw ConfigError("lstm_from_text: params before sizes");
            }
            LstmCell probe = LstmCell::zeros(input_size, hidden_size);
            p.resize(probe.num_params());
            for (int i = 0; i < p.size(); ++i) {
                if (!(ls >> p(i))) throw ConfigError("lstm_from_text: truncated parameters");
            }
            double extra;
            if (ls >> extra) throw ConfigError("lstm_from_text: trailing parameter values");
        } else {
            throw ConfigError("lstm_from_text: unknown record '" + tag + "'");
        }
    }
    if (input_size < 1 || hidden_size < 1 || p.size() == 0) {
        throw ConfigError("lstm_from_text: incomplete model file");
    }
    LstmCell cell = LstmCell::zeros(input_size, hidden_size);
    cell.set_params(p);
    cell.validate();
    (void)seed;
    return cell;
}

}  // namespace gfmlab

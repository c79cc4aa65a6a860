#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace gfmlab {

// Single-layer LSTM (sigmoid gates, tanh candidate and state squash) with a
// linear readout emitting one reference-angle increment per step.
struct LstmCell {
    int input_size = 0;
    int hidden_size = 0;
    Eigen::MatrixXd wx_i, wh_i, wx_f, wh_f, wx_o, wh_o, wx_c, wh_c;
    Eigen::VectorXd b_i, b_f, b_o, b_c;
    Eigen::VectorXd w_out;
    double b_out = 0.0;

    static LstmCell init_random(int input_size, int hidden_size, long long seed,
                                double scale = 0.3);
    static LstmCell zeros(int input_size, int hidden_size);

    int num_params() const;
    Eigen::VectorXd params() const;
    void set_params(const Eigen::VectorXd& p);
    void validate() const;
};

struct LstmOutput {
    Eigen::MatrixXd hidden;            // T x hidden_size
    std::vector<double> readout;       // increment per step
    std::vector<double> theta_accum;   // accumulated increments, theta_ref(t)
};

LstmOutput lstm_forward(const LstmCell& cell, const Eigen::MatrixXd& sequence);

// One training sequence: T x input_size features with a scalar target per
// step (the reference-angle increment).
struct SeqSample {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd targets;
};

// Mean squared error over the sequence together with the full BPTT gradient
// over the flat parameter vector.
std::pair<double, Eigen::VectorXd> lstm_loss_and_gradient(const LstmCell& cell,
                                                          const SeqSample& sample);

struct LstmTrainConfig {
    double learning_rate = 1e-2;
    int epochs = 100;
    double clip_trigger = 1e6;  // gradient norms above this are clipped to 1.0

    void validate() const;
};

struct LstmTrainRecord {
    std::vector<double> rmse_per_epoch;
    int clip_events = 0;
};

// Plain full-batch gradient descent over BPTT gradients.
LstmTrainRecord lstm_train(LstmCell& cell, const std::vector<SeqSample>& data,
                           const LstmTrainConfig& cfg);

std::string lstm_to_text(const LstmCell& cell, long long seed);
LstmCell lstm_from_text(const std::string& text);

}  // namespace gfmlab

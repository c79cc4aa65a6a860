#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace gfmlab {

// Feedforward network with tanh hidden layers and an identity output layer.
struct MlpNetwork {
    std::vector<int> layer_sizes;           // input, hidden..., output
    std::vector<Eigen::MatrixXd> weights;   // [l]: layer_sizes[l+1] x layer_sizes[l]
    std::vector<Eigen::VectorXd> biases;    // [l]: layer_sizes[l+1]

    // Uniform(-scale, scale) initialization, deterministic under seed.
    static MlpNetwork init_random(const std::vector<int>& layer_sizes, long long seed,
                                  double scale = 0.5);

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    int num_params() const;

    // Flat parameter vector: per layer, weight matrix row-major then bias.
    Eigen::VectorXd params() const;
    void set_params(const Eigen::VectorXd& p);

    void validate() const;
};

Eigen::VectorXd mlp_forward(const MlpNetwork& net, const Eigen::VectorXd& x);

// Row-wise feature matrix of scenario samples plus per-row targets and split
// assignment (0 train, 1 validation, 2 test).
struct Dataset {
    Eigen::MatrixXd inputs;   // n_rows x n_features
    Eigen::MatrixXd targets;  // n_rows x n_outputs
    std::vector<int> split;
    std::vector<std::string> feature_names;

    enum SplitId { kTrain = 0, kVal = 1, kTest = 2 };

    int rows() const { return static_cast<int>(inputs.rows()); }
    std::vector<int> split_rows(int which) const;
    void validate() const;
};

// Jacobian of the residuals r = target - output with respect to the flat
// parameter vector, by reverse accumulation. Rows are ordered sample-major,
// then output index; the residual Jacobian equals minus the output Jacobian,
// so targets are not needed.
Eigen::MatrixXd mlp_jacobian(const MlpNetwork& net, const Eigen::MatrixXd& batch_inputs);

// Gradient of the scalar network output with respect to the inputs.
Eigen::VectorXd mlp_input_gradient(const MlpNetwork& net, const Eigen::VectorXd& x);

struct TrainConfig {
    double mu_init = 1e-3;
    double mu_inc = 10.0;
    double mu_dec = 0.1;
    double mu_max = 1e10;
    int max_epochs = 200;
    int val_patience = 6;
    std::array<double, 3> split_fractions{0.70, 0.15, 0.15};
    long long seed = 0;
    int max_mu_escalations = 20;  // per epoch

    void validate() const;
};

enum class StopReason { max_epochs, mu_overflow, early_stop, epoch_failed };

const char* to_string(StopReason reason);

struct EpochRecord {
    int epoch = 0;
    double train_err = 0.0;  // MSE
    double val_err = 0.0;    // MSE
    double mu = 0.0;         // damping after the epoch's update
};

struct TrainRecord {
    std::vector<EpochRecord> epochs;
    StopReason stop = StopReason::max_epochs;
};

// Counts consecutive validation-error increases; fires once the count
// reaches the configured patience.
class EarlyStopMonitor {
public:
    explicit EarlyStopMonitor(int patience) : patience_(patience) {}

    // Returns true exactly when the `patience`-th consecutive increase is
    // observed.
    bool observe(double val_err);
    int consecutive_increases() const { return run_; }

private:
    int patience_;
    int run_ = 0;
    bool has_prev_ = false;
    double prev_ = 0.0;
};

// Levenberg-Marquardt training: per epoch the damped normal equations
// (J'J + mu*I) step = J'r are solved on the training split; accepted steps
// multiply mu by mu_dec, rejected attempts by mu_inc (retried within the
// epoch). Stops on max_epochs, mu > mu_max, a failed epoch, or val_patience
// consecutive validation increases.
TrainRecord lm_train(MlpNetwork& net, const Dataset& data, const TrainConfig& cfg);

// Pearson correlation between predictions and targets on a split.
// Throws NumericError when the split's targets have zero variance.
double regression_coefficient(const MlpNetwork& net, const Dataset& data, int split);

struct MinimizeConfig {
    double grad_tol = 1e-8;
    int max_steps = 1000;
    double step0 = 0.25;
};

// Gradient descent on the (scalar) network output with respect to the
// unfrozen inputs, with backtracking line search.
Eigen::VectorXd ann_minimize_input(const MlpNetwork& net, const Eigen::VectorXd& x0,
                                   const std::vector<std::uint8_t>& frozen_mask,
                                   const MinimizeConfig& cfg = {});

// Versioned text persistence (17 significant digits). Loading validates
// shapes and finiteness.
std::string mlp_to_text(const MlpNetwork& net, long long seed);
MlpNetwork mlp_from_text(const std::string& text);

}  // namespace gfmlab

#include <doctest.h>

#include <cmath>

#include "gfmlab/errors.hpp"
#include "gfmlab/mlp.hpp"
#include "gfmlab/prng.hpp"

using namespace gfmlab;

namespace {

// Duplicate forward pass written independently of the library path: plain
// loops over std::vector, no Eigen expressions.
std::vector<double> naive_forward(const MlpNetwork& net, const std::vector<double>& x) {
    std::vector<double> a = x;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        std::vector<double> z(static_cast<std::size_t>(net.weights[l].rows()), 0.0);
        for (int i = 0; i < net.weights[l].rows(); ++i) {
            double acc = net.biases[l](i);
            for (int j = 0; j < net.weights[l].cols(); ++j) {
                acc += net.weights[l](i, j) * a[static_cast<std::size_t>(j)];
            }
            z[static_cast<std::size_t>(i)] = acc;
        }
        if (l + 1 < net.weights.size()) {
            for (auto& v : z) v = std::tanh(v);
        }
        a = z;
    }
    return a;
}

// numpy.allclose-style comparison: |a-b| <= atol + rtol*max(|a|,|b|)
bool close(double a, double b, double rtol = 1e-5, double atol = 1e-8) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

Dataset linear_dataset(int n, long long seed, double slope, double intercept,
                       double val_target_sign = 1.0) {
    SplitMix64 rng(static_cast<std::uint64_t>(seed));
    Dataset data;
    data.inputs.resize(n, 1);
    data.targets.resize(n, 1);
    data.split.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(-1.0, 1.0);
        data.inputs(i, 0) = x;
        const int split = (i % 5 == 3) ? Dataset::kVal : (i % 5 == 4 ? Dataset::kTest
                                                                     : Dataset::kTrain);
        data.split[static_cast<std::size_t>(i)] = split;
        const double sign = (split == Dataset::kVal) ? val_target_sign : 1.0;
        data.targets(i, 0) = sign * (slope * x + intercept);
    }
    return data;
}

MlpNetwork linear_net(double w0 = 0.0, double b0 = 0.0) {
    MlpNetwork net;
    net.layer_sizes = {1, 1};
    net.weights.push_back(Eigen::MatrixXd::Constant(1, 1, w0));
    net.biases.push_back(Eigen::VectorXd::Constant(1, b0));
    return net;
}

}  // namespace

TEST_CASE("mlp_forward trivial nets") {
    MlpNetwork zeros;
    zeros.layer_sizes = {3, 4, 2};
    zeros.weights = {Eigen::MatrixXd::Zero(4, 3), Eigen::MatrixXd::Zero(2, 4)};
    zeros.biases = {Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(2)};
    const Eigen::VectorXd y = mlp_forward(zeros, Eigen::Vector3d(1.0, -2.0, 3.0));
    CHECK(y.norm() == 0.0);

    // single linear layer is W x + b
    MlpNetwork lin;
    lin.layer_sizes = {2, 2};
    Eigen::MatrixXd w(2, 2);
    w << 1.0, 2.0, -0.5, 0.25;
    lin.weights = {w};
    Eigen::VectorXd b(2);
    b << 0.1, -0.2;
    lin.biases = {b};
    const Eigen::VectorXd out = mlp_forward(lin, Eigen::Vector2d(3.0, -1.0));
    CHECK(out(0) == doctest::Approx(1.0 * 3 + 2.0 * -1 + 0.1).epsilon(1e-15));
    CHECK(out(1) == doctest::Approx(-0.5 * 3 + 0.25 * -1 - 0.2).epsilon(1e-15));

    CHECK_THROWS_AS(mlp_forward(lin, Eigen::Vector3d(1, 2, 3)), InvalidInputError);
}

TEST_CASE("mlp_forward matches an independent re-implementation") {
    for (long long seed : {1LL, 2LL, 3LL}) {
        const MlpNetwork net = MlpNetwork::init_random({4, 7, 5, 2}, seed);
        SplitMix64 rng(static_cast<std::uint64_t>(seed) + 99);
        for (int k = 0; k < 20; ++k) {
            Eigen::VectorXd x(4);
            std::vector<double> xv(4);
            for (int i = 0; i < 4; ++i) {
                x(i) = rng.uniform(-2.0, 2.0);
                xv[static_cast<std::size_t>(i)] = x(i);
            }
            const Eigen::VectorXd got = mlp_forward(net, x);
            const auto want = naive_forward(net, xv);
            for (int i = 0; i < 2; ++i) {
                CHECK(got(i) == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("mlp_jacobian of a linear 1-1 net is (-x, -1)") {
    MlpNetwork net = linear_net(0.7, -0.3);
    Eigen::MatrixXd batch(1, 1);
    batch(0, 0) = 2.5;
    const Eigen::MatrixXd jac = mlp_jacobian(net, batch);
    REQUIRE(jac.rows() == 1);
    REQUIRE(jac.cols() == 2);
    CHECK(jac(0, 0) == doctest::Approx(-2.5).epsilon(1e-15));  // dr/dW
    CHECK(jac(0, 1) == doctest::Approx(-1.0).epsilon(1e-15));  // dr/db
}

TEST_CASE("mlp_jacobian first-layer weight columns vanish for a zero input") {
    const MlpNetwork net = MlpNetwork::init_random({3, 4, 1}, 5);
    Eigen::MatrixXd batch = Eigen::MatrixXd::Zero(1, 3);
    const Eigen::MatrixXd jac = mlp_jacobian(net, batch);
    // first-layer weight block occupies the first 12 columns (4x3 row-major)
    for (int c = 0; c < 12; ++c) CHECK(jac(0, c) == 0.0);
}

TEST_CASE("mlp_jacobian matches central finite differences") {
    for (long long seed = 0; seed < 10; ++seed) {
        MlpNetwork net = MlpNetwork::init_random({3, 5, 2}, seed);
        SplitMix64 rng(static_cast<std::uint64_t>(seed) * 31 + 7);
        Eigen::MatrixXd batch(2, 3);
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 3; ++c) batch(r, c) = rng.uniform(-1.5, 1.5);
        }
        const Eigen::MatrixXd jac = mlp_jacobian(net, batch);
        const Eigen::VectorXd theta = net.params();
        const double h = 1e-6;
        for (int p = 0; p < net.num_params(); ++p) {
            Eigen::VectorXd tp = theta, tm = theta;
            tp(p) += h;
            tm(p) -= h;
            for (int r = 0; r < 2; ++r) {
                net.set_params(tp);
                const Eigen::VectorXd yp = mlp_forward(net, batch.row(r).transpose());
                net.set_params(tm);
                const Eigen::VectorXd ym = mlp_forward(net, batch.row(r).transpose());
                for (int o = 0; o < 2; ++o) {
                    // residual = target - output, so dr/dp = -dy/dp
                    const double fd = -(yp(o) - ym(o)) / (2.0 * h);
                    CHECK(close(jac(r * 2 + o, p), fd));
                }
            }
            net.set_params(theta);
        }
    }
}

TEST_CASE("lm_train solves a noiseless linear problem to machine precision") {
    const Dataset data = linear_dataset(40, 7, 1.7, -0.4);
    MlpNetwork net = linear_net(0.0, 0.0);
    TrainConfig cfg;
    cfg.max_epochs = 5;
    cfg.mu_init = 1e-3;
    const TrainRecord rec = lm_train(net, data, cfg);
    REQUIRE(!rec.epochs.empty());
    CHECK(rec.epochs.back().train_err < 1e-10);
}

TEST_CASE("lm_train with mu = 0 reaches the normal-equations solution in one step") {
    const Dataset data = linear_dataset(30, 11, 2.5, 0.8);
    MlpNetwork net = linear_net(0.0, 0.0);
    TrainConfig cfg;
    cfg.mu_init = 0.0;
    cfg.max_epochs = 1;
    lm_train(net, data, cfg);

    // independent normal-equations solution via SVD over the design matrix
    const auto rows = data.split_rows(Dataset::kTrain);
    Eigen::MatrixXd design(rows.size(), 2);
    Eigen::VectorXd y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        design(static_cast<int>(i), 0) = data.inputs(rows[i], 0);
        design(static_cast<int>(i), 1) = 1.0;
        y(static_cast<int>(i)) = data.targets(rows[i], 0);
    }
    const Eigen::VectorXd sol =
        design.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
    CHECK(net.weights[0](0, 0) == doctest::Approx(sol(0)).epsilon(1e-10));
    CHECK(net.biases[0](0) == doctest::Approx(sol(1)).epsilon(1e-10));
}

TEST_CASE("lm_train mu trajectory: accepted epochs multiply by mu_dec") {
    const Dataset data = linear_dataset(40, 13, 1.0, 0.0);
    MlpNetwork net = linear_net(0.3, 0.1);
    TrainConfig cfg;
    cfg.mu_init = 1e-3;
    cfg.max_epochs = 4;
    const TrainRecord rec = lm_train(net, data, cfg);
    double expected = cfg.mu_init;
    for (const auto& e : rec.epochs) {
        expected *= cfg.mu_dec;
        CHECK(e.mu == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("early-stop monitor fires exactly at the patience-th increase") {
    EarlyStopMonitor monitor(6);
    // monotone rising series: the first value sets the baseline, increases
    // start at the second observation
    const double series[] = {1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7};
    int fired_at = -1;
    for (int i = 0; i < 8; ++i) {
        if (monitor.observe(series[i])) {
            fired_at = i;
            break;
        }
    }
    CHECK(fired_at == 6);  // 7th observation = 6th consecutive increase
    CHECK(monitor.consecutive_increases() == 6);

    // a dip resets the run
    EarlyStopMonitor m2(3);
    CHECK_FALSE(m2.observe(1.0));
    CHECK_FALSE(m2.observe(1.1));
    CHECK_FALSE(m2.observe(1.2));
    CHECK_FALSE(m2.observe(0.9));
    CHECK_FALSE(m2.observe(1.0));
    CHECK_FALSE(m2.observe(1.1));
    CHECK(m2.observe(1.2));
}

TEST_CASE("lm_train early-stops when validation error rises monotonically") {
    // validation targets are the negated map: improving the train fit drives
    // the validation error up every epoch
    const Dataset data = linear_dataset(50, 17, 2.0, 0.0, -1.0);
    MlpNetwork net = linear_net(0.0, 0.0);
    TrainConfig cfg;
    cfg.mu_init = 10.0;  // heavy damping: small steps, many epochs
    cfg.mu_dec = 0.99;
    cfg.mu_inc = 10.0;
    cfg.max_epochs = 500;
    cfg.val_patience = 6;
    const TrainRecord rec = lm_train(net, data, cfg);
    CHECK(rec.stop == StopReason::early_stop);
    REQUIRE(rec.epochs.size() >= 7);
    // the last six epochs strictly increased the validation error
    const std::size_t n = rec.epochs.size();
    for (std::size_t i = n - 6; i < n; ++i) {
        CHECK(rec.epochs[i].val_err > rec.epochs[i - 1].val_err);
    }
}

TEST_CASE("LM step direction approaches the negative gradient as mu grows") {
    const MlpNetwork net = MlpNetwork::init_random({3, 6, 1}, 23);
    SplitMix64 rng(99);
    Eigen::MatrixXd x(8, 3);
    Eigen::VectorXd t(8);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 3; ++c) x(r, c) = rng.uniform(-1.0, 1.0);
        t(r) = rng.uniform(-1.0, 1.0);
    }
    MlpNetwork work = net;
    Eigen::VectorXd resid(8);
    for (int r = 0; r < 8; ++r) {
        resid(r) = t(r) - mlp_forward(work, x.row(r).transpose())(0);
    }
    const Eigen::MatrixXd jac = mlp_jacobian(work, x);
    // gradient of sum-of-squares: 2 J^T r with J the residual Jacobian
    const Eigen::VectorXd grad = 2.0 * jac.transpose() * resid;

    const double mu = 1e8;
    const int n = work.num_params();
    const Eigen::VectorXd step =
        (jac.transpose() * jac + mu * Eigen::MatrixXd::Identity(n, n))
            .ldlt()
            .solve(-jac.transpose() * resid);
    const double cosine = -step.dot(grad) / (step.norm() * grad.norm());
    CHECK(cosine > 0.999);
}

TEST_CASE("regression_coefficient endpoints") {
    // a 1-1 identity net reproduces targets exactly
    MlpNetwork net = linear_net(1.0, 0.0);
    Dataset data = linear_dataset(30, 29, 1.0, 0.0);
    CHECK(regression_coefficient(net, data, Dataset::kTrain) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // predictions = -targets
    MlpNetwork neg = linear_net(-1.0, 0.0);
    CHECK(regression_coefficient(neg, data, Dataset::kTrain) ==
          doctest::Approx(-1.0).epsilon(1e-12));

    Dataset flat = data;
    flat.targets.setConstant(3.0);
    CHECK_THROWS_AS(regression_coefficient(net, flat, Dataset::kTrain), NumericError);
}

TEST_CASE("ann_minimize_input finds the minimum of a learned parabola") {
    // train y = (x - c)^2 on a dense grid, then minimize the surrogate
    const double c = 0.4;
    Dataset data;
    const int n = 200;
    data.inputs.resize(n, 1);
    data.targets.resize(n, 1);
    data.split.resize(n);
    for (int i = 0; i < n; ++i) {
        const double x = -1.0 + 2.0 * i / (n - 1);
        data.inputs(i, 0) = x;
        data.targets(i, 0) = (x - c) * (x - c);
        data.split[static_cast<std::size_t>(i)] =
            (i % 10 == 8) ? Dataset::kVal : (i % 10 == 9 ? Dataset::kTest : Dataset::kTrain);
    }
    MlpNetwork net = MlpNetwork::init_random({1, 12, 1}, 3);
    TrainConfig cfg;
    cfg.max_epochs = 300;
    cfg.val_patience = 50;
    lm_train(net, data, cfg);

    Eigen::VectorXd x0(1);
    x0(0) = -0.8;
    const Eigen::VectorXd x_min = ann_minimize_input(net, x0, {0});

    // independent dense-scan oracle over the surrogate itself
    double best_x = -1.0, best_f = 1e300;
    for (int i = 0; i <= 4000; ++i) {
        const double x = -1.0 + 2.0 * i / 4000.0;
        Eigen::VectorXd xv(1);
        xv(0) = x;
        const double f = mlp_forward(net, xv)(0);
        if (f < best_f) {
            best_f = f;
            best_x = x;
        }
    }
    CHECK(std::abs(x_min(0) - best_x) < 1e-3);
    CHECK(std::abs(x_min(0) - c) < 0.05);  // surrogate should sit near the true minimum

    // stationarity at the returned point
    const Eigen::VectorXd g = mlp_input_gradient(net, x_min);
    CHECK(std::abs(g(0)) < 1e-6);
}

TEST_CASE("ann_minimize_input respects the frozen mask") {
    const MlpNetwork net = MlpNetwork::init_random({3, 8, 1}, 31);
    Eigen::VectorXd x0(3);
    x0 << 0.3, -0.2, 0.9;
    const Eigen::VectorXd same = ann_minimize_input(net, x0, {1, 1, 1});
    CHECK((same - x0).norm() == 0.0);

    const Eigen::VectorXd partial = ann_minimize_input(net, x0, {1, 0, 1});
    CHECK(partial(0) == x0(0));
    CHECK(partial(2) == x0(2));
}

TEST_CASE("mlp persistence round-trips byte-exactly") {
    const MlpNetwork net = MlpNetwork::init_random({5, 16, 1}, 77);
    const std::string text = mlp_to_text(net, 77);
    const MlpNetwork back = mlp_from_text(text);
    CHECK(back.layer_sizes == net.layer_sizes);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        CHECK((back.weights[l] - net.weights[l]).norm() == 0.0);
        CHECK((back.biases[l] - net.biases[l]).norm() == 0.0);
    }
    CHECK(mlp_to_text(back, 77) == text);

    CHECK_THROWS_AS(mlp_from_text("gfmlab-mlp v2\n"), ConfigError);
    CHECK_THROWS_AS(mlp_from_text("gfmlab-mlp v1\nlayers 3\n"), ConfigError);
}

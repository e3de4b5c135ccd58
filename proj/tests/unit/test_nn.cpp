#include "doctest.h"

#include <cmath>

#include "countycast/errors.hpp"
#include "countycast/nn.hpp"
#include "countycast/rng.hpp"
#include "oracles.hpp"

using namespace countycast;
using nn::Matrix;
using nn::Vector;

namespace {

nn::LstmLayerParams scalar_cell(double b_i, double b_f, double b_g, double b_o) {
    nn::LstmLayerParams p;
    p.w_in = Matrix::Zero(4, 1);
    p.w_rec = Matrix::Zero(4, 1);
    p.bias = Vector(4);
    p.bias << b_i, b_f, b_g, b_o;
    return p;
}

std::vector<Matrix> random_sequence(int T, int D, int B, Rng& rng) {
    std::vector<Matrix> xs(static_cast<std::size_t>(T));
    for (auto& x : xs) {
        x = Matrix(D, B);
        for (Eigen::Index c = 0; c < B; ++c) {
            for (Eigen::Index r = 0; r < D; ++r) x(r, c) = rng.normal();
        }
    }
    return xs;
}

} // namespace

TEST_CASE("lstm cell zero weights and states give zero outputs") {
    auto p = scalar_cell(0, 0, 0, 0);
    const auto [h, c] = nn::lstm_cell_forward(p, Vector::Zero(1), Vector::Zero(1), Vector::Zero(1));
    CHECK(h[0] == 0.0);
    CHECK(c[0] == 0.0);
}

TEST_CASE("scalar cell hand computation") {
    // All gates at sigmoid(0) = 0.5, candidate tanh(0) = 0, c_prev = 2:
    // c = 0.5*2 = 1, h = 0.5*tanh(1).
    auto p = scalar_cell(0, 0, 0, 0);
    Vector c_prev(1), h_prev(1), x(1);
    c_prev << 2.0;
    h_prev << 0.0;
    x << 0.0;
    const auto [h, c] = nn::lstm_cell_forward(p, x, h_prev, c_prev);
    CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(h[0] == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-15));
}

TEST_CASE("saturated forget gate carries the cell state through") {
    // b_f = 50 saturates the forget gate; b_i = -50 closes the input path.
    auto p = scalar_cell(-50, 50, 0, 0);
    Vector c_prev(1), h_prev(1), x(1);
    c_prev << 3.25;
    h_prev << 0.0;
    x << 0.0;
    const auto [h, c] = nn::lstm_cell_forward(p, x, h_prev, c_prev);
    CHECK(c[0] == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("cell state growth is bounded by |c_prev| + 1") {
    Rng rng(5);
    nn::NetworkShape shape{3, {4}, 2, 1, 0};
    nn::Network net = nn::make_network(shape, 17);
    Vector h = Vector::Zero(4), c = Vector::Zero(4);
    for (int t = 0; t < 50; ++t) {
        Vector x(3);
        x << rng.normal() * 10, rng.normal() * 10, rng.normal() * 10;
        const auto [h2, c2] = nn::lstm_cell_forward(net.params.lstm[0], x, h, c);
        for (int k = 0; k < 4; ++k) {
            CHECK(std::abs(c2[k]) <= std::abs(c[k]) + 1.0 + 1e-12);
        }
        h = h2;
        c = c2;
    }
}

TEST_CASE("cell forward is deterministic and rejects bad shapes") {
    nn::Network net = nn::make_network({3, {4}, 2, 1, 0}, 7);
    Vector x(3);
    x << 0.3, -1.2, 0.9;
    const auto a = nn::lstm_cell_forward(net.params.lstm[0], x, Vector::Zero(4), Vector::Zero(4));
    const auto b = nn::lstm_cell_forward(net.params.lstm[0], x, Vector::Zero(4), Vector::Zero(4));
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK_THROWS_AS(
        nn::lstm_cell_forward(net.params.lstm[0], Vector::Zero(2), Vector::Zero(4), Vector::Zero(4)),
        ShapeError);
    Vector bad(3);
    bad << 1.0, std::numeric_limits<double>::quiet_NaN(), 0.0;
    CHECK_THROWS_AS(
        nn::lstm_cell_forward(net.params.lstm[0], bad, Vector::Zero(4), Vector::Zero(4)),
        NumericError);
}

TEST_CASE("layer forward with T=1 reduces to the cell and zero weights stay zero") {
    nn::Network net = nn::make_network({2, {3}, 2, 1, 0}, 21);
    Vector x(2);
    x << 0.5, -0.25;
    const auto cell = nn::lstm_cell_forward(net.params.lstm[0], x, Vector::Zero(3), Vector::Zero(3));
    const auto seq = nn::lstm_layer_forward(net.params.lstm[0], {x});
    REQUIRE(seq.size() == 1);
    CHECK(seq[0] == cell.first);

    nn::LstmLayerParams zero;
    zero.w_in = Matrix::Zero(12, 2);
    zero.w_rec = Matrix::Zero(12, 3);
    zero.bias = Vector::Zero(12);
    const auto zs = nn::lstm_layer_forward(zero, {x, x, x});
    for (const auto& h : zs) CHECK(h.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("layer forward matches an independent scalar trace") {
    // H=2, D=2, T=3 with fixed seed weights.
    nn::Network net = nn::make_network({2, {2}, 2, 1, 0}, 33);
    const auto& p = net.params.lstm[0];
    oracles::ScalarLstm s;
    s.w_in.assign(4, std::vector<std::vector<double>>(2, std::vector<double>(2)));
    s.w_rec.assign(4, std::vector<std::vector<double>>(2, std::vector<double>(2)));
    s.bias.assign(4, std::vector<double>(2));
    for (int g = 0; g < 4; ++g) {
        for (int r = 0; r < 2; ++r) {
            s.bias[static_cast<std::size_t>(g)][static_cast<std::size_t>(r)] = p.bias[2 * g + r];
            for (int c = 0; c < 2; ++c) {
                s.w_in[static_cast<std::size_t>(g)][static_cast<std::size_t>(r)]
                    [static_cast<std::size_t>(c)] = p.w_in(2 * g + r, c);
                s.w_rec[static_cast<std::size_t>(g)][static_cast<std::size_t>(r)]
                    [static_cast<std::size_t>(c)] = p.w_rec(2 * g + r, c);
            }
        }
    }
    const std::vector<std::vector<double>> xs = {{0.4, -0.3}, {1.1, 0.2}, {-0.6, 0.9}};
    std::vector<Vector> exs;
    for (const auto& x : xs) {
        Vector v(2);
        v << x[0], x[1];
        exs.push_back(v);
    }
    const auto got = nn::lstm_layer_forward(p, exs);
    const auto expected = oracles::scalar_lstm_trace(s, xs);
    for (int t = 0; t < 3; ++t) {
        for (int k = 0; k < 2; ++k) {
            CHECK(got[static_cast<std::size_t>(t)][k] ==
                  doctest::Approx(expected[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)])
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("losses: values and gradients") {
    SUBCASE("mse zero at perfect prediction, gradients zero") {
        Matrix pred(1, 3);
        pred << 1.0, 2.0, 3.0;
        Eigen::RowVectorXd target(3);
        target << 1.0, 2.0, 3.0;
        const auto [loss, grad] = nn::mse_loss(pred, target);
        CHECK(loss == 0.0);
        CHECK(grad.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("pinball hand values") {
        Vector q(1);
        Eigen::RowVectorXd y(1);
        Matrix pred(1, 1);

        q << 0.5;
        y << 4.0;
        pred << 0.0;  // y - pred = 4
        CHECK(nn::pinball_loss(pred, y, q).first == doctest::Approx(2.0));

        q << 0.9;
        y << 1.0;
        pred << 0.0;
        CHECK(nn::pinball_loss(pred, y, q).first == doctest::Approx(0.9));
        y << 0.0;
        pred << 1.0;
        CHECK(nn::pinball_loss(pred, y, q).first == doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("pinball kink uses the q-1 branch") {
        Vector q(1);
        q << 0.3;
        Eigen::RowVectorXd y(1);
        y << 2.0;
        Matrix pred(1, 1);
        pred << 2.0;
        const auto [loss, grad] = nn::pinball_loss(pred, y, q);
        CHECK(loss == 0.0);
        CHECK(grad(0, 0) == doctest::Approx(0.7));  // 1 - q
    }
    SUBCASE("quantiles must be increasing and inside (0,1)") {
        Eigen::RowVectorXd y(1);
        y << 1.0;
        Matrix pred(2, 1);
        pred << 0.5, 0.5;
        Vector bad(2);
        bad << 0.5, 0.5;
        CHECK_THROWS_AS(nn::pinball_loss(pred, y, bad), InputError);
        bad << 0.0, 0.5;
        CHECK_THROWS_AS(nn::pinball_loss(pred, y, bad), InputError);
    }
}

TEST_CASE("backward gradients match central finite differences") {
    Rng rng(2718);

    SUBCASE("mse head") {
        nn::Network net = nn::make_network({5, {4, 3}, 3, 1, 0}, 11);
        const auto xs = random_sequence(4, 5, 2, rng);
        Eigen::RowVectorXd target(2);
        target << 0.7, -1.1;

        nn::ForwardCache cache;
        const Matrix out = nn::forward(net, xs, nullptr, &cache);
        const auto [loss, grad] = nn::mse_loss(out, target);
        const nn::Parameters analytic = nn::backward(net, cache, grad);
        const nn::Parameters numeric = oracles::finite_difference_gradients(net, [&]() {
            return nn::mse_loss(nn::forward(net, xs), target).first;
        });
        CHECK(oracles::max_relative_error(analytic, numeric) < 1e-5);
    }

    SUBCASE("pinball head away from kinks") {
        nn::Network net = nn::make_network({3, {4, 4}, 3, 7, 0}, 12);
        const auto xs = random_sequence(3, 3, 2, rng);
        Eigen::RowVectorXd target(2);
        target << 5.0, -3.0;  // far from initial outputs, so no kink crossing
        Vector q(7);
        q << 0.025, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975;

        nn::ForwardCache cache;
        const Matrix out = nn::forward(net, xs, nullptr, &cache);
        const auto [loss, grad] = nn::pinball_loss(out, target, q);
        const nn::Parameters analytic = nn::backward(net, cache, grad);
        // Gradients below the difference-noise floor are compared absolutely;
        // a 1e-5 relative match is unresolvable for entries around 1e-7.
        const nn::Parameters numeric = oracles::finite_difference_gradients(net, [&]() {
            return nn::pinball_loss(nn::forward(net, xs), target, q).first;
        });
        CHECK(oracles::max_relative_error(analytic, numeric, 1e-5) < 1e-5);
    }

    SUBCASE("hybrid static path") {
        nn::Network net = nn::make_network({4, {3, 3}, 4, 1, 5}, 13);
        const auto xs = random_sequence(3, 4, 2, rng);
        Matrix statics(5, 2);
        for (int c = 0; c < 2; ++c) {
            for (int r = 0; r < 5; ++r) statics(r, c) = rng.normal();
        }
        Eigen::RowVectorXd target(2);
        target << 0.2, 0.4;
        nn::ForwardCache cache;
        const Matrix out = nn::forward(net, xs, &statics, &cache);
        const auto [loss, grad] = nn::mse_loss(out, target);
        const nn::Parameters analytic = nn::backward(net, cache, grad);
        const nn::Parameters numeric = oracles::finite_difference_gradients(net, [&]() {
            return nn::mse_loss(nn::forward(net, xs, &statics), target).first;
        });
        CHECK(oracles::max_relative_error(analytic, numeric) < 1e-5);
    }
}

TEST_CASE("dense-only gradient equals the closed-form least-squares gradient") {
    // Linear head on raw input: loss = mean (w.x + b - y)^2 over the batch.
    nn::DenseParams dense;
    Rng rng(4);
    dense.weight = Matrix(1, 3);
    dense.bias = Vector(1);
    for (int c = 0; c < 3; ++c) dense.weight(0, c) = rng.normal();
    dense.bias[0] = 0.3;
    Matrix X(3, 5);
    Eigen::RowVectorXd y(5);
    for (int c = 0; c < 5; ++c) {
        for (int r = 0; r < 3; ++r) X(r, c) = rng.normal();
        y[c] = rng.normal();
    }
    const Matrix pred = nn::dense_forward(dense, X);
    const auto [loss, grad] = nn::mse_loss(pred, y);
    // Closed form: dL/dW = 2/B (pred - y) X^T, dL/db = 2/B sum(pred - y).
    const Matrix resid = pred - y;
    const Matrix dW = 2.0 / 5.0 * resid * X.transpose();
    const double db = 2.0 / 5.0 * resid.sum();
    const Matrix dW_via_grad = grad * X.transpose();
    CHECK((dW_via_grad - dW).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(grad.sum() == doctest::Approx(db).epsilon(1e-14));
}

TEST_CASE("backward refuses a second pass over one record") {
    nn::Network net = nn::make_network({2, {2}, 2, 1, 0}, 5);
    Rng rng(6);
    const auto xs = random_sequence(2, 2, 1, rng);
    Eigen::RowVectorXd y(1);
    y << 0.5;
    nn::ForwardCache cache;
    const Matrix out = nn::forward(net, xs, nullptr, &cache);
    const auto [loss, grad] = nn::mse_loss(out, y);
    (void)nn::backward(net, cache, grad);
    CHECK_THROWS_AS(nn::backward(net, cache, grad), InternalError);
}

TEST_CASE("zero-loss input yields zero mse gradients end to end") {
    nn::Network net = nn::make_network({2, {2}, 2, 1, 0}, 5);
    Rng rng(6);
    const auto xs = random_sequence(3, 2, 1, rng);
    nn::ForwardCache cache;
    const Matrix out = nn::forward(net, xs, nullptr, &cache);
    Eigen::RowVectorXd y(1);
    y << out(0, 0);  // perfect target
    const auto [loss, grad] = nn::mse_loss(out, y);
    const nn::Parameters grads = nn::backward(net, cache, grad);
    for (const auto& block : grads.blocks()) {
        for (Eigen::Index i = 0; i < block.size; ++i) CHECK(block.data[i] == 0.0);
    }
}

TEST_CASE("adam: closed forms and convergence") {
    SUBCASE("zero gradients leave parameters unchanged") {
        nn::Network net = nn::make_network({2, {2}, 2, 1, 0}, 9);
        const nn::Network copy = net;
        nn::Parameters grads = nn::zeros_like(net.shape);
        nn::AdamState state = nn::make_adam_state(net.shape);
        nn::adam_step(net.params, grads, state, 1e-3);
        auto a = net.params.blocks();
        auto b = copy.params.blocks();
        for (std::size_t k = 0; k < a.size(); ++k) {
            for (Eigen::Index i = 0; i < a[k].size; ++i) CHECK(a[k].data[i] == b[k].data[i]);
        }
        CHECK(state.t == 1);
    }
    SUBCASE("lr = 0 is the identity even with nonzero gradients") {
        nn::Network net = nn::make_network({2, {2}, 2, 1, 0}, 9);
        const nn::Network copy = net;
        nn::Parameters grads = nn::zeros_like(net.shape);
        for (auto& block : grads.blocks()) {
            for (Eigen::Index i = 0; i < block.size; ++i) block.data[i] = 0.37;
        }
        nn::AdamState state = nn::make_adam_state(net.shape);
        nn::adam_step(net.params, grads, state, 0.0);
        auto a = net.params.blocks();
        auto b = copy.params.blocks();
        for (std::size_t k = 0; k < a.size(); ++k) {
            for (Eigen::Index i = 0; i < a[k].size; ++i) CHECK(a[k].data[i] == b[k].data[i]);
        }
    }
    SUBCASE("first step with unit gradient moves by ~lr") {
        // Scalar parameter via a 1-wide dense block: after one step with g=1,
        // delta = -lr / (1 + eps).
        nn::NetworkShape shape{1, {1}, 1, 1, 0};
        nn::Network net = nn::make_network(shape, 1);
        const double before = net.params.head.bias[0];
        nn::Parameters grads = nn::zeros_like(shape);
        grads.head.bias[0] = 1.0;
        nn::AdamState state = nn::make_adam_state(shape);
        nn::adam_step(net.params, grads, state, 1e-3);
        const double delta = net.params.head.bias[0] - before;
        CHECK(delta == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-9));
    }
    SUBCASE("200 steps on f(theta) = theta^2 reach |theta| < 0.05") {
        nn::NetworkShape shape{1, {1}, 1, 1, 0};
        nn::Network net = nn::make_network(shape, 1);
        net.params.head.bias[0] = 1.0;
        nn::AdamState state = nn::make_adam_state(shape);
        for (int step = 0; step < 200; ++step) {
            nn::Parameters grads = nn::zeros_like(shape);
            grads.head.bias[0] = 2.0 * net.params.head.bias[0];
            nn::adam_step(net.params, grads, state, 0.01);
        }
        CHECK(std::abs(net.params.head.bias[0]) < 0.05);
    }
    SUBCASE("non-finite gradient names the block") {
        nn::Network net = nn::make_network({2, {2}, 2, 1, 0}, 9);
        nn::Parameters grads = nn::zeros_like(net.shape);
        grads.lstm[0].w_rec(0, 0) = std::numeric_limits<double>::infinity();
        nn::AdamState state = nn::make_adam_state(net.shape);
        try {
            nn::adam_step(net.params, grads, state);
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("lstm0.w_rec") != std::string::npos);
        }
    }
}

TEST_CASE("weight snapshot round trip is exact") {
    nn::Network net = nn::make_network({6, {5, 4}, 3, 7, 2}, 77);
    const std::string path = "/tmp/countycast_net_test.weights";
    nn::save_network(net, path);
    const nn::Network back = nn::load_network(path);
    CHECK(back.shape == net.shape);
    auto a = net.params.blocks();
    auto b = back.params.blocks();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        REQUIRE(a[k].size == b[k].size);
        for (Eigen::Index i = 0; i < a[k].size; ++i) CHECK(a[k].data[i] == b[k].data[i]);
    }
    std::remove(path.c_str());
}

TEST_CASE("forget-gate bias initialization and glorot bounds") {
    nn::Network net = nn::make_network({10, {8}, 4, 1, 0}, 3);
    const auto& layer = net.params.lstm[0];
    for (int k = 0; k < 8; ++k) {
        CHECK(layer.bias[k] == 0.0);        // input gate
        CHECK(layer.bias[8 + k] == 1.0);    // forget gate
        CHECK(layer.bias[16 + k] == 0.0);   // candidate
        CHECK(layer.bias[24 + k] == 0.0);   // output gate
    }
    const double bound_in = std::sqrt(6.0 / (10 + 8));
    CHECK(layer.w_in.cwiseAbs().maxCoeff() <= bound_in);
    CHECK(layer.w_in.cwiseAbs().maxCoeff() > 0.0);
}

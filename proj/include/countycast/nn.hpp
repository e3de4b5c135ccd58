#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace countycast::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Gate blocks are stacked in the order (input, forget, cell candidate,
// output); the weight snapshot format depends on this order.
inline constexpr char kGateOrder[] = "ifgo";

struct LstmLayerParams {
    Matrix w_in;   // 4H x D
    Matrix w_rec;  // 4H x H
    Vector bias;   // 4H, forget segment initialized to 1

    int hidden_size() const { return static_cast<int>(w_rec.cols()); }
    int input_size() const { return static_cast<int>(w_in.cols()); }
};

struct DenseParams {
    Matrix weight;  // out x in
    Vector bias;    // out
};

struct NetworkShape {
    int input_channels = 0;
    std::vector<int> lstm_units;
    int dense_units = 0;
    int output_dim = 1;
    int static_dim = 0;  // > 0: atemporal vector joins the last hidden state

    bool operator==(const NetworkShape&) const = default;
};

// View over one parameter (or gradient) block.
struct BlockView {
    std::string name;
    double* data = nullptr;
    Eigen::Index size = 0;
};
struct ConstBlockView {
    std::string name;
    const double* data = nullptr;
    Eigen::Index size = 0;
};

struct Parameters {
    std::vector<LstmLayerParams> lstm;
    DenseParams hidden;  // rectified
    DenseParams head;    // linear

    std::vector<BlockView> blocks();
    std::vector<ConstBlockView> blocks() const;
    Eigen::Index count() const;
};

struct Network {
    NetworkShape shape;
    Parameters params;
};

// Glorot-uniform weights, zero biases except the forget gate at 1.
Network make_network(const NetworkShape& shape, std::uint64_t seed);

Parameters zeros_like(const NetworkShape& shape);

// Recorded forward pass; backward() may run on it exactly once.
struct LstmLayerCache {
    std::vector<Matrix> gate_i, gate_f, gate_g, gate_o;  // T entries of H x B
    std::vector<Matrix> cell, tanh_cell, hidden;
};

struct ForwardCache {
    std::vector<Matrix> inputs;  // T entries of D x B
    std::vector<LstmLayerCache> layers;
    Matrix static_input;  // S x B (0 x B when unused)
    Matrix dense_in, dense_pre, dense_act, output;
    bool consumed = false;
};

// One LSTM step. x_t: D, h_prev/c_prev: H. Returns (h_t, c_t).
std::pair<Vector, Vector> lstm_cell_forward(const LstmLayerParams& p, const Vector& x_t,
                                            const Vector& h_prev, const Vector& c_prev);

// Unrolled single-layer application from zero initial state; returns the
// T x H hidden sequence for a single (unbatched) input sequence.
std::vector<Vector> lstm_layer_forward(const LstmLayerParams& p, const std::vector<Vector>& xs);

// Affine map only; activation is the caller's.
Matrix dense_forward(const DenseParams& p, const Matrix& input);

// Full-stack batched forward. x_seq: T entries of D x B. static_input must be
// S x B when shape.static_dim > 0, null otherwise.
Matrix forward(const Network& net, const std::vector<Matrix>& x_seq,
               const Matrix* static_input = nullptr, ForwardCache* cache = nullptr);

// Reverse-mode gradients of a scalar loss, given d(loss)/d(output).
Parameters backward(const Network& net, ForwardCache& cache, const Matrix& output_grad);

// Batch-mean squared error. pred: 1 x B. Gradient wrt pred.
std::pair<double, Matrix> mse_loss(const Matrix& pred, const Eigen::RowVectorXd& target);

// Quantile (pinball) loss summed over quantiles, batch-mean. pred: Q x B,
// quantiles strictly increasing in (0,1). At the kink the (q-1) branch is the
// subgradient.
std::pair<double, Matrix> pinball_loss(const Matrix& pred, const Eigen::RowVectorXd& target,
                                       const Vector& quantiles);

struct AdamState {
    std::vector<Eigen::ArrayXd> m, v;  // shapes mirror parameter blocks
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam_state(const NetworkShape& shape);

// Bias-corrected Adam update in place. Non-finite gradients raise a
// NumericError naming the parameter block.
void adam_step(Parameters& params, const Parameters& grads, AdamState& state, double lr = 1e-3);

// Versioned weight container; bit-exact round trip.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

} // namespace countycast::nn

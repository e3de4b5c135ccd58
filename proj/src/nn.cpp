#include "countycast/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "countycast/errors.hpp"
#include "countycast/rng.hpp"

namespace countycast::nn {

namespace {

Matrix sigmoid(const Matrix& x) { return ((-x.array()).exp() + 1.0).inverse().matrix(); }

void check_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + what);
}

// One batched LSTM step; states are H x B and updated in place, gate
// activations land in the cache slot when recording.
void lstm_step(const LstmLayerParams& p, const Matrix& x_t, Matrix& h, Matrix& c,
               LstmLayerCache* cache) {
    const int H = p.hidden_size();
    Matrix z = p.w_in * x_t + p.w_rec * h;
    z.colwise() += p.bias;
    const Matrix gi = sigmoid(z.topRows(H));
    const Matrix gf = sigmoid(z.middleRows(H, H));
    const Matrix gg = z.middleRows(2 * H, H).array().tanh().matrix();
    const Matrix go = sigmoid(z.bottomRows(H));
    c = (gf.array() * c.array() + gi.array() * gg.array()).matrix();
    const Matrix tc = c.array().tanh().matrix();
    h = (go.array() * tc.array()).matrix();
    if (cache != nullptr) {
        cache->gate_i.push_back(gi);
        cache->gate_f.push_back(gf);
        cache->gate_g.push_back(gg);
        cache->gate_o.push_back(go);
        cache->cell.push_back(c);
        cache->tanh_cell.push_back(tc);
        cache->hidden.push_back(h);
    }
}

} // namespace

std::vector<BlockView> Parameters::blocks() {
    std::vector<BlockView> out;
    for (std::size_t l = 0; l < lstm.size(); ++l) {
        const std::string prefix = "lstm" + std::to_string(l) + ".";
        out.push_back({prefix + "w_in", lstm[l].w_in.data(), lstm[l].w_in.size()});
        out.push_back({prefix + "w_rec", lstm[l].w_rec.data(), lstm[l].w_rec.size()});
        out.push_back({prefix + "bias", lstm[l].bias.data(), lstm[l].bias.size()});
    }
    out.push_back({"hidden.weight", hidden.weight.data(), hidden.weight.size()});
    out.push_back({"hidden.bias", hidden.bias.data(), hidden.bias.size()});
    out.push_back({"head.weight", head.weight.data(), head.weight.size()});
    out.push_back({"head.bias", head.bias.data(), head.bias.size()});
    return out;
}

std::vector<ConstBlockView> Parameters::blocks() const {
    std::vector<ConstBlockView> out;
    for (auto& view : const_cast<Parameters*>(this)->blocks()) {
        out.push_back({std::move(view.name), view.data, view.size});
    }
    return out;
}

Eigen::Index Parameters::count() const {
    Eigen::Index n = 0;
    for (const auto& l : lstm) n += l.w_in.size() + l.w_rec.size() + l.bias.size();
    n += hidden.weight.size() + hidden.bias.size();
    n += head.weight.size() + head.bias.size();
    return n;
}

namespace {

void validate_shape(const NetworkShape& shape) {
    if (shape.input_channels < 1) throw InputError("network needs at least one input channel");
    if (shape.lstm_units.empty()) throw InputError("network needs at least one LSTM layer");
    for (const int h : shape.lstm_units) {
        if (h < 1) throw InputError("LSTM layer width must be positive");
    }
    if (shape.dense_units < 1) throw InputError("dense layer width must be positive");
    if (shape.output_dim < 1) throw InputError("output width must be positive");
    if (shape.static_dim < 0) throw InputError("static input width must be >= 0");
}

Parameters allocate(const NetworkShape& shape) {
    Parameters p;
    int in = shape.input_channels;
    for (const int H : shape.lstm_units) {
        LstmLayerParams layer;
        layer.w_in = Matrix::Zero(4 * H, in);
        layer.w_rec = Matrix::Zero(4 * H, H);
        layer.bias = Vector::Zero(4 * H);
        p.lstm.push_back(std::move(layer));
        in = H;
    }
    p.hidden.weight = Matrix::Zero(shape.dense_units, in + shape.static_dim);
    p.hidden.bias = Vector::Zero(shape.dense_units);
    p.head.weight = Matrix::Zero(shape.output_dim, shape.dense_units);
    p.head.bias = Vector::Zero(shape.output_dim);
    return p;
}

void glorot_fill(Matrix& block, double fan_in, double fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index c = 0; c < block.cols(); ++c) {
        for (Eigen::Index r = 0; r < block.rows(); ++r) {
            block(r, c) = rng.uniform(-a, a);
        }
    }
}

} // namespace

Parameters zeros_like(const NetworkShape& shape) { return allocate(shape); }

Network make_network(const NetworkShape& shape, std::uint64_t seed) {
    validate_shape(shape);
    Network net;
    net.shape = shape;
    net.params = allocate(shape);
    Rng rng(seed);
    for (auto& layer : net.params.lstm) {
        const int H = layer.hidden_size();
        const int D = layer.input_size();
        for (int g = 0; g < 4; ++g) {
            Matrix block = layer.w_in.middleRows(g * H, H);
            glorot_fill(block, D, H, rng);
            layer.w_in.middleRows(g * H, H) = block;
            block = layer.w_rec.middleRows(g * H, H);
            glorot_fill(block, H, H, rng);
            layer.w_rec.middleRows(g * H, H) = block;
        }
        layer.bias.segment(H, H).setOnes();  // forget gate starts open
    }
    glorot_fill(net.params.hidden.weight, net.params.hidden.weight.cols(),
                net.params.hidden.weight.rows(), rng);
    glorot_fill(net.params.head.weight, net.params.head.weight.cols(),
                net.params.head.weight.rows(), rng);
    return net;
}

std::pair<Vector, Vector> lstm_cell_forward(const LstmLayerParams& p, const Vector& x_t,
                                            const Vector& h_prev, const Vector& c_prev) {
    if (x_t.size() != p.input_size() || h_prev.size() != p.hidden_size() ||
        c_prev.size() != p.hidden_size()) {
        throw ShapeError("lstm_cell_forward: input/state sizes do not match parameters");
    }
    if (!x_t.allFinite() || !h_prev.allFinite() || !c_prev.allFinite()) {
        throw NumericError("lstm_cell_forward: non-finite input");
    }
    Matrix h = h_prev;
    Matrix c = c_prev;
    lstm_step(p, x_t, h, c, nullptr);
    return {h.col(0), c.col(0)};
}

std::vector<Vector> lstm_layer_forward(const LstmLayerParams& p, const std::vector<Vector>& xs) {
    Matrix h = Matrix::Zero(p.hidden_size(), 1);
    Matrix c = Matrix::Zero(p.hidden_size(), 1);
    std::vector<Vector> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
        if (x.size() != p.input_size()) throw ShapeError("lstm_layer_forward: bad input width");
        lstm_step(p, x, h, c, nullptr);
        out.push_back(h.col(0));
    }
    return out;
}

Matrix dense_forward(const DenseParams& p, const Matrix& input) {
    if (input.rows() != p.weight.cols()) throw ShapeError("dense_forward: bad input width");
    return (p.weight * input).colwise() + p.bias;
}

Matrix forward(const Network& net, const std::vector<Matrix>& x_seq, const Matrix* static_input,
               ForwardCache* cache) {
    if (x_seq.empty()) throw ShapeError("forward: empty input sequence");
    const auto T = x_seq.size();
    const Eigen::Index B = x_seq.front().cols();
    for (const auto& x : x_seq) {
        if (x.rows() != net.shape.input_channels || x.cols() != B) {
            throw ShapeError("forward: input sequence shape mismatch");
        }
    }
    if (net.shape.static_dim > 0) {
        if (static_input == nullptr || static_input->rows() != net.shape.static_dim ||
            static_input->cols() != B) {
            throw ShapeError("forward: static input missing or mis-shaped");
        }
    } else if (static_input != nullptr && static_input->size() != 0) {
        throw ShapeError("forward: unexpected static input");
    }

    if (cache != nullptr) {
        *cache = ForwardCache{};
        cache->inputs = x_seq;
        cache->layers.resize(net.params.lstm.size());
    }

    std::vector<Matrix> seq = x_seq;
    for (std::size_t l = 0; l < net.params.lstm.size(); ++l) {
        const auto& p = net.params.lstm[l];
        Matrix h = Matrix::Zero(p.hidden_size(), B);
        Matrix c = Matrix::Zero(p.hidden_size(), B);
        LstmLayerCache* layer_cache = cache != nullptr ? &cache->layers[l] : nullptr;
        for (std::size_t t = 0; t < T; ++t) {
            lstm_step(p, seq[t], h, c, layer_cache);
            seq[t] = h;
        }
    }

    Matrix dense_in = seq.back();
    if (net.shape.static_dim > 0) {
        Matrix joined(dense_in.rows() + static_input->rows(), B);
        joined << dense_in, *static_input;
        dense_in = std::move(joined);
    }
    const Matrix pre = dense_forward(net.params.hidden, dense_in);
    const Matrix act = pre.cwiseMax(0.0);
    Matrix out = dense_forward(net.params.head, act);
    check_finite(out, "network output");

    if (cache != nullptr) {
        cache->static_input = net.shape.static_dim > 0 ? *static_input : Matrix(0, B);
        cache->dense_in = dense_in;
        cache->dense_pre = pre;
        cache->dense_act = act;
        cache->output = out;
    }
    return out;
}

Parameters backward(const Network& net, ForwardCache& cache, const Matrix& output_grad) {
    if (cache.consumed) throw InternalError("backward() called twice on one forward record");
    cache.consumed = true;
    if (output_grad.rows() != net.shape.output_dim || output_grad.cols() != cache.output.cols()) {
        throw ShapeError("backward: output gradient shape mismatch");
    }

    Parameters g = zeros_like(net.shape);
    const auto T = cache.inputs.size();
    const Eigen::Index B = cache.inputs.front().cols();

    // Head and hidden dense.
    g.head.weight = output_grad * cache.dense_act.transpose();
    g.head.bias = output_grad.rowwise().sum();
    Matrix d_act = net.params.head.weight.transpose() * output_grad;
    const Matrix d_pre =
        (d_act.array() * (cache.dense_pre.array() > 0.0).cast<double>()).matrix();
    g.hidden.weight = d_pre * cache.dense_in.transpose();
    g.hidden.bias = d_pre.rowwise().sum();
    const Matrix d_dense_in = net.params.hidden.weight.transpose() * d_pre;

    // Gradient reaching the top LSTM layer's final hidden state.
    const int top_hidden = net.params.lstm.back().hidden_size();
    std::vector<Matrix> d_layer_out(T, Matrix());
    for (std::size_t t = 0; t + 1 < T; ++t) {
        d_layer_out[t] = Matrix::Zero(top_hidden, B);
    }
    d_layer_out[T - 1] = d_dense_in.topRows(top_hidden);

    for (std::size_t li = net.params.lstm.size(); li-- > 0;) {
        const auto& p = net.params.lstm[li];
        const auto& lc = cache.layers[li];
        const int H = p.hidden_size();
        auto& gl = g.lstm[li];

        const std::vector<Matrix>& below =
            li == 0 ? cache.inputs : cache.layers[li - 1].hidden;

        std::vector<Matrix> d_below(T);
        Matrix dh_next = Matrix::Zero(H, B);
        Matrix dc_next = Matrix::Zero(H, B);
        for (std::size_t t = T; t-- > 0;) {
            const Matrix dh = d_layer_out[t] + dh_next;
            const auto& gi = lc.gate_i[t];
            const auto& gf = lc.gate_f[t];
            const auto& gg = lc.gate_g[t];
            const auto& go = lc.gate_o[t];
            const auto& tc = lc.tanh_cell[t];
            const Matrix c_prev = t == 0 ? Matrix::Zero(H, B) : lc.cell[t - 1];
            const Matrix h_prev = t == 0 ? Matrix::Zero(H, B) : lc.hidden[t - 1];

            const Matrix d_o = (dh.array() * tc.array()).matrix();
            const Matrix dc =
                dc_next + (dh.array() * go.array() * (1.0 - tc.array().square())).matrix();
            const Matrix d_i = (dc.array() * gg.array()).matrix();
            const Matrix d_f = (dc.array() * c_prev.array()).matrix();
            const Matrix d_g = (dc.array() * gi.array()).matrix();

            Matrix dz(4 * H, B);
            dz.topRows(H) = (d_i.array() * gi.array() * (1.0 - gi.array())).matrix();
            dz.middleRows(H, H) = (d_f.array() * gf.array() * (1.0 - gf.array())).matrix();
            dz.middleRows(2 * H, H) = (d_g.array() * (1.0 - gg.array().square())).matrix();
            dz.bottomRows(H) = (d_o.array() * go.array() * (1.0 - go.array())).matrix();

            gl.w_in.noalias() += dz * below[t].transpose();
            gl.w_rec.noalias() += dz * h_prev.transpose();
            gl.bias.noalias() += dz.rowwise().sum();
            d_below[t] = p.w_in.transpose() * dz;
            dh_next = p.w_rec.transpose() * dz;
            dc_next = (dc.array() * gf.array()).matrix();
        }
        d_layer_out = std::move(d_below);
    }
    return g;
}

std::pair<double, Matrix> mse_loss(const Matrix& pred, const Eigen::RowVectorXd& target) {
    if (pred.rows() != 1 || pred.cols() != target.size()) {
        throw ShapeError("mse_loss: prediction/target shapes disagree");
    }
    check_finite(pred, "mse_loss prediction");
    if (!target.allFinite()) throw NumericError("mse_loss: non-finite target");
    const Eigen::Index B = pred.cols();
    const Matrix resid = pred - target;
    const double loss = resid.array().square().sum() / static_cast<double>(B);
    Matrix grad = 2.0 * resid / static_cast<double>(B);
    return {loss, grad};
}

std::pair<double, Matrix> pinball_loss(const Matrix& pred, const Eigen::RowVectorXd& target,
                                       const Vector& quantiles) {
    if (pred.rows() != quantiles.size() || pred.cols() != target.size()) {
        throw ShapeError("pinball_loss: prediction/quantile/target shapes disagree");
    }
    for (Eigen::Index k = 0; k < quantiles.size(); ++k) {
        const bool increasing = k == 0 || quantiles[k] > quantiles[k - 1];
        if (!(quantiles[k] > 0.0 && quantiles[k] < 1.0) || !increasing) {
            throw InputError("quantiles must be strictly increasing within (0,1)");
        }
    }
    check_finite(pred, "pinball_loss prediction");
    if (!target.allFinite()) throw NumericError("pinball_loss: non-finite target");

    const Eigen::Index B = pred.cols();
    const Eigen::Index Q = pred.rows();
    double loss = 0.0;
    Matrix grad(Q, B);
    for (Eigen::Index b = 0; b < B; ++b) {
        for (Eigen::Index k = 0; k < Q; ++k) {
            const double q = quantiles[k];
            const double e = target[b] - pred(k, b);
            // max(q e, (q-1) e); ties resolve to the (q-1) branch.
            if (e > 0.0) {
                loss += q * e;
                grad(k, b) = -q;
            } else {
                loss += (q - 1.0) * e;
                grad(k, b) = 1.0 - q;
            }
        }
    }
    loss /= static_cast<double>(B);
    grad /= static_cast<double>(B);
    return {loss, grad};
}

AdamState make_adam_state(const NetworkShape& shape) {
    Parameters reference = allocate(shape);
    AdamState state;
    for (const auto& block : reference.blocks()) {
        state.m.emplace_back(Eigen::ArrayXd::Zero(block.size));
        state.v.emplace_back(Eigen::ArrayXd::Zero(block.size));
    }
    return state;
}

void adam_step(Parameters& params, const Parameters& grads, AdamState& state, double lr) {
    if (!(lr >= 0.0)) throw InputError("learning rate must be >= 0");
    auto pblocks = params.blocks();
    auto gblocks = grads.blocks();
    if (pblocks.size() != gblocks.size() || pblocks.size() != state.m.size()) {
        throw ShapeError("adam_step: parameter/gradient/state block counts disagree");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < pblocks.size(); ++k) {
        if (pblocks[k].size != gblocks[k].size) {
            throw ShapeError("adam_step: block size mismatch at " + pblocks[k].name);
        }
        Eigen::Map<Eigen::ArrayXd> theta(pblocks[k].data, pblocks[k].size);
        Eigen::Map<const Eigen::ArrayXd> g(gblocks[k].data, gblocks[k].size);
        if (!g.isFinite().all()) {
            throw NumericError("non-finite gradient in block " + pblocks[k].name);
        }
        auto& m = state.m[k];
        auto& v = state.v[k];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.square();
        theta -= lr * (m / bc1) / ((v / bc2).sqrt() + state.epsilon);
    }
}

namespace {
constexpr char kNetMagic[8] = {'C', 'C', 'N', 'E', 'T', 'W', 'T', 'S'};
constexpr std::uint32_t kNetVersion = 1;
} // namespace

void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write network weights: " + path);
    out.write(kNetMagic, sizeof(kNetMagic));
    out.write(reinterpret_cast<const char*>(&kNetVersion), sizeof(kNetVersion));
    out.write(kGateOrder, 4);
    auto put_i32 = [&out](std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    put_i32(net.shape.input_channels);
    put_i32(static_cast<std::int32_t>(net.shape.lstm_units.size()));
    for (const int h : net.shape.lstm_units) put_i32(h);
    put_i32(net.shape.dense_units);
    put_i32(net.shape.output_dim);
    put_i32(net.shape.static_dim);
    for (const auto& block : net.params.blocks()) {
        out.write(reinterpret_cast<const char*>(block.data),
                  static_cast<std::streamsize>(block.size) * 8);
    }
    if (!out) throw InputError("short write on network weights: " + path);
}

Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open network weights: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kNetMagic, sizeof(kNetMagic)) != 0) {
        throw InputError("not a network weight file: " + path);
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kNetVersion) {
        throw InputError("network weight version mismatch in " + path);
    }
    char order[4];
    in.read(order, 4);
    if (!in || std::memcmp(order, kGateOrder, 4) != 0) {
        throw InputError("unsupported gate order in " + path);
    }
    auto get_i32 = [&in]() {
        std::int32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    NetworkShape shape;
    shape.input_channels = get_i32();
    const std::int32_t n_layers = get_i32();
    for (std::int32_t l = 0; l < n_layers; ++l) shape.lstm_units.push_back(get_i32());
    shape.dense_units = get_i32();
    shape.output_dim = get_i32();
    shape.static_dim = get_i32();
    if (!in) throw InputError("network weight file truncated: " + path);
    validate_shape(shape);

    Network net;
    net.shape = shape;
    net.params = allocate(shape);
    for (const auto& block : net.params.blocks()) {
        in.read(reinterpret_cast<char*>(block.data), static_cast<std::streamsize>(block.size) * 8);
    }
    if (!in) throw InputError("network weight file truncated: " + path);
    char extra;
    if (in.read(&extra, 1)) throw InputError("network weight file has trailing bytes: " + path);
    return net;
}

} // namespace countycast::nn

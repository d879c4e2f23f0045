#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tabrep/errors.hpp"
#include "tabrep/matrix.hpp"
#include "tabrep/rng.hpp"

namespace tabrep::neural {

using numkit::Matrix;
using numkit::RngStream;

enum class Activation { Sigmoid, Relu, Tanh, Linear };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Linear: return "linear";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "linear") return Activation::Linear;
    throw ParamError("unknown activation '" + s + "'");
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::Sigmoid: return sigmoid(z);
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Linear: return z;
    }
    return z;
}

/// Derivative expressed through the activation value (valid for this set).
inline double activation_deriv(Activation a, double value) {
    switch (a) {
        case Activation::Sigmoid: return value * (1.0 - value);
        case Activation::Relu: return value > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - value * value;
        case Activation::Linear: return 1.0;
    }
    return 1.0;
}

struct DenseLayer {
    Matrix weights; // out x in
    std::vector<double> bias;
    Activation activation = Activation::Linear;

    std::size_t in_dim() const { return weights.cols(); }
    std::size_t out_dim() const { return weights.rows(); }
};

struct MlpNetwork {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

    void validate() const {
        for (std::size_t i = 0; i + 1 < layers.size(); ++i)
            if (layers[i].out_dim() != layers[i + 1].in_dim())
                throw ShapeError("MlpNetwork: layer " + std::to_string(i) + " out " +
                                 std::to_string(layers[i].out_dim()) + " != layer " + std::to_string(i + 1) +
                                 " in " + std::to_string(layers[i + 1].in_dim()));
    }
};

/// Glorot-uniform weights, zero biases, consumed from the stream layer by layer.
inline MlpNetwork make_mlp(const std::vector<std::size_t>& widths, const std::vector<Activation>& acts,
                           RngStream& rng) {
    if (widths.size() < 2) throw ParamError("make_mlp: need at least input and output widths");
    if (acts.size() != widths.size() - 1)
        throw ParamError("make_mlp: expected " + std::to_string(widths.size() - 1) + " activations, got " +
                         std::to_string(acts.size()));
    MlpNetwork net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        DenseLayer layer;
        const double limit = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
        layer.weights = numkit::sample(rng, numkit::Uniform{-limit, limit}, widths[l + 1], widths[l]);
        layer.bias.assign(widths[l + 1], 0.0);
        layer.activation = acts[l];
        net.layers.push_back(std::move(layer));
    }
    return net;
}

/// Interior widths of a geometric taper from `in` to `out`.
inline std::vector<std::size_t> geometric_widths(std::size_t in, std::size_t out, std::size_t interior) {
    std::vector<std::size_t> w;
    const double li = std::log(static_cast<double>(in));
    const double lo = std::log(static_cast<double>(out));
    for (std::size_t k = 1; k <= interior; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(interior + 1);
        const auto width = static_cast<std::size_t>(std::llround(std::exp(li + (lo - li) * f)));
        w.push_back(std::max<std::size_t>(1, width));
    }
    return w;
}

/// Input plus every layer's activation; last entry is the network output.
struct Activations {
    std::vector<Matrix> values;

    const Matrix& output() const { return values.back(); }
};

inline Activations forward(const MlpNetwork& net, const Matrix& x) {
    if (x.cols() != net.input_dim())
        throw ShapeError("forward: input width " + std::to_string(x.cols()) + " != network input dim " +
                         std::to_string(net.input_dim()));
    Activations acts;
    acts.values.reserve(net.layers.size() + 1);
    acts.values.push_back(x);
    for (const auto& layer : net.layers) {
        Matrix z = numkit::matmul_nt(acts.values.back(), layer.weights);
        for (std::size_t i = 0; i < z.rows(); ++i) {
            auto row = z.row(i);
            for (std::size_t j = 0; j < z.cols(); ++j) row[j] = activate(layer.activation, row[j] + layer.bias[j]);
        }
        acts.values.push_back(std::move(z));
    }
    return acts;
}

struct NetGrads {
    std::vector<Matrix> weights;            // per layer, same shape as layer.weights
    std::vector<std::vector<double>> bias;  // per layer
};

struct BackwardResult {
    NetGrads grads;
    Matrix input_grad; // dL/dX, for chaining networks
};

/// Exact gradients of whatever scalar the caller differentiated to produce
/// `output_grad`; no implicit averaging happens here.
inline BackwardResult backward(const MlpNetwork& net, const Activations& acts, const Matrix& output_grad) {
    if (acts.values.size() != net.layers.size() + 1)
        throw ShapeError("backward: activations do not match network depth");
    if (!output_grad.same_shape(acts.output()))
        throw ShapeError("backward: output gradient shape " + numkit::shape_str(output_grad) +
                         " != output shape " + numkit::shape_str(acts.output()));

    BackwardResult res;
    res.grads.weights.resize(net.layers.size());
    res.grads.bias.resize(net.layers.size());

    Matrix upstream = output_grad;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const auto& layer = net.layers[l];
        const Matrix& a = acts.values[l + 1];
        if (a.cols() != layer.out_dim())
            throw ShapeError("backward: stale activations for layer " + std::to_string(l));
        Matrix delta = upstream;
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta.data()[i] *= activation_deriv(layer.activation, a.data()[i]);
        res.grads.weights[l] = numkit::matmul_tn(delta, acts.values[l]);
        res.grads.bias[l] = numkit::col_sums(delta);
        upstream = numkit::matmul(delta, layer.weights);
    }
    res.input_grad = std::move(upstream);
    return res;
}

// ---------------------------------------------------------------------------
// Optimizers. One state per parameter block; Adam keeps bias-corrected moments.
// ---------------------------------------------------------------------------

enum class OptKind { Sgd, Adam };

struct OptimizerState {
    OptKind kind = OptKind::Sgd;
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t t = 0;
    std::vector<double> m, v;

    OptimizerState() = default;
    OptimizerState(OptKind k, double learning_rate) : kind(k), lr(learning_rate) {
        if (!(lr > 0.0)) throw ParamError("optimizer: learning rate must be > 0");
    }

    void step(std::span<double> params, std::span<const double> grads) {
        if (params.size() != grads.size())
            throw ShapeError("optimizer step: param/grad sizes differ");
        if (kind == OptKind::Sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
            return;
        }
        if (m.empty()) {
            m.assign(params.size(), 0.0);
            v.assign(params.size(), 0.0);
        }
        if (m.size() != params.size())
            throw ShapeError("optimizer step: moment arrays do not match parameters");
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

/// Optimizer over a whole network: one state per weight/bias block.
class NetOptimizer {
public:
    NetOptimizer(OptKind kind, double lr) : kind_(kind), lr_(lr) {
        if (!(lr > 0.0)) throw ParamError("optimizer: learning rate must be > 0");
    }

    void step(MlpNetwork& net, const NetGrads& grads) {
        if (states_.empty()) states_.resize(net.layers.size() * 2, OptimizerState(kind_, lr_));
        if (grads.weights.size() != net.layers.size())
            throw ShapeError("NetOptimizer: gradients do not match network depth");
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            states_[2 * l].step(net.layers[l].weights.data(), grads.weights[l].data());
            states_[2 * l + 1].step(net.layers[l].bias, grads.bias[l]);
        }
    }

    /// Rescale the learning rate (annealing); moments are kept.
    void set_lr(double lr) {
        if (!(lr > 0.0)) throw ParamError("optimizer: learning rate must be > 0");
        lr_ = lr;
        for (auto& s : states_) s.lr = lr;
    }

private:
    OptKind kind_;
    double lr_;
    std::vector<OptimizerState> states_;
};

// ---------------------------------------------------------------------------
// Loss utilities shared by the encoder trainers. All are means over every
// entry, so gradients carry the 1/(n*p) factor.
// ---------------------------------------------------------------------------

inline double mse(const Matrix& target, const Matrix& pred) {
    numkit::require_same_shape(target, pred, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        s += d * d;
    }
    return s / static_cast<double>(target.size());
}

inline Matrix mse_grad(const Matrix& target, const Matrix& pred) {
    numkit::require_same_shape(target, pred, "mse_grad");
    Matrix g = pred;
    const double scale = 2.0 / static_cast<double>(target.size());
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = scale * (pred.data()[i] - target.data()[i]);
    return g;
}

inline double mae(const Matrix& target, const Matrix& pred) {
    numkit::require_same_shape(target, pred, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) s += std::abs(pred.data()[i] - target.data()[i]);
    return s / static_cast<double>(target.size());
}

inline Matrix mae_grad(const Matrix& target, const Matrix& pred) {
    numkit::require_same_shape(target, pred, "mae_grad");
    Matrix g = pred;
    const double scale = 1.0 / static_cast<double>(target.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        g.data()[i] = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
    }
    return g;
}

/// Shuffled mini-batch row indices, one vector per batch.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, RngStream& rng) {
    if (batch_size == 0) throw ParamError("make_batches: batch size must be >= 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

// Flat parameter views for gradient checking and hashing.

inline std::vector<double> get_params(const MlpNetwork& net) {
    std::vector<double> out;
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.weights.data().begin(), l.weights.data().end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    return out;
}

inline void set_params(MlpNetwork& net, std::span<const double> params) {
    std::size_t pos = 0;
    for (auto& l : net.layers) {
        for (double& w : l.weights.data()) w = params[pos++];
        for (double& b : l.bias) b = params[pos++];
    }
    if (pos != params.size()) throw ShapeError("set_params: size mismatch");
}

inline std::vector<double> flatten_grads(const NetGrads& grads) {
    std::vector<double> out;
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        out.insert(out.end(), grads.weights[l].data().begin(), grads.weights[l].data().end());
        out.insert(out.end(), grads.bias[l].begin(), grads.bias[l].end());
    }
    return out;
}

inline bool all_finite(const MlpNetwork& net) {
    for (const auto& l : net.layers)
        if (!numkit::all_finite(l.weights) || !numkit::all_finite(std::span<const double>(l.bias))) return false;
    return true;
}

} // namespace tabrep::neural

#include "pcl/net.hpp"

#include <algorithm>
#include <cmath>

#include "pcl/errors.hpp"

namespace pcl {

namespace {
constexpr double kLogFloor = 1e-12;

double activate(double z, Activation act) {
    return act == Activation::Relu ? std::max(0.0, z) : z;
}

double activate_grad(double z, Activation act) {
    return act == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0;
}
}  // namespace

DenseNetwork make_mlp(const std::vector<int>& sizes, Rng& rng) {
    if (sizes.size() < 2) throw param_error("make_mlp: need at least input and output sizes");
    DenseNetwork net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int in = sizes[l];
        const int out = sizes[l + 1];
        if (in <= 0 || out <= 0) throw param_error("make_mlp: non-positive layer size");
        DenseLayer layer;
        layer.weights = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        const bool last = (l + 2 == sizes.size());
        layer.activation = last ? Activation::Identity : Activation::Relu;
        if (last) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            for (double& w : layer.weights.data) w = (2.0 * rng.uniform() - 1.0) * bound;
        } else {
            const double sd = std::sqrt(2.0 / static_cast<double>(in));  // He init
            for (double& w : layer.weights.data) w = sd * rng.normal();
        }
        net.layers.push_back(std::move(layer));
    }
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l)
        if (net.layers[l].out_dim() != net.layers[l + 1].in_dim())
            throw shape_error("make_mlp: layer dimensions do not chain");
    return net;
}

Matrix forward(const DenseNetwork& net, const Matrix& x, ForwardCache* cache) {
    if (net.layers.empty()) throw param_error("forward: empty network");
    if (x.cols != net.input_dim()) throw shape_error("forward: input width != first layer in-dim");
    if (cache) {
        cache->input = x;
        cache->pre.clear();
        cache->post.clear();
        cache->batch = x.rows;
    }
    Matrix a = x;
    for (const auto& layer : net.layers) {
        Matrix z = matmul_nt(a, layer.weights);
        for (int r = 0; r < z.rows; ++r)
            for (int c = 0; c < z.cols; ++c) z(r, c) += layer.bias[c];
        Matrix post(z.rows, z.cols);
        for (std::size_t i = 0; i < z.data.size(); ++i)
            post.data[i] = activate(z.data[i], layer.activation);
        if (cache) {
            cache->pre.push_back(z);
            cache->post.push_back(post);
        }
        a = std::move(post);
    }
    return a;
}

namespace {

/// Softmax probabilities per row, numerically stabilized.
Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows, logits.cols);
    for (int r = 0; r < logits.rows; ++r) {
        const auto z = logits.row(r);
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        double sum = 0.0;
        for (int c = 0; c < logits.cols; ++c) {
            p(r, c) = std::exp(z[c] - zmax);
            sum += p(r, c);
        }
        for (int c = 0; c < logits.cols; ++c) p(r, c) /= sum;
    }
    return p;
}

CrossEntropyResult cross_entropy_impl(const Matrix& logits, const Matrix& targets,
                                      const std::vector<double>* row_weights) {
    if (logits.rows != targets.rows || logits.cols != targets.cols)
        throw shape_error("soft_cross_entropy: logits/targets shapes disagree");
    if (row_weights && static_cast<int>(row_weights->size()) != logits.rows)
        throw shape_error("soft_cross_entropy: row weight count != batch");
    const Matrix p = softmax_rows(logits);
    const double inv_batch = logits.rows > 0 ? 1.0 / logits.rows : 0.0;
    CrossEntropyResult out;
    out.grad_logits = Matrix(logits.rows, logits.cols);
    for (int r = 0; r < logits.rows; ++r) {
        const double w = row_weights ? (*row_weights)[r] : inv_batch;
        double row_loss = 0.0;
        double tsum = 0.0;
        for (int c = 0; c < logits.cols; ++c) {
            const double t = targets(r, c);
            row_loss -= t * std::log(std::max(p(r, c), kLogFloor));
            tsum += t;
        }
        out.loss += w * row_loss;
        for (int c = 0; c < logits.cols; ++c)
            out.grad_logits(r, c) = w * (p(r, c) * tsum - targets(r, c));
    }
    return out;
}

}  // namespace

CrossEntropyResult soft_cross_entropy(const Matrix& logits, const Matrix& targets) {
    return cross_entropy_impl(logits, targets, nullptr);
}

CrossEntropyResult soft_cross_entropy_weighted(const Matrix& logits, const Matrix& targets,
                                               const std::vector<double>& row_weights) {
    return cross_entropy_impl(logits, targets, &row_weights);
}

std::vector<double> per_row_cross_entropy(const Matrix& logits, const Matrix& targets) {
    if (logits.rows != targets.rows || logits.cols != targets.cols)
        throw shape_error("per_row_cross_entropy: shapes disagree");
    const Matrix p = softmax_rows(logits);
    std::vector<double> losses(logits.rows, 0.0);
    for (int r = 0; r < logits.rows; ++r)
        for (int c = 0; c < logits.cols; ++c)
            losses[r] -= targets(r, c) * std::log(std::max(p(r, c), kLogFloor));
    return losses;
}

bool ParamGrads::finite() const {
    for (const auto& w : weights)
        if (!w.finite()) return false;
    for (const auto& b : bias)
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return true;
}

void ParamGrads::scale(double s) {
    for (auto& w : weights)
        for (double& v : w.data) v *= s;
    for (auto& b : bias)
        for (double& v : b) v *= s;
}

ParamGrads zero_grads(const DenseNetwork& net) {
    ParamGrads g;
    for (const auto& layer : net.layers) {
        g.weights.emplace_back(layer.out_dim(), layer.in_dim());
        g.bias.emplace_back(layer.out_dim(), 0.0);
    }
    return g;
}

BackwardResult backward(const DenseNetwork& net, const ForwardCache& cache,
                        const Matrix& grad_logits) {
    const int n_layers = static_cast<int>(net.layers.size());
    if (static_cast<int>(cache.pre.size()) != n_layers)
        throw shape_error("backward: cache does not match network depth");
    if (grad_logits.rows != cache.batch || grad_logits.cols != net.output_dim())
        throw shape_error("backward: grad_logits shape does not match cache");

    BackwardResult out;
    out.grads = zero_grads(net);

    Matrix delta = grad_logits;  // gradient wrt pre-activation of current layer
    for (int l = n_layers - 1; l >= 0; --l) {
        const auto& layer = net.layers[l];
        // delta currently holds dL/da_l; fold in the activation derivative.
        const Matrix& z = cache.pre[l];
        for (std::size_t i = 0; i < delta.data.size(); ++i)
            delta.data[i] *= activate_grad(z.data[i], layer.activation);

        const Matrix& a_prev = (l == 0) ? cache.input : cache.post[l - 1];
        out.grads.weights[l] = matmul_tn(delta, a_prev);  // out x in
        for (int r = 0; r < delta.rows; ++r)
            for (int c = 0; c < delta.cols; ++c) out.grads.bias[l][c] += delta(r, c);

        delta = matmul(delta, layer.weights);  // dL/da_{l-1}, batch x in
    }
    out.grad_input = std::move(delta);
    return out;
}

void sgd_step(DenseNetwork& net, const ParamGrads& grads, double lr) {
    if (lr <= 0.0) throw param_error("sgd_step: learning rate must be positive");
    if (grads.weights.size() != net.layers.size())
        throw shape_error("sgd_step: gradient layer count mismatch");
    if (!grads.finite()) throw training_error("sgd_step: non-finite gradients");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        const auto& gw = grads.weights[l];
        if (gw.rows != layer.out_dim() || gw.cols != layer.in_dim())
            throw shape_error("sgd_step: gradient shape mismatch");
        for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
            layer.weights.data[i] -= lr * gw.data[i];
        for (int c = 0; c < layer.out_dim(); ++c) layer.bias[c] -= lr * grads.bias[l][c];
    }
}

double max_param_distance(const DenseNetwork& a, const DenseNetwork& b) {
    double m = 0.0;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        for (std::size_t i = 0; i < a.layers[l].weights.data.size(); ++i)
            m = std::max(m, std::abs(a.layers[l].weights.data[i] - b.layers[l].weights.data[i]));
        for (std::size_t i = 0; i < a.layers[l].bias.size(); ++i)
            m = std::max(m, std::abs(a.layers[l].bias[i] - b.layers[l].bias[i]));
    }
    return m;
}

}  // namespace pcl

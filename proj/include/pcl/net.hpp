#pragma once

#include <vector>

#include "pcl/matrix.hpp"
#include "pcl/rng.hpp"

namespace pcl {

enum class Activation { Relu, Identity };

struct DenseLayer {
    Matrix weights;            // out x in
    std::vector<double> bias;  // out
    Activation activation = Activation::Identity;

    int in_dim() const { return weights.cols; }
    int out_dim() const { return weights.rows; }
};

/// Plain MLP. The final layer is always Identity (logits out).
struct DenseNetwork {
    std::vector<DenseLayer> layers;

    int input_dim() const { return layers.front().in_dim(); }
    int output_dim() const { return layers.back().out_dim(); }
};

/// Builds an MLP with the given layer widths (sizes.front() = input dim,
/// sizes.back() = output dim). Hidden layers are ReLU with He init, the final
/// layer is Identity with uniform +-1/sqrt(in) init. Biases start at zero.
DenseNetwork make_mlp(const std::vector<int>& sizes, Rng& rng);

/// Per-layer pre-activations and activations for one batch.
struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre;   // z_l = a_{l-1} W_l^T + b_l
    std::vector<Matrix> post;  // a_l = act(z_l)
    int batch = 0;
};

/// Evaluates the network on a batch (rows = samples). Fills `cache` when
/// given. Read-only on the network, safe to call concurrently.
Matrix forward(const DenseNetwork& net, const Matrix& x, ForwardCache* cache = nullptr);

struct CrossEntropyResult {
    double loss = 0.0;
    Matrix grad_logits;
};

/// Soft-label cross entropy: mean over rows of -sum_i t_i log softmax(z)_i.
/// Targets may be arbitrary real vectors (bridged labels can leave the
/// simplex); the loss stays linear in the targets and log is floored at
/// 1e-12. grad_logits = (softmax(z) * sum_i t_i - t) / batch.
CrossEntropyResult soft_cross_entropy(const Matrix& logits, const Matrix& targets);

/// Weighted-row variant: loss = sum_r w_r * ell_r (no batch mean), gradient
/// scaled per row by w_r. Used for bridge-path Riemann sums.
CrossEntropyResult soft_cross_entropy_weighted(const Matrix& logits, const Matrix& targets,
                                               const std::vector<double>& row_weights);

/// -sum_i t_i log softmax(z)_i for each row separately.
std::vector<double> per_row_cross_entropy(const Matrix& logits, const Matrix& targets);

struct ParamGrads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> bias;

    bool finite() const;
    void scale(double s);
};

ParamGrads zero_grads(const DenseNetwork& net);

struct BackwardResult {
    ParamGrads grads;
    Matrix grad_input;  // batch x input_dim
};

/// Backpropagates grad_logits through the cached forward pass. Returns both
/// parameter gradients and the gradient with respect to the input batch.
BackwardResult backward(const DenseNetwork& net, const ForwardCache& cache,
                        const Matrix& grad_logits);

/// theta <- theta - lr * grad, in place. Throws training_error on non-finite
/// gradients.
void sgd_step(DenseNetwork& net, const ParamGrads& grads, double lr);

/// Max |a - b| over all parameters (trajectory comparisons in tests).
double max_param_distance(const DenseNetwork& a, const DenseNetwork& b);

}  // namespace pcl

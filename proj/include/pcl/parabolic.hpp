#pragma once

#include <vector>

#include "pcl/bridge.hpp"
#include "pcl/buffer.hpp"
#include "pcl/net.hpp"
#include "pcl/rng.hpp"

namespace pcl {

/// First-order transport term mu(x) for the drifted loss. GaussianPrior is
/// the gradient of a quadratic potential centred at `center`:
/// mu(x) = (x - center) / scale^2.
struct DriftDescriptor {
    enum class Kind { None, GaussianPrior };
    Kind kind = Kind::None;
    std::vector<double> center;
    double scale = 1.0;

    bool active() const { return kind != Kind::None; }
    std::vector<double> mu(std::span<const double> x) const;
    void validate(std::size_t dim) const;
};

struct PclConfig {
    BridgeSpec bridge;
    std::size_t buffer_batch = 32;
    PairingStrategy pairing = PairingStrategy::RandomShuffle;
    VarianceStrategy variance = VarianceStrategy::Constant;
    bool include_endpoints = true;
    int bridges_per_pair = 1;
    DriftDescriptor drift;
};

struct PclResult {
    double loss = 0.0;
    ParamGrads grads;
    std::size_t n_paths = 0;
    long girsanov_clamped = 0;  // paths whose weight exponent hit the cap
};

/// Ito (left-point) discretization of the Radon-Nikodym weight
/// exp(sum_j mu(x_j)^T (x_{j+1} - x_j) - 1/2 sum_j |mu(x_j)|^2 dt)
/// along the feature rows of a bridge path. The exponent is capped at 30;
/// `clamped` (when given) reports whether the cap was hit.
double girsanov_weight(const BridgePath& path, const DriftDescriptor& drift,
                       bool* clamped = nullptr);

/// Training loss of the parabolic continual learner for one step:
/// draws a buffer batch (rng.fork(0)) and concatenates it, pairs endpoints,
/// samples joint bridges (rng.fork(1)), and Euler-integrates the soft
/// cross entropy along every path:
///
///   loss = sum_paths w_path [ sum_{j<k} dt * ell(f(x_j), y_j)
///                             + ell(f(x_k), y_k) if include_endpoints ] / n_paths
///
/// w_path = 1 without drift; with drift, Girsanov weights normalized to mean
/// one across the batch (self-normalized importance sampling). Gradients flow
/// through every evaluated point but not through the bridge noise. The rng is
/// taken by value: calling twice with the same value replays the same paths.
PclResult pcl_loss(const DenseNetwork& net, const Matrix& x, const Matrix& y,
                   const ReservoirBuffer* buffer, const PclConfig& cfg, Rng rng);

/// Experience-replay loss: plain mean cross entropy on the batch concatenated
/// with a buffer draw. Consumes the same rng.fork(0) stream as pcl_loss, so
/// the two methods see identical buffer batches under identical seeds.
struct ErResult {
    double loss = 0.0;
    ParamGrads grads;
};
ErResult er_loss(const DenseNetwork& net, const Matrix& x, const Matrix& y,
                 const ReservoirBuffer* buffer, std::size_t buffer_batch, Rng rng);

/// Per-row L2 norms of the loss gradient with respect to the inputs
/// (tempering signal; also used by diagnostics).
std::vector<double> input_gradient_norms(const DenseNetwork& net, const Matrix& x,
                                         const Matrix& y);

}  // namespace pcl

#pragma once

#include <optional>
#include <vector>

#include "pcl/matrix.hpp"
#include "pcl/rng.hpp"

namespace pcl {

struct BridgeSpec {
    int k = 4;              // time steps (path has k+1 grid points)
    double sigma_x = 0.03;  // feature diffusion
    double sigma_y = 0.01;  // label diffusion
    double terminal_time = 1.0;
};

/// Discretized Brownian bridge over features and labels jointly.
/// Row 0 is the start point and row k the end point, exactly.
struct BridgePath {
    std::vector<double> times;  // k+1 values, times[0]=0, times[k]=T
    Matrix xs;                  // (k+1) x d
    Matrix ys;                  // (k+1) x c

    int steps() const { return static_cast<int>(times.size()) - 1; }
    double dt() const { return times[1] - times[0]; }
};

enum class PairingStrategy {
    RandomShuffle,    // uniform random permutation of the batch
    EuclideanSorted,  // rank-mirrored by distance from the batch centroid
    Identity,         // each row pairs with itself (degenerate/ER mode)
};

enum class VarianceStrategy {
    Constant,
    Tempering,  // per-step sigma interpolates endpoint input-gradient norms
};

/// Single bridge between x0 and x1 (Brownian motion pinned at both ends):
/// W_0 = x0, W_{j+1} = W_j + sigma*sqrt(dt)*N(0,I), BB_t = W_t - (t/T)(W_T - x1).
/// Returns a (k+1) x d matrix of path points. sigma = 0 degenerates to exact
/// linear interpolation.
Matrix sample_bridge(std::span<const double> x0, std::span<const double> x1, double sigma,
                     const BridgeSpec& spec, Rng& rng);

/// Variant with a per-step diffusion coefficient (tempering); sigmas.size()
/// must equal spec.k.
Matrix sample_bridge_steps(std::span<const double> x0, std::span<const double> x1,
                           const std::vector<double>& step_sigmas, const BridgeSpec& spec,
                           Rng& rng);

/// The endpoint permutation a pairing strategy induces on a batch.
std::vector<int> pairing_permutation(const Matrix& x, PairingStrategy strategy, Rng& rng);

/// Joint feature/label bridges for a batch: row i bridges to row perm(i),
/// sigma_x on features and sigma_y on labels, independent noise on one shared
/// time grid. Tempering requires one input-gradient norm per row (frozen for
/// the batch); per-step sigma is sigma_base * ((1-t/T) g_start + (t/T) g_end)
/// with g normalized by the batch mean so average diffusion stays sigma_base.
/// Path i's noise stream is rng.fork(1).fork(i), so results do not depend on
/// evaluation order.
std::vector<BridgePath> sample_paired_bridges(const Matrix& x, const Matrix& y,
                                              const BridgeSpec& spec, PairingStrategy pairing,
                                              VarianceStrategy variance,
                                              const std::vector<double>* grad_norms, Rng rng);

}  // namespace pcl

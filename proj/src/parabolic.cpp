#include "pcl/parabolic.hpp"

#include <cmath>

#include "pcl/errors.hpp"

namespace pcl {

namespace {
constexpr double kWeightExponentCap = 30.0;
}

std::vector<double> DriftDescriptor::mu(std::span<const double> x) const {
    std::vector<double> out(x.size(), 0.0);
    if (kind == Kind::GaussianPrior) {
        const double inv_s2 = 1.0 / (scale * scale);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - center[i]) * inv_s2;
    }
    return out;
}

void DriftDescriptor::validate(std::size_t dim) const {
    if (!active()) return;
    if (scale <= 0.0) throw param_error("drift: scale must be positive");
    if (center.size() != dim) throw param_error("drift: center dimension mismatch");
}

double girsanov_weight(const BridgePath& path, const DriftDescriptor& drift, bool* clamped) {
    if (!drift.active()) throw param_error("girsanov_weight: drift kind is none");
    drift.validate(static_cast<std::size_t>(path.xs.cols));
    const int k = path.steps();
    const double dt = path.dt();
    double exponent = 0.0;
    for (int j = 0; j < k; ++j) {
        const auto xj = path.xs.row(j);
        const auto xj1 = path.xs.row(j + 1);
        const auto m = drift.mu(xj);
        double ito = 0.0;
        double msq = 0.0;
        for (int c = 0; c < path.xs.cols; ++c) {
            ito += m[c] * (xj1[c] - xj[c]);
            msq += m[c] * m[c];
        }
        exponent += ito - 0.5 * msq * dt;
    }
    const bool hit_cap = exponent > kWeightExponentCap;
    if (clamped) *clamped = hit_cap;
    return std::exp(hit_cap ? kWeightExponentCap : exponent);
}

namespace {

/// Concatenates the incoming batch with a buffer draw (Alg.-1 style). Both
/// PCL and ER call this with rng.fork(0) so their draws coincide.
void concat_buffer_batch(Matrix& x, Matrix& y, const ReservoirBuffer* buffer,
                         std::size_t buffer_batch, Rng rng) {
    if (!buffer || buffer->empty() || buffer_batch == 0) return;
    Rng draw = rng.fork(0);
    auto [xm, ym] = buffer->sample_batch(buffer_batch, draw);
    x = vstack(x, xm);
    y = vstack(y, ym);
}

}  // namespace

std::vector<double> input_gradient_norms(const DenseNetwork& net, const Matrix& x,
                                         const Matrix& y) {
    ForwardCache cache;
    const Matrix logits = forward(net, x, &cache);
    const auto ce = soft_cross_entropy(logits, y);
    const auto back = backward(net, cache, ce.grad_logits);
    std::vector<double> norms(x.rows, 0.0);
    for (int r = 0; r < x.rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < back.grad_input.cols; ++c)
            s += back.grad_input(r, c) * back.grad_input(r, c);
        norms[r] = std::sqrt(s);
    }
    return norms;
}

PclResult pcl_loss(const DenseNetwork& net, const Matrix& x, const Matrix& y,
                   const ReservoirBuffer* buffer, const PclConfig& cfg, Rng rng) {
    if (x.rows != y.rows) throw shape_error("pcl_loss: X/Y row counts disagree");
    if (x.cols != net.input_dim()) throw shape_error("pcl_loss: input width != network input");
    if (cfg.bridges_per_pair < 1) throw param_error("pcl_loss: bridges_per_pair must be >= 1");
    cfg.drift.validate(static_cast<std::size_t>(x.cols));

    Matrix xall = x;
    Matrix yall = y;
    concat_buffer_batch(xall, yall, buffer, cfg.buffer_batch, rng);
    const int n_pairs = xall.rows;
    if (n_pairs == 0) throw param_error("pcl_loss: empty batch");

    std::vector<double> grad_norms;
    const std::vector<double>* norms_ptr = nullptr;
    if (cfg.variance == VarianceStrategy::Tempering) {
        grad_norms = input_gradient_norms(net, xall, yall);
        norms_ptr = &grad_norms;
    }

    // One joint bridge per (pair, copy). Stream layout matches
    // sample_paired_bridges (fork(0) = shuffle, fork(1).fork(index) = path),
    // so with bridges_per_pair = 1 the paths are identical to that call.
    std::vector<BridgePath> paths;
    paths.reserve(static_cast<std::size_t>(n_pairs) * cfg.bridges_per_pair);
    Rng bridge_base = rng.fork(1);
    Rng perm_rng = bridge_base.fork(0);
    const auto perm = pairing_permutation(xall, cfg.pairing, perm_rng);

    std::vector<double> g_rel;
    if (norms_ptr) {
        double mean = 0.0;
        for (double g : *norms_ptr) mean += g / n_pairs;
        g_rel.resize(n_pairs);
        for (int i = 0; i < n_pairs; ++i)
            g_rel[i] = mean > 0.0 ? (*norms_ptr)[i] / mean : 1.0;
    }

    const BridgeSpec& spec = cfg.bridge;
    std::vector<double> times(spec.k + 1);
    for (int j = 0; j <= spec.k; ++j) times[j] = j * (spec.terminal_time / spec.k);
    times[spec.k] = spec.terminal_time;

    Rng path_base = bridge_base.fork(1);
    for (int i = 0; i < n_pairs; ++i) {
        for (int b = 0; b < cfg.bridges_per_pair; ++b) {
            Rng path_rng = path_base.fork(static_cast<std::uint64_t>(i) * cfg.bridges_per_pair + b);
            BridgePath path;
            path.times = times;
            if (cfg.variance == VarianceStrategy::Tempering) {
                std::vector<double> sx(spec.k), sy(spec.k);
                for (int j = 0; j < spec.k; ++j) {
                    const double a = times[j] / spec.terminal_time;
                    const double factor = (1.0 - a) * g_rel[i] + a * g_rel[perm[i]];
                    sx[j] = spec.sigma_x * factor;
                    sy[j] = spec.sigma_y * factor;
                }
                path.xs = sample_bridge_steps(xall.row(i), xall.row(perm[i]), sx, spec, path_rng);
                path.ys = sample_bridge_steps(yall.row(i), yall.row(perm[i]), sy, spec, path_rng);
            } else {
                path.xs = sample_bridge(xall.row(i), xall.row(perm[i]), spec.sigma_x, spec, path_rng);
                path.ys = sample_bridge(yall.row(i), yall.row(perm[i]), spec.sigma_y, spec, path_rng);
            }
            paths.push_back(std::move(path));
        }
    }

    PclResult result;
    result.n_paths = paths.size();

    // Girsanov weights, self-normalized to mean one when drift is active.
    std::vector<double> path_weights(paths.size(), 1.0);
    if (cfg.drift.active()) {
        double sum = 0.0;
        for (std::size_t p = 0; p < paths.size(); ++p) {
            bool hit = false;
            path_weights[p] = girsanov_weight(paths[p], cfg.drift, &hit);
            if (hit) ++result.girsanov_clamped;
            sum += path_weights[p];
        }
        const double mean = sum / paths.size();
        if (mean > 0.0)
            for (double& w : path_weights) w /= mean;
    }

    // Flatten every path point into one evaluation batch with per-row
    // quadrature weights (left Riemann; terminal point weighted 1 when
    // endpoints are included, 0 otherwise).
    const int k = spec.k;
    const double dt = spec.terminal_time / k;
    const int rows_per_path = k + 1;
    const int total_rows = static_cast<int>(paths.size()) * rows_per_path;
    Matrix eval_x(total_rows, xall.cols);
    Matrix eval_y(total_rows, yall.cols);
    std::vector<double> row_weights(static_cast<std::size_t>(total_rows), 0.0);
    const double inv_paths = 1.0 / static_cast<double>(paths.size());
    for (std::size_t p = 0; p < paths.size(); ++p) {
        for (int j = 0; j <= k; ++j) {
            const int r = static_cast<int>(p) * rows_per_path + j;
            eval_x.set_row(r, paths[p].xs.row(j));
            eval_y.set_row(r, paths[p].ys.row(j));
            const double time_w = j < k ? dt : (cfg.include_endpoints ? 1.0 : 0.0);
            row_weights[static_cast<std::size_t>(r)] = path_weights[p] * time_w * inv_paths;
        }
    }

    ForwardCache cache;
    const Matrix logits = forward(net, eval_x, &cache);
    const auto ce = soft_cross_entropy_weighted(logits, eval_y, row_weights);
    if (!std::isfinite(ce.loss)) throw training_error("pcl_loss: non-finite loss");
    auto back = backward(net, cache, ce.grad_logits);

    result.loss = ce.loss;
    result.grads = std::move(back.grads);
    return result;
}

ErResult er_loss(const DenseNetwork& net, const Matrix& x, const Matrix& y,
                 const ReservoirBuffer* buffer, std::size_t buffer_batch, Rng rng) {
    Matrix xall = x;
    Matrix yall = y;
    concat_buffer_batch(xall, yall, buffer, buffer_batch, rng);
    if (xall.rows == 0) throw param_error("er_loss: empty batch");
    ForwardCache cache;
    const Matrix logits = forward(net, xall, &cache);
    const auto ce = soft_cross_entropy(logits, yall);
    if (!std::isfinite(ce.loss)) throw training_error("er_loss: non-finite loss");
    auto back = backward(net, cache, ce.grad_logits);
    return {ce.loss, std::move(back.grads)};
}

}  // namespace pcl

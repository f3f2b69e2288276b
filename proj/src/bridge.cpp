#include "pcl/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcl/errors.hpp"

namespace pcl {

namespace {

void check_spec(const BridgeSpec& spec) {
    if (spec.k < 1) throw param_error("bridge: k must be >= 1");
    if (spec.terminal_time <= 0.0) throw param_error("bridge: terminal time must be positive");
    if (spec.sigma_x < 0.0 || spec.sigma_y < 0.0)
        throw param_error("bridge: diffusion coefficients must be non-negative");
}

std::vector<double> time_grid(const BridgeSpec& spec) {
    std::vector<double> times(spec.k + 1);
    const double dt = spec.terminal_time / spec.k;
    for (int j = 0; j <= spec.k; ++j) times[j] = j * dt;
    times[spec.k] = spec.terminal_time;
    return times;
}

}  // namespace

Matrix sample_bridge_steps(std::span<const double> x0, std::span<const double> x1,
                           const std::vector<double>& step_sigmas, const BridgeSpec& spec,
                           Rng& rng) {
    if (x0.size() != x1.size()) throw shape_error("sample_bridge: endpoint dimensions disagree");
    check_spec(spec);
    if (static_cast<int>(step_sigmas.size()) != spec.k)
        throw param_error("sample_bridge: need one sigma per time step");

    const int k = spec.k;
    const int d = static_cast<int>(x0.size());
    const double T = spec.terminal_time;
    const double sqrt_dt = std::sqrt(T / k);

    // Accumulated noise S_j = sum_{s<j} sigma_s * sqrt(dt) * N(0,I); W_j = x0 + S_j.
    Matrix noise(k + 1, d);  // row j = S_j, row 0 stays zero
    for (int j = 0; j < k; ++j)
        for (int c = 0; c < d; ++c)
            noise(j + 1, c) = noise(j, c) + step_sigmas[j] * sqrt_dt * rng.normal();

    // BB_j = [x0 - alpha_j (x0 - x1)] + [S_j - alpha_j S_k], alpha_j = t_j / T.
    // The interpolation and noise terms are assembled separately so the
    // sigma=0 path is exactly the mixup segment.
    Matrix path(k + 1, d);
    const auto times = time_grid(spec);
    for (int j = 0; j <= k; ++j) {
        const double alpha = times[j] / T;
        for (int c = 0; c < d; ++c) {
            const double interp = x0[c] - alpha * (x0[c] - x1[c]);
            const double bridge_noise = noise(j, c) - alpha * noise(k, c);
            path(j, c) = interp + bridge_noise;
        }
    }
    // Pin endpoints to the inputs bit-exactly.
    path.set_row(0, x0);
    path.set_row(k, x1);
    return path;
}

Matrix sample_bridge(std::span<const double> x0, std::span<const double> x1, double sigma,
                     const BridgeSpec& spec, Rng& rng) {
    check_spec(spec);
    return sample_bridge_steps(x0, x1, std::vector<double>(spec.k, sigma), spec, rng);
}

std::vector<int> pairing_permutation(const Matrix& x, PairingStrategy strategy, Rng& rng) {
    const int n = x.rows;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    switch (strategy) {
        case PairingStrategy::Identity:
            break;
        case PairingStrategy::RandomShuffle:
            for (int i = n - 1; i > 0; --i)
                std::swap(perm[i], perm[rng.below(static_cast<std::size_t>(i) + 1)]);
            break;
        case PairingStrategy::EuclideanSorted: {
            // Rank rows by distance from the batch centroid and pair rank r
            // with rank n-1-r: far points bridge to near ones. An involution,
            // so every row is used exactly once as an endpoint.
            std::vector<double> centroid(x.cols, 0.0);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < x.cols; ++c) centroid[c] += x(r, c) / n;
            std::vector<int> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::vector<double> dist(n);
            for (int r = 0; r < n; ++r) dist[r] = squared_distance(x.row(r), centroid);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return dist[a] < dist[b]; });
            for (int r = 0; r < n; ++r) perm[order[r]] = order[n - 1 - r];
            break;
        }
    }
    return perm;
}

std::vector<BridgePath> sample_paired_bridges(const Matrix& x, const Matrix& y,
                                              const BridgeSpec& spec, PairingStrategy pairing,
                                              VarianceStrategy variance,
                                              const std::vector<double>* grad_norms, Rng rng) {
    if (x.rows != y.rows) throw shape_error("sample_paired_bridges: X/Y row counts disagree");
    check_spec(spec);
    const int n = x.rows;
    if (variance == VarianceStrategy::Tempering) {
        if (!grad_norms) throw param_error("sample_paired_bridges: tempering needs gradient norms");
        if (static_cast<int>(grad_norms->size()) != n)
            throw param_error("sample_paired_bridges: need one gradient norm per row");
    }

    Rng shuffle_rng = rng.fork(0);
    const auto perm = pairing_permutation(x, pairing, shuffle_rng);

    std::vector<double> g_rel;  // gradient norms over batch mean
    if (variance == VarianceStrategy::Tempering) {
        double mean = 0.0;
        for (double g : *grad_norms) mean += g / n;
        g_rel.resize(n);
        for (int i = 0; i < n; ++i) g_rel[i] = mean > 0.0 ? (*grad_norms)[i] / mean : 1.0;
    }

    const auto times = time_grid(spec);
    std::vector<BridgePath> paths;
    paths.reserve(n);
    const Rng path_base = rng.fork(1);
    for (int i = 0; i < n; ++i) {
        Rng path_rng = path_base.fork(static_cast<std::uint64_t>(i));
        BridgePath path;
        path.times = times;
        if (variance == VarianceStrategy::Tempering) {
            std::vector<double> sx(spec.k), sy(spec.k);
            for (int j = 0; j < spec.k; ++j) {
                const double a = times[j] / spec.terminal_time;
                const double factor = (1.0 - a) * g_rel[i] + a * g_rel[perm[i]];
                sx[j] = spec.sigma_x * factor;
                sy[j] = spec.sigma_y * factor;
            }
            path.xs = sample_bridge_steps(x.row(i), x.row(perm[i]), sx, spec, path_rng);
            path.ys = sample_bridge_steps(y.row(i), y.row(perm[i]), sy, spec, path_rng);
        } else {
            path.xs = sample_bridge(x.row(i), x.row(perm[i]), spec.sigma_x, spec, path_rng);
            path.ys = sample_bridge(y.row(i), y.row(perm[i]), spec.sigma_y, spec, path_rng);
        }
        paths.push_back(std::move(path));
    }
    return paths;
}

}  // namespace pcl

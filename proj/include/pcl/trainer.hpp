#pragma once

#include <functional>
#include <string>

#include "pcl/buffer.hpp"
#include "pcl/parabolic.hpp"
#include "pcl/streams.hpp"

namespace pcl {

enum class MethodKind { Pcl, Er, Sgd };
const char* method_name(MethodKind kind);

struct Method {
    MethodKind kind = MethodKind::Pcl;
    PclConfig pcl;  // used when kind == Pcl
};

struct RunConfig {
    Method method;
    StreamConfig stream;
    std::vector<int> hidden = {64, 64};
    double lr = 0.08;
    std::size_t buffer_capacity = 200;
    std::size_t buffer_batch = 32;
    BufferFilter buffer_filter = BufferFilter::None;
    int eval_every_tasks = 1;
    std::size_t lipschitz_pairs = 1000;
    std::uint64_t seed = 0;
};

/// Post-task evaluation snapshot. Buffer statistics are NaN while the buffer
/// is empty (plain SGD never fills it).
struct CheckpointStats {
    int task = 0;
    std::vector<double> per_group_acc;        // eval accuracy per seen class group
    double aa = 0.0;                          // pooled accuracy over classes seen so far
    std::vector<double> per_task_eval_loss;   // avg CE on every task's eval split
    double buffer_loss_min = 0.0;
    double buffer_loss_mean = 0.0;
    double buffer_loss_max = 0.0;
    double c_lipschitz = 0.0;                 // empirical slope over buffer-hull pairs
    std::size_t buffer_size = 0;
};

struct RunRecord {
    std::uint64_t seed = 0;
    MethodKind method = MethodKind::Pcl;
    int n_tasks = 0;
    int steps = 0;
    std::vector<CheckpointStats> checkpoints;
    double aaa = 0.0;
    double acc_final = 0.0;
    std::vector<double> loss_trace;
    long girsanov_clamped = 0;
    bool diverged = false;
    std::string diagnostic;
    double wall_seconds = 0.0;  // not part of the serialized record
    std::vector<std::vector<Sample>> buffer_snapshots;  // one per checkpoint
};

/// RNG stream layout (public so oracles can replay a run exactly):
/// trainer_root(seed).fork(kNetStream) seeds the network;
/// .fork(kStepStream).fork(step) drives the loss (buffer draw = its fork(0),
/// bridges = fork(1)); .fork(kReservoirStream).fork(step) drives insertion;
/// .fork(kLipschitzStream).fork(task) drives the Lipschitz estimate.
Rng trainer_root(std::uint64_t seed);
inline constexpr std::uint64_t kNetStream = 0;
inline constexpr std::uint64_t kStepStream = 1;
inline constexpr std::uint64_t kReservoirStream = 2;
inline constexpr std::uint64_t kLipschitzStream = 3;

using StepObserver = std::function<void(int step, const DenseNetwork& net)>;

/// Online continual training: one pass over the stream, buffer update by
/// reservoir after every step, evaluation after each task. Deterministic
/// under (config, seed). Divergence aborts with a diagnostic record instead
/// of throwing. `observer`, when given, is called after every sgd step.
RunRecord run(const RunConfig& cfg, const StepObserver* observer = nullptr);

/// Argmax-of-logits accuracy on one labelled set.
double accuracy(const DenseNetwork& net, const Matrix& x, const Matrix& y);

/// Per-class-group accuracies on the eval splits of tasks 0..upto_task.
std::vector<double> evaluate_groups(const DenseNetwork& net, const TaskStream& stream,
                                    int upto_task);

/// Mean soft cross entropy of the net on a labelled set.
double mean_loss(const DenseNetwork& net, const Matrix& x, const Matrix& y);

/// Empirical Lipschitz constant of the per-sample loss over the buffer hull:
/// max finite-difference slope across `pairs` random segment pairs.
double estimate_lipschitz(const DenseNetwork& net, const std::vector<Sample>& items,
                          std::size_t pairs, Rng rng);

}  // namespace pcl

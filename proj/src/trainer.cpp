#include "pcl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "pcl/errors.hpp"

namespace pcl {

const char* method_name(MethodKind kind) {
    switch (kind) {
        case MethodKind::Pcl: return "pcl";
        case MethodKind::Er: return "er";
        case MethodKind::Sgd: return "sgd";
    }
    return "?";
}

Rng trainer_root(std::uint64_t seed) { return Rng::seeded(seed).fork(0x7c1ULL); }

double accuracy(const DenseNetwork& net, const Matrix& x, const Matrix& y) {
    if (x.rows == 0) return 0.0;
    const Matrix logits = forward(net, x);
    int correct = 0;
    for (int r = 0; r < x.rows; ++r) {
        int pred = 0, truth = 0;
        for (int c = 1; c < logits.cols; ++c) {
            if (logits(r, c) > logits(r, pred)) pred = c;
            if (y(r, c) > y(r, truth)) truth = c;
        }
        if (pred == truth) ++correct;
    }
    return static_cast<double>(correct) / x.rows;
}

std::vector<double> evaluate_groups(const DenseNetwork& net, const TaskStream& stream,
                                    int upto_task) {
    std::vector<double> accs;
    for (int g = 0; g <= upto_task && g < static_cast<int>(stream.tasks.size()); ++g)
        accs.push_back(accuracy(net, stream.tasks[g].eval_x, stream.tasks[g].eval_y));
    return accs;
}

double mean_loss(const DenseNetwork& net, const Matrix& x, const Matrix& y) {
    if (x.rows == 0) return 0.0;
    return soft_cross_entropy(forward(net, x), y).loss;
}

double estimate_lipschitz(const DenseNetwork& net, const std::vector<Sample>& items,
                          std::size_t pairs, Rng rng) {
    if (items.size() < 2 || pairs == 0) return std::numeric_limits<double>::quiet_NaN();
    const int d = static_cast<int>(items.front().features.size());
    const int c = static_cast<int>(items.front().label.size());

    // Per pair: a random point on the segment between two buffer samples and
    // a short centered difference along the segment direction (labels
    // interpolate alongside the features). C is the max slope observed.
    Matrix x(static_cast<int>(2 * pairs), d);
    Matrix y(static_cast<int>(2 * pairs), c);
    std::vector<double> half_steps(pairs, 0.0);
    for (std::size_t p = 0; p < pairs; ++p) {
        const auto& a = items[rng.below(items.size())];
        const auto& b = items[rng.below(items.size())];
        const double lam = rng.uniform();
        const double seg = std::sqrt(squared_distance(a.features, b.features));
        const double h = 5e-3;  // relative half-step along the segment
        const double lo = std::max(0.0, lam - h);
        const double hi = std::min(1.0, lam + h);
        half_steps[p] = 0.5 * (hi - lo) * seg;
        const int r = static_cast<int>(2 * p);
        for (int j = 0; j < d; ++j) {
            x(r, j) = (1.0 - lo) * a.features[j] + lo * b.features[j];
            x(r + 1, j) = (1.0 - hi) * a.features[j] + hi * b.features[j];
        }
        for (int j = 0; j < c; ++j) {
            y(r, j) = (1.0 - lo) * a.label[j] + lo * b.label[j];
            y(r + 1, j) = (1.0 - hi) * a.label[j] + hi * b.label[j];
        }
    }
    const auto losses = per_row_cross_entropy(forward(net, x), y);
    double cmax = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
        if (half_steps[p] < 1e-12) continue;
        const int r = static_cast<int>(2 * p);
        cmax = std::max(cmax, std::abs(losses[r] - losses[r + 1]) / (2.0 * half_steps[p]));
    }
    return cmax;
}

namespace {

struct StepLoss {
    double loss;
    ParamGrads grads;
    long girsanov_clamped = 0;
};

StepLoss method_step(const RunConfig& cfg, const DenseNetwork& net, const MiniBatch& batch,
                     const ReservoirBuffer& buffer, Rng step_rng) {
    switch (cfg.method.kind) {
        case MethodKind::Sgd: {
            ForwardCache cache;
            const Matrix logits = forward(net, batch.x, &cache);
            const auto ce = soft_cross_entropy(logits, batch.y);
            if (!std::isfinite(ce.loss)) throw training_error("sgd: non-finite loss");
            auto back = backward(net, cache, ce.grad_logits);
            return {ce.loss, std::move(back.grads), 0};
        }
        case MethodKind::Er: {
            auto er = er_loss(net, batch.x, batch.y, &buffer, cfg.buffer_batch, step_rng);
            return {er.loss, std::move(er.grads), 0};
        }
        case MethodKind::Pcl: {
            PclConfig pc = cfg.method.pcl;
            pc.buffer_batch = cfg.buffer_batch;
            auto res = pcl_loss(net, batch.x, batch.y, &buffer, pc, step_rng);
            return {res.loss, std::move(res.grads), res.girsanov_clamped};
        }
    }
    throw param_error("run: unknown method");
}

}  // namespace

RunRecord run(const RunConfig& cfg, const StepObserver* observer) {
    if (cfg.lr <= 0.0) throw param_error("run: learning rate must be positive");
    const auto t_start = std::chrono::steady_clock::now();

    StreamConfig stream_cfg = cfg.stream;
    stream_cfg.seed = cfg.seed;
    const TaskStream stream = make_stream(stream_cfg);
    const int total_classes = stream.total_classes();
    const int n_tasks = static_cast<int>(stream.tasks.size());

    const Rng root = trainer_root(cfg.seed);
    Rng net_rng = root.fork(kNetStream);
    std::vector<int> sizes;
    sizes.push_back(stream.feature_dim());
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(total_classes);
    DenseNetwork net = make_mlp(sizes, net_rng);

    ReservoirBuffer buffer(cfg.buffer_capacity, cfg.buffer_filter);
    const bool uses_buffer = cfg.method.kind != MethodKind::Sgd;

    RunRecord rec;
    rec.seed = cfg.seed;
    rec.method = cfg.method.kind;
    rec.n_tasks = n_tasks;

    int step = 0;
    long stream_index = 0;
    for (int task = 0; task < n_tasks; ++task) {
        const TaskData& td = stream.tasks[task];
        for (const MiniBatch& batch : td.batches) {
            try {
                auto sl = method_step(cfg, net, batch, buffer, root.fork(kStepStream).fork(step));
                rec.loss_trace.push_back(sl.loss);
                rec.girsanov_clamped += sl.girsanov_clamped;
                sgd_step(net, sl.grads, cfg.lr);
            } catch (const training_error& e) {
                rec.diverged = true;
                rec.diagnostic = std::string(e.what()) + " at step " + std::to_string(step);
                rec.steps = step;
                return rec;
            }
            if (observer) (*observer)(step, net);

            if (uses_buffer) {
                std::vector<Sample> incoming(batch.x.rows);
                for (int r = 0; r < batch.x.rows; ++r) {
                    auto& s = incoming[static_cast<std::size_t>(r)];
                    s.features.assign(batch.x.row(r).begin(), batch.x.row(r).end());
                    s.label.assign(batch.y.row(r).begin(), batch.y.row(r).end());
                    s.task_id = task;
                    s.stream_index = stream_index + r;
                }
                std::vector<double> losses(incoming.size(), 0.0);
                if (cfg.buffer_filter != BufferFilter::None)
                    losses = per_row_cross_entropy(forward(net, batch.x), batch.y);
                Rng res_rng = root.fork(kReservoirStream).fork(step);
                buffer.filtered_insert(incoming, losses, res_rng);
            }
            stream_index += batch.x.rows;
            ++step;
        }

        if (cfg.eval_every_tasks > 0 &&
            ((task + 1) % cfg.eval_every_tasks == 0 || task + 1 == n_tasks)) {
            CheckpointStats cs;
            cs.task = task;
            cs.per_group_acc = evaluate_groups(net, stream, task);

            int pooled_rows = 0, pooled_correct = 0;
            for (int g = 0; g <= task; ++g) {
                const auto& t = stream.tasks[g];
                pooled_rows += t.eval_x.rows;
                pooled_correct += static_cast<int>(
                    std::lround(accuracy(net, t.eval_x, t.eval_y) * t.eval_x.rows));
            }
            cs.aa = pooled_rows > 0 ? static_cast<double>(pooled_correct) / pooled_rows : 0.0;

            for (const auto& t : stream.tasks)
                cs.per_task_eval_loss.push_back(mean_loss(net, t.eval_x, t.eval_y));

            cs.buffer_size = buffer.size();
            if (!buffer.empty()) {
                Matrix bx(static_cast<int>(buffer.size()), stream.feature_dim());
                Matrix by(static_cast<int>(buffer.size()), total_classes);
                for (std::size_t i = 0; i < buffer.size(); ++i) {
                    bx.set_row(static_cast<int>(i), buffer.items()[i].features);
                    by.set_row(static_cast<int>(i), buffer.items()[i].label);
                }
                const auto losses = per_row_cross_entropy(forward(net, bx), by);
                double lmin = losses[0], lmax = losses[0], lsum = 0.0;
                for (double v : losses) {
                    lmin = std::min(lmin, v);
                    lmax = std::max(lmax, v);
                    lsum += v;
                }
                cs.buffer_loss_min = lmin;
                cs.buffer_loss_mean = lsum / static_cast<double>(losses.size());
                cs.buffer_loss_max = lmax;
                cs.c_lipschitz = estimate_lipschitz(net, buffer.items(), cfg.lipschitz_pairs,
                                                    root.fork(kLipschitzStream).fork(task));
            } else {
                const double nan = std::numeric_limits<double>::quiet_NaN();
                cs.buffer_loss_min = cs.buffer_loss_mean = cs.buffer_loss_max = nan;
                cs.c_lipschitz = nan;
            }
            rec.checkpoints.push_back(std::move(cs));
            rec.buffer_snapshots.push_back(buffer.items());
        }
    }

    rec.steps = step;
    if (!rec.checkpoints.empty()) {
        double sum = 0.0;
        for (const auto& cs : rec.checkpoints) sum += cs.aa;
        rec.aaa = sum / static_cast<double>(rec.checkpoints.size());
        rec.acc_final = rec.checkpoints.back().aa;
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rec;
}

}  // namespace pcl

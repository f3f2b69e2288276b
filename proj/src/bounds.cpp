#include "pcl/bounds.hpp"

#include <cmath>

#include "pcl/errors.hpp"

namespace pcl {

namespace {

std::vector<BoundRow> compute_rows(const RunRecord& rec) {
    std::vector<BoundRow> rows;
    const int last_task = rec.n_tasks - 1;
    for (const auto& cs : rec.checkpoints) {
        BoundRow row;
        row.checkpoint = cs.task;
        row.tau = last_task - cs.task;
        row.max_buffer_loss = cs.buffer_loss_max;
        row.avg_buffer_loss = cs.buffer_loss_mean;
        row.min_buffer_loss = cs.buffer_loss_min;
        row.c_lipschitz = cs.c_lipschitz;
        row.first_task_loss = cs.per_task_eval_loss.empty() ? 0.0 : cs.per_task_eval_loss.front();
        row.last_task_loss = cs.per_task_eval_loss.empty() ? 0.0 : cs.per_task_eval_loss.back();

        row.forget_margin = row.max_buffer_loss - row.first_task_loss;
        row.forget_margin_avg = row.avg_buffer_loss - row.first_task_loss;
        row.gen_lower_margin = row.last_task_loss - row.min_buffer_loss;
        row.gen_upper_margin =
            row.c_lipschitz * row.tau + row.max_buffer_loss - row.last_task_loss;

        row.forget_pass = std::isfinite(row.forget_margin) && row.forget_margin >= 0.0;
        row.gen_lower_pass = std::isfinite(row.gen_lower_margin) && row.gen_lower_margin >= 0.0;
        row.gen_upper_pass = std::isfinite(row.gen_upper_margin) && row.gen_upper_margin >= 0.0;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

bool BoundReport::forget_all_pass() const {
    if (rows.empty()) return false;
    for (const auto& r : rows)
        if (!r.forget_pass) return false;
    return true;
}

bool BoundReport::gen_lower_all_pass() const {
    if (rows.empty()) return false;
    for (const auto& r : rows)
        if (!r.gen_lower_pass) return false;
    return true;
}

BoundReport check_forgetting(const RunRecord& rec) {
    if (rec.checkpoints.empty()) throw param_error("check_forgetting: run has no checkpoints");
    return {compute_rows(rec)};
}

BoundReport check_generalization(const RunRecord& rec) {
    if (rec.checkpoints.empty())
        throw param_error("check_generalization: run has no checkpoints");
    return {compute_rows(rec)};
}

}  // namespace pcl

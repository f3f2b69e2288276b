#pragma once

#include <vector>

#include "pcl/trainer.hpp"

namespace pcl {

/// One post-task checkpoint audited against the forgetting and
/// generalization inequalities. Margins are bound minus observed: >= 0 means
/// the inequality holds. These are diagnostics, not assertions; the trained
/// learner only approximately satisfies the PDE.
struct BoundRow {
    int checkpoint = 0;  // task index
    int tau = 0;         // task gap to the final task
    double max_buffer_loss = 0.0;
    double avg_buffer_loss = 0.0;
    double min_buffer_loss = 0.0;
    double first_task_loss = 0.0;  // avg eval loss on task 1 data
    double last_task_loss = 0.0;   // avg eval loss on the final task's data
    double c_lipschitz = 0.0;
    double forget_margin = 0.0;      // max_buffer_loss - first_task_loss
    double forget_margin_avg = 0.0;  // avg_buffer_loss - first_task_loss
    double gen_lower_margin = 0.0;   // last_task_loss - min_buffer_loss
    double gen_upper_margin = 0.0;   // C*tau + max_buffer_loss - last_task_loss
    bool forget_pass = false;
    bool gen_lower_pass = false;
    bool gen_upper_pass = false;
};

struct BoundReport {
    std::vector<BoundRow> rows;

    bool forget_all_pass() const;     // max-buffer >= task-1 loss everywhere
    bool gen_lower_all_pass() const;  // min-buffer <= last-task loss everywhere
};

/// Forgetting audit: after each task, is the average task-1 loss dominated
/// by the buffer losses (the boundary proxy)?
BoundReport check_forgetting(const RunRecord& rec);

/// Generalization audit: is the final task's loss sandwiched between the
/// minimum buffer loss and C*tau plus the maximum buffer loss?
BoundReport check_generalization(const RunRecord& rec);

}  // namespace pcl

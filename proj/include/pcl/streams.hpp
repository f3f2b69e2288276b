#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pcl/matrix.hpp"
#include "pcl/rng.hpp"

namespace pcl {

enum class StreamGenerator { GaussianBlobs, TwoMoonsSequence, CsvFile };
enum class ImbalanceOrdering { Normal, Reversed, Random };

struct StreamConfig {
    int n_tasks = 5;
    int classes_per_task = 2;
    int samples_per_class = 500;
    int feature_dim = 16;
    StreamGenerator generator = StreamGenerator::GaussianBlobs;
    std::string csv_path;  // CsvFile only
    double corruption_rate = 0.0;
    double imbalance_gamma = 1.0;  // 1 = balanced
    ImbalanceOrdering imbalance_ordering = ImbalanceOrdering::Normal;
    int batch_size = 32;
    double eval_fraction = 0.2;
    std::uint64_t seed = 0;

    int total_classes() const { return n_tasks * classes_per_task; }
};

struct MiniBatch {
    Matrix x;
    Matrix y;  // one-hot over total classes (corrupted rows keep their flipped label)
};

struct TaskData {
    int task_id = 0;
    std::vector<int> class_ids;
    std::vector<MiniBatch> batches;  // seen exactly once, in order
    Matrix eval_x;                   // held out, never streamed, labels uncorrupted
    Matrix eval_y;
    long corrupted_rows = 0;
};

struct TaskStream {
    StreamConfig config;
    std::vector<TaskData> tasks;

    int total_classes() const { return config.total_classes(); }
    int feature_dim() const { return config.feature_dim; }
};

/// Deterministic stream construction from cfg.seed. Gaussian blobs place
/// class means on a scaled circle (first two feature dimensions) with unit
/// covariance; labels are corrupted to a uniform different class with
/// probability corruption_rate; imbalance scales per-class counts by
/// gamma^(-rank/(n_classes-1)) (floored), rank order per the chosen scheme.
TaskStream make_stream(const StreamConfig& cfg);

struct CorruptionResult {
    Matrix y;
    std::vector<bool> flipped;
};

/// Row-wise label corruption: with probability `rate`, replace the one-hot
/// row by a uniformly random different class.
CorruptionResult corrupt_labels(const Matrix& y, double rate, Rng& rng);

/// Per-class sample counts under an imbalance factor, before ordering.
/// counts[rank] = floor(base * gamma^(-rank/(n_classes-1))).
std::vector<int> imbalance_counts(int base, double gamma, int n_classes);

/// JSON manifest (class counts, batch layout, config echo) for provenance.
void write_stream_manifest(const TaskStream& stream, std::ostream& out);

}  // namespace pcl

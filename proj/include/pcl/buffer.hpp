#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "pcl/matrix.hpp"
#include "pcl/rng.hpp"

namespace pcl {

/// One stored observation: features, soft label (one-hot at ingestion),
/// and provenance. Never mutated after insertion.
struct Sample {
    std::vector<double> features;
    std::vector<double> label;
    int task_id = 0;
    long stream_index = 0;
};

enum class BufferFilter { None, MaxLoss, MinLoss, MiddleLoss };

/// Fixed-capacity memory buffer with reservoir (algorithm R) insertion and
/// optional loss-based admission filters. Single writer; reads of a snapshot
/// are safe while no insertion runs.
class ReservoirBuffer {
public:
    explicit ReservoirBuffer(std::size_t capacity, BufferFilter filter = BufferFilter::None);

    /// Classic reservoir step: append while below capacity, otherwise replace
    /// a uniform slot with probability capacity / n_seen.
    void maybe_insert(const Sample& sample, Rng& rng);

    /// Applies the admission filter to an incoming batch, then offers the
    /// surviving rows to the reservoir. MaxLoss/MinLoss keep the single
    /// argmax/argmin row; MiddleLoss keeps rows whose loss rank falls in the
    /// batch interquartile range. Empty batch is a no-op.
    void filtered_insert(const std::vector<Sample>& batch, const std::vector<double>& losses,
                         Rng& rng);

    /// m uniform draws: with replacement when m > size, without otherwise.
    /// Throws param_error on an empty buffer (callers skip concatenation).
    std::pair<Matrix, Matrix> sample_batch(std::size_t m, Rng& rng) const;

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }
    long attempts() const { return n_seen_; }
    BufferFilter filter() const { return filter_; }
    const std::vector<Sample>& items() const { return items_; }

    /// JSON-lines snapshot, one sample per line.
    void write_snapshot(std::ostream& out) const;

private:
    std::size_t capacity_;
    BufferFilter filter_;
    std::vector<Sample> items_;
    long n_seen_ = 0;
};

/// Indices an admission filter keeps for a batch with the given losses.
std::vector<std::size_t> filter_selection(BufferFilter filter, const std::vector<double>& losses);

/// JSON-lines serialization of any sample list (buffer snapshots).
void write_samples_jsonl(const std::vector<Sample>& samples, std::ostream& out);

}  // namespace pcl

#include "pcl/buffer.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "pcl/errors.hpp"

namespace pcl {

ReservoirBuffer::ReservoirBuffer(std::size_t capacity, BufferFilter filter)
    : capacity_(capacity), filter_(filter) {
    if (capacity == 0) throw param_error("ReservoirBuffer: capacity must be positive");
}

void ReservoirBuffer::maybe_insert(const Sample& sample, Rng& rng) {
    if (!items_.empty() &&
        (sample.features.size() != items_.front().features.size() ||
         sample.label.size() != items_.front().label.size()))
        throw shape_error("maybe_insert: sample dimensions do not match buffer");
    ++n_seen_;
    if (items_.size() < capacity_) {
        items_.push_back(sample);
        return;
    }
    const std::size_t slot = rng.below(static_cast<std::size_t>(n_seen_));
    if (slot < capacity_) items_[slot] = sample;
}

std::vector<std::size_t> filter_selection(BufferFilter filter, const std::vector<double>& losses) {
    const std::size_t n = losses.size();
    if (n == 0) return {};
    switch (filter) {
        case BufferFilter::None: {
            std::vector<std::size_t> all(n);
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        case BufferFilter::MaxLoss:
            return {static_cast<std::size_t>(
                std::max_element(losses.begin(), losses.end()) - losses.begin())};
        case BufferFilter::MinLoss:
            return {static_cast<std::size_t>(
                std::min_element(losses.begin(), losses.end()) - losses.begin())};
        case BufferFilter::MiddleLoss: {
            // Rank-based IQR: keep loss ranks r with n/4 <= r < n - n/4.
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
            const std::size_t q = n / 4;
            std::vector<std::size_t> kept(order.begin() + q, order.begin() + (n - q));
            std::sort(kept.begin(), kept.end());  // offer in batch order
            return kept;
        }
    }
    return {};
}

void ReservoirBuffer::filtered_insert(const std::vector<Sample>& batch,
                                      const std::vector<double>& losses, Rng& rng) {
    if (batch.empty()) return;
    if (batch.size() != losses.size())
        throw shape_error("filtered_insert: loss count does not match batch");
    for (std::size_t idx : filter_selection(filter_, losses)) maybe_insert(batch[idx], rng);
}

std::pair<Matrix, Matrix> ReservoirBuffer::sample_batch(std::size_t m, Rng& rng) const {
    if (items_.empty()) throw param_error("sample_batch: buffer is empty");
    if (m == 0) return {Matrix{}, Matrix{}};
    std::vector<std::size_t> picks(m);
    if (m > items_.size()) {
        for (auto& p : picks) p = rng.below(items_.size());
    } else {
        std::vector<std::size_t> idx(items_.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < m; ++i) {
            std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
            picks[i] = idx[i];
        }
    }
    const int d = static_cast<int>(items_.front().features.size());
    const int c = static_cast<int>(items_.front().label.size());
    Matrix x(static_cast<int>(m), d);
    Matrix y(static_cast<int>(m), c);
    for (std::size_t i = 0; i < m; ++i) {
        x.set_row(static_cast<int>(i), items_[picks[i]].features);
        y.set_row(static_cast<int>(i), items_[picks[i]].label);
    }
    return {std::move(x), std::move(y)};
}

void write_samples_jsonl(const std::vector<Sample>& samples, std::ostream& out) {
    for (const auto& s : samples) {
        nlohmann::json line;
        line["features"] = s.features;
        line["label"] = s.label;
        line["task_id"] = s.task_id;
        line["stream_index"] = s.stream_index;
        out << line.dump() << '\n';
    }
}

void ReservoirBuffer::write_snapshot(std::ostream& out) const { write_samples_jsonl(items_, out); }

}  // namespace pcl

#include "pcl/streams.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pcl/errors.hpp"

namespace pcl {

namespace {

constexpr double kBlobRadius = 3.5;
constexpr double kMoonScale = 2.0;
constexpr double kMoonNoise = 0.2;

void check_config(const StreamConfig& cfg) {
    if (cfg.n_tasks < 1 || cfg.classes_per_task < 1)
        throw param_error("stream: tasks and classes per task must be positive");
    if (cfg.feature_dim < 1) throw param_error("stream: feature_dim must be positive");
    if (cfg.samples_per_class < 2) throw param_error("stream: need at least 2 samples per class");
    if (cfg.corruption_rate < 0.0 || cfg.corruption_rate >= 1.0)
        throw param_error("stream: corruption_rate must lie in [0,1)");
    if (cfg.imbalance_gamma < 1.0) throw param_error("stream: imbalance gamma must be >= 1");
    if (cfg.batch_size < 1) throw param_error("stream: batch_size must be positive");
    if (cfg.eval_fraction <= 0.0 || cfg.eval_fraction >= 1.0)
        throw param_error("stream: eval_fraction must lie in (0,1)");
    if (cfg.generator == StreamGenerator::TwoMoonsSequence && cfg.classes_per_task != 2)
        throw param_error("stream: two-moons tasks have exactly 2 classes");
    if (cfg.generator == StreamGenerator::CsvFile && cfg.csv_path.empty())
        throw param_error("stream: csv generator needs csv_path");
}

std::vector<std::vector<double>> blob_points(const StreamConfig& cfg, int class_id, int count,
                                             Rng rng) {
    const int C = cfg.total_classes();
    const double angle = 2.0 * M_PI * class_id / C;
    std::vector<double> mean(cfg.feature_dim, 0.0);
    mean[0] = kBlobRadius * std::cos(angle);
    if (cfg.feature_dim > 1) mean[1] = kBlobRadius * std::sin(angle);
    std::vector<std::vector<double>> pts(count, std::vector<double>(cfg.feature_dim));
    for (auto& p : pts)
        for (int j = 0; j < cfg.feature_dim; ++j) p[j] = mean[j] + rng.normal();
    return pts;
}

std::vector<std::vector<double>> moon_points(const StreamConfig& cfg, int class_id, int count,
                                             Rng rng) {
    const int task = class_id / 2;
    const bool upper = (class_id % 2) == 0;
    const double x_shift = 3.0 * kMoonScale * task;
    std::vector<std::vector<double>> pts(count, std::vector<double>(cfg.feature_dim));
    for (auto& p : pts) {
        const double t = M_PI * rng.uniform();
        double px, py;
        if (upper) {
            px = kMoonScale * std::cos(t);
            py = kMoonScale * std::sin(t);
        } else {
            px = kMoonScale * (1.0 - std::cos(t));
            py = kMoonScale * (0.5 - std::sin(t));
        }
        p[0] = x_shift + px + kMoonNoise * rng.normal();
        if (cfg.feature_dim > 1) p[1] = py + kMoonNoise * rng.normal();
        for (int j = 2; j < cfg.feature_dim; ++j) p[j] = kMoonNoise * rng.normal();
    }
    return pts;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

/// Reads the CSV dataset into per-class point lists. Header must be
/// f0,...,f{d-1},label. Updates cfg.feature_dim from the file.
std::vector<std::vector<std::vector<double>>> read_csv_classes(StreamConfig& cfg) {
    std::ifstream in(cfg.csv_path);
    if (!in) throw io_error("cannot open dataset: " + cfg.csv_path);
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw io_error("empty dataset: " + cfg.csv_path, 1);
    ++line_no;
    auto header = split_csv_line(line);
    if (header.size() < 2 || header.back() != "label")
        throw io_error("header must be f0,...,f{d-1},label", line_no);
    const int d = static_cast<int>(header.size()) - 1;
    for (int j = 0; j < d; ++j)
        if (header[j] != "f" + std::to_string(j))
            throw io_error("unexpected header column '" + header[j] + "'", line_no);

    const int C = cfg.total_classes();
    std::vector<std::vector<std::vector<double>>> per_class(C);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != d + 1)
            throw io_error("expected " + std::to_string(d + 1) + " fields", line_no);
        std::vector<double> point(d);
        for (int j = 0; j <= d; ++j) {
            char* end = nullptr;
            const double v = std::strtod(fields[j].c_str(), &end);
            if (end == fields[j].c_str() || *end != '\0')
                throw io_error("cannot parse numeric field '" + fields[j] + "'", line_no);
            if (j < d) {
                point[j] = v;
            } else {
                const int label = static_cast<int>(v);
                if (label < 0 || label >= C || v != label)
                    throw io_error("label out of range [0," + std::to_string(C - 1) + "]",
                                   line_no);
                per_class[label].push_back(point);
            }
        }
    }
    for (int c = 0; c < C; ++c)
        if (per_class[c].size() < 2)
            throw io_error("class " + std::to_string(c) + " has fewer than 2 samples");
    cfg.feature_dim = d;
    return per_class;
}

}  // namespace

std::vector<int> imbalance_counts(int base, double gamma, int n_classes) {
    std::vector<int> counts(n_classes, base);
    if (n_classes <= 1 || gamma == 1.0) return counts;
    for (int r = 0; r < n_classes; ++r) {
        const double scale = std::pow(gamma, -static_cast<double>(r) / (n_classes - 1));
        counts[r] = static_cast<int>(std::floor(base * scale + 1e-9));
    }
    return counts;
}

CorruptionResult corrupt_labels(const Matrix& y, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0) throw param_error("corrupt_labels: rate outside [0,1]");
    CorruptionResult out;
    out.y = y;
    out.flipped.assign(static_cast<std::size_t>(y.rows), false);
    const int C = y.cols;
    for (int r = 0; r < y.rows; ++r) {
        if (rng.uniform() >= rate) continue;
        int true_class = 0;
        for (int c = 1; c < C; ++c)
            if (y(r, c) > y(r, true_class)) true_class = c;
        int flip = static_cast<int>(rng.below(static_cast<std::size_t>(C - 1)));
        if (flip >= true_class) ++flip;
        for (int c = 0; c < C; ++c) out.y(r, c) = (c == flip) ? 1.0 : 0.0;
        out.flipped[static_cast<std::size_t>(r)] = true;
    }
    return out;
}

TaskStream make_stream(const StreamConfig& cfg_in) {
    StreamConfig cfg = cfg_in;
    check_config(cfg);
    const Rng root = Rng::seeded(cfg.seed);
    const int C = cfg.total_classes();

    // Per-class sample counts: imbalance ladder ordered per scheme.
    std::vector<int> counts(C, cfg.samples_per_class);
    if (cfg.imbalance_gamma != 1.0) {
        const auto ladder = imbalance_counts(cfg.samples_per_class, cfg.imbalance_gamma, C);
        std::vector<int> rank_of_class(C);
        std::iota(rank_of_class.begin(), rank_of_class.end(), 0);
        switch (cfg.imbalance_ordering) {
            case ImbalanceOrdering::Normal:
                break;
            case ImbalanceOrdering::Reversed:
                std::reverse(rank_of_class.begin(), rank_of_class.end());
                break;
            case ImbalanceOrdering::Random: {
                Rng r = root.fork(0);
                for (int i = C - 1; i > 0; --i)
                    std::swap(rank_of_class[i], rank_of_class[r.below(static_cast<std::size_t>(i) + 1)]);
                break;
            }
        }
        for (int c = 0; c < C; ++c) counts[c] = ladder[rank_of_class[c]];
    }

    // Raw per-class points.
    std::vector<std::vector<std::vector<double>>> per_class(C);
    if (cfg.generator == StreamGenerator::CsvFile) {
        per_class = read_csv_classes(cfg);
        for (int c = 0; c < C; ++c) counts[c] = static_cast<int>(per_class[c].size());
    } else {
        const Rng gen = root.fork(1);
        for (int c = 0; c < C; ++c) {
            per_class[c] = cfg.generator == StreamGenerator::GaussianBlobs
                               ? blob_points(cfg, c, counts[c], gen.fork(c))
                               : moon_points(cfg, c, counts[c], gen.fork(c));
        }
    }

    TaskStream stream;
    stream.config = cfg;
    long stream_index = 0;
    for (int task = 0; task < cfg.n_tasks; ++task) {
        TaskData td;
        td.task_id = task;
        for (int j = 0; j < cfg.classes_per_task; ++j)
            td.class_ids.push_back(task * cfg.classes_per_task + j);

        // Split each class 80/20 (generation order is already random).
        std::vector<std::pair<int, int>> train_rows;  // (class, index)
        std::vector<std::pair<int, int>> eval_rows;
        for (int cid : td.class_ids) {
            const int n = counts[cid];
            const int n_eval = std::max(1, static_cast<int>(std::lround(n * cfg.eval_fraction)));
            const int n_train = n - n_eval;
            if (n_train < 1) throw param_error("stream: eval fraction leaves no training data");
            for (int i = 0; i < n_train; ++i) train_rows.emplace_back(cid, i);
            for (int i = n_train; i < n; ++i) eval_rows.emplace_back(cid, i);
        }

        // One-epoch order: a single seeded shuffle, then consecutive batches.
        Rng shuffle = root.fork(2).fork(task);
        for (std::size_t i = train_rows.size(); i > 1; --i)
            std::swap(train_rows[i - 1], train_rows[shuffle.below(i)]);

        Matrix train_x(static_cast<int>(train_rows.size()), cfg.feature_dim);
        Matrix train_y(static_cast<int>(train_rows.size()), C);
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            train_x.set_row(static_cast<int>(i), per_class[train_rows[i].first][train_rows[i].second]);
            train_y(static_cast<int>(i), train_rows[i].first) = 1.0;
        }
        Rng corrupt_rng = root.fork(3).fork(task);
        auto corrupted = corrupt_labels(train_y, cfg.corruption_rate, corrupt_rng);
        td.corrupted_rows =
            std::count(corrupted.flipped.begin(), corrupted.flipped.end(), true);

        for (int start = 0; start < train_x.rows; start += cfg.batch_size) {
            const int rows = std::min(cfg.batch_size, train_x.rows - start);
            MiniBatch mb;
            mb.x = Matrix(rows, cfg.feature_dim);
            mb.y = Matrix(rows, C);
            for (int r = 0; r < rows; ++r) {
                mb.x.set_row(r, train_x.row(start + r));
                mb.y.set_row(r, corrupted.y.row(start + r));
            }
            td.batches.push_back(std::move(mb));
            stream_index += rows;
        }

        td.eval_x = Matrix(static_cast<int>(eval_rows.size()), cfg.feature_dim);
        td.eval_y = Matrix(static_cast<int>(eval_rows.size()), C);
        for (std::size_t i = 0; i < eval_rows.size(); ++i) {
            td.eval_x.set_row(static_cast<int>(i), per_class[eval_rows[i].first][eval_rows[i].second]);
            td.eval_y(static_cast<int>(i), eval_rows[i].first) = 1.0;
        }
        stream.tasks.push_back(std::move(td));
    }
    return stream;
}

void write_stream_manifest(const TaskStream& stream, std::ostream& out) {
    nlohmann::json m;
    m["schema_version"] = 1;
    const auto& cfg = stream.config;
    m["generator"] = cfg.generator == StreamGenerator::GaussianBlobs ? "gaussian_blobs"
                     : cfg.generator == StreamGenerator::TwoMoonsSequence ? "two_moons_sequence"
                                                                          : "csv_file";
    m["n_tasks"] = cfg.n_tasks;
    m["classes_per_task"] = cfg.classes_per_task;
    m["feature_dim"] = cfg.feature_dim;
    m["batch_size"] = cfg.batch_size;
    m["corruption_rate"] = cfg.corruption_rate;
    m["imbalance_gamma"] = cfg.imbalance_gamma;
    m["seed"] = cfg.seed;
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : stream.tasks) {
        nlohmann::json tj;
        tj["task_id"] = t.task_id;
        tj["class_ids"] = t.class_ids;
        tj["n_batches"] = t.batches.size();
        long train_rows = 0;
        for (const auto& b : t.batches) train_rows += b.x.rows;
        tj["train_rows"] = train_rows;
        tj["eval_rows"] = t.eval_x.rows;
        tj["corrupted_rows"] = t.corrupted_rows;
        tasks.push_back(std::move(tj));
    }
    m["tasks"] = std::move(tasks);
    out << m.dump(2) << '\n';
}

}  // namespace pcl

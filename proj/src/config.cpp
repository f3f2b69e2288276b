#include "pcl/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pcl/errors.hpp"

namespace pcl {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

struct Entry {
    std::string value;
    long line = 0;
};

/// section.key -> value, with line numbers for error reporting.
std::map<std::string, Entry> tokenize(const std::string& text) {
    std::map<std::string, Entry> kv;
    std::istringstream in(text);
    std::string line;
    std::string section;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw io_error("unterminated section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw io_error("empty section name", line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw io_error("expected key = value", line_no);
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw io_error("empty key", line_no);
        if (section.empty()) throw io_error("key before any [section]", line_no);
        const std::string full = section + "." + key;
        if (kv.count(full)) throw io_error("duplicate key '" + full + "'", line_no);
        kv[full] = {trim(line.substr(eq + 1)), line_no};
    }
    return kv;
}

double parse_double(const Entry& e, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end == e.value.c_str() || *end != '\0')
        throw io_error("key '" + key + "': expected a number, got '" + e.value + "'", e.line);
    return v;
}

long parse_int(const Entry& e, const std::string& key) {
    const double v = parse_double(e, key);
    const long i = static_cast<long>(v);
    if (v != static_cast<double>(i))
        throw io_error("key '" + key + "': expected an integer, got '" + e.value + "'", e.line);
    return i;
}

bool parse_bool(const Entry& e, const std::string& key) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw io_error("key '" + key + "': expected true/false, got '" + e.value + "'", e.line);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string field;
    while (std::getline(ss, field, ',')) {
        field = trim(field);
        if (!field.empty()) out.push_back(field);
    }
    return out;
}

/// Tracks which keys were consumed so unknown ones can be rejected.
class Reader {
public:
    explicit Reader(std::map<std::string, Entry> kv) : kv_(std::move(kv)) {}

    bool has(const std::string& key) {
        const bool present = kv_.count(key) > 0;
        if (present) seen_.push_back(key);
        return present;
    }
    const Entry& at(const std::string& key) { return kv_.at(key); }

    double number(const std::string& key, double fallback) {
        return has(key) ? parse_double(at(key), key) : fallback;
    }
    long integer(const std::string& key, long fallback) {
        return has(key) ? parse_int(at(key), key) : fallback;
    }
    bool boolean(const std::string& key, bool fallback) {
        return has(key) ? parse_bool(at(key), key) : fallback;
    }
    std::string text(const std::string& key, std::string fallback) {
        return has(key) ? at(key).value : fallback;
    }

    void reject_unknown() const {
        for (const auto& [key, entry] : kv_) {
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                throw io_error("unknown key '" + key + "'", entry.line);
        }
    }

private:
    std::map<std::string, Entry> kv_;
    std::vector<std::string> seen_;
};

MethodKind parse_method(Reader& r) {
    const std::string m = r.text("run.method", "pcl");
    if (m == "pcl") return MethodKind::Pcl;
    if (m == "er") return MethodKind::Er;
    if (m == "sgd") return MethodKind::Sgd;
    throw io_error("run.method must be pcl, er or sgd (got '" + m + "')",
                   r.has("run.method") ? r.at("run.method").line : 0);
}

template <typename T>
T parse_choice(Reader& r, const std::string& key, const std::string& fallback,
               const std::vector<std::pair<std::string, T>>& choices) {
    const std::string v = r.text(key, fallback);
    for (const auto& [name, value] : choices)
        if (v == name) return value;
    std::string expect;
    for (const auto& [name, value] : choices) expect += (expect.empty() ? "" : ", ") + name;
    throw io_error("key '" + key + "' must be one of {" + expect + "}, got '" + v + "'",
                   r.has(key) ? r.at(key).line : 0);
}

}  // namespace

const std::vector<std::string>& known_strategies() {
    static const std::vector<std::string> names = {
        "default", "one_bb", "tempering", "eu_endpoints", "max_loss", "min_loss", "middle_loss"};
    return names;
}

RunConfig apply_strategy(const RunConfig& base, const std::string& name) {
    RunConfig cfg = base;
    if (name == "default") return cfg;
    if (name == "one_bb") {
        cfg.method.pcl.bridges_per_pair = 1;
        return cfg;
    }
    if (name == "tempering") {
        cfg.method.pcl.variance = VarianceStrategy::Tempering;
        return cfg;
    }
    if (name == "eu_endpoints") {
        cfg.method.pcl.pairing = PairingStrategy::EuclideanSorted;
        return cfg;
    }
    if (name == "max_loss") {
        cfg.buffer_filter = BufferFilter::MaxLoss;
        return cfg;
    }
    if (name == "min_loss") {
        cfg.buffer_filter = BufferFilter::MinLoss;
        return cfg;
    }
    if (name == "middle_loss") {
        cfg.buffer_filter = BufferFilter::MiddleLoss;
        return cfg;
    }
    throw param_error("unknown ablation strategy '" + name + "'");
}

Experiment parse_experiment(const std::string& text, const std::string& base_dir,
                            const std::vector<std::string>& overrides) {
    auto kv = tokenize(text);
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || ov.find('.') == std::string::npos || eq < ov.find('.'))
            throw param_error("override must look like section.key=value: '" + ov + "'");
        kv[trim(ov.substr(0, eq))] = {trim(ov.substr(eq + 1)), 0};
    }
    Reader r(std::move(kv));

    Experiment exp;
    exp.config_text = text;
    exp.base.method.kind = parse_method(r);

    if (r.has("run.seeds")) {
        exp.seeds.clear();
        for (const auto& s : split_list(r.at("run.seeds").value)) {
            try {
                exp.seeds.push_back(std::stoull(s));
            } catch (const std::exception&) {
                throw io_error("run.seeds: bad seed '" + s + "'", r.at("run.seeds").line);
            }
        }
        if (exp.seeds.empty()) throw io_error("run.seeds: empty list", r.at("run.seeds").line);
    }
    exp.base.lr = r.number("run.lr", exp.base.lr);
    if (r.has("run.hidden")) {
        exp.base.hidden.clear();
        for (const auto& s : split_list(r.at("run.hidden").value))
            exp.base.hidden.push_back(static_cast<int>(parse_int({s, r.at("run.hidden").line},
                                                                 "run.hidden")));
    }
    exp.base.buffer_capacity = static_cast<std::size_t>(
        r.integer("run.buffer_capacity", static_cast<long>(exp.base.buffer_capacity)));
    exp.base.buffer_batch = static_cast<std::size_t>(
        r.integer("run.buffer_batch", static_cast<long>(exp.base.buffer_batch)));
    exp.base.buffer_filter = parse_choice<BufferFilter>(
        r, "run.buffer_filter", "none",
        {{"none", BufferFilter::None},
         {"max_loss", BufferFilter::MaxLoss},
         {"min_loss", BufferFilter::MinLoss},
         {"middle_loss", BufferFilter::MiddleLoss}});
    exp.base.eval_every_tasks =
        static_cast<int>(r.integer("run.eval_every_tasks", exp.base.eval_every_tasks));
    exp.base.lipschitz_pairs = static_cast<std::size_t>(
        r.integer("run.lipschitz_pairs", static_cast<long>(exp.base.lipschitz_pairs)));

    StreamConfig& sc = exp.base.stream;
    sc.generator = parse_choice<StreamGenerator>(
        r, "stream.generator", "gaussian_blobs",
        {{"gaussian_blobs", StreamGenerator::GaussianBlobs},
         {"two_moons_sequence", StreamGenerator::TwoMoonsSequence},
         {"csv_file", StreamGenerator::CsvFile}});
    sc.n_tasks = static_cast<int>(r.integer("stream.n_tasks", sc.n_tasks));
    sc.classes_per_task =
        static_cast<int>(r.integer("stream.classes_per_task", sc.classes_per_task));
    sc.samples_per_class =
        static_cast<int>(r.integer("stream.samples_per_class", sc.samples_per_class));
    sc.feature_dim = static_cast<int>(r.integer("stream.feature_dim", sc.feature_dim));
    sc.csv_path = r.text("stream.csv_path", sc.csv_path);
    if (!sc.csv_path.empty() && !base_dir.empty())
        sc.csv_path = (std::filesystem::path(base_dir) / sc.csv_path).string();
    sc.corruption_rate = r.number("stream.corruption_rate", sc.corruption_rate);
    sc.imbalance_gamma = r.number("stream.imbalance_gamma", sc.imbalance_gamma);
    sc.imbalance_ordering = parse_choice<ImbalanceOrdering>(
        r, "stream.imbalance_ordering", "normal",
        {{"normal", ImbalanceOrdering::Normal},
         {"reversed", ImbalanceOrdering::Reversed},
         {"random", ImbalanceOrdering::Random}});
    sc.batch_size = static_cast<int>(r.integer("stream.batch_size", sc.batch_size));
    sc.eval_fraction = r.number("stream.eval_fraction", sc.eval_fraction);

    PclConfig& pc = exp.base.method.pcl;
    pc.bridge.k = static_cast<int>(r.integer("bridge.k", pc.bridge.k));
    pc.bridge.sigma_x = r.number("bridge.sigma_x", pc.bridge.sigma_x);
    pc.bridge.sigma_y = r.number("bridge.sigma_y", pc.bridge.sigma_y);
    pc.bridge.terminal_time = r.number("bridge.terminal_time", pc.bridge.terminal_time);
    pc.pairing = parse_choice<PairingStrategy>(
        r, "bridge.pairing", "random_shuffle",
        {{"random_shuffle", PairingStrategy::RandomShuffle},
         {"euclidean_sorted", PairingStrategy::EuclideanSorted},
         {"identity", PairingStrategy::Identity}});
    pc.variance = parse_choice<VarianceStrategy>(
        r, "bridge.variance", "constant",
        {{"constant", VarianceStrategy::Constant},
         {"tempering", VarianceStrategy::Tempering}});
    pc.include_endpoints = r.boolean("bridge.include_endpoints", pc.include_endpoints);
    pc.bridges_per_pair =
        static_cast<int>(r.integer("bridge.bridges_per_pair", pc.bridges_per_pair));

    pc.drift.kind = parse_choice<DriftDescriptor::Kind>(
        r, "drift.kind", "none",
        {{"none", DriftDescriptor::Kind::None},
         {"gaussian_prior", DriftDescriptor::Kind::GaussianPrior}});
    if (r.has("drift.center")) {
        pc.drift.center.clear();
        for (const auto& s : split_list(r.at("drift.center").value))
            pc.drift.center.push_back(parse_double({s, r.at("drift.center").line}, "drift.center"));
    }
    pc.drift.scale = r.number("drift.scale", pc.drift.scale);
    if (pc.drift.kind != DriftDescriptor::Kind::None &&
        pc.drift.center.size() == 1 && sc.feature_dim > 1) {
        pc.drift.center.assign(static_cast<std::size_t>(sc.feature_dim), pc.drift.center[0]);
    }

    exp.out_dir = r.text("output.dir", exp.out_dir);
    if (!base_dir.empty() && !std::filesystem::path(exp.out_dir).is_absolute())
        exp.out_dir = (std::filesystem::path(base_dir) / exp.out_dir).string();

    if (r.has("ablate.strategies")) {
        exp.ablate_strategies = split_list(r.at("ablate.strategies").value);
        for (const auto& s : exp.ablate_strategies) {
            const auto& known = known_strategies();
            if (std::find(known.begin(), known.end(), s) == known.end())
                throw io_error("unknown ablation strategy '" + s + "'",
                               r.at("ablate.strategies").line);
        }
    }

    r.reject_unknown();
    return exp;
}

Experiment load_experiment(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment(buf.str(), std::filesystem::path(path).parent_path().string(),
                            overrides);
}

}  // namespace pcl

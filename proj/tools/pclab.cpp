// pclab: experiment driver for the parabolic continual learner.
// Subcommands: run, ablate, verify-pde, check-bounds, aggregate.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "pcl/bounds.hpp"
#include "pcl/config.hpp"
#include "pcl/errors.hpp"
#include "pcl/fkpde.hpp"
#include "pcl/results.hpp"

namespace fs = std::filesystem;
using namespace pcl;

namespace {

std::size_t worker_count() {
    if (const char* env = std::getenv("PCL_WORKERS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return std::clamp<std::size_t>(hw == 0 ? 1 : hw, 1, 8);
}

/// Runs one config over every seed on a bounded worker pool. Results come
/// back ordered by seed-list position.
std::vector<RunRecord> run_seeds(const RunConfig& base, const std::vector<std::uint64_t>& seeds) {
    std::vector<RunRecord> records(seeds.size());
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(worker_count(), seeds.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1)) {
                RunConfig cfg = base;
                cfg.seed = seeds[i];
                records[i] = run(cfg);
            }
        });
    }
    for (auto& t : pool) t.join();
    return records;
}

void write_bundle_for_run(const fs::path& dir, const RunRecord& rec, const StreamConfig& stream,
                          const std::string& strategy, const std::string& file_tag) {
    nlohmann::json j = run_record_to_json(rec, strategy);
    write_text_atomic((dir / ("run_" + file_tag + ".json")).string(), j.dump(2) + "\n");

    StreamConfig sc = stream;
    sc.seed = rec.seed;
    std::ostringstream manifest;
    write_stream_manifest(make_stream(sc), manifest);
    write_text_atomic((dir / ("manifest_" + file_tag + ".json")).string(), manifest.str());

    for (std::size_t i = 0; i < rec.buffer_snapshots.size(); ++i) {
        const int task = rec.checkpoints[i].task;
        std::ostringstream snap;
        write_samples_jsonl(rec.buffer_snapshots[i], snap);
        write_text_atomic((dir / ("bufsnap_seed" + std::to_string(rec.seed) + "_task" +
                                  std::to_string(task) + ".jsonl"))
                              .string(),
                          snap.str());
    }
}

std::string timings_csv(const std::vector<RunRecord>& records) {
    std::string out = "seed,method,wall_seconds\n";
    for (const auto& r : records)
        out += std::to_string(r.seed) + "," + method_name(r.method) + "," +
               format_double(r.wall_seconds) + "\n";
    return out;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides) {
    const Experiment exp = load_experiment(config_path, overrides);
    const fs::path dir(exp.out_dir);
    fs::create_directories(dir);
    write_text_atomic((dir / "config.txt").string(), exp.config_text);

    const auto records = run_seeds(exp.base, exp.seeds);
    std::string flat = flat_csv_header();
    bool any_diverged = false;
    for (const auto& rec : records) {
        write_bundle_for_run(dir, rec, exp.base.stream, "default",
                             "seed" + std::to_string(rec.seed));
        flat += flat_csv_rows(rec);
        if (rec.diverged) {
            any_diverged = true;
            std::cerr << "seed " << rec.seed << " diverged: " << rec.diagnostic << "\n";
        }
    }
    write_text_atomic((dir / "runs.csv").string(), flat);
    write_text_atomic((dir / "timings.csv").string(), timings_csv(records));
    if (!any_diverged) {
        write_text_atomic((dir / "aggregate.csv").string(),
                          aggregate_csv({aggregate_records(records, "default")}));
    }
    for (const auto& rec : records)
        std::cout << "seed " << rec.seed << ": acc_final=" << rec.acc_final
                  << " aaa=" << rec.aaa << (rec.diverged ? " DIVERGED" : "") << "\n";
    return any_diverged ? 2 : 0;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides) {
    Experiment exp = load_experiment(config_path, overrides);
    if (exp.ablate_strategies.empty()) exp.ablate_strategies = known_strategies();
    const fs::path dir(exp.out_dir);
    fs::create_directories(dir);
    write_text_atomic((dir / "config.txt").string(), exp.config_text);

    std::vector<AggregateRow> rows;
    bool any_diverged = false;
    for (const auto& strategy : exp.ablate_strategies) {
        const RunConfig cfg = apply_strategy(exp.base, strategy);
        const auto records = run_seeds(cfg, exp.seeds);
        for (const auto& rec : records) {
            write_bundle_for_run(dir, rec, cfg.stream, strategy,
                                 strategy + "_seed" + std::to_string(rec.seed));
            any_diverged = any_diverged || rec.diverged;
        }
        rows.push_back(aggregate_records(records, strategy));
        std::cout << strategy << ": acc " << rows.back().acc_mean << " +- "
                  << rows.back().acc_sd << ", aaa " << rows.back().aaa_mean << " +- "
                  << rows.back().aaa_sd << "\n";
    }
    write_text_atomic((dir / "aggregate.csv").string(), aggregate_csv(rows));
    return any_diverged ? 2 : 0;
}

int cmd_verify_pde(const std::string& out_path, std::size_t n_paths, double dt,
                   std::uint64_t seed) {
    std::string csv = "problem_id,x0,t,fd_value,fk_value,stderr,abs_diff,tolerance,status\n";
    bool any_fail = false;
    for (const auto& problem : builtin_pde_suite()) {
        const auto row = run_pde_check(problem, n_paths, dt, seed);
        csv += row.problem_id + "," + format_double(row.x0) + "," + format_double(row.t) + "," +
               format_double(row.fd_value) + "," + format_double(row.fk_value) + "," +
               format_double(row.std_error) + "," + format_double(row.abs_diff) + "," +
               format_double(row.tolerance) + "," + PdeCheckRow::status_name(row.status) + "\n";
        std::cout << row.problem_id << ": fd=" << row.fd_value << " fk=" << row.fk_value
                  << " (se " << row.std_error << ") -> " << PdeCheckRow::status_name(row.status)
                  << "\n";
        if (row.status == PdeCheckRow::Status::Fail) any_fail = true;
    }
    if (!out_path.empty()) write_text_atomic(out_path, csv);
    return any_fail ? 1 : 0;
}

int cmd_check_bounds(const std::vector<std::string>& run_paths, const std::string& out_path) {
    std::string csv = bound_report_csv_header();
    bool all_hold = true;
    for (const auto& path : run_paths) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open run record: " + path);
        nlohmann::json j;
        in >> j;
        const RunRecord rec = run_record_from_json(j);

        // Cross-check snapshot files when they sit next to the record.
        const fs::path dir = fs::path(path).parent_path();
        const auto& files = j.at("buffer_snapshot_files");
        for (std::size_t i = 0; i < files.size() && i < rec.checkpoints.size(); ++i) {
            const fs::path snap = dir / files[i].get<std::string>();
            if (!fs::exists(snap)) continue;
            std::ifstream sin(snap);
            std::size_t lines = 0;
            std::string line;
            while (std::getline(sin, line))
                if (!line.empty()) ++lines;
            if (lines != rec.checkpoints[i].buffer_size)
                throw io_error("snapshot " + snap.string() + " has " + std::to_string(lines) +
                               " rows, record says " +
                               std::to_string(rec.checkpoints[i].buffer_size));
        }

        const BoundReport forget = check_forgetting(rec);
        const BoundReport gen = check_generalization(rec);
        csv += bound_report_csv_rows(rec.seed, forget);
        const bool hold = forget.forget_all_pass() && gen.gen_lower_all_pass();
        all_hold = all_hold && hold;
        std::cout << path << ": forgetting " << (forget.forget_all_pass() ? "holds" : "VIOLATED")
                  << ", generalization lower bound "
                  << (gen.gen_lower_all_pass() ? "holds" : "VIOLATED") << "\n";
    }
    if (!out_path.empty()) write_text_atomic(out_path, csv);
    return all_hold ? 0 : 1;
}

int cmd_aggregate(const std::string& dir_path) {
    std::vector<std::pair<std::string, RunRecord>> tagged;  // (strategy, record)
    for (const auto& entry : fs::directory_iterator(dir_path)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("run_", 0) != 0 || entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        nlohmann::json j;
        in >> j;
        tagged.emplace_back(j.at("strategy").get<std::string>(), run_record_from_json(j));
    }
    if (tagged.empty()) throw io_error("no run_*.json records in " + dir_path);
    std::sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second.seed < b.second.seed;
    });
    // Keep first-appearance order of strategies as written by run/ablate:
    // alphabetical is stable and reproducible, so use the sorted order.
    std::vector<AggregateRow> rows;
    for (std::size_t i = 0; i < tagged.size();) {
        std::size_t jx = i;
        std::vector<RunRecord> group;
        while (jx < tagged.size() && tagged[jx].first == tagged[i].first)
            group.push_back(tagged[jx++].second);
        rows.push_back(aggregate_records(group, tagged[i].first));
        i = jx;
    }
    write_text_atomic((fs::path(dir_path) / "aggregate.csv").string(), aggregate_csv(rows));
    std::cout << "wrote " << (fs::path(dir_path) / "aggregate.csv").string() << " ("
              << rows.size() << " rows)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parabolic continual learner experiment driver"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    auto* run_cmd = app.add_subcommand("run", "train over all seeds and write a results bundle");
    run_cmd->add_option("--config", config_path, "experiment file")->required();
    run_cmd->add_option("--set", overrides, "override a key (section.key=value)");

    auto* ablate_cmd = app.add_subcommand("ablate", "run the sampling-strategy grid");
    ablate_cmd->add_option("--config", config_path, "experiment file")->required();
    ablate_cmd->add_option("--set", overrides, "override a key (section.key=value)");

    std::string out_path;
    std::size_t n_paths = 10000;
    double fk_dt = 1e-3;
    std::uint64_t seed = 1;
    auto* pde_cmd = app.add_subcommand("verify-pde", "cross-check Feynman-Kac vs grid solutions");
    pde_cmd->add_option("--out", out_path, "CSV output path");
    pde_cmd->add_option("--paths", n_paths, "Monte Carlo paths per problem");
    pde_cmd->add_option("--dt", fk_dt, "Euler-Maruyama step");
    pde_cmd->add_option("--seed", seed, "path RNG seed");

    std::vector<std::string> run_paths;
    auto* bounds_cmd = app.add_subcommand("check-bounds", "audit forgetting/generalization bounds");
    bounds_cmd->add_option("--run", run_paths, "run record JSON (repeatable)")->required();
    bounds_cmd->add_option("--out", out_path, "CSV output path");

    std::string dir_path;
    auto* agg_cmd = app.add_subcommand("aggregate", "recompute aggregate.csv from per-seed JSON");
    agg_cmd->add_option("--dir", dir_path, "results bundle directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(config_path, overrides);
        if (ablate_cmd->parsed()) return cmd_ablate(config_path, overrides);
        if (pde_cmd->parsed()) return cmd_verify_pde(out_path, n_paths, fk_dt, seed);
        if (bounds_cmd->parsed()) return cmd_check_bounds(run_paths, out_path);
        if (agg_cmd->parsed()) return cmd_aggregate(dir_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

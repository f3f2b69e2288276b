#include "pcl/results.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pcl/errors.hpp"

namespace pcl {

namespace {

nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double null_to_nan(const nlohmann::json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}

MethodKind method_from_name(const std::string& name) {
    if (name == "pcl") return MethodKind::Pcl;
    if (name == "er") return MethodKind::Er;
    if (name == "sgd") return MethodKind::Sgd;
    throw io_error("run record: unknown method '" + name + "'");
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

nlohmann::json run_record_to_json(const RunRecord& rec, const std::string& strategy) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["seed"] = rec.seed;
    j["method"] = method_name(rec.method);
    j["strategy"] = strategy;
    j["n_tasks"] = rec.n_tasks;
    j["steps"] = rec.steps;
    j["aaa"] = rec.aaa;
    j["acc_final"] = rec.acc_final;
    j["diverged"] = rec.diverged;
    j["diagnostic"] = rec.diagnostic;
    j["girsanov_clamped"] = rec.girsanov_clamped;
    j["loss_trace"] = rec.loss_trace;
    nlohmann::json cps = nlohmann::json::array();
    for (const auto& cs : rec.checkpoints) {
        nlohmann::json cj;
        cj["task"] = cs.task;
        cj["per_group_acc"] = cs.per_group_acc;
        cj["aa"] = cs.aa;
        cj["per_task_eval_loss"] = cs.per_task_eval_loss;
        cj["buffer_loss_min"] = finite_or_null(cs.buffer_loss_min);
        cj["buffer_loss_mean"] = finite_or_null(cs.buffer_loss_mean);
        cj["buffer_loss_max"] = finite_or_null(cs.buffer_loss_max);
        cj["c_lipschitz"] = finite_or_null(cs.c_lipschitz);
        cj["buffer_size"] = cs.buffer_size;
        cps.push_back(std::move(cj));
    }
    j["checkpoints"] = std::move(cps);
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& cs : rec.checkpoints)
        snaps.push_back("bufsnap_seed" + std::to_string(rec.seed) + "_task" +
                        std::to_string(cs.task) + ".jsonl");
    j["buffer_snapshot_files"] = std::move(snaps);
    return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
    RunRecord rec;
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.method = method_from_name(j.at("method").get<std::string>());
    rec.n_tasks = j.at("n_tasks").get<int>();
    rec.steps = j.at("steps").get<int>();
    rec.aaa = j.at("aaa").get<double>();
    rec.acc_final = j.at("acc_final").get<double>();
    rec.diverged = j.at("diverged").get<bool>();
    rec.diagnostic = j.at("diagnostic").get<std::string>();
    rec.girsanov_clamped = j.at("girsanov_clamped").get<long>();
    rec.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    for (const auto& cj : j.at("checkpoints")) {
        CheckpointStats cs;
        cs.task = cj.at("task").get<int>();
        cs.per_group_acc = cj.at("per_group_acc").get<std::vector<double>>();
        cs.aa = cj.at("aa").get<double>();
        cs.per_task_eval_loss = cj.at("per_task_eval_loss").get<std::vector<double>>();
        cs.buffer_loss_min = null_to_nan(cj.at("buffer_loss_min"));
        cs.buffer_loss_mean = null_to_nan(cj.at("buffer_loss_mean"));
        cs.buffer_loss_max = null_to_nan(cj.at("buffer_loss_max"));
        cs.c_lipschitz = null_to_nan(cj.at("c_lipschitz"));
        cs.buffer_size = cj.at("buffer_size").get<std::size_t>();
        rec.checkpoints.push_back(std::move(cs));
    }
    return rec;
}

std::string flat_csv_header() { return "seed,method,task,aa,acc_final,aaa\n"; }

std::string flat_csv_rows(const RunRecord& rec) {
    std::string out;
    for (const auto& cs : rec.checkpoints) {
        out += std::to_string(rec.seed);
        out += ',';
        out += method_name(rec.method);
        out += ',';
        out += std::to_string(cs.task);
        out += ',';
        out += format_double(cs.aa);
        out += ',';
        out += format_double(rec.acc_final);
        out += ',';
        out += format_double(rec.aaa);
        out += '\n';
    }
    return out;
}

AggregateRow aggregate_records(const std::vector<RunRecord>& records,
                               const std::string& strategy) {
    if (records.empty()) throw param_error("aggregate_records: no records");
    AggregateRow row;
    row.strategy = strategy;
    row.method = method_name(records.front().method);
    row.n_seeds = records.size();
    double acc_sum = 0.0, aaa_sum = 0.0;
    for (const auto& r : records) {
        acc_sum += r.acc_final;
        aaa_sum += r.aaa;
    }
    row.acc_mean = acc_sum / records.size();
    row.aaa_mean = aaa_sum / records.size();
    if (records.size() > 1) {
        double acc_var = 0.0, aaa_var = 0.0;
        for (const auto& r : records) {
            acc_var += (r.acc_final - row.acc_mean) * (r.acc_final - row.acc_mean);
            aaa_var += (r.aaa - row.aaa_mean) * (r.aaa - row.aaa_mean);
        }
        row.acc_sd = std::sqrt(acc_var / (records.size() - 1));
        row.aaa_sd = std::sqrt(aaa_var / (records.size() - 1));
    }
    return row;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string out = "schema_version,strategy,method,n_seeds,acc_mean,acc_sd,aaa_mean,aaa_sd\n";
    for (const auto& r : rows) {
        out += "1," + r.strategy + "," + r.method + "," + std::to_string(r.n_seeds) + "," +
               format_double(r.acc_mean) + "," + format_double(r.acc_sd) + "," +
               format_double(r.aaa_mean) + "," + format_double(r.aaa_sd) + "\n";
    }
    return out;
}

std::string bound_report_csv_header() {
    return "seed,checkpoint,tau,max_buffer_loss,avg_buffer_loss,min_buffer_loss,"
           "first_task_loss,last_task_loss,c_lipschitz,forget_margin,forget_margin_avg,"
           "gen_lower_margin,gen_upper_margin,forget_pass,gen_lower_pass,gen_upper_pass\n";
}

std::string bound_report_csv_rows(std::uint64_t seed, const BoundReport& report) {
    std::string out;
    for (const auto& r : report.rows) {
        out += std::to_string(seed) + "," + std::to_string(r.checkpoint) + "," +
               std::to_string(r.tau) + "," + format_double(r.max_buffer_loss) + "," +
               format_double(r.avg_buffer_loss) + "," + format_double(r.min_buffer_loss) + "," +
               format_double(r.first_task_loss) + "," + format_double(r.last_task_loss) + "," +
               format_double(r.c_lipschitz) + "," + format_double(r.forget_margin) + "," +
               format_double(r.forget_margin_avg) + "," + format_double(r.gen_lower_margin) +
               "," + format_double(r.gen_upper_margin) + "," + (r.forget_pass ? "1" : "0") +
               "," + (r.gen_lower_pass ? "1" : "0") + "," + (r.gen_upper_pass ? "1" : "0") +
               "\n";
    }
    return out;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot write " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace pcl

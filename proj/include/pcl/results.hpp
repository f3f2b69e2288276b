#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcl/bounds.hpp"
#include "pcl/trainer.hpp"

namespace pcl {

/// Deterministic serialization of a run record. Wall-clock time and the raw
/// buffer snapshots are deliberately excluded (timings vary between reruns;
/// snapshots live in their own JSONL files, referenced by name here).
nlohmann::json run_record_to_json(const RunRecord& rec, const std::string& strategy = "default");

/// Rehydrates the fields needed for aggregation and bound reports.
RunRecord run_record_from_json(const nlohmann::json& j);

/// seed,method,task,aa,acc_final,aaa rows for one run.
std::string flat_csv_rows(const RunRecord& rec);
std::string flat_csv_header();

/// One aggregate row (mean +- sd over seeds) per strategy.
struct AggregateRow {
    std::string strategy;
    std::string method;
    std::size_t n_seeds = 0;
    double acc_mean = 0.0, acc_sd = 0.0;
    double aaa_mean = 0.0, aaa_sd = 0.0;
};
AggregateRow aggregate_records(const std::vector<RunRecord>& records,
                               const std::string& strategy);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

std::string bound_report_csv_header();
std::string bound_report_csv_rows(std::uint64_t seed, const BoundReport& report);

/// Writes via a temp file + rename so readers never observe partial output.
void write_text_atomic(const std::string& path, const std::string& content);

/// Max-precision round-trip formatting shared by every CSV writer.
std::string format_double(double v);

}  // namespace pcl

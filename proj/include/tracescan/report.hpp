// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/deadline.hpp>
#include <tracescan/detectors.hpp>
#include <tracescan/trace.hpp>

#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tracescan
{
enum class ReportFormat
{
    jsonl,
    table,
};

struct RunConfig
{
    std::filesystem::path input;
    std::filesystem::path output;
    VulnSet vulns = VulnSet::all();
    double tx_timeout = 5.0;  ///< seconds
    int jobs = 1;
    ReportFormat format = ReportFormat::jsonl;
    /// Use the serial reference loop instead of the OpenMP one.
    bool serial = false;
};

class InputNotFound : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class WriteFailure : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Result of analysing one trace or block.
struct UnitResult
{
    std::vector<Finding> findings;
    std::set<Address> executing;
    size_t transactions = 0;
    size_t timeouts = 0;
    double tx_seconds = 0;  ///< summed analysis time of the unit's transactions
};

/// Parse, extract, fixpoint and detect for a single transaction.
UnitResult analyze_trace(const ExecutionTrace& trace, const VulnSet& vulns, double tx_timeout);
/// Every transaction of a block, then the cross-transaction TO pass.
UnitResult analyze_block(const BlockContext& block, const VulnSet& vulns, double tx_timeout);

struct FileError
{
    std::filesystem::path file;
    std::string message;
};

struct RunStats
{
    size_t files = 0;
    size_t traces = 0;
    size_t timeouts = 0;
    double wall_seconds = 0;
    double mean_tx_seconds = 0;
};

struct Report
{
    std::vector<Finding> findings;  ///< sorted by finding_less
    RiskAccount account;
    size_t inputs = 0;  ///< distinct contracts observed executing
    RunStats stats;
    std::vector<FileError> errors;
};

/// Files `run` picks up: regular *.jsonl files other than *.expected.jsonl, sorted by path.
std::vector<std::filesystem::path> input_files(const std::filesystem::path& dir);

/// Analyses every input file. Throws InputNotFound if `config.input` is not a directory.
Report run(const RunConfig& config);

nlohmann::ordered_json finding_to_json(const Finding& f);
nlohmann::ordered_json summary_to_json(const RiskAccount& account, size_t inputs);

/// One finding per line, then a single {"summary": ...} line.
std::string render_jsonl(const std::vector<Finding>& findings, const RiskAccount& account, size_t inputs);
std::string render_jsonl(const Report& report);
/// Fixed-width table: one row per class plus the deduplicated Total row.
std::string render_summary(const Report& report);

/// Writes the report in `config.format`. Throws WriteFailure.
void write_report(const Report& report, const RunConfig& config);

/// 0 ok, 1 input error, 2 write error.
int run_and_write(const RunConfig& config);

}  // namespace tracescan

// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/report.hpp>
#include <tracescan/rules.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <omp.h>

namespace tracescan
{
namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace
{
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TxOutcome
{
    std::optional<ExtractionResult> extraction;
    std::optional<datalog::Database> db;
    std::vector<Finding> findings;
    double seconds = 0;
    bool timed_out = false;
};

TxOutcome analyze_one(const ExecutionTrace& trace, const VulnSet& vulns, double tx_timeout)
{
    TxOutcome out;
    const auto start = Clock::now();
    const Deadline deadline = Deadline::after(std::chrono::duration<double>(tx_timeout));
    try
    {
        out.extraction = extract_facts(trace, {deadline});
        out.db = evaluate(*out.extraction, Catalog::production, deadline);
        out.findings = detect_transaction({trace.tx, *out.extraction, *out.db}, vulns);
        deadline.check();
    }
    catch (const TimeoutError&)
    {
        out = TxOutcome{};
        out.timed_out = true;
    }
    out.seconds = seconds_since(start);
    return out;
}

void absorb(UnitResult& unit, const ExecutionTrace& trace, const TxOutcome& tx)
{
    ++unit.transactions;
    unit.tx_seconds += tx.seconds;
    if (tx.timed_out)
    {
        ++unit.timeouts;
        unit.executing.insert(trace.tx.callee);
        return;
    }
    unit.executing.insert(tx.extraction->executing.begin(), tx.extraction->executing.end());
    unit.findings.insert(unit.findings.end(), tx.findings.begin(), tx.findings.end());
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct FileOutcome
{
    UnitResult unit;
    std::optional<std::string> error;
};

FileOutcome analyze_file(const fs::path& file, const RunConfig& config)
{
    FileOutcome out;
    try
    {
        const std::string text = read_file(file);
        if (looks_like_block(text))
            out.unit = analyze_block(parse_block(text), config.vulns, config.tx_timeout);
        else
            out.unit = analyze_trace(parse_trace(text), config.vulns, config.tx_timeout);
    }
    catch (const std::exception& e)
    {
        out.unit = UnitResult{};
        out.error = e.what();
    }
    return out;
}

std::string percent(size_t contracts, size_t inputs)
{
    const double p = inputs == 0 ? 0.0 : 100.0 * static_cast<double>(contracts) / static_cast<double>(inputs);
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << p;
    return ss.str();
}

ordered_json class_json(const ClassTotals& t, size_t inputs)
{
    ordered_json j;
    j["contracts"] = t.contracts;
    j["etherWei"] = to_string(t.ether);
    j["percent"] = percent(t.contracts, inputs);
    return j;
}

}  // namespace

UnitResult analyze_trace(const ExecutionTrace& trace, const VulnSet& vulns, double tx_timeout)
{
    UnitResult unit;
    absorb(unit, trace, analyze_one(trace, vulns, tx_timeout));
    std::sort(unit.findings.begin(), unit.findings.end(), finding_less);
    return unit;
}

UnitResult analyze_block(const BlockContext& block, const VulnSet& vulns, double tx_timeout)
{
    UnitResult unit;
    std::vector<TxOutcome> outcomes;
    outcomes.reserve(block.transactions.size());
    for (const ExecutionTrace& t : block.transactions)
    {
        outcomes.push_back(analyze_one(t, vulns, tx_timeout));
        absorb(unit, t, outcomes.back());
    }
    if (vulns.has(VulnClass::TO))
    {
        std::vector<TxFacts> facts;
        for (size_t i = 0; i < outcomes.size(); ++i)
            if (!outcomes[i].timed_out)
                facts.push_back({block.transactions[i].tx, *outcomes[i].extraction, *outcomes[i].db});
        const auto start = Clock::now();
        try
        {
            auto tod = detect_tod(facts);
            unit.findings.insert(unit.findings.end(), tod.begin(), tod.end());
        }
        catch (const TimeoutError&)
        {
            ++unit.timeouts;
        }
        unit.tx_seconds += seconds_since(start);
    }
    std::sort(unit.findings.begin(), unit.findings.end(), finding_less);
    return unit;
}

std::vector<fs::path> input_files(const fs::path& dir)
{
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
    {
        if (!entry.is_regular_file())
            continue;
        const std::string name = entry.path().filename().string();
        const auto ends_with = [&](std::string_view suffix) {
            return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
        };
        if (ends_with(".jsonl") && !ends_with(".expected.jsonl"))
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

Report run(const RunConfig& config)
{
    if (!fs::is_directory(config.input))
        throw InputNotFound("input directory not found: " + config.input.string());
    if (config.tx_timeout <= 0)
        throw std::invalid_argument("txTimeout must be positive");
    if (config.jobs < 1)
        throw std::invalid_argument("parallelism must be at least 1");

    const auto start = Clock::now();
    const auto files = input_files(config.input);
    std::vector<FileOutcome> outcomes(files.size());

    if (config.serial)
    {
        for (size_t i = 0; i < files.size(); ++i)
            outcomes[i] = analyze_file(files[i], config);
    }
    else
    {
        const auto n = static_cast<std::ptrdiff_t>(files.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(config.jobs)
        for (std::ptrdiff_t i = 0; i < n; ++i)
            outcomes[static_cast<size_t>(i)] = analyze_file(files[static_cast<size_t>(i)], config);
    }

    Report report;
    std::set<Address> inputs;
    double tx_seconds = 0;
    report.stats.files = files.size();
    for (size_t i = 0; i < files.size(); ++i)
    {
        FileOutcome& o = outcomes[i];
        if (o.error)
        {
            report.errors.push_back({files[i], *o.error});
            continue;
        }
        report.findings.insert(report.findings.end(), o.unit.findings.begin(), o.unit.findings.end());
        inputs.insert(o.unit.executing.begin(), o.unit.executing.end());
        report.stats.traces += o.unit.transactions;
        report.stats.timeouts += o.unit.timeouts;
        tx_seconds += o.unit.tx_seconds;
    }
    std::sort(report.findings.begin(), report.findings.end(), finding_less);
    report.account = aggregate(report.findings);
    report.inputs = inputs.size();
    report.stats.wall_seconds = seconds_since(start);
    report.stats.mean_tx_seconds =
        report.stats.traces == 0 ? 0.0 : tx_seconds / static_cast<double>(report.stats.traces);
    return report;
}

ordered_json finding_to_json(const Finding& f)
{
    ordered_json j;
    j["vuln"] = std::string(to_string(f.vuln));
    j["block"] = f.block;
    if (f.vuln == VulnClass::TO)
        j["txIndex"] = f.tx_indices;
    else
        j["txIndex"] = f.tx_indices.empty() ? 0 : f.tx_indices.front();
    j["subject"] = f.subject.to_hex();
    j["counterparty"] = f.counterparty ? ordered_json(f.counterparty->to_hex()) : ordered_json(nullptr);
    j["pc"] = f.pc;
    j["etherAtRiskWei"] = to_string(f.ether_at_risk);
    j["riskScope"] = f.risk_scope;
    j["detail"] = f.detail ? ordered_json(*f.detail) : ordered_json(nullptr);
    j["evidence"] = f.evidence;
    return j;
}

ordered_json summary_to_json(const RiskAccount& account, size_t inputs)
{
    ordered_json classes = ordered_json::object();
    for (const VulnClass c : kAllClasses)
        classes[std::string(to_string(c))] = class_json(account[c], inputs);
    ordered_json s;
    s["inputs"] = inputs;
    s["classes"] = std::move(classes);
    s["total"] = class_json(account.total, inputs);
    ordered_json line;
    line["summary"] = std::move(s);
    return line;
}

std::string render_jsonl(const std::vector<Finding>& findings, const RiskAccount& account, size_t inputs)
{
    std::string out;
    for (const Finding& f : findings)
        out += finding_to_json(f).dump() + "\n";
    out += summary_to_json(account, inputs).dump() + "\n";
    return out;
}

std::string render_jsonl(const Report& report)
{
    return render_jsonl(report.findings, report.account, report.inputs);
}

std::string render_summary(const Report& report)
{
    std::ostringstream ss;
    const auto row = [&](std::string_view label, const ClassTotals& t) {
        ss << std::left << std::setw(8) << label << std::right << std::setw(10) << t.contracts
           << std::setw(28) << wei_to_ether_string(t.ether) << std::setw(10)
           << percent(t.contracts, report.inputs) << "\n";
    };
    ss << std::left << std::setw(8) << "Class" << std::right << std::setw(10) << "Contracts"
       << std::setw(28) << "Ether" << std::setw(10) << "Percent" << "\n";
    for (const VulnClass c : kAllClasses)
        row(to_string(c), report.account[c]);
    row("Total", report.account.total);
    ss << "inputs " << report.inputs << ", traces " << report.stats.traces << ", timeouts "
       << report.stats.timeouts << "\n";
    return ss.str();
}

void write_report(const Report& report, const RunConfig& config)
{
    const std::string text = config.format == ReportFormat::jsonl ? render_jsonl(report) : render_summary(report);
    std::ofstream out(config.output, std::ios::binary | std::ios::trunc);
    if (!out)
        throw WriteFailure("cannot open " + config.output.string() + " for writing");
    out << text;
    out.flush();
    if (!out)
        throw WriteFailure("failed writing " + config.output.string());
}

int run_and_write(const RunConfig& config)
{
    Report report;
    try
    {
        report = run(config);
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    for (const FileError& e : report.errors)
        std::fprintf(stderr, "error: %s: %s\n", e.file.string().c_str(), e.message.c_str());
    try
    {
        write_report(report, config);
    }
    catch (const WriteFailure& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    std::fprintf(stderr, "files %zu, traces %zu, timeouts %zu, findings %zu, wall %.3fs, mean tx %.3fms\n",
        report.stats.files, report.stats.traces, report.stats.timeouts, report.findings.size(),
        report.stats.wall_seconds, report.stats.mean_tx_seconds * 1e3);
    return report.errors.empty() ? 0 : 1;
}

}  // namespace tracescan

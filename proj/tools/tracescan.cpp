// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/report.hpp>
#include <tracescan/rules.hpp>
#include <tracescan/synth.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace tracescan;
namespace fs = std::filesystem;

namespace
{
VulnSet parse_vulns(const std::vector<std::string>& names)
{
    VulnSet set;
    for (const auto& n : names)
    {
        const auto c = parse_vuln_class(n);
        if (!c)
            throw CLI::ValidationError("--vulns", "unknown class '" + n + "'");
        set.add(*c);
    }
    return set;
}

int facts_command(const fs::path& input, const fs::path& out, bool reference)
{
    std::ifstream in(input, std::ios::binary);
    if (!in)
    {
        std::cerr << "error: cannot open " << input << "\n";
        return 1;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try
    {
        const ExecutionTrace trace = parse_trace(ss.str());
        ExtractionResult x = extract_facts(trace);
        const auto db = evaluate(x, reference ? Catalog::reference : Catalog::production);
        fs::create_directories(out);
        dump_facts(x.facts, out);
        datalog::dump_relations(db, out);
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"tracescan: exploit detection over EVM execution traces"};
    app.require_subcommand(1);

    RunConfig config;
    std::vector<std::string> vulns;
    std::string format = "jsonl";
    bool serial = false;
    auto* analyze = app.add_subcommand("analyze", "Analyze a directory of trace and block files");
    analyze->add_option("--input", config.input, "Input directory")->required();
    analyze->add_option("--out", config.output, "Report file")->required();
    analyze->add_option("--vulns", vulns, "Classes to run (re,ue,le,to,io,ua)")->delimiter(',');
    analyze->add_option("--timeout-secs", config.tx_timeout, "Per-transaction timeout")
        ->check(CLI::PositiveNumber);
    analyze->add_option("--jobs", config.jobs, "Worker threads")->check(CLI::Range(1, 4096));
    analyze->add_option("--format", format, "Report format")->check(CLI::IsMember({"jsonl", "table"}));
    analyze->add_flag("--serial", serial, "Use the serial reference loop");

    fs::path synth_out;
    uint64_t seed = 1;
    std::string pattern;
    size_t perf_steps = 0;
    auto* synth = app.add_subcommand("synth", "Write synthetic scenario traces with expected findings");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", seed, "Address/value seed");
    synth->add_option("--pattern", pattern, "Single pattern instead of the full corpus");
    synth->add_option("--perf-steps", perf_steps, "Also write a loop-heavy trace of about this many steps");

    fs::path facts_in;
    fs::path facts_out;
    bool reference = false;
    auto* facts = app.add_subcommand("facts", "Dump extracted facts and derived relations of one trace");
    facts->add_option("--input", facts_in, "Trace file")->required()->check(CLI::ExistingFile);
    facts->add_option("--out", facts_out, "Output directory")->required();
    facts->add_flag("--reference", reference, "Evaluate the literal rule catalog");

    try
    {
        app.parse(argc, argv);
        if (!vulns.empty())
            config.vulns = parse_vulns(vulns);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return 1;
    }

    if (*analyze)
    {
        config.format = format == "table" ? ReportFormat::table : ReportFormat::jsonl;
        config.serial = serial;
        return run_and_write(config);
    }
    if (*synth)
    {
        try
        {
            fs::create_directories(synth_out);
            if (pattern.empty())
                write_corpus(synth_out, seed);
            else
            {
                const SynthesizedFile f = synthesize({pattern, seed, std::nullopt});
                std::ofstream(synth_out / f.name, std::ios::binary) << f.contents;
                std::ofstream(synth_out / (pattern + ".expected.jsonl"), std::ios::binary)
                    << render_expected(f.expected);
            }
            if (perf_steps > 0)
                std::ofstream(synth_out / "perf-mixed.trace.jsonl", std::ios::binary)
                    << serialize_trace(synthesize_perf_trace(perf_steps, seed));
        }
        catch (const UnknownPattern& e)
        {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
        catch (const std::exception& e)
        {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
        return 0;
    }
    return facts_command(facts_in, facts_out, reference);
}

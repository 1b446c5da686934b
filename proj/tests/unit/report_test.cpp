// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "harness.hpp"

#include <tracescan/synth.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

using namespace tracescan;
using namespace tracescan::testing;
namespace fs = std::filesystem;

namespace
{
int cli(const std::string& args)
{
    const std::string cmd = std::string("\"") + TRACESCAN_CLI + "\" " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Finding finding(VulnClass c, const Address& subject, const Wei& w)
{
    Finding f;
    f.vuln = c;
    f.subject = subject;
    f.ether_at_risk = w;
    f.risk_scope = std::string(to_string(c)) + subject.to_hex();
    f.evidence = {{"e"}};
    return f;
}

Report report_of(std::vector<Finding> fs, size_t inputs)
{
    Report r;
    r.findings = std::move(fs);
    r.account = aggregate(r.findings);
    r.inputs = inputs;
    return r;
}

std::vector<std::string> lines(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

}  // namespace

TEST(Run, EmptyDirectory)
{
    const auto dir = scratch_dir("empty");
    RunConfig c;
    c.input = dir;
    const Report r = run(c);
    EXPECT_TRUE(r.findings.empty());
    EXPECT_EQ(r.inputs, 0u);
    EXPECT_EQ(r.stats.files, 0u);
    const auto out = lines(render_jsonl(r));
    ASSERT_EQ(out.size(), 1u);
    EXPECT_NE(out[0].find(R"("inputs":0)"), std::string::npos);
    EXPECT_NE(out[0].find(R"("percent":"0.00")"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Run, InputNotFound)
{
    RunConfig c;
    c.input = "/nonexistent/tracescan-input";
    EXPECT_THROW((void)run(c), InputNotFound);
}

TEST(Run, RejectsBadConfig)
{
    const auto dir = scratch_dir("cfg");
    RunConfig c;
    c.input = dir;
    c.tx_timeout = 0;
    EXPECT_THROW((void)run(c), std::invalid_argument);
    c.tx_timeout = 5;
    c.jobs = 0;
    EXPECT_THROW((void)run(c), std::invalid_argument);
    fs::remove_all(dir);
}

TEST(Run, TimeoutIsolation)
{
    const auto dir = scratch_dir("timeout");
    write_text(dir / "a-perf.trace.jsonl", serialize_trace(synthesize_perf_trace(100000, 1)));
    const SynthesizedFile ok = synthesize({"re-direct", 1, std::nullopt});
    write_text(dir / ok.name, ok.contents);

    RunConfig c;
    c.input = dir;
    c.tx_timeout = 0.02;
    c.serial = true;
    const Report r = run(c);
    EXPECT_EQ(r.stats.traces, 2u);
    EXPECT_EQ(r.stats.timeouts, 1u);
    for (const Finding& f : r.findings)
        EXPECT_NE(f.block, 7000u);

    c.tx_timeout = 5;
    const Report full = run(c);
    EXPECT_EQ(full.stats.timeouts, 0u);
    std::vector<Finding> re;
    for (const Finding& f : full.findings)
        if (f.block != 7000)
            re.push_back(f);
    EXPECT_EQ(r.findings, re);
    EXPECT_FALSE(re.empty());
    fs::remove_all(dir);
}

TEST(Run, SerialAndParallelAgree)
{
    RunConfig c;
    c.input = TRACESCAN_FIXTURE_DIR;
    c.serial = true;
    const std::string serial = render_jsonl(run(c));
    c.serial = false;
    c.jobs = 4;
    EXPECT_EQ(render_jsonl(run(c)), serial);
    EXPECT_EQ(render_jsonl(run(c)), serial);
}

TEST(Run, ParseFailureKeepsOtherFiles)
{
    const auto dir = scratch_dir("bad");
    write_text(dir / "broken.trace.jsonl", "{not json\n");
    const SynthesizedFile ok = synthesize({"ue-unchecked", 1, std::nullopt});
    write_text(dir / ok.name, ok.contents);
    RunConfig c;
    c.input = dir;
    const Report r = run(c);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_EQ(r.findings, ok.expected);
    c.output = dir / "out.jsonl";
    EXPECT_EQ(run_and_write(c), 1);
    EXPECT_TRUE(fs::exists(c.output));
    fs::remove_all(dir);
}

TEST(Run, InputFilesSkipSidecars)
{
    const auto files = input_files(TRACESCAN_FIXTURE_DIR);
    for (const auto& f : files)
        EXPECT_EQ(f.string().find(".expected."), std::string::npos);
    EXPECT_EQ(files.size(), corpus_patterns().size());
}

TEST(Render, FindingRecordFields)
{
    Finding f = finding(VulnClass::RE, addr(1), ether("5"));
    f.block = 3;
    f.tx_indices = {2};
    f.pc = 17;
    const std::string s = finding_to_json(f).dump();
    EXPECT_EQ(s.rfind(R"({"vuln":"RE","block":3,"txIndex":2,"subject":")", 0), 0u);
    EXPECT_NE(s.find(R"("counterparty":null,"pc":17,"etherAtRiskWei":"5000000000000000000")"), std::string::npos);
    f.vuln = VulnClass::TO;
    f.tx_indices = {0, 1};
    EXPECT_NE(finding_to_json(f).dump().find(R"("txIndex":[0,1])"), std::string::npos);
}

TEST(Render, TableSingleReentrancy)
{
    const std::string t = render_summary(report_of({finding(VulnClass::RE, addr(1), ether("5"))}, 4));
    const auto rows = lines(t);
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_EQ(rows[1], "RE               1                           5     25.00");
    EXPECT_EQ(rows[2], "UE               0                           0      0.00");
    EXPECT_EQ(rows[7], "Total            1                           5     25.00");
}

TEST(Render, TableDedupsTotal)
{
    const std::string t =
        render_summary(report_of({finding(VulnClass::RE, addr(1), 1), finding(VulnClass::IO, addr(1), 2)}, 1));
    const auto rows = lines(t);
    EXPECT_EQ(rows[7].substr(0, 18), "Total            1");
}

TEST(Render, EmptyTable)
{
    const auto rows = lines(render_summary(report_of({}, 0)));
    for (size_t i = 1; i <= 7; ++i)
        EXPECT_NE(rows[i].find("0                           0      0.00"), std::string::npos) << rows[i];
}

TEST(Cli, ExitCodes)
{
    const auto dir = scratch_dir("cli");
    EXPECT_EQ(cli("analyze --input /nonexistent/x --out " + (dir / "o.jsonl").string()), 1);
    EXPECT_EQ(cli("analyze --input " + std::string(TRACESCAN_FIXTURE_DIR) + " --out " + (dir / "o.jsonl").string()), 0);
    EXPECT_EQ(cli("analyze --input " + std::string(TRACESCAN_FIXTURE_DIR) + " --out " + (dir / "missing" / "o.jsonl").string()), 2);
    EXPECT_EQ(cli("analyze --input " + std::string(TRACESCAN_FIXTURE_DIR) + " --out " + (dir / "t.txt").string() +
                  " --format table --vulns re,io --jobs 2"),
        0);
    const std::string table = read_text(dir / "t.txt");
    EXPECT_EQ(table.rfind("Class", 0), 0u);
    EXPECT_EQ(cli("analyze --input " + std::string(TRACESCAN_FIXTURE_DIR) + " --out x --vulns zz"), 1);
    EXPECT_EQ(cli("synth --out " + (dir / "s").string() + " --pattern nope"), 1);
    fs::remove_all(dir);
}

TEST(Cli, VulnFilter)
{
    const auto dir = scratch_dir("filter");
    ASSERT_EQ(cli("analyze --input " + std::string(TRACESCAN_FIXTURE_DIR) + " --out " + (dir / "o.jsonl").string() +
                  " --vulns ue"),
        0);
    const auto out = lines(read_text(dir / "o.jsonl"));
    ASSERT_GE(out.size(), 2u);
    for (size_t i = 0; i + 1 < out.size(); ++i)
        EXPECT_EQ(out[i].rfind(R"({"vuln":"UE")", 0), 0u);
    fs::remove_all(dir);
}

TEST(Cli, FactsDump)
{
    const auto dir = scratch_dir("facts");
    ASSERT_EQ(cli("facts --input " + std::string(TRACESCAN_FIXTURE_DIR) + "/ue-unchecked.trace.jsonl --out " +
                  dir.string()),
        0);
    EXPECT_TRUE(fs::exists(dir / "call_result.facts"));
    fs::remove_all(dir);
}

// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "harness.hpp"

#include <tracescan/synth.hpp>

#include <gtest/gtest.h>

using namespace tracescan;
using namespace tracescan::testing;

TEST(Synthesize, UnknownPattern)
{
    EXPECT_THROW((void)synthesize({"re-nonsense", 1, std::nullopt}), UnknownPattern);
}

TEST(Synthesize, Deterministic)
{
    for (const auto& p : corpus_patterns())
    {
        const SynthesizedFile a = synthesize({p, 4, std::nullopt});
        const SynthesizedFile b = synthesize({p, 4, std::nullopt});
        EXPECT_EQ(a.contents, b.contents) << p;
        EXPECT_EQ(a.expected, b.expected) << p;
    }
    EXPECT_NE(synthesize({"re-direct", 1, std::nullopt}).contents, synthesize({"re-direct", 2, std::nullopt}).contents);
}

TEST(Synthesize, AddressesAvoidPrecompiles)
{
    for (uint64_t seed = 0; seed < 50; ++seed)
        EXPECT_FALSE(scenario_address("re-direct", seed, "A").is_precompile());
    EXPECT_EQ(scenario_address("ua-write", 3, "A"), scenario_address("ua-write", 3, "A"));
    EXPECT_NE(scenario_address("ua-write", 3, "A"), scenario_address("ua-write", 3, "B"));
}

TEST(Synthesize, ClosurePerPatternAndSeed)
{
    for (const auto& p : corpus_patterns())
        for (uint64_t seed = 1; seed <= 8; ++seed)
        {
            const SynthesizedFile f = synthesize({p, seed, std::nullopt});
            const UnitResult r = analyze_text(f.contents);
            EXPECT_EQ(r.findings, f.expected) << p << " seed " << seed;
            EXPECT_EQ(r.executing, f.executing) << p << " seed " << seed;
            EXPECT_EQ(is_benign(p), f.expected.empty()) << p;
        }
}

TEST(Synthesize, DirectReentrancyWithValue)
{
    const SynthesizedFile f = synthesize({"re-direct", 1, Wei{5}});
    ASSERT_EQ(f.expected.size(), 1u);
    EXPECT_EQ(f.expected[0].vuln, VulnClass::RE);
    EXPECT_EQ(f.expected[0].ether_at_risk, Wei{5});
    EXPECT_EQ(analyze_text(f.contents).findings, f.expected);
}

TEST(Synthesize, BenignControls)
{
    for (const char* p : {"ue-checked", "le-live", "ua-guarded", "re-benign"})
    {
        EXPECT_TRUE(is_benign(p));
        EXPECT_TRUE(analyze_text(synthesize({p, 1, std::nullopt}).contents).findings.empty()) << p;
    }
}

TEST(Synthesize, WalletLibraryFixture)
{
    const SynthesizedFile f = synthesize({"le-destructed", 1, std::nullopt});
    ASSERT_EQ(f.expected.size(), 1u);
    EXPECT_EQ(f.expected[0].subject.to_hex(), "0x3bfc20f0b9afcace800d73d2191166ff16540258");
    EXPECT_EQ(f.expected[0].ether_at_risk, ether("306276"));
    EXPECT_EQ(f.expected[0].pc, 100u);
}

TEST(Synthesize, TodPairIsBlock)
{
    const SynthesizedFile f = synthesize({"tod-pair", 1, std::nullopt});
    EXPECT_TRUE(looks_like_block(f.contents));
    const BlockContext b = parse_block(f.contents);
    EXPECT_EQ(b.transactions.size(), 2u);
    ASSERT_EQ(f.expected.size(), 1u);
    EXPECT_EQ(f.expected[0].vuln, VulnClass::TO);
}

TEST(Synthesize, PerfTraceShape)
{
    const ExecutionTrace t = synthesize_perf_trace(5000, 1);
    EXPECT_GE(t.steps.size(), 4500u);
    EXPECT_LE(t.steps.size(), 5000u);
    const ExtractionResult x = extract_facts(t);
    EXPECT_EQ(x.stack_checks, t.steps.size());
}

TEST(Fixtures, CheckedInCorpusIsRegenerable)
{
    const auto dir = scratch_dir("regen");
    write_corpus(dir, 1);
    const std::filesystem::path fixtures = TRACESCAN_FIXTURE_DIR;
    std::set<std::string> names, checked_in;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        names.insert(e.path().filename().string());
    for (const auto& e : std::filesystem::directory_iterator(fixtures))
        checked_in.insert(e.path().filename().string());
    EXPECT_EQ(names, checked_in);
    for (const auto& n : names)
        EXPECT_EQ(read_text(dir / n), read_text(fixtures / n)) << n;
    std::filesystem::remove_all(dir);
}

TEST(Fixtures, CliSynthMatchesLibrary)
{
    const auto dir = scratch_dir("cli-synth");
    const std::string cmd = std::string("\"") + TRACESCAN_CLI + "\" synth --out \"" + dir.string() + "\"";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    const std::filesystem::path fixtures = TRACESCAN_FIXTURE_DIR;
    for (const auto& e : std::filesystem::directory_iterator(fixtures))
        EXPECT_EQ(read_text(dir / e.path().filename()), read_text(e.path())) << e.path().filename();
    std::filesystem::remove_all(dir);
}

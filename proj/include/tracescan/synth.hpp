// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/detectors.hpp>
#include <tracescan/trace.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracescan
{
class UnknownPattern : public std::invalid_argument
{
public:
    explicit UnknownPattern(std::string_view id)
      : std::invalid_argument("unknown scenario pattern: " + std::string{id})
    {}
};

struct Scenario
{
    std::string pattern;
    uint64_t seed = 1;
    /// Overrides the pattern's headline amount (sent value, balance or endowment).
    std::optional<Wei> value;
};

struct SynthesizedFile
{
    std::string name;      ///< "<pattern>.trace.jsonl" or "<pattern>.block.jsonl"
    std::string contents;  ///< external trace/block format
    std::vector<Finding> expected;  ///< sorted by finding_less
    std::set<Address> executing;    ///< contracts whose code runs in the file
};

/// Fixture patterns, in corpus order.
const std::vector<std::string>& corpus_patterns();

/// Patterns whose expected findings are empty.
bool is_benign(std::string_view pattern);

/// Address for `role` within a pattern instance; never a precompile.
Address scenario_address(std::string_view pattern, uint64_t seed, std::string_view role);

SynthesizedFile synthesize(const Scenario& scenario);

/// Loop-heavy single transaction with roughly `steps` steps, for throughput runs.
ExecutionTrace synthesize_perf_trace(size_t steps, uint64_t seed = 1);

/// Sidecar body: one finding record per line.
std::string render_expected(const std::vector<Finding>& findings);

/// Writes every corpus pattern plus its sidecar, and SUMMARY.expected.jsonl with the
/// summary line the analyzer must produce over the whole directory.
void write_corpus(const std::filesystem::path& dir, uint64_t seed = 1);

}  // namespace tracescan

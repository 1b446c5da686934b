// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/report.hpp>
#include <tracescan/rules.hpp>
#include <tracescan/trace_builder.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace tracescan::testing
{
inline Address addr(uint64_t n) { return Address::from_word(Word{0x10000 + n}); }

inline TransactionContext make_tx(uint64_t block, uint64_t index, const Address& callee, const Wei& value = 0,
    std::map<Address, Wei> balances = {})
{
    TransactionContext tx;
    tx.block_number = block;
    tx.tx_index = index;
    tx.sender = addr(0xe0a);
    tx.callee = callee;
    tx.value = value;
    tx.pre_balances = std::move(balances);
    tx.pre_balances.try_emplace(callee, 0);
    return tx;
}

inline std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s)
{
    std::ofstream(p, std::ios::binary) << s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag)
{
    std::random_device rd;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("tracescan-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Serialize, parse and analyze, as the batch driver does for one file.
inline UnitResult analyze_text(const std::string& text, const VulnSet& vulns = VulnSet::all())
{
    if (looks_like_block(text))
        return analyze_block(parse_block(text), vulns, 5.0);
    return analyze_trace(parse_trace(text), vulns, 5.0);
}

inline UnitResult analyze(const ExecutionTrace& t, const VulnSet& vulns = VulnSet::all())
{
    return analyze_text(serialize_trace(t), vulns);
}

inline VulnSet only(VulnClass c)
{
    VulnSet s;
    s.add(c);
    return s;
}

/// Extraction plus production evaluation of one trace.
struct Evaluated
{
    ExtractionResult x;
    datalog::Database db;
};

inline Evaluated evaluate_trace(const ExecutionTrace& t, Catalog c = Catalog::production)
{
    ExtractionResult x = extract_facts(t);
    datalog::Database db = evaluate(x, c);
    return {std::move(x), std::move(db)};
}

}  // namespace tracescan::testing

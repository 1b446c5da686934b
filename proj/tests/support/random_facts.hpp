// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/rules.hpp>

#include <array>
#include <random>
#include <string_view>

namespace tracescan::testing
{
inline constexpr std::array<std::string_view, 17> kBaseRelations = {"is_output", "size", "is_signed",
    "in_condition", "call", "create", "expected_result", "actual_result", "call_result", "call_entry",
    "call_exit", "tx_sstore", "tx_sload", "caller", "load_data", "restricted_inst", "selfdestruct"};

/// Fills the base relations of `db` with at most `max_tuples` random tuples drawn
/// from small domains, so joins, cycles and guard hits are frequent.
inline size_t random_base_facts(datalog::Database& db, uint64_t seed, size_t max_tuples = 500)
{
    using datalog::ColumnType;
    std::mt19937_64 rng(seed);
    const auto pick = [&](uint64_t n) { return std::uniform_int_distribution<uint64_t>(0, n - 1)(rng); };
    const uint64_t values = 4 + pick(20);
    const size_t budget = pick(max_tuples + 1);

    auto& sym = db.symbols();
    const auto column = [&](std::string_view rel, ColumnType type, size_t col) -> datalog::Value {
        switch (type)
        {
        case ColumnType::Value:
            return pick(values);
        case ColumnType::Number:
            if (rel == "size")
                return std::array<uint64_t, 6>{8, 16, 32, 64, 128, 256}[pick(6)];
            if (rel == "call_result")
                return pick(3);
            if (rel == "tx_sstore" || rel == "tx_sload")
                return col == 0 ? 100 + pick(2) : pick(3);
            return pick(8);
        case ColumnType::Address:
            return sym.intern(Address::from_word(Word{1000 + pick(6)}));
        case ColumnType::Wei:
            return sym.intern(Wei{pick(3)});
        case ColumnType::BigInt:
            return sym.intern(BigInt{static_cast<int64_t>(pick(5)) - 2});
        case ColumnType::Key:
            return sym.intern(Word{pick(4)});
        }
        return 0;
    };

    size_t inserted = 0;
    for (size_t n = 0; n < budget; ++n)
    {
        const std::string_view rel = kBaseRelations[pick(kBaseRelations.size())];
        const auto& decl = db.schema().decl(db.schema().id(rel));
        datalog::Tuple t{};
        for (size_t c = 0; c < decl.columns.size(); ++c)
            t[c] = column(rel, decl.columns[c], c);
        inserted += db.relation(rel).insert(t) ? 1 : 0;
    }
    return inserted;
}

}  // namespace tracescan::testing

// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "memory_oracle.hpp"

#include <tracescan/memory_map.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace tracescan;
using namespace tracescan::testing;

TEST(MemoryMap, OverlappingWrites)
{
    MemoryMap m;
    m.write(0, 32, ValueId{1});
    m.write(16, 48, ValueId{2});
    EXPECT_EQ(m.owners(0, 16), std::vector<ValueId>{ValueId{1}});
    EXPECT_EQ(m.owners(0, 64), (std::vector<ValueId>{ValueId{1}, ValueId{2}}));
    EXPECT_EQ(m.owners(32, 48), std::vector<ValueId>{ValueId{2}});
    EXPECT_TRUE(m.owners(48, 64).empty());
    m.erase(0, 48);
    EXPECT_EQ(m.segments(), 0u);
}

TEST(MemoryMap, CopyMovesOwnership)
{
    MemoryMap m;
    m.write(0, 8, ValueId{5});
    m.copy(100, 4, 8);
    EXPECT_EQ(m.owners(100, 104), std::vector<ValueId>{ValueId{5}});
    EXPECT_TRUE(m.owners(104, 108).empty());
}

TEST(MemoryMap, AgreesWithByteOracle)
{
    constexpr uint64_t kSize = 256;
    for (uint64_t seed = 0; seed < 200; ++seed)
    {
        std::mt19937_64 rng(seed);
        const auto pick = [&](uint64_t n) { return std::uniform_int_distribution<uint64_t>(0, n - 1)(rng); };
        MemoryMap m;
        ByteMemory ref(kSize);
        for (int op = 0; op < 60; ++op)
        {
            const uint64_t len = pick(40);
            const uint64_t a = pick(kSize - len);
            const uint64_t b = pick(kSize - len);
            switch (pick(4))
            {
            case 0:
            case 1:
                m.write(a, a + len, ValueId{static_cast<uint64_t>(op)});
                ref.write(a, a + len, ValueId{static_cast<uint64_t>(op)});
                break;
            case 2:
                m.erase(a, a + len);
                ref.erase(a, a + len);
                break;
            default:
                m.copy(a, b, len);
                ref.copy(a, b, len);
                break;
            }
            const uint64_t qlen = pick(64);
            const uint64_t q = pick(kSize - qlen);
            ASSERT_EQ(m.owners(q, q + qlen), ref.owners(q, q + qlen)) << "seed " << seed << " op " << op;
        }
        ASSERT_EQ(m.owners(0, kSize), ref.owners(0, kSize));
    }
}

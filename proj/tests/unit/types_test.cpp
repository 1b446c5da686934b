// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/opcodes.hpp>
#include <tracescan/types.hpp>

#include <gtest/gtest.h>

using namespace tracescan;

TEST(Word, HexRoundTrip)
{
    const auto w = Word::from_hex("0x00ff");
    ASSERT_TRUE(w);
    EXPECT_EQ(w->low64(), 0xffu);
    EXPECT_EQ(w->to_hex(), "0xff");
    EXPECT_EQ(Word{}.to_hex(), "0x0");
    EXPECT_EQ(Word::max().to_hex(), "0x" + std::string(64, 'f'));
    EXPECT_FALSE(Word::from_hex("ff"));
    EXPECT_FALSE(Word::from_hex("0x"));
    EXPECT_FALSE(Word::from_hex("0x" + std::string(65, '1')));
    EXPECT_FALSE(Word::from_hex("0xzz"));
}

TEST(Word, BigIntWrapsModulo256Bits)
{
    const BigInt two256 = BigInt{1} << 256;
    EXPECT_EQ(Word::from_bigint(two256), Word{});
    EXPECT_EQ(Word::from_bigint(BigInt{-1}), Word::max());
    EXPECT_EQ(Word::max().to_bigint(), two256 - 1);
    EXPECT_FALSE(Word::from_decimal("115792089237316195423570985008687907853269984665640564039457584007913129639936"));
    EXPECT_EQ(*Word::from_decimal("255"), Word{255});
}

TEST(Word, OrderingIsNumeric)
{
    EXPECT_LT(Word{1}, Word::from_limbs(0, 1, 0, 0));
    EXPECT_LT(Word{2}, Word{3});
}

TEST(Address, CanonicalLowercaseRendering)
{
    const auto a = Address::from_hex("0xABCDEF");
    ASSERT_TRUE(a);
    EXPECT_EQ(a->to_hex(), "0x0000000000000000000000000000000000abcdef");
    EXPECT_EQ(Address::from_hex(a->to_hex()), a);
    EXPECT_FALSE(Address::from_hex("0x" + std::string(41, '1')));
    EXPECT_EQ(Address::from_word(a->to_word()), *a);
}

TEST(Address, PrecompileRange)
{
    EXPECT_FALSE(Address::from_word(Word{0}).is_precompile());
    EXPECT_TRUE(Address::from_word(Word{1}).is_precompile());
    EXPECT_TRUE(Address::from_word(Word{10}).is_precompile());
    EXPECT_FALSE(Address::from_word(Word{11}).is_precompile());
}

TEST(Wei, CheckedArithmetic)
{
    const Wei max = Word::max().to_wei();
    EXPECT_FALSE(checked_add(max, Wei{1}));
    EXPECT_FALSE(checked_sub(Wei{0}, Wei{1}));
    EXPECT_EQ(*checked_add(Wei{2}, Wei{3}), Wei{5});
    EXPECT_THROW({ Wei x = max; x += 1; }, std::overflow_error);
}

TEST(Wei, EtherConversion)
{
    EXPECT_EQ(to_string(ether("2.7")), "2700000000000000000");
    EXPECT_EQ(wei_to_ether_string(ether("2.7")), "2.7");
    EXPECT_EQ(wei_to_ether_string(ether("5")), "5");
    EXPECT_EQ(wei_to_ether_string(Wei{0}), "0");
    EXPECT_EQ(wei_to_ether_string(Wei{1}), "0.000000000000000001");
    EXPECT_EQ(parse_wei("12"), Wei{12});
    EXPECT_FALSE(parse_wei("-1"));
    EXPECT_FALSE(parse_wei("1.5"));
}

TEST(Opcodes, NamesRoundTrip)
{
    for (const char* n : {"ADD", "CALL", "DELEGATECALL", "PUSH1", "PUSH32", "DUP16", "SWAP1", "JUMPI", "SELFDESTRUCT"})
    {
        const auto op = opcode_from_name(n);
        ASSERT_TRUE(op) << n;
        EXPECT_EQ(name(*op), n);
    }
    EXPECT_FALSE(opcode_from_name("FROB"));
    EXPECT_EQ(dup_n(2), *opcode_from_name("DUP2"));
    EXPECT_EQ(swap_n(3), *opcode_from_name("SWAP3"));
    EXPECT_EQ(info(Opcode::CALL).pops, 7);
    EXPECT_EQ(info(Opcode::DELEGATECALL).pops, 6);
    EXPECT_TRUE(carries_value(Opcode::CALL));
    EXPECT_FALSE(carries_value(Opcode::STATICCALL));
}

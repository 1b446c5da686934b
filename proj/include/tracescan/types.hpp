// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace tracescan
{
/// Unbounded signed integer, used for expected/actual arithmetic results.
using BigInt = boost::multiprecision::cpp_int;

/// Monetary amount in wei. Arithmetic throws std::overflow_error / std::range_error
/// instead of wrapping.
using Wei = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<256, 256,
    boost::multiprecision::unsigned_magnitude, boost::multiprecision::checked, void>>;

inline constexpr std::string_view kWeiPerEther = "1000000000000000000";

/// A 256-bit EVM stack word. Limbs are little-endian (limb[0] is least significant).
struct Word
{
    std::array<uint64_t, 4> limb{};

    constexpr Word() = default;
    constexpr explicit Word(uint64_t v) noexcept : limb{v, 0, 0, 0} {}

    static Word max() noexcept { return from_limbs(~0ull, ~0ull, ~0ull, ~0ull); }
    static constexpr Word from_limbs(uint64_t l0, uint64_t l1, uint64_t l2, uint64_t l3) noexcept
    {
        Word w;
        w.limb = {l0, l1, l2, l3};
        return w;
    }

    /// Parses "0x"-prefixed hex with 1..64 digits. Returns nullopt on malformed input.
    static std::optional<Word> from_hex(std::string_view s) noexcept;
    /// Wraps modulo 2^256.
    static Word from_bigint(const BigInt& v);
    /// Parses an unsigned decimal string; nullopt if malformed or >= 2^256.
    static std::optional<Word> from_decimal(std::string_view s);

    /// Minimal lowercase hex rendering, "0x0" for zero.
    [[nodiscard]] std::string to_hex() const;
    [[nodiscard]] BigInt to_bigint() const;
    [[nodiscard]] Wei to_wei() const;

    [[nodiscard]] constexpr uint64_t low64() const noexcept { return limb[0]; }
    [[nodiscard]] constexpr bool fits_u64() const noexcept
    {
        return limb[1] == 0 && limb[2] == 0 && limb[3] == 0;
    }
    [[nodiscard]] constexpr bool is_zero() const noexcept
    {
        return fits_u64() && limb[0] == 0;
    }

    friend constexpr bool operator==(const Word&, const Word&) noexcept = default;
    friend constexpr std::strong_ordering operator<=>(const Word& a, const Word& b) noexcept
    {
        for (int i = 3; i >= 0; --i)
            if (a.limb[i] != b.limb[i])
                return a.limb[i] <=> b.limb[i];
        return std::strong_ordering::equal;
    }
};

/// 20-byte account identifier. Rendering is canonical lowercase "0x" + 40 hex digits.
struct Address
{
    std::array<uint8_t, 20> bytes{};

    /// Takes the low 160 bits of a stack word.
    static Address from_word(const Word& w) noexcept;
    /// Accepts "0x" followed by 1..40 hex digits (left-padded).
    static std::optional<Address> from_hex(std::string_view s) noexcept;

    [[nodiscard]] std::string to_hex() const;
    [[nodiscard]] Word to_word() const noexcept;
    /// Precompiled contracts live at addresses 1..10.
    [[nodiscard]] bool is_precompile() const noexcept;

    friend constexpr bool operator==(const Address&, const Address&) noexcept = default;
    friend constexpr auto operator<=>(const Address&, const Address&) noexcept = default;
};

std::optional<Wei> parse_wei(std::string_view decimal);
std::string to_string(const Wei& v);
std::string to_string(const BigInt& v);
/// Renders wei as ether with trailing zeros trimmed ("2.7", "5", "0").
std::string wei_to_ether_string(const Wei& v);
/// Exact conversion of a decimal ether amount ("2.7") to wei.
Wei ether(std::string_view decimal);

std::optional<Wei> checked_add(const Wei& a, const Wei& b) noexcept;
std::optional<Wei> checked_sub(const Wei& a, const Wei& b) noexcept;

struct WordHash
{
    size_t operator()(const Word& w) const noexcept
    {
        uint64_t h = 0x9e3779b97f4a7c15ull;
        for (auto l : w.limb)
            h = (h ^ l) * 0xff51afd7ed558ccdull;
        return static_cast<size_t>(h ^ (h >> 32));
    }
};

struct AddressHash
{
    size_t operator()(const Address& a) const noexcept
    {
        uint64_t h = 0xcbf29ce484222325ull;
        for (auto b : a.bytes)
            h = (h ^ b) * 0x100000001b3ull;
        return static_cast<size_t>(h);
    }
};

}  // namespace tracescan

template <>
struct std::hash<tracescan::Word> : tracescan::WordHash
{};
template <>
struct std::hash<tracescan::Address> : tracescan::AddressHash
{};

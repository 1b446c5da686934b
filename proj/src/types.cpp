// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/types.hpp>

namespace tracescan
{
namespace
{
constexpr int hex_digit(char c) noexcept
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    return -1;
}

constexpr char kHex[] = "0123456789abcdef";

const BigInt& two_pow_256()
{
    static const BigInt v = BigInt{1} << 256;
    return v;
}
}  // namespace

std::optional<Word> Word::from_hex(std::string_view s) noexcept
{
    if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X'))
        return std::nullopt;
    s.remove_prefix(2);
    if (s.size() > 64)
        return std::nullopt;
    Word w;
    unsigned shift = 0;
    for (size_t i = s.size(); i-- > 0;)
    {
        const int d = hex_digit(s[i]);
        if (d < 0)
            return std::nullopt;
        w.limb[shift / 64] |= static_cast<uint64_t>(d) << (shift % 64);
        shift += 4;
    }
    return w;
}

Word Word::from_bigint(const BigInt& v)
{
    BigInt m = v % two_pow_256();
    if (m < 0)
        m += two_pow_256();
    Word w;
    for (auto& l : w.limb)
    {
        l = static_cast<uint64_t>(m & BigInt{~0ull});
        m >>= 64;
    }
    return w;
}

std::optional<Word> Word::from_decimal(std::string_view s)
{
    if (s.empty() || s.size() > 78)
        return std::nullopt;
    BigInt v = 0;
    for (char c : s)
    {
        if (c < '0' || c > '9')
            return std::nullopt;
        v = v * 10 + (c - '0');
    }
    if (v >= two_pow_256())
        return std::nullopt;
    return from_bigint(v);
}

std::string Word::to_hex() const
{
    std::string out = "0x";
    bool leading = true;
    for (int i = 63; i >= 0; --i)
    {
        const auto d = (limb[static_cast<size_t>(i) / 16] >> ((i % 16) * 4)) & 0xf;
        if (leading && d == 0 && i != 0)
            continue;
        leading = false;
        out.push_back(kHex[d]);
    }
    return out;
}

BigInt Word::to_bigint() const
{
    BigInt v = 0;
    for (int i = 3; i >= 0; --i)
    {
        v <<= 64;
        v |= limb[static_cast<size_t>(i)];
    }
    return v;
}

Wei Word::to_wei() const
{
    Wei v = 0;
    for (int i = 3; i >= 0; --i)
    {
        v <<= 64;
        v |= limb[static_cast<size_t>(i)];
    }
    return v;
}

Address Address::from_word(const Word& w) noexcept
{
    Address a;
    for (size_t i = 0; i < 20; ++i)
    {
        const size_t bit = (19 - i) * 8;
        a.bytes[i] = static_cast<uint8_t>(w.limb[bit / 64] >> (bit % 64));
    }
    return a;
}

std::optional<Address> Address::from_hex(std::string_view s) noexcept
{
    if (s.size() < 3 || s.size() > 42)
        return std::nullopt;
    const auto w = Word::from_hex(s);
    if (!w)
        return std::nullopt;
    return from_word(*w);
}

std::string Address::to_hex() const
{
    std::string out = "0x";
    out.reserve(42);
    for (auto b : bytes)
    {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xf]);
    }
    return out;
}

Word Address::to_word() const noexcept
{
    Word w;
    for (size_t i = 0; i < 20; ++i)
    {
        const size_t bit = (19 - i) * 8;
        w.limb[bit / 64] |= static_cast<uint64_t>(bytes[i]) << (bit % 64);
    }
    return w;
}

bool Address::is_precompile() const noexcept
{
    for (size_t i = 0; i < 19; ++i)
        if (bytes[i] != 0)
            return false;
    return bytes[19] >= 1 && bytes[19] <= 10;
}

std::optional<Wei> parse_wei(std::string_view decimal)
{
    const auto w = Word::from_decimal(decimal);
    if (!w)
        return std::nullopt;
    return w->to_wei();
}

std::string to_string(const Wei& v)
{
    return v.str();
}

std::string to_string(const BigInt& v)
{
    return v.str();
}

std::string wei_to_ether_string(const Wei& v)
{
    const Wei unit{std::string{kWeiPerEther}};
    std::string whole = Wei{v / unit}.str();
    std::string frac = Wei{v % unit}.str();
    if (frac == "0")
        return whole;
    frac.insert(0, 18 - frac.size(), '0');
    while (!frac.empty() && frac.back() == '0')
        frac.pop_back();
    return whole + "." + frac;
}

Wei ether(std::string_view decimal)
{
    const auto dot = decimal.find('.');
    std::string whole{decimal.substr(0, dot)};
    std::string frac = dot == std::string_view::npos ? "" : std::string{decimal.substr(dot + 1)};
    if (frac.size() > 18)
        throw std::invalid_argument("ether amount has more than 18 decimals");
    frac.append(18 - frac.size(), '0');
    const auto digits = (whole.empty() ? std::string{"0"} : whole) + frac;
    auto v = parse_wei(digits);
    if (!v)
        throw std::invalid_argument("invalid ether amount: " + std::string{decimal});
    return *v;
}

std::optional<Wei> checked_add(const Wei& a, const Wei& b) noexcept
{
    try
    {
        return Wei{a + b};
    }
    catch (const std::exception&)
    {
        return std::nullopt;
    }
}

std::optional<Wei> checked_sub(const Wei& a, const Wei& b) noexcept
{
    if (b > a)
        return std::nullopt;
    return Wei{a - b};
}

}  // namespace tracescan

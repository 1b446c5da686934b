// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/facts.hpp>

#include <algorithm>
#include <optional>
#include <vector>

namespace tracescan::testing
{
/// One owner slot per byte over a small address range.
class ByteMemory
{
public:
    explicit ByteMemory(size_t bytes) : owner_(bytes) {}

    void write(uint64_t begin, uint64_t end, ValueId v)
    {
        for (uint64_t i = begin; i < end; ++i)
            owner_.at(i) = v;
    }
    void erase(uint64_t begin, uint64_t end)
    {
        for (uint64_t i = begin; i < end; ++i)
            owner_.at(i).reset();
    }
    void copy(uint64_t dst, uint64_t src, uint64_t len)
    {
        const std::vector<std::optional<ValueId>> tmp(owner_.begin() + src, owner_.begin() + src + len);
        std::copy(tmp.begin(), tmp.end(), owner_.begin() + dst);
    }
    [[nodiscard]] std::vector<ValueId> owners(uint64_t begin, uint64_t end) const
    {
        std::vector<ValueId> out;
        for (uint64_t i = begin; i < end; ++i)
            if (owner_.at(i) && std::find(out.begin(), out.end(), *owner_[i]) == out.end())
                out.push_back(*owner_[i]);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::vector<std::optional<ValueId>> owner_;
};

}  // namespace tracescan::testing

// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/facts.hpp>

#include <cstdint>
#include <map>
#include <vector>

namespace tracescan
{
/// Byte-interval ownership map for one frame's memory: which value last wrote
/// each byte. Intervals are half-open and never overlap.
class MemoryMap
{
public:
    /// Offsets beyond this are treated as unreachable (the access would run out of gas).
    static constexpr uint64_t kLimit = uint64_t{1} << 40;

    void write(uint64_t begin, uint64_t end, ValueId owner);
    void erase(uint64_t begin, uint64_t end);
    /// Moves ownership of [src, src+len) to [dst, dst+len), as MCOPY does.
    void copy(uint64_t dst, uint64_t src, uint64_t len);
    /// Distinct owners of bytes in [begin, end), ascending.
    [[nodiscard]] std::vector<ValueId> owners(uint64_t begin, uint64_t end) const;

    [[nodiscard]] size_t segments() const noexcept { return map_.size(); }

private:
    struct Segment
    {
        uint64_t end;
        ValueId owner;
    };
    std::map<uint64_t, Segment> map_;
};

}  // namespace tracescan

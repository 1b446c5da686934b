// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/memory_map.hpp>

#include <algorithm>

namespace tracescan
{
void MemoryMap::erase(uint64_t begin, uint64_t end)
{
    if (begin >= end)
        return;
    auto it = map_.lower_bound(begin);
    if (it != map_.begin())
    {
        auto prev = std::prev(it);
        if (prev->second.end > begin)
        {
            const Segment tail = prev->second;
            prev->second.end = begin;
            if (tail.end > end)
                map_.emplace(end, Segment{tail.end, tail.owner});
        }
    }
    it = map_.lower_bound(begin);
    while (it != map_.end() && it->first < end)
    {
        if (it->second.end > end)
        {
            const Segment tail = it->second;
            map_.erase(it);
            map_.emplace(end, tail);
            break;
        }
        it = map_.erase(it);
    }
}

void MemoryMap::write(uint64_t begin, uint64_t end, ValueId owner)
{
    if (begin >= end)
        return;
    erase(begin, end);
    map_.emplace(begin, Segment{end, owner});
}

void MemoryMap::copy(uint64_t dst, uint64_t src, uint64_t len)
{
    if (len == 0 || dst == src)
        return;
    struct Piece
    {
        uint64_t begin, end;
        ValueId owner;
    };
    std::vector<Piece> pieces;
    const uint64_t src_end = src + len;
    auto it = map_.upper_bound(src);
    if (it != map_.begin())
        --it;
    for (; it != map_.end() && it->first < src_end; ++it)
    {
        const uint64_t b = std::max(it->first, src);
        const uint64_t e = std::min(it->second.end, src_end);
        if (b < e)
            pieces.push_back({b - src + dst, e - src + dst, it->second.owner});
    }
    erase(dst, dst + len);
    for (const auto& p : pieces)
        map_.emplace(p.begin, Segment{p.end, p.owner});
}

std::vector<ValueId> MemoryMap::owners(uint64_t begin, uint64_t end) const
{
    std::vector<ValueId> out;
    if (begin >= end)
        return out;
    auto it = map_.upper_bound(begin);
    if (it != map_.begin())
        --it;
    for (; it != map_.end() && it->first < end; ++it)
        if (it->second.end > begin)
            out.push_back(it->second.owner);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace tracescan

// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>

namespace tracescan
{
class TimeoutError : public std::runtime_error
{
public:
    TimeoutError() : std::runtime_error("per-transaction timeout exceeded") {}
};

/// Cooperative time budget; long-running loops poll `check()`.
class Deadline
{
public:
    using Clock = std::chrono::steady_clock;

    Deadline() = default;

    static Deadline after(std::chrono::duration<double> budget)
    {
        Deadline d;
        d.end_ = Clock::now() + std::chrono::duration_cast<Clock::duration>(budget);
        return d;
    }

    [[nodiscard]] bool expired() const noexcept { return end_ && Clock::now() >= *end_; }

    void check() const
    {
        if (expired())
            throw TimeoutError();
    }

private:
    std::optional<Clock::time_point> end_;
};

}  // namespace tracescan

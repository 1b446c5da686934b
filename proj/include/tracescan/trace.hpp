// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/opcodes.hpp>
#include <tracescan/types.hpp>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracescan
{
inline constexpr size_t kMaxStackDepth = 1024;

/// One executed instruction. `stack` is the operand stack *before* the instruction
/// executes, top of stack last.
struct TraceStep
{
    uint64_t pc = 0;
    Opcode op = Opcode::STOP;
    uint32_t depth = 1;
    uint64_t gas = 0;
    std::vector<Word> stack;
    /// Set on the last step of frames that abort and drop the depth by more than one.
    bool frame_exit = false;

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

enum class TxStatus : uint8_t
{
    success,
    reverted
};

struct TransactionContext
{
    uint64_t block_number = 0;
    uint64_t tx_index = 0;
    Address sender;
    Address callee;
    Wei value = 0;
    std::map<Address, Wei> pre_balances;
    TxStatus status = TxStatus::success;

    friend bool operator==(const TransactionContext&, const TransactionContext&) = default;
};

struct ExecutionTrace
{
    TransactionContext tx;
    std::vector<TraceStep> steps;

    friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

struct BlockContext
{
    uint64_t block_number = 0;
    /// Sorted by tx_index, indices distinct.
    std::vector<ExecutionTrace> transactions;
};

/// Typed parse failure. Every malformed input produces exactly one of these.
class TraceError : public std::runtime_error
{
public:
    enum class Kind
    {
        MalformedTrace,
        SchemaViolation,
        DepthJump,
        MixedBlocks,
        DuplicateTxIndex,
    };

    TraceError(Kind kind, const std::string& what) : std::runtime_error(what), kind_{kind} {}

    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

std::string_view to_string(TraceError::Kind kind) noexcept;

ExecutionTrace parse_trace(std::string_view contents);
BlockContext parse_block(std::string_view contents);

std::string serialize_trace(const ExecutionTrace& trace);
std::string serialize_block(const BlockContext& block);

/// True when the file's metadata line describes a block rather than a single transaction.
bool looks_like_block(std::string_view contents);

}  // namespace tracescan

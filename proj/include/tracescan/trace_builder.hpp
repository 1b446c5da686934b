// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/facts.hpp>
#include <tracescan/trace.hpp>

#include <map>
#include <set>
#include <vector>

namespace tracescan
{
/// Emits schema-valid traces by executing a small subset of EVM semantics on concrete
/// stacks. Every pushed value also gets the ordinal the fact extractor will assign,
/// so callers can name values in expected evidence.
class TraceBuilder
{
public:
    explicit TraceBuilder(TransactionContext tx, std::vector<uint8_t> calldata = {});

    /// Calldata made of consecutive 32-byte words.
    static std::vector<uint8_t> words(const std::vector<Word>& ws);

    [[nodiscard]] uint64_t pc() const noexcept { return frame().pc; }
    /// Sets the pc of the next instruction.
    TraceBuilder& at(uint64_t pc);
    [[nodiscard]] uint32_t depth() const noexcept { return static_cast<uint32_t>(frames_.size()); }
    [[nodiscard]] size_t steps() const noexcept { return trace_.steps.size(); }
    [[nodiscard]] const Address& self() const noexcept { return frame().self; }
    [[nodiscard]] uint64_t pc_of(size_t step) const { return trace_.steps.at(step).pc; }

    /// Storage contents the transaction starts from.
    void preset_storage(const Address& account, const Word& key, const Word& value)
    {
        storage_[account][key] = value;
    }

    /// PUSHn with the smallest n that fits (PUSH1 for zero), or exactly `bytes` bytes.
    size_t push(const Word& w, int bytes = 0);
    size_t push(uint64_t v) { return push(Word{v}); }
    size_t push(const Address& a) { return push(a.to_word(), 20); }

    /// Executes a non-call, non-terminal instruction. Returns the step index.
    size_t op(Opcode op);

    enum class Enter
    {
        frame,     ///< callee code runs; finish it with `ret`
        succeed,   ///< no frame (account without code); pushes 1
        fail,      ///< no frame (e.g. insufficient balance); pushes 0
    };

    /// Emits the call-like instruction whose operands are already on the stack.
    /// `created` is the address a CREATE/CREATE2 yields.
    size_t call_prepared(Opcode op, Enter how, std::optional<Address> created = std::nullopt);

    struct Region
    {
        uint64_t offset;
        uint64_t size;
    };

    /// Pushes the standard operands of `op` and emits the call.
    size_t call(Opcode op, const Address& target, const Wei& value, Enter how, Region args = {},
        Region ret = {}, uint64_t gas = 50000);

    /// CREATE with a fixed resulting address (the trace cannot recompute it).
    size_t create(const Wei& value, const Address& created, Region init = {0, 0});

    /// Terminates the current frame with STOP/RETURN/REVERT/INVALID/SELFDESTRUCT and
    /// resumes the caller (RETURN/REVERT operands must already be on the stack).
    size_t ret(Opcode exit = Opcode::STOP);

    /// Ends the transaction at depth 1 (STOP/RETURN/REVERT/SELFDESTRUCT).
    size_t end(Opcode exit = Opcode::STOP);

    /// Concrete top of stack and its value ordinal.
    [[nodiscard]] const Word& top(size_t k = 0) const;
    [[nodiscard]] ValueId top_id(size_t k = 0) const;
    [[nodiscard]] ValueId last_value() const;
    [[nodiscard]] uint64_t value_count() const noexcept { return next_value_; }

    [[nodiscard]] const std::set<Address>& executing() const noexcept { return executing_; }
    [[nodiscard]] const TransactionContext& tx() const noexcept { return trace_.tx; }
    TransactionContext& tx() noexcept { return trace_.tx; }

    ExecutionTrace finish() &&;

    /// Deterministic placeholder for SHA3 output over `data`.
    static Word digest(const std::vector<uint8_t>& data);

private:
    struct Entry
    {
        Word word;
        ValueId id;
    };
    struct Frame
    {
        Address self;
        Address caller;
        Wei value = 0;
        std::vector<uint8_t> calldata;
        std::vector<Entry> stack;
        std::vector<uint8_t> memory;
        uint64_t pc = 0;
        uint64_t gas = 0;
        size_t call_step = 0;
        Opcode call_op = Opcode::CALL;
        std::optional<Address> created;
        Region ret_region{};
    };

    Frame& frame() noexcept { return frames_.back(); }
    const Frame& frame() const noexcept { return frames_.back(); }
    size_t record(Opcode op);
    Entry pop();
    void push_value(const Word& w);
    void advance(uint64_t next_pc);
    std::vector<uint8_t> read_memory(uint64_t offset, uint64_t size);
    void write_memory(uint64_t offset, const uint8_t* data, uint64_t size);

    ExecutionTrace trace_;
    std::vector<Frame> frames_;
    std::map<Address, std::map<Word, Word>> storage_;
    std::set<Address> executing_;
    uint64_t next_value_ = 0;
    bool finished_ = false;
};

}  // namespace tracescan

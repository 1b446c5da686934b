// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/deadline.hpp>
#include <tracescan/trace.hpp>

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tracescan
{
/// Identity of one value produced on the stack (or staged in memory) during replay.
/// Ordinals are allocated in creation order, so `a < b` iff `a` was created first.
struct ValueId
{
    uint64_t ordinal = 0;

    friend constexpr auto operator<=>(const ValueId&, const ValueId&) noexcept = default;
};

inline constexpr std::array<uint32_t, 6> kIntegerWidths = {8, 16, 32, 64, 128, 256};

/// Set-semantics relation. Inserts are buffered; `seal()` sorts and removes
/// duplicates, after which iteration is in ascending order and `contains` works.
template <class T>
class FactSet
{
public:
    void insert(T v) { items_.push_back(std::move(v)); sealed_ = false; }

    void seal()
    {
        if (sealed_)
            return;
        std::sort(items_.begin(), items_.end());
        items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
        sealed_ = true;
    }

    [[nodiscard]] bool contains(const T& v) const
    {
        if (!sealed_)
            return std::find(items_.begin(), items_.end(), v) != items_.end();
        return std::binary_search(items_.begin(), items_.end(), v);
    }

    [[nodiscard]] size_t size() const noexcept { return items_.size(); }
    [[nodiscard]] bool empty() const noexcept { return items_.empty(); }
    [[nodiscard]] bool sealed() const noexcept { return sealed_; }
    [[nodiscard]] auto begin() const noexcept { return items_.begin(); }
    [[nodiscard]] auto end() const noexcept { return items_.end(); }

    friend bool operator==(const FactSet& a, const FactSet& b) { return a.items_ == b.items_; }

private:
    std::vector<T> items_;
    bool sealed_ = true;
};

struct TransferFact
{
    Address from;
    Address to;
    Wei value = 0;

    friend bool operator==(const TransferFact&, const TransferFact&) = default;
    friend bool operator<(const TransferFact& a, const TransferFact& b)
    {
        if (a.from != b.from)
            return a.from < b.from;
        if (a.to != b.to)
            return a.to < b.to;
        return a.value < b.value;
    }
};

struct StorageFact
{
    uint64_t block = 0;
    uint64_t tx = 0;
    Word key;

    friend auto operator<=>(const StorageFact&, const StorageFact&) = default;
};

/// The base relations of the analysis, one member per fact kind.
struct FactDB
{
    FactSet<std::pair<ValueId, ValueId>> is_output;  ///< (output, input)
    FactSet<std::pair<ValueId, uint32_t>> size;      ///< bit width
    FactSet<ValueId> is_signed;
    FactSet<ValueId> in_condition;
    FactSet<TransferFact> call;
    FactSet<TransferFact> create;
    FactSet<std::pair<ValueId, BigInt>> expected_result;
    FactSet<std::pair<ValueId, BigInt>> actual_result;
    FactSet<std::pair<ValueId, uint64_t>> call_result;
    FactSet<std::pair<uint64_t, Address>> call_entry;
    FactSet<uint64_t> call_exit;
    FactSet<StorageFact> tx_sstore;
    FactSet<StorageFact> tx_sload;
    FactSet<std::pair<ValueId, Address>> caller;
    FactSet<ValueId> load_data;
    FactSet<ValueId> restricted_inst;
    FactSet<ValueId> selfdestruct;

    void seal();
    [[nodiscard]] size_t total() const noexcept;
    [[nodiscard]] bool empty() const noexcept { return total() == 0; }

    friend bool operator==(const FactDB&, const FactDB&) = default;
};

/// Writes one tab-separated file per relation (`<name>.facts`) into `dir`.
void dump_facts(const FactDB& db, const std::filesystem::path& dir);

class ReplayError : public std::runtime_error
{
public:
    enum class Kind
    {
        StackMismatch,
        ArityError,
        UnmatchedReturn,
    };

    ReplayError(Kind kind, const std::string& what) : std::runtime_error(what), kind_{kind} {}
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

std::string_view to_string(ReplayError::Kind kind) noexcept;

/// A call-like instruction observed during replay.
struct CallSite
{
    size_t step = 0;
    uint64_t pc = 0;
    Opcode op = Opcode::CALL;
    uint32_t depth = 1;
    Address self;    ///< executing contract at the call
    Address target;  ///< callee, or created address for CREATE/CREATE2 (zero if unknown)
    Wei value = 0;
    std::vector<ValueId> operands;  ///< top of stack first
    bool entered_frame = false;
    bool completed = false;  ///< control came back to the calling frame
    size_t return_step = 0;
    uint64_t exit_pc = 0;
    Word result;
    std::optional<ValueId> result_value;

    [[nodiscard]] bool failed() const noexcept { return completed && result.is_zero(); }
};

/// ADD/SUB/MUL/DIV/EXP with its operands (lhs is the top of stack).
struct ArithmeticSite
{
    size_t step = 0;
    uint64_t pc = 0;
    Opcode op = Opcode::ADD;
    Address self;
    ValueId result;
    ValueId lhs;
    ValueId rhs;
    Word lhs_word;
    Word rhs_word;
    Word result_word;
};

/// A value consumed by a restricted instruction or SELFDESTRUCT.
struct SensitiveUse
{
    ValueId value;
    size_t step = 0;
    uint64_t pc = 0;
    Opcode op = Opcode::SSTORE;
    Address self;
    std::optional<Address> target;  ///< call target or selfdestruct beneficiary
};

struct StorageAccess
{
    size_t step = 0;
    uint64_t pc = 0;
    bool write = false;
    Address self;
    Word key;
};

/// Value-transfer journal mirroring the EVM's checkpoint/commit/rollback.
struct LedgerEvent
{
    enum class Kind : uint8_t
    {
        Credit,        ///< top-level transaction value
        Checkpoint,    ///< a call frame opens
        Transfer,      ///< from -> to, skipped when `from` lacks funds
        Commit,        ///< innermost open checkpoint succeeded
        Rollback,      ///< innermost open checkpoint failed; undo its transfers
        SelfDestruct,  ///< from's entire balance moves to `to`
    };
    Kind kind = Kind::Credit;
    size_t step = 0;
    Address from;
    Address to;
    Wei value = 0;
};

struct ValueOrigin
{
    uint64_t pc = 0;
    Opcode op = Opcode::STOP;
};

struct ExtractionResult
{
    FactDB facts;
    std::vector<CallSite> calls;
    std::vector<ArithmeticSite> arithmetic;
    std::vector<SensitiveUse> sensitive;
    std::vector<StorageAccess> storage;
    std::vector<LedgerEvent> ledger;
    std::vector<ValueOrigin> values;  ///< indexed by ordinal
    std::set<Address> executing;      ///< contracts whose code ran (by self address)
    size_t stack_checks = 0;          ///< steps whose shadow/concrete lengths were compared
    bool ended_inside_frame = false;  ///< trace ended at depth > 1
};

struct ExtractOptions
{
    Deadline deadline;
};

/// Replays a trace through a shadow stack machine and emits the base facts
/// (everything except expected_result/actual_result, which need inferred types).
ExtractionResult extract_facts(const ExecutionTrace& trace, const ExtractOptions& options = {});

/// Width/sign knowledge per value, as derived by the type rules.
struct InferredTypes
{
    std::vector<uint16_t> min_size;  ///< 0 = no inferred size; indexed by ordinal
    std::vector<uint8_t> is_signed;

    [[nodiscard]] uint32_t size_of(ValueId v) const noexcept
    {
        return v.ordinal < min_size.size() ? min_size[v.ordinal] : 0;
    }
    [[nodiscard]] bool signed_(ValueId v) const noexcept
    {
        return v.ordinal < is_signed.size() && is_signed[v.ordinal] != 0;
    }
};

struct ArithmeticOutcome
{
    BigInt expected;
    BigInt actual;
    uint32_t width = 256;
    bool is_signed = false;
};

/// Bit width for an AND mask of the form 16^n - 1 with n a power of two in [2, 64].
std::optional<uint32_t> mask_width(const Word& mask) noexcept;

/// Exact result of `op` on operands reinterpreted at (width, signedness), and the
/// machine result reinterpreted the same way.
ArithmeticOutcome evaluate_arithmetic(Opcode op, const Word& lhs, const Word& rhs,
    const Word& result, uint32_t width, bool is_signed);

/// Type of an operation from its operands: widest operand that has an inferred size
/// (256 if none), signed if any operand is signed.
std::pair<uint32_t, bool> operation_type(const InferredTypes& types, ValueId lhs, ValueId rhs);

/// Second pass: adds expected_result/actual_result for every arithmetic site.
void compute_arithmetic_expectations(ExtractionResult& result, const InferredTypes& types);

}  // namespace tracescan

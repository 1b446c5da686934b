// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/datalog.hpp>
#include <tracescan/facts.hpp>
#include <tracescan/trace.hpp>

#include <array>
#include <bitset>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tracescan
{
enum class VulnClass : uint8_t
{
    RE,
    UE,
    LE,
    TO,
    IO,
    UA,
};

inline constexpr std::array<VulnClass, 6> kAllClasses = {
    VulnClass::RE, VulnClass::UE, VulnClass::LE, VulnClass::TO, VulnClass::IO, VulnClass::UA};

std::string_view to_string(VulnClass c) noexcept;
/// Accepts "re", "RE", ... .
std::optional<VulnClass> parse_vuln_class(std::string_view s) noexcept;

/// Subset of classes to run.
class VulnSet
{
public:
    static VulnSet all() noexcept
    {
        VulnSet s;
        s.bits_.set();
        return s;
    }
    void add(VulnClass c) noexcept { bits_.set(static_cast<size_t>(c)); }
    [[nodiscard]] bool has(VulnClass c) const noexcept { return bits_.test(static_cast<size_t>(c)); }
    [[nodiscard]] bool empty() const noexcept { return bits_.none(); }

private:
    std::bitset<6> bits_;
};

struct Finding
{
    VulnClass vuln = VulnClass::RE;
    uint64_t block = 0;
    std::vector<uint64_t> tx_indices;  ///< one entry, or every involved transaction for TO
    Address subject;
    std::optional<Address> counterparty;
    uint64_t pc = 0;
    Wei ether_at_risk = 0;
    /// Findings sharing a scope describe the same Ether; accounting takes their maximum.
    std::string risk_scope;
    std::optional<std::string> detail;
    std::vector<std::vector<std::string>> evidence;

    friend bool operator==(const Finding&, const Finding&) = default;
};

/// Report order: block, txIndex, class, subject, pc, counterparty, evidence.
bool finding_less(const Finding& a, const Finding& b);

/// Balances over the course of one transaction, replaying the value ledger with
/// checkpoint/rollback semantics on top of the pre-state.
class BalanceTracker
{
public:
    BalanceTracker(const TransactionContext& tx, const std::vector<LedgerEvent>& ledger);

    /// Balance of `account` just before step `step` executed.
    [[nodiscard]] Wei balance_before(size_t step, const Address& account) const;

private:
    std::map<Address, Wei> pre_;
    std::map<Address, std::vector<std::pair<size_t, Wei>>> history_;
};

/// Saturates at 2^256-1 instead of throwing.
Wei saturating_add(const Wei& a, const Wei& b) noexcept;

/// Everything the per-transaction detectors read.
struct TxFacts
{
    const TransactionContext& tx;
    const ExtractionResult& extraction;
    const datalog::Database& db;
};

/// Value moved by the transaction: its own value plus every value-bearing CALL/CREATE
/// that did not report failure.
Wei ether_moved(const TransactionContext& tx, const ExtractionResult& extraction);

std::vector<Finding> detect_reentrancy(const TxFacts& t);
std::vector<Finding> detect_unhandled_exceptions(const TxFacts& t);
std::vector<Finding> detect_locked_ether(const TxFacts& t);
std::vector<Finding> detect_integer_overflow(const TxFacts& t);
std::vector<Finding> detect_unrestricted_action(const TxFacts& t);

/// Runs the selected single-transaction detectors.
std::vector<Finding> detect_transaction(const TxFacts& t, const VulnSet& classes);

/// Cross-transaction storage conflicts within one block, grouped by executing contract.
std::vector<Finding> detect_tod(const std::vector<TxFacts>& block);

struct ClassTotals
{
    size_t contracts = 0;
    Wei ether = 0;
};

struct RiskAccount
{
    std::array<ClassTotals, 6> per_class{};
    ClassTotals total;  ///< contracts deduplicated across classes

    [[nodiscard]] const ClassTotals& operator[](VulnClass c) const noexcept
    {
        return per_class[static_cast<size_t>(c)];
    }
};

RiskAccount aggregate(const std::vector<Finding>& findings);

}  // namespace tracescan

// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/detectors.hpp>
#include <tracescan/rules.hpp>

#include <algorithm>
#include <cctype>
#include <limits>

namespace tracescan
{
using datalog::Database;
using datalog::Tuple;

std::string_view to_string(VulnClass c) noexcept
{
    static constexpr std::array<std::string_view, 6> names = {"RE", "UE", "LE", "TO", "IO", "UA"};
    return names[static_cast<size_t>(c)];
}

std::optional<VulnClass> parse_vuln_class(std::string_view s) noexcept
{
    for (const VulnClass c : kAllClasses)
    {
        const auto n = to_string(c);
        if (s.size() == 2 && (s == n || (std::tolower(n[0]) == s[0] && std::tolower(n[1]) == s[1])))
            return c;
    }
    return std::nullopt;
}

bool finding_less(const Finding& a, const Finding& b)
{
    if (a.block != b.block)
        return a.block < b.block;
    if (a.tx_indices != b.tx_indices)
        return a.tx_indices < b.tx_indices;
    if (a.vuln != b.vuln)
        return a.vuln < b.vuln;
    if (a.subject != b.subject)
        return a.subject < b.subject;
    if (a.pc != b.pc)
        return a.pc < b.pc;
    if (a.counterparty != b.counterparty)
        return a.counterparty < b.counterparty;
    return a.evidence < b.evidence;
}

Wei saturating_add(const Wei& a, const Wei& b) noexcept
{
    if (auto s = checked_add(a, b))
        return *s;
    return std::numeric_limits<Wei>::max();
}

BalanceTracker::BalanceTracker(const TransactionContext& tx, const std::vector<LedgerEvent>& ledger)
  : pre_{tx.pre_balances}
{
    std::map<Address, Wei> bal = pre_;
    struct Undo
    {
        Address account;
        Wei previous;
    };
    std::vector<std::vector<Undo>> journal(1);

    const auto set = [&](const Address& a, const Wei& v, size_t step, bool record_undo) {
        Wei& cur = bal[a];
        if (record_undo)
            journal.back().push_back({a, cur});
        cur = v;
        history_[a].emplace_back(step, v);
    };
    const auto move = [&](const Address& from, const Address& to, const Wei& value, size_t step) {
        if (from == to || value == 0)
            return;
        const Wei have = bal[from];
        if (have < value)
            return;
        set(from, have - value, step, true);
        set(to, saturating_add(bal[to], value), step, true);
    };

    for (const LedgerEvent& e : ledger)
    {
        switch (e.kind)
        {
        case LedgerEvent::Kind::Credit:
            // The sender's pre-balance already excludes the value it pays.
            set(e.to, saturating_add(bal[e.to], e.value), e.step, false);
            break;
        case LedgerEvent::Kind::Checkpoint:
            journal.emplace_back();
            break;
        case LedgerEvent::Kind::Transfer:
            move(e.from, e.to, e.value, e.step);
            break;
        case LedgerEvent::Kind::SelfDestruct:
        {
            const Wei all = bal[e.from];
            if (e.from == e.to)
                set(e.from, 0, e.step, true);
            else
                move(e.from, e.to, all, e.step);
            break;
        }
        case LedgerEvent::Kind::Commit:
            if (journal.size() > 1)
            {
                auto top = std::move(journal.back());
                journal.pop_back();
                journal.back().insert(journal.back().end(), top.begin(), top.end());
            }
            break;
        case LedgerEvent::Kind::Rollback:
            if (journal.size() > 1)
            {
                auto top = std::move(journal.back());
                journal.pop_back();
                for (auto it = top.rbegin(); it != top.rend(); ++it)
                    set(it->account, it->previous, e.step, false);
            }
            break;
        }
    }
}

Wei BalanceTracker::balance_before(size_t step, const Address& account) const
{
    if (const auto h = history_.find(account); h != history_.end())
    {
        const auto& entries = h->second;
        auto it = std::lower_bound(entries.begin(), entries.end(), step,
            [](const std::pair<size_t, Wei>& e, size_t s) { return e.first < s; });
        if (it != entries.begin())
            return std::prev(it)->second;
    }
    const auto p = pre_.find(account);
    return p == pre_.end() ? Wei{0} : p->second;
}

namespace
{
bool moves_value_to_target(Opcode op) noexcept
{
    return op == Opcode::CALL || is_create(op);
}

std::vector<std::string> render_row(const Database& db, std::string_view relation, const Tuple& t)
{
    const auto& decl = db.schema().decl(db.schema().id(relation));
    std::vector<std::string> row;
    for (size_t c = 0; c < decl.columns.size(); ++c)
        row.push_back(db.symbols().render(decl.columns[c], t[c]));
    return row;
}

std::string scope(VulnClass c, const TransactionContext& tx, const std::string& suffix)
{
    return std::string(to_string(c)) + ":" + std::to_string(tx.block_number) + ":" +
           std::to_string(tx.tx_index) + (suffix.empty() ? "" : ":" + suffix);
}

Finding base_finding(VulnClass c, const TransactionContext& tx)
{
    Finding f;
    f.vuln = c;
    f.block = tx.block_number;
    f.tx_indices = {tx.tx_index};
    return f;
}

/// Step at which each contract first started executing as `self`.
std::map<Address, size_t> first_entry(const TransactionContext& tx, const ExtractionResult& x)
{
    std::map<Address, size_t> entered;
    entered.emplace(tx.callee, 0);
    for (const CallSite& c : x.calls)
    {
        if (c.op == Opcode::DELEGATECALL || c.op == Opcode::CALLCODE)
            continue;
        if (c.entered_frame)
            entered.emplace(c.target, c.step + 1);
    }
    return entered;
}

}  // namespace

Wei ether_moved(const TransactionContext& tx, const ExtractionResult& extraction)
{
    Wei total = tx.value;
    for (const CallSite& c : extraction.calls)
        if (moves_value_to_target(c.op) && !c.failed())
            total = saturating_add(total, c.value);
    return total;
}

std::vector<Finding> detect_reentrancy(const TxFacts& t)
{
    const auto rows = query(t.db, "re");
    if (rows.empty())
        return {};
    const auto& sym = t.db.symbols();
    const auto entered = first_entry(t.tx, t.extraction);
    const auto entry_of = [&](const Address& a) {
        const auto it = entered.find(a);
        return it == entered.end() ? std::numeric_limits<size_t>::max() : it->second;
    };

    std::map<std::pair<Address, Address>, std::vector<Tuple>> pairs;
    for (const Tuple& r : rows)
    {
        const Address& a1 = sym.address(r[0]);
        const Address& a2 = sym.address(r[1]);
        pairs[std::minmax(a1, a2)].push_back(r);
    }

    std::vector<Finding> out;
    for (const auto& [pair, bindings] : pairs)
    {
        const auto [x, y] = pair;
        const bool x_first = std::make_pair(entry_of(x), x) < std::make_pair(entry_of(y), y);
        const Address subject = x_first ? x : y;
        const Address other = x_first ? y : x;

        Finding f = base_finding(VulnClass::RE, t.tx);
        f.subject = subject;
        f.counterparty = other;

        std::optional<uint64_t> reentry_pc;
        std::optional<uint64_t> edge_pc;
        for (const CallSite& c : t.extraction.calls)
        {
            const bool between = (c.self == x && c.target == y) || (c.self == y && c.target == x);
            if (!between)
                continue;
            if (!edge_pc)
                edge_pc = c.pc;
            if (!reentry_pc && c.self == other && c.target == subject)
                reentry_pc = c.pc;
            if (moves_value_to_target(c.op) && !c.failed())
                f.ether_at_risk = saturating_add(f.ether_at_risk, c.value);
        }
        f.pc = reentry_pc.value_or(edge_pc.value_or(0));
        f.risk_scope = scope(VulnClass::RE, t.tx, subject.to_hex() + ":" + other.to_hex());
        for (const Tuple& r : bindings)
            if (sym.address(r[0]) == subject)
                f.evidence.push_back(render_row(t.db, "q_re", r));
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<Finding> detect_unhandled_exceptions(const TxFacts& t)
{
    const auto rows = query(t.db, "ue");
    if (rows.empty())
        return {};
    const BalanceTracker balances(t.tx, t.extraction.ledger);
    std::map<uint64_t, const CallSite*> by_value;
    for (const CallSite& c : t.extraction.calls)
        if (c.result_value)
            by_value.emplace(c.result_value->ordinal, &c);

    std::vector<Finding> out;
    for (const Tuple& r : rows)
    {
        const auto it = by_value.find(r[0]);
        if (it == by_value.end())
            continue;
        const CallSite& c = *it->second;
        Finding f = base_finding(VulnClass::UE, t.tx);
        f.subject = c.self;
        f.counterparty = c.target;
        f.pc = c.pc;
        f.ether_at_risk = std::min(balances.balance_before(c.step, c.self), c.value);
        f.risk_scope = scope(VulnClass::UE, t.tx, std::to_string(c.step));
        f.evidence.push_back(render_row(t.db, "q_ue", r));
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<Finding> detect_locked_ether(const TxFacts& t)
{
    const auto rows = query(t.db, "le");
    if (rows.empty())
        return {};
    const auto& sym = t.db.symbols();
    const BalanceTracker balances(t.tx, t.extraction.ledger);

    std::map<std::pair<Address, Address>, Finding> grouped;
    for (const Tuple& r : rows)
    {
        const uint64_t entry_pc = r[0];
        const Address& target = sym.address(r[1]);
        const uint64_t exit_pc = r[2];
        for (const CallSite& c : t.extraction.calls)
        {
            const bool delegate = c.op == Opcode::DELEGATECALL || c.op == Opcode::CALLCODE;
            // Same-frame pairing: the exit belongs to this call and no frame was entered.
            const bool same_frame = c.completed && !c.entered_frame && c.return_step == c.step + 1;
            if (!delegate || !same_frame || c.pc != entry_pc || c.target != target || c.exit_pc != exit_pc)
                continue;
            auto [it, inserted] = grouped.try_emplace({c.self, target});
            Finding& f = it->second;
            if (inserted)
            {
                f = base_finding(VulnClass::LE, t.tx);
                f.subject = c.self;
                f.counterparty = target;
                f.pc = c.pc;
                f.ether_at_risk = balances.balance_before(c.step, c.self);
                f.risk_scope = scope(VulnClass::LE, t.tx, c.self.to_hex());
            }
            auto row = render_row(t.db, "q_le", r);
            if (std::find(f.evidence.begin(), f.evidence.end(), row) == f.evidence.end())
                f.evidence.push_back(std::move(row));
        }
    }
    std::vector<Finding> out;
    for (auto& [key, f] : grouped)
        out.push_back(std::move(f));
    return out;
}

std::vector<Finding> detect_integer_overflow(const TxFacts& t)
{
    const auto rows = query(t.db, "io");
    if (rows.empty())
        return {};
    std::map<uint64_t, const ArithmeticSite*> by_value;
    for (const ArithmeticSite& a : t.extraction.arithmetic)
        by_value.emplace(a.result.ordinal, &a);
    const Wei moved = ether_moved(t.tx, t.extraction);

    std::vector<Finding> out;
    for (const Tuple& r : rows)
    {
        const auto it = by_value.find(r[0]);
        if (it == by_value.end())
            continue;
        const ArithmeticSite& a = *it->second;
        Finding f = base_finding(VulnClass::IO, t.tx);
        f.subject = a.self;
        f.pc = a.pc;
        f.ether_at_risk = moved;
        f.risk_scope = scope(VulnClass::IO, t.tx, "");
        f.evidence.push_back(render_row(t.db, "q_io", r));
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<Finding> detect_unrestricted_action(const TxFacts& t)
{
    const auto rows = query(t.db, "ua");
    if (rows.empty())
        return {};
    const BalanceTracker balances(t.tx, t.extraction.ledger);
    std::map<uint64_t, std::vector<const SensitiveUse*>> by_value;
    for (const SensitiveUse& u : t.extraction.sensitive)
        by_value[u.value.ordinal].push_back(&u);

    std::vector<Finding> out;
    for (const Tuple& r : rows)
    {
        const auto it = by_value.find(r[0]);
        if (it == by_value.end())
            continue;
        for (const SensitiveUse* u : it->second)
        {
            Finding f = base_finding(VulnClass::UA, t.tx);
            f.subject = u->self;
            f.counterparty = u->target;
            f.pc = u->pc;
            switch (u->op)
            {
            case Opcode::SSTORE:
                f.detail = "unrestricted-write";
                break;
            case Opcode::SELFDESTRUCT:
                f.detail = "unprotected-selfdestruct";
                break;
            case Opcode::DELEGATECALL:
            case Opcode::CALLCODE:
                f.detail = "code-injection";
                break;
            default:
                f.detail = "unrestricted-transfer";
                break;
            }
            f.ether_at_risk = balances.balance_before(u->step, u->self);
            f.risk_scope = scope(VulnClass::UA, t.tx, u->self.to_hex());
            f.evidence.push_back(render_row(t.db, "q_ua", r));
            out.push_back(std::move(f));
        }
    }
    return out;
}

std::vector<Finding> detect_transaction(const TxFacts& t, const VulnSet& classes)
{
    std::vector<Finding> out;
    const auto take = [&](VulnClass c, std::vector<Finding> (*fn)(const TxFacts&)) {
        if (!classes.has(c))
            return;
        auto found = fn(t);
        std::move(found.begin(), found.end(), std::back_inserter(out));
    };
    take(VulnClass::RE, detect_reentrancy);
    take(VulnClass::UE, detect_unhandled_exceptions);
    take(VulnClass::LE, detect_locked_ether);
    take(VulnClass::IO, detect_integer_overflow);
    take(VulnClass::UA, detect_unrestricted_action);
    std::sort(out.begin(), out.end(), finding_less);
    return out;
}

std::vector<Finding> detect_tod(const std::vector<TxFacts>& block)
{
    if (block.size() < 2)
        return {};
    std::vector<const FactDB*> dbs;
    std::map<uint64_t, const TxFacts*> by_index;
    for (const TxFacts& t : block)
    {
        dbs.push_back(&t.extraction.facts);
        by_index.emplace(t.tx.tx_index, &t);
    }
    const Database db = evaluate_storage(dbs);
    const auto rows = query(db, "to");
    if (rows.empty())
        return {};
    const auto& sym = db.symbols();

    // Contracts that wrote (or read) `key` in transaction `tx`.
    const auto accessors = [&](uint64_t tx, const Word& key, bool write) {
        std::map<Address, uint64_t> out;  // contract -> first pc
        const auto it = by_index.find(tx);
        if (it == by_index.end())
            return out;
        for (const StorageAccess& s : it->second->extraction.storage)
            if (s.write == write && s.key == key)
                out.emplace(s.self, s.pc);
        return out;
    };

    struct Group
    {
        std::set<uint64_t> txs;
        std::optional<std::pair<uint64_t, uint64_t>> first_write;  // (tx, pc)
        std::vector<Tuple> bindings;
    };
    const uint64_t block_number = block.front().tx.block_number;
    std::map<std::pair<Address, Word>, Group> groups;
    for (const Tuple& r : rows)
    {
        const uint64_t t1 = r[1];
        const uint64_t t2 = r[2];
        const Word& key = sym.key(r[3]);
        const auto writers = accessors(t1, key, true);
        const auto readers = accessors(t2, key, false);
        for (const auto& [contract, pc] : writers)
        {
            if (!readers.count(contract))
                continue;
            Group& g = groups[{contract, key}];
            g.txs.insert(t1);
            g.txs.insert(t2);
            g.bindings.push_back(r);
            if (!g.first_write || std::make_pair(t1, pc) < *g.first_write)
                g.first_write = std::make_pair(t1, pc);
        }
    }

    std::map<Address, std::set<uint64_t>> contract_txs;
    for (const auto& [key, g] : groups)
        contract_txs[key.first].insert(g.txs.begin(), g.txs.end());
    std::map<Address, Wei> contract_ether;
    for (const auto& [contract, txs] : contract_txs)
    {
        Wei total = 0;
        for (const uint64_t tx : txs)
        {
            const TxFacts& t = *by_index.at(tx);
            total = saturating_add(total, ether_moved(t.tx, t.extraction));
        }
        contract_ether.emplace(contract, total);
    }

    std::vector<Finding> out;
    for (const auto& [key, g] : groups)
    {
        Finding f;
        f.vuln = VulnClass::TO;
        f.block = block_number;
        f.tx_indices.assign(g.txs.begin(), g.txs.end());
        f.subject = key.first;
        f.pc = g.first_write->second;
        f.ether_at_risk = contract_ether.at(key.first);
        f.risk_scope = "TO:" + std::to_string(block_number) + ":" + key.first.to_hex();
        for (const Tuple& r : g.bindings)
            f.evidence.push_back(render_row(db, "q_to", r));
        std::sort(f.evidence.begin(), f.evidence.end());
        out.push_back(std::move(f));
    }
    std::sort(out.begin(), out.end(), finding_less);
    return out;
}

RiskAccount aggregate(const std::vector<Finding>& findings)
{
    RiskAccount acc;
    std::array<std::set<Address>, 6> contracts;
    std::array<std::map<std::string, Wei>, 6> scopes;
    std::set<Address> all;
    for (const Finding& f : findings)
    {
        const auto c = static_cast<size_t>(f.vuln);
        contracts[c].insert(f.subject);
        all.insert(f.subject);
        auto [it, inserted] = scopes[c].try_emplace(f.risk_scope, f.ether_at_risk);
        if (!inserted && it->second < f.ether_at_risk)
            it->second = f.ether_at_risk;
    }
    for (size_t c = 0; c < 6; ++c)
    {
        acc.per_class[c].contracts = contracts[c].size();
        for (const auto& [s, w] : scopes[c])
            acc.per_class[c].ether = saturating_add(acc.per_class[c].ether, w);
        acc.total.ether = saturating_add(acc.total.ether, acc.per_class[c].ether);
    }
    acc.total.contracts = all.size();
    return acc;
}

}  // namespace tracescan

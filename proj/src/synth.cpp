// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/report.hpp>
#include <tracescan/synth.hpp>
#include <tracescan/trace_builder.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>

namespace tracescan
{
namespace fs = std::filesystem;
using Enter = TraceBuilder::Enter;
using Region = TraceBuilder::Region;

namespace
{
uint64_t splitmix(uint64_t& state)
{
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ull)
{
    for (const char c : s)
    {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string v(ValueId id)
{
    return "v" + std::to_string(id.ordinal);
}

/// Pushes a two-byte jump target and falls into the JUMPDEST either way.
void check_top(TraceBuilder& b)
{
    const uint64_t dest = b.pc() + 4;
    b.push(Word{dest}, 2);
    b.op(Opcode::JUMPI);
    b.op(Opcode::JUMPDEST);
}

void push_region_return(TraceBuilder& b, Opcode exit)
{
    b.push(0);
    b.push(0);
    if (b.depth() > 1)
        b.ret(exit);
    else
        b.end(exit);
}

/// Pushes the operands of a CALL-family instruction except the target and gas.
void push_call_tail(TraceBuilder& b, Opcode op, const Wei& value)
{
    b.push(0);
    b.push(0);
    b.push(0);
    b.push(0);
    if (carries_value(op))
        b.push(Word::from_bigint(BigInt(value)));
}

class Instance
{
public:
    Instance(const Scenario& s, uint64_t block) : s_{s}, block_{block} {}

    Address at(std::string_view role) const { return scenario_address(s_.pattern, s_.seed, role); }
    Wei amount(std::string_view default_ether) const { return s_.value.value_or(ether(default_ether)); }

    TransactionContext tx(std::string_view sender, std::string_view callee, const Wei& value,
        std::map<std::string_view, Wei> balances, uint64_t index = 0) const
    {
        TransactionContext t;
        t.block_number = block_;
        t.tx_index = index;
        t.sender = at(sender);
        t.callee = at(callee);
        t.value = value;
        for (const auto& [role, wei] : balances)
            t.pre_balances[at(role)] = wei;
        return t;
    }

    Finding finding(VulnClass c, std::string_view subject, uint64_t pc, const Wei& risk,
        std::string scope_suffix, std::vector<std::vector<std::string>> evidence, uint64_t tx = 0) const
    {
        Finding f;
        f.vuln = c;
        f.block = block_;
        f.tx_indices = {tx};
        f.subject = at(subject);
        f.pc = pc;
        f.ether_at_risk = risk;
        f.risk_scope = std::string(to_string(c)) + ":" + std::to_string(block_) + ":" + std::to_string(tx) +
                       (scope_suffix.empty() ? "" : ":" + scope_suffix);
        f.evidence = std::move(evidence);
        return f;
    }

    [[nodiscard]] uint64_t block() const noexcept { return block_; }

private:
    const Scenario& s_;
    uint64_t block_;
};

SynthesizedFile single(const Scenario& s, TraceBuilder&& b, std::vector<Finding> expected)
{
    SynthesizedFile out;
    out.name = s.pattern + ".trace.jsonl";
    out.executing = b.executing();
    out.contents = serialize_trace(std::move(b).finish());
    std::sort(expected.begin(), expected.end(), finding_less);
    out.expected = std::move(expected);
    return out;
}

SynthesizedFile re_direct(const Scenario& s)
{
    const Instance in{s, 1};
    const Wei value = in.amount("5");
    TraceBuilder b{in.tx("sender", "A", 0, {{"A", ether("10") + value}})};
    b.call(Opcode::CALL, in.at("B"), value, Enter::frame);
    const size_t reentry = b.call(Opcode::CALL, in.at("A"), 0, Enter::frame);
    b.ret();
    check_top(b);
    b.ret();
    check_top(b);
    b.end();
    Finding f = in.finding(VulnClass::RE, "A", b.pc_of(reentry), value, in.at("A").to_hex() + ":" + in.at("B").to_hex(),
        {{in.at("A").to_hex(), in.at("B").to_hex(), to_string(value), "0"}});
    f.counterparty = in.at("B");
    return single(s, std::move(b), {f});
}

SynthesizedFile re_chain(const Scenario& s)
{
    const Instance in{s, 2};
    const Wei ab = in.amount("3");
    const Wei bc = ether("2");
    const Wei ca = ether("1");
    TraceBuilder b{in.tx("sender", "A", 0, {{"A", ether("20")}, {"C", ether("1")}})};
    const size_t a_call = b.call(Opcode::CALL, in.at("B"), ab, Enter::frame);
    const size_t b_call = b.call(Opcode::CALL, in.at("C"), bc, Enter::frame);
    const size_t c_call = b.call(Opcode::CALL, in.at("A"), ca, Enter::frame);
    b.ret();
    check_top(b);
    b.ret();
    check_top(b);
    b.ret();
    check_top(b);
    b.end();

    const auto hex = [&](std::string_view r) { return in.at(r).to_hex(); };
    const auto pair = [&](std::string_view x, std::string_view y, uint64_t pc, const Wei& risk, const Wei& p1,
                          const Wei& p2) {
        Finding f = in.finding(VulnClass::RE, x, pc, risk, hex(x) + ":" + hex(y),
            {{hex(x), hex(y), to_string(p1), to_string(p2)}});
        f.counterparty = in.at(y);
        return f;
    };
    return single(s, std::move(b),
        {pair("A", "B", b.pc_of(a_call), ab, ab, bc), pair("A", "C", b.pc_of(c_call), ca, ab, ca),
            pair("B", "C", b.pc_of(b_call), bc, bc, ca)});
}

SynthesizedFile re_create(const Scenario& s)
{
    const Instance in{s, 3};
    const Wei endowment = in.amount("4");
    TraceBuilder b{in.tx("sender", "A", 0, {{"A", endowment + ether("1")}})};
    b.create(endowment, in.at("C"));
    const size_t reentry = b.call(Opcode::CALL, in.at("A"), 0, Enter::frame);
    b.ret();
    check_top(b);
    push_region_return(b, Opcode::RETURN);
    b.op(Opcode::POP);
    b.end();
    Finding f = in.finding(VulnClass::RE, "A", b.pc_of(reentry), endowment,
        in.at("A").to_hex() + ":" + in.at("C").to_hex(),
        {{in.at("A").to_hex(), in.at("C").to_hex(), to_string(endowment), "0"}});
    f.counterparty = in.at("C");
    return single(s, std::move(b), {f});
}

SynthesizedFile re_delegated(const Scenario& s)
{
    const Instance in{s, 4};
    const Wei value = in.amount("6");
    TraceBuilder b{in.tx("sender", "A", 0, {{"A", value + ether("2")}})};
    b.call(Opcode::DELEGATECALL, in.at("lib"), 0, Enter::frame);
    b.call(Opcode::CALL, in.at("B"), value, Enter::frame);
    const size_t reentry = b.call(Opcode::CALL, in.at("A"), 0, Enter::frame);
    b.ret();
    check_top(b);
    b.ret();
    check_top(b);
    b.ret();
    check_top(b);
    b.end();
    Finding f = in.finding(VulnClass::RE, "A", b.pc_of(reentry), value, in.at("A").to_hex() + ":" + in.at("B").to_hex(),
        {{in.at("A").to_hex(), in.at("B").to_hex(), to_string(value), "0"}});
    f.counterparty = in.at("B");
    return single(s, std::move(b), {f});
}

SynthesizedFile re_benign(const Scenario& s)
{
    const Instance in{s, 5};
    TraceBuilder b{in.tx("sender", "A", 0, {{"A", ether("9")}})};
    b.call(Opcode::CALL, in.at("B"), in.amount("2"), Enter::frame);
    b.call(Opcode::CALL, in.at("C"), ether("1"), Enter::frame);
    b.ret();
    check_top(b);
    b.ret();
    check_top(b);
    b.call(Opcode::STATICCALL, in.at("C"), 0, Enter::frame);
    b.ret();
    check_top(b);
    b.end();
    return single(s, std::move(b), {});
}

SynthesizedFile ue_unchecked(const Scenario& s)
{
    const Instance in{s, 10};
    const Wei value = in.amount("2.7");
    TraceBuilder b{in.tx("sender", "A", 0, {{"A", ether("69.3")}})};
    const size_t call = b.call(Opcode::CALL, in.at("B"), value, Enter::frame);
    push_region_return(b, Opcode::REVERT);
    const ValueId result = b.top_id();
    b.op(Opcode::POP);
    b.end();
    Finding f = in.finding(VulnClass::UE, "A", b.pc_of(call), std::min(ether("69.3"), value),
        std::to_string(call), {{v(result)}});
    f.counterparty = in.at("B");
    return single(s, std::move(b), {f});
}

SynthesizedFile ue_checked(const Scenario& s)
{
    const Instance in{s, 11};
    TraceBuilder b{in.tx("sender", "A", 0, {{"A", 50}})};
    b.tx().status = TxStatus::reverted;
    // REVERT operands stay below the call.
    b.push(0);
    b.push(0);
    push_call_tail(b, Opcode::CALL, 100);
    b.push(in.at("B"));
    b.push(Word{2300}, 2);
    b.at(0x65).call_prepared(Opcode::CALL, Enter::fail);
    b.at(0x69).push(Word{0x73}, 1);
    b.at(0x71).op(Opcode::JUMPI);
    b.end(Opcode::REVERT);
    return single(s, std::move(b), {});
}

SynthesizedFile le_fixture(const Scenario& s, bool destructed)
{
    const Instance in{s, destructed ? 20u : 21u};
    // Default addresses reproduce the well-known wallet/library pair.
    const bool named = s.seed == 1;
    const Address wallet =
        named ? *Address::from_hex("0x3bfc20f0b9afcace800d73d2191166ff16540258") : in.at("wallet");
    const Address lib = named ? *Address::from_hex("0x863df6bfa4469f3ead0be8f9f2aae51c91a907b4") : in.at("lib");
    const Wei locked = in.amount("306276");

    TransactionContext tx = in.tx("sender", "wallet", 0, {});
    tx.callee = wallet;
    tx.pre_balances[wallet] = locked;
    TraceBuilder b{tx};
    b.push(0);
    b.op(Opcode::CALLDATALOAD);
    b.op(Opcode::POP);
    push_call_tail(b, Opcode::DELEGATECALL, 0);
    b.push(lib);
    b.push(Word{50000}, 2);
    const size_t call = b.at(100).call_prepared(Opcode::DELEGATECALL, destructed ? Enter::succeed : Enter::frame);
    if (!destructed)
    {
        b.push(1);
        b.push(0);
        b.op(Opcode::SSTORE);
        b.ret();
    }
    check_top(b);
    b.end();

    std::vector<Finding> expected;
    if (destructed)
    {
        Finding f;
        f.vuln = VulnClass::LE;
        f.block = in.block();
        f.tx_indices = {0};
        f.subject = wallet;
        f.counterparty = lib;
        f.pc = b.pc_of(call);
        f.ether_at_risk = locked;
        f.risk_scope = "LE:" + std::to_string(in.block()) + ":0:" + wallet.to_hex();
        f.evidence = {{"100", lib.to_hex(), "101"}};
        expected.push_back(std::move(f));
    }
    return single(s, std::move(b), std::move(expected));
}

SynthesizedFile tod_pair(const Scenario& s)
{
    const Instance in{s, 100};
    const Wei paid = in.amount("1");
    const Word key{0};

    TraceBuilder w{in.tx("writer", "T", 0, {{"T", ether("3")}}, 0), TraceBuilder::words({Word{42}})};
    w.push(0);
    w.op(Opcode::CALLDATALOAD);
    w.push(key);
    const size_t store = w.op(Opcode::SSTORE);
    w.end();

    TraceBuilder r{in.tx("reader", "T", paid, {{"T", ether("3")}}, 1)};
    r.push(key);
    r.op(Opcode::SLOAD);
    r.op(Opcode::POP);
    r.end();

    SynthesizedFile out;
    out.name = s.pattern + ".block.jsonl";
    out.executing = w.executing();
    out.executing.insert(r.executing().begin(), r.executing().end());
    Finding f;
    f.vuln = VulnClass::TO;
    f.block = in.block();
    f.tx_indices = {0, 1};
    f.subject = in.at("T");
    f.pc = w.pc_of(store);
    f.ether_at_risk = paid;
    f.risk_scope = "TO:" + std::to_string(in.block()) + ":" + in.at("T").to_hex();
    f.evidence = {{std::to_string(in.block()), "0", "1", key.to_hex()}};
    out.expected = {f};

    BlockContext block;
    block.block_number = in.block();
    block.transactions.push_back(std::move(w).finish());
    block.transactions.push_back(std::move(r).finish());
    out.contents = serialize_block(block);
    return out;
}

SynthesizedFile io_underflow(const Scenario& s)
{
    const Instance in{s, 30};
    const Wei sent = in.amount("1");
    TraceBuilder b{in.tx("sender", "A", 0, {{"A", sent + ether("1")}})};
    b.push(1);
    b.push(0);
    const size_t sub = b.op(Opcode::SUB);
    const ValueId r = b.top_id();
    b.op(Opcode::POP);
    push_call_tail(b, Opcode::CALL, sent);
    b.op(Opcode::CALLER);
    b.push(Word{2300}, 2);
    b.call_prepared(Opcode::CALL, Enter::succeed);
    check_top(b);
    b.end();
    const std::string max = to_string(Word::max().to_bigint());
    return single(s, std::move(b), {in.finding(VulnClass::IO, "A", b.pc_of(sub), sent, "", {{v(r), max, "-1"}})});
}

SynthesizedFile io_masked(const Scenario& s)
{
    const Instance in{s, 31};
    const Wei value = in.amount("0.5");
    TraceBuilder b{in.tx("sender", "A", value, {{"A", 0}}), TraceBuilder::words({Word{200}, Word{100}})};
    b.push(0);
    b.op(Opcode::CALLDATALOAD);
    b.push(0xff);
    b.op(Opcode::AND);
    b.push(32);
    b.op(Opcode::CALLDATALOAD);
    b.push(0xff);
    b.op(Opcode::AND);
    const size_t add = b.op(Opcode::ADD);
    const ValueId r = b.top_id();
    b.push(0);
    b.op(Opcode::SSTORE);
    b.end();
    return single(s, std::move(b), {in.finding(VulnClass::IO, "A", b.pc_of(add), value, "", {{v(r), "44", "300"}})});
}

SynthesizedFile io_overflow(const Scenario& s)
{
    const Instance in{s, 32};
    const Wei value = in.amount("2");
    TraceBuilder b{in.tx("sender", "A", value, {{"A", 0}})};
    b.push(1);
    b.push(Word::max());
    const size_t add = b.op(Opcode::ADD);
    const ValueId r = b.top_id();
    b.op(Opcode::POP);
    b.end();
    const std::string wrapped = to_string(BigInt{1} << 256);
    return single(s, std::move(b), {in.finding(VulnClass::IO, "A", b.pc_of(add), value, "", {{v(r), "0", wrapped}})});
}

SynthesizedFile ua_write(const Scenario& s)
{
    const Instance in{s, 40};
    const Wei balance = in.amount("12");
    const Word selector{0xa9059cbb};
    const Word selector_word = Word::from_bigint(selector.to_bigint() << 224);
    TraceBuilder b{in.tx("sender", "A", 0, {{"A", balance}}),
        TraceBuilder::words({selector_word, in.at("victim").to_word(), Word{1000}})};
    b.push(0);
    b.op(Opcode::CALLDATALOAD);
    b.push(224);
    b.op(Opcode::SHR);
    b.push(selector);
    b.op(Opcode::EQ);
    check_top(b);
    b.push(64);
    b.op(Opcode::CALLDATALOAD);
    b.push(32);
    b.op(Opcode::CALLDATALOAD);
    b.push(0);
    b.op(Opcode::MSTORE);
    b.push(1);
    b.push(32);
    b.op(Opcode::MSTORE);
    b.push(64);
    b.push(0);
    b.op(Opcode::SHA3);
    const ValueId key = b.top_id();
    const size_t store = b.op(Opcode::SSTORE);
    b.end();
    Finding f = in.finding(VulnClass::UA, "A", b.pc_of(store), balance, in.at("A").to_hex(), {{v(key)}});
    f.detail = "unrestricted-write";
    return single(s, std::move(b), {f});
}

SynthesizedFile ua_selfdestruct(const Scenario& s)
{
    const Instance in{s, 41};
    const Wei balance = in.amount("3");
    TraceBuilder b{in.tx("sender", "A", 0, {{"A", balance}})};
    b.push(0);
    b.op(Opcode::CALLDATALOAD);
    b.op(Opcode::POP);
    b.op(Opcode::CALLER);
    const ValueId beneficiary = b.top_id();
    const size_t kill = b.end(Opcode::SELFDESTRUCT);
    Finding f = in.finding(VulnClass::UA, "A", b.pc_of(kill), balance, in.at("A").to_hex(), {{v(beneficiary)}});
    f.counterparty = in.at("sender");
    f.detail = "unprotected-selfdestruct";
    return single(s, std::move(b), {f});
}

SynthesizedFile ua_guarded(const Scenario& s)
{
    const Instance in{s, 42};
    TraceBuilder b{in.tx("owner", "A", 0, {{"A", in.amount("8")}}),
        TraceBuilder::words({in.at("spender").to_word(), Word{500}})};
    b.preset_storage(in.at("A"), Word{0}, in.at("owner").to_word());

    // allowance[msg.sender][spender] = amount
    b.push(32);
    b.op(Opcode::CALLDATALOAD);
    b.op(Opcode::CALLER);
    b.push(0);
    b.op(Opcode::MSTORE);
    b.push(2);
    b.push(32);
    b.op(Opcode::MSTORE);
    b.push(64);
    b.push(0);
    b.op(Opcode::SHA3);
    b.push(32);
    b.op(Opcode::MSTORE);
    b.push(0);
    b.op(Opcode::CALLDATALOAD);
    b.push(0);
    b.op(Opcode::MSTORE);
    b.push(64);
    b.push(0);
    b.op(Opcode::SHA3);
    b.op(Opcode::SSTORE);

    // require(msg.sender == owner); selfdestruct(msg.sender)
    b.push(0);
    b.op(Opcode::SLOAD);
    b.op(Opcode::CALLER);
    b.op(Opcode::EQ);
    b.op(Opcode::ISZERO);
    const uint64_t revert_at = b.pc() + 100;
    b.push(Word{revert_at}, 2);
    b.op(Opcode::JUMPI);
    b.op(Opcode::CALLER);
    b.end(Opcode::SELFDESTRUCT);
    return single(s, std::move(b), {});
}

using Generator = SynthesizedFile (*)(const Scenario&);

const std::map<std::string, Generator, std::less<>>& generators()
{
    static const std::map<std::string, Generator, std::less<>> g = {
        {"re-direct", re_direct},
        {"re-chain", re_chain},
        {"re-create", re_create},
        {"re-delegated", re_delegated},
        {"re-benign", re_benign},
        {"ue-unchecked", ue_unchecked},
        {"ue-checked", ue_checked},
        {"le-destructed", [](const Scenario& s) { return le_fixture(s, true); }},
        {"le-live", [](const Scenario& s) { return le_fixture(s, false); }},
        {"tod-pair", tod_pair},
        {"io-underflow", io_underflow},
        {"io-masked", io_masked},
        {"io-overflow", io_overflow},
        {"ua-write", ua_write},
        {"ua-selfdestruct", ua_selfdestruct},
        {"ua-guarded", ua_guarded},
    };
    return g;
}

}  // namespace

const std::vector<std::string>& corpus_patterns()
{
    static const std::vector<std::string> p = {"re-direct", "re-chain", "re-create", "re-delegated", "re-benign",
        "ue-unchecked", "ue-checked", "le-destructed", "le-live", "tod-pair", "io-underflow", "io-masked",
        "io-overflow", "ua-write", "ua-selfdestruct", "ua-guarded"};
    return p;
}

bool is_benign(std::string_view pattern)
{
    return pattern == "re-benign" || pattern == "ue-checked" || pattern == "le-live" || pattern == "ua-guarded";
}

Address scenario_address(std::string_view pattern, uint64_t seed, std::string_view role)
{
    uint64_t state = fnv1a(role, fnv1a(pattern) ^ (seed * 0x2545f4914f6cdd1dull));
    const uint64_t a = splitmix(state);
    const uint64_t b = splitmix(state);
    const uint64_t c = splitmix(state) | 0x10000000ull;
    return Address::from_word(Word::from_limbs(a, b, c & 0xffffffffull, 0));
}

SynthesizedFile synthesize(const Scenario& scenario)
{
    const auto& g = generators();
    const auto it = g.find(scenario.pattern);
    if (it == g.end())
        throw UnknownPattern(scenario.pattern);
    return it->second(scenario);
}

ExecutionTrace synthesize_perf_trace(size_t steps, uint64_t seed)
{
    const Scenario s{"perf-mixed", seed, std::nullopt};
    const Instance in{s, 7000};
    const Address helper = in.at("helper");

    const auto build = [&](uint64_t limit, uint64_t& iterations) {
        TraceBuilder b{in.tx("sender", "P", ether("1"), {{"P", ether("50")}}),
            TraceBuilder::words({Word{seed * 7 + 3}, Word{seed}})};
        b.push(0);
        b.op(Opcode::CALLDATALOAD);
        b.push(0xff);
        b.op(Opcode::AND);
        b.push(0);
        const uint64_t head = b.pc();
        iterations = 0;
        for (;;)
        {
            ++iterations;
            b.at(head).op(Opcode::JUMPDEST);
            b.push(1);
            b.op(Opcode::ADD);
            b.op(Opcode::DUP1);
            b.push(0);
            b.op(Opcode::MSTORE);
            b.op(dup_n(2));
            b.push(32);
            b.op(Opcode::MSTORE);
            b.push(64);
            b.push(0);
            b.op(Opcode::SHA3);
            b.op(dup_n(2));
            b.op(Opcode::SWAP1);
            b.op(Opcode::SSTORE);
            if (iterations % 64 == 0)
            {
                push_call_tail(b, Opcode::CALL, 0);
                b.push(helper);
                b.push(Word{50000}, 2);
                b.call_prepared(Opcode::CALL, Enter::frame);
                b.push(0);
                b.op(Opcode::SLOAD);
                b.push(1);
                b.op(Opcode::ADD);
                b.push(0);
                b.op(Opcode::SSTORE);
                b.ret();
                check_top(b);
            }
            b.op(Opcode::DUP1);
            b.push(Word{limit});
            b.op(Opcode::GT);
            b.push(Word{head}, 2);
            b.op(Opcode::JUMPI);
            if (iterations >= limit || b.steps() + 40 >= steps)
                break;
        }
        b.op(Opcode::POP);
        b.op(Opcode::POP);
        b.end();
        return std::move(b).finish();
    };

    uint64_t fitting = 0;
    build(~0ull, fitting);
    uint64_t used = 0;
    return build(fitting, used);
}

std::string render_expected(const std::vector<Finding>& findings)
{
    std::string out;
    for (const Finding& f : findings)
        out += finding_to_json(f).dump() + "\n";
    return out;
}

void write_corpus(const fs::path& dir, uint64_t seed)
{
    fs::create_directories(dir);
    const auto write = [&](const fs::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out)
            throw std::runtime_error("cannot write " + p.string());
    };
    std::vector<Finding> all;
    std::set<Address> inputs;
    for (const std::string& pattern : corpus_patterns())
    {
        const SynthesizedFile f = synthesize({pattern, seed, std::nullopt});
        write(dir / f.name, f.contents);
        write(dir / (pattern + ".expected.jsonl"), render_expected(f.expected));
        all.insert(all.end(), f.expected.begin(), f.expected.end());
        inputs.insert(f.executing.begin(), f.executing.end());
    }
    std::sort(all.begin(), all.end(), finding_less);
    write(dir / "SUMMARY.expected.jsonl", summary_to_json(aggregate(all), inputs.size()).dump() + "\n");
}

}  // namespace tracescan

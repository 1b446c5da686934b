// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/rules.hpp>

#include <algorithm>
#include <mutex>

namespace tracescan
{
using namespace datalog;

namespace
{
using C = ColumnType;

const Term kZero = Term::constant(0);

struct Entry
{
    Phase phase;
    bool reference;
    bool production;
    RuleSpec rule;
};

RuleSpec R(AtomSpec head, std::vector<AtomSpec> body, std::vector<GuardSpec> guards = {})
{
    return RuleSpec{std::move(head), std::move(body), std::move(guards)};
}

// clang-format off
const std::vector<Entry>& rule_table()
{
    static const std::vector<Entry> table = {
        // Data flow.
        {Phase::types, true, false, R(atom("depends", "v1", "v2"), {atom("is_output", "v1", "v2")})},
        {Phase::types, true, false, R(atom("depends", "v1", "v2"), {atom("is_output", "v1", "v3"), atom("depends", "v3", "v2")})},

        // Integer types.
        {Phase::types, true, true, R(atom("inferred_size", "v", "n"), {atom("size", "v", "n")})},
        {Phase::types, true, false, R(atom("inferred_size", "v", "n"), {atom("depends", "v", "v2"), atom("size", "v2", "n")})},
        {Phase::types, false, true, R(atom("inferred_size", "v", "n"), {atom("is_output", "v", "w"), atom("inferred_size", "w", "n")})},
        {Phase::types, true, true, R(atom("inferred_signed", "v"), {atom("is_signed", "v")})},
        {Phase::types, true, false, R(atom("inferred_signed", "v"), {atom("depends", "v", "v2"), atom("is_signed", "v2")})},
        {Phase::types, false, true, R(atom("inferred_signed", "v"), {atom("is_output", "v", "w"), atom("inferred_signed", "w")})},

        // Calls.
        {Phase::main, true, true, R(atom("call_flow", "a1", "a2", "p"), {atom("call", "a1", "a2", "p")})},
        {Phase::main, true, true, R(atom("call_flow", "a1", "a2", "p"), {atom("create", "a1", "a2", "p")})},
        {Phase::main, true, true, R(atom("call_flow", "a1", "a2", "p"), {atom("call", "a1", "a3", "p"), atom("call_flow", "a3", "a2", "_")})},

        // Conditions.
        {Phase::main, true, false, R(atom("condition_flow", "v", "v"), {atom("in_condition", "v")})},
        {Phase::main, true, false, R(atom("condition_flow", "v1", "v2"), {atom("in_condition", "v2"), atom("depends", "v2", "v1")})},
        {Phase::main, false, true, R(atom("reaches_condition", "v"), {atom("in_condition", "v")})},
        {Phase::main, false, true, R(atom("reaches_condition", "v"), {atom("reaches_condition", "w"), atom("is_output", "w", "v")})},

        // Caller and calldata influence.
        {Phase::main, true, false, R(atom("depends_caller", "v"), {atom("caller", "v2", "_"), atom("depends", "v", "v2")})},
        {Phase::main, true, false, R(atom("depends_data", "v"), {atom("load_data", "v2"), atom("depends", "v", "v2")})},
        {Phase::main, false, true, R(atom("depends_caller", "v"), {atom("caller", "w", "_"), atom("is_output", "v", "w")})},
        {Phase::main, false, true, R(atom("depends_caller", "v"), {atom("depends_caller", "w"), atom("is_output", "v", "w")})},
        {Phase::main, false, true, R(atom("depends_data", "v"), {atom("load_data", "w"), atom("is_output", "v", "w")})},
        {Phase::main, false, true, R(atom("depends_data", "v"), {atom("depends_data", "w"), atom("is_output", "v", "w")})},

        // Authorisation.
        {Phase::main, true, true, R(atom("sensitive", "v"), {atom("restricted_inst", "v")})},
        {Phase::main, true, true, R(atom("sensitive", "v"), {atom("selfdestruct", "v")})},
        {Phase::main, true, false, R(atom("caller_checked", "v"), {atom("sensitive", "v"), atom("caller", "v2", "_"), atom("condition_flow", "v2", "v3")}, {lt("v3", "v")})},
        {Phase::main, false, true, R(atom("caller_condition", "v3"), {atom("in_condition", "v3"), atom("caller", "v3", "_")})},
        {Phase::main, false, true, R(atom("caller_condition", "v3"), {atom("in_condition", "v3"), atom("depends_caller", "v3")})},
        {Phase::main, false, true, R(atom("caller_checked", "v"), {atom("sensitive", "v"), atom("caller_condition", "v3")}, {lt("v3", "v")})},

        // Queries.
        {Phase::main, true, true, R(atom("q_re", "a1", "a2", "p1", "p2"), {atom("call_flow", "a1", "a2", "p1"), atom("call_flow", "a2", "a1", "p2")}, {ne("a1", "a2")})},
        {Phase::main, true, false, R(atom("q_ue", "v"), {atom("call_result", "v", kZero), neg("condition_flow", "v", "_")})},
        {Phase::main, false, true, R(atom("q_ue", "v"), {atom("call_result", "v", kZero), neg("reaches_condition", "v")})},
        {Phase::main, true, true, R(atom("q_le", "i1", "a", "i2"), {atom("call_entry", "i1", "a"), atom("call_exit", "i2")}, {succ("i1", "i2")})},
        {Phase::main, true, true, R(atom("q_to", "b", "t1", "t2", "k"), {atom("tx_sstore", "b", "t1", "k"), atom("tx_sload", "b", "t2", "k")}, {ne("t1", "t2")})},
        {Phase::main, true, true, R(atom("q_io", "v", "r1", "r2"), {atom("actual_result", "v", "r1"), atom("expected_result", "v", "r2")}, {ne("r1", "r2")})},
        {Phase::main, true, true, R(atom("q_ua", "v"), {atom("restricted_inst", "v"), atom("depends_data", "v"), neg("depends_caller", "v"), neg("caller_checked", "v")})},
        {Phase::main, true, true, R(atom("q_ua", "v"), {atom("selfdestruct", "v"), neg("caller_checked", "v")})},
    };
    return table;
}
// clang-format on

struct QueryDecl
{
    std::string_view name;
    std::string_view relation;
};
constexpr std::array<QueryDecl, 6> kQueries = {{
    {"re", "q_re"},
    {"ue", "q_ue"},
    {"le", "q_le"},
    {"to", "q_to"},
    {"io", "q_io"},
    {"ua", "q_ua"},
}};

int compare_column(const Symbols& sym, ColumnType type, Value a, Value b)
{
    const auto cmp = [](const auto& x, const auto& y) { return x < y ? -1 : (y < x ? 1 : 0); };
    switch (type)
    {
    case C::Value:
    case C::Number:
        return cmp(a, b);
    case C::Address:
        return cmp(sym.address(a), sym.address(b));
    case C::Wei:
        return cmp(sym.wei(a), sym.wei(b));
    case C::BigInt:
        return cmp(sym.bigint(a), sym.bigint(b));
    case C::Key:
        return cmp(sym.key(a), sym.key(b));
    }
    return 0;
}

}  // namespace

std::shared_ptr<const Schema> analysis_schema()
{
    static const std::shared_ptr<const Schema> schema = [] {
        auto s = std::make_shared<Schema>();
        s->add("is_output", {C::Value, C::Value});
        s->add("size", {C::Value, C::Number});
        s->add("is_signed", {C::Value});
        s->add("in_condition", {C::Value});
        s->add("call", {C::Address, C::Address, C::Wei});
        s->add("create", {C::Address, C::Address, C::Wei});
        s->add("expected_result", {C::Value, C::BigInt});
        s->add("actual_result", {C::Value, C::BigInt});
        s->add("call_result", {C::Value, C::Number});
        s->add("call_entry", {C::Number, C::Address});
        s->add("call_exit", {C::Number});
        s->add("tx_sstore", {C::Number, C::Number, C::Key});
        s->add("tx_sload", {C::Number, C::Number, C::Key});
        s->add("caller", {C::Value, C::Address});
        s->add("load_data", {C::Value});
        s->add("restricted_inst", {C::Value});
        s->add("selfdestruct", {C::Value});

        s->add("depends", {C::Value, C::Value});
        s->add("call_flow", {C::Address, C::Address, C::Wei});
        s->add("inferred_size", {C::Value, C::Number});
        s->add("inferred_signed", {C::Value});
        s->add("condition_flow", {C::Value, C::Value});
        s->add("reaches_condition", {C::Value});
        s->add("depends_caller", {C::Value});
        s->add("depends_data", {C::Value});
        s->add("sensitive", {C::Value});
        s->add("caller_condition", {C::Value});
        s->add("caller_checked", {C::Value});

        s->add("q_re", {C::Address, C::Address, C::Wei, C::Wei});
        s->add("q_ue", {C::Value});
        s->add("q_le", {C::Number, C::Address, C::Number});
        s->add("q_to", {C::Number, C::Number, C::Number, C::Key});
        s->add("q_io", {C::Value, C::BigInt, C::BigInt});
        s->add("q_ua", {C::Value});
        return s;
    }();
    return schema;
}

const Program& program(Catalog catalog, Phase phase)
{
    static std::once_flag once;
    static std::array<std::array<std::unique_ptr<Program>, 3>, 2> programs;
    std::call_once(once, [] {
        for (const Catalog c : {Catalog::reference, Catalog::production})
        {
            for (const Phase p : {Phase::types, Phase::main, Phase::all})
            {
                auto prog = std::make_unique<Program>(analysis_schema());
                for (const auto& e : rule_table())
                {
                    const bool in_catalog = c == Catalog::reference ? e.reference : e.production;
                    if (in_catalog && (p == Phase::all || p == e.phase))
                        prog->add(e.rule);
                }
                programs[static_cast<size_t>(c)][static_cast<size_t>(p)] = std::move(prog);
            }
        }
    });
    return *programs[static_cast<size_t>(catalog)][static_cast<size_t>(phase)];
}

void load_facts(Database& db, const FactDB& f)
{
    auto& sym = db.symbols();
    const auto rel = [&](std::string_view name) -> Relation& { return db.relation(name); };

    auto& is_output = rel("is_output");
    for (const auto& [a, b] : f.is_output)
        is_output.insert({a.ordinal, b.ordinal});
    auto& size = rel("size");
    for (const auto& [v, n] : f.size)
        size.insert({v.ordinal, n});
    for (const auto v : f.is_signed)
        rel("is_signed").insert({v.ordinal});
    for (const auto v : f.in_condition)
        rel("in_condition").insert({v.ordinal});
    for (const auto& t : f.call)
        rel("call").insert({sym.intern(t.from), sym.intern(t.to), sym.intern(t.value)});
    for (const auto& t : f.create)
        rel("create").insert({sym.intern(t.from), sym.intern(t.to), sym.intern(t.value)});
    for (const auto& [v, r] : f.expected_result)
        rel("expected_result").insert({v.ordinal, sym.intern(r)});
    for (const auto& [v, r] : f.actual_result)
        rel("actual_result").insert({v.ordinal, sym.intern(r)});
    for (const auto& [v, n] : f.call_result)
        rel("call_result").insert({v.ordinal, n});
    for (const auto& [pc, a] : f.call_entry)
        rel("call_entry").insert({pc, sym.intern(a)});
    for (const auto pc : f.call_exit)
        rel("call_exit").insert({pc});
    for (const auto& s : f.tx_sstore)
        rel("tx_sstore").insert({s.block, s.tx, sym.intern(s.key)});
    for (const auto& s : f.tx_sload)
        rel("tx_sload").insert({s.block, s.tx, sym.intern(s.key)});
    for (const auto& [v, a] : f.caller)
        rel("caller").insert({v.ordinal, sym.intern(a)});
    for (const auto v : f.load_data)
        rel("load_data").insert({v.ordinal});
    for (const auto v : f.restricted_inst)
        rel("restricted_inst").insert({v.ordinal});
    for (const auto v : f.selfdestruct)
        rel("selfdestruct").insert({v.ordinal});
}

InferredTypes read_inferred_types(const Database& db, size_t num_values)
{
    InferredTypes types;
    types.min_size.assign(num_values, 0);
    types.is_signed.assign(num_values, 0);
    for (const Tuple& t : db.relation("inferred_size").rows())
    {
        if (t[0] >= num_values)
            continue;
        auto& cur = types.min_size[t[0]];
        if (cur == 0 || t[1] < cur)
            cur = static_cast<uint16_t>(t[1]);
    }
    for (const Tuple& t : db.relation("inferred_signed").rows())
        if (t[0] < num_values)
            types.is_signed[t[0]] = 1;
    return types;
}

std::vector<Tuple> query(const Database& db, std::string_view name)
{
    const auto it = std::find_if(kQueries.begin(), kQueries.end(), [&](const auto& q) { return q.name == name; });
    if (it == kQueries.end())
        throw DatalogError(DatalogError::Kind::UnknownQuery, "unknown query " + std::string(name));
    const RelId id = db.schema().id(it->relation);
    const auto& columns = db.schema().decl(id).columns;
    std::vector<Tuple> rows = db.relation(id).rows();
    const auto& sym = db.symbols();
    std::sort(rows.begin(), rows.end(), [&](const Tuple& a, const Tuple& b) {
        for (size_t c = 0; c < columns.size(); ++c)
            if (const int r = compare_column(sym, columns[c], a[c], b[c]); r != 0)
                return r < 0;
        return false;
    });
    return rows;
}

Database evaluate(ExtractionResult& extraction, Catalog catalog, const Deadline& deadline)
{
    Database db(analysis_schema());
    load_facts(db, extraction.facts);
    run_fixpoint(db, program(catalog, Phase::types), deadline);

    compute_arithmetic_expectations(extraction, read_inferred_types(db, extraction.values.size()));
    auto& sym = db.symbols();
    for (const auto& [v, r] : extraction.facts.expected_result)
        db.relation("expected_result").insert({v.ordinal, sym.intern(r)});
    for (const auto& [v, r] : extraction.facts.actual_result)
        db.relation("actual_result").insert({v.ordinal, sym.intern(r)});
    extraction.facts.seal();

    run_fixpoint(db, program(catalog, Phase::main), deadline);
    return db;
}

Database evaluate_storage(const std::vector<const FactDB*>& transactions, const Deadline& deadline)
{
    Database db(analysis_schema());
    auto& sym = db.symbols();
    for (const FactDB* f : transactions)
    {
        for (const auto& s : f->tx_sstore)
            db.relation("tx_sstore").insert({s.block, s.tx, sym.intern(s.key)});
        for (const auto& s : f->tx_sload)
            db.relation("tx_sload").insert({s.block, s.tx, sym.intern(s.key)});
    }
    run_fixpoint(db, program(Catalog::production, Phase::main), deadline);
    return db;
}

}  // namespace tracescan

// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "harness.hpp"
#include "naive_datalog.hpp"
#include "random_facts.hpp"

#include <tracescan/synth.hpp>

#include <gtest/gtest.h>

using namespace tracescan;
using namespace tracescan::datalog;
using namespace tracescan::testing;

namespace
{
std::set<Tuple> rel_set(const Database& db, std::string_view name)
{
    const auto& rows = db.relation(name).rows();
    return {rows.begin(), rows.end()};
}

}  // namespace

TEST(Query, UnknownQuery)
{
    Database db(analysis_schema());
    try
    {
        (void)query(db, "xx");
        FAIL();
    }
    catch (const DatalogError& e)
    {
        EXPECT_EQ(e.kind(), DatalogError::Kind::UnknownQuery);
    }
}

TEST(Query, ReentrancyPair)
{
    Database db(analysis_schema());
    auto& sym = db.symbols();
    const Value a = sym.intern(Address::from_word(Word{0xa})), b = sym.intern(Address::from_word(Word{0xb}));
    db.relation("call").insert({a, b, sym.intern(Wei{1}), 0});
    db.relation("call").insert({b, a, sym.intern(Wei{0}), 0});
    run_fixpoint(db, program(Catalog::production));
    const auto rows = query(db, "re");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0][0], a);
    EXPECT_EQ(rows[0][1], b);
    EXPECT_EQ(sym.wei(rows[0][2]), Wei{1});
}

TEST(Query, UnhandledWithoutCondition)
{
    for (const Catalog c : {Catalog::reference, Catalog::production})
    {
        Database db(analysis_schema());
        db.relation("call_result").insert({4, 0, 0, 0});
        db.relation("call_result").insert({5, 1, 0, 0});
        run_fixpoint(db, program(c));
        const auto rows = query(db, "ue");
        ASSERT_EQ(rows.size(), 1u);
        EXPECT_EQ(rows[0][0], 4u);
    }
}

TEST(Query, HandledThroughIsZero)
{
    for (const Catalog c : {Catalog::reference, Catalog::production})
    {
        Database db(analysis_schema());
        db.relation("call_result").insert({4, 0, 0, 0});
        db.relation("is_output").insert({6, 4, 0, 0});
        db.relation("in_condition").insert({6, 0, 0, 0});
        run_fixpoint(db, program(c));
        EXPECT_TRUE(query(db, "ue").empty());
    }
}

TEST(Query, OrderedByColumnValueNotInternId)
{
    Database db(analysis_schema());
    auto& sym = db.symbols();
    // Intern the larger key first so intern ids disagree with key order.
    const Value k9 = sym.intern(Word{9}), k1 = sym.intern(Word{1});
    db.relation("tx_sstore").insert({100, 0, k9, 0});
    db.relation("tx_sstore").insert({100, 0, k1, 0});
    db.relation("tx_sload").insert({100, 1, k9, 0});
    db.relation("tx_sload").insert({100, 1, k1, 0});
    run_fixpoint(db, program(Catalog::production));
    const auto rows = query(db, "to");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0][3], k1);
    EXPECT_EQ(rows[1][3], k9);
}

TEST(Query, CallerCheckedOrdering)
{
    // caller value 1 flows into condition 3; sensitive values 2 and 5 sit before and after it.
    for (const Catalog c : {Catalog::reference, Catalog::production})
    {
        Database db(analysis_schema());
        db.relation("caller").insert({1, db.symbols().intern(Address::from_word(Word{0xe})), 0, 0});
        db.relation("is_output").insert({3, 1, 0, 0});
        db.relation("in_condition").insert({3, 0, 0, 0});
        db.relation("selfdestruct").insert({2, 0, 0, 0});
        db.relation("selfdestruct").insert({5, 0, 0, 0});
        run_fixpoint(db, program(c));
        EXPECT_EQ(rel_set(db, "caller_checked"), (std::set<Tuple>{{5, 0, 0, 0}}));
        EXPECT_EQ(rel_set(db, "q_ua"), (std::set<Tuple>{{2, 0, 0, 0}}));
    }
}

TEST(Catalogs, AgreeOnRandomDatabases)
{
    for (uint64_t seed = 0; seed < 60; ++seed)
    {
        Database ref(analysis_schema());
        Database prod(analysis_schema());
        random_base_facts(ref, seed);
        random_base_facts(prod, seed);
        run_fixpoint(ref, program(Catalog::reference));
        run_fixpoint(prod, program(Catalog::production));
        for (const auto name : kSharedRelations)
            ASSERT_EQ(rel_set(ref, name), rel_set(prod, name)) << name << " seed " << seed;
    }
}

TEST(Catalogs, AgreeOnCorpusTraces)
{
    for (const auto& p : corpus_patterns())
    {
        const SynthesizedFile f = synthesize({p, 2, std::nullopt});
        std::vector<ExecutionTrace> traces;
        if (looks_like_block(f.contents))
            traces = parse_block(f.contents).transactions;
        else
            traces.push_back(parse_trace(f.contents));
        for (const auto& t : traces)
        {
            const Evaluated r = evaluate_trace(t, Catalog::reference);
            const Evaluated q = evaluate_trace(t, Catalog::production);
            for (const auto name : kQueryNames)
                EXPECT_EQ(query(r.db, name), query(q.db, name)) << p << " " << name;
        }
    }
}

TEST(Catalogs, PhasedEvaluationEqualsSingleRun)
{
    for (const auto& p : {"io-masked", "io-underflow", "ua-write", "re-chain"})
    {
        const SynthesizedFile f = synthesize({p, 1, std::nullopt});
        const ExecutionTrace t = parse_trace(f.contents);
        ExtractionResult x = extract_facts(t);
        const Database phased = evaluate(x, Catalog::reference);
        Database single(analysis_schema());
        load_facts(single, x.facts);
        run_fixpoint(single, program(Catalog::reference, Phase::all));
        for (const auto name : kSharedRelations)
        {
            // Symbol ids differ between databases, so compare rendered rows as sets.
            auto a = phased.render(phased.schema().id(name));
            auto b = single.render(single.schema().id(name));
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            EXPECT_EQ(a, b) << p << " " << name;
        }
    }
}

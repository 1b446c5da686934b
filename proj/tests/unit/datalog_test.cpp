// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "naive_datalog.hpp"
#include "random_facts.hpp"

#include <tracescan/rules.hpp>

#include <gtest/gtest.h>

using namespace tracescan;
using namespace tracescan::datalog;
using namespace tracescan::testing;

namespace
{
std::shared_ptr<Schema> graph_schema()
{
    auto s = std::make_shared<Schema>();
    s->add("edge", {ColumnType::Value, ColumnType::Value});
    s->add("path", {ColumnType::Value, ColumnType::Value});
    s->add("node", {ColumnType::Value});
    s->add("unreached", {ColumnType::Value});
    s->add("p", {ColumnType::Value});
    s->add("q", {ColumnType::Value});
    return s;
}

DatalogError::Kind add_error(Program& p, const RuleSpec& r)
{
    try
    {
        p.add(r);
    }
    catch (const DatalogError& e)
    {
        return e.kind();
    }
    ADD_FAILURE() << "rule accepted";
    return DatalogError::Kind::UnknownQuery;
}

}  // namespace

TEST(Relation, SetSemantics)
{
    Relation r(2);
    EXPECT_TRUE(r.insert({1, 2, 0, 0}));
    EXPECT_FALSE(r.insert({1, 2, 0, 0}));
    EXPECT_TRUE(r.insert({1, 3, 0, 0}));
    EXPECT_EQ(r.size(), 2u);
    EXPECT_TRUE(r.contains({1, 3, 0, 0}));
    EXPECT_FALSE(r.contains({3, 1, 0, 0}));
}

TEST(Relation, LookupChainsNewestFirst)
{
    Relation r(2);
    for (Value i = 0; i < 100; ++i)
        r.insert({i % 7, i, 0, 0});
    const auto chain = r.lookup(0b01, {3, 0, 0, 0});
    std::vector<Value> seen;
    for (uint32_t id = chain.head; id != Relation::kNone; id = (*chain.next)[id])
        seen.push_back(r.row(id)[1]);
    std::vector<Value> expected;
    for (Value i = 99; i + 1 > 0; --i)
        if (i % 7 == 3)
            expected.push_back(i);
    EXPECT_EQ(seen, expected);
    r.insert({3, 1000, 0, 0});
    EXPECT_EQ(r.row(r.lookup(0b01, {3, 0, 0, 0}).head)[1], 1000u);
    EXPECT_EQ(r.lookup(0b01, {42, 0, 0, 0}).head, Relation::kNone);
}

TEST(Relation, SortedIsLexicographic)
{
    Relation r(2);
    r.insert({2, 1, 0, 0});
    r.insert({1, 5, 0, 0});
    r.insert({1, 2, 0, 0});
    const auto s = r.sorted();
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0][1], 2u);
    EXPECT_EQ(s[1][1], 5u);
    EXPECT_EQ(s[2][0], 2u);
}

TEST(Program, RejectsUnsafeRules)
{
    Program p(graph_schema());
    EXPECT_EQ(add_error(p, {atom("path", "x", "y"), {atom("node", "x")}}), DatalogError::Kind::UnsafeRule);
    EXPECT_EQ(add_error(p, {atom("unreached", "x"), {neg("path", "x", "_")}}), DatalogError::Kind::UnsafeRule);
    EXPECT_EQ(add_error(p, {atom("unreached", "x"), {atom("node", "x"), neg("path", "x", "y")}}),
        DatalogError::Kind::UnsafeRule);
    EXPECT_EQ(add_error(p, {atom("p", "x"), {atom("node", "x")}, {lt("x", "z")}}), DatalogError::Kind::UnsafeRule);
    EXPECT_EQ(add_error(p, {atom("nope", "x"), {atom("node", "x")}}), DatalogError::Kind::UnknownRelation);
    EXPECT_EQ(add_error(p, {atom("p", "x", "y"), {atom("edge", "x", "y")}}), DatalogError::Kind::ArityMismatch);
}

TEST(Stratify, NegativeSelfLoopRejected)
{
    Program p(graph_schema());
    p.add({atom("p", "x"), {atom("node", "x"), neg("p", "x")}});
    try
    {
        (void)stratify(p);
        FAIL() << "stratified";
    }
    catch (const DatalogError& e)
    {
        EXPECT_EQ(e.kind(), DatalogError::Kind::UnstratifiableProgram);
    }
}

TEST(Stratify, NegativeCycleRejected)
{
    Program p(graph_schema());
    p.add({atom("p", "x"), {atom("node", "x"), neg("q", "x")}});
    p.add({atom("q", "x"), {atom("node", "x"), neg("p", "x")}});
    EXPECT_THROW((void)stratify(p), DatalogError);
}

TEST(Stratify, NoNegationSingleStratum)
{
    Program p(graph_schema());
    p.add({atom("path", "x", "y"), {atom("edge", "x", "y")}});
    p.add({atom("path", "x", "z"), {atom("edge", "x", "y"), atom("path", "y", "z")}});
    EXPECT_EQ(stratify(p).size(), 1u);
}

TEST(Stratify, ShippedProgramPlacesQueriesAboveNegatedRelations)
{
    const Program& p = program(Catalog::reference);
    const auto strata = stratify(p);
    EXPECT_GE(strata.size(), 2u);
    std::map<RelId, size_t> level;
    for (size_t i = 0; i < strata.size(); ++i)
        for (RelId r : strata[i].relations)
            level[r] = i;
    const Schema& s = p.schema();
    EXPECT_LT(level.at(s.id("condition_flow")), level.at(s.id("q_ue")));
    EXPECT_LT(level.at(s.id("caller_checked")), level.at(s.id("q_ua")));
    EXPECT_LT(level.at(s.id("depends_caller")), level.at(s.id("q_ua")));
    std::map<RelId, int> naive;
    ASSERT_TRUE(naive_strata(p, naive));
}

TEST(Fixpoint, TransitiveDepends)
{
    Database db(analysis_schema());
    db.relation("is_output").insert({2, 1, 0, 0});
    db.relation("is_output").insert({3, 2, 0, 0});
    run_fixpoint(db, program(Catalog::reference));
    EXPECT_TRUE(db.relation("depends").contains({3, 1, 0, 0}));
    EXPECT_TRUE(db.relation("depends").contains({3, 2, 0, 0}));
    EXPECT_EQ(db.relation("depends").size(), 3u);
}

TEST(Fixpoint, CallFlowKeepsFirstHopValue)
{
    Database db(analysis_schema());
    auto& sym = db.symbols();
    const Value a = sym.intern(Address::from_word(Word{0xa})), b = sym.intern(Address::from_word(Word{0xb})),
                c = sym.intern(Address::from_word(Word{0xc}));
    const Value one = sym.intern(Wei{1}), zero = sym.intern(Wei{0});
    db.relation("call").insert({a, b, one, 0});
    db.relation("call").insert({b, c, zero, 0});
    run_fixpoint(db, program(Catalog::production));
    const auto& cf = db.relation("call_flow");
    EXPECT_TRUE(cf.contains({a, c, one, 0}));
    EXPECT_EQ(cf.size(), 3u);
}

TEST(Fixpoint, EmptyDatabaseDerivesNothing)
{
    for (const Catalog c : {Catalog::reference, Catalog::production})
    {
        Database db(analysis_schema());
        run_fixpoint(db, program(c));
        for (RelId r = 0; r < db.schema().size(); ++r)
            EXPECT_EQ(db.relation(r).size(), 0u) << db.schema().decl(r).name;
    }
}

TEST(Fixpoint, NegationOverLowerStratum)
{
    auto s = graph_schema();
    Program p(s);
    p.add({atom("path", "x", "y"), {atom("edge", "x", "y")}});
    p.add({atom("path", "x", "z"), {atom("path", "x", "y"), atom("edge", "y", "z")}});
    p.add({atom("unreached", "x"), {atom("node", "x"), neg("path", Term::constant(0), "x")}});
    Database db(s);
    for (Value n = 0; n < 5; ++n)
        db.relation("node").insert({n, 0, 0, 0});
    db.relation("edge").insert({0, 1, 0, 0});
    db.relation("edge").insert({1, 2, 0, 0});
    db.relation("edge").insert({3, 4, 0, 0});
    run_fixpoint(db, p);
    const auto un = db.relation("unreached").sorted();
    ASSERT_EQ(un.size(), 3u);
    EXPECT_EQ(un[0][0], 0u);
    EXPECT_EQ(un[1][0], 3u);
    EXPECT_EQ(un[2][0], 4u);
}

TEST(Fixpoint, GuardsApplyAfterJoin)
{
    Database db(analysis_schema());
    db.relation("call_entry").insert({100, 7, 0, 0});
    db.relation("call_exit").insert({101, 0, 0, 0});
    db.relation("call_exit").insert({105, 0, 0, 0});
    db.relation("call_entry").insert({200, 7, 0, 0});
    run_fixpoint(db, program(Catalog::production));
    const auto rows = db.relation("q_le").sorted();
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0][0], 100u);
    EXPECT_EQ(rows[0][2], 101u);
}

TEST(Fixpoint, SemiNaiveMatchesNaiveOracle)
{
    for (uint64_t seed = 0; seed < 25; ++seed)
        for (const Catalog c : {Catalog::reference, Catalog::production})
        {
            Database db(analysis_schema());
            random_base_facts(db, seed);
            const RelationSets expected = naive_fixpoint(program(c), snapshot(db));
            run_fixpoint(db, program(c));
            ASSERT_EQ(snapshot(db), expected) << "seed " << seed;
        }
}

TEST(Fixpoint, RerunAddsNothing)
{
    for (uint64_t seed = 100; seed < 110; ++seed)
    {
        Database db(analysis_schema());
        random_base_facts(db, seed);
        run_fixpoint(db, program(Catalog::reference));
        const RelationSets first = snapshot(db);
        const FixpointStats again = run_fixpoint(db, program(Catalog::reference));
        EXPECT_EQ(again.derived, 0u);
        EXPECT_EQ(snapshot(db), first);
    }
}

TEST(Fixpoint, MonotoneWithinStratum)
{
    for (uint64_t seed = 200; seed < 220; ++seed)
    {
        Database small(analysis_schema());
        random_base_facts(small, seed, 150);
        Database big(analysis_schema());
        random_base_facts(big, seed, 150);
        big.relation("is_output").insert({1, 2, 0, 0});
        big.relation("is_output").insert({2, 3, 0, 0});
        run_fixpoint(small, program(Catalog::reference));
        run_fixpoint(big, program(Catalog::reference));
        for (const char* rel : {"depends", "call_flow", "inferred_size", "condition_flow"})
            for (const Tuple& t : small.relation(rel).rows())
                EXPECT_TRUE(big.relation(rel).contains(t)) << rel;
    }
}

TEST(Fixpoint, DeadlineInterrupts)
{
    Database db(analysis_schema());
    for (Value i = 0; i < 3000; ++i)
        db.relation("is_output").insert({i + 1, i, 0, 0});
    EXPECT_THROW(run_fixpoint(db, program(Catalog::reference), Deadline::after(std::chrono::duration<double>(0))),
        TimeoutError);
}

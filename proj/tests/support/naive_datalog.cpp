// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "naive_datalog.hpp"

#include <algorithm>
#include <stdexcept>

namespace tracescan::testing
{
using namespace datalog;

RelationSets snapshot(const Database& db)
{
    RelationSets out;
    for (RelId r = 0; r < db.schema().size(); ++r)
    {
        auto& set = out[r];
        for (const Tuple& t : db.relation(r).rows())
            set.insert(t);
    }
    return out;
}

bool naive_strata(const Program& program, std::map<RelId, int>& level)
{
    level.clear();
    for (const Rule& r : program.rules())
        level[r.head.rel] = 0;
    const int limit = static_cast<int>(level.size()) + 1;
    bool changed = true;
    while (changed)
    {
        changed = false;
        for (const Rule& r : program.rules())
        {
            int need = level[r.head.rel];
            for (const Atom& a : r.body)
            {
                const auto it = level.find(a.rel);
                if (it == level.end())
                    continue;
                need = std::max(need, it->second + (a.negated ? 1 : 0));
            }
            if (need > level[r.head.rel])
            {
                if (need > limit)
                    return false;
                level[r.head.rel] = need;
                changed = true;
            }
        }
    }
    return true;
}

namespace
{
struct Binding
{
    std::vector<Value> value;
    std::vector<bool> bound;
};

bool matches(const Atom& a, const Tuple& t, Binding& b, std::vector<int>& newly)
{
    for (int i = 0; i < a.arity; ++i)
    {
        if (a.is_const[i])
        {
            if (t[i] != a.constant[i])
                return false;
            continue;
        }
        const int v = a.var[i];
        if (v < 0)
            continue;
        if (b.bound[v])
        {
            if (b.value[v] != t[i])
                return false;
        }
        else
        {
            b.bound[v] = true;
            b.value[v] = t[i];
            newly.push_back(v);
        }
    }
    return true;
}

bool guards_hold(const Rule& r, const Binding& b)
{
    for (const Guard& g : r.guards)
    {
        const Value x = b.value[g.a];
        const Value y = b.value[g.b];
        bool ok = false;
        switch (g.op)
        {
        case GuardSpec::Op::Lt: ok = x < y; break;
        case GuardSpec::Op::Ne: ok = x != y; break;
        case GuardSpec::Op::Eq: ok = x == y; break;
        case GuardSpec::Op::Succ: ok = x + 1 == y; break;
        }
        if (!ok)
            return false;
    }
    return true;
}

bool negated_absent(const Atom& a, const TupleSet& rel, const Binding& b)
{
    for (const Tuple& t : rel)
    {
        bool all = true;
        for (int i = 0; i < a.arity && all; ++i)
        {
            if (a.is_const[i])
                all = t[i] == a.constant[i];
            else if (a.var[i] >= 0)
                all = t[i] == b.value[a.var[i]];
        }
        if (all)
            return false;
    }
    return true;
}

void solve(const Rule& r, const std::vector<const Atom*>& positive, size_t k, Binding& b,
    const RelationSets& sets, TupleSet& out)
{
    static const TupleSet empty;
    const auto rel = [&](RelId id) -> const TupleSet& {
        const auto it = sets.find(id);
        return it == sets.end() ? empty : it->second;
    };
    if (k == positive.size())
    {
        for (const Atom& a : r.body)
            if (a.negated && !negated_absent(a, rel(a.rel), b))
                return;
        if (!guards_hold(r, b))
            return;
        Tuple head{};
        for (int i = 0; i < r.head.arity; ++i)
            head[i] = r.head.is_const[i] ? r.head.constant[i] : b.value[r.head.var[i]];
        out.insert(head);
        return;
    }
    for (const Tuple& t : rel(positive[k]->rel))
    {
        std::vector<int> newly;
        if (matches(*positive[k], t, b, newly))
            solve(r, positive, k + 1, b, sets, out);
        for (const int v : newly)
            b.bound[v] = false;
    }
}

}  // namespace

RelationSets naive_fixpoint(const Program& program, RelationSets sets)
{
    std::map<RelId, int> level;
    if (!naive_strata(program, level))
        throw std::runtime_error("program is not stratifiable");
    int top = 0;
    for (const auto& [rel, l] : level)
        top = std::max(top, l);

    for (int stratum = 0; stratum <= top; ++stratum)
    {
        std::vector<const Rule*> rules;
        for (const Rule& r : program.rules())
            if (level[r.head.rel] == stratum)
                rules.push_back(&r);
        bool changed = true;
        while (changed)
        {
            changed = false;
            for (const Rule* r : rules)
            {
                std::vector<const Atom*> positive;
                for (const Atom& a : r->body)
                    if (!a.negated)
                        positive.push_back(&a);
                Binding b{std::vector<Value>(r->num_vars, 0), std::vector<bool>(r->num_vars, false)};
                TupleSet derived;
                solve(*r, positive, 0, b, sets, derived);
                auto& target = sets[r->head.rel];
                for (const Tuple& t : derived)
                    changed |= target.insert(t).second;
            }
        }
    }
    return sets;
}

}  // namespace tracescan::testing

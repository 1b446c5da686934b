// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/datalog.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tracescan::datalog
{
RelId Schema::add(std::string name, std::vector<ColumnType> columns)
{
    if (columns.empty() || columns.size() > kMaxArity)
        throw DatalogError(DatalogError::Kind::ArityMismatch, "bad arity for relation " + name);
    if (by_name_.count(name))
        throw std::invalid_argument("relation declared twice: " + name);
    const auto id = static_cast<RelId>(decls_.size());
    by_name_.emplace(name, id);
    decls_.push_back({std::move(name), std::move(columns)});
    return id;
}

RelId Schema::id(std::string_view name) const
{
    const auto it = by_name_.find(std::string(name));
    if (it == by_name_.end())
        throw DatalogError(DatalogError::Kind::UnknownRelation, "unknown relation " + std::string(name));
    return it->second;
}

bool Schema::has(std::string_view name) const noexcept
{
    return by_name_.count(std::string(name)) != 0;
}

Term::Term(const char* name) : var{name}
{
    kind = var == "_" ? Kind::Wildcard : Kind::Var;
}

namespace
{
std::string render_spec(const RuleSpec& spec)
{
    const auto render_atom = [](const AtomSpec& a) {
        std::string s = (a.negated ? "!" : "") + a.relation + "(";
        for (size_t i = 0; i < a.terms.size(); ++i)
        {
            if (i)
                s += ", ";
            const Term& t = a.terms[i];
            s += t.kind == Term::Kind::Const ? std::to_string(t.value) : t.var;
        }
        return s + ")";
    };
    std::string s = render_atom(spec.head) + " :- ";
    for (size_t i = 0; i < spec.body.size(); ++i)
        s += (i ? ", " : "") + render_atom(spec.body[i]);
    static constexpr const char* ops[] = {" < ", " != ", " = ", " + 1 = "};
    for (const auto& g : spec.guards)
        s += ", " + g.a + ops[static_cast<int>(g.op)] + g.b;
    return s + ".";
}
}  // namespace

Program& Program::add(const RuleSpec& spec)
{
    Rule rule;
    rule.text = render_spec(spec);
    std::map<std::string, uint16_t> vars;
    std::set<std::string> positive;

    const auto fail = [&](DatalogError::Kind kind, const std::string& why) {
        throw DatalogError(kind, why + " in rule " + rule.text);
    };
    const auto compile = [&](const AtomSpec& a, bool is_head) {
        Atom out;
        out.rel = schema_->id(a.relation);
        const auto& decl = schema_->decl(out.rel);
        if (a.terms.size() != decl.columns.size())
            fail(DatalogError::Kind::ArityMismatch, "wrong arity for " + a.relation);
        out.arity = static_cast<uint8_t>(a.terms.size());
        out.negated = a.negated;
        for (size_t c = 0; c < a.terms.size(); ++c)
        {
            const Term& t = a.terms[c];
            switch (t.kind)
            {
            case Term::Kind::Wildcard:
                if (is_head)
                    fail(DatalogError::Kind::UnsafeRule, "anonymous variable in head");
                break;
            case Term::Kind::Const:
                out.is_const[c] = true;
                out.constant[c] = t.value;
                break;
            case Term::Kind::Var:
            {
                auto [it, inserted] = vars.emplace(t.var, static_cast<uint16_t>(vars.size()));
                out.var[c] = static_cast<int16_t>(it->second);
                if (!is_head && !a.negated)
                    positive.insert(t.var);
                break;
            }
            }
        }
        return out;
    };

    for (const auto& b : spec.body)
        rule.body.push_back(compile(b, false));
    rule.head = compile(spec.head, true);
    if (spec.head.negated)
        fail(DatalogError::Kind::UnsafeRule, "negated head");

    const auto require_positive = [&](const std::string& v, const char* what) {
        if (!positive.count(v))
            fail(DatalogError::Kind::UnsafeRule, std::string(what) + " variable " + v + " not bound by a positive atom");
    };
    for (const auto& t : spec.head.terms)
        if (t.kind == Term::Kind::Var)
            require_positive(t.var, "head");
    for (const auto& b : spec.body)
        if (b.negated)
            for (const auto& t : b.terms)
                if (t.kind == Term::Kind::Var)
                    require_positive(t.var, "negated");
    for (const auto& g : spec.guards)
    {
        require_positive(g.a, "guard");
        require_positive(g.b, "guard");
        rule.guards.push_back({g.op, vars.at(g.a), vars.at(g.b)});
    }
    rule.num_vars = static_cast<uint16_t>(vars.size());
    rules_.push_back(std::move(rule));
    return *this;
}

std::vector<RelId> Program::derived() const
{
    std::set<RelId> heads;
    for (const auto& r : rules_)
        heads.insert(r.head.rel);
    return {heads.begin(), heads.end()};
}

std::vector<Stratum> stratify(const Program& program)
{
    const size_t n = program.schema().size();
    std::vector<size_t> level(n, 0);
    bool changed = true;
    while (changed)
    {
        changed = false;
        for (const auto& r : program.rules())
        {
            for (const auto& b : r.body)
            {
                const size_t need = level[b.rel] + (b.negated ? 1 : 0);
                if (level[r.head.rel] < need)
                {
                    level[r.head.rel] = need;
                    changed = true;
                    if (need > n)
                    {
                        throw DatalogError(DatalogError::Kind::UnstratifiableProgram,
                            "negation cycle through " + program.schema().decl(r.head.rel).name);
                    }
                }
            }
        }
    }

    std::map<size_t, Stratum> by_level;
    for (size_t i = 0; i < program.rules().size(); ++i)
    {
        const RelId head = program.rules()[i].head.rel;
        Stratum& s = by_level[level[head]];
        s.rules.push_back(i);
        if (std::find(s.relations.begin(), s.relations.end(), head) == s.relations.end())
            s.relations.push_back(head);
    }
    std::vector<Stratum> out;
    for (auto& [lvl, s] : by_level)
    {
        std::sort(s.relations.begin(), s.relations.end());
        out.push_back(std::move(s));
    }
    return out;
}

Value Symbols::intern(const Address& a)
{
    return addresses_.intern(a);
}
Value Symbols::intern(const Wei& w)
{
    return weis_.intern(w);
}
Value Symbols::intern(const BigInt& b)
{
    return bigints_.intern(b);
}
Value Symbols::intern(const Word& k)
{
    return keys_.intern(k);
}

std::string Symbols::render(ColumnType type, Value v) const
{
    switch (type)
    {
    case ColumnType::Value:
        return "v" + std::to_string(v);
    case ColumnType::Number:
        return std::to_string(v);
    case ColumnType::Address:
        return address(v).to_hex();
    case ColumnType::Wei:
        return to_string(wei(v));
    case ColumnType::BigInt:
        return to_string(bigint(v));
    case ColumnType::Key:
        return key(v).to_hex();
    }
    return {};
}

Tuple Relation::project(const Tuple& t, uint32_t mask) noexcept
{
    Tuple k{};
    for (size_t c = 0; c < kMaxArity; ++c)
        if (mask & (1u << c))
            k[c] = t[c];
    return k;
}

uint32_t Relation::Index::find(const Tuple& t) const
{
    if (slots.empty())
        return kNone;
    const Tuple key = project(t, mask);
    const size_t m = slots.size() - 1;
    for (size_t i = TupleHash{}(key) & m;; i = (i + 1) & m)
    {
        const Slot& s = slots[i];
        if (s.head == kNone)
            return kNone;
        if (s.key == key)
            return s.head;
    }
}

void Relation::Index::grow()
{
    std::vector<Slot> old = std::move(slots);
    slots.assign(old.empty() ? 16 : old.size() * 2, Slot{});
    const size_t m = slots.size() - 1;
    for (const Slot& s : old)
    {
        if (s.head == kNone)
            continue;
        size_t i = TupleHash{}(s.key) & m;
        while (slots[i].head != kNone)
            i = (i + 1) & m;
        slots[i] = s;
    }
}

bool Relation::Index::link(const Tuple& t, uint32_t row, bool unique)
{
    if ((used + 1) * 4 > slots.size() * 3)
        grow();
    const Tuple key = project(t, mask);
    const size_t m = slots.size() - 1;
    size_t i = TupleHash{}(key) & m;
    while (slots[i].head != kNone && slots[i].key != key)
        i = (i + 1) & m;
    Slot& s = slots[i];
    if (s.head != kNone && unique)
        return false;
    if (s.head == kNone)
    {
        s.key = key;
        ++used;
    }
    if (next.size() <= row)
        next.resize(row + 1, kNone);
    next[row] = s.head;
    s.head = row;
    return true;
}

Relation::Relation(uint8_t arity) : arity_{arity}
{
    indexes_.emplace_back();
    indexes_.front().mask = (1u << arity) - 1;
}

bool Relation::insert(const Tuple& t)
{
    const auto id = static_cast<uint32_t>(rows_.size());
    if (!indexes_.front().link(t, id, true))
        return false;
    rows_.push_back(t);
    for (size_t i = 1; i < indexes_.size(); ++i)
        indexes_[i].link(t, id, false);
    return true;
}

Relation::Chain Relation::lookup(uint32_t mask, const Tuple& key)
{
    auto it = std::find_if(indexes_.begin(), indexes_.end(), [&](const Index& x) { return x.mask == mask; });
    if (it == indexes_.end())
    {
        Index index;
        index.mask = mask;
        for (uint32_t id = 0; id < rows_.size(); ++id)
            index.link(rows_[id], id, false);
        indexes_.push_back(std::move(index));
        it = std::prev(indexes_.end());
    }
    return {it->find(key), &it->next};
}

std::vector<Tuple> Relation::sorted() const
{
    std::vector<Tuple> out = rows_;
    std::sort(out.begin(), out.end());
    return out;
}

Database::Database(std::shared_ptr<const Schema> schema) : schema_{std::move(schema)}
{
    relations_.reserve(schema_->size());
    for (size_t i = 0; i < schema_->size(); ++i)
        relations_.emplace_back(static_cast<uint8_t>(schema_->decl(static_cast<RelId>(i)).columns.size()));
}

std::vector<std::vector<std::string>> Database::render(RelId id) const
{
    const auto& decl = schema_->decl(id);
    std::vector<std::vector<std::string>> out;
    for (const Tuple& t : relation(id).sorted())
    {
        std::vector<std::string> row;
        for (size_t c = 0; c < decl.columns.size(); ++c)
            row.push_back(symbols_.render(decl.columns[c], t[c]));
        out.push_back(std::move(row));
    }
    return out;
}

namespace
{
enum class View : uint8_t
{
    Full,
    Old,
    Delta,
};

struct PlanStep
{
    enum class Kind : uint8_t
    {
        Scan,
        Negation,
        Test,
    };
    Kind kind = Kind::Scan;
    const Atom* atom = nullptr;
    Guard guard{};
    uint32_t mask = 0;                     ///< columns whose value is known before the scan
    std::array<int16_t, kMaxArity> bind{-1, -1, -1, -1};  ///< variable bound by a column
    std::array<int16_t, kMaxArity> check{-1, -1, -1, -1};  ///< repeated variable within the atom
    View view = View::Full;
    bool existential = false;
};

struct Plan
{
    const Rule* rule = nullptr;
    std::vector<PlanStep> steps;
};

/// Orders a rule body for evaluation with `first` (if any) scanned first. Guards and
/// negations run as soon as their variables are bound.
Plan make_plan(const Rule& rule, std::optional<size_t> delta, const std::set<RelId>& recursive)
{
    Plan plan;
    plan.rule = &rule;
    std::vector<bool> bound(rule.num_vars, false);
    std::vector<size_t> order;
    if (delta)
        order.push_back(*delta);
    for (size_t i = 0; i < rule.body.size(); ++i)
        if (!rule.body[i].negated && (!delta || i != *delta))
            order.push_back(i);

    std::vector<bool> guard_done(rule.guards.size(), false);
    std::vector<bool> neg_done(rule.body.size(), false);

    const auto atom_bound = [&](const Atom& a) {
        for (size_t c = 0; c < a.arity; ++c)
            if (a.var[c] >= 0 && !bound[static_cast<size_t>(a.var[c])])
                return false;
        return true;
    };
    const auto flush = [&] {
        for (size_t g = 0; g < rule.guards.size(); ++g)
        {
            if (!guard_done[g] && bound[rule.guards[g].a] && bound[rule.guards[g].b])
            {
                PlanStep s;
                s.kind = PlanStep::Kind::Test;
                s.guard = rule.guards[g];
                plan.steps.push_back(s);
                guard_done[g] = true;
            }
        }
        for (size_t i = 0; i < rule.body.size(); ++i)
        {
            const Atom& a = rule.body[i];
            if (a.negated && !neg_done[i] && atom_bound(a))
            {
                PlanStep s;
                s.kind = PlanStep::Kind::Negation;
                s.atom = &a;
                for (size_t c = 0; c < a.arity; ++c)
                    if (a.is_const[c] || a.var[c] >= 0)
                        s.mask |= 1u << c;
                plan.steps.push_back(s);
                neg_done[i] = true;
            }
        }
    };

    flush();
    for (const size_t idx : order)
    {
        const Atom& a = rule.body[idx];
        PlanStep s;
        s.kind = PlanStep::Kind::Scan;
        s.atom = &a;
        if (delta && idx == *delta)
            s.view = View::Delta;
        else if (delta && idx < *delta && recursive.count(a.rel))
            s.view = View::Old;
        for (size_t c = 0; c < a.arity; ++c)
        {
            if (a.is_const[c])
                s.mask |= 1u << c;
            else if (a.var[c] >= 0)
            {
                const auto v = static_cast<size_t>(a.var[c]);
                if (bound[v])
                {
                    bool first_here = true;
                    for (size_t p = 0; p < c; ++p)
                        if (s.bind[p] == a.var[c])
                            first_here = false;
                    if (first_here)
                        s.mask |= 1u << c;
                    else
                        s.check[c] = a.var[c];
                }
                else
                {
                    s.bind[c] = a.var[c];
                    bound[v] = true;
                }
            }
        }
        plan.steps.push_back(s);
        flush();
    }

    // A scan is existential when nothing it binds is read afterwards.
    std::vector<bool> used_later(rule.num_vars, false);
    for (size_t c = 0; c < rule.head.arity; ++c)
        if (rule.head.var[c] >= 0)
            used_later[static_cast<size_t>(rule.head.var[c])] = true;
    for (size_t k = plan.steps.size(); k-- > 0;)
    {
        PlanStep& s = plan.steps[k];
        if (s.kind == PlanStep::Kind::Test)
        {
            used_later[s.guard.a] = used_later[s.guard.b] = true;
            continue;
        }
        if (s.kind == PlanStep::Kind::Scan)
        {
            bool any = false;
            for (size_t c = 0; c < kMaxArity; ++c)
                if (s.bind[c] >= 0 && used_later[static_cast<size_t>(s.bind[c])])
                    any = true;
            s.existential = !any;
        }
        for (size_t c = 0; c < s.atom->arity; ++c)
            if (s.atom->var[c] >= 0)
                used_later[static_cast<size_t>(s.atom->var[c])] = true;
    }
    return plan;
}

struct Range
{
    size_t old_end = 0;   ///< rows before the current delta
    size_t full_end = 0;  ///< rows visible this round
};

class Evaluator
{
public:
    Evaluator(Database& db, const Deadline& deadline) : db_{db}, deadline_{deadline} {}

    void set_ranges(std::vector<Range> ranges) { ranges_ = std::move(ranges); }

    void run(const Plan& plan, std::unordered_map<RelId, std::vector<Tuple>>& out)
    {
        plan_ = &plan;
        out_ = &out[plan.rule->head.rel];
        head_rel_ = &db_.relation(plan.rule->head.rel);
        env_.assign(plan.rule->num_vars, 0);
        exec(0);
    }

private:
    bool exec(size_t k)
    {
        const auto& steps = plan_->steps;
        if (k == steps.size())
        {
            emit();
            return true;
        }
        const PlanStep& s = steps[k];
        switch (s.kind)
        {
        case PlanStep::Kind::Test:
            return test(s.guard) && exec(k + 1);
        case PlanStep::Kind::Negation:
        {
            const Tuple key = make_key(s);
            Relation& rel = db_.relation(s.atom->rel);
            const bool present = s.mask == (1u << s.atom->arity) - 1
                                     ? rel.contains(key)
                                     : rel.lookup(s.mask, key).head != Relation::kNone;
            return !present && exec(k + 1);
        }
        case PlanStep::Kind::Scan:
            return scan(s, k);
        }
        return false;
    }

    bool scan(const PlanStep& s, size_t k)
    {
        Relation& rel = db_.relation(s.atom->rel);
        const Range& r = ranges_[s.atom->rel];
        size_t lo = 0;
        size_t hi = r.full_end;
        if (s.view == View::Old)
            hi = r.old_end;
        else if (s.view == View::Delta)
            lo = r.old_end;
        if (lo >= hi)
            return false;

        bool any = false;
        const auto visit = [&](const Tuple& t) {
            for (size_t c = 0; c < kMaxArity; ++c)
                if (s.bind[c] >= 0)
                    env_[static_cast<size_t>(s.bind[c])] = t[c];
            for (size_t c = 0; c < kMaxArity; ++c)
                if (s.check[c] >= 0 && t[c] != env_[static_cast<size_t>(s.check[c])])
                    return false;
            const bool ok = exec(k + 1);
            any = any || ok;
            return ok;
        };

        if (s.mask == 0)
        {
            for (size_t i = lo; i < hi; ++i)
                if (visit(rel.row(i)) && s.existential)
                    break;
            return any;
        }
        const auto chain = rel.lookup(s.mask, make_key(s));
        for (uint32_t id = chain.head; id != Relation::kNone && id >= lo; id = (*chain.next)[id])
            if (id < hi && visit(rel.row(id)) && s.existential)
                break;
        return any;
    }

    Tuple make_key(const PlanStep& s) const
    {
        Tuple key{};
        for (size_t c = 0; c < s.atom->arity; ++c)
        {
            if (!(s.mask & (1u << c)))
                continue;
            key[c] = s.atom->is_const[c] ? s.atom->constant[c] : env_[static_cast<size_t>(s.atom->var[c])];
        }
        return key;
    }

    bool test(const Guard& g) const
    {
        const Value a = env_[g.a];
        const Value b = env_[g.b];
        switch (g.op)
        {
        case GuardSpec::Op::Lt:
            return a < b;
        case GuardSpec::Op::Ne:
            return a != b;
        case GuardSpec::Op::Eq:
            return a == b;
        case GuardSpec::Op::Succ:
            return a + 1 == b && a + 1 != 0;
        }
        return false;
    }

    void emit()
    {
        const Atom& h = plan_->rule->head;
        Tuple t{};
        for (size_t c = 0; c < h.arity; ++c)
            t[c] = h.is_const[c] ? h.constant[c] : env_[static_cast<size_t>(h.var[c])];
        if (!head_rel_->contains(t))
            out_->push_back(t);
        if ((++emitted_ & 0xffff) == 0)
            deadline_.check();
    }

    Database& db_;
    const Deadline& deadline_;
    std::vector<Range> ranges_;
    const Plan* plan_ = nullptr;
    std::vector<Tuple>* out_ = nullptr;
    Relation* head_rel_ = nullptr;
    std::vector<Value> env_;
    size_t emitted_ = 0;
};

}  // namespace

FixpointStats run_fixpoint(Database& db, const Program& program, const Deadline& deadline)
{
    FixpointStats stats;
    const size_t n = db.schema().size();
    Evaluator eval(db, deadline);

    const auto snapshot = [&](const std::set<RelId>& recursive, const std::vector<size_t>& old_end) {
        std::vector<Range> ranges(n);
        for (RelId r = 0; r < n; ++r)
        {
            const size_t size = db.relation(r).size();
            ranges[r] = {recursive.count(r) ? old_end[r] : size, size};
        }
        return ranges;
    };
    const auto commit = [&](std::unordered_map<RelId, std::vector<Tuple>>& pending) {
        bool grew = false;
        for (auto& [rel, tuples] : pending)
        {
            Relation& target = db.relation(rel);
            for (const Tuple& t : tuples)
                if (target.insert(t))
                {
                    ++stats.derived;
                    grew = true;
                }
            tuples.clear();
        }
        return grew;
    };

    for (const Stratum& stratum : stratify(program))
    {
        deadline.check();
        const std::set<RelId> recursive(stratum.relations.begin(), stratum.relations.end());

        std::vector<Plan> initial;
        std::vector<Plan> incremental;
        for (const size_t ri : stratum.rules)
        {
            const Rule& rule = program.rules()[ri];
            initial.push_back(make_plan(rule, std::nullopt, recursive));
            for (size_t j = 0; j < rule.body.size(); ++j)
                if (!rule.body[j].negated && recursive.count(rule.body[j].rel))
                    incremental.push_back(make_plan(rule, j, recursive));
        }

        std::vector<size_t> old_end(n, 0);
        std::unordered_map<RelId, std::vector<Tuple>> pending;

        // Round 0 evaluates every rule over everything; pre-existing rows of this
        // stratum's relations form the first delta together with the new ones.
        eval.set_ranges(snapshot(recursive, old_end));
        for (const Plan& p : initial)
            eval.run(p, pending);
        ++stats.iterations;
        commit(pending);

        std::vector<size_t> full_end(n, 0);
        for (RelId r = 0; r < n; ++r)
            full_end[r] = db.relation(r).size();

        while (!incremental.empty())
        {
            deadline.check();
            bool has_delta = false;
            for (const RelId r : recursive)
                has_delta = has_delta || full_end[r] > old_end[r];
            if (!has_delta)
                break;

            std::vector<Range> ranges(n);
            for (RelId r = 0; r < n; ++r)
                ranges[r] = {recursive.count(r) ? old_end[r] : full_end[r], full_end[r]};
            eval.set_ranges(std::move(ranges));
            for (const Plan& p : incremental)
                eval.run(p, pending);
            ++stats.iterations;
            commit(pending);
            for (RelId r = 0; r < n; ++r)
            {
                old_end[r] = full_end[r];
                full_end[r] = db.relation(r).size();
            }
        }
    }
    return stats;
}

void dump_relations(const Database& db, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    for (RelId r = 0; r < db.schema().size(); ++r)
    {
        const auto& decl = db.schema().decl(r);
        std::ofstream out(dir / (decl.name + ".facts"));
        if (!out)
            throw std::runtime_error("cannot write " + (dir / decl.name).string());
        for (const auto& row : db.render(r))
        {
            for (size_t c = 0; c < row.size(); ++c)
                out << (c ? "\t" : "") << row[c];
            out << '\n';
        }
    }
}

}  // namespace tracescan::datalog

// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/deadline.hpp>
#include <tracescan/types.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <deque>
#include <unordered_set>
#include <vector>

namespace tracescan::datalog
{
using Value = uint64_t;
inline constexpr size_t kMaxArity = 4;
using Tuple = std::array<Value, kMaxArity>;

struct TupleHash
{
    size_t operator()(const Tuple& t) const noexcept
    {
        uint64_t h = 0x9e3779b97f4a7c15ull;
        for (const Value v : t)
        {
            h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            h *= 0xff51afd7ed558ccdull;
        }
        return static_cast<size_t>(h ^ (h >> 33));
    }
};

/// How a column's raw values are interpreted. Value and Number columns hold their
/// value directly; the others hold ids into the database's symbol tables.
enum class ColumnType : uint8_t
{
    Value,
    Number,
    Address,
    Wei,
    BigInt,
    Key,
};

struct RelationDecl
{
    std::string name;
    std::vector<ColumnType> columns;
};

using RelId = uint32_t;

/// Relation declarations shared by every program and database over them.
class Schema
{
public:
    RelId add(std::string name, std::vector<ColumnType> columns);
    [[nodiscard]] RelId id(std::string_view name) const;
    [[nodiscard]] bool has(std::string_view name) const noexcept;
    [[nodiscard]] const RelationDecl& decl(RelId id) const { return decls_.at(id); }
    [[nodiscard]] size_t size() const noexcept { return decls_.size(); }

private:
    std::vector<RelationDecl> decls_;
    std::unordered_map<std::string, RelId> by_name_;
};

class DatalogError : public std::runtime_error
{
public:
    enum class Kind
    {
        UnstratifiableProgram,
        UnsafeRule,
        UnknownRelation,
        UnknownQuery,
        ArityMismatch,
    };
    DatalogError(Kind kind, const std::string& what) : std::runtime_error(what), kind_{kind} {}
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Rule-building vocabulary. A term is a variable name, "_" (anonymous), or a constant.
struct Term
{
    enum class Kind : uint8_t
    {
        Var,
        Wildcard,
        Const,
    };
    Kind kind = Kind::Wildcard;
    std::string var;
    Value value = 0;

    Term(const char* name);  // NOLINT(google-explicit-constructor)
    static Term constant(Value v)
    {
        Term t{"_"};
        t.kind = Kind::Const;
        t.value = v;
        return t;
    }
};

struct AtomSpec
{
    std::string relation;
    std::vector<Term> terms;
    bool negated = false;
};

struct GuardSpec
{
    enum class Op : uint8_t
    {
        Lt,    ///< a < b
        Ne,    ///< a != b
        Eq,    ///< a == b
        Succ,  ///< a + 1 == b
    };
    Op op;
    std::string a;
    std::string b;
};

template <class... T>
AtomSpec atom(std::string relation, T... terms)
{
    return AtomSpec{std::move(relation), {Term(terms)...}, false};
}
template <class... T>
AtomSpec neg(std::string relation, T... terms)
{
    return AtomSpec{std::move(relation), {Term(terms)...}, true};
}
inline GuardSpec lt(std::string a, std::string b) { return {GuardSpec::Op::Lt, std::move(a), std::move(b)}; }
inline GuardSpec ne(std::string a, std::string b) { return {GuardSpec::Op::Ne, std::move(a), std::move(b)}; }
inline GuardSpec eq(std::string a, std::string b) { return {GuardSpec::Op::Eq, std::move(a), std::move(b)}; }
inline GuardSpec succ(std::string a, std::string b) { return {GuardSpec::Op::Succ, std::move(a), std::move(b)}; }

struct RuleSpec
{
    AtomSpec head;
    std::vector<AtomSpec> body;
    std::vector<GuardSpec> guards;
};

/// Compiled forms: variables are dense indices, relations are ids.
struct Atom
{
    RelId rel = 0;
    uint8_t arity = 0;
    std::array<int16_t, kMaxArity> var{-1, -1, -1, -1};  ///< -1: not a variable
    std::array<bool, kMaxArity> is_const{};
    Tuple constant{};
    bool negated = false;
};

struct Guard
{
    GuardSpec::Op op;
    uint16_t a;
    uint16_t b;
};

struct Rule
{
    Atom head;
    std::vector<Atom> body;
    std::vector<Guard> guards;
    uint16_t num_vars = 0;
    std::string text;
};

struct Stratum
{
    std::vector<size_t> rules;  ///< indices into Program::rules()
    std::vector<RelId> relations;  ///< heads defined here
};

class Program
{
public:
    explicit Program(std::shared_ptr<const Schema> schema) : schema_{std::move(schema)} {}

    /// Compiles and appends a rule; throws DatalogError on unknown relations, arity
    /// mismatch, or range-restriction/safety violations.
    Program& add(const RuleSpec& spec);

    [[nodiscard]] const Schema& schema() const noexcept { return *schema_; }
    [[nodiscard]] std::shared_ptr<const Schema> schema_ptr() const noexcept { return schema_; }
    [[nodiscard]] const std::vector<Rule>& rules() const noexcept { return rules_; }

    /// Relations that appear in some rule head.
    [[nodiscard]] std::vector<RelId> derived() const;

private:
    std::shared_ptr<const Schema> schema_;
    std::vector<Rule> rules_;
};

/// Orders rules so that every negated dependency points to a strictly lower stratum.
std::vector<Stratum> stratify(const Program& program);

/// Interned values for the non-numeric column types.
class Symbols
{
public:
    Value intern(const Address& a);
    Value intern(const Wei& w);
    Value intern(const BigInt& b);
    Value intern(const Word& k);

    [[nodiscard]] const Address& address(Value id) const { return addresses_.values.at(id); }
    [[nodiscard]] const Wei& wei(Value id) const { return weis_.values.at(id); }
    [[nodiscard]] const BigInt& bigint(Value id) const { return bigints_.values.at(id); }
    [[nodiscard]] const Word& key(Value id) const { return keys_.values.at(id); }

    /// Renders a column value for reports and dumps.
    [[nodiscard]] std::string render(ColumnType type, Value v) const;

private:
    template <class T, class Less>
    struct Table
    {
        std::vector<T> values;
        std::map<T, Value, Less> ids;
        Value intern(const T& v)
        {
            auto [it, inserted] = ids.emplace(v, values.size());
            if (inserted)
                values.push_back(v);
            return it->second;
        }
    };
    Table<Address, std::less<>> addresses_;
    Table<Wei, std::less<>> weis_;
    Table<BigInt, std::less<>> bigints_;
    Table<Word, std::less<>> keys_;
};

/// Set of tuples with lazily built hash indexes per bound-column mask. Rows are
/// append-only, so a row range [lo, hi) identifies "old", "delta" and "full" views.
class Relation
{
public:
    static constexpr uint32_t kNone = ~0u;

    explicit Relation(uint8_t arity = 0);

    /// Returns true if the tuple was new.
    bool insert(const Tuple& t);
    [[nodiscard]] bool contains(const Tuple& t) const { return indexes_.front().find(t) != kNone; }
    [[nodiscard]] size_t size() const noexcept { return rows_.size(); }
    [[nodiscard]] uint8_t arity() const noexcept { return arity_; }
    [[nodiscard]] const Tuple& row(size_t i) const noexcept { return rows_[i]; }
    [[nodiscard]] const std::vector<Tuple>& rows() const noexcept { return rows_; }

    /// Rows sharing a key, newest first: follow `next` from `head` until kNone.
    struct Chain
    {
        uint32_t head = kNone;
        const std::vector<uint32_t>* next = nullptr;
    };

    /// Rows whose columns in `mask` equal those of `key`. Valid until the next insert.
    [[nodiscard]] Chain lookup(uint32_t mask, const Tuple& key);

    /// Rows in lexicographic order.
    [[nodiscard]] std::vector<Tuple> sorted() const;

private:
    /// Open-addressing map from projected key to the newest row with that key.
    struct Index
    {
        struct Slot
        {
            Tuple key{};
            uint32_t head = kNone;
        };
        uint32_t mask = 0;
        std::vector<Slot> slots;
        size_t used = 0;
        std::vector<uint32_t> next;

        [[nodiscard]] uint32_t find(const Tuple& t) const;
        /// Links `row`; returns false (and links nothing) if `unique` and the key exists.
        bool link(const Tuple& t, uint32_t row, bool unique);
        void grow();
    };
    static Tuple project(const Tuple& t, uint32_t mask) noexcept;

    uint8_t arity_;
    std::vector<Tuple> rows_;
    std::deque<Index> indexes_;  ///< [0] is the full-tuple index used for dedup; deque keeps chains stable
};

/// Relation store for one analysis scope.
class Database
{
public:
    explicit Database(std::shared_ptr<const Schema> schema);

    [[nodiscard]] const Schema& schema() const noexcept { return *schema_; }
    [[nodiscard]] Relation& relation(RelId id) { return relations_.at(id); }
    [[nodiscard]] const Relation& relation(RelId id) const { return relations_.at(id); }
    [[nodiscard]] Relation& relation(std::string_view name) { return relation(schema_->id(name)); }
    [[nodiscard]] const Relation& relation(std::string_view name) const
    {
        return relation(schema_->id(name));
    }
    [[nodiscard]] Symbols& symbols() noexcept { return symbols_; }
    [[nodiscard]] const Symbols& symbols() const noexcept { return symbols_; }

    /// Rendered rows of a relation, lexicographically sorted by raw value.
    [[nodiscard]] std::vector<std::vector<std::string>> render(RelId id) const;

private:
    std::shared_ptr<const Schema> schema_;
    std::vector<Relation> relations_;
    Symbols symbols_;
};

struct FixpointStats
{
    size_t iterations = 0;
    size_t derived = 0;
};

/// Computes the least model of `program` over `db`, stratum by stratum, with
/// semi-naive iteration. Derived tuples are added to `db` in place.
FixpointStats run_fixpoint(Database& db, const Program& program, const Deadline& deadline = {});

/// Writes one tab-separated file per relation into `dir`.
void dump_relations(const Database& db, const std::filesystem::path& dir);

}  // namespace tracescan::datalog

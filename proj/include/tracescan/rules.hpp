// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/datalog.hpp>
#include <tracescan/facts.hpp>

#include <array>
#include <string_view>

namespace tracescan
{
/// The shipped rule sets. `reference` states every rule in its textbook form,
/// materialising the full `depends` closure; `production` derives the same shared
/// relations and query answers through left-linear recursion over is_output.
enum class Catalog
{
    reference,
    production,
};

/// Which rules a program contains: the type rules, everything else, or both.
enum class Phase
{
    types,
    main,
    all,
};

inline constexpr std::array<std::string_view, 6> kQueryNames = {"re", "ue", "le", "to", "io", "ua"};

/// Relations both catalogs define, compared by the equivalence tests.
inline constexpr std::array<std::string_view, 13> kSharedRelations = {"call_flow", "inferred_size",
    "inferred_signed", "depends_caller", "depends_data", "sensitive", "caller_checked", "q_re", "q_ue",
    "q_le", "q_to", "q_io", "q_ua"};

/// Every base, derived and query relation of the analysis.
std::shared_ptr<const datalog::Schema> analysis_schema();

/// The rules of `catalog` restricted to `phase`. Programs are built once and shared.
const datalog::Program& program(Catalog catalog, Phase phase = Phase::all);

/// Interns and inserts every fact of `facts` into `db`.
void load_facts(datalog::Database& db, const FactDB& facts);

/// Reads inferred_size/inferred_signed back out of an evaluated database.
InferredTypes read_inferred_types(const datalog::Database& db, size_t num_values);

/// Satisfying bindings of a registered query ("re", "ue", ...), ordered
/// lexicographically by column value. Throws DatalogError(UnknownQuery).
std::vector<datalog::Tuple> query(const datalog::Database& db, std::string_view name);

/// Full per-transaction pipeline over extracted facts: type rules, arithmetic
/// expectations, then the remaining rules and queries.
datalog::Database evaluate(ExtractionResult& extraction, Catalog catalog = Catalog::production,
    const Deadline& deadline = {});

/// Evaluates a block-scoped database (storage facts of several transactions) for TO.
datalog::Database evaluate_storage(const std::vector<const FactDB*>& transactions,
    const Deadline& deadline = {});

}  // namespace tracescan

// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <tracescan/datalog.hpp>

#include <map>
#include <set>
#include <vector>

namespace tracescan::testing
{
using TupleSet = std::set<datalog::Tuple>;
using RelationSets = std::map<datalog::RelId, TupleSet>;

/// Relation contents of a database as plain sets.
RelationSets snapshot(const datalog::Database& db);

/// Stratum number per derived relation, computed by iterating the level
/// constraints to a fixed point. Returns false if some negation is cyclic.
bool naive_strata(const datalog::Program& program, std::map<datalog::RelId, int>& level);

/// Least model by naive iteration: every rule is re-evaluated against the full
/// current sets by nested loops until nothing changes, stratum by stratum.
RelationSets naive_fixpoint(const datalog::Program& program, RelationSets base);

}  // namespace tracescan::testing

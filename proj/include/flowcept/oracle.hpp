#pragma once

// Reference implementations used only for cross-checking. Everything here is
// computed straight from the definitions with plain sorted-vector set algebra
// and brute-force scans; none of the lattice or measurement code is reused.

#include <cstdint>
#include <string>
#include <vector>

#include "flowcept/context.hpp"
#include "flowcept/measurement.hpp"

namespace flowcept::oracle {

using IdSet = std::vector<uint32_t>; // sorted, unique

// All closed matchfield sets (concept intents), found by closing the flow
// rows under pairwise intersection. Seeded with the full matchfield set so
// the bottom concept is always present. Throws if the family would exceed
// max_size (guard against exponential blow-up on adversarial inputs).
std::vector<IdSet> enumerate_intents(const FormalContext& ctx, size_t max_size = 200000);

// Same family by brute force over all 2^|F| flow subsets (each subset's
// common matchfields form an intent). Only for tiny contexts; throws when
// |F| > 20. The two strategies cross-check each other in tests.
std::vector<IdSet> enumerate_intents_powerset(const FormalContext& ctx);

// Per-flow signature: character i is '1' iff query i's matchfields are all
// carried by the flow. Index = flow id.
std::vector<std::string> signatures(const FormalContext& ctx, const std::vector<QuerySpec>& specs);

// Flows grouped by identical non-zero signature; each cell holds flow names
// sorted by flow id, cells ordered by their smallest flow id. The number of
// cells is the provable minimum counter count.
std::vector<std::vector<std::string>> minimal_partition(const FormalContext& ctx,
                                                        const std::vector<QuerySpec>& specs);

size_t minimal_counter_count(const FormalContext& ctx, const std::vector<QuerySpec>& specs);

// Names of flows that carry every matchfield of the query, by direct scan.
std::vector<std::string> answer_direct(const FormalContext& ctx, const QuerySpec& spec);

} // namespace flowcept::oracle

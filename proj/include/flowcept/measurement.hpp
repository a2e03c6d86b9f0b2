#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowcept/bitset.hpp"
#include "flowcept/context.hpp"
#include "flowcept/lattice.hpp"

namespace flowcept {

// Raw form of a traffic query, independent of any context numbering.
struct QuerySpec {
  std::string label;
  std::vector<std::string> matchfields;
};

struct Query {
  uint32_t id = 0;  // position in the query set; also its bit in query vectors
  std::string label;
  Bitset matchfields;
};

using QuerySet = std::vector<Query>;

// Validates: unique non-empty labels, non-empty matchfield lists, labels known
// to the context.  Query ids are positions in the returned vector.
QuerySet build_queries(const FormalContext& ctx, const std::vector<QuerySpec>& specs);

/* Everything the measurement layer derives from a lattice + query set:
 *
 *   vector v(c): bit q set iff query q's matchfields are contained in c's
 *     intent; non-increasing from bottom to top.
 *   target of q: the unique maximal concept whose intent contains q; its
 *     extent is exactly the flow set q matches.  A target with an empty
 *     extent marks the query unsatisfiable (zero answer, not an error).
 *   projections: concepts whose vector popcount strictly exceeds every
 *     direct parent's; equivalently the meets of non-empty target subsets.
 *     Vectors are unique across projections.
 *   grounds: projections holding at least one flow; flow f is grounded at
 *     the projection sharing the vector of f's flow concept (the minimal
 *     concept holding f).  Grounded cells partition the monitored flows, and their
 *     count is the provable minimum number of counters.  Flows with an
 *     all-zero vector match no query and stay unmonitored. */
struct MeasurementSupport {
  std::vector<Bitset> vectors;       // concept id -> query vector
  std::vector<uint32_t> target;      // query id -> target concept
  std::vector<char> unsatisfiable;   // query id -> 1 when target extent is empty
  std::set<uint32_t> projections;
  std::set<uint32_t> grounds;
  std::unordered_map<Bitset, uint32_t> projection_by_vector;  // non-empty vectors only
  std::unordered_map<uint32_t, std::vector<uint32_t>> grounded;  // ground -> sorted flow ids
  std::vector<int64_t> mu;           // flow id -> ground concept, -1 unmonitored

  std::set<uint32_t> target_set() const;  // distinct target concepts
};

// Full recomputation (used for initial builds and after query-set changes).
MeasurementSupport compute_support(const ConceptLattice& lat, const QuerySet& queries);

struct Retarget {
  uint32_t query = 0;
  uint32_t from = 0;
  uint32_t to = 0;
};

struct SupportDelta {
  std::vector<Retarget> retargeted;
  // (former projection, successor): the new concept took over the former's
  // vector, projection status and grounded flows
  std::vector<std::pair<uint32_t, uint32_t>> eclipsed;
  int64_t new_flow_ground = -1;  // -1 when the inserted flow matches no query
  bool recomputed = false;       // tiny-base fallback recomputed from scratch
};

// Incremental status repair after ConceptLattice::insert_flow: computes the
// new concepts' vectors, retargets queries from genitors, applies projection
// and eclipse rules, and grounds the inserted flow.
SupportDelta apply_insertion(MeasurementSupport& sup, const ConceptLattice& lat,
                             const QuerySet& queries, const StructuralDelta& structure);

struct FlowAddReport {
  StructuralDelta structure;
  SupportDelta support;
};

// One-call flow insertion: structural repair + status repair, atomic for
// user-facing failures (validation happens before any mutation).
FlowAddReport add_flow(FormalContext& ctx, ConceptLattice& lat, MeasurementSupport& sup,
                       const QuerySet& queries, const std::string& name,
                       const std::vector<std::string>& matchfield_labels);

// Exact answer: union of grounded flows over grounds whose vector has bit q.
Bitset answer_flowset(const MeasurementSupport& sup, uint32_t query_id);

// Grounded-flow cells, ordered by ground concept id; pairwise disjoint.
std::vector<std::vector<uint32_t>> partition(const MeasurementSupport& sup);

// Internal consistency of the support against its lattice + queries
// (definitional vectors, target maximality, projection popcounts, vector
// uniqueness, ground partition, mu wiring).  Throws ErrorKind::verify.
void check_support_invariants(const MeasurementSupport& sup, const ConceptLattice& lat,
                              const QuerySet& queries);

}  // namespace flowcept

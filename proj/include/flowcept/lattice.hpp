#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowcept/bitset.hpp"
#include "flowcept/context.hpp"

namespace flowcept {

struct Concept {
  uint32_t id = 0;
  Bitset extent;  // flows
  Bitset intent;  // matchfields; extent and intent mutually determine each other
  std::vector<uint32_t> parents;   // direct covers above (larger extents)
  std::vector<uint32_t> children;  // direct covers below
};

// Result of one incremental flow insertion, structural part only.
struct StructuralDelta {
  uint32_t flow_id = 0;
  Bitset flow_matchfields;
  std::vector<uint32_t> modified;  // existing concepts whose extent gained the flow
  // (new concept, genitor) in creation order; the genitor is the old concept
  // whose intent is the closure of the new one and is always a direct child
  std::vector<std::pair<uint32_t, uint32_t>> created;
  bool rebuilt = false;    // true when the tiny-base fallback rebuilt from scratch
  uint64_t set_ops = 0;    // primitive set operations spent (complexity guard)
};

/* All concepts of a context ordered by extent inclusion, with the cover
 * (Hasse) relation materialised as parent/child links.  Concept ids are
 * assigned in creation order and never reused; different construction
 * orders may number the same concept differently, so anything persisted
 * is keyed by intent, not id. */
class ConceptLattice {
public:
  // Top-down construction: start from (all flows, their common matchfields),
  // derive each concept's lower covers by intersecting its extent with every
  // absent matchfield column, keeping the maximal distinct intersections.
  static ConceptLattice build(const FormalContext& ctx);

  uint32_t size() const { return uint32_t(concepts_.size()); }
  const Concept& concept_at(uint32_t id) const;
  const std::vector<Concept>& concepts() const { return concepts_; }
  uint32_t top() const { return top_; }
  uint32_t bottom() const { return bottom_; }

  // -1 when no concept carries that intent/extent
  int64_t find_by_intent(const Bitset& intent) const;
  int64_t find_by_extent(const Bitset& extent) const;

  bool leq(uint32_t a, uint32_t b) const;  // a below-or-equal b (extent inclusion)
  uint32_t meet(uint32_t a, uint32_t b) const;
  uint32_t join(uint32_t a, uint32_t b) const;

  /* Insert one flow and repair concepts + links in place.  The context is
   * updated too (new matchfield labels are appended on first use).  All
   * user-facing validation runs before anything is touched; afterwards the
   * whole plan is applied, so a rejected insertion leaves no trace. */
  StructuralDelta insert_flow(FormalContext& ctx, const std::string& name,
                              const std::vector<std::string>& matchfield_labels);

  // ids sorted by decreasing extent size, ties by id (canonical scan order)
  std::vector<uint32_t> ids_by_extent_size() const;

  // Full structural audit: mutual closure of every concept, intent/extent
  // uniqueness, links = exact cover relation.  Throws ErrorKind::verify.
  // The quadratic cover-relation part is skipped when the lattice has more
  // than cover_check_limit concepts (closure checks always run).
  void check_invariants(const FormalContext& ctx, size_t cover_check_limit = SIZE_MAX) const;

private:
  uint32_t new_concept(Bitset extent, Bitset intent);
  void link(uint32_t parent, uint32_t child);
  void unlink(uint32_t parent, uint32_t child);
  bool linked(uint32_t parent, uint32_t child) const;

  std::vector<Concept> concepts_;
  std::unordered_map<Bitset, uint32_t> intent_index_;
  std::unordered_map<Bitset, uint32_t> extent_index_;
  uint32_t top_ = 0;
  uint32_t bottom_ = 0;
};

}  // namespace flowcept

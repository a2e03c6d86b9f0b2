#include "flowcept/measurement.hpp"

#include <algorithm>

#include "flowcept/errors.hpp"

namespace flowcept {

QuerySet build_queries(const FormalContext& ctx, const std::vector<QuerySpec>& specs) {
  QuerySet out;
  out.reserve(specs.size());
  std::set<std::string> seen;
  for (const QuerySpec& spec : specs) {
    require(!spec.label.empty(), ErrorKind::constraint, "query label must not be empty");
    require(seen.insert(spec.label).second, ErrorKind::constraint,
            "duplicate query label '" + spec.label + "'");
    require(!spec.matchfields.empty(), ErrorKind::constraint,
            "query '" + spec.label + "' has no matchfields");
    Query q;
    q.id = uint32_t(out.size());
    q.label = spec.label;
    for (const std::string& label : spec.matchfields) {
      int64_t m = ctx.find_matchfield(label);
      require(m >= 0, ErrorKind::not_found,
              "query '" + spec.label + "' references unknown matchfield '" + label + "'");
      q.matchfields.set(uint32_t(m));
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::set<uint32_t> MeasurementSupport::target_set() const {
  return std::set<uint32_t>(target.begin(), target.end());
}

/* Flow concept of f: the minimal concept holding f; its intent is exactly
 * f's matchfield row.  With flow rows free to contain one another, this need
 * not have a singleton extent (a row contained in another row yields a flow
 * concept holding both flows), so it is found by scanning extents from large
 * to small and keeping the last holder — the unique minimum, since holders
 * of f are closed under meet. */
static std::vector<int64_t> flow_concepts(const ConceptLattice& lat, uint32_t num_flows) {
  std::vector<int64_t> fc(num_flows, -1);
  for (uint32_t cid : lat.ids_by_extent_size())
    lat.concept_at(cid).extent.for_each([&](uint32_t f) {
      if (f < num_flows) fc[f] = int64_t(cid);
    });
  return fc;
}

MeasurementSupport compute_support(const ConceptLattice& lat, const QuerySet& queries) {
  MeasurementSupport sup;
  sup.vectors.assign(lat.size(), {});
  sup.target.assign(queries.size(), 0);
  sup.unsatisfiable.assign(queries.size(), 0);

  // Scan concepts from largest extent down.  The first concept containing a
  // query is its target (the true target's extent is strictly the largest
  // among candidates, so the id tiebreak never decides).  Vectors merge the
  // locally claimed bits with all parents', which yields the definitional
  // value because vectors only grow downwards.
  std::vector<char> claimed(queries.size(), 0);
  for (uint32_t cid : lat.ids_by_extent_size()) {
    const Concept& c = lat.concept_at(cid);
    Bitset v;
    for (const Query& q : queries) {
      if (claimed[q.id]) continue;
      if (q.matchfields.subset_of(c.intent)) {
        claimed[q.id] = 1;
        sup.target[q.id] = cid;
        sup.unsatisfiable[q.id] = c.extent.empty() ? 1 : 0;
        v.set(q.id);
      }
    }
    for (uint32_t p : c.parents) v |= sup.vectors[p];
    sup.vectors[cid] = v;

    size_t own = sup.vectors[cid].count();
    size_t best = 0;
    for (uint32_t p : c.parents) best = std::max(best, sup.vectors[p].count());
    if (own > best) {
      sup.projections.insert(cid);
      require(sup.projection_by_vector.emplace(sup.vectors[cid], cid).second,
              ErrorKind::internal, "distinct projections share a query vector");
    }
  }
  for (const Query& q : queries)
    require(claimed[q.id], ErrorKind::internal, "query '" + q.label + "' found no target");

  // Ground every flow through its flow concept's vector.
  uint32_t num_flows = uint32_t(lat.concept_at(lat.top()).extent.count());
  std::vector<int64_t> fcs = flow_concepts(lat, num_flows);
  sup.mu.assign(num_flows, -1);
  for (uint32_t f = 0; f < num_flows; ++f) {
    int64_t fc = fcs[f];
    require(fc >= 0, ErrorKind::internal,
            "flow " + std::to_string(f) + " has no flow concept");
    const Bitset& v = sup.vectors[uint32_t(fc)];
    if (v.empty()) continue;  // matches no query: unmonitored
    auto it = sup.projection_by_vector.find(v);
    require(it != sup.projection_by_vector.end(), ErrorKind::internal,
            "no projection carries the vector of flow " + std::to_string(f));
    sup.mu[f] = it->second;
    sup.grounded[it->second].push_back(f);
    sup.grounds.insert(it->second);
  }
  return sup;
}

SupportDelta apply_insertion(MeasurementSupport& sup, const ConceptLattice& lat,
                             const QuerySet& queries, const StructuralDelta& structure) {
  SupportDelta sd;
  if (structure.rebuilt) {
    // Tiny-base fallback rebuilt the lattice; concept ids changed wholesale.
    sup = compute_support(lat, queries);
    sd.recomputed = true;
    sd.new_flow_ground = sup.mu[structure.flow_id];
    return sd;
  }

  Bitset satmask;  // queries the inserted flow satisfies
  for (const Query& q : queries)
    if (q.matchfields.subset_of(structure.flow_matchfields)) satmask.set(q.id);

  sup.vectors.resize(lat.size());
  for (auto [cn, gen] : structure.created) {
    // v(new) = v(genitor) AND satmask: q fits in I_gen ∩ f' iff it fits both
    Bitset v = sup.vectors[gen] & satmask;
    sup.vectors[cn] = v;

    for (const Query& q : queries) {
      if (sup.target[q.id] == gen && satmask.test(q.id)) {
        sup.target[q.id] = cn;
        sup.unsatisfiable[q.id] = 0;  // the new concept holds the inserted flow
        sd.retargeted.push_back({q.id, gen, cn});
      }
    }

    size_t own = v.count();
    size_t best = 0;
    for (uint32_t p : lat.concept_at(cn).parents) best = std::max(best, sup.vectors[p].count());
    if (own <= best) continue;

    sup.projections.insert(cn);
    if (sup.vectors[gen].count() == own) {
      // Genitor eclipsed: the new concept exposes the same vector higher up,
      // so it inherits projection status and any grounded flows.
      sup.projections.erase(gen);
      sup.projection_by_vector[v] = cn;  // same key: v == v(genitor)
      sd.eclipsed.emplace_back(gen, cn);
      auto git = sup.grounded.find(gen);
      if (git != sup.grounded.end()) {
        std::vector<uint32_t> flows = std::move(git->second);
        sup.grounded.erase(git);
        sup.grounds.erase(gen);
        for (uint32_t f : flows) sup.mu[f] = int64_t(cn);
        sup.grounded.emplace(cn, std::move(flows));
        sup.grounds.insert(cn);
      }
    } else {
      require(sup.projection_by_vector.emplace(v, cn).second, ErrorKind::internal,
              "new projection collides with an existing vector");
    }
  }

  // A formerly unsatisfiable query stays targeted at the same concept when
  // that concept merely absorbed the flow (row covering its whole intent),
  // but the extent is no longer empty.
  for (const Query& q : queries)
    if (sup.unsatisfiable[q.id] && !lat.concept_at(sup.target[q.id]).extent.empty())
      sup.unsatisfiable[q.id] = 0;

  // Ground the inserted flow through its flow concept — the concept whose
  // intent is exactly the inserted row (created by the sweep, or an existing
  // concept when the row happens to equal a known intent).
  sup.mu.push_back(-1);
  require(sup.mu.size() == structure.flow_id + 1, ErrorKind::internal,
          "flow id out of step with support");
  int64_t fc = lat.find_by_intent(structure.flow_matchfields);
  require(fc >= 0, ErrorKind::internal, "inserted flow has no flow concept");
  const Bitset& v = sup.vectors[uint32_t(fc)];
  if (!v.empty()) {
    auto it = sup.projection_by_vector.find(v);
    require(it != sup.projection_by_vector.end(), ErrorKind::internal,
            "no projection carries the inserted flow's vector");
    uint32_t g = it->second;
    auto& cell = sup.grounded[g];
    cell.insert(std::upper_bound(cell.begin(), cell.end(), structure.flow_id),
                structure.flow_id);
    sup.grounds.insert(g);
    sup.mu[structure.flow_id] = g;
    sd.new_flow_ground = g;
  }
  return sd;
}

FlowAddReport add_flow(FormalContext& ctx, ConceptLattice& lat, MeasurementSupport& sup,
                       const QuerySet& queries, const std::string& name,
                       const std::vector<std::string>& matchfield_labels) {
  FlowAddReport report;
  report.structure = lat.insert_flow(ctx, name, matchfield_labels);
  report.support = apply_insertion(sup, lat, queries, report.structure);
  return report;
}

Bitset answer_flowset(const MeasurementSupport& sup, uint32_t query_id) {
  Bitset out;
  for (uint32_t g : sup.grounds)
    if (sup.vectors[g].test(query_id))
      for (uint32_t f : sup.grounded.at(g)) out.set(f);
  return out;
}

std::vector<std::vector<uint32_t>> partition(const MeasurementSupport& sup) {
  std::vector<std::vector<uint32_t>> cells;
  cells.reserve(sup.grounds.size());
  for (uint32_t g : sup.grounds) cells.push_back(sup.grounded.at(g));
  return cells;
}

void check_support_invariants(const MeasurementSupport& sup, const ConceptLattice& lat,
                              const QuerySet& queries) {
  require(sup.vectors.size() == lat.size(), ErrorKind::verify,
          "support: vector table size mismatch");
  require(sup.target.size() == queries.size(), ErrorKind::verify,
          "support: target table size mismatch");

  // vectors are definitional and non-increasing upward
  for (const Concept& c : lat.concepts()) {
    Bitset expect;
    for (const Query& q : queries)
      if (q.matchfields.subset_of(c.intent)) expect.set(q.id);
    require(sup.vectors[c.id] == expect, ErrorKind::verify,
            "support: vector of concept " + std::to_string(c.id) + " is not definitional");
    for (uint32_t p : c.parents)
      require(sup.vectors[p].subset_of(sup.vectors[c.id]), ErrorKind::verify,
              "support: vector monotonicity violated at concept " + std::to_string(c.id));
  }

  for (const Query& q : queries) {
    uint32_t t = sup.target[q.id];
    const Concept& c = lat.concept_at(t);
    require(q.matchfields.subset_of(c.intent), ErrorKind::verify,
            "support: target of '" + q.label + "' does not contain the query");
    // maximality: no other concept containing q has a larger or equal extent
    for (const Concept& d : lat.concepts())
      if (d.id != t && q.matchfields.subset_of(d.intent))
        require(d.extent.count() < c.extent.count(), ErrorKind::verify,
                "support: target of '" + q.label + "' is not maximal");
    require((sup.unsatisfiable[q.id] != 0) == c.extent.empty(), ErrorKind::verify,
            "support: unsatisfiable flag of '" + q.label + "' is wrong");
  }

  for (const Concept& c : lat.concepts()) {
    size_t own = sup.vectors[c.id].count();
    size_t best = 0;
    for (uint32_t p : c.parents) best = std::max(best, sup.vectors[p].count());
    require((own > best) == (sup.projections.count(c.id) > 0), ErrorKind::verify,
            "support: projection status of concept " + std::to_string(c.id) + " is wrong");
  }
  for (uint32_t t : sup.target_set())
    require(sup.projections.count(t), ErrorKind::verify,
            "support: target outside the projection set");
  for (uint32_t g : sup.grounds)
    require(sup.projections.count(g), ErrorKind::verify,
            "support: ground outside the projection set");

  // grounding wires every monitored flow to the projection with its vector,
  // and the grounded cells partition exactly the monitored flows
  std::vector<char> seen(sup.mu.size(), 0);
  for (const auto& [g, flows] : sup.grounded) {
    require(sup.grounds.count(g), ErrorKind::verify, "support: grounded cell without ground");
    require(!flows.empty(), ErrorKind::verify, "support: empty grounded cell");
    for (uint32_t f : flows) {
      require(f < seen.size() && !seen[f], ErrorKind::verify,
              "support: flow in two grounded cells");
      seen[f] = 1;
      require(sup.mu[f] == int64_t(g), ErrorKind::verify, "support: mu out of sync");
    }
  }
  std::vector<int64_t> fcs = flow_concepts(lat, uint32_t(sup.mu.size()));
  for (uint32_t f = 0; f < sup.mu.size(); ++f) {
    int64_t fc = fcs[f];
    require(fc >= 0, ErrorKind::verify, "support: flow without flow concept");
    const Bitset& v = sup.vectors[uint32_t(fc)];
    if (v.empty()) {
      require(sup.mu[f] == -1, ErrorKind::verify, "support: zero-vector flow is grounded");
    } else {
      require(seen[f] && sup.mu[f] >= 0, ErrorKind::verify, "support: monitored flow ungrounded");
      require(sup.vectors[uint32_t(sup.mu[f])] == v, ErrorKind::verify,
              "support: ground vector differs from flow vector");
    }
  }

  // vector uniqueness across projections
  require(sup.projection_by_vector.size() == sup.projections.size(), ErrorKind::verify,
          "support: projection vector index size mismatch");
  for (uint32_t p : sup.projections) {
    auto it = sup.projection_by_vector.find(sup.vectors[p]);
    require(it != sup.projection_by_vector.end() && it->second == p, ErrorKind::verify,
            "support: projection vector index out of sync");
  }
}

}  // namespace flowcept

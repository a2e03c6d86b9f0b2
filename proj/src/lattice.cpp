#include "flowcept/lattice.hpp"

#include <algorithm>
#include <unordered_set>

#include "flowcept/errors.hpp"

namespace flowcept {

namespace {

bool strict_subset(const Bitset& a, const Bitset& b) { return a != b && a.subset_of(b); }

}  // namespace

const Concept& ConceptLattice::concept_at(uint32_t id) const {
  require(id < concepts_.size(), ErrorKind::not_found, "unknown concept id " + std::to_string(id));
  return concepts_[id];
}

int64_t ConceptLattice::find_by_intent(const Bitset& intent) const {
  auto it = intent_index_.find(intent);
  return it == intent_index_.end() ? -1 : int64_t(it->second);
}

int64_t ConceptLattice::find_by_extent(const Bitset& extent) const {
  auto it = extent_index_.find(extent);
  return it == extent_index_.end() ? -1 : int64_t(it->second);
}

uint32_t ConceptLattice::new_concept(Bitset extent, Bitset intent) {
  uint32_t id = uint32_t(concepts_.size());
  require(intent_index_.emplace(intent, id).second, ErrorKind::internal,
          "duplicate concept intent");
  require(extent_index_.emplace(extent, id).second, ErrorKind::internal,
          "duplicate concept extent");
  concepts_.push_back({id, std::move(extent), std::move(intent), {}, {}});
  return id;
}

void ConceptLattice::link(uint32_t parent, uint32_t child) {
  concepts_[parent].children.push_back(child);
  concepts_[child].parents.push_back(parent);
}

void ConceptLattice::unlink(uint32_t parent, uint32_t child) {
  auto& cs = concepts_[parent].children;
  cs.erase(std::find(cs.begin(), cs.end(), child));
  auto& ps = concepts_[child].parents;
  ps.erase(std::find(ps.begin(), ps.end(), parent));
}

bool ConceptLattice::linked(uint32_t parent, uint32_t child) const {
  const auto& ps = concepts_[child].parents;
  return std::find(ps.begin(), ps.end(), parent) != ps.end();
}

ConceptLattice ConceptLattice::build(const FormalContext& ctx) {
  ConceptLattice lat;
  Bitset all = ctx.all_flows();
  lat.top_ = lat.new_concept(all, ctx.image_of_flows(all));

  // Breadth-first descent.  For each concept, intersecting its extent with
  // every absent matchfield column yields candidate sub-extents; matchfields
  // producing the same extent are faces of the same child and accumulate
  // into its intent, and only the maximal distinct extents are direct
  // children (the rest reappear deeper down).
  std::vector<uint32_t> queue{lat.top_};
  struct Cand {
    Bitset extent;
    std::vector<uint32_t> faces;
  };
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    uint32_t cid = queue[qi];
    const Bitset extent = lat.concepts_[cid].extent;  // copy: concepts_ may grow
    const Bitset intent = lat.concepts_[cid].intent;

    std::vector<Cand> cands;
    std::unordered_map<Bitset, size_t> by_extent;
    for (uint32_t m = 0; m < ctx.num_matchfields(); ++m) {
      if (intent.test(m)) continue;
      Bitset sub = extent & ctx.column(m);
      auto [it, fresh] = by_extent.emplace(sub, cands.size());
      if (fresh)
        cands.push_back({std::move(sub), {m}});
      else
        cands[it->second].faces.push_back(m);
    }

    for (size_t i = 0; i < cands.size(); ++i) {
      bool maximal = true;
      for (size_t j = 0; j < cands.size() && maximal; ++j)
        if (j != i && strict_subset(cands[i].extent, cands[j].extent)) maximal = false;
      if (!maximal) continue;

      Bitset child_intent = intent;
      for (uint32_t m : cands[i].faces) child_intent.set(m);
      int64_t child = lat.find_by_intent(child_intent);
      if (child < 0) {
        child = lat.new_concept(cands[i].extent, std::move(child_intent));
        queue.push_back(uint32_t(child));
      }
      lat.link(cid, uint32_t(child));
    }
  }

  Bitset bottom_extent = ctx.image_of_matchfields(ctx.all_matchfields());
  int64_t bottom = lat.find_by_extent(bottom_extent);
  require(bottom >= 0, ErrorKind::internal, "construction lost the bottom concept");
  lat.bottom_ = uint32_t(bottom);
  return lat;
}

bool ConceptLattice::leq(uint32_t a, uint32_t b) const {
  return concept_at(a).extent.subset_of(concept_at(b).extent);
}

uint32_t ConceptLattice::meet(uint32_t a, uint32_t b) const {
  Bitset e = concept_at(a).extent & concept_at(b).extent;
  int64_t id = find_by_extent(e);
  require(id >= 0, ErrorKind::internal, "meet extent is not closed");
  return uint32_t(id);
}

uint32_t ConceptLattice::join(uint32_t a, uint32_t b) const {
  Bitset i = concept_at(a).intent & concept_at(b).intent;
  int64_t id = find_by_intent(i);
  require(id >= 0, ErrorKind::internal, "join intent is not closed");
  return uint32_t(id);
}

std::vector<uint32_t> ConceptLattice::ids_by_extent_size() const {
  std::vector<std::pair<size_t, uint32_t>> keyed;
  keyed.reserve(concepts_.size());
  for (const Concept& c : concepts_) keyed.emplace_back(c.extent.count(), c.id);
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<uint32_t> out;
  out.reserve(keyed.size());
  for (auto& [n, id] : keyed) out.push_back(id);
  return out;
}

StructuralDelta ConceptLattice::insert_flow(FormalContext& ctx, const std::string& name,
                                            const std::vector<std::string>& labels) {
  require(!concepts_.empty(), ErrorKind::state, "insert_flow on an unbuilt lattice");

  // Stage: resolve labels, assigning provisional ids to unseen ones.
  std::vector<std::string> fresh;
  std::unordered_map<std::string, uint32_t> fresh_ids;
  Bitset bits;
  for (const std::string& label : labels) {
    int64_t id = ctx.find_matchfield(label);
    if (id >= 0) {
      bits.set(uint32_t(id));
    } else {
      auto [it, added] =
          fresh_ids.emplace(label, ctx.num_matchfields() + uint32_t(fresh.size()));
      if (added) fresh.push_back(label);
      bits.set(it->second);
    }
  }
  uint32_t nmf_after = ctx.num_matchfields() + uint32_t(fresh.size());
  // Everything user-facing that can fail, before any mutation.
  ctx.check_flow_addable(name, bits, nmf_after);

  /* Fallback: when the bottom concept has a non-empty extent (some flow's
   * row spans every matchfield — typical right after the first insertion,
   * or with nested rows), extending the bottom intent by new columns would
   * detach it from its extent, so rebuild instead and synthesize the delta
   * by diffing intent families. */
  if (!concepts_[bottom_].extent.empty() && ctx.num_flows() > 0) {
    std::vector<Concept> old = concepts_;
    Bitset old_columns = ctx.all_matchfields();
    for (const std::string& label : fresh) ctx.add_matchfield(label, derive_field_kind(label));
    uint32_t fid = ctx.add_flow(name, bits);
    *this = build(ctx);

    StructuralDelta delta;
    delta.flow_id = fid;
    delta.flow_matchfields = bits;
    delta.rebuilt = true;
    std::unordered_set<Bitset> old_intents;
    for (const Concept& oc : old) old_intents.insert(oc.intent);
    for (const Concept& nc : concepts_) {
      if (!nc.extent.test(fid)) continue;
      if (old_intents.count(nc.intent)) {
        delta.modified.push_back(nc.id);
        continue;
      }
      // genitor = holder of the old closure of this intent (over old columns);
      // when that intent did not survive (the old bottom under column growth),
      // the new bottom stands in for it
      Bitset old_part = nc.intent & old_columns;
      Bitset genitor_intent;
      bool found = false;
      for (const Concept& oc : old)
        if (old_part.subset_of(oc.intent) &&
            (!found || oc.intent.subset_of(genitor_intent))) {
          genitor_intent = oc.intent;
          found = true;
        }
      int64_t gen = found ? find_by_intent(genitor_intent) : -1;
      delta.created.emplace_back(nc.id, gen >= 0 ? uint32_t(gen) : bottom_);
    }
    return delta;
  }

  // Commit the context; nothing below can fail for user reasons.
  for (const std::string& label : fresh) ctx.add_matchfield(label, derive_field_kind(label));
  uint32_t fid = ctx.add_flow(name, bits);

  StructuralDelta delta;
  delta.flow_id = fid;
  delta.flow_matchfields = bits;

  // The bottom intent is the full matchfield set by definition; new columns
  // belong to it before the sweep looks at intersections.
  if (!fresh.empty()) {
    Concept& bot = concepts_[bottom_];
    intent_index_.erase(bot.intent);
    for (uint32_t m = uint32_t(ctx.num_matchfields() - fresh.size()); m < ctx.num_matchfields();
         ++m)
      bot.intent.set(m);
    intent_index_.emplace(bot.intent, bottom_);
  }

  /* Sweep existing concepts from largest extent down.  A concept whose
   * intent survives intersection with the new flow absorbs it; a novel
   * intersection spawns a new concept whose genitor (closure holder) is
   * always the first producer in this order.  Link repair is local: the
   * genitor becomes a direct child, the minimal already-touched concepts
   * above become the parents, and parent-to-genitor edges they shadow are
   * dropped.  Later new concepts attach themselves below. */
  std::vector<uint32_t> order = ids_by_extent_size();
  std::vector<uint32_t> touched;
  for (uint32_t cid : order) {
    Concept& c = concepts_[cid];
    Bitset inter = c.intent & bits;
    ++delta.set_ops;
    if (inter == c.intent) {
      extent_index_.erase(c.extent);
      c.extent.set(fid);
      extent_index_.emplace(c.extent, cid);
      delta.modified.push_back(cid);
      touched.push_back(cid);
      continue;
    }
    ++delta.set_ops;
    if (intent_index_.count(inter)) continue;  // produced earlier in the sweep

    Bitset extent = c.extent;  // genitor not modified, so this is its old extent
    extent.set(fid);
    uint32_t cn = new_concept(std::move(extent), std::move(inter));
    const Bitset& cn_extent = concepts_[cn].extent;

    std::vector<uint32_t> above;
    for (uint32_t t : touched) {
      ++delta.set_ops;
      if (strict_subset(cn_extent, concepts_[t].extent)) above.push_back(t);
    }
    for (uint32_t p : above) {
      bool minimal = true;
      for (uint32_t q : above) {
        if (q == p) continue;
        ++delta.set_ops;
        if (strict_subset(concepts_[q].extent, concepts_[p].extent)) {
          minimal = false;
          break;
        }
      }
      if (!minimal) continue;
      link(p, cn);
      if (linked(p, cid)) unlink(p, cid);  // now shadowed through cn
    }
    link(cn, cid);
    touched.push_back(cn);
    delta.created.emplace_back(cn, cid);
  }

  // The holder of every flow is the top; either the old top absorbed the
  // flow or the very first creation of the sweep replaced it.
  if (!concepts_[top_].extent.test(fid)) {
    require(!delta.created.empty(), ErrorKind::internal, "insertion lost the top concept");
    top_ = delta.created.front().first;
    require(concepts_[top_].extent == ctx.all_flows(), ErrorKind::internal,
            "insertion lost the top concept");
  }
  return delta;
}

void ConceptLattice::check_invariants(const FormalContext& ctx, size_t cover_check_limit) const {
  require(!concepts_.empty(), ErrorKind::verify, "lattice: empty");
  require(intent_index_.size() == concepts_.size() && extent_index_.size() == concepts_.size(),
          ErrorKind::verify, "lattice: index size mismatch");

  for (const Concept& c : concepts_) {
    require(ctx.image_of_flows(c.extent) == c.intent, ErrorKind::verify,
            "lattice: concept " + std::to_string(c.id) + " intent is not the image of its extent");
    require(ctx.image_of_matchfields(c.intent) == c.extent, ErrorKind::verify,
            "lattice: concept " + std::to_string(c.id) + " extent is not the image of its intent");
    auto it = intent_index_.find(c.intent);
    require(it != intent_index_.end() && it->second == c.id, ErrorKind::verify,
            "lattice: intent index out of sync");
  }
  require(concepts_[top_].extent == ctx.all_flows(), ErrorKind::verify,
          "lattice: top concept does not hold every flow");
  require(concepts_[bottom_].extent == ctx.image_of_matchfields(ctx.all_matchfields()),
          ErrorKind::verify, "lattice: bottom concept extent is wrong");

  // links must be exactly the cover relation of extent inclusion
  if (concepts_.size() > cover_check_limit) return;
  for (const Concept& c : concepts_) {
    std::vector<uint32_t> supers;
    for (const Concept& d : concepts_)
      if (strict_subset(c.extent, d.extent)) supers.push_back(d.id);
    std::sort(supers.begin(), supers.end(), [&](uint32_t a, uint32_t b) {
      return concepts_[a].extent.count() < concepts_[b].extent.count();
    });
    std::vector<uint32_t> covers;
    for (uint32_t s : supers) {
      bool minimal = true;
      for (uint32_t k : covers)
        if (strict_subset(concepts_[k].extent, concepts_[s].extent)) {
          minimal = false;
          break;
        }
      if (minimal) covers.push_back(s);
    }
    std::vector<uint32_t> claimed = c.parents;
    std::sort(claimed.begin(), claimed.end());
    std::sort(covers.begin(), covers.end());
    require(claimed == covers, ErrorKind::verify,
            "lattice: parent links of concept " + std::to_string(c.id) +
                " are not the transitive reduction");
    for (uint32_t p : c.parents) {
      const auto& ch = concepts_[p].children;
      require(std::find(ch.begin(), ch.end(), c.id) != ch.end(), ErrorKind::verify,
              "lattice: parent/child mirrors out of sync");
    }
    for (uint32_t child : c.children) {
      const auto& ps = concepts_[child].parents;
      require(std::find(ps.begin(), ps.end(), c.id) != ps.end(), ErrorKind::verify,
              "lattice: parent/child mirrors out of sync");
    }
  }
}

}  // namespace flowcept

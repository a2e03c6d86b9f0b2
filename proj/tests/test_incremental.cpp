#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "flowcept/errors.hpp"
#include "flowcept/measurement.hpp"
#include "flowcept/oracle.hpp"
#include "test_helpers.hpp"

using namespace flowcept;
using testutil::example_context;
using testutil::example_queries;
using testutil::extent_of;
using testutil::intent_of;

namespace {

using IntentSet = std::set<std::vector<std::string>>;
using EdgeSet = std::set<std::pair<std::vector<std::string>, std::vector<std::string>>>;

std::vector<std::string> intent_labels(const FormalContext& ctx, const Bitset& intent) {
    std::vector<std::string> out;
    intent.for_each([&](uint32_t m) { out.push_back(ctx.matchfield(m).label); });
    std::sort(out.begin(), out.end());
    return out;
}

IntentSet intent_family(const FormalContext& ctx, const ConceptLattice& lat) {
    IntentSet fam;
    for (const Concept& c : lat.concepts()) fam.insert(intent_labels(ctx, c.intent));
    return fam;
}

// Hasse edges keyed by (child intent, parent intent): construction-order ids
// cancel out, so lattices built along different routes compare equal
EdgeSet hasse_edges(const FormalContext& ctx, const ConceptLattice& lat) {
    EdgeSet edges;
    for (const Concept& c : lat.concepts())
        for (uint32_t p : c.parents)
            edges.insert({intent_labels(ctx, c.intent),
                          intent_labels(ctx, lat.concept_at(p).intent)});
    return edges;
}

} // namespace

TEST_CASE("inserting f8 repairs structure as known") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);

    StructuralDelta d = lat.insert_flow(ctx, "f8", {"h2", "h7", "h9"});

    CHECK(!d.rebuilt);
    CHECK(d.flow_id == 8);
    CHECK(d.set_ops > 0);
    CHECK(lat.size() == 23);
    lat.check_invariants(ctx);

    // exactly the empty-intent top and the {h9} concept absorb f8
    REQUIRE(d.modified.size() == 2);
    CHECK(lat.concept_at(d.modified[0]).intent.empty());
    CHECK(lat.concept_at(d.modified[1]).intent == intent_of(ctx, {"h9"}));
    CHECK(lat.concept_at(d.modified[1]).extent == extent_of(ctx, {"f0", "f4", "f6", "f8"}));

    // four creations, in sweep order, each hanging off its closure holder
    REQUIRE(d.created.size() == 4);
    auto intent_pair = [&](size_t i) {
        return std::make_pair(intent_labels(ctx, lat.concept_at(d.created[i].first).intent),
                              intent_labels(ctx, lat.concept_at(d.created[i].second).intent));
    };
    CHECK(intent_pair(0) ==
          std::make_pair(std::vector<std::string>{"h7"}, std::vector<std::string>{"h1", "h7"}));
    CHECK(intent_pair(1) == std::make_pair(std::vector<std::string>{"h7", "h9"},
                                           std::vector<std::string>{"h1", "h7", "h9"}));
    CHECK(intent_pair(2) == std::make_pair(std::vector<std::string>{"h2"},
                                           std::vector<std::string>{"h2", "h6", "h8"}));
    CHECK(intent_pair(3) ==
          std::make_pair(std::vector<std::string>{"h2", "h7", "h9"},
                         intent_labels(ctx, ctx.all_matchfields())));

    // the new {h7} concept holds every h1/h7 flow plus f8
    CHECK(lat.concept_at(d.created[0].first).extent ==
          extent_of(ctx, {"f0", "f1", "f4", "f5", "f8"}));

    // structure matches a batch rebuild on the 9-flow context
    ConceptLattice batch = ConceptLattice::build(ctx);
    CHECK(intent_family(ctx, lat) == intent_family(ctx, batch));
    CHECK(hasse_edges(ctx, lat) == hasse_edges(ctx, batch));
}

TEST_CASE("inserting f8 repairs support as known") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);
    QuerySet queries = build_queries(ctx, example_queries());
    MeasurementSupport sup = compute_support(lat, queries);
    size_t targets0 = sup.target_set().size();

    FlowAddReport rep = add_flow(ctx, lat, sup, queries, "f8", {"h2", "h7", "h9"});

    CHECK(!rep.support.recomputed);
    // q5 moves from the {h1,h7} concept to the new {h7} concept
    REQUIRE(rep.support.retargeted.size() == 1);
    const Retarget& r = rep.support.retargeted[0];
    CHECK(queries[r.query].label == "q5");
    CHECK(lat.concept_at(r.from).intent == intent_of(ctx, {"h1", "h7"}));
    CHECK(lat.concept_at(r.to).intent == intent_of(ctx, {"h7"}));
    CHECK(lat.concept_at(r.to).extent == extent_of(ctx, {"f0", "f1", "f4", "f5", "f8"}));

    // f8 grounds at that same new concept; nobody is eclipsed
    CHECK(rep.support.eclipsed.empty());
    CHECK(rep.support.new_flow_ground == int64_t(r.to));
    CHECK(sup.mu[8] == int64_t(r.to));

    // targets, projections and grounds each grow by exactly one
    CHECK(sup.target_set().size() == targets0 + 1);
    CHECK(sup.projections.size() == 9);
    CHECK(sup.grounds.size() == 8);

    check_support_invariants(sup, lat, queries);

    // incremental status equals a from-scratch recomputation
    MeasurementSupport fresh = compute_support(lat, queries);
    CHECK(sup.target == fresh.target);
    CHECK(sup.unsatisfiable == fresh.unsatisfiable);
    CHECK(sup.vectors == fresh.vectors);
    CHECK(sup.projections == fresh.projections);
    CHECK(sup.grounds == fresh.grounds);
    CHECK(sup.mu == fresh.mu);
}

TEST_CASE("genitor eclipse hands over status and flows") {
    FormalContext ctx = testutil::make_context({{"a", "b", "x"}, {"a", "c", "x"}});
    ConceptLattice lat = ConceptLattice::build(ctx);
    QuerySet queries = build_queries(ctx, {{"q0", {"a"}}});
    MeasurementSupport sup = compute_support(lat, queries);

    uint32_t old_top = lat.top();
    CHECK(sup.target[0] == old_top);
    CHECK(sup.grounds == std::set<uint32_t>{old_top});

    FlowAddReport rep = add_flow(ctx, lat, sup, queries, "f2", {"a", "d"});

    // the new {a} concept replaces the old top above it and eclipses it
    uint32_t nt = lat.top();
    CHECK(nt != old_top);
    CHECK(lat.concept_at(nt).intent == intent_of(ctx, {"a"}));
    CHECK(lat.concept_at(nt).extent == ctx.all_flows());
    REQUIRE(rep.support.eclipsed.size() == 1);
    CHECK(rep.support.eclipsed[0] == std::make_pair(old_top, nt));
    REQUIRE(rep.support.retargeted.size() == 1);
    CHECK(rep.support.retargeted[0].from == old_top);
    CHECK(rep.support.retargeted[0].to == nt);

    // grounded flows migrated and the new flow joined them
    CHECK(sup.projections.count(old_top) == 0);
    CHECK(sup.grounds == std::set<uint32_t>{nt});
    CHECK(sup.grounded.at(nt) == std::vector<uint32_t>{0, 1, 2});
    CHECK(sup.mu == std::vector<int64_t>{int64_t(nt), int64_t(nt), int64_t(nt)});

    lat.check_invariants(ctx);
    check_support_invariants(sup, lat, queries);
}

TEST_CASE("fresh matchfield labels extend the context") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);
    StructuralDelta d = lat.insert_flow(ctx, "f8", {"h2", "h11", "h12"});
    CHECK(ctx.num_matchfields() == 12);
    CHECK(ctx.find_matchfield("h11") == 10);
    CHECK(d.flow_matchfields == intent_of(ctx, {"h2", "h11", "h12"}));
    // the bottom absorbed the new columns
    CHECK(lat.concept_at(lat.bottom()).intent == ctx.all_matchfields());
    lat.check_invariants(ctx);
}

TEST_CASE("insertion failures leave no trace") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);
    uint32_t size0 = lat.size();

    // duplicate name
    CHECK_THROWS_AS(lat.insert_flow(ctx, "f3", {"h1"}), Error);
    // duplicate row, stated with a fresh name
    CHECK_THROWS_AS(lat.insert_flow(ctx, "copy", {"h2", "h6", "h8"}), Error);
    // empty row
    CHECK_THROWS_AS(lat.insert_flow(ctx, "empty", {}), Error);
    // failing insertion naming a fresh label must not register the label
    CHECK_THROWS_AS(lat.insert_flow(ctx, "f3", {"h1", "h99"}), Error);
    CHECK(ctx.find_matchfield("h99") == -1);

    CHECK(ctx.num_flows() == 8);
    CHECK(ctx.num_matchfields() == 10); // no fresh labels leaked
    CHECK(lat.size() == size0);
    lat.check_invariants(ctx);
}

TEST_CASE("a row equal to an existing intent only modifies") {
    FormalContext ctx = testutil::make_context({{"a", "b"}, {"a", "c"}});
    ConceptLattice lat = ConceptLattice::build(ctx);
    QuerySet queries = build_queries(ctx, {{"q0", {"a"}}});
    MeasurementSupport sup = compute_support(lat, queries);

    // {a} is already the top's intent: nothing is created
    FlowAddReport rep = add_flow(ctx, lat, sup, queries, "f2", {"a"});
    CHECK(rep.structure.created.empty());
    REQUIRE(rep.structure.modified.size() == 1);
    CHECK(rep.structure.modified[0] == lat.top());
    CHECK(lat.concept_at(lat.top()).extent == ctx.all_flows());

    // the flow grounds at the top, which was q0's target all along
    CHECK(rep.support.retargeted.empty());
    CHECK(rep.support.new_flow_ground == int64_t(lat.top()));
    lat.check_invariants(ctx);
    check_support_invariants(sup, lat, queries);
}

TEST_CASE("a row covering every matchfield satisfies a dead query") {
    FormalContext ctx = testutil::make_context({{"a", "b"}, {"a", "c"}});
    ConceptLattice lat = ConceptLattice::build(ctx);
    QuerySet queries = build_queries(ctx, {{"q0", {"a", "b", "c"}}});
    MeasurementSupport sup = compute_support(lat, queries);
    CHECK(sup.unsatisfiable[0] == 1);

    FlowAddReport rep = add_flow(ctx, lat, sup, queries, "f2", {"a", "b", "c"});
    CHECK(sup.unsatisfiable[0] == 0);
    CHECK(sup.target[0] == lat.bottom()); // same concept, extent now holds f2
    CHECK(rep.support.new_flow_ground >= 0);
    CHECK(answer_flowset(sup, 0) == Bitset::of({2}));
    check_support_invariants(sup, lat, queries);
}

TEST_CASE("tiny bases rebuild through the fallback") {
    // single flow spanning every matchfield: top and bottom coincide
    FormalContext ctx = testutil::make_context({{"a", "b"}});
    ConceptLattice lat = ConceptLattice::build(ctx);
    QuerySet queries = build_queries(ctx, {{"q0", {"a"}}});
    MeasurementSupport sup = compute_support(lat, queries);

    FlowAddReport rep = add_flow(ctx, lat, sup, queries, "f1", {"a", "c"});
    CHECK(rep.structure.rebuilt);
    CHECK(rep.support.recomputed);
    CHECK(lat.size() == 4);
    // synthesized delta covers the concepts now holding f1 whose intent did
    // not exist before: {a} and {a,c}, both attributed to the surviving
    // {a,b} concept; the new bottom, like the normal path's in-place bottom
    // growth, is not reported
    CHECK(rep.structure.created.size() == 2);
    for (auto [id, gen] : rep.structure.created) {
        CHECK(lat.concept_at(id).extent.test(rep.structure.flow_id));
        CHECK(lat.concept_at(gen).intent ==
              testutil::intent_of(ctx, {"a", "b"}));
    }
    CHECK(rep.structure.modified.empty()); // the old concept kept extent {f0}
    CHECK(rep.support.new_flow_ground == int64_t(lat.top()));
    lat.check_invariants(ctx);
    check_support_invariants(sup, lat, queries);

    // equal to batch construction on the same rows
    FormalContext batch_ctx = testutil::make_context({{"a", "b"}, {"a", "c"}});
    ConceptLattice batch = ConceptLattice::build(batch_ctx);
    CHECK(intent_family(ctx, lat) == intent_family(batch_ctx, batch));
    CHECK(hasse_edges(ctx, lat) == hasse_edges(batch_ctx, batch));
}

TEST_CASE("a one-flow lattice grows without the fallback when possible") {
    FormalContext ctx = testutil::make_context({{"a", "b"}}, {"a", "b", "c"});
    ConceptLattice lat = ConceptLattice::build(ctx);
    CHECK(lat.size() == 2); // bottom extent empty, normal path applies
    StructuralDelta d = lat.insert_flow(ctx, "f1", {"a", "c"});
    CHECK(!d.rebuilt);
    CHECK(lat.size() == 4);
    lat.check_invariants(ctx);
}

TEST_CASE("shuffled insertion orders rebuild the same lattice") {
    FormalContext full = example_context();
    ConceptLattice batch = ConceptLattice::build(full);
    IntentSet want_intents = intent_family(full, batch);
    EdgeSet want_edges = hasse_edges(full, batch);

    std::vector<std::string> all_labels;
    for (const MatchfieldValue& m : full.matchfields()) all_labels.push_back(m.label);

    std::mt19937_64 rng(7);
    for (int round = 0; round < 3; ++round) {
        std::vector<uint32_t> order(full.num_flows());
        for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);

        // seed with the first two flows batch-built, insert the rest one by one
        FormalContext ctx;
        for (const std::string& l : all_labels) ctx.add_matchfield(l, derive_field_kind(l));
        auto row_labels = [&](uint32_t f) {
            std::vector<std::string> ls;
            full.flow(f).matchfields.for_each(
                [&](uint32_t m) { ls.push_back(full.matchfield(m).label); });
            return ls;
        };
        ctx.add_flow(full.flow(order[0]).name, full.flow(order[0]).matchfields);
        ctx.add_flow(full.flow(order[1]).name, full.flow(order[1]).matchfields);
        ConceptLattice lat = ConceptLattice::build(ctx);
        for (size_t i = 2; i < order.size(); ++i)
            lat.insert_flow(ctx, full.flow(order[i]).name, row_labels(order[i]));

        lat.check_invariants(ctx);
        CHECK(intent_family(ctx, lat) == want_intents);
        CHECK(hasse_edges(ctx, lat) == want_edges);
    }
}

TEST_CASE("incremental support equals recomputation at every step") {
    FormalContext full = example_context();
    std::vector<std::string> all_labels;
    for (const MatchfieldValue& m : full.matchfields()) all_labels.push_back(m.label);

    FormalContext ctx;
    for (const std::string& l : all_labels) ctx.add_matchfield(l, derive_field_kind(l));
    ctx.add_flow("f0", full.flow(0).matchfields);
    ctx.add_flow("f1", full.flow(1).matchfields);
    ConceptLattice lat = ConceptLattice::build(ctx);
    QuerySet queries = build_queries(ctx, example_queries());
    MeasurementSupport sup = compute_support(lat, queries);

    for (uint32_t f = 2; f < full.num_flows(); ++f) {
        std::vector<std::string> ls;
        full.flow(f).matchfields.for_each(
            [&](uint32_t m) { ls.push_back(full.matchfield(m).label); });
        add_flow(ctx, lat, sup, queries, full.flow(f).name, ls);

        MeasurementSupport fresh = compute_support(lat, queries);
        CHECK(sup.target == fresh.target);
        CHECK(sup.unsatisfiable == fresh.unsatisfiable);
        CHECK(sup.vectors == fresh.vectors);
        CHECK(sup.projections == fresh.projections);
        CHECK(sup.grounds == fresh.grounds);
        CHECK(sup.grounded == fresh.grounded);
        CHECK(sup.mu == fresh.mu);
        check_support_invariants(sup, lat, queries);
    }

    // end state is the full example: the known partition emerges
    CHECK(sup.grounds.size() == 7);
    CHECK(sup.projections.size() == 8);
}

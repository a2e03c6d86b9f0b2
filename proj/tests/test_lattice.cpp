#include <doctest.h>

#include <algorithm>
#include <set>

#include "flowcept/errors.hpp"
#include "flowcept/lattice.hpp"
#include "flowcept/oracle.hpp"
#include "test_helpers.hpp"

using namespace flowcept;
using testutil::example_context;
using testutil::extent_of;
using testutil::intent_of;

namespace {

std::set<oracle::IdSet> intent_family(const ConceptLattice& lat) {
    std::set<oracle::IdSet> fam;
    for (const Concept& c : lat.concepts()) {
        oracle::IdSet s;
        c.intent.for_each([&](uint32_t m) { s.push_back(m); });
        fam.insert(std::move(s));
    }
    return fam;
}

} // namespace

TEST_CASE("example lattice has the 19 known concepts") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);

    CHECK(lat.size() == 19);
    lat.check_invariants(ctx);

    // intent family matches the reference enumeration exactly
    auto fam = intent_family(lat);
    auto want = oracle::enumerate_intents(ctx);
    CHECK(fam == std::set<oracle::IdSet>(want.begin(), want.end()));

    // top collects every flow under the (empty) common intent
    const Concept& top = lat.concept_at(lat.top());
    CHECK(top.extent == ctx.all_flows());
    CHECK(top.intent.empty());
    CHECK(top.parents.empty());

    // bottom holds no flow and every matchfield
    const Concept& bot = lat.concept_at(lat.bottom());
    CHECK(bot.extent.empty());
    CHECK(bot.intent == ctx.all_matchfields());
    CHECK(bot.children.empty());
}

TEST_CASE("every concept is a closed pair") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);
    for (const Concept& c : lat.concepts()) {
        CHECK(ctx.image_of_matchfields(c.intent) == c.extent);
        CHECK(ctx.image_of_flows(c.extent) == c.intent);
    }
}

TEST_CASE("known concept and its lower covers") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);

    int64_t id = lat.find_by_intent(intent_of(ctx, {"h1", "h7"}));
    REQUIRE(id >= 0);
    const Concept& c = lat.concept_at(uint32_t(id));
    CHECK(c.extent == extent_of(ctx, {"f0", "f1", "f4", "f5"}));

    std::set<Bitset> child_extents;
    for (uint32_t ch : c.children) child_extents.insert(lat.concept_at(ch).extent);
    std::set<Bitset> want = {extent_of(ctx, {"f0", "f1"}), extent_of(ctx, {"f1", "f5"}),
                             extent_of(ctx, {"f0", "f4"})};
    CHECK(child_extents == want);
}

TEST_CASE("find by intent and extent") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);

    CHECK(lat.find_by_intent(intent_of(ctx, {"h10"})) >= 0);
    CHECK(lat.find_by_intent(intent_of(ctx, {"h1"})) == -1); // not closed: h1 implies h7
    CHECK(lat.find_by_extent(extent_of(ctx, {"f2", "f3"})) >= 0);
    CHECK(lat.find_by_extent(extent_of(ctx, {"f0", "f2"})) == -1);

    int64_t a = lat.find_by_intent(intent_of(ctx, {"h2", "h6", "h8"}));
    int64_t b = lat.find_by_extent(extent_of(ctx, {"f2", "f3"}));
    CHECK(a == b);
}

TEST_CASE("order, meet and join behave like set operations") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);

    uint32_t h17 = uint32_t(lat.find_by_intent(intent_of(ctx, {"h1", "h7"})));
    uint32_t q4c = uint32_t(lat.find_by_extent(extent_of(ctx, {"f0", "f1"})));
    uint32_t h268 = uint32_t(lat.find_by_intent(intent_of(ctx, {"h2", "h6", "h8"})));

    CHECK(lat.leq(q4c, h17));
    CHECK(!lat.leq(h17, q4c));
    CHECK(lat.leq(q4c, q4c));
    CHECK(lat.leq(lat.bottom(), h17));
    CHECK(lat.leq(h17, lat.top()));

    // disjoint branches meet at bottom and join at top
    CHECK(lat.meet(h17, h268) == lat.bottom());
    CHECK(lat.join(h17, h268) == lat.top());

    // comparable pair: meet is the lower, join the upper
    CHECK(lat.meet(q4c, h17) == q4c);
    CHECK(lat.join(q4c, h17) == h17);

    // meet extent is the extent intersection whenever that is closed
    const Concept& m = lat.concept_at(lat.meet(h17, uint32_t(lat.find_by_intent(
                                                     intent_of(ctx, {"h10"})))));
    CHECK(m.extent == extent_of(ctx, {"f1", "f5"}));
}

TEST_CASE("meet and join against all pairs, brute force") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);
    for (uint32_t a = 0; a < lat.size(); ++a)
        for (uint32_t b = 0; b < lat.size(); ++b) {
            uint32_t m = lat.meet(a, b);
            // meet = closure of extent intersection
            Bitset ext = lat.concept_at(a).extent & lat.concept_at(b).extent;
            Bitset intent = ctx.image_of_flows(ext);
            CHECK(lat.concept_at(m).intent == intent);
            // join = closure of intent intersection
            uint32_t j = lat.join(a, b);
            Bitset common = lat.concept_at(a).intent & lat.concept_at(b).intent;
            CHECK(lat.concept_at(j).intent == ctx.close_matchfields(common));
            // order consistency
            CHECK(lat.leq(m, a));
            CHECK(lat.leq(m, b));
            CHECK(lat.leq(a, j));
            CHECK(lat.leq(b, j));
        }
}

TEST_CASE("cover links carry no transitive edges") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);
    for (const Concept& c : lat.concepts())
        for (uint32_t p : c.parents) {
            // no intermediate concept strictly between child and parent
            for (uint32_t x = 0; x < lat.size(); ++x) {
                if (x == c.id || x == p) continue;
                CHECK(!(lat.leq(c.id, x) && lat.leq(x, p)));
            }
            // symmetry of the two link directions
            const auto& pc = lat.concept_at(p).children;
            CHECK(std::find(pc.begin(), pc.end(), c.id) != pc.end());
        }
}

TEST_CASE("scan order is by decreasing extent") {
    FormalContext ctx = example_context();
    ConceptLattice lat = ConceptLattice::build(ctx);
    auto order = lat.ids_by_extent_size();
    REQUIRE(order.size() == lat.size());
    CHECK(order.front() == lat.top());
    CHECK(order.back() == lat.bottom());
    for (size_t i = 1; i < order.size(); ++i) {
        size_t prev = lat.concept_at(order[i - 1]).extent.count();
        size_t cur = lat.concept_at(order[i]).extent.count();
        CHECK(prev >= cur);
        if (prev == cur) CHECK(order[i - 1] < order[i]);
    }
}

TEST_CASE("degenerate contexts still build") {
    // single flow: two concepts unless the row covers every matchfield
    FormalContext one = testutil::make_context({{"a", "b"}}, {"a", "b", "c"});
    ConceptLattice lat1 = ConceptLattice::build(one);
    CHECK(lat1.size() == 2);
    CHECK(lat1.top() != lat1.bottom());
    lat1.check_invariants(one);

    // single flow covering all matchfields: top and bottom coincide
    FormalContext full = testutil::make_context({{"a", "b"}});
    ConceptLattice latf = ConceptLattice::build(full);
    CHECK(latf.size() == 1);
    CHECK(latf.top() == latf.bottom());
    latf.check_invariants(full);

    // empty context: the single (no flows, no matchfields) concept
    FormalContext empty;
    ConceptLattice late = ConceptLattice::build(empty);
    CHECK(late.size() == 1);
    late.check_invariants(empty);
}

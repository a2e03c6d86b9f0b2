#include "flowcept/verify.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "flowcept/errors.hpp"
#include "flowcept/oracle.hpp"

namespace flowcept {

std::vector<CheckResult> verify_all(const FormalContext& ctx, const ConceptLattice& lat,
                                    const QuerySet& queries,
                                    const std::vector<QuerySpec>& specs,
                                    const MeasurementSupport& sup, const CounterStore* store,
                                    const VerifyLimits& limits) {
    require(specs.size() == queries.size(), ErrorKind::internal,
            "query specs and built queries out of step");
    std::vector<CheckResult> results;
    auto run = [&](const std::string& name, const std::function<std::string()>& body) {
        CheckResult r;
        r.name = name;
        try {
            r.message = body(); // empty or a skip note
            r.ok = true;
        } catch (const std::exception& e) {
            r.ok = false;
            r.message = e.what();
        }
        results.push_back(std::move(r));
    };

    run("context-consistency", [&] {
        ctx.check_consistency();
        return "";
    });

    run("lattice-structure", [&] {
        lat.check_invariants(ctx, limits.cover_check_max_concepts);
        if (lat.size() > limits.cover_check_max_concepts)
            return std::string("cover-relation audit skipped (size guard)");
        return std::string();
    });

    run("lattice-closure-family", [&] {
        if (lat.size() > limits.oracle_max_concepts)
            return std::string("skipped (size guard)");
        std::vector<oracle::IdSet> expected = oracle::enumerate_intents(ctx, limits.oracle_max_concepts);
        std::set<oracle::IdSet> got;
        for (const Concept& c : lat.concepts()) {
            oracle::IdSet intent;
            c.intent.for_each([&](uint32_t m) { intent.push_back(m); });
            got.insert(std::move(intent));
        }
        require(got.size() == lat.size(), ErrorKind::verify, "duplicate intents in lattice");
        require(std::set<oracle::IdSet>(expected.begin(), expected.end()) == got,
                ErrorKind::verify,
                "lattice intents differ from the reference closed-set family (" +
                    std::to_string(lat.size()) + " vs " + std::to_string(expected.size()) + ")");
        return std::string();
    });

    run("meet-closure", [&] {
        // extent intersections of sampled concept pairs must be extents again
        uint64_t n = lat.size();
        uint64_t probes = 0;
        uint64_t step = std::max<uint64_t>(1, n * n / std::max<uint64_t>(1, limits.meet_pairs));
        for (uint64_t k = 0; k < n * n && probes < limits.meet_pairs; k += step, ++probes) {
            uint32_t a = uint32_t(k / n), b = uint32_t(k % n);
            lat.meet(a, b); // throws if the meet extent is not closed
        }
        return std::string();
    });

    run("support-invariants", [&] {
        check_support_invariants(sup, lat, queries);
        return "";
    });

    run("support-recompute", [&] {
        MeasurementSupport fresh = compute_support(lat, queries);
        require(fresh.target == sup.target, ErrorKind::verify, "targets drifted");
        require(fresh.unsatisfiable == sup.unsatisfiable, ErrorKind::verify,
                "unsatisfiable flags drifted");
        require(fresh.vectors == sup.vectors, ErrorKind::verify, "query vectors drifted");
        require(fresh.projections == sup.projections, ErrorKind::verify, "projections drifted");
        require(fresh.grounds == sup.grounds, ErrorKind::verify, "grounds drifted");
        require(fresh.mu == sup.mu, ErrorKind::verify, "flow grounding drifted");
        return "";
    });

    run("answers-vs-reference", [&] {
        for (const Query& q : queries) {
            Bitset flows = answer_flowset(sup, q.id);
            std::vector<std::string> got;
            flows.for_each([&](uint32_t f) { got.push_back(ctx.flow(f).name); });
            std::vector<std::string> expected = oracle::answer_direct(ctx, specs[q.id]);
            std::sort(got.begin(), got.end());
            std::sort(expected.begin(), expected.end());
            require(got == expected, ErrorKind::verify,
                    "answer for query '" + q.label + "' differs from direct scan");
        }
        return "";
    });

    run("partition-minimality", [&] {
        size_t expected = oracle::minimal_counter_count(ctx, specs);
        require(sup.grounds.size() == expected, ErrorKind::verify,
                "ground count " + std::to_string(sup.grounds.size()) +
                    " != minimal partition size " + std::to_string(expected));
        return "";
    });

    run("projection-meets", [&] {
        // every projection is the meet of the targets its vector collects
        for (uint32_t p : sup.projections) {
            const Bitset& v = sup.vectors[p];
            require(!v.empty(), ErrorKind::verify, "projection with empty vector");
            int64_t acc = -1;
            v.for_each([&](uint32_t q) {
                uint32_t t = sup.target[q];
                acc = acc < 0 ? int64_t(t) : int64_t(lat.meet(uint32_t(acc), t));
            });
            require(acc == int64_t(p), ErrorKind::verify,
                    "projection " + std::to_string(p) + " is not the meet of its targets");
        }
        return "";
    });

    run("order-answer-equivalence", [&] {
        // a grounded flow answers q exactly when its ground sits below q's target
        for (const Query& q : queries) {
            for (uint32_t f = 0; f < ctx.num_flows(); ++f) {
                bool matches = q.matchfields.subset_of(ctx.flow(f).matchfields);
                bool below = sup.mu[f] >= 0 &&
                             lat.leq(uint32_t(sup.mu[f]), sup.target[q.id]);
                require(matches == below, ErrorKind::verify,
                        "flow " + ctx.flow(f).name + " vs query " + q.label +
                            ": subset test and order test disagree");
            }
        }
        return "";
    });

    if (store && store->installed()) {
        run("counter-wiring", [&] {
            if (store->mode() == CounterMode::minimal) {
                require(store->counters_in_use() == sup.grounds.size(), ErrorKind::verify,
                        "counter count != ground count");
                for (uint32_t f = 0; f < ctx.num_flows(); ++f) {
                    int64_t c = store->counter_of_flow(f);
                    if (sup.mu[f] < 0)
                        require(c < 0, ErrorKind::verify, "unmonitored flow has a counter");
                    else
                        require(c == store->counter_of_ground(uint32_t(sup.mu[f])),
                                ErrorKind::verify, "flow wired to the wrong ground counter");
                }
            } else {
                require(store->counters_in_use() == ctx.num_flows(), ErrorKind::verify,
                        "baseline mode must keep one counter per flow");
            }
            return "";
        });

        run("counter-conservation", [&] {
            uint64_t sum = 0;
            for (const CounterView& v : store->snapshot()) sum += v.packets;
            require(sum == store->routed(), ErrorKind::verify,
                    "counter totals do not add up to the routed packet count");
            return "";
        });
    }

    return results;
}

bool all_ok(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(),
                       [](const CheckResult& r) { return r.ok; });
}

std::string format_report(const std::vector<CheckResult>& results) {
    std::ostringstream out;
    for (const CheckResult& r : results) {
        out << (r.ok ? "PASS" : "FAIL") << ' ' << r.name;
        if (!r.message.empty()) out << " — " << r.message;
        out << '\n';
    }
    return out.str();
}

} // namespace flowcept

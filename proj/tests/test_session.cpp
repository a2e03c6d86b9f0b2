#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "flowcept/errors.hpp"
#include "flowcept/session.hpp"
#include "test_helpers.hpp"

using namespace flowcept;
using nlohmann::json;
using testutil::example_context;
using testutil::example_queries;

namespace {

namespace fs = std::filesystem;

std::string make_temp_dir() {
    std::string tmpl = (fs::temp_directory_path() / "flowcept_test_XXXXXX").string();
    char* p = ::mkdtemp(tmpl.data());
    REQUIRE(p != nullptr);
    return tmpl;
}

struct TempDir {
    std::string path = make_temp_dir();
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void build_example(Session& s) {
    s.set_context(example_context());
    s.set_query_specs(example_queries());
    s.build();
}

std::string slurp_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    REQUIRE(out.good());
    out << text;
}

const CheckResult* find_check(const std::vector<CheckResult>& rs, const std::string& name) {
    for (const CheckResult& r : rs)
        if (r.name == name) return &r;
    return nullptr;
}

} // namespace

TEST_CASE("build produces the known shape") {
    Session s;
    CHECK(!s.built());
    CHECK_THROWS_AS(s.dump("lattice"), Error); // not built yet
    build_example(s);
    REQUIRE(s.built());

    Session::Counts c = s.counts();
    CHECK(c.flows == 8);
    CHECK(c.matchfields == 10);
    CHECK(c.queries == 5);
    CHECK(c.concepts == 19);
    CHECK(c.targets == 4);
    CHECK(c.projections == 8);
    CHECK(c.grounds == 7);
    CHECK(c.counters == 7);
    CHECK(s.epoch() == 0);
    CHECK(s.mode() == CounterMode::minimal);
    CHECK(all_ok(s.verify()));
}

TEST_CASE("answers come back as flow names") {
    Session s;
    build_example(s);
    CHECK(s.answer("q2") == std::vector<std::string>{"f2", "f3"});
    CHECK(s.answer("q4") == std::vector<std::string>{"f0", "f1"});
    CHECK(s.answer("q3") == std::vector<std::string>{"f0", "f1", "f4", "f5"});
    CHECK_THROWS_AS(s.answer("q9"), Error);
}

TEST_CASE("all dump kinds render") {
    Session s;
    build_example(s);
    for (const char* kind : {"context_csv", "context_json", "queries", "lattice", "support",
                             "partition", "dot", "counters", "epoch"})
        CHECK(!s.dump(kind).empty());
    CHECK_THROWS_AS(s.dump("nope"), Error);

    json epoch = json::parse(s.dump("epoch"));
    CHECK(epoch["epoch"] == 0);
    CHECK(epoch["mode"] == "minimal");
    CHECK(epoch["counters_in_use"] == 7);
}

TEST_CASE("events feed counters and stats") {
    Session s;
    build_example(s);
    std::vector<io::RawEvent> evs = {
        {1, "f2", 100}, {2, "f3", 200}, {3, "f3", 50}, {4, "ghost", 10}, {5, "f6", 70},
    };
    Session::EventTotals t = s.process_events(evs);
    CHECK(t.events == 5);
    CHECK(t.drops == 1);

    QueryStats q2 = s.stats_for("q2"); // f2 + f3
    CHECK(q2.packets == 3);
    CHECK(q2.bytes == 350);
    CHECK(q2.counters_touched == 2);

    s.process_event("f2", 25, 6);
    CHECK(s.stats_for("q2").packets == 4);
    CHECK_THROWS_AS(s.stats_for("zzz"), Error);

    std::string csv = s.stats_csv();
    CHECK(csv.rfind("query,packets,bytes,num_counters_touched\n", 0) == 0);
    CHECK(csv.find("q2,4,375,2") != std::string::npos);
}

TEST_CASE("add_flow reports the full repair") {
    Session s;
    build_example(s);
    json rep = s.add_flow("f8", {"h2", "h7", "h9"});

    CHECK(rep["flow"] == "f8");
    CHECK(rep["flow_id"] == 8);
    CHECK(rep["rebuilt"] == false);
    CHECK(rep["support_recomputed"] == false);
    CHECK(rep["modified"].size() == 2);
    CHECK(rep["created"].size() == 4);
    CHECK(rep["created"][0]["intent"] == json::array({"h7"}));
    CHECK(rep["created"][0]["genitor"]["intent"] == json::array({"h1", "h7"}));
    REQUIRE(rep["retargeted"].size() == 1);
    CHECK(rep["retargeted"][0]["query"] == "q5");
    CHECK(rep["retargeted"][0]["to"]["intent"] == json::array({"h7"}));
    CHECK(rep["eclipsed"].empty());
    CHECK(rep["ground"]["intent"] == json::array({"h7"}));
    CHECK(rep["migration"]["carried"] == 7);
    CHECK(rep["migration"]["fresh"] == 1);
    CHECK(rep["migration"]["archived"] == 0);
    CHECK(rep["epoch"] == 1);

    Session::Counts c = s.counts();
    CHECK(c.flows == 9);
    CHECK(c.concepts == 23);
    CHECK(c.targets == 5);
    CHECK(c.projections == 9);
    CHECK(c.grounds == 8);
    CHECK(c.counters == 8);
    CHECK(s.epoch() == 1);
    CHECK(s.answer("q5") == std::vector<std::string>{"f0", "f1", "f4", "f5", "f8"});
    CHECK(all_ok(s.verify()));
}

TEST_CASE("failed changes leave the session untouched") {
    Session s;
    build_example(s);
    CHECK_THROWS_AS(s.add_flow("f3", {"h1"}), Error);            // duplicate name
    CHECK_THROWS_AS(s.add_flow("dup", {"h2", "h6", "h8"}), Error); // duplicate row
    CHECK_THROWS_AS(s.add_query("q2", {"h1"}), Error);           // duplicate label
    CHECK_THROWS_AS(s.add_query("qx", {"mystery"}), Error);      // unknown matchfield
    CHECK_THROWS_AS(s.remove_flow("ghost"), Error);
    CHECK_THROWS_AS(s.remove_query("ghost"), Error);

    Session::Counts c = s.counts();
    CHECK(c.flows == 8);
    CHECK(c.queries == 5);
    CHECK(c.concepts == 19);
    CHECK(s.epoch() == 0); // nothing closed an epoch
    CHECK(s.query_specs().size() == 5);
    CHECK(all_ok(s.verify()));
}

TEST_CASE("add_query recomputes status for the new query") {
    Session s;
    build_example(s);
    json rep = s.add_query("q6", {"h3", "h6"});
    CHECK(rep["query"] == "q6");
    CHECK(rep["unsatisfiable"] == false);
    CHECK(rep["target"]["intent"] == json::array({"h3", "h6", "h10"}));
    CHECK(rep["epoch"] == 1);
    CHECK(s.counts().queries == 6);
    CHECK(s.counts().grounds == 7); // f6,f7 still share a cell
    CHECK(s.answer("q6") == std::vector<std::string>{"f6", "f7"});

    json dead = s.add_query("q7", {"h4", "h2"});
    CHECK(dead["unsatisfiable"] == true);
    CHECK(s.answer("q7").empty());
    CHECK(all_ok(s.verify()));
}

TEST_CASE("remove_query merges cells back") {
    Session s;
    build_example(s);
    json rep = s.remove_query("q4");
    CHECK(rep["query"] == "q4");
    CHECK(rep["epoch"] == 1);
    Session::Counts c = s.counts();
    CHECK(c.queries == 4);
    CHECK(c.grounds == 5); // {f0,f4} and {f1,f5} merge without q4
    CHECK(c.counters == 5);
    CHECK(s.answer("q3") == std::vector<std::string>{"f0", "f1", "f4", "f5"});
    CHECK(all_ok(s.verify()));
}

TEST_CASE("remove_flow rebuilds and returns to the prior shape") {
    Session s;
    build_example(s);
    s.add_flow("f8", {"h2", "h7", "h9"});
    json rep = s.remove_flow("f8");
    CHECK(rep["rebuilt"] == true);
    CHECK(rep["epoch"] == 2);

    Session::Counts c = s.counts();
    CHECK(c.flows == 8);
    CHECK(c.concepts == 19);
    CHECK(c.grounds == 7);
    CHECK(s.answer("q5") == std::vector<std::string>{"f0", "f1", "f4", "f5"});
    CHECK(all_ok(s.verify()));
}

TEST_CASE("counters migrate across epochs") {
    Session s;
    build_example(s);
    s.process_events({{1, "f0", 10}, {2, "f0", 10}, {3, "f6", 30}, {4, "f7", 40}});
    CHECK(s.stats_for("q4").packets == 2);

    json rep = s.add_flow("f8", {"h2", "h7", "h9"});
    CHECK(rep["migration"]["carried"] == 7);
    // f0's two packets and the shared f6/f7 counter survived
    CHECK(s.stats_for("q4").packets == 2);
    CHECK(s.stats_for("q1").packets == 2); // f6 + f7 events
    CHECK(s.store().routed() == 4);
}

TEST_CASE("set_mode closes an epoch and reinstalls") {
    Session s;
    s.set_mode(CounterMode::baseline); // before build: just remembered
    CHECK(s.mode() == CounterMode::baseline);
    build_example(s);
    CHECK(s.counts().counters == 8);

    s.set_mode(CounterMode::baseline); // no-op
    CHECK(s.epoch() == 0);

    s.set_mode(CounterMode::minimal);
    CHECK(s.epoch() == 1);
    CHECK(s.counts().counters == 7);
    CHECK(s.mode() == CounterMode::minimal);
}

TEST_CASE("state round-trips through a directory") {
    TempDir dir;
    Session s;
    build_example(s);
    s.process_events({{1, "f0", 11}, {2, "f3", 22}});
    s.add_flow("f8", {"h2", "h7", "h9"}); // closes epoch 0
    s.process_events({{3, "f8", 33}});
    s.save_state(dir.path);

    CHECK(fs::exists(fs::path(dir.path) / "context.csv"));
    CHECK(fs::exists(fs::path(dir.path) / "queries.json"));
    CHECK(fs::exists(fs::path(dir.path) / "lattice.json"));
    CHECK(fs::exists(fs::path(dir.path) / "support.json"));
    CHECK(fs::exists(fs::path(dir.path) / "partition.csv"));
    CHECK(fs::exists(fs::path(dir.path) / "lattice.dot"));
    CHECK(fs::exists(fs::path(dir.path) / "counters.json"));
    CHECK(fs::exists(fs::path(dir.path) / "epoch.json"));
    CHECK(fs::exists(fs::path(dir.path) / "epochs" / "epoch_0000.json"));

    Session t;
    t.load_state(dir.path);
    Session::Counts a = s.counts(), b = t.counts();
    CHECK(a.flows == b.flows);
    CHECK(a.queries == b.queries);
    CHECK(a.concepts == b.concepts);
    CHECK(a.grounds == b.grounds);
    CHECK(a.counters == b.counters);
    CHECK(t.epoch() == s.epoch());
    CHECK(t.mode() == s.mode());

    // counter values and tallies came back
    CHECK(t.store().events() == s.store().events());
    CHECK(t.stats_for("q2").packets == s.stats_for("q2").packets);
    CHECK(t.stats_for("q5").packets == s.stats_for("q5").packets);
    CHECK(t.answer("q5") == s.answer("q5"));

    // the loaded session checks itself against the saved renderings
    std::vector<CheckResult> checks = t.verify();
    CHECK(all_ok(checks));
    CHECK(find_check(checks, "state-lattice-match") != nullptr);
    CHECK(find_check(checks, "state-support-match") != nullptr);
}

TEST_CASE("loading refuses a gutted directory") {
    TempDir dir;
    Session s;
    CHECK_THROWS_AS(s.load_state(dir.path), Error); // no context.csv
}

TEST_CASE("tampered renderings fail verification") {
    TempDir dir;
    Session s;
    build_example(s);
    s.save_state(dir.path);

    SUBCASE("lattice extent rewritten") {
        fs::path lj = fs::path(dir.path) / "lattice.json";
        json j = json::parse(slurp_file(lj));
        // move one flow out of the top's extent
        j["concepts"][0]["extent"][0] = "f999";
        spit_file(lj, j.dump(2));

        Session t;
        t.load_state(dir.path);
        std::vector<CheckResult> checks = t.verify();
        const CheckResult* c = find_check(checks, "state-lattice-match");
        REQUIRE(c != nullptr);
        CHECK(!c->ok);
        CHECK(!all_ok(checks));
    }

    SUBCASE("support target redirected") {
        fs::path sj = fs::path(dir.path) / "support.json";
        json j = json::parse(slurp_file(sj));
        uint32_t t0 = j["targets"]["q1"].get<uint32_t>();
        j["targets"]["q1"] = (t0 + 1) % 19;
        spit_file(sj, j.dump(2));

        Session t;
        t.load_state(dir.path);
        std::vector<CheckResult> checks = t.verify();
        const CheckResult* c = find_check(checks, "state-support-match");
        REQUIRE(c != nullptr);
        CHECK(!c->ok);
    }

    SUBCASE("counters for a partition that no longer exists") {
        fs::path cj = fs::path(dir.path) / "counters.json";
        json j = json::parse(slurp_file(cj));
        j["counters"][0]["flows"] = json::array({"f0", "f999"});
        spit_file(cj, j.dump(2));

        Session t;
        try {
            t.load_state(dir.path);
            FAIL_CHECK("expected load_state to reject mismatched counters");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::state);
        }
    }
}

TEST_CASE("state directories are exclusive while locked") {
    TempDir dir;
    Session s;
    build_example(s);
    s.lock_state_dir(dir.path);
    s.lock_state_dir(dir.path); // idempotent for the holder
    s.save_state(dir.path);     // holder saves without re-locking

    CHECK_THROWS_AS(StateLock{dir.path}, Error); // second holder is refused

    s.unlock_state_dir();
    StateLock lk(dir.path); // free again
    CHECK(lk.held());
    lk.release();
    CHECK(!lk.held());
}

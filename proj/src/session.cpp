#include "flowcept/session.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "flowcept/errors.hpp"

namespace flowcept {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    require(in.good(), ErrorKind::io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::io, "cannot write " + p.string());
    out << text;
    out.flush();
    require(out.good(), ErrorKind::io, "short write to " + p.string());
}

json parse_json_file(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    require(!j.is_discarded(), ErrorKind::state, what + " is not valid JSON");
    return j;
}

using Intent = std::vector<std::string>; // sorted matchfield labels

Intent sorted_labels(const json& arr) {
    Intent out;
    for (const json& v : arr) out.push_back(v.get<std::string>());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

// ---------------------------------------------------------------- StateLock

StateLock::StateLock(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::io, "cannot create state directory " + dir);
    std::string path = dir + "/.lock";
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    require(fd_ >= 0, ErrorKind::io, "cannot open lock file " + path);
    for (int attempt = 0; attempt < 50; ++attempt) {
        if (::flock(fd_, LOCK_EX | LOCK_NB) == 0) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    ::close(fd_);
    fd_ = -1;
    fail(ErrorKind::io, "state directory is locked by another process: " + dir);
}

StateLock::~StateLock() { release(); }

StateLock::StateLock(StateLock&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

StateLock& StateLock::operator=(StateLock&& other) noexcept {
    if (this != &other) {
        release();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void StateLock::release() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
        fd_ = -1;
    }
}

// ------------------------------------------------------------------ Session

void Session::require_built() const {
    require(lat_.has_value() && sup_.has_value(), ErrorKind::state,
            "structures not built yet (call build first)");
}

const ConceptLattice& Session::lattice() const {
    require_built();
    return *lat_;
}

const MeasurementSupport& Session::support() const {
    require_built();
    return *sup_;
}

void Session::load_context_csv(const std::string& text) { set_context(io::load_context_csv(text)); }

void Session::load_context_json(const std::string& text) {
    set_context(io::load_context_json(text));
}

void Session::set_context(FormalContext ctx) {
    ctx_ = std::move(ctx);
    lat_.reset();
    sup_.reset();
    store_.clear();
    queries_.clear();
    epoch_ = 0;
    closed_epochs_.clear();
    claimed_lattice_json_.clear();
    claimed_support_json_.clear();
}

void Session::load_queries_json(const std::string& text) {
    set_query_specs(io::load_query_specs_json(text));
}

void Session::set_query_specs(std::vector<QuerySpec> specs) {
    specs_ = std::move(specs);
    lat_.reset();
    sup_.reset();
    store_.clear();
    queries_.clear();
}

void Session::build() {
    queries_ = build_queries(ctx_, specs_);
    lat_ = ConceptLattice::build(ctx_);
    sup_ = compute_support(*lat_, queries_);
    store_.install(ctx_, *sup_, mode_);
    epoch_ = 0;
    closed_epochs_.clear();
    claimed_lattice_json_.clear();
    claimed_support_json_.clear();
}

Session::Counts Session::counts() const {
    require_built();
    Counts c;
    c.flows = ctx_.num_flows();
    c.matchfields = ctx_.num_matchfields();
    c.queries = uint32_t(queries_.size());
    c.concepts = lat_->size();
    c.targets = uint32_t(sup_->target_set().size());
    c.projections = uint32_t(sup_->projections.size());
    c.grounds = uint32_t(sup_->grounds.size());
    c.counters = store_.installed() ? store_.counters_in_use() : 0;
    return c;
}

MigrationReport Session::close_epoch_impl(const std::string& reason,
                                          const std::optional<std::string>& changed_flow,
                                          CounterMode closed_mode) {
    std::vector<CounterView> old = store_.snapshot();
    uint64_t old_events = store_.events();
    uint64_t old_drops = store_.drops();
    store_.install(ctx_, *sup_, mode_);
    MigrationReport mig = store_.migrate_from(old, changed_flow);
    json report;
    report["epoch"] = epoch_;
    report["closed_by"] = reason;
    report["mode"] = to_string(closed_mode);
    report["events"] = old_events;
    report["drops"] = old_drops;
    report["migration"] = {{"carried", mig.carried},
                           {"fresh", mig.fresh},
                           {"archived", mig.archived}};
    closed_epochs_.push_back(std::move(report));
    ++epoch_;
    return mig;
}

void Session::set_mode(CounterMode mode) {
    if (!store_.installed()) {
        mode_ = mode;
        return;
    }
    if (mode == mode_) return;
    require_built();
    CounterMode old = mode_;
    mode_ = mode;
    close_epoch_impl("set_mode " + to_string(mode), std::nullopt, old);
}

nlohmann::json Session::concept_brief(uint32_t id) const {
    json labels = json::array();
    lat_->concept_at(id).intent.for_each(
        [&](uint32_t m) { labels.push_back(ctx_.matchfield(m).label); });
    return {{"id", id}, {"intent", std::move(labels)}};
}

nlohmann::json Session::add_flow(const std::string& name,
                                 const std::vector<std::string>& labels) {
    require_built();
    FlowAddReport rep = flowcept::add_flow(ctx_, *lat_, *sup_, queries_, name, labels);
    MigrationReport mig = close_epoch_impl("add_flow " + name, name, mode_);

    json out;
    out["flow"] = name;
    out["flow_id"] = rep.structure.flow_id;
    out["rebuilt"] = rep.structure.rebuilt;
    out["set_ops"] = rep.structure.set_ops;
    out["modified"] = json::array();
    for (uint32_t id : rep.structure.modified) out["modified"].push_back(concept_brief(id));
    out["created"] = json::array();
    for (auto [id, gen] : rep.structure.created) {
        json e = concept_brief(id);
        e["genitor"] = concept_brief(gen);
        out["created"].push_back(std::move(e));
    }
    out["retargeted"] = json::array();
    for (const Retarget& r : rep.support.retargeted)
        out["retargeted"].push_back({{"query", queries_[r.query].label},
                                     {"from", concept_brief(r.from)},
                                     {"to", concept_brief(r.to)}});
    out["eclipsed"] = json::array();
    for (auto [former, successor] : rep.support.eclipsed)
        out["eclipsed"].push_back(
            {{"former", concept_brief(former)}, {"successor", concept_brief(successor)}});
    out["ground"] = rep.support.new_flow_ground >= 0
                        ? concept_brief(uint32_t(rep.support.new_flow_ground))
                        : json(nullptr);
    out["support_recomputed"] = rep.support.recomputed;
    out["migration"] = {{"carried", mig.carried},
                        {"fresh", mig.fresh},
                        {"archived", mig.archived}};
    out["epoch"] = epoch_;
    return out;
}

nlohmann::json Session::remove_flow(const std::string& name) {
    require_built();
    int64_t fid = ctx_.find_flow(name);
    require(fid >= 0, ErrorKind::not_found, "unknown flow: " + name);

    // no incremental removal: rebuild on the shrunken context (matchfield
    // columns are kept even when orphaned so query labels stay resolvable)
    FormalContext next;
    for (const MatchfieldValue& m : ctx_.matchfields()) next.add_matchfield(m.label, m.field_kind);
    for (const FlowEntry& f : ctx_.flows())
        if (f.id != uint32_t(fid)) next.add_flow(f.name, f.matchfields);
    ctx_ = std::move(next);
    queries_ = build_queries(ctx_, specs_);
    lat_ = ConceptLattice::build(ctx_);
    sup_ = compute_support(*lat_, queries_);
    MigrationReport mig = close_epoch_impl("remove_flow " + name, name, mode_);

    json out;
    out["flow"] = name;
    out["rebuilt"] = true;
    out["migration"] = {{"carried", mig.carried},
                        {"fresh", mig.fresh},
                        {"archived", mig.archived}};
    out["epoch"] = epoch_;
    return out;
}

nlohmann::json Session::add_query(const std::string& label,
                                  const std::vector<std::string>& labels) {
    require_built();
    specs_.push_back({label, labels});
    QuerySet rebuilt;
    try {
        rebuilt = build_queries(ctx_, specs_);
    } catch (...) {
        specs_.pop_back();
        throw;
    }
    queries_ = std::move(rebuilt);
    sup_ = compute_support(*lat_, queries_);
    MigrationReport mig = close_epoch_impl("add_query " + label, std::nullopt, mode_);

    json out;
    out["query"] = label;
    out["target"] = concept_brief(sup_->target[queries_.size() - 1]);
    out["unsatisfiable"] = bool(sup_->unsatisfiable[queries_.size() - 1]);
    out["migration"] = {{"carried", mig.carried},
                        {"fresh", mig.fresh},
                        {"archived", mig.archived}};
    out["epoch"] = epoch_;
    return out;
}

nlohmann::json Session::remove_query(const std::string& label) {
    require_built();
    auto it = std::find_if(specs_.begin(), specs_.end(),
                           [&](const QuerySpec& s) { return s.label == label; });
    require(it != specs_.end(), ErrorKind::not_found, "unknown query: " + label);
    specs_.erase(it);
    queries_ = build_queries(ctx_, specs_);
    sup_ = compute_support(*lat_, queries_);
    MigrationReport mig = close_epoch_impl("remove_query " + label, std::nullopt, mode_);

    json out;
    out["query"] = label;
    out["migration"] = {{"carried", mig.carried},
                        {"fresh", mig.fresh},
                        {"archived", mig.archived}};
    out["epoch"] = epoch_;
    return out;
}

Session::EventTotals Session::process_events(const std::vector<io::RawEvent>& events) {
    require_built();
    uint64_t e0 = store_.events(), d0 = store_.drops();
    for (const io::RawEvent& ev : events) {
        PacketEvent pe;
        pe.tick = ev.tick;
        pe.flow = ctx_.find_flow(ev.flow);
        pe.bytes = ev.bytes;
        store_.process(pe);
    }
    return {store_.events() - e0, store_.drops() - d0};
}

void Session::process_event(const std::string& flow_name, uint64_t bytes, uint64_t tick) {
    require_built();
    PacketEvent pe;
    pe.tick = tick;
    pe.flow = ctx_.find_flow(flow_name);
    pe.bytes = bytes;
    store_.process(pe);
}

const Query& Session::query_by_label(const std::string& label) const {
    for (const Query& q : queries_)
        if (q.label == label) return q;
    fail(ErrorKind::not_found, "unknown query: " + label);
}

QueryStats Session::stats_for(const std::string& query_label) const {
    require_built();
    return store_.stats_for_query(*sup_, query_by_label(query_label).id);
}

std::string Session::stats_csv() const {
    require_built();
    std::ostringstream out;
    out << "query,packets,bytes,num_counters_touched\n";
    for (const Query& q : queries_) {
        QueryStats st = store_.stats_for_query(*sup_, q.id);
        out << q.label << ',' << st.packets << ',' << st.bytes << ',' << st.counters_touched
            << '\n';
    }
    return out.str();
}

std::vector<std::string> Session::answer(const std::string& query_label) const {
    require_built();
    std::vector<std::string> names;
    answer_flowset(*sup_, query_by_label(query_label).id).for_each([&](uint32_t f) {
        names.push_back(ctx_.flow(f).name);
    });
    return names;
}

std::string Session::dump(const std::string& kind) const {
    if (kind == "context_csv") return io::save_context_csv(ctx_);
    if (kind == "context_json") return io::save_context_json(ctx_);
    if (kind == "queries") return io::save_query_specs_json(specs_);
    require_built();
    if (kind == "lattice") return io::lattice_to_json(ctx_, *lat_);
    if (kind == "support") return io::support_to_json(ctx_, *lat_, *sup_, queries_);
    if (kind == "partition") return io::partition_to_csv(ctx_, *sup_);
    if (kind == "dot") return io::lattice_to_dot(ctx_, *lat_, &*sup_);
    if (kind == "counters") {
        json j;
        j["mode"] = to_string(mode_);
        j["epoch"] = epoch_;
        j["events"] = store_.events();
        j["drops"] = store_.drops();
        j["counters"] = json::array();
        for (const CounterView& v : store_.snapshot())
            j["counters"].push_back({{"index", v.index},
                                     {"ground", v.ground},
                                     {"flows", v.flows},
                                     {"packets", v.packets},
                                     {"bytes", v.bytes}});
        return j.dump(2) + "\n";
    }
    if (kind == "epoch") {
        json j;
        j["epoch"] = epoch_;
        j["mode"] = to_string(mode_);
        j["counters_in_use"] = store_.installed() ? store_.counters_in_use() : 0;
        j["events"] = store_.events();
        j["drops"] = store_.drops();
        return j.dump(2) + "\n";
    }
    fail(ErrorKind::not_found, "unknown dump kind: " + kind);
}

void Session::lock_state_dir(const std::string& dir) {
    if (locked_dir_ == dir && lock_.held()) return;
    lock_ = StateLock(dir);
    locked_dir_ = dir;
}

void Session::unlock_state_dir() {
    lock_.release();
    locked_dir_.clear();
}

void Session::save_state(const std::string& dir) {
    require_built();
    std::optional<StateLock> scoped;
    if (!(lock_.held() && locked_dir_ == dir)) scoped.emplace(dir);

    std::error_code ec;
    fs::create_directories(fs::path(dir) / "epochs", ec);
    require(!ec, ErrorKind::io, "cannot create " + dir + "/epochs");

    spit(fs::path(dir) / "context.csv", dump("context_csv"));
    spit(fs::path(dir) / "queries.json", dump("queries"));
    spit(fs::path(dir) / "lattice.json", dump("lattice"));
    spit(fs::path(dir) / "support.json", dump("support"));
    spit(fs::path(dir) / "partition.csv", dump("partition"));
    spit(fs::path(dir) / "lattice.dot", dump("dot"));
    spit(fs::path(dir) / "counters.json", dump("counters"));
    spit(fs::path(dir) / "epoch.json", dump("epoch"));
    for (const json& report : closed_epochs_) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%04u",
                      report.at("epoch").get<uint32_t>());
        spit(fs::path(dir) / "epochs" / (std::string(name) + ".json"), report.dump(2) + "\n");
    }
    closed_epochs_.clear();
    claimed_lattice_json_ = dump("lattice");
    claimed_support_json_ = dump("support");
}

void Session::load_state(const std::string& dir) {
    std::optional<StateLock> scoped;
    if (!(lock_.held() && locked_dir_ == dir)) scoped.emplace(dir);

    fs::path base(dir);
    require(fs::exists(base / "context.csv"), ErrorKind::state,
            "state directory has no context.csv: " + dir);
    require(fs::exists(base / "queries.json"), ErrorKind::state,
            "state directory has no queries.json: " + dir);

    load_context_csv(slurp(base / "context.csv"));
    set_query_specs(io::load_query_specs_json(slurp(base / "queries.json")));

    // engine metadata first so build() installs with the right mode
    json counters;
    if (fs::exists(base / "counters.json")) {
        counters = parse_json_file(slurp(base / "counters.json"), "counters.json");
        mode_ = counter_mode_from_string(counters.value("mode", std::string("minimal")));
    }
    build();

    if (!counters.is_null()) {
        epoch_ = counters.value("epoch", uint64_t{0});
        // rewire saved values onto the rebuilt partition by flow-name set
        std::map<std::vector<std::string>, uint32_t> by_names;
        for (const CounterView& v : store_.snapshot()) {
            std::vector<std::string> k = v.flows;
            std::sort(k.begin(), k.end());
            by_names.emplace(std::move(k), v.index);
        }
        for (const json& e : counters.value("counters", json::array())) {
            std::vector<std::string> k;
            for (const json& n : e.at("flows")) k.push_back(n.get<std::string>());
            std::sort(k.begin(), k.end());
            auto it = by_names.find(k);
            require(it != by_names.end(), ErrorKind::state,
                    "counters.json does not match the rebuilt partition");
            store_.restore_counter(it->second, e.at("packets").get<uint64_t>(),
                                   e.at("bytes").get<uint64_t>());
        }
        store_.restore_tallies(counters.value("events", uint64_t{0}),
                               counters.value("drops", uint64_t{0}));
    }
    if (fs::exists(base / "epoch.json")) {
        json ej = parse_json_file(slurp(base / "epoch.json"), "epoch.json");
        epoch_ = ej.value("epoch", epoch_);
    }

    if (fs::exists(base / "lattice.json")) claimed_lattice_json_ = slurp(base / "lattice.json");
    if (fs::exists(base / "support.json")) claimed_support_json_ = slurp(base / "support.json");
}

namespace {

struct ClaimedLattice {
    std::map<uint32_t, Intent> intent_of_id;
    std::set<Intent> intents;
    std::map<Intent, std::set<std::string>> extent_of; // intent -> flow names
    std::set<std::pair<Intent, Intent>> edges;         // (child, parent)
};

ClaimedLattice parse_claimed_lattice(const std::string& text) {
    json j = parse_json_file(text, "lattice.json");
    require(j.is_object() && j.contains("concepts"), ErrorKind::state,
            "lattice.json has no concepts");
    ClaimedLattice cl;
    for (const json& c : j["concepts"]) {
        Intent intent = sorted_labels(c.at("intent"));
        uint32_t id = c.at("id").get<uint32_t>();
        require(cl.intents.insert(intent).second, ErrorKind::verify,
                "lattice.json repeats an intent");
        cl.intent_of_id[id] = intent;
        std::set<std::string> extent;
        for (const json& n : c.at("extent")) extent.insert(n.get<std::string>());
        cl.extent_of[intent] = std::move(extent);
    }
    for (const json& c : j["concepts"]) {
        Intent child = cl.intent_of_id.at(c.at("id").get<uint32_t>());
        for (const json& p : c.at("parents")) {
            auto it = cl.intent_of_id.find(p.get<uint32_t>());
            require(it != cl.intent_of_id.end(), ErrorKind::verify,
                    "lattice.json parent id points nowhere");
            cl.edges.emplace(child, it->second);
        }
    }
    return cl;
}

} // namespace

std::vector<CheckResult> Session::verify() const {
    require_built();
    std::vector<CheckResult> results = verify_all(
        ctx_, *lat_, queries_, specs_, *sup_, store_.installed() ? &store_ : nullptr);

    auto run = [&](const std::string& name, const std::function<std::string()>& body) {
        CheckResult r;
        r.name = name;
        try {
            r.message = body();
            r.ok = true;
        } catch (const std::exception& e) {
            r.ok = false;
            r.message = e.what();
        }
        results.push_back(std::move(r));
    };

    if (!claimed_lattice_json_.empty()) {
        run("state-lattice-match", [&] {
            ClaimedLattice cl = parse_claimed_lattice(claimed_lattice_json_);
            // live view, keyed the same way
            std::set<Intent> live_intents;
            std::map<Intent, std::set<std::string>> live_extents;
            std::set<std::pair<Intent, Intent>> live_edges;
            for (const Concept& c : lat_->concepts()) {
                Intent intent;
                c.intent.for_each([&](uint32_t m) { intent.push_back(ctx_.matchfield(m).label); });
                std::sort(intent.begin(), intent.end());
                std::set<std::string> extent;
                c.extent.for_each([&](uint32_t f) { extent.insert(ctx_.flow(f).name); });
                live_extents[intent] = std::move(extent);
                live_intents.insert(intent);
            }
            for (const Concept& c : lat_->concepts()) {
                Intent child;
                c.intent.for_each([&](uint32_t m) { child.push_back(ctx_.matchfield(m).label); });
                std::sort(child.begin(), child.end());
                for (uint32_t p : c.parents) {
                    Intent parent;
                    lat_->concept_at(p).intent.for_each(
                        [&](uint32_t m) { parent.push_back(ctx_.matchfield(m).label); });
                    std::sort(parent.begin(), parent.end());
                    live_edges.emplace(child, parent);
                }
            }
            require(cl.intents == live_intents, ErrorKind::verify,
                    "saved lattice.json lists a different concept family");
            require(cl.extent_of == live_extents, ErrorKind::verify,
                    "saved lattice.json extents disagree with the rebuilt lattice");
            require(cl.edges == live_edges, ErrorKind::verify,
                    "saved lattice.json cover links disagree with the rebuilt lattice");
            return std::string();
        });
    }

    if (!claimed_support_json_.empty() && !claimed_lattice_json_.empty()) {
        run("state-support-match", [&] {
            ClaimedLattice cl = parse_claimed_lattice(claimed_lattice_json_);
            json j = parse_json_file(claimed_support_json_, "support.json");

            auto live_intent = [&](uint32_t cid) {
                Intent intent;
                lat_->concept_at(cid).intent.for_each(
                    [&](uint32_t m) { intent.push_back(ctx_.matchfield(m).label); });
                std::sort(intent.begin(), intent.end());
                return intent;
            };
            auto claimed_intent = [&](uint32_t cid) {
                auto it = cl.intent_of_id.find(cid);
                require(it != cl.intent_of_id.end(), ErrorKind::verify,
                        "support.json references a concept missing from lattice.json");
                return it->second;
            };

            for (const Query& q : queries_) {
                require(j.at("targets").contains(q.label), ErrorKind::verify,
                        "support.json lost query " + q.label);
                Intent claimed = claimed_intent(j["targets"][q.label].get<uint32_t>());
                require(claimed == live_intent(sup_->target[q.id]), ErrorKind::verify,
                        "support.json target for " + q.label + " disagrees");
            }

            std::set<Intent> claimed_proj, claimed_grounds;
            for (const json& id : j.value("projections", json::array()))
                claimed_proj.insert(claimed_intent(id.get<uint32_t>()));
            for (const json& id : j.value("grounds", json::array()))
                claimed_grounds.insert(claimed_intent(id.get<uint32_t>()));
            std::set<Intent> live_proj, live_grounds;
            for (uint32_t p : sup_->projections) live_proj.insert(live_intent(p));
            for (uint32_t g : sup_->grounds) live_grounds.insert(live_intent(g));
            require(claimed_proj == live_proj, ErrorKind::verify,
                    "support.json projections disagree");
            require(claimed_grounds == live_grounds, ErrorKind::verify,
                    "support.json grounds disagree");

            std::map<Intent, std::string> claimed_vec, live_vec;
            json vectors = j.value("vectors", json::object());
            for (auto& [key, val] : vectors.items())
                claimed_vec[claimed_intent(uint32_t(std::stoul(key)))] =
                    val.get<std::string>();
            for (uint32_t c = 0; c < lat_->size(); ++c)
                live_vec[live_intent(c)] = io::vector_hex(sup_->vectors[c], queries_.size());
            require(claimed_vec == live_vec, ErrorKind::verify,
                    "support.json query vectors disagree");

            json flow_to_ground = j.value("flow_to_ground", json::object());
            for (auto& [flow, gid] : flow_to_ground.items()) {
                int64_t fid = ctx_.find_flow(flow);
                require(fid >= 0, ErrorKind::verify,
                        "support.json names unknown flow " + flow);
                int64_t live_mu = sup_->mu[size_t(fid)];
                if (gid.get<int64_t>() < 0) {
                    require(live_mu < 0, ErrorKind::verify,
                            "support.json marks " + flow + " unmonitored but it is grounded");
                } else {
                    require(live_mu >= 0, ErrorKind::verify,
                            "support.json grounds " + flow + " but it is unmonitored");
                    require(claimed_intent(uint32_t(gid.get<int64_t>())) ==
                                live_intent(uint32_t(live_mu)),
                            ErrorKind::verify, "support.json ground of " + flow + " disagrees");
                }
            }
            return std::string();
        });
    }

    return results;
}

} // namespace flowcept

#include "flowcept/engine.hpp"

#include <algorithm>
#include <map>

#include "flowcept/errors.hpp"

namespace flowcept {

std::string to_string(CounterMode mode) {
    return mode == CounterMode::minimal ? "minimal" : "baseline";
}

CounterMode counter_mode_from_string(const std::string& s) {
    if (s == "minimal") return CounterMode::minimal;
    if (s == "baseline") return CounterMode::baseline;
    fail(ErrorKind::parse, "unknown counter mode: " + s + " (expected minimal|baseline)");
}

void CounterStore::install(const FormalContext& ctx, const MeasurementSupport& sup,
                           CounterMode mode) {
    mode_ = mode;
    counters_.clear();
    counter_ground_.clear();
    counter_flows_.clear();
    ground_to_counter_.clear();
    flow_to_counter_.assign(ctx.num_flows(), -1);
    events_.store(0);
    drops_.store(0);
    routed_.store(0);

    if (mode == CounterMode::minimal) {
        std::vector<uint32_t> grounds(sup.grounds.begin(), sup.grounds.end());
        std::sort(grounds.begin(), grounds.end());
        for (uint32_t g : grounds) {
            int64_t idx = static_cast<int64_t>(counters_.size());
            counters_.emplace_back();
            counter_ground_.push_back(g);
            ground_to_counter_.emplace_back(g, idx);
            auto it = sup.grounded.find(g);
            require(it != sup.grounded.end(), ErrorKind::internal, "ground without flows");
            std::vector<std::string> names;
            for (uint32_t f : it->second) {
                names.push_back(ctx.flow(f).name);
                flow_to_counter_[f] = idx;
            }
            counter_flows_.push_back(std::move(names));
        }
    } else {
        for (uint32_t f = 0; f < ctx.num_flows(); ++f) {
            int64_t idx = static_cast<int64_t>(counters_.size());
            counters_.emplace_back();
            counter_ground_.push_back(-1);
            counter_flows_.push_back({ctx.flow(f).name});
            flow_to_counter_[f] = idx;
        }
    }
    installed_ = true;
}

void CounterStore::clear() {
    installed_ = false;
    counters_.clear();
    counter_ground_.clear();
    counter_flows_.clear();
    ground_to_counter_.clear();
    flow_to_counter_.clear();
    events_.store(0);
    drops_.store(0);
    routed_.store(0);
}

void CounterStore::process(const PacketEvent& ev) {
    require(installed_, ErrorKind::state, "counters not installed");
    events_.fetch_add(1, std::memory_order_relaxed);
    if (ev.flow < 0 || static_cast<size_t>(ev.flow) >= flow_to_counter_.size()) {
        drops_.fetch_add(1, std::memory_order_relaxed);
        return;
    }
    int64_t c = flow_to_counter_[static_cast<size_t>(ev.flow)];
    if (c < 0) return; // known flow outside every query: nothing to count
    counters_[static_cast<size_t>(c)].packets.fetch_add(1, std::memory_order_relaxed);
    counters_[static_cast<size_t>(c)].bytes.fetch_add(ev.bytes, std::memory_order_relaxed);
    routed_.fetch_add(1, std::memory_order_relaxed);
}

std::vector<CounterView> CounterStore::snapshot() const {
    std::vector<CounterView> out;
    out.reserve(counters_.size());
    for (size_t i = 0; i < counters_.size(); ++i) {
        CounterView v;
        v.index = static_cast<uint32_t>(i);
        v.packets = counters_[i].packets.load(std::memory_order_relaxed);
        v.bytes = counters_[i].bytes.load(std::memory_order_relaxed);
        v.ground = counter_ground_[i];
        v.flows = counter_flows_[i];
        out.push_back(std::move(v));
    }
    return out;
}

int64_t CounterStore::counter_of_flow(uint32_t flow_id) const {
    if (flow_id >= flow_to_counter_.size()) return -1;
    return flow_to_counter_[flow_id];
}

int64_t CounterStore::counter_of_ground(uint32_t concept_id) const {
    auto it = std::lower_bound(ground_to_counter_.begin(), ground_to_counter_.end(),
                               std::make_pair(concept_id, int64_t{-1}));
    if (it == ground_to_counter_.end() || it->first != concept_id) return -1;
    return it->second;
}

QueryStats CounterStore::stats_for_query(const MeasurementSupport& sup, uint32_t query_id) const {
    require(installed_, ErrorKind::state, "counters not installed");
    QueryStats st;
    if (mode_ == CounterMode::minimal) {
        for (const auto& [g, idx] : ground_to_counter_) {
            if (!sup.vectors[g].test(query_id)) continue;
            st.packets += counters_[static_cast<size_t>(idx)].packets.load(std::memory_order_relaxed);
            st.bytes += counters_[static_cast<size_t>(idx)].bytes.load(std::memory_order_relaxed);
            ++st.counters_touched;
        }
    } else {
        Bitset flows = answer_flowset(sup, query_id);
        flows.for_each([&](uint32_t f) {
            int64_t idx = flow_to_counter_[f];
            require(idx >= 0, ErrorKind::internal, "answer flow without baseline counter");
            st.packets += counters_[static_cast<size_t>(idx)].packets.load(std::memory_order_relaxed);
            st.bytes += counters_[static_cast<size_t>(idx)].bytes.load(std::memory_order_relaxed);
            ++st.counters_touched;
        });
    }
    return st;
}

MigrationReport CounterStore::migrate_from(const std::vector<CounterView>& old_counters,
                                           const std::optional<std::string>& changed_flow) {
    require(installed_, ErrorKind::state, "counters not installed");
    MigrationReport rep;

    auto key_of = [&](const std::vector<std::string>& flows) {
        std::vector<std::string> k = flows;
        if (changed_flow) k.erase(std::remove(k.begin(), k.end(), *changed_flow), k.end());
        std::sort(k.begin(), k.end());
        return k;
    };

    // exact name-set match first, then match modulo the changed flow
    std::map<std::vector<std::string>, size_t> exact, reduced;
    for (size_t i = 0; i < old_counters.size(); ++i) {
        std::vector<std::string> k = old_counters[i].flows;
        std::sort(k.begin(), k.end());
        exact.emplace(std::move(k), i);
        reduced.emplace(key_of(old_counters[i].flows), i);
    }

    std::vector<bool> claimed(old_counters.size(), false);
    uint64_t carried_packets = 0;
    for (size_t i = 0; i < counters_.size(); ++i) {
        std::vector<std::string> k = counter_flows_[i];
        std::sort(k.begin(), k.end());
        const CounterView* src = nullptr;
        if (auto it = exact.find(k); it != exact.end() && !claimed[it->second]) {
            src = &old_counters[it->second];
            claimed[it->second] = true;
        } else if (auto it2 = reduced.find(key_of(counter_flows_[i]));
                   it2 != reduced.end() && !claimed[it2->second]) {
            src = &old_counters[it2->second];
            claimed[it2->second] = true;
        }
        if (src) {
            counters_[i].packets.store(src->packets, std::memory_order_relaxed);
            counters_[i].bytes.store(src->bytes, std::memory_order_relaxed);
            carried_packets += src->packets;
            ++rep.carried;
        } else {
            ++rep.fresh;
        }
    }
    for (size_t i = 0; i < old_counters.size(); ++i)
        if (!claimed[i]) ++rep.archived;
    routed_.store(carried_packets, std::memory_order_relaxed);
    return rep;
}

void CounterStore::restore_counter(uint32_t index, uint64_t packets, uint64_t bytes) {
    require(index < counters_.size(), ErrorKind::state, "counter index out of range");
    uint64_t before = counters_[index].packets.load(std::memory_order_relaxed);
    counters_[index].packets.store(packets, std::memory_order_relaxed);
    counters_[index].bytes.store(bytes, std::memory_order_relaxed);
    routed_.fetch_add(packets - before, std::memory_order_relaxed);
}

void CounterStore::restore_tallies(uint64_t events, uint64_t drops) {
    events_.store(events, std::memory_order_relaxed);
    drops_.store(drops, std::memory_order_relaxed);
}

} // namespace flowcept

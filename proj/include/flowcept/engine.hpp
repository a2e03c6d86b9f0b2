#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "flowcept/context.hpp"
#include "flowcept/measurement.hpp"

namespace flowcept {

enum class CounterMode { minimal, baseline };

std::string to_string(CounterMode mode);
CounterMode counter_mode_from_string(const std::string& s);

struct PacketEvent {
    uint64_t tick = 0;
    int64_t flow = -1; // resolved flow id; -1 = unknown flow name
    uint64_t bytes = 0;
};

struct CounterView {
    uint32_t index = 0;
    uint64_t packets = 0;
    uint64_t bytes = 0;
    int64_t ground = -1;                   // concept id in minimal mode, -1 in baseline
    std::vector<std::string> flows;        // names of flows feeding this counter
};

struct QueryStats {
    uint64_t packets = 0;
    uint64_t bytes = 0;
    uint32_t counters_touched = 0;
};

// What happened to each counter across a reinstall.
struct MigrationReport {
    uint32_t carried = 0;   // old counter value moved to a new counter
    uint32_t fresh = 0;     // new counter started at zero
    uint32_t archived = 0;  // old counter had no successor; value dropped with the epoch
};

// Holds the live counters for one measurement epoch. In minimal mode there is
// one counter per ground (indexed in ascending ground concept id); in baseline
// mode one per flow. Increments are atomic so packet processing may be driven
// from multiple threads; install/migrate are single-threaded.
class CounterStore {
public:
    CounterStore() = default;
    CounterStore(const CounterStore&) = delete;
    CounterStore& operator=(const CounterStore&) = delete;

    // Wires counters for the given support. Counters start at zero; event and
    // drop tallies reset. Call migrate_from afterwards to carry old values.
    void install(const FormalContext& ctx, const MeasurementSupport& sup, CounterMode mode);
    void clear(); // back to the not-installed state

    bool installed() const { return installed_; }
    CounterMode mode() const { return mode_; }
    uint32_t counters_in_use() const { return static_cast<uint32_t>(counters_.size()); }

    // Routes one event. Unknown flows (flow < 0 or out of range) count as
    // drops; known flows not feeding any counter are counted in events only.
    void process(const PacketEvent& ev);

    uint64_t events() const { return events_.load(std::memory_order_relaxed); }
    uint64_t drops() const { return drops_.load(std::memory_order_relaxed); }
    // Sum over counters always equals routed(): every routed packet lands in
    // exactly one counter.
    uint64_t routed() const { return routed_.load(std::memory_order_relaxed); }

    std::vector<CounterView> snapshot() const;
    int64_t counter_of_flow(uint32_t flow_id) const;
    int64_t counter_of_ground(uint32_t concept_id) const; // minimal mode only

    // Exact per-query totals: sums the counters of grounds whose vector holds
    // the query (minimal) or of the flows answering it (baseline).
    QueryStats stats_for_query(const MeasurementSupport& sup, uint32_t query_id) const;

    // Carries counter values from the previous epoch into freshly installed
    // counters. A counter carries when its flow-name set is identical, or
    // identical after ignoring `changed_flow` (the flow just added/removed) on
    // either side. Resets routed() to the carried total.
    MigrationReport migrate_from(const std::vector<CounterView>& old_counters,
                                 const std::optional<std::string>& changed_flow);

    // Restores persisted values (state load). Index must be in range.
    void restore_counter(uint32_t index, uint64_t packets, uint64_t bytes);
    void restore_tallies(uint64_t events, uint64_t drops);

private:
    struct Cell {
        std::atomic<uint64_t> packets{0};
        std::atomic<uint64_t> bytes{0};
    };

    bool installed_ = false;
    CounterMode mode_ = CounterMode::minimal;
    std::deque<Cell> counters_;
    std::vector<int64_t> flow_to_counter_;
    std::vector<int64_t> counter_ground_;
    std::vector<std::vector<std::string>> counter_flows_;
    std::vector<std::pair<uint32_t, int64_t>> ground_to_counter_; // sorted by concept id
    std::atomic<uint64_t> events_{0};
    std::atomic<uint64_t> drops_{0};
    std::atomic<uint64_t> routed_{0};
};

} // namespace flowcept

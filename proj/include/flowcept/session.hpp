#pragma once

// One measurement instance: context + queries + lattice + support + counters,
// with epoch bookkeeping, state-directory persistence and self-verification.
// This is the layer the C API (and through it the CLI) drives.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowcept/benchgen.hpp"
#include "flowcept/context.hpp"
#include "flowcept/engine.hpp"
#include "flowcept/io.hpp"
#include "flowcept/lattice.hpp"
#include "flowcept/measurement.hpp"
#include "flowcept/verify.hpp"

namespace flowcept {

// Advisory exclusive lock on a state directory (flock on <dir>/.lock).
// Non-blocking with bounded retries; throws ErrorKind::io when the directory
// stays locked by another process.
class StateLock {
public:
    StateLock() = default;
    explicit StateLock(const std::string& dir);
    ~StateLock();
    StateLock(const StateLock&) = delete;
    StateLock& operator=(const StateLock&) = delete;
    StateLock(StateLock&& other) noexcept;
    StateLock& operator=(StateLock&& other) noexcept;
    bool held() const { return fd_ >= 0; }
    void release();

private:
    int fd_ = -1;
};

class Session {
public:
    Session() = default;
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    // ---- inputs ----
    void load_context_csv(const std::string& text);
    void load_context_json(const std::string& text);
    void load_queries_json(const std::string& text);
    void set_context(FormalContext ctx);                 // in-process use
    void set_query_specs(std::vector<QuerySpec> specs);  // in-process use

    // ---- lifecycle ----
    // Builds lattice, support and counters from the loaded inputs; resets the
    // epoch to 0 and all counters to zero.
    void build();
    bool built() const { return lat_.has_value(); }
    void set_mode(CounterMode mode); // closes the epoch when counters exist

    struct Counts {
        uint32_t flows = 0, matchfields = 0, queries = 0, concepts = 0;
        uint32_t targets = 0, projections = 0, grounds = 0, counters = 0;
    };
    Counts counts() const;

    // ---- incremental changes (each closes the epoch) ----
    // Incremental structure/status repair; counters migrate by flow-name set.
    nlohmann::json add_flow(const std::string& name, const std::vector<std::string>& labels);
    // Removal has no incremental path: documented rebuild + counter migration.
    nlohmann::json remove_flow(const std::string& name);
    nlohmann::json add_query(const std::string& label, const std::vector<std::string>& labels);
    nlohmann::json remove_query(const std::string& label);

    // ---- traffic ----
    struct EventTotals {
        uint64_t events = 0;
        uint64_t drops = 0;
    };
    EventTotals process_events(const std::vector<io::RawEvent>& events);
    void process_event(const std::string& flow_name, uint64_t bytes, uint64_t tick);
    QueryStats stats_for(const std::string& query_label) const;
    std::string stats_csv() const; // query,packets,bytes,num_counters_touched

    // ---- answers & renderings ----
    std::vector<std::string> answer(const std::string& query_label) const;
    // kinds: context_csv, context_json, queries, lattice, support, partition,
    // dot, counters, epoch
    std::string dump(const std::string& kind) const;

    // ---- persistence ----
    // Layout: context.csv + queries.json are the source of truth; lattice.json,
    // support.json, partition.csv, lattice.dot are renderings checked on
    // verify; counters.json + epoch.json carry engine state; closed epochs are
    // archived under epochs/.
    void save_state(const std::string& dir);
    void load_state(const std::string& dir);

    // Cross-checks everything, including saved renderings when this session
    // was loaded from a state directory (compared intent-keyed, since concept
    // numbering is construction-order dependent).
    std::vector<CheckResult> verify() const;

    // held across calls so multi-command workflows can serialize; load/save
    // take their own scoped lock when none is held
    void lock_state_dir(const std::string& dir);
    void unlock_state_dir();

    // ---- direct access (tests, capi readbacks) ----
    const FormalContext& context() const { return ctx_; }
    const std::vector<QuerySpec>& query_specs() const { return specs_; }
    const QuerySet& queries() const { return queries_; }
    const ConceptLattice& lattice() const;
    const MeasurementSupport& support() const;
    const CounterStore& store() const { return store_; }
    CounterMode mode() const { return mode_; }
    uint64_t epoch() const { return epoch_; }

private:
    void require_built() const;
    MigrationReport close_epoch_impl(const std::string& reason,
                                     const std::optional<std::string>& changed_flow,
                                     CounterMode closed_mode);
    const Query& query_by_label(const std::string& label) const;
    nlohmann::json concept_brief(uint32_t id) const;

    FormalContext ctx_;
    std::vector<QuerySpec> specs_;
    QuerySet queries_;
    std::optional<ConceptLattice> lat_;
    std::optional<MeasurementSupport> sup_;
    CounterStore store_;
    CounterMode mode_ = CounterMode::minimal;
    uint64_t epoch_ = 0;
    std::vector<nlohmann::json> closed_epochs_; // flushed to epochs/ on save
    StateLock lock_;
    std::string locked_dir_;
    // saved renderings remembered from load_state for verify()
    std::string claimed_lattice_json_;
    std::string claimed_support_json_;
};

} // namespace flowcept

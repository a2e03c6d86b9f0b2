#ifndef FLOWCEPT_H
#define FLOWCEPT_H

/* C interface to the lattice-based traffic measurement engine.
 *
 * Usage pattern: create a session, feed it a context and queries, build,
 * then add flows / process events / read answers.  Every function returns
 * FLOWCEPT_OK (0) or an error code; flowcept_last_error() gives the message
 * for the most recent failure on that session.  Strings returned through
 * char** out-parameters are heap-allocated; release them with
 * flowcept_string_free().  Sessions are internally synchronized: calls on
 * one session may come from multiple threads.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct flowcept_session flowcept_session;

enum {
    FLOWCEPT_OK = 0,
    FLOWCEPT_E_ARGUMENT = 1,   /* null/invalid call arguments */
    FLOWCEPT_E_PARSE = 2,      /* malformed input text */
    FLOWCEPT_E_CONSTRAINT = 3, /* input violates a domain rule (duplicate flow, ...) */
    FLOWCEPT_E_NOT_FOUND = 4,  /* unknown flow/query/concept/dump kind */
    FLOWCEPT_E_STATE = 5,      /* call not valid in the current state */
    FLOWCEPT_E_IO = 6,         /* file system or locking failure */
    FLOWCEPT_E_VERIFY = 7,     /* a verification check failed */
    FLOWCEPT_E_INTERNAL = 8    /* invariant breach inside the library */
};

const char* flowcept_version(void);

flowcept_session* flowcept_session_new(void);
void flowcept_session_free(flowcept_session* s);

/* Message of the most recent error on this session ("" when none). The
 * pointer stays valid until the next failing call on the same session. */
const char* flowcept_last_error(const flowcept_session* s);

void flowcept_string_free(char* s);

/* ---- inputs ---- */
int flowcept_load_context_csv(flowcept_session* s, const char* text);
int flowcept_load_context_json(flowcept_session* s, const char* text);
int flowcept_load_queries_json(flowcept_session* s, const char* text);

/* ---- lifecycle ---- */
int flowcept_build(flowcept_session* s);
/* mode: "minimal" (one counter per ground) or "baseline" (one per flow) */
int flowcept_set_mode(flowcept_session* s, const char* mode);

typedef struct flowcept_counts {
    uint32_t flows, matchfields, queries, concepts;
    uint32_t targets, projections, grounds, counters;
} flowcept_counts;
int flowcept_get_counts(flowcept_session* s, flowcept_counts* out);

/* ---- incremental changes ----
 * labels: array of matchfield label strings of length num_labels.
 * report_json (nullable): receives a JSON change report. */
int flowcept_add_flow(flowcept_session* s, const char* name, const char* const* labels,
                      size_t num_labels, char** report_json);
int flowcept_remove_flow(flowcept_session* s, const char* name, char** report_json);
int flowcept_add_query(flowcept_session* s, const char* label, const char* const* labels,
                       size_t num_labels, char** report_json);
int flowcept_remove_query(flowcept_session* s, const char* label, char** report_json);

/* ---- traffic ---- */
int flowcept_process_event(flowcept_session* s, const char* flow_name, uint64_t bytes,
                           uint64_t tick);
/* text: lines of "tick,flow,bytes"; events/drops (nullable) receive totals
 * for this batch */
int flowcept_process_events_text(flowcept_session* s, const char* text, uint64_t* events,
                                 uint64_t* drops);
int flowcept_query_stats(flowcept_session* s, const char* query_label, uint64_t* packets,
                         uint64_t* bytes, uint32_t* counters_touched);
/* CSV "query,packets,bytes,num_counters_touched" over all queries */
int flowcept_query_stats_csv(flowcept_session* s, char** csv);

/* ---- answers & renderings ---- */
/* flows_json receives a JSON array of flow names */
int flowcept_answer_query(flowcept_session* s, const char* query_label, char** flows_json);
/* what: context_csv | context_json | queries | lattice | support | partition
 *       | dot | counters | epoch */
int flowcept_dump(flowcept_session* s, const char* what, char** out);

/* ---- verification ---- */
/* report (nullable) receives one "PASS name" / "FAIL name - why" line per
 * check; returns FLOWCEPT_E_VERIFY when any check fails */
int flowcept_verify(flowcept_session* s, char** report);

/* ---- persistence ---- */
/* Holds an exclusive lock on the directory until unlock/free, so a
 * load-mutate-save sequence excludes other processes. load/save also take a
 * scoped lock on their own when none is held. */
int flowcept_lock_state(flowcept_session* s, const char* dir);
int flowcept_unlock_state(flowcept_session* s);
int flowcept_save_state(flowcept_session* s, const char* dir);
int flowcept_load_state(flowcept_session* s, const char* dir);

/* ---- benchmark generation (session-free; err receives a message) ---- */
int flowcept_bench_default_spec(char** spec_json);
/* seed_override >= 0 replaces the spec's seed */
int flowcept_bench_generate(const char* spec_json, int64_t seed_override, char** context_csv,
                            char** queries_json, char** err);
int flowcept_bench_sweep(const char* spec_json, const double* wildcard_pcts, size_t num_pcts,
                         char** csv, char** err);

#ifdef __cplusplus
}
#endif

#endif /* FLOWCEPT_H */

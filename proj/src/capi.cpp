#include "flowcept.h"

#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

#include <json.hpp>

#include "flowcept/benchgen.hpp"
#include "flowcept/errors.hpp"
#include "flowcept/session.hpp"

using namespace flowcept;

struct flowcept_session {
    std::mutex mu;
    Session impl;
    std::string last_error;
};

namespace {

int code_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parse: return FLOWCEPT_E_PARSE;
        case ErrorKind::constraint: return FLOWCEPT_E_CONSTRAINT;
        case ErrorKind::not_found: return FLOWCEPT_E_NOT_FOUND;
        case ErrorKind::state: return FLOWCEPT_E_STATE;
        case ErrorKind::io: return FLOWCEPT_E_IO;
        case ErrorKind::verify: return FLOWCEPT_E_VERIFY;
        case ErrorKind::internal: return FLOWCEPT_E_INTERNAL;
    }
    return FLOWCEPT_E_INTERNAL;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// runs body under the session lock, translating exceptions to codes
template <typename Fn>
int guarded(flowcept_session* s, Fn&& body) {
    if (!s) return FLOWCEPT_E_ARGUMENT;
    std::lock_guard<std::mutex> hold(s->mu);
    try {
        s->last_error.clear();
        return body();
    } catch (const Error& e) {
        s->last_error = e.what();
        return code_of(e.kind());
    } catch (const std::exception& e) {
        s->last_error = e.what();
        return FLOWCEPT_E_INTERNAL;
    }
}

std::vector<std::string> collect(const char* const* items, size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        require(items[i] != nullptr, ErrorKind::constraint, "null string in label array");
        out.emplace_back(items[i]);
    }
    return out;
}

} // namespace

extern "C" {

const char* flowcept_version(void) { return "0.1.0"; }

flowcept_session* flowcept_session_new(void) {
    try {
        return new flowcept_session();
    } catch (...) {
        return nullptr;
    }
}

void flowcept_session_free(flowcept_session* s) { delete s; }

const char* flowcept_last_error(const flowcept_session* s) {
    return s ? s->last_error.c_str() : "null session";
}

void flowcept_string_free(char* s) { ::free(s); }

int flowcept_load_context_csv(flowcept_session* s, const char* text) {
    return guarded(s, [&] {
        require(text, ErrorKind::constraint, "null text");
        s->impl.load_context_csv(text);
        return FLOWCEPT_OK;
    });
}

int flowcept_load_context_json(flowcept_session* s, const char* text) {
    return guarded(s, [&] {
        require(text, ErrorKind::constraint, "null text");
        s->impl.load_context_json(text);
        return FLOWCEPT_OK;
    });
}

int flowcept_load_queries_json(flowcept_session* s, const char* text) {
    return guarded(s, [&] {
        require(text, ErrorKind::constraint, "null text");
        s->impl.load_queries_json(text);
        return FLOWCEPT_OK;
    });
}

int flowcept_build(flowcept_session* s) {
    return guarded(s, [&] {
        s->impl.build();
        return FLOWCEPT_OK;
    });
}

int flowcept_set_mode(flowcept_session* s, const char* mode) {
    return guarded(s, [&] {
        require(mode, ErrorKind::constraint, "null mode");
        s->impl.set_mode(counter_mode_from_string(mode));
        return FLOWCEPT_OK;
    });
}

int flowcept_get_counts(flowcept_session* s, flowcept_counts* out) {
    return guarded(s, [&] {
        require(out, ErrorKind::constraint, "null output");
        Session::Counts c = s->impl.counts();
        *out = {c.flows, c.matchfields, c.queries, c.concepts,
                c.targets, c.projections, c.grounds, c.counters};
        return FLOWCEPT_OK;
    });
}

int flowcept_add_flow(flowcept_session* s, const char* name, const char* const* labels,
                      size_t num_labels, char** report_json) {
    return guarded(s, [&] {
        require(name, ErrorKind::constraint, "null flow name");
        require(labels || num_labels == 0, ErrorKind::constraint, "null label array");
        nlohmann::json rep = s->impl.add_flow(name, collect(labels, num_labels));
        if (report_json) *report_json = dup_string(rep.dump(2) + "\n");
        return FLOWCEPT_OK;
    });
}

int flowcept_remove_flow(flowcept_session* s, const char* name, char** report_json) {
    return guarded(s, [&] {
        require(name, ErrorKind::constraint, "null flow name");
        nlohmann::json rep = s->impl.remove_flow(name);
        if (report_json) *report_json = dup_string(rep.dump(2) + "\n");
        return FLOWCEPT_OK;
    });
}

int flowcept_add_query(flowcept_session* s, const char* label, const char* const* labels,
                       size_t num_labels, char** report_json) {
    return guarded(s, [&] {
        require(label, ErrorKind::constraint, "null query label");
        require(labels || num_labels == 0, ErrorKind::constraint, "null label array");
        nlohmann::json rep = s->impl.add_query(label, collect(labels, num_labels));
        if (report_json) *report_json = dup_string(rep.dump(2) + "\n");
        return FLOWCEPT_OK;
    });
}

int flowcept_remove_query(flowcept_session* s, const char* label, char** report_json) {
    return guarded(s, [&] {
        require(label, ErrorKind::constraint, "null query label");
        nlohmann::json rep = s->impl.remove_query(label);
        if (report_json) *report_json = dup_string(rep.dump(2) + "\n");
        return FLOWCEPT_OK;
    });
}

int flowcept_process_event(flowcept_session* s, const char* flow_name, uint64_t bytes,
                           uint64_t tick) {
    return guarded(s, [&] {
        require(flow_name, ErrorKind::constraint, "null flow name");
        s->impl.process_event(flow_name, bytes, tick);
        return FLOWCEPT_OK;
    });
}

int flowcept_process_events_text(flowcept_session* s, const char* text, uint64_t* events,
                                 uint64_t* drops) {
    return guarded(s, [&] {
        require(text, ErrorKind::constraint, "null text");
        Session::EventTotals t = s->impl.process_events(io::parse_events(text));
        if (events) *events = t.events;
        if (drops) *drops = t.drops;
        return FLOWCEPT_OK;
    });
}

int flowcept_query_stats(flowcept_session* s, const char* query_label, uint64_t* packets,
                         uint64_t* bytes, uint32_t* counters_touched) {
    return guarded(s, [&] {
        require(query_label, ErrorKind::constraint, "null query label");
        QueryStats st = s->impl.stats_for(query_label);
        if (packets) *packets = st.packets;
        if (bytes) *bytes = st.bytes;
        if (counters_touched) *counters_touched = st.counters_touched;
        return FLOWCEPT_OK;
    });
}

int flowcept_query_stats_csv(flowcept_session* s, char** csv) {
    return guarded(s, [&] {
        require(csv, ErrorKind::constraint, "null output");
        *csv = dup_string(s->impl.stats_csv());
        return FLOWCEPT_OK;
    });
}

int flowcept_answer_query(flowcept_session* s, const char* query_label, char** flows_json) {
    return guarded(s, [&] {
        require(query_label, ErrorKind::constraint, "null query label");
        require(flows_json, ErrorKind::constraint, "null output");
        nlohmann::json arr = s->impl.answer(query_label);
        *flows_json = dup_string(arr.dump() + "\n");
        return FLOWCEPT_OK;
    });
}

int flowcept_dump(flowcept_session* s, const char* what, char** out) {
    return guarded(s, [&] {
        require(what, ErrorKind::constraint, "null dump kind");
        require(out, ErrorKind::constraint, "null output");
        *out = dup_string(s->impl.dump(what));
        return FLOWCEPT_OK;
    });
}

int flowcept_verify(flowcept_session* s, char** report) {
    return guarded(s, [&] {
        std::vector<CheckResult> results = s->impl.verify();
        if (report) *report = dup_string(format_report(results));
        return all_ok(results) ? FLOWCEPT_OK : FLOWCEPT_E_VERIFY;
    });
}

int flowcept_lock_state(flowcept_session* s, const char* dir) {
    return guarded(s, [&] {
        require(dir, ErrorKind::constraint, "null directory");
        s->impl.lock_state_dir(dir);
        return FLOWCEPT_OK;
    });
}

int flowcept_unlock_state(flowcept_session* s) {
    return guarded(s, [&] {
        s->impl.unlock_state_dir();
        return FLOWCEPT_OK;
    });
}

int flowcept_save_state(flowcept_session* s, const char* dir) {
    return guarded(s, [&] {
        require(dir, ErrorKind::constraint, "null directory");
        s->impl.save_state(dir);
        return FLOWCEPT_OK;
    });
}

int flowcept_load_state(flowcept_session* s, const char* dir) {
    return guarded(s, [&] {
        require(dir, ErrorKind::constraint, "null directory");
        s->impl.load_state(dir);
        return FLOWCEPT_OK;
    });
}

int flowcept_bench_default_spec(char** spec_json) {
    if (!spec_json) return FLOWCEPT_E_ARGUMENT;
    *spec_json = dup_string(bench::BenchSpec::default_spec().to_json());
    return FLOWCEPT_OK;
}

int flowcept_bench_generate(const char* spec_json, int64_t seed_override, char** context_csv,
                            char** queries_json, char** err) {
    if (err) *err = nullptr;
    try {
        require(spec_json, ErrorKind::constraint, "null spec");
        bench::BenchSpec spec = bench::BenchSpec::from_json(spec_json);
        if (seed_override >= 0) spec.seed = uint64_t(seed_override);
        bench::BenchOutput out = bench::generate(spec);
        if (context_csv) *context_csv = dup_string(io::save_context_csv(out.ctx));
        if (queries_json) *queries_json = dup_string(io::save_query_specs_json(out.queries));
        return FLOWCEPT_OK;
    } catch (const Error& e) {
        if (err) *err = dup_string(e.what());
        return code_of(e.kind());
    } catch (const std::exception& e) {
        if (err) *err = dup_string(e.what());
        return FLOWCEPT_E_INTERNAL;
    }
}

int flowcept_bench_sweep(const char* spec_json, const double* wildcard_pcts, size_t num_pcts,
                         char** csv, char** err) {
    if (err) *err = nullptr;
    try {
        require(spec_json, ErrorKind::constraint, "null spec");
        require(wildcard_pcts || num_pcts == 0, ErrorKind::constraint, "null sweep list");
        bench::BenchSpec spec = bench::BenchSpec::from_json(spec_json);
        std::vector<double> pcts(wildcard_pcts, wildcard_pcts + num_pcts);
        if (csv) *csv = dup_string(bench::sweep_csv(spec, pcts));
        return FLOWCEPT_OK;
    } catch (const Error& e) {
        if (err) *err = dup_string(e.what());
        return code_of(e.kind());
    } catch (const std::exception& e) {
        if (err) *err = dup_string(e.what());
        return FLOWCEPT_E_INTERNAL;
    }
}

} // extern "C"

#pragma once

// Text formats: context CSV/JSON, query JSON, packet-event streams, and the
// JSON/CSV/DOT renderings of built structures. Parsers throw Error with the
// offending line number in the message.

#include <cstdint>
#include <string>
#include <vector>

#include "flowcept/context.hpp"
#include "flowcept/engine.hpp"
#include "flowcept/lattice.hpp"
#include "flowcept/measurement.hpp"

namespace flowcept::io {

// ---- context ----
// CSV: header "flow,<label>,<label>,..."; data rows "<name>,0/1,0/1,...".
FormalContext load_context_csv(const std::string& text);
std::string save_context_csv(const FormalContext& ctx);
// JSON: {"matchfields":[{"label":...,"field_kind":...}],
//        "flows":[{"name":...,"matchfields":[labels...]}]}
FormalContext load_context_json(const std::string& text);
std::string save_context_json(const FormalContext& ctx);

// ---- queries ----
// JSON: {"queries":[{"label":...,"matchfields":[labels...]}]}
std::vector<QuerySpec> load_query_specs_json(const std::string& text);
std::string save_query_specs_json(const std::vector<QuerySpec>& specs);

// ---- packet events ----
// One event per line: "tick,flow_name,bytes". Blank lines and lines starting
// with '#' are skipped.
struct RawEvent {
    uint64_t tick = 0;
    std::string flow;
    uint64_t bytes = 0;
};
std::vector<RawEvent> parse_events(const std::string& text);
std::string format_events(const std::vector<RawEvent>& events);

// ---- renderings ----
std::string lattice_to_json(const FormalContext& ctx, const ConceptLattice& lat);
std::string support_to_json(const FormalContext& ctx, const ConceptLattice& lat,
                            const MeasurementSupport& sup, const QuerySet& queries);
std::string partition_to_csv(const FormalContext& ctx, const MeasurementSupport& sup);
// Hasse diagram, edges child -> parent, reduced labels (each node shows only
// the matchfields/flows not already shown above/below it).
std::string lattice_to_dot(const FormalContext& ctx, const ConceptLattice& lat,
                           const MeasurementSupport* sup = nullptr);

// Query-membership vector renderings; bit of query 0 is the most significant.
std::string vector_bits(const Bitset& v, size_t num_queries);
std::string vector_hex(const Bitset& v, size_t num_queries);

} // namespace flowcept::io

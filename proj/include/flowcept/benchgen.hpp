#pragma once

// Synthetic flow-entry and query generation from configurable per-field value
// distributions, plus the counter-count sweep used for trend plots.
//
// Determinism: all draws come from std::mt19937_64 (bit-exact across
// platforms) through two fixed mappings — next_unit() = (x >> 11) * 2^-53 for
// probabilities and x % n for index picks — so (spec, seed) fully determines
// every output byte on every platform.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowcept/context.hpp"
#include "flowcept/measurement.hpp"

namespace flowcept::bench {

struct ValueProb {
    std::string label; // value only; the matchfield label is "<field_kind>=<label>"
    double p = 0.0;
};

struct FieldSpec {
    std::string field_kind;
    std::vector<ValueProb> values;
    // probability mass not covered by `values` is spread uniformly over
    // synthetic tail values "tail00".."tailNN"
    std::optional<uint32_t> tail_values;   // override of BenchSpec.tail_values
    std::optional<double> wildcard_pct;    // override of BenchSpec.wildcard_pct
};

struct BenchSpec {
    uint32_t num_flows = 0;
    uint32_t num_queries = 0;
    double wildcard_pct = 0.5;
    uint64_t seed = 1;
    uint32_t tail_values = 16;
    std::vector<FieldSpec> fields;

    static BenchSpec from_json(const std::string& text);
    std::string to_json() const;
    // 12 OpenFlow-style fields with packet-trace value distributions
    static BenchSpec default_spec();
    void validate() const;
};

struct BenchOutput {
    FormalContext ctx;
    std::vector<QuerySpec> queries;
};

// Flow entries only: one value per field, drawn from its distribution;
// duplicate draws are redrawn within a budget of 100*num_flows.
// The matchfield set of the context is the full atom table (all heads and
// tails of every field) regardless of which atoms the draws hit.
FormalContext gen_flows(const BenchSpec& spec, uint64_t seed);

// Queries sampled from existing entries: each query copies a random flow and
// independently wildcards (drops) each field with its wildcard probability.
// Fully-wildcarded draws are redrawn; as a last resort one surviving field is
// forced, so every query covers at least its source entry.
std::vector<QuerySpec> gen_queries(const BenchSpec& spec, const FormalContext& ctx,
                                   uint64_t seed);

// Both halves with the spec's own seed (flows use seed, queries use seed+1).
BenchOutput generate(const BenchSpec& spec);

// One full build per wildcard percentage; returns CSV
// "wildcard_pct,num_queries,num_flows,num_counters". Per-field wildcard
// overrides are ignored during a sweep so the swept value applies everywhere.
std::string sweep_csv(const BenchSpec& spec, const std::vector<double>& wildcard_pcts);

} // namespace flowcept::bench

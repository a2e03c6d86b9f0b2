#pragma once

// Cross-checks of a built measurement structure against the brute-force
// reference implementations and against its own definitions. Each check is
// named so failures localize; a check that would be too expensive at the
// current scale reports ok with a "skipped" note instead of running.

#include <string>
#include <vector>

#include "flowcept/context.hpp"
#include "flowcept/engine.hpp"
#include "flowcept/lattice.hpp"
#include "flowcept/measurement.hpp"

namespace flowcept {

struct CheckResult {
    std::string name;
    bool ok = false;
    std::string message; // failure reason or skip note
};

struct VerifyLimits {
    size_t cover_check_max_concepts = 4000;   // quadratic Hasse audit
    size_t oracle_max_concepts = 50000;       // closed-set enumeration cross-check
    size_t meet_pairs = 4000;                 // sampled meet-closure probes
};

// Runs every check that applies; store may be null (no counters installed).
std::vector<CheckResult> verify_all(const FormalContext& ctx, const ConceptLattice& lat,
                                    const QuerySet& queries,
                                    const std::vector<QuerySpec>& specs,
                                    const MeasurementSupport& sup, const CounterStore* store,
                                    const VerifyLimits& limits = {});

bool all_ok(const std::vector<CheckResult>& results);
std::string format_report(const std::vector<CheckResult>& results);

} // namespace flowcept

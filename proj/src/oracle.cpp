#include "flowcept/oracle.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "flowcept/errors.hpp"

namespace flowcept::oracle {

namespace {

IdSet row_of(const FormalContext& ctx, uint32_t flow_id) {
    IdSet out;
    const FlowEntry& f = ctx.flow(flow_id);
    for (uint32_t m = 0; m < ctx.num_matchfields(); ++m)
        if (f.matchfields.test(m)) out.push_back(m);
    return out;
}

IdSet intersect(const IdSet& a, const IdSet& b) {
    IdSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool contains_all(const IdSet& hay, const IdSet& needles) {
    return std::includes(hay.begin(), hay.end(), needles.begin(), needles.end());
}

IdSet resolve_spec(const FormalContext& ctx, const QuerySpec& spec) {
    IdSet out;
    for (const std::string& label : spec.matchfields) {
        int64_t id = ctx.find_matchfield(label);
        require(id >= 0, ErrorKind::not_found, "unknown matchfield in query: " + label);
        out.push_back(static_cast<uint32_t>(id));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace

std::vector<IdSet> enumerate_intents(const FormalContext& ctx, size_t max_size) {
    std::set<IdSet> family;
    IdSet full;
    for (uint32_t m = 0; m < ctx.num_matchfields(); ++m) full.push_back(m);
    family.insert(full); // intersection of the empty flow set

    std::vector<IdSet> pending;
    for (uint32_t f = 0; f < ctx.num_flows(); ++f) {
        IdSet r = row_of(ctx, f);
        if (family.insert(r).second) pending.push_back(std::move(r));
    }
    while (!pending.empty()) {
        IdSet cur = std::move(pending.back());
        pending.pop_back();
        // intersect against a snapshot; anything new goes back on the worklist
        std::vector<IdSet> snapshot(family.begin(), family.end());
        for (const IdSet& other : snapshot) {
            IdSet meet = intersect(cur, other);
            if (family.insert(meet).second) {
                require(family.size() <= max_size, ErrorKind::state,
                        "closed-set family exceeds size guard");
                pending.push_back(std::move(meet));
            }
        }
    }
    return {family.begin(), family.end()};
}

std::vector<IdSet> enumerate_intents_powerset(const FormalContext& ctx) {
    require(ctx.num_flows() <= 20, ErrorKind::constraint,
            "power-set enumeration only runs for 20 flows or fewer");
    std::vector<IdSet> rows;
    for (uint32_t f = 0; f < ctx.num_flows(); ++f) rows.push_back(row_of(ctx, f));
    IdSet full;
    for (uint32_t m = 0; m < ctx.num_matchfields(); ++m) full.push_back(m);

    std::set<IdSet> family;
    uint64_t subsets = 1ull << ctx.num_flows();
    for (uint64_t mask = 0; mask < subsets; ++mask) {
        IdSet intent = full;
        for (uint32_t f = 0; f < ctx.num_flows(); ++f)
            if (mask & (1ull << f)) intent = intersect(intent, rows[f]);
        family.insert(std::move(intent));
    }
    return {family.begin(), family.end()};
}

std::vector<std::string> signatures(const FormalContext& ctx, const std::vector<QuerySpec>& specs) {
    std::vector<IdSet> qsets;
    qsets.reserve(specs.size());
    for (const QuerySpec& s : specs) qsets.push_back(resolve_spec(ctx, s));

    std::vector<std::string> sigs;
    sigs.reserve(ctx.num_flows());
    for (uint32_t f = 0; f < ctx.num_flows(); ++f) {
        IdSet row = row_of(ctx, f);
        std::string sig(qsets.size(), '0');
        for (size_t q = 0; q < qsets.size(); ++q)
            if (contains_all(row, qsets[q])) sig[q] = '1';
        sigs.push_back(std::move(sig));
    }
    return sigs;
}

std::vector<std::vector<std::string>> minimal_partition(const FormalContext& ctx,
                                                        const std::vector<QuerySpec>& specs) {
    std::vector<std::string> sigs = signatures(ctx, specs);
    std::map<std::string, std::vector<std::string>> cells; // signature -> names
    std::map<std::string, uint32_t> first_seen;
    for (uint32_t f = 0; f < ctx.num_flows(); ++f) {
        if (sigs[f].find('1') == std::string::npos) continue;
        if (!cells.count(sigs[f])) first_seen[sigs[f]] = f;
        cells[sigs[f]].push_back(ctx.flow(f).name);
    }
    std::vector<std::pair<uint32_t, std::vector<std::string>>> ordered;
    for (auto& [sig, names] : cells) ordered.emplace_back(first_seen[sig], std::move(names));
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::vector<std::string>> out;
    out.reserve(ordered.size());
    for (auto& [_, names] : ordered) out.push_back(std::move(names));
    return out;
}

size_t minimal_counter_count(const FormalContext& ctx, const std::vector<QuerySpec>& specs) {
    return minimal_partition(ctx, specs).size();
}

std::vector<std::string> answer_direct(const FormalContext& ctx, const QuerySpec& spec) {
    IdSet want = resolve_spec(ctx, spec);
    std::vector<std::string> out;
    for (uint32_t f = 0; f < ctx.num_flows(); ++f)
        if (contains_all(row_of(ctx, f), want)) out.push_back(ctx.flow(f).name);
    return out;
}

} // namespace flowcept::oracle

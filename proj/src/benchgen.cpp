#include "flowcept/benchgen.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "flowcept/errors.hpp"
#include "flowcept/lattice.hpp"

namespace flowcept::bench {

using nlohmann::json;

namespace {

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(uint64_t seed) : eng(seed) {}
    double next_unit() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
    uint64_t next_below(uint64_t n) { return eng() % n; } // deliberate plain modulo
};

struct AtomTable {
    // per field: atom matchfield ids and cumulative probabilities
    struct Field {
        std::vector<uint32_t> atom_ids;
        std::vector<double> cumulative;
    };
    std::vector<Field> fields;
};

std::string tail_label(uint32_t i) {
    std::string n = std::to_string(i);
    if (n.size() < 2) n = "0" + n;
    return "tail" + n;
}

// registers every head and tail value of every field as a matchfield
AtomTable build_atoms(const BenchSpec& spec, FormalContext& ctx) {
    AtomTable table;
    for (const FieldSpec& fs : spec.fields) {
        AtomTable::Field field;
        double mass = 0.0;
        for (const ValueProb& vp : fs.values) {
            field.atom_ids.push_back(ctx.add_matchfield(fs.field_kind + "=" + vp.label,
                                                        fs.field_kind));
            mass += vp.p;
            field.cumulative.push_back(mass);
        }
        double remainder = 1.0 - mass;
        uint32_t tails = fs.tail_values.value_or(spec.tail_values);
        if (remainder > 1e-9 && tails > 0) {
            for (uint32_t t = 0; t < tails; ++t) {
                field.atom_ids.push_back(ctx.add_matchfield(
                    fs.field_kind + "=" + tail_label(t), fs.field_kind));
                mass += remainder / tails;
                field.cumulative.push_back(mass);
            }
        }
        if (!field.cumulative.empty()) field.cumulative.back() = 1.0;
        table.fields.push_back(std::move(field));
    }
    return table;
}

uint32_t draw_atom(const AtomTable::Field& field, Rng& rng) {
    double r = rng.next_unit();
    for (size_t i = 0; i < field.cumulative.size(); ++i)
        if (r < field.cumulative[i]) return field.atom_ids[i];
    return field.atom_ids.back();
}

} // namespace

void BenchSpec::validate() const {
    require(!fields.empty(), ErrorKind::constraint, "bench spec has no fields");
    require(wildcard_pct >= 0.0 && wildcard_pct <= 1.0, ErrorKind::constraint,
            "wildcard_pct must be in [0,1]");
    for (const FieldSpec& fs : fields) {
        require(!fs.field_kind.empty(), ErrorKind::constraint, "field_kind must be non-empty");
        double mass = 0.0;
        std::unordered_set<std::string> seen;
        for (const ValueProb& vp : fs.values) {
            require(vp.p >= 0.0, ErrorKind::constraint,
                    "negative probability for " + fs.field_kind + "=" + vp.label);
            require(seen.insert(vp.label).second, ErrorKind::constraint,
                    "duplicate value label " + fs.field_kind + "=" + vp.label);
            mass += vp.p;
        }
        require(mass <= 1.0 + 1e-9, ErrorKind::constraint,
                "probabilities for " + fs.field_kind + " sum to more than 1");
        if (fs.wildcard_pct)
            require(*fs.wildcard_pct >= 0.0 && *fs.wildcard_pct <= 1.0, ErrorKind::constraint,
                    "per-field wildcard_pct must be in [0,1]");
        double remainder = 1.0 - mass;
        uint32_t tails = fs.tail_values.value_or(tail_values);
        require(remainder <= 1e-9 || tails > 0, ErrorKind::constraint,
                "field " + fs.field_kind + " leaves probability mass but has no tail values");
    }
}

BenchSpec BenchSpec::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    require(!j.is_discarded(), ErrorKind::parse, "invalid JSON in bench spec");
    require(j.is_object(), ErrorKind::parse, "bench spec must be a JSON object");
    BenchSpec spec;
    spec.num_flows = j.value("num_flows", 0u);
    spec.num_queries = j.value("num_queries", 0u);
    spec.wildcard_pct = j.value("wildcard_pct", 0.5);
    spec.seed = j.value("seed", uint64_t{1});
    spec.tail_values = j.value("tail_values", 16u);
    require(j.contains("fields") && j["fields"].is_array(), ErrorKind::parse,
            "bench spec needs a 'fields' array");
    for (const json& jf : j["fields"]) {
        FieldSpec fs;
        require(jf.is_object() && jf.contains("field_kind"), ErrorKind::parse,
                "field entry needs 'field_kind'");
        fs.field_kind = jf["field_kind"].get<std::string>();
        for (const json& jv : jf.value("values", json::array())) {
            require(jv.is_object() && jv.contains("label") && jv.contains("p"),
                    ErrorKind::parse, "value entry needs 'label' and 'p'");
            fs.values.push_back({jv["label"].get<std::string>(), jv["p"].get<double>()});
        }
        if (jf.contains("tail_values")) fs.tail_values = jf["tail_values"].get<uint32_t>();
        if (jf.contains("wildcard_pct")) fs.wildcard_pct = jf["wildcard_pct"].get<double>();
        spec.fields.push_back(std::move(fs));
    }
    spec.validate();
    return spec;
}

std::string BenchSpec::to_json() const {
    json j;
    j["num_flows"] = num_flows;
    j["num_queries"] = num_queries;
    j["wildcard_pct"] = wildcard_pct;
    j["seed"] = seed;
    j["tail_values"] = tail_values;
    j["fields"] = json::array();
    for (const FieldSpec& fs : fields) {
        json jf;
        jf["field_kind"] = fs.field_kind;
        jf["values"] = json::array();
        for (const ValueProb& vp : fs.values)
            jf["values"].push_back({{"label", vp.label}, {"p", vp.p}});
        if (fs.tail_values) jf["tail_values"] = *fs.tail_values;
        if (fs.wildcard_pct) jf["wildcard_pct"] = *fs.wildcard_pct;
        j["fields"].push_back(std::move(jf));
    }
    return j.dump(2) + "\n";
}

BenchSpec BenchSpec::default_spec() {
    // 12 OpenFlow-style fields; head values follow observed packet-trace
    // densities, the rest of each field's mass goes to uniform tails
    BenchSpec spec;
    spec.num_flows = 100;
    spec.num_queries = 20;
    spec.wildcard_pct = 0.5;
    spec.seed = 1;
    spec.tail_values = 16;
    spec.fields = {
        {"ingress_port", {{"1", 0.30}, {"2", 0.28}, {"3", 0.22}}, {}, {}},
        {"mac_src", {{"00:40:05", 0.39}, {"08:00:07", 0.13}, {"00:60:08", 0.19}}, {}, {}},
        {"mac_dst", {{"00:60:08", 0.33}, {"ff:ff:ff", 0.37}, {"00:40:05", 0.19}}, {}, {}},
        {"ethertype", {{"0x8100", 0.98}}, {}, {}},
        {"vlan_id", {{"32", 0.56}, {"104", 0.17}, {"108", 0.04}, {"6", 0.06}}, {}, {}},
        {"vlan_pcp", {{"0", 0.85}, {"5", 0.08}}, {}, {}},
        {"ipv4_src", {{"10/8", 0.31}, {"132.208.130/32", 0.22}, {"192.168/16", 0.14}}, {}, {}},
        {"ipv4_dst", {{"10/8", 0.36}, {"172.16/12", 0.18}, {"132.208.130/32", 0.09}}, {}, {}},
        {"ip_proto", {{"0x06", 0.80}, {"0x11", 0.06}, {"0x01", 0.13}}, {}, {}},
        {"ip_tos", {{"0", 0.96}, {"192", 0.03}}, {}, {}},
        {"l4_src", {{"2212", 0.41}, {"1815", 0.26}, {"2388", 0.11}, {"8", 0.04}}, {}, {}},
        {"l4_dst", {{"1815", 0.53}, {"2212", 0.18}, {"2388", 0.08}, {"3314", 0.04}}, {}, {}},
    };
    return spec;
}

FormalContext gen_flows(const BenchSpec& spec, uint64_t seed) {
    spec.validate();
    FormalContext ctx;
    AtomTable table = build_atoms(spec, ctx);
    Rng rng(seed);

    std::unordered_set<Bitset> seen;
    uint64_t budget = 100ull * spec.num_flows;
    uint32_t made = 0;
    while (made < spec.num_flows) {
        Bitset bits;
        for (const auto& field : table.fields)
            if (!field.atom_ids.empty()) bits.set(draw_atom(field, rng));
        if (seen.count(bits)) {
            require(budget-- > 0, ErrorKind::constraint,
                    "cannot draw " + std::to_string(spec.num_flows) +
                        " distinct flow entries within the retry budget");
            continue;
        }
        // one atom per field means no distinct pair can be subset-related,
        // so the duplicate check is the only collision to resolve
        seen.insert(bits);
        ctx.add_flow("f" + std::to_string(made), bits);
        ++made;
    }
    return ctx;
}

std::vector<QuerySpec> gen_queries(const BenchSpec& spec, const FormalContext& ctx,
                                   uint64_t seed) {
    spec.validate();
    require(ctx.num_flows() > 0 || spec.num_queries == 0, ErrorKind::constraint,
            "cannot generate queries for an empty context");
    Rng rng(seed);

    // flows carry one atom per field; recover that structure from field_kind
    std::vector<std::vector<uint32_t>> flow_atoms(ctx.num_flows());
    std::vector<size_t> atom_field(ctx.num_matchfields());
    std::vector<double> field_wc;
    {
        std::vector<std::string> kinds;
        for (uint32_t m = 0; m < ctx.num_matchfields(); ++m) {
            const std::string& kind = ctx.matchfield(m).field_kind;
            auto it = std::find(kinds.begin(), kinds.end(), kind);
            if (it == kinds.end()) {
                kinds.push_back(kind);
                it = kinds.end() - 1;
            }
            atom_field[m] = static_cast<size_t>(it - kinds.begin());
        }
        field_wc.assign(kinds.size(), spec.wildcard_pct);
        for (const FieldSpec& fs : spec.fields) {
            if (!fs.wildcard_pct) continue;
            auto it = std::find(kinds.begin(), kinds.end(), fs.field_kind);
            if (it != kinds.end()) field_wc[static_cast<size_t>(it - kinds.begin())] =
                *fs.wildcard_pct;
        }
        for (uint32_t f = 0; f < ctx.num_flows(); ++f)
            ctx.flow(f).matchfields.for_each(
                [&](uint32_t m) { flow_atoms[f].push_back(m); });
    }

    std::vector<QuerySpec> out;
    for (uint32_t k = 0; k < spec.num_queries; ++k) {
        std::vector<uint32_t> kept;
        for (int attempt = 0; attempt < 100 && kept.empty(); ++attempt) {
            uint32_t f = static_cast<uint32_t>(rng.next_below(ctx.num_flows()));
            kept.clear();
            for (uint32_t m : flow_atoms[f])
                if (rng.next_unit() >= field_wc[atom_field[m]]) kept.push_back(m);
            if (kept.empty() && attempt == 99) {
                // force one field so the query stays satisfiable
                kept.push_back(
                    flow_atoms[f][rng.next_below(flow_atoms[f].size())]);
            }
        }
        QuerySpec q;
        q.label = "q" + std::to_string(k);
        for (uint32_t m : kept) q.matchfields.push_back(ctx.matchfield(m).label);
        out.push_back(std::move(q));
    }
    return out;
}

BenchOutput generate(const BenchSpec& spec) {
    BenchOutput out;
    out.ctx = gen_flows(spec, spec.seed);
    out.queries = gen_queries(spec, out.ctx, spec.seed + 1);
    return out;
}

std::string sweep_csv(const BenchSpec& spec, const std::vector<double>& wildcard_pcts) {
    std::ostringstream out;
    out << "wildcard_pct,num_queries,num_flows,num_counters\n";
    for (double pct : wildcard_pcts) {
        require(pct >= 0.0 && pct <= 1.0, ErrorKind::constraint,
                "sweep wildcard_pct must be in [0,1]");
        BenchSpec point = spec;
        point.wildcard_pct = pct;
        for (FieldSpec& fs : point.fields) fs.wildcard_pct.reset();
        BenchOutput gen = generate(point);
        ConceptLattice lat = ConceptLattice::build(gen.ctx);
        QuerySet queries = build_queries(gen.ctx, gen.queries);
        MeasurementSupport sup = compute_support(lat, queries);
        out << pct << ',' << gen.queries.size() << ',' << gen.ctx.num_flows() << ','
            << sup.grounds.size() << '\n';
    }
    return out.str();
}

} // namespace flowcept::bench

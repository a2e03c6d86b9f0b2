#include "flowcept/io.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include <json.hpp>

#include "flowcept/errors.hpp"

namespace flowcept::io {

using nlohmann::json;

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char ch : text) {
        if (ch == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    if (!cur.empty()) lines.push_back(std::move(cur));
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

uint64_t parse_u64(const std::string& s, size_t line_no, const char* what) {
    uint64_t value = 0;
    std::string t = trim(s);
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    require(ec == std::errc{} && p == t.data() + t.size(), ErrorKind::parse,
            "line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    return value;
}

json parse_json(const std::string& text, const char* what) {
    json j = json::parse(text, nullptr, false);
    require(!j.is_discarded(), ErrorKind::parse, std::string("invalid JSON in ") + what);
    return j;
}

} // namespace

FormalContext load_context_csv(const std::string& text) {
    std::vector<std::string> lines = split_lines(text);
    require(!lines.empty(), ErrorKind::parse, "context CSV is empty");

    std::vector<std::string> header = split_csv(lines[0]);
    require(!header.empty() && trim(header[0]) == "flow", ErrorKind::parse,
            "line 1: context CSV header must start with 'flow'");

    FormalContext ctx;
    for (size_t i = 1; i < header.size(); ++i) {
        std::string label = trim(header[i]);
        require(!label.empty(), ErrorKind::parse,
                "line 1: empty matchfield label in column " + std::to_string(i + 1));
        ctx.add_matchfield(label, derive_field_kind(label));
    }

    for (size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        std::vector<std::string> cells = split_csv(lines[li]);
        require(cells.size() == header.size(), ErrorKind::parse,
                "line " + std::to_string(li + 1) + ": expected " +
                    std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        std::string name = trim(cells[0]);
        Bitset bits;
        for (size_t c = 1; c < cells.size(); ++c) {
            std::string cell = trim(cells[c]);
            if (cell == "1") {
                bits.set(static_cast<uint32_t>(c - 1));
            } else {
                require(cell == "0", ErrorKind::parse,
                        "line " + std::to_string(li + 1) + ": cell must be 0 or 1, got '" +
                            cells[c] + "'");
            }
        }
        try {
            ctx.add_flow(name, bits);
        } catch (const Error& e) {
            fail(e.kind(), "line " + std::to_string(li + 1) + ": " + e.what());
        }
    }
    return ctx;
}

std::string save_context_csv(const FormalContext& ctx) {
    std::ostringstream out;
    out << "flow";
    for (const auto& m : ctx.matchfields()) out << ',' << m.label;
    out << '\n';
    for (const auto& f : ctx.flows()) {
        out << f.name;
        for (uint32_t m = 0; m < ctx.num_matchfields(); ++m)
            out << ',' << (f.matchfields.test(m) ? '1' : '0');
        out << '\n';
    }
    return out.str();
}

FormalContext load_context_json(const std::string& text) {
    json j = parse_json(text, "context");
    require(j.is_object() && j.contains("matchfields") && j.contains("flows"),
            ErrorKind::parse, "context JSON needs 'matchfields' and 'flows'");
    FormalContext ctx;
    for (const json& m : j["matchfields"]) {
        require(m.is_object() && m.contains("label") && m["label"].is_string(),
                ErrorKind::parse, "matchfield entry needs a string 'label'");
        std::string label = m["label"].get<std::string>();
        std::string kind = m.value("field_kind", derive_field_kind(label));
        ctx.add_matchfield(label, kind);
    }
    for (const json& f : j["flows"]) {
        require(f.is_object() && f.contains("name") && f.contains("matchfields"),
                ErrorKind::parse, "flow entry needs 'name' and 'matchfields'");
        Bitset bits;
        for (const json& lbl : f["matchfields"]) {
            require(lbl.is_string(), ErrorKind::parse, "flow matchfields must be strings");
            int64_t id = ctx.find_matchfield(lbl.get<std::string>());
            require(id >= 0, ErrorKind::parse,
                    "flow '" + f["name"].get<std::string>() + "' uses undeclared matchfield '" +
                        lbl.get<std::string>() + "'");
            bits.set(static_cast<uint32_t>(id));
        }
        ctx.add_flow(f["name"].get<std::string>(), bits);
    }
    return ctx;
}

std::string save_context_json(const FormalContext& ctx) {
    json j;
    j["matchfields"] = json::array();
    for (const auto& m : ctx.matchfields())
        j["matchfields"].push_back({{"label", m.label}, {"field_kind", m.field_kind}});
    j["flows"] = json::array();
    for (const auto& f : ctx.flows()) {
        json labels = json::array();
        f.matchfields.for_each([&](uint32_t m) { labels.push_back(ctx.matchfield(m).label); });
        j["flows"].push_back({{"name", f.name}, {"matchfields", std::move(labels)}});
    }
    return j.dump(2) + "\n";
}

std::vector<QuerySpec> load_query_specs_json(const std::string& text) {
    json j = parse_json(text, "queries");
    require(j.is_object() && j.contains("queries") && j["queries"].is_array(),
            ErrorKind::parse, "query JSON needs a 'queries' array");
    std::vector<QuerySpec> out;
    for (const json& q : j["queries"]) {
        require(q.is_object() && q.contains("label") && q.contains("matchfields") &&
                    q["matchfields"].is_array(),
                ErrorKind::parse, "query entry needs 'label' and 'matchfields'");
        QuerySpec spec;
        spec.label = q["label"].get<std::string>();
        for (const json& lbl : q["matchfields"]) {
            require(lbl.is_string(), ErrorKind::parse, "query matchfields must be strings");
            spec.matchfields.push_back(lbl.get<std::string>());
        }
        out.push_back(std::move(spec));
    }
    return out;
}

std::string save_query_specs_json(const std::vector<QuerySpec>& specs) {
    json j;
    j["queries"] = json::array();
    for (const QuerySpec& s : specs)
        j["queries"].push_back({{"label", s.label}, {"matchfields", s.matchfields}});
    return j.dump(2) + "\n";
}

std::vector<RawEvent> parse_events(const std::string& text) {
    std::vector<RawEvent> out;
    std::vector<std::string> lines = split_lines(text);
    for (size_t li = 0; li < lines.size(); ++li) {
        std::string line = trim(lines[li]);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells = split_csv(line);
        require(cells.size() == 3, ErrorKind::parse,
                "line " + std::to_string(li + 1) + ": expected 'tick,flow,bytes'");
        RawEvent ev;
        ev.tick = parse_u64(cells[0], li + 1, "tick");
        ev.flow = trim(cells[1]);
        require(!ev.flow.empty(), ErrorKind::parse,
                "line " + std::to_string(li + 1) + ": empty flow name");
        ev.bytes = parse_u64(cells[2], li + 1, "bytes");
        out.push_back(std::move(ev));
    }
    return out;
}

std::string format_events(const std::vector<RawEvent>& events) {
    std::ostringstream out;
    for (const RawEvent& ev : events) out << ev.tick << ',' << ev.flow << ',' << ev.bytes << '\n';
    return out.str();
}

namespace {

json concept_to_json(const FormalContext& ctx, const Concept& c) {
    json intent = json::array(), extent = json::array();
    c.intent.for_each([&](uint32_t m) { intent.push_back(ctx.matchfield(m).label); });
    c.extent.for_each([&](uint32_t f) { extent.push_back(ctx.flow(f).name); });
    return {{"id", c.id},
            {"intent", std::move(intent)},
            {"extent", std::move(extent)},
            {"parents", c.parents},
            {"children", c.children}};
}

} // namespace

std::string lattice_to_json(const FormalContext& ctx, const ConceptLattice& lat) {
    json j;
    j["num_concepts"] = lat.size();
    j["top"] = lat.top();
    j["bottom"] = lat.bottom();
    j["concepts"] = json::array();
    for (const Concept& c : lat.concepts()) j["concepts"].push_back(concept_to_json(ctx, c));
    return j.dump(2) + "\n";
}

std::string support_to_json(const FormalContext& ctx, const ConceptLattice& lat,
                            const MeasurementSupport& sup, const QuerySet& queries) {
    json j;
    j["num_queries"] = queries.size();
    j["targets"] = json::object();
    j["unsatisfiable"] = json::array();
    for (const Query& q : queries) {
        j["targets"][q.label] = sup.target[q.id];
        if (sup.unsatisfiable[q.id]) j["unsatisfiable"].push_back(q.label);
    }
    std::vector<uint32_t> proj(sup.projections.begin(), sup.projections.end());
    std::sort(proj.begin(), proj.end());
    j["projections"] = proj;
    std::vector<uint32_t> grounds(sup.grounds.begin(), sup.grounds.end());
    std::sort(grounds.begin(), grounds.end());
    j["grounds"] = grounds;
    j["vectors"] = json::object();
    for (uint32_t c = 0; c < lat.size(); ++c)
        j["vectors"][std::to_string(c)] = vector_hex(sup.vectors[c], queries.size());
    j["flow_to_ground"] = json::object();
    for (uint32_t f = 0; f < ctx.num_flows(); ++f)
        j["flow_to_ground"][ctx.flow(f).name] = sup.mu[f];
    return j.dump(2) + "\n";
}

std::string partition_to_csv(const FormalContext& ctx, const MeasurementSupport& sup) {
    std::ostringstream out;
    out << "counter,ground_concept,num_flows,flows\n";
    std::vector<uint32_t> grounds(sup.grounds.begin(), sup.grounds.end());
    std::sort(grounds.begin(), grounds.end());
    for (size_t i = 0; i < grounds.size(); ++i) {
        const std::vector<uint32_t>& cell = sup.grounded.at(grounds[i]);
        out << i << ',' << grounds[i] << ',' << cell.size() << ',';
        for (size_t k = 0; k < cell.size(); ++k) {
            if (k) out << ';';
            out << ctx.flow(cell[k]).name;
        }
        out << '\n';
    }
    return out.str();
}

std::string lattice_to_dot(const FormalContext& ctx, const ConceptLattice& lat,
                           const MeasurementSupport* sup) {
    std::ostringstream out;
    out << "digraph lattice {\n  rankdir=BT;\n  node [shape=box, fontname=\"monospace\"];\n";
    for (const Concept& c : lat.concepts()) {
        // reduced labels: drop matchfields shown by parents and flows shown by children
        Bitset own_intent = c.intent;
        for (uint32_t p : c.parents) own_intent.and_not(lat.concept_at(p).intent);
        Bitset own_extent = c.extent;
        for (uint32_t ch : c.children) own_extent.and_not(lat.concept_at(ch).extent);
        std::ostringstream label;
        label << "c" << c.id;
        if (!own_intent.empty()) {
            label << "\\n+";
            bool first = true;
            own_intent.for_each([&](uint32_t m) {
                if (!first) label << ' ';
                first = false;
                label << ctx.matchfield(m).label;
            });
        }
        if (!own_extent.empty()) {
            label << "\\n*";
            bool first = true;
            own_extent.for_each([&](uint32_t f) {
                if (!first) label << ' ';
                first = false;
                label << ctx.flow(f).name;
            });
        }
        out << "  n" << c.id << " [label=\"" << label.str() << '"';
        if (sup) {
            if (sup->grounds.count(c.id)) out << ", style=filled, fillcolor=lightblue";
            else if (sup->projections.count(c.id)) out << ", style=filled, fillcolor=lightgrey";
        }
        out << "];\n";
    }
    for (const Concept& c : lat.concepts())
        for (uint32_t p : c.parents) out << "  n" << c.id << " -> n" << p << ";\n";
    out << "}\n";
    return out.str();
}

std::string vector_bits(const Bitset& v, size_t num_queries) {
    std::string s(num_queries, '0');
    for (size_t q = 0; q < num_queries; ++q)
        if (v.test(static_cast<uint32_t>(q))) s[q] = '1';
    return s;
}

std::string vector_hex(const Bitset& v, size_t num_queries) {
    if (num_queries == 0) return "0";
    size_t nibbles = (num_queries + 3) / 4;
    std::vector<uint8_t> nib(nibbles, 0);
    // query 0 is the most significant bit of the whole width
    for (size_t q = 0; q < num_queries; ++q) {
        if (!v.test(static_cast<uint32_t>(q))) continue;
        size_t pos = num_queries - 1 - q; // bit position from the LSB
        nib[pos / 4] |= static_cast<uint8_t>(1u << (pos % 4));
    }
    std::string s(nibbles, '0');
    for (size_t i = 0; i < nibbles; ++i) s[nibbles - 1 - i] = "0123456789abcdef"[nib[i]];
    return s;
}

} // namespace flowcept::io

// Command-line front end. Talks to the engine exclusively through the C API
// in flowcept.h; all file reading/writing of user inputs happens here, state
// directories are managed by the library.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowcept.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitInputError = 2;

int exit_code_for(int code) {
    if (code == FLOWCEPT_OK) return kExitOk;
    return code == FLOWCEPT_E_VERIFY ? kExitVerifyFailed : kExitInputError;
}

struct SessionHandle {
    flowcept_session* s = flowcept_session_new();
    ~SessionHandle() { flowcept_session_free(s); }
};

struct OwnedString {
    char* p = nullptr;
    ~OwnedString() { flowcept_string_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

[[noreturn]] void die(const std::string& message, int exit_code) {
    std::cerr << "error: " << message << "\n";
    std::exit(exit_code);
}

void check(flowcept_session* s, int code) {
    if (code != FLOWCEPT_OK) die(flowcept_last_error(s), exit_code_for(code));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) die("cannot read " + path, kExitInputError);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.good()) die("cannot write " + path, kExitInputError);
    out << text;
    out.flush();
    if (!out.good()) die("short write to " + path, kExitInputError);
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void load_context_file(flowcept_session* s, const std::string& path) {
    std::string text = read_file(path);
    if (ends_with(path, ".json"))
        check(s, flowcept_load_context_json(s, text.c_str()));
    else
        check(s, flowcept_load_context_csv(s, text.c_str()));
}

void print_counts(flowcept_session* s) {
    flowcept_counts c{};
    check(s, flowcept_get_counts(s, &c));
    std::cout << "flows=" << c.flows << " matchfields=" << c.matchfields
              << " queries=" << c.queries << " concepts=" << c.concepts
              << " targets=" << c.targets << " projections=" << c.projections
              << " grounds=" << c.grounds << " counters=" << c.counters << "\n";
}

// prints the report and exits non-zero when a check fails
void run_verify(flowcept_session* s) {
    OwnedString report;
    int code = flowcept_verify(s, &report.p);
    std::cout << report.str();
    if (code == FLOWCEPT_OK) return;
    if (code == FLOWCEPT_E_VERIFY) std::exit(kExitVerifyFailed);
    die(flowcept_last_error(s), exit_code_for(code));
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
    std::vector<const char*> out;
    out.reserve(v.size());
    for (const std::string& s : v) out.push_back(s.c_str());
    return out;
}

std::string load_spec_or_default(flowcept_session*, const std::string& spec_path) {
    if (!spec_path.empty()) return read_file(spec_path);
    OwnedString spec;
    if (flowcept_bench_default_spec(&spec.p) != FLOWCEPT_OK)
        die("cannot produce the built-in bench spec", kExitInputError);
    return spec.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lattice-based traffic measurement: minimal counter sets for exact query answers"};
    app.require_subcommand(1);

    // every stateful command resolves the state directory the same way
    auto add_state_option = [](CLI::App* cmd, std::string& dir) {
        cmd->add_option("--state", dir, "state directory")
            ->envname("FLOWCEPT_STATE_DIR")
            ->default_val("flowcept-state");
    };

    // ---- build ----
    std::string b_context, b_queries, b_state, b_mode = "minimal";
    bool b_verify = false;
    CLI::App* build = app.add_subcommand("build", "build lattice + counters from context/query files");
    build->add_option("--context", b_context, "context file (.csv or .json)")->required();
    build->add_option("--queries", b_queries, "query file (.json)")->required();
    add_state_option(build, b_state);
    build->add_option("--mode", b_mode, "counter mode: minimal|baseline");
    build->add_flag("--verify", b_verify, "run all cross-checks after building");
    build->callback([&] {
        SessionHandle h;
        check(h.s, flowcept_lock_state(h.s, b_state.c_str()));
        load_context_file(h.s, b_context);
        check(h.s, flowcept_load_queries_json(h.s, read_file(b_queries).c_str()));
        check(h.s, flowcept_set_mode(h.s, b_mode.c_str()));
        check(h.s, flowcept_build(h.s));
        check(h.s, flowcept_save_state(h.s, b_state.c_str()));
        print_counts(h.s);
        if (b_verify) run_verify(h.s);
    });

    // ---- add-flow ----
    std::string af_state, af_name;
    std::vector<std::string> af_labels;
    bool af_verify = false;
    CLI::App* add_flow = app.add_subcommand("add-flow", "insert one flow incrementally");
    add_flow->add_option("name", af_name, "flow name")->required();
    add_flow->add_option("--matchfields", af_labels, "matchfield labels (comma separated)")
        ->required()
        ->delimiter(',');
    add_state_option(add_flow, af_state);
    add_flow->add_flag("--verify", af_verify, "cross-check against a from-scratch rebuild");
    add_flow->callback([&] {
        SessionHandle h;
        check(h.s, flowcept_lock_state(h.s, af_state.c_str()));
        check(h.s, flowcept_load_state(h.s, af_state.c_str()));
        std::vector<const char*> labels = c_strings(af_labels);
        OwnedString report;
        check(h.s, flowcept_add_flow(h.s, af_name.c_str(), labels.data(), labels.size(),
                                     &report.p));
        check(h.s, flowcept_save_state(h.s, af_state.c_str()));
        std::cout << report.str();
        print_counts(h.s);
        if (af_verify) run_verify(h.s);
    });

    // ---- remove-flow ----
    std::string rf_state, rf_name;
    bool rf_verify = false;
    CLI::App* remove_flow = app.add_subcommand("remove-flow", "remove a flow (rebuilds)");
    remove_flow->add_option("name", rf_name, "flow name")->required();
    add_state_option(remove_flow, rf_state);
    remove_flow->add_flag("--verify", rf_verify, "run all cross-checks afterwards");
    remove_flow->callback([&] {
        SessionHandle h;
        check(h.s, flowcept_lock_state(h.s, rf_state.c_str()));
        check(h.s, flowcept_load_state(h.s, rf_state.c_str()));
        OwnedString report;
        check(h.s, flowcept_remove_flow(h.s, rf_name.c_str(), &report.p));
        check(h.s, flowcept_save_state(h.s, rf_state.c_str()));
        std::cout << report.str();
        print_counts(h.s);
        if (rf_verify) run_verify(h.s);
    });

    // ---- add-query ----
    std::string aq_state, aq_label;
    std::vector<std::string> aq_labels;
    bool aq_verify = false;
    CLI::App* add_query = app.add_subcommand("add-query", "add a query (support recomputed)");
    add_query->add_option("label", aq_label, "query label")->required();
    add_query->add_option("--matchfields", aq_labels, "matchfield labels (comma separated)")
        ->required()
        ->delimiter(',');
    add_state_option(add_query, aq_state);
    add_query->add_flag("--verify", aq_verify, "run all cross-checks afterwards");
    add_query->callback([&] {
        SessionHandle h;
        check(h.s, flowcept_lock_state(h.s, aq_state.c_str()));
        check(h.s, flowcept_load_state(h.s, aq_state.c_str()));
        std::vector<const char*> labels = c_strings(aq_labels);
        OwnedString report;
        check(h.s, flowcept_add_query(h.s, aq_label.c_str(), labels.data(), labels.size(),
                                      &report.p));
        check(h.s, flowcept_save_state(h.s, aq_state.c_str()));
        std::cout << report.str();
        print_counts(h.s);
        if (aq_verify) run_verify(h.s);
    });

    // ---- remove-query ----
    std::string rq_state, rq_label;
    bool rq_verify = false;
    CLI::App* remove_query = app.add_subcommand("remove-query", "drop a query (support recomputed)");
    remove_query->add_option("label", rq_label, "query label")->required();
    add_state_option(remove_query, rq_state);
    remove_query->add_flag("--verify", rq_verify, "run all cross-checks afterwards");
    remove_query->callback([&] {
        SessionHandle h;
        check(h.s, flowcept_lock_state(h.s, rq_state.c_str()));
        check(h.s, flowcept_load_state(h.s, rq_state.c_str()));
        OwnedString report;
        check(h.s, flowcept_remove_query(h.s, rq_label.c_str(), &report.p));
        check(h.s, flowcept_save_state(h.s, rq_state.c_str()));
        std::cout << report.str();
        print_counts(h.s);
        if (rq_verify) run_verify(h.s);
    });

    // ---- simulate ----
    std::string sim_state, sim_events, sim_mode;
    bool sim_verify = false;
    CLI::App* simulate = app.add_subcommand("simulate", "run a packet-event stream through the counters");
    simulate->add_option("--events", sim_events, "event file: lines of tick,flow,bytes")->required();
    simulate->add_option("--mode", sim_mode, "switch counter mode first: minimal|baseline");
    add_state_option(simulate, sim_state);
    simulate->add_flag("--verify", sim_verify, "run all cross-checks afterwards");
    simulate->callback([&] {
        SessionHandle h;
        check(h.s, flowcept_lock_state(h.s, sim_state.c_str()));
        check(h.s, flowcept_load_state(h.s, sim_state.c_str()));
        if (!sim_mode.empty()) check(h.s, flowcept_set_mode(h.s, sim_mode.c_str()));
        uint64_t events = 0, drops = 0;
        check(h.s, flowcept_process_events_text(h.s, read_file(sim_events).c_str(), &events,
                                                &drops));
        OwnedString csv;
        check(h.s, flowcept_query_stats_csv(h.s, &csv.p));
        check(h.s, flowcept_save_state(h.s, sim_state.c_str()));
        write_file(sim_state + "/query_stats.csv", csv.str());
        std::cout << "events=" << events << " drops=" << drops << "\n" << csv.str();
        if (sim_verify) run_verify(h.s);
    });

    // ---- answer ----
    std::string an_state, an_label;
    CLI::App* answer = app.add_subcommand("answer", "print the exact flow set answering a query");
    answer->add_option("label", an_label, "query label")->required();
    add_state_option(answer, an_state);
    answer->callback([&] {
        SessionHandle h;
        check(h.s, flowcept_load_state(h.s, an_state.c_str()));
        OwnedString flows;
        check(h.s, flowcept_answer_query(h.s, an_label.c_str(), &flows.p));
        std::cout << flows.str();
    });

    // ---- dump ----
    std::string du_state, du_what = "support";
    CLI::App* dump = app.add_subcommand("dump", "print a state rendering");
    dump->add_option("what", du_what,
                     "context_csv|context_json|queries|lattice|support|partition|dot|counters|epoch")
        ->required();
    add_state_option(dump, du_state);
    dump->callback([&] {
        SessionHandle h;
        check(h.s, flowcept_load_state(h.s, du_state.c_str()));
        OwnedString out;
        check(h.s, flowcept_dump(h.s, du_what.c_str(), &out.p));
        std::cout << out.str();
    });

    // ---- verify ----
    std::string v_state;
    CLI::App* verify = app.add_subcommand("verify", "cross-check the saved state against references");
    add_state_option(verify, v_state);
    verify->callback([&] {
        SessionHandle h;
        int code = flowcept_load_state(h.s, v_state.c_str());
        if (code != FLOWCEPT_OK) {
            // a state directory that cannot even be reloaded fails verification
            std::cout << "FAIL state-load — " << flowcept_last_error(h.s) << "\n";
            std::exit(kExitVerifyFailed);
        }
        run_verify(h.s);
        std::cout << "OK\n";
    });

    // ---- gen ----
    std::string g_spec, g_out_context = "context.csv", g_out_queries = "queries.json";
    int64_t g_seed = -1;
    bool g_emit_spec = false;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic context + query set");
    gen->add_option("--spec", g_spec, "path to a bench spec JSON file (omit for the built-in default)");
    gen->add_option("--seed", g_seed, "override the spec's seed");
    gen->add_option("--out-context", g_out_context, "output context CSV path");
    gen->add_option("--out-queries", g_out_queries, "output query JSON path");
    gen->add_flag("--emit-spec", g_emit_spec, "print the effective spec instead of generating");
    gen->callback([&] {
        SessionHandle h;
        std::string spec = load_spec_or_default(h.s, g_spec);
        if (g_emit_spec) {
            std::cout << spec;
            return;
        }
        OwnedString ctx_csv, queries_json, err;
        int code = flowcept_bench_generate(spec.c_str(), g_seed, &ctx_csv.p, &queries_json.p,
                                           &err.p);
        if (code != FLOWCEPT_OK) die(err.str(), exit_code_for(code));
        write_file(g_out_context, ctx_csv.str());
        write_file(g_out_queries, queries_json.str());
        std::cout << "wrote " << g_out_context << " and " << g_out_queries << "\n";
    });

    // ---- bench ----
    std::string be_spec, be_sweep, be_out;
    int64_t be_seed = -1;
    bool be_verify = false;
    CLI::App* bench = app.add_subcommand("bench", "generate, build and report counter counts");
    bench->add_option("--spec", be_spec, "path to a bench spec JSON file (omit for the built-in default)");
    bench->add_option("--seed", be_seed, "override the spec's seed");
    bench->add_option("--sweep", be_sweep, "comma-separated wildcard percentages, e.g. 0.1,0.5,0.9");
    bench->add_option("--out", be_out, "write the sweep CSV here instead of stdout");
    bench->add_flag("--verify", be_verify, "run all cross-checks on the built instance");
    bench->callback([&] {
        SessionHandle h;
        std::string spec_text = load_spec_or_default(h.s, be_spec);
        if (!be_sweep.empty()) {
            std::vector<double> pcts;
            std::stringstream ss(be_sweep);
            std::string part;
            while (std::getline(ss, part, ',')) {
                try {
                    pcts.push_back(std::stod(part));
                } catch (...) {
                    die("bad sweep value: " + part, kExitInputError);
                }
            }
            OwnedString csv, err;
            int code = flowcept_bench_sweep(spec_text.c_str(), pcts.data(), pcts.size(),
                                            &csv.p, &err.p);
            if (code != FLOWCEPT_OK) die(err.str(), exit_code_for(code));
            if (be_out.empty())
                std::cout << csv.str();
            else {
                write_file(be_out, csv.str());
                std::cout << "wrote " << be_out << "\n";
            }
            return;
        }
        OwnedString ctx_csv, queries_json, err;
        int code = flowcept_bench_generate(spec_text.c_str(), be_seed, &ctx_csv.p,
                                           &queries_json.p, &err.p);
        if (code != FLOWCEPT_OK) die(err.str(), exit_code_for(code));
        check(h.s, flowcept_load_context_csv(h.s, ctx_csv.p));
        check(h.s, flowcept_load_queries_json(h.s, queries_json.p));
        check(h.s, flowcept_build(h.s));
        print_counts(h.s);
        if (be_verify) run_verify(h.s);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInputError;
    }
    return kExitOk;
}

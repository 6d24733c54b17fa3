#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tangled.hpp"

using nlohmann::json;
using namespace tangled;

namespace {

enum Exit { kOk = 0, kError = 1, kUsage = 2, kRefusal = 3, kStatFail = 4 };

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t seed_or_env(const std::optional<std::uint64_t>& seed) {
    if (seed) return *seed;
    if (const char* env = std::getenv("TANGLED_SEED")) {
        try {
            return std::stoull(env, nullptr, 0);
        } catch (const std::exception&) {
            throw usage_error("TANGLED_SEED is not an unsigned integer");
        }
    }
    throw usage_error("--seed is required (or set TANGLED_SEED)");
}

void check_q(double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw usage_error("--q must lie in [0, 1]");
}

/// Graph source shared by `graph` and `analyze`: --perm, --trace, or --n/--q/--seed.
struct Source {
    std::string perm, trace;
    std::optional<Index> n;
    std::optional<double> q;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App* app) {
        app->add_option("--perm", perm, "permutation, e.g. \"3 5 1 4 6 2\"");
        app->add_option("--trace", trace, "insertion trace, e.g. \"1 2 1 3 2 5\"");
        app->add_option("--n", n, "sample size");
        app->add_option("--q", q, "Mallows parameter");
        app->add_option("--seed", seed, "sampling seed");
    }

    void validate() const {
        const int given = !perm.empty() + !trace.empty() + n.has_value();
        if (given != 1) throw usage_error("give exactly one of --perm, --trace, --n");
        if (!perm.empty() && (q || seed)) throw usage_error("--perm conflicts with --q and --seed");
        if (!trace.empty() && seed) throw usage_error("--trace conflicts with --seed");
        if (n && !q) throw usage_error("--n needs --q");
        if (q) check_q(*q);
    }

    /// The permutation, plus the trace when one is known.
    std::pair<Permutation, std::optional<InsertionTrace>> resolve() const {
        if (!perm.empty()) return {parse_permutation(perm), std::nullopt};
        InsertionTrace t = !trace.empty() ? parse_trace(trace, q.value_or(1.0)) : sample_trace(*n, *q, seed_or_env(seed));
        auto p = mallows_process(t);
        return {std::move(p), std::move(t)};
    }
};

json rational_json(const Rational& r) { return {{"value", r.str()}, {"approx", r.value()}, {"method", "exact-dp"}}; }

json edges_json(const TangledGraph& g) {
    json e = json::array();
    for (const auto& x : g.edges()) e.push_back({x.u, x.v});
    return e;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------

struct SampleCmd {
    std::optional<Index> n;
    std::optional<double> q;
    std::optional<std::uint64_t> seed;
    std::size_t count = 1;
    std::string emit = "both";

    int run() const {
        if (!n || !q) throw usage_error("sample needs --n and --q");
        check_q(*q);
        if (*n < 1) throw usage_error("--n must be >= 1");
        CounterRng rng(seed_or_env(seed));
        for (std::size_t c = 0; c < count; ++c) {
            auto s = sample_mallows(*n, *q, rng);
            if (emit != "perm") std::cout << format_trace(s.trace) << '\n';
            if (emit != "trace") std::cout << format_permutation(s.permutation) << '\n';
        }
        return kOk;
    }
};

struct GraphCmd {
    Source src;
    std::string format = "edges";

    int run() const {
        src.validate();
        auto [p, trace] = src.resolve();
        const auto g = build_tangled(p);
        if (format == "json") {
            print_json({{"n", g.vertex_count()}, {"edges", edges_json(g)}, {"permutation", p.image()}});
        } else {
            std::cout << format_edge_list(g);
        }
        return kOk;
    }
};

struct AnalyzeCmd {
    Source src;
    std::string metrics = "tw,cw,cwid,diam,iso,cuts";

    int run() const {
        src.validate();
        const auto wanted = split_csv(metrics);
        const std::vector<std::string> known{"tw", "cw", "cwid", "diam", "iso", "cuts"};
        for (const auto& m : wanted)
            if (std::find(known.begin(), known.end(), m) == known.end()) throw usage_error("unknown metric '" + m + "'");
        auto has = [&](const char* m) { return std::find(wanted.begin(), wanted.end(), m) != wanted.end(); };

        auto [p, trace] = src.resolve();
        const Index n = p.size();
        if (n > kExactWidthCap && (has("tw") || has("cw") || has("iso"))) {
            throw refusal_error("exact metrics tw, cw, iso are capped at n = " + std::to_string(kExactWidthCap) +
                                " (got n = " + std::to_string(n) + "); use cwid");
        }
        const auto g = build_tangled(p);
        json out{{"n", n}, {"edge_count", g.edge_count()}, {"permutation", p.image()}, {"edges", edges_json(g)}};
        if (trace) {
            out["trace"] = trace->positions;
            out["q"] = trace->q;
            if (trace->seed) out["seed"] = *trace->seed;
        }
        json width = json::object();
        if (has("tw")) width["treewidth"] = {{"value", treewidth_exact(g)}, {"method", "exact-dp"}};
        if (has("cw")) width["cutwidth_exact"] = {{"value", cutwidth_exact(g)}, {"method", "exact-dp"}};
        if (has("cwid")) {
            const auto prof = cutwidth_identity(g);
            width["cutwidth_identity"] = {{"value", prof.width}, {"method", "identity-layout"}, {"profile", prof.profile}};
        }
        if (has("iso") && n >= 2) {
            width["vertex_iso"] = rational_json(vertex_iso(g));
            width["edge_iso"] = rational_json(edge_iso(g));
        }
        if (!width.empty()) out["width"] = width;
        if (has("diam")) out["diameter"] = diameter(g);
        if (has("cuts")) {
            out["cuts"] = articulation_points(g);
            if (trace) out["cuts_from_trace"] = cut_vertices_from_trace(*trace);
        }
        print_json(out);
        return kOk;
    }
};

struct ProbCmd {
    std::string kind;
    std::optional<Index> n, k;
    std::optional<double> q, alpha;
    bool bounds = false;

    int run() const {
        if (!n || !q) throw usage_error("prob needs --n and --q");
        check_q(*q);
        if (kind == "expected") {
            if (k) throw usage_error("prob expected takes --alpha, not --k");
            if (bounds) throw usage_error("--bounds applies to flush and cut");
            if (!alpha) throw usage_error("prob expected needs --alpha");
            print_json({{"n", *n}, {"q", *q}, {"alpha", *alpha}, {"expected_cuts", expected_cuts_fast(*n, *q, *alpha)},
                        {"k_range", separator_k_range(*n, *alpha)}});
            return kOk;
        }
        if (!k) throw usage_error("prob " + kind + " needs --k");
        if (kind == "cut" && !(*k >= 2 && *k + 1 <= *n)) throw usage_error("prob cut needs 2 <= k <= n-1");
        json out{{"n", *n}, {"k", *k}, {"q", *q}, {"flush", flush_prob(*n, *k, *q)},
                 {"reverse_flush", reverse_flush_prob(*n, *k, *q)}};
        if (*k >= 2 && *k + 1 <= *n) {
            const auto c = cut_event_probs(*n, *k, *q);
            out["cut_F"] = c.flush;
            out["cut_R"] = c.reverse;
        } else {
            out["cut_F"] = nullptr;
            out["cut_R"] = nullptr;
        }
        if (bounds) {
            if (!(*q > 0.0 && *q < 1.0)) throw refusal_error("analytic bounds need 0 < q < 1");
            const auto lb = flush_log_bounds(*n, *k, *q);
            json b{{"log_flush", log_flush_prob(*n, *k, *q)},
                   {"log_flush_lower", lb.lower},
                   {"log_flush_upper", lb.upper},
                   {"flush_cheap_upper", flush_cheap_bound(*n, *k, *q)}};
            if (alpha) {
                try {
                    const auto w = cut_prob_window(*n, *k, *q, *alpha, true);
                    b["cut_F_window"] = {{"lower", w.lower ? json(*w.lower) : json(nullptr)}, {"upper", w.upper}, {"relaxed", w.relaxed}};
                } catch (const refusal_error& e) {
                    b["cut_F_window"] = {{"refused", e.what()}};
                }
            }
            out["bounds"] = b;
        } else {
            out["bounds"] = json::object();
        }
        print_json(out);
        return kOk;
    }
};

struct EventsCmd {
    std::string trace;
    double q = 1.0;
    bool local = false;
    std::vector<std::string> sparse;

    int run() const {
        check_q(q);
        const auto t = parse_trace(trace, q);
        EventOptions opt;
        opt.local_flush = local;
        for (const auto& s : sparse) {
            const auto parts = split_csv(s);
            if (parts.size() != 3) throw usage_error("--sparse expects k,b,ell");
            opt.sparse.push_back({static_cast<Index>(std::stoul(parts[0])), static_cast<Index>(std::stoul(parts[1])),
                                  std::stoull(parts[2])});
        }
        const auto r = detect_events(t, opt);
        auto holds = [&](const std::vector<bool>& flags) {
            std::vector<Index> ks;
            for (Index k = 1; k < flags.size(); ++k)
                if (flags[k]) ks.push_back(k);
            return ks;
        };
        json out{{"n", r.n},
                 {"q", r.q},
                 {"flush", holds(r.flush)},
                 {"reverse_flush", holds(r.reverse_flush)},
                 {"cut_F", holds(r.cut_flush)},
                 {"cut_R", holds(r.cut_reverse)},
                 {"cut_set", r.cut_set}};
        if (r.b) out["b"] = *r.b;
        if (r.local_flush) out["local_flush"] = holds(*r.local_flush);
        if (!r.sparse.empty()) {
            json s = json::array();
            for (const auto& [query, ok] : r.sparse) s.push_back({{"k", query.k}, {"b", query.b}, {"ell", query.ell}, {"holds", ok}});
            out["sparse_flush"] = s;
        }
        print_json(out);
        return kOk;
    }
};

struct OracleCmd {
    Index n = 1;
    double q = 1.0;
    std::string event;

    int run() const {
        check_q(q);
        if (n > kMaxEnumerateN) {
            throw refusal_error("oracle enumerate is capped at n = " + std::to_string(kMaxEnumerateN));
        }
        std::optional<Index> flush_k;
        if (!event.empty()) {
            if (event.rfind("flush@", 0) == 0) {
                flush_k = static_cast<Index>(std::stoul(event.substr(6)));
                if (*flush_k < 1 || *flush_k > n) throw usage_error("flush@k needs 1 <= k <= n");
            } else if (event != "cut") {
                throw usage_error("--event must be flush@<k> or cut");
            }
        }
        std::uint64_t count = 0;
        double total = 0.0, hit = 0.0, cuts = 0.0;
        enumerate_traces(n, q, [&](std::span<const Index> v, double w) {
            ++count;
            total += w;
            if (event.empty()) return;
            const auto rep = detect_events(InsertionTrace(std::vector<Index>(v.begin(), v.end()), q));
            if (flush_k) {
                if (rep.flush[*flush_k]) hit += w;
            } else {
                if (!rep.cut_set.empty()) hit += w;
                cuts += w * static_cast<double>(rep.cut_set.size());
            }
        });
        json out{{"n", n}, {"q", q}, {"traces", count}, {"total_weight", total}};
        if (flush_k) {
            out["event"] = event;
            out["probability"] = hit;
            out["closed_form"] = flush_prob(n, *flush_k, q);
        } else if (event == "cut") {
            out["event"] = "cut";
            out["probability"] = hit;
            out["expected_cut_count"] = cuts;
        }
        print_json(out);
        return kOk;
    }
};

struct SweepCmd {
    std::string config, out, json_out, plot;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> set;

    int run() const {
        auto cfg = load_config(config);
        for (const auto& kv : set) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw usage_error("--set expects key=value");
            apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (threads) cfg.threads = *threads;
        if (seed) cfg.master_seed = *seed;
        if (!out.empty()) cfg.output = out;
        if (!plot.empty()) cfg.plot_output = plot;
        cfg.validate();

        const auto result = run_sweep(cfg);
        if (cfg.output.empty()) {
            std::cout << to_csv(result);
        } else {
            write_csv(result, cfg.output);
        }
        if (!json_out.empty()) write_json(result, json_out);
        if (!cfg.plot_output.empty()) write_text_file(cfg.plot_output, to_plot_data(result));

        const auto failed = result.failures();
        if (failed.empty()) return kOk;
        std::cerr << failed.size() << " row(s) outside the 4-stderr band:\n";
        for (const auto* r : failed) {
            std::cerr << "  n=" << r->n << " q=" << r->q << " " << r->stat << " mean=" << r->mean
                      << " ref=" << (r->exact ? *r->exact : r->upper_bound.value_or(0.0)) << '\n';
        }
        return kStatFail;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tangled-path random graphs: sampling, analysis, exact probabilities and sweeps"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    SampleCmd sample;
    auto* s = app.add_subcommand("sample", "sample insertion traces and Mallows permutations");
    s->add_option("--n", sample.n, "size")->required();
    s->add_option("--q", sample.q, "Mallows parameter in [0,1]")->required();
    s->add_option("--seed", sample.seed, "seed (falls back to TANGLED_SEED)");
    s->add_option("--count", sample.count, "number of samples")->check(CLI::PositiveNumber);
    s->add_option("--emit", sample.emit, "trace, perm or both")->check(CLI::IsMember({"trace", "perm", "both"}));

    GraphCmd graph;
    auto* g = app.add_subcommand("graph", "print the tangled graph as an edge list");
    graph.src.add_to(g);
    g->add_option("--format", graph.format, "edges or json")->check(CLI::IsMember({"edges", "json"}));

    AnalyzeCmd analyze;
    auto* a = app.add_subcommand("analyze", "width metrics, diameter and cut vertices as JSON");
    analyze.src.add_to(a);
    a->add_option("--metrics", analyze.metrics, "comma list of tw,cw,cwid,diam,iso,cuts");

    ProbCmd prob;
    auto* p = app.add_subcommand("prob", "exact flush and cut probabilities");
    p->add_option("kind", prob.kind, "flush, cut or expected")->required()->check(CLI::IsMember({"flush", "cut", "expected"}));
    p->add_option("--n", prob.n)->required();
    p->add_option("--k", prob.k);
    p->add_option("--q", prob.q)->required();
    p->add_option("--alpha", prob.alpha);
    p->add_flag("--bounds", prob.bounds, "also print the analytic bounds");

    EventsCmd events;
    auto* e = app.add_subcommand("events", "detect flush-family events on a trace");
    e->add_option("--trace", events.trace)->required();
    e->add_option("--q", events.q);
    e->add_flag("--local", events.local, "also compute local flush L_k");
    e->add_option("--sparse", events.sparse, "k,b,ell query for S(k,b,ell); repeatable");

    OracleCmd oracle;
    auto* o = app.add_subcommand("oracle", "exhaustive enumeration oracles");
    auto* oe = o->add_subcommand("enumerate", "enumerate all traces with their weights");
    o->require_subcommand(1);
    oe->add_option("--n", oracle.n)->required();
    oe->add_option("--q", oracle.q)->required();
    oe->add_option("--event", oracle.event, "flush@<k> or cut");

    SweepCmd sweep;
    auto* w = app.add_subcommand("sweep", "run a Monte Carlo sweep from a config file");
    w->add_option("--config", sweep.config)->required();
    w->add_option("--out", sweep.out, "CSV output path (default stdout)");
    w->add_option("--json", sweep.json_out, "JSON output path");
    w->add_option("--plot", sweep.plot, "gnuplot data output path");
    w->add_option("--threads", sweep.threads);
    w->add_option("--seed", sweep.seed);
    w->add_option("--set", sweep.set, "key=value config override; repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kUsage;
    }

    try {
        if (*s) return sample.run();
        if (*g) return graph.run();
        if (*a) return analyze.run();
        if (*p) return prob.run();
        if (*e) return events.run();
        if (*o) return oracle.run();
        if (*w) return sweep.run();
    } catch (const usage_error& ex) {
        std::cerr << "usage error: " << ex.what() << '\n';
        return kUsage;
    } catch (const tangled::domain_error& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kUsage;
    } catch (const refusal_error& ex) {
        std::cerr << "refused: " << ex.what() << '\n';
        return kRefusal;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kError;
    }
    return kUsage;
}

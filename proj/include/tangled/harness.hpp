#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "tangled/error.hpp"
#include "tangled/events.hpp"
#include "tangled/graph.hpp"
#include "tangled/mallows.hpp"
#include "tangled/rng.hpp"
#include "tangled/version.hpp"
#include "tangled/width.hpp"

namespace tangled {

enum class Experiment { separator, width, diameter, expansion, flush_validate, displacement };

inline const char* experiment_name(Experiment e) {
    switch (e) {
        case Experiment::separator: return "separator";
        case Experiment::width: return "width";
        case Experiment::diameter: return "diameter";
        case Experiment::expansion: return "expansion";
        case Experiment::flush_validate: return "flush-validate";
        case Experiment::displacement: return "displacement";
    }
    return "?";
}

inline Experiment parse_experiment(const std::string& s) {
    for (auto e : {Experiment::separator, Experiment::width, Experiment::diameter, Experiment::expansion,
                   Experiment::flush_validate, Experiment::displacement}) {
        if (s == experiment_name(e)) return e;
    }
    throw domain_error("unknown experiment '" + s + "'");
}

/// A q grid entry: a literal value, or a point of threshold_window(n, margin).
struct QSpec {
    enum class Kind { value, critical, exist, nonexist } kind = Kind::value;
    double value = 0.0;  // the literal q, or the margin

    static QSpec parse(const std::string& raw) {
        std::string s;
        for (char c : raw)
            if (!std::isspace(static_cast<unsigned char>(c))) s += c;
        QSpec out;
        if (s.rfind("critical", 0) == 0) {
            const std::string rest = s.substr(8);
            if (rest.empty()) {
                out.kind = Kind::critical;
                return out;
            }
            detail::require(rest[0] == '-' || rest[0] == '+', "q spec: expected critical, critical-<m> or critical+<m>");
            out.kind = rest[0] == '-' ? Kind::exist : Kind::nonexist;
            out.value = std::stod(rest.substr(1));
            detail::require(out.value >= 0.0, "q spec: margin must be nonnegative");
            return out;
        }
        std::size_t used = 0;
        try {
            out.value = std::stod(s, &used);
        } catch (const std::exception&) {
            throw domain_error("q spec: cannot parse '" + raw + "'");
        }
        detail::require(used == s.size(), "q spec: cannot parse '" + raw + "'");
        detail::require_q(out.value);
        return out;
    }

    double resolve(Index n) const {
        if (kind == Kind::value) return value;
        const auto w = threshold_window(n, kind == Kind::critical ? 0.0 : value);
        return kind == Kind::critical ? w.q_critical : kind == Kind::exist ? w.q_exist : w.q_nonexist;
    }

    std::string str() const {
        char buf[64];
        switch (kind) {
            case Kind::value: std::snprintf(buf, sizeof buf, "%.12g", value); break;
            case Kind::critical: return "critical";
            case Kind::exist: std::snprintf(buf, sizeof buf, "critical-%g", value); break;
            case Kind::nonexist: std::snprintf(buf, sizeof buf, "critical+%g", value); break;
        }
        return buf;
    }
};

/// k for flush validation: an integer or "n/<d>" (also "n").
struct KSpec {
    std::uint64_t value = 1;
    bool relative = false;

    static KSpec parse(const std::string& s) {
        KSpec k;
        if (!s.empty() && s[0] == 'n') {
            k.relative = true;
            k.value = s.size() == 1 ? 1 : 0;
            if (s.size() > 1) {
                detail::require(s[1] == '/', "k spec: expected n/<d>");
                k.value = std::stoull(s.substr(2));
            }
            detail::require(k.value >= 1, "k spec: divisor must be positive");
        } else {
            k.value = std::stoull(s);
            detail::require(k.value >= 1, "k spec: k must be positive");
        }
        return k;
    }

    Index resolve(Index n) const {
        const std::uint64_t k = relative ? std::max<std::uint64_t>(1, n / value) : value;
        detail::require(k <= n, "k spec: k exceeds n");
        return static_cast<Index>(k);
    }

    std::string str() const {
        if (!relative) return std::to_string(value);
        return value == 1 ? "n" : "n/" + std::to_string(value);
    }
};

struct SweepConfig {
    Experiment experiment = Experiment::separator;
    std::vector<Index> n_list;
    std::vector<QSpec> q_grid;
    double alpha = 2.0 / 3.0;
    std::uint64_t trials = 100;
    std::uint64_t master_seed = 0;
    unsigned threads = 0;  // 0: hardware concurrency
    std::string output;
    std::string plot_output;
    bool timing = true;

    std::vector<KSpec> k_list{KSpec{2, true}};  // flush-validate
    bool exhaustive = false;                     // flush-validate, n <= 7
    std::optional<Index> displacement_i;         // default n/2
    std::vector<Index> t_list;                   // displacement thresholds

    void validate() const {
        detail::require(!n_list.empty(), "config: n list is empty");
        detail::require(!q_grid.empty(), "config: q grid is empty");
        detail::require(trials >= 1, "config: trials must be >= 1");
        for (Index n : n_list) detail::require(n >= 1, "config: n must be >= 1");
        if (experiment == Experiment::separator) detail::require(alpha > 0.5 && alpha < 1.0, "config: alpha must lie in (1/2, 1)");
        if (experiment == Experiment::flush_validate) detail::require(!k_list.empty(), "config: k list is empty");
        if (experiment == Experiment::flush_validate && exhaustive) {
            for (Index n : n_list)
                if (n > 7) throw refusal_error("config: exhaustive flush validation needs n <= 7");
        }
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw domain_error("expected a boolean, got '" + v + "'");
}

/// "1..20" or "1,2,5"
inline std::vector<Index> parse_index_list(const std::string& v) {
    std::vector<Index> out;
    for (const auto& tok : split_list(v)) {
        if (auto dots = tok.find(".."); dots != std::string::npos) {
            const auto a = std::stoull(tok.substr(0, dots));
            const auto b = std::stoull(tok.substr(dots + 2));
            require(a <= b, "bad range '" + tok + "'");
            for (auto x = a; x <= b; ++x) out.push_back(static_cast<Index>(x));
        } else {
            out.push_back(static_cast<Index>(std::stoull(tok)));
        }
    }
    return out;
}

inline std::uint64_t parse_u64(const std::string& v) {
    std::size_t used = 0;
    const auto x = std::stoull(v, &used, 0);
    require(used == v.size(), "not an unsigned integer: '" + v + "'");
    return x;
}

}  // namespace detail

/// Applies one key=value setting; unknown keys are errors.
inline void apply_setting(SweepConfig& cfg, const std::string& key_raw, const std::string& value_raw) {
    const std::string key = detail::trim(key_raw);
    const std::string v = detail::trim(value_raw);
    try {
        if (key == "experiment") cfg.experiment = parse_experiment(v);
        else if (key == "n") cfg.n_list = detail::parse_index_list(v);
        else if (key == "q") {
            cfg.q_grid.clear();
            for (const auto& t : detail::split_list(v)) cfg.q_grid.push_back(QSpec::parse(t));
        } else if (key == "alpha") cfg.alpha = std::stod(v);
        else if (key == "trials") cfg.trials = detail::parse_u64(v);
        else if (key == "seed") cfg.master_seed = detail::parse_u64(v);
        else if (key == "threads") cfg.threads = static_cast<unsigned>(detail::parse_u64(v));
        else if (key == "out") cfg.output = v;
        else if (key == "plot") cfg.plot_output = v;
        else if (key == "timing") cfg.timing = detail::parse_bool(v);
        else if (key == "k") {
            cfg.k_list.clear();
            for (const auto& t : detail::split_list(v)) cfg.k_list.push_back(KSpec::parse(t));
        } else if (key == "exhaustive") cfg.exhaustive = detail::parse_bool(v);
        else if (key == "i") cfg.displacement_i = static_cast<Index>(detail::parse_u64(v));
        else if (key == "t") cfg.t_list = detail::parse_index_list(v);
        else throw domain_error("unknown config key '" + key + "'");
    } catch (const domain_error&) {
        throw;
    } catch (const refusal_error&) {
        throw;
    } catch (const std::exception& e) {
        throw domain_error("config key '" + key + "': cannot parse '" + v + "'");
    }
}

/// Flat key=value text (with '#' comments) or a JSON object with the same keys.
/// Returns whether a seed was given.
inline bool parse_config_text(SweepConfig& cfg, const std::string& text) {
    bool seeded = false;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw domain_error(std::string("config JSON: ") + e.what());
        }
        detail::require(j.is_object(), "config JSON must be an object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            std::string v;
            const auto& val = it.value();
            if (val.is_array()) {
                for (const auto& x : val) {
                    if (!v.empty()) v += ',';
                    v += x.is_string() ? x.get<std::string>() : x.dump();
                }
            } else if (val.is_string()) {
                v = val.get<std::string>();
            } else {
                v = val.dump();
            }
            apply_setting(cfg, it.key(), v);
            seeded |= it.key() == "seed";
        }
        return seeded;
    }
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        detail::require(eq != std::string::npos, "config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        apply_setting(cfg, key, line.substr(eq + 1));
        seeded |= key == "seed";
    }
    return seeded;
}

/// Reads a config file. Without a seed in the file, TANGLED_SEED is used if set.
inline SweepConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw domain_error("cannot read config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    SweepConfig cfg;
    const bool seeded = parse_config_text(cfg, buf.str());
    if (!seeded) {
        if (const char* env = std::getenv("TANGLED_SEED")) cfg.master_seed = detail::parse_u64(env);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Results.

struct SweepRow {
    std::string experiment;
    Index n = 0;
    double q = 0.0;
    double alpha = 0.0;
    std::uint64_t trials = 0;
    std::string stat;
    double mean = 0.0;
    std::optional<double> std_error;
    std::optional<double> exact;
    std::optional<double> upper_bound;  // checked as mean <= bound + 4 stderr
    std::optional<double> runtime_ms;
    std::optional<bool> pass;
};

struct SweepResult {
    std::uint64_t master_seed = 0;
    std::string code_version = kVersion;
    std::string rng_name = CounterRng::name;
    SweepConfig config;
    std::vector<SweepRow> rows;

    std::vector<const SweepRow*> failures() const {
        std::vector<const SweepRow*> out;
        for (const auto& r : rows)
            if (r.pass && !*r.pass) out.push_back(&r);
        return out;
    }
};

/// |mean - exact| <= 4 stderr. A zero sample stderr is replaced by the
/// binomial floor sqrt(p(1-p)/trials) at p = exact, so rare events with no
/// hits still pass while a single hit on an impossible event fails.
inline bool within_band(double mean, double std_error, double exact, std::uint64_t trials, double tolerance = 0.0) {
    double band = std_error;
    if (band == 0.0 && trials > 0) {
        const double p = std::clamp(exact, 0.0, 1.0);
        band = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
    }
    return std::abs(mean - exact) <= 4.0 * band + tolerance;
}

namespace detail {

inline std::string fmt_num(double x) {
    if (std::isnan(x)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string fmt_opt(const std::optional<double>& x) { return x ? fmt_num(*x) : std::string(); }

inline double quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    if (v.empty()) return std::nan("");
    const double h = (v.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

}  // namespace detail

inline void sort_rows(std::vector<SweepRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.n != b.n) return a.n < b.n;
        if (a.q != b.q) return a.q < b.q;
        return a.stat < b.stat;
    });
}

inline std::string to_csv(const SweepResult& r) {
    std::string out = "experiment,n,q,alpha,trials,stat,mean,stderr,exact,runtime_ms\n";
    for (const auto& row : r.rows) {
        out += row.experiment + ',' + std::to_string(row.n) + ',' + detail::fmt_num(row.q) + ',' +
               detail::fmt_num(row.alpha) + ',' + std::to_string(row.trials) + ',' + row.stat + ',' +
               detail::fmt_num(row.mean) + ',' + detail::fmt_opt(row.std_error) + ',' + detail::fmt_opt(row.exact) + ',' +
               detail::fmt_opt(row.runtime_ms) + '\n';
    }
    return out;
}

inline nlohmann::json to_json(const SweepResult& r) {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& x) -> json { return x && !std::isnan(*x) ? json(*x) : json(nullptr); };
    json rows = json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"experiment", row.experiment},
                        {"n", row.n},
                        {"q", row.q},
                        {"alpha", row.alpha},
                        {"trials", row.trials},
                        {"stat", row.stat},
                        {"mean", std::isnan(row.mean) ? json(nullptr) : json(row.mean)},
                        {"stderr", opt(row.std_error)},
                        {"exact", opt(row.exact)},
                        {"upper_bound", opt(row.upper_bound)},
                        {"runtime_ms", opt(row.runtime_ms)},
                        {"pass", row.pass ? json(*row.pass) : json(nullptr)}});
    }
    json q = json::array();
    for (const auto& s : r.config.q_grid) q.push_back(s.str());
    return {{"metadata",
             {{"master_seed", r.master_seed},
              {"code_version", r.code_version},
              {"rng", r.rng_name},
              {"experiment", experiment_name(r.config.experiment)},
              {"n", r.config.n_list},
              {"q", q},
              {"alpha", r.config.alpha},
              {"trials", r.config.trials}}},
            {"rows", rows}};
}

/// One gnuplot data block per statistic, separated by two blank lines.
inline std::string to_plot_data(const SweepResult& r) {
    std::map<std::string, std::vector<const SweepRow*>> by_stat;
    for (const auto& row : r.rows) by_stat[row.stat].push_back(&row);
    std::string out;
    for (const auto& [stat, rows] : by_stat) {
        if (!out.empty()) out += "\n\n";
        out += "# " + stat + "\n# n q mean stderr exact\n";
        for (const auto* row : rows) {
            const auto num = [](const std::optional<double>& x) { return x ? detail::fmt_num(*x) : std::string("NaN"); };
            out += std::to_string(row->n) + ' ' + detail::fmt_num(row->q) + ' ' + detail::fmt_num(row->mean) + ' ' +
                   num(row->std_error) + ' ' + num(row->exact) + '\n';
        }
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline void write_csv(const SweepResult& r, const std::string& path) { write_text_file(path, to_csv(r)); }
inline void write_json(const SweepResult& r, const std::string& path) { write_text_file(path, to_json(r).dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Cell evaluation.

namespace detail {

enum class Agg { mean, median, q1, q3, min, max };

struct StatSpec {
    std::string name;
    std::size_t source = 0;  // index into a trial's raw values
    Agg agg = Agg::mean;
    std::optional<double> exact;
    std::optional<double> upper_bound;
    double tolerance = 0.0;

    StatSpec(std::string name_, std::size_t source_, Agg agg_ = Agg::mean, std::optional<double> exact_ = std::nullopt)
        : name(std::move(name_)), source(source_), agg(agg_), exact(exact_) {}
};

using TrialFn = std::function<std::vector<double>(CounterRng&)>;

/// Runs `trials` independent trials on a worker pool. Trial t draws from
/// derive_seed(master, cell, t) and its values land in slot t, so the result
/// does not depend on the thread count.
inline std::vector<std::vector<double>> run_trials(const TrialFn& fn, std::uint64_t trials, std::uint64_t master,
                                                   std::uint64_t cell, unsigned threads, const std::string& context) {
    std::vector<std::vector<double>> out(trials);
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::uint64_t failed_trial = 0;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const std::uint64_t t = next.fetch_add(1);
            if (t >= trials) return;
            try {
                CounterRng rng(derive_seed(master, cell, t));
                out[t] = fn(rng);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure || t < failed_trial) {
                    failure = std::current_exception();
                    failed_trial = t;
                }
                next = trials;
                return;
            }
        }
    };
    unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, trials));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) {
        try {
            std::rethrow_exception(failure);
        } catch (const std::exception& e) {
            throw std::runtime_error(context + ", trial " + std::to_string(failed_trial) + ": " + e.what());
        }
    }
    return out;
}

inline void aggregate_cell(std::vector<SweepRow>& rows, const SweepConfig& cfg, Index n, double q,
                           const std::vector<std::vector<double>>& raw, const std::vector<StatSpec>& stats,
                           double runtime_ms) {
    const std::uint64_t trials = raw.size();
    for (const auto& s : stats) {
        std::vector<double> v;
        v.reserve(trials);
        for (const auto& trial : raw) v.push_back(trial.at(s.source));
        SweepRow row;
        row.experiment = experiment_name(cfg.experiment);
        row.n = n;
        row.q = q;
        row.alpha = cfg.alpha;
        row.trials = trials;
        row.stat = s.name;
        row.exact = s.exact;
        row.upper_bound = s.upper_bound;
        if (cfg.timing) row.runtime_ms = runtime_ms;
        switch (s.agg) {
            case Agg::mean: {
                // summation in trial order keeps the result independent of scheduling
                double sum = 0.0;
                for (double x : v) sum += x;
                row.mean = sum / static_cast<double>(trials);
                double ss = 0.0;
                for (double x : v) ss += (x - row.mean) * (x - row.mean);
                row.std_error = trials > 1 ? std::sqrt(ss / (trials - 1.0) / static_cast<double>(trials)) : 0.0;
                break;
            }
            case Agg::median: row.mean = quantile(v, 0.5); break;
            case Agg::q1: row.mean = quantile(v, 0.25); break;
            case Agg::q3: row.mean = quantile(v, 0.75); break;
            case Agg::min: row.mean = *std::min_element(v.begin(), v.end()); break;
            case Agg::max: row.mean = *std::max_element(v.begin(), v.end()); break;
        }
        if (row.exact && row.std_error) {
            row.pass = within_band(row.mean, *row.std_error, *row.exact, trials, s.tolerance);
        } else if (row.upper_bound && row.std_error) {
            row.pass = row.mean <= *row.upper_bound + 4.0 * *row.std_error + s.tolerance;
        }
        rows.push_back(std::move(row));
    }
}

struct CellPlan {
    TrialFn trial;
    std::vector<StatSpec> stats;
};

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

template <class Planner>
SweepResult run_grid(const SweepConfig& cfg, Planner&& plan) {
    cfg.validate();
    SweepResult result;
    result.master_seed = cfg.master_seed;
    result.config = cfg;
    std::uint64_t cell = 0;
    for (Index n : cfg.n_list) {
        for (const auto& qs : cfg.q_grid) {
            const double q = qs.resolve(n);
            const auto start = std::chrono::steady_clock::now();
            const CellPlan p = plan(n, q);
            const std::string context = std::string(experiment_name(cfg.experiment)) + " cell n=" + std::to_string(n) +
                                        ", q=" + fmt_num(q);
            const auto raw = run_trials(p.trial, cfg.trials, cfg.master_seed, cell, cfg.threads, context);
            aggregate_cell(result.rows, cfg, n, q, raw, p.stats, elapsed_ms(start));
            ++cell;
        }
    }
    sort_rows(result.rows);
    return result;
}

}  // namespace detail

/// log Pr[F_k] for every k = 1..n (slot 0 unused), from prefix sums in O(n).
inline std::vector<double> log_flush_prob_all(Index n, double q) {
    detail::require(n >= 1, "log_flush_prob_all needs n >= 1");
    detail::require_q(q);
    std::vector<double> out(n + 1, 0.0);
    if (q == 0.0) return out;
    std::vector<double> prefix(n + 1, 0.0);  // sum_{i<=m} log(1 - q^i), or log m! at q = 1
    for (Index i = 1; i <= n; ++i) {
        prefix[i] = prefix[i - 1] + (q == 1.0 ? std::log(static_cast<double>(i)) : std::log(detail::one_minus_pow(q, i)));
    }
    for (Index k = 1; k <= n; ++k) out[k] = prefix[k] - (prefix[n] - prefix[n - k]);
    return out;
}

/// expected_cuts(n, q, alpha) in O(n), for large sweep cells.
inline double expected_cuts_fast(Index n, double q, double alpha) {
    const auto [lo, hi] = separator_k_range(n, alpha);
    if (q == 0.0) {
        const Index a = std::max<Index>(lo, 2);
        const Index b = std::min<Index>(hi, n >= 1 ? n - 1 : 0);
        return b >= a ? static_cast<double>(b - a + 1) : 0.0;
    }
    const auto lf = log_flush_prob_all(n, q);
    const double lq = std::log(q);
    double total = 0.0;
    for (Index k = std::max<Index>(lo, 2); k <= hi && k + 1 <= n; ++k) {
        const double first = q == 1.0 ? -std::log(static_cast<double>(k))
                                      : std::log1p(-q) - std::log(detail::one_minus_pow(q, k));
        const double lpf = lf[k] + first;
        const double e = static_cast<double>(k) * static_cast<double>(n - k + 1) - 1.0;
        total += std::exp(lpf) + std::exp(e * lq + lpf);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Experiments.

/// Pr[some cut vertex in the balanced range] and the mean count in that range,
/// read off traces without building graphs.
inline SweepResult run_separator_sweep(const SweepConfig& cfg) {
    return detail::run_grid(cfg, [&](Index n, double q) {
        detail::CellPlan p;
        p.trial = [n, q, alpha = cfg.alpha](CounterRng& rng) {
            const auto t = sample_trace(n, q, rng);
            const auto count = static_cast<double>(count_cuts_in_range(cut_vertices_from_trace(t), n, alpha));
            return std::vector<double>{count >= 1 ? 1.0 : 0.0, count};
        };
        p.stats = {{"has_separator", 0}, {"cut_count", 1, detail::Agg::mean, expected_cuts_fast(n, q, cfg.alpha)}};
        return p;
    });
}

/// Treewidth / cutwidth summaries. Exact columns only for n <= 20; the
/// identity layout is reported for every n as an upper-bound layout.
inline SweepResult run_width_sweep(const SweepConfig& cfg) {
    return detail::run_grid(cfg, [&](Index n, double q) {
        using detail::Agg;
        const bool exact = n <= kExactWidthCap;
        detail::CellPlan p;
        p.trial = [n, q, exact](CounterRng& rng) {
            const auto g = build_tangled(mallows_process(sample_trace(n, q, rng)));
            const double cwid = cutwidth_identity(g).width;
            if (!exact) return std::vector<double>{cwid};
            return std::vector<double>{cwid, static_cast<double>(treewidth_exact(g)), static_cast<double>(cutwidth_exact(g))};
        };
        const double shape_tw = q == 0.0 ? 0.0 : q == 1.0 ? std::nan("") : std::sqrt(std::log(n) / -std::log(q));
        const double shape_cw = q == 1.0 ? std::nan("") : std::log(1.0 / (1.0 - q)) / (1.0 - q);
        p.stats = {{"cw_upper_layout", 0},
                   {"cw_upper_layout_median", 0, Agg::median},
                   {"cw_upper_layout_q1", 0, Agg::q1},
                   {"cw_upper_layout_q3", 0, Agg::q3}};
        if (exact) {
            p.stats.push_back({"tw_exact", 1});
            p.stats.push_back({"tw_exact_median", 1, Agg::median});
            p.stats.push_back({"tw_exact_q1", 1, Agg::q1});
            p.stats.push_back({"tw_exact_q3", 1, Agg::q3});
            p.stats.push_back({"cw_exact", 2});
            p.stats.push_back({"cw_exact_median", 2, Agg::median});
        }
        // constant shape columns for plotting, carried as a "trial value"
        const auto base = p.trial;
        p.trial = [base, shape_tw, shape_cw](CounterRng& rng) {
            auto v = base(rng);
            v.push_back(shape_tw);
            v.push_back(shape_cw);
            return v;
        };
        const std::size_t shape_at = exact ? 3 : 1;
        p.stats.push_back({"shape_sqrt_log_n_over_log_inv_q", shape_at, Agg::median});
        p.stats.push_back({"shape_log_inv_1mq_over_1mq", shape_at + 1, Agg::median});
        return p;
    });
}

/// Diameter with the cut-count lower bound |C| + 1 checked on every trial.
inline SweepResult run_diameter_sweep(const SweepConfig& cfg) {
    return detail::run_grid(cfg, [&](Index n, double q) {
        using detail::Agg;
        detail::CellPlan p;
        p.trial = [n, q](CounterRng& rng) {
            const auto t = sample_trace(n, q, rng);
            const auto cuts = cut_vertices_from_trace(t);
            const double diam = diameter(build_tangled(mallows_process(t)));
            const double lower = static_cast<double>(cuts.size()) + 1.0;
            return std::vector<double>{diam, diam / n, lower, diam < lower ? 1.0 : 0.0};
        };
        p.stats = {{"diameter", 0},
                   {"diameter_min", 0, Agg::min},
                   {"diameter_ratio", 1},
                   {"cut_lower_bound", 2},
                   {"diambound_violations", 3, Agg::mean, 0.0}};
        return p;
    });
}

/// Exact vertex isoperimetric number for n <= 20; random balanced bisection
/// edge ratios otherwise. Observational.
inline SweepResult run_expansion_check(const SweepConfig& cfg) {
    return detail::run_grid(cfg, [&](Index n, double q) {
        using detail::Agg;
        const bool exact = n <= kExactWidthCap && n >= 2;
        detail::CellPlan p;
        p.trial = [n, q, exact](CounterRng& rng) {
            const auto g = build_tangled(mallows_process(sample_trace(n, q, rng)));
            const double deg = max_degree(g);
            if (exact) {
                const auto iso = vertex_iso(g);
                return std::vector<double>{deg, iso.value(), iso >= Rational::of(1, 40) ? 1.0 : 0.0};
            }
            // random half of the vertices by Fisher-Yates on the counter stream
            std::vector<Index> perm(n);
            std::iota(perm.begin(), perm.end(), Index{1});
            for (Index i = n; i > 1; --i) {
                const auto j = static_cast<Index>(rng.uniform01() * i);
                std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
            }
            std::vector<bool> side(n + 1, false);
            for (Index i = 0; i < n / 2; ++i) side[perm[i]] = true;
            std::size_t cut = 0;
            for (const auto& e : g.edges()) cut += side[e.u] != side[e.v];
            return std::vector<double>{deg, static_cast<double>(cut) / std::max<Index>(1, n / 2)};
        };
        p.stats = {{"max_degree", 0, Agg::max}};
        if (exact) {
            p.stats.push_back({"vertex_iso", 1});
            p.stats.push_back({"vertex_iso_min", 1, Agg::min});
            p.stats.push_back({"frac_vertex_iso_ge_1_40", 2});
        } else {
            p.stats.push_back({"bisection_edge_ratio", 1});
            p.stats.push_back({"bisection_edge_ratio_min", 1, Agg::min});
        }
        return p;
    });
}

/// Empirical frequency of F_k and R_k against the product formulas. With
/// `exhaustive` (n <= 7) the frequencies are exact weighted enumerations.
inline SweepResult run_flush_validation(const SweepConfig& cfg) {
    if (!cfg.exhaustive) {
        return detail::run_grid(cfg, [&](Index n, double q) {
            std::vector<Index> ks;
            for (const auto& k : cfg.k_list) ks.push_back(k.resolve(n));
            detail::CellPlan p;
            p.trial = [n, q, ks](CounterRng& rng) {
                const auto rep = detect_events(sample_trace(n, q, rng));
                std::vector<double> v;
                for (Index k : ks) {
                    v.push_back(rep.flush[k]);
                    v.push_back(rep.reverse_flush[k]);
                }
                return v;
            };
            for (std::size_t j = 0; j < ks.size(); ++j) {
                const std::string tag = "@k=" + std::to_string(ks[j]);
                p.stats.push_back({"flush" + tag, 2 * j, detail::Agg::mean, flush_prob(n, ks[j], q)});
                p.stats.push_back({"reverse_flush" + tag, 2 * j + 1, detail::Agg::mean, reverse_flush_prob(n, ks[j], q)});
            }
            return p;
        });
    }
    cfg.validate();
    SweepResult result;
    result.master_seed = cfg.master_seed;
    result.config = cfg;
    for (Index n : cfg.n_list) {
        for (const auto& qs : cfg.q_grid) {
            const double q = qs.resolve(n);
            const auto start = std::chrono::steady_clock::now();
            std::vector<Index> ks;
            for (const auto& k : cfg.k_list) ks.push_back(k.resolve(n));
            std::vector<double> f(ks.size(), 0.0), rf(ks.size(), 0.0);
            std::uint64_t count = 0;
            enumerate_traces(n, q, [&](std::span<const Index> v, double w) {
                ++count;
                const auto rep = detect_events(InsertionTrace(std::vector<Index>(v.begin(), v.end()), q));
                for (std::size_t j = 0; j < ks.size(); ++j) {
                    if (rep.flush[ks[j]]) f[j] += w;
                    if (rep.reverse_flush[ks[j]]) rf[j] += w;
                }
            });
            const double ms = detail::elapsed_ms(start);
            for (std::size_t j = 0; j < ks.size(); ++j) {
                for (int which = 0; which < 2; ++which) {
                    SweepRow row;
                    row.experiment = experiment_name(cfg.experiment);
                    row.n = n;
                    row.q = q;
                    row.alpha = cfg.alpha;
                    row.trials = count;
                    row.stat = std::string(which == 0 ? "flush" : "reverse_flush") + "@k=" + std::to_string(ks[j]);
                    row.mean = which == 0 ? f[j] : rf[j];
                    row.std_error = 0.0;
                    row.exact = which == 0 ? flush_prob(n, ks[j], q) : reverse_flush_prob(n, ks[j], q);
                    row.pass = std::abs(row.mean - *row.exact) <= 1e-9;
                    if (cfg.timing) row.runtime_ms = ms;
                    result.rows.push_back(std::move(row));
                }
            }
        }
    }
    sort_rows(result.rows);
    return result;
}

/// Pr[|sigma(i) - i| >= t] for sigma ~ mu_{n,q}, checked against 2 q^t.
inline SweepResult run_displacement_sweep(const SweepConfig& cfg) {
    return detail::run_grid(cfg, [&](Index n, double q) {
        const Index i = cfg.displacement_i.value_or(std::max<Index>(1, n / 2));
        detail::require(i >= 1 && i <= n, "displacement: i out of range");
        std::vector<Index> ts = cfg.t_list;
        if (ts.empty())
            for (Index t = 1; t <= 20; ++t) ts.push_back(t);
        detail::CellPlan p;
        p.trial = [n, q, i, ts](CounterRng& rng) {
            const auto r = sample_mallows(n, q, rng).permutation;
            const Index s = r(n + 1 - i);
            const Index d = s > i ? s - i : i - s;
            std::vector<double> v;
            for (Index t : ts) v.push_back(d >= t ? 1.0 : 0.0);
            return v;
        };
        for (std::size_t j = 0; j < ts.size(); ++j) {
            detail::StatSpec s{"tail@t=" + std::to_string(ts[j]), j};
            s.upper_bound = 2.0 * std::pow(q, ts[j]);
            p.stats.push_back(s);
        }
        return p;
    });
}

inline SweepResult run_sweep(const SweepConfig& cfg) {
    switch (cfg.experiment) {
        case Experiment::separator: return run_separator_sweep(cfg);
        case Experiment::width: return run_width_sweep(cfg);
        case Experiment::diameter: return run_diameter_sweep(cfg);
        case Experiment::expansion: return run_expansion_check(cfg);
        case Experiment::flush_validate: return run_flush_validation(cfg);
        case Experiment::displacement: return run_displacement_sweep(cfg);
    }
    throw domain_error("unknown experiment");
}

}  // namespace tangled

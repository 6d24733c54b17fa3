#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <gtest/gtest.h>

#include "tangled/harness.hpp"

using namespace tangled;

namespace {

SweepConfig config(const std::string& text) {
    SweepConfig cfg;
    parse_config_text(cfg, text);
    return cfg;
}

const SweepRow& row(const SweepResult& r, Index n, const std::string& stat, double q = -1) {
    for (const auto& x : r.rows)
        if (x.n == n && x.stat == stat && (q < 0 || std::abs(x.q - q) < 1e-12)) return x;
    throw std::runtime_error("no row " + stat);
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("tangled_harness_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Config, KeyValueText) {
    const auto cfg = config(R"(
# separator sweep
experiment = separator
n = 100, 1000
q = 0.5, critical, critical-3, critical+1.5
alpha = 0.6
trials = 50
seed = 0x10
threads = 4
timing = off
)");
    EXPECT_EQ(cfg.experiment, Experiment::separator);
    EXPECT_EQ(cfg.n_list, (std::vector<Index>{100, 1000}));
    ASSERT_EQ(cfg.q_grid.size(), 4u);
    EXPECT_EQ(cfg.q_grid[0].value, 0.5);
    EXPECT_EQ(cfg.q_grid[1].kind, QSpec::Kind::critical);
    EXPECT_EQ(cfg.q_grid[2].kind, QSpec::Kind::exist);
    EXPECT_EQ(cfg.q_grid[3].str(), "critical+1.5");
    EXPECT_EQ(cfg.alpha, 0.6);
    EXPECT_EQ(cfg.trials, 50u);
    EXPECT_EQ(cfg.master_seed, 16u);
    EXPECT_EQ(cfg.threads, 4u);
    EXPECT_FALSE(cfg.timing);
    EXPECT_EQ(config("n = 1..4\n").n_list, (std::vector<Index>{1, 2, 3, 4}));
}

TEST(Config, Json) {
    const auto cfg = config(R"({"experiment": "flush-validate", "n": [7], "q": [0.2, "critical"], "k": ["n/2", 3],
                                "exhaustive": true, "seed": 9})");
    EXPECT_EQ(cfg.experiment, Experiment::flush_validate);
    EXPECT_EQ(cfg.n_list, std::vector<Index>{7});
    ASSERT_EQ(cfg.k_list.size(), 2u);
    EXPECT_EQ(cfg.k_list[0].resolve(7), 3u);
    EXPECT_EQ(cfg.k_list[1].resolve(7), 3u);
    EXPECT_TRUE(cfg.exhaustive);
    EXPECT_EQ(cfg.master_seed, 9u);
}

TEST(Config, Errors) {
    EXPECT_THROW(config("colour = red\n"), domain_error);
    EXPECT_THROW(config("n 100\n"), domain_error);
    EXPECT_THROW(config("q = 1.5\n"), domain_error);
    EXPECT_THROW(config("trials = many\n"), domain_error);
    EXPECT_THROW(config("{\"n\": [1,\n"), domain_error);
    EXPECT_THROW(load_config("/nonexistent/tangled.conf"), domain_error);
    SweepConfig empty;
    EXPECT_THROW(empty.validate(), domain_error);
    auto big = config("experiment = flush-validate\nn = 8\nq = 0.5\nexhaustive = 1\n");
    EXPECT_THROW(big.validate(), refusal_error);
    auto zero = config("n = 5\nq = 0.5\ntrials = 0\n");
    EXPECT_THROW(zero.validate(), domain_error);
}

TEST(Config, SeedFromEnvironment) {
    const auto path = temp_path("env.conf");
    write_text_file(path.string(), "n = 10\nq = 0.5\n");
    ::setenv("TANGLED_SEED", "1234", 1);
    EXPECT_EQ(load_config(path.string()).master_seed, 1234u);
    write_text_file(path.string(), "n = 10\nq = 0.5\nseed = 5\n");
    EXPECT_EQ(load_config(path.string()).master_seed, 5u);
    ::unsetenv("TANGLED_SEED");
    std::filesystem::remove(path);
}

TEST(QSpec, Resolve) {
    const auto w = threshold_window(100000, 3.0);
    EXPECT_EQ(QSpec::parse("critical-3").resolve(100000), w.q_exist);
    EXPECT_EQ(QSpec::parse("critical + 3").resolve(100000), w.q_nonexist);
    EXPECT_EQ(QSpec::parse("critical").resolve(100000), w.q_critical);
    EXPECT_EQ(QSpec::parse("0.25").resolve(7), 0.25);
    EXPECT_THROW(QSpec::parse("critical*2"), domain_error);
    EXPECT_THROW(QSpec::parse("half"), domain_error);
    EXPECT_EQ(KSpec::parse("n").resolve(9), 9u);
    EXPECT_EQ(KSpec::parse("n/3").resolve(9), 3u);
    EXPECT_THROW(KSpec::parse("12").resolve(9), domain_error);
}

TEST(WithinBand, Floors) {
    EXPECT_TRUE(within_band(0.5, 0.01, 0.53, 100));
    EXPECT_FALSE(within_band(0.5, 0.01, 0.55, 100));
    EXPECT_TRUE(within_band(0.0, 0.0, 1e-6, 100000));
    EXPECT_FALSE(within_band(1e-5, 0.0, 0.0, 100000));  // a hit on an impossible event
    EXPECT_TRUE(within_band(0.0, 0.0, 0.0, 10));
}

TEST(SeparatorSweep, TrivialAtZero) {
    const auto r = run_sweep(config("experiment=separator\nn=9,50\nq=0\ntrials=20\nseed=1\n"));
    EXPECT_EQ(row(r, 9, "has_separator").mean, 1.0);
    EXPECT_EQ(row(r, 9, "cut_count").mean, 4.0);
    EXPECT_EQ(*row(r, 9, "cut_count").exact, 4.0);
    EXPECT_TRUE(*row(r, 50, "cut_count").pass);
    EXPECT_TRUE(r.failures().empty());
}

TEST(SeparatorSweep, ExactColumnMatchesEvents) {
    for (Index n : {30u, 200u, 999u})
        for (double q : {0.0, 0.3, 0.9, 1.0})
            for (double alpha : {0.6, 2.0 / 3.0})
                ASSERT_NEAR(expected_cuts_fast(n, q, alpha), expected_cuts(n, q, alpha), 1e-9 * (1 + expected_cuts(n, q, alpha)));
    const auto r = run_sweep(config("experiment=separator\nn=500\nq=0.5,0.8\ntrials=400\nseed=2\n"));
    EXPECT_TRUE(r.failures().empty());
}

TEST(WidthSweep, TrivialAtZero) {
    const auto r = run_sweep(config("experiment=width\nn=12,40\nq=0\ntrials=5\n"));
    EXPECT_EQ(row(r, 12, "tw_exact").mean, 1.0);
    EXPECT_EQ(row(r, 12, "cw_exact").mean, 1.0);
    EXPECT_EQ(row(r, 40, "cw_upper_layout").mean, 1.0);
    EXPECT_THROW(row(r, 40, "tw_exact"), std::runtime_error);
    EXPECT_FALSE(row(r, 12, "tw_exact_median").std_error.has_value());
}

TEST(DiameterSweep, TrivialAndBound) {
    const auto r = run_sweep(config("experiment=diameter\nn=30\nq=0,0.5\ntrials=30\nseed=3\n"));
    EXPECT_EQ(row(r, 30, "diameter", 0.0).mean, 29.0);
    EXPECT_EQ(row(r, 30, "diambound_violations", 0.5).mean, 0.0);
    EXPECT_TRUE(r.failures().empty());
}

TEST(ExpansionCheck, PathAndDegree) {
    const auto r = run_sweep(config("experiment=expansion\nn=10,100\nq=0,1\ntrials=10\nseed=4\n"));
    EXPECT_NEAR(row(r, 10, "vertex_iso", 0.0).mean, 2.0 / 10.0, 1e-15);
    EXPECT_LE(row(r, 10, "max_degree", 1.0).mean, 4.0);
    EXPECT_LE(row(r, 100, "max_degree", 1.0).mean, 4.0);
    EXPECT_GT(row(r, 100, "bisection_edge_ratio", 1.0).mean, 0.0);
}

TEST(FlushValidation, ExhaustiveAtSeven) {
    const auto r = run_sweep(config("experiment=flush-validate\nn=7\nq=0.2,0.5,0.8,1\nk=1,3,n/2,7\nexhaustive=1\n"));
    for (const auto& x : r.rows) {
        EXPECT_EQ(x.trials, 5040u);
        EXPECT_NEAR(x.mean, *x.exact, 1e-9) << x.stat;
        EXPECT_TRUE(*x.pass);
    }
    EXPECT_NEAR(row(r, 7, "flush@k=7", 0.5).mean, 1.0, 1e-12);
}

TEST(FlushValidation, MonteCarlo) {
    const auto r = run_sweep(config("experiment=flush-validate\nn=40\nq=0.5,0.9\nk=n/2,40\ntrials=20000\nseed=5\n"));
    EXPECT_TRUE(r.failures().empty());
    EXPECT_EQ(row(r, 40, "flush@k=40", 0.9).mean, 1.0);
}

TEST(Displacement, RespectsBound) {
    const auto r = run_sweep(config("experiment=displacement\nn=60\nq=0.3,0.7\nt=1..8\ntrials=5000\nseed=6\n"));
    EXPECT_TRUE(r.failures().empty());
    EXPECT_NEAR(*row(r, 60, "tail@t=3", 0.7).upper_bound, 2 * std::pow(0.7, 3), 1e-15);
}

TEST(Reproducibility, ThreadCountInvariant) {
    for (const char* exp : {"separator", "width", "displacement"}) {
        std::string base = std::string("experiment=") + exp + "\nn=14,60\nq=0.4,0.9\ntrials=64\nseed=77\ntiming=0\n";
        std::string csv;
        for (int threads : {1, 4, 8}) {
            const auto out = to_csv(run_sweep(config(base + "threads=" + std::to_string(threads) + "\n")));
            if (csv.empty()) csv = out;
            ASSERT_EQ(out, csv) << exp << " threads=" << threads;
        }
        ASSERT_NE(csv, to_csv(run_sweep(config(base + "seed=78\n"))));
    }
}

TEST(Output, CsvShapeAndOrder) {
    auto cfg = config("experiment=separator\nn=50,20\nq=0.9,0.1\ntrials=10\nseed=7\n");
    const auto r = run_sweep(cfg);
    const auto csv = to_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "experiment,n,q,alpha,trials,stat,mean,stderr,exact,runtime_ms");
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
        const auto &a = r.rows[i - 1], &b = r.rows[i];
        ASSERT_TRUE(std::tie(a.n, a.q, a.stat) <= std::tie(b.n, b.q, b.stat));
    }
    EXPECT_EQ(r.rows.front().n, 20u);
    EXPECT_TRUE(r.rows.front().runtime_ms.has_value());
    std::istringstream lines(csv);
    std::string line;
    while (std::getline(lines, line)) ASSERT_EQ(std::count(line.begin(), line.end(), ','), 9) << line;
}

TEST(Output, JsonAndPlot) {
    const auto r = run_sweep(config("experiment=separator\nn=30\nq=0.5,critical-1\ntrials=10\nseed=8\n"));
    const auto j = to_json(r);
    EXPECT_EQ(j["metadata"]["master_seed"], 8u);
    EXPECT_EQ(j["metadata"]["rng"], "splitmix64-counter");
    EXPECT_EQ(j["metadata"]["code_version"], kVersion);
    EXPECT_EQ(j["metadata"]["q"][1], "critical-1");
    EXPECT_EQ(j["rows"].size(), r.rows.size());
    const auto plot = to_plot_data(r);
    EXPECT_NE(plot.find("# cut_count\n"), std::string::npos);
    EXPECT_NE(plot.find("\n\n\n# has_separator"), std::string::npos);
}

TEST(Output, UnwritablePath) {
    const auto r = run_sweep(config("n=5\nq=0.5\ntrials=2\n"));
    try {
        write_csv(r, "/nonexistent-dir/out.csv");
        FAIL() << "expected an error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/out.csv"), std::string::npos);
    }
    const auto path = temp_path("out.json");
    write_json(r, path.string());
    std::ifstream in(path);
    EXPECT_EQ(nlohmann::json::parse(in)["rows"].size(), r.rows.size());
    std::filesystem::remove(path);
}

TEST(Trials, FailureAbortsWithContext) {
    const detail::TrialFn bad = [](CounterRng& rng) -> std::vector<double> {
        if (rng.key() == derive_seed(1, 0, 3)) throw std::runtime_error("boom");
        return {1.0};
    };
    for (unsigned threads : {1u, 4u}) {
        try {
            detail::run_trials(bad, 10, 1, 0, threads, "test cell");
            FAIL();
        } catch (const std::runtime_error& e) {
            EXPECT_EQ(std::string(e.what()), "test cell, trial 3: boom");
        }
    }
    auto cfg = config("experiment=displacement\nn=5\nq=0.5\ni=9\ntrials=2\n");
    EXPECT_THROW(run_sweep(cfg), domain_error);
}

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "json.hpp"
#include "tangled/mallows.hpp"
#include "tangled/permutation.hpp"

using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + TANGLED_CLI_PATH + std::string(" ") + args + " 2>/dev/null";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

json run_json(const std::string& args) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << args;
    return json::parse(r.out);
}

std::string config(const std::string& name) { return std::string(TANGLED_CONFIG_DIR) + "/" + name; }

}  // namespace

TEST(CliSample, Examples) {
    EXPECT_EQ(run("sample --n 6 --q 0 --seed 1 --emit perm").out, "σ = 6 5 4 3 2 1\n");
    const auto a = run("sample --n 9 --q 0.5 --seed 42");
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(a.out, run("sample --n 9 --q 0.5 --seed 42").out);
    const auto both = run("sample --n 6 --q 0.5 --seed 3 --emit both");
    std::istringstream lines(both.out);
    std::string trace_line, perm_line;
    std::getline(lines, trace_line);
    std::getline(lines, perm_line);
    EXPECT_EQ(trace_line.rfind("v = ", 0), 0u);
    const auto trace = tangled::parse_trace(trace_line);
    EXPECT_EQ(tangled::mallows_process(trace), tangled::parse_permutation(perm_line));
    EXPECT_EQ(run("sample --n 4 --q 0.5 --seed 1 --count 3 --emit trace").out.size(), 3 * std::string("v = 1 1 1 1\n").size());
}

TEST(CliSample, SeedFromEnvironment) {
    EXPECT_EQ(run("sample --n 9 --q 0.5", "TANGLED_SEED=42").out, run("sample --n 9 --q 0.5 --seed 42").out);
}

TEST(CliSample, UsageErrors) {
    EXPECT_EQ(run("sample --q 0.5").code, 2);
    EXPECT_EQ(run("sample --n 5").code, 2);
    EXPECT_EQ(run("sample --n 5 --q 1.5").code, 2);
    EXPECT_EQ(run("sample --n 5 --q 0.5 --emit pdf").code, 2);
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("--help").code, 0);
    EXPECT_EQ(run("--version").code, 0);
}

TEST(CliGraph, Sources) {
    const auto edges = run("graph --perm \"3 5 1 4 6 2\"");
    EXPECT_EQ(edges.code, 0);
    EXPECT_EQ(edges.out.rfind("n=6\n", 0), 0u);
    const auto j = run_json("graph --trace \"1 2 1 3 2 5\" --format json");
    EXPECT_EQ(j["permutation"], (std::vector<int>{3, 5, 1, 4, 6, 2}));
    EXPECT_EQ(run("graph --perm \"3 5 1 4 6 2\" --format json").out, run("graph --trace \"1 2 1 3 2 5\" --format json").out);
    EXPECT_EQ(run_json("graph --n 10 --q 0.5 --seed 4 --format json")["n"], 10);
}

TEST(CliGraph, ConflictingFlags) {
    EXPECT_EQ(run("graph --perm \"1 2\" --trace \"1 1\"").code, 2);
    EXPECT_EQ(run("graph --perm \"1 2\" --q 0.5").code, 2);
    EXPECT_EQ(run("graph --trace \"1 1\" --seed 3").code, 2);
    EXPECT_EQ(run("graph --n 5").code, 2);
    EXPECT_EQ(run("graph").code, 2);
    EXPECT_EQ(run("graph --perm \"1 1\"").code, 2);
}

TEST(CliAnalyze, Examples) {
    const auto fig = run_json("analyze --trace \"1 1 3 2 1 1 1 3 2\" --q 0.5 --metrics cuts,diam");
    EXPECT_EQ(fig["cuts"], std::vector<int>{5});
    EXPECT_EQ(fig["cuts_from_trace"], std::vector<int>{5});
    EXPECT_TRUE(fig.contains("diameter"));
    EXPECT_FALSE(fig.contains("width"));
    const auto path = run_json("analyze --perm \"1 2 3 4 5\" --metrics tw,cw");
    EXPECT_EQ(path["width"]["treewidth"]["value"], 1);
    EXPECT_EQ(path["width"]["cutwidth_exact"]["value"], 1);
    const auto chain = run_json("analyze --n 12 --q 0.7 --seed 9 --metrics tw,cwid");
    EXPECT_LE(chain["width"]["treewidth"]["value"].get<int>(), chain["width"]["cutwidth_identity"]["value"].get<int>());
    EXPECT_EQ(chain["width"]["cutwidth_identity"]["method"], "identity-layout");
    const auto all = run_json("analyze --perm \"2 4 1 3\"");
    EXPECT_TRUE(all["width"]["vertex_iso"]["value"].is_string());
}

TEST(CliAnalyze, RefusalsAndErrors) {
    EXPECT_EQ(run("analyze --n 40 --q 0.5 --seed 1 --metrics tw").code, 3);
    EXPECT_EQ(run("analyze --n 40 --q 0.5 --seed 1 --metrics iso").code, 3);
    EXPECT_EQ(run("analyze --n 40 --q 0.5 --seed 1 --metrics cwid,diam,cuts").code, 0);
    EXPECT_EQ(run("analyze --perm \"1 2 3\" --metrics girth").code, 2);
    EXPECT_EQ(run("analyze --trace \"1 3\"").code, 2);
}

TEST(CliProb, Examples) {
    EXPECT_NEAR(run_json("prob flush --n 3 --k 1 --q 0.5")["flush"].get<double>(), 4.0 / 7.0, 1e-15);
    EXPECT_DOUBLE_EQ(run_json("prob expected --n 9 --q 0 --alpha 0.667")["expected_cuts"].get<double>(), 4.0);
    const auto b = run_json("prob flush --n 100 --k 50 --q 0.9 --bounds");
    const double lf = b["bounds"]["log_flush"].get<double>();
    EXPECT_LE(b["bounds"]["log_flush_lower"].get<double>(), lf);
    EXPECT_GE(b["bounds"]["log_flush_upper"].get<double>(), lf);
    EXPECT_GE(b["bounds"]["flush_cheap_upper"].get<double>(), b["flush"].get<double>());
    const auto c = run_json("prob cut --n 6 --k 3 --q 0.5");
    EXPECT_LT(c["cut_R"].get<double>(), c["cut_F"].get<double>());
    const auto w = run_json("prob cut --n 10000 --k 5000 --q 0.5 --alpha 0.6667 --bounds");
    EXPECT_TRUE(w["bounds"]["cut_F_window"]["relaxed"].get<bool>());
    EXPECT_LE(w["cut_F"].get<double>(), w["bounds"]["cut_F_window"]["upper"].get<double>());
}

TEST(CliProb, Errors) {
    EXPECT_EQ(run("prob flush --n 5 --q 0.5").code, 2);
    EXPECT_EQ(run("prob expected --n 5 --k 2 --q 0.5 --alpha 0.6").code, 2);
    EXPECT_EQ(run("prob cut --n 5 --k 1 --q 0.5").code, 2);
    EXPECT_EQ(run("prob flush --n 5 --k 2 --q 1 --bounds").code, 3);
    EXPECT_EQ(run("prob median --n 5 --k 2 --q 0.5").code, 2);
}

TEST(CliEvents, Examples) {
    const auto f = run_json("events --trace \"1 1 2 1 3 1 1 3 2\" --q 0.5 --local --sparse 1,2,4");
    const auto flush = f["flush"].get<std::vector<int>>();
    EXPECT_NE(std::find(flush.begin(), flush.end(), 5), flush.end());
    EXPECT_EQ(f["b"], 26);
    EXPECT_TRUE(f["sparse_flush"][0]["holds"].get<bool>());
    const auto s = run_json("events --trace \"1 1 3 2 1 1 1 3 2\"");
    EXPECT_EQ(s["cut_set"], std::vector<int>{5});
    EXPECT_EQ(s["cut_F"].get<std::vector<int>>().size() >= 1, true);
    EXPECT_EQ(run("events --trace \"1 1 2\" --q 1 --local").code, 3);
    EXPECT_EQ(run("events --trace \"1 1 2\" --sparse 1,2").code, 2);
}

TEST(CliOracle, Examples) {
    const auto cut = run_json("oracle enumerate --n 3 --q 1 --event cut");
    EXPECT_EQ(cut["traces"], 6);
    // of the six traces, only those whose graph is the path 1-2-3 have vertex 2 as a cut
    int cuts = 0;
    tangled::enumerate_traces(3, 1.0, [&](std::span<const tangled::Index> v, double) {
        const auto p = tangled::mallows_process(v);
        cuts += std::abs(int(p(1)) - int(p(2))) == 1 && std::abs(int(p(2)) - int(p(3))) == 1 ? 1 : 0;
    });
    EXPECT_NEAR(cut["probability"].get<double>(), cuts / 6.0, 1e-15);
    EXPECT_NEAR(run_json("oracle enumerate --n 1 --q 0.5")["total_weight"].get<double>(), 1.0, 1e-15);
    const auto fl = run_json("oracle enumerate --n 6 --q 0.5 --event flush@3");
    EXPECT_NEAR(fl["probability"].get<double>(), fl["closed_form"].get<double>(), 1e-12);
    EXPECT_EQ(run("oracle enumerate --n 10 --q 0.5").code, 3);
    EXPECT_EQ(run("oracle enumerate --n 4 --q 0.5 --event flush@9").code, 2);
}

TEST(CliSweep, RunsAndWrites) {
    const auto dir = std::filesystem::temp_directory_path() / ("tangled_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const auto csv = (dir / "out.csv").string(), js = (dir / "out.json").string(), plot = (dir / "out.dat").string();
    const std::string args = "sweep --config " + config("separator.conf") +
                             " --set n=300 --set trials=40 --set timing=0 --threads 2";
    const auto r = run(args + " --out " + csv + " --json " + js + " --plot " + plot);
    EXPECT_EQ(r.code, 0);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "experiment,n,q,alpha,trials,stat,mean,stderr,exact,runtime_ms");
    std::ifstream jin(js);
    EXPECT_EQ(json::parse(jin)["metadata"]["master_seed"], 1);
    EXPECT_TRUE(std::filesystem::exists(plot));
    EXPECT_EQ(run(args + " --threads 1").out, run(args + " --threads 4").out);
    std::filesystem::remove_all(dir);

    EXPECT_EQ(run("sweep --config " + config("flush-validate.json") + " --set n=20 --set trials=2000 --set timing=0").code, 0);
    EXPECT_EQ(run("sweep --config " + config("width.conf") + " --set n=8 --set trials=5").code, 0);
}

TEST(CliSweep, ExitCodes) {
    // two trials with equal cut counts give a zero stderr band around a non-integer mean
    EXPECT_EQ(run("sweep --config " + config("separator.conf") + " --set n=9 --set q=0.3 --set trials=2 --seed 1").code, 4);
    EXPECT_EQ(run("sweep --config /nonexistent.conf").code, 2);
    EXPECT_EQ(run("sweep --config " + config("separator.conf") + " --set colour=red").code, 2);
    EXPECT_EQ(run("sweep --config " + config("flush-validate.json") + " --set exhaustive=1").code, 3);
    EXPECT_EQ(run("sweep --config " + config("separator.conf") + " --set n=20 --set trials=2 --out /nonexistent-dir/x.csv").code,
              1);
}

#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "pcstable/bench.hpp"

namespace {

std::string g_cli;

std::string temp_path(const std::string& name) { return testing::TempDir() + "cli_" + name; }

/// Runs the CLI through the shell, capturing stdout/stderr, returning the
/// exit code. `prefix` can carry environment assignments.
int run_cli(const std::string& args, const std::string& prefix = "") {
    const std::string cmd = prefix + g_cli + " " + args + " > " + temp_path("stdout.txt") +
                            " 2> " + temp_path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    EXPECT_TRUE(in.good()) << path;
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

std::size_t count_lines(const std::string& text) {
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n';
    return lines;
}

nlohmann::json load_report(const std::string& prefix) {
    std::ifstream in(prefix + ".report.json");
    EXPECT_TRUE(in.good()) << prefix;
    return nlohmann::json::parse(in);
}

/// Generates a dataset once per process for the skeleton/report tests.
const std::string& shared_dataset() {
    static const std::string path = [] {
        const std::string p = temp_path("shared.csv");
        EXPECT_EQ(run_cli("gen --n 10 --d 0.3 --m 500 --seed 21 --out " + p), 0);
        return p;
    }();
    return path;
}

}  // namespace

TEST(CliUsage, HelpExitsZero) {
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("skeleton --help"), 0);
}

TEST(CliUsage, BadInvocationsExitOne) {
    EXPECT_EQ(run_cli(""), 1);                                    // no subcommand
    EXPECT_EQ(run_cli("frobnicate"), 1);                          // unknown subcommand
    EXPECT_EQ(run_cli("gen --n 8 --d 0.3 --m 50"), 1);            // missing --out
    EXPECT_EQ(run_cli("gen --n 8 --d 1.5 --m 50 --out /tmp/x"), 1);  // density out of range
    EXPECT_EQ(run_cli("skeleton --data x.csv --out y --strategy bogus"), 1);
    EXPECT_EQ(run_cli("bench --spec 10,0.3,50 --out b.csv --strategies bogus"), 1);
    EXPECT_EQ(run_cli("skeleton --data x.csv --out y --workers 0"), 1);
}

TEST(CliGen, WritesDataAndTruthDeterministically) {
    const std::string a = temp_path("gen_a.csv");
    const std::string b = temp_path("gen_b.csv");
    const std::string c = temp_path("gen_c.csv");
    ASSERT_EQ(run_cli("gen --n 8 --d 0.3 --m 100 --seed 4 --out " + a), 0);
    ASSERT_EQ(run_cli("gen --n 8 --d 0.3 --m 100 --seed 4 --out " + b), 0);
    ASSERT_EQ(run_cli("gen --n 8 --d 0.3 --m 100 --seed 5 --out " + c), 0);
    const std::string data_a = read_text(a);
    EXPECT_EQ(count_lines(data_a), 100u);
    EXPECT_EQ(data_a, read_text(b));
    EXPECT_EQ(read_text(a + ".truth"), read_text(b + ".truth"));
    EXPECT_NE(data_a, read_text(c));
    // Truth lines are directed "cause > effect" pairs with cause < effect.
    const pcstable::io::EdgeListData truth = pcstable::io::read_edge_list(a + ".truth");
    EXPECT_TRUE(truth.undirected.empty());
    EXPECT_GT(truth.directed.size(), 0u);
    for (const auto& [cause, effect] : truth.directed) EXPECT_LT(cause, effect);
}

TEST(CliSkeleton, StrategiesProduceIdenticalEdges) {
    const std::string& data = shared_dataset();
    const std::string serial = temp_path("sk_serial");
    const std::string edge1 = temp_path("sk_edge1");
    const std::string edge4 = temp_path("sk_edge4");
    const std::string set1 = temp_path("sk_set1");
    const std::string set4 = temp_path("sk_set4");
    ASSERT_EQ(run_cli("skeleton --data " + data + " --strategy serial --out " + serial), 0);
    ASSERT_EQ(run_cli("skeleton --data " + data + " --strategy edge --workers 1 --out " + edge1),
              0);
    ASSERT_EQ(run_cli("skeleton --data " + data + " --strategy edge --workers 4 --out " + edge4),
              0);
    ASSERT_EQ(run_cli("skeleton --data " + data + " --strategy set --workers 1 --out " + set1),
              0);
    ASSERT_EQ(run_cli("skeleton --data " + data + " --strategy set --workers 4 --out " + set4),
              0);
    const std::string reference = read_text(serial + ".edges");
    EXPECT_GT(count_lines(reference), 0u);
    for (const std::string& prefix : {edge1, edge4, set1, set4})
        EXPECT_EQ(read_text(prefix + ".edges"), reference) << prefix;
    // One worker visits units in the serial order, so even the recorded
    // separating sets match between the serial and edge strategies.
    EXPECT_EQ(read_text(edge1 + ".sepsets"), read_text(serial + ".sepsets"));
}

TEST(CliSkeleton, ReportIsInternallyConsistent) {
    const std::string& data = shared_dataset();
    const std::string prefix = temp_path("sk_report");
    ASSERT_EQ(run_cli("skeleton --data " + data + " --strategy set --workers 2 --out " + prefix),
              0);
    const nlohmann::json report = load_report(prefix);
    EXPECT_EQ(report.at("command"), "skeleton");
    EXPECT_EQ(report.at("input").at("n"), 10);
    EXPECT_EQ(report.at("input").at("m"), 500);
    EXPECT_EQ(report.at("input").at("fingerprint").get<std::string>().size(), 16u);
    EXPECT_EQ(report.at("config").at("strategy"), "set");
    EXPECT_EQ(report.at("config").at("workers"), 2);
    EXPECT_TRUE(report.at("config").at("max_level").is_null());

    std::uint64_t tests = 0;
    std::uint64_t pinvs = 0;
    std::uint64_t removed = 0;
    std::int64_t level_ms = 0;
    for (const auto& level : report.at("levels")) {
        tests += level.at("ci_tests").get<std::uint64_t>();
        pinvs += level.at("pseudo_inverses").get<std::uint64_t>();
        removed += level.at("edges_removed").get<std::uint64_t>();
        level_ms += level.at("elapsed_ms").get<std::int64_t>();
    }
    EXPECT_EQ(report.at("totals").at("ci_tests"), tests);
    EXPECT_EQ(report.at("totals").at("pseudo_inverses"), pinvs);
    EXPECT_EQ(report.at("totals").at("edges_removed"), removed);
    EXPECT_GE(report.at("totals").at("elapsed_ms").get<std::int64_t>(), level_ms);
    EXPECT_GE(report.at("wall_ms").get<std::int64_t>(),
              report.at("totals").at("elapsed_ms").get<std::int64_t>());
    EXPECT_LE(pinvs, tests);

    EXPECT_EQ(report.at("result").at("levels_run"), report.at("levels").size());
    const std::string stop = report.at("result").at("stop_reason");
    EXPECT_TRUE(stop == "max-degree" || stop == "level-cap" || stop == "sample-size");
    // The edges file holds exactly result.edges lines.
    EXPECT_EQ(count_lines(read_text(prefix + ".edges")),
              report.at("result").at("edges").get<std::size_t>());
    // Nonadjacent-pair bookkeeping: removals plus survivors cover all pairs.
    EXPECT_EQ(removed + report.at("result").at("edges").get<std::uint64_t>(), 45u);
}

TEST(CliSkeleton, MaxLevelCapsTheRunAndLandsInTheReport) {
    const std::string& data = shared_dataset();
    const std::string prefix = temp_path("sk_capped");
    ASSERT_EQ(run_cli("skeleton --data " + data + " --max-level 0 --out " + prefix), 0);
    const nlohmann::json report = load_report(prefix);
    EXPECT_EQ(report.at("config").at("max_level"), 0);
    EXPECT_EQ(report.at("result").at("levels_run"), 1);
    EXPECT_EQ(report.at("result").at("stop_reason"), "level-cap");
}

TEST(CliSkeleton, WorkerCountComesFromFlagThenEnvThenHardware) {
    const std::string& data = shared_dataset();
    const std::string by_env = temp_path("sk_env");
    const std::string by_flag = temp_path("sk_flag");
    const std::string bad_env = temp_path("sk_badenv");
    ASSERT_EQ(run_cli("skeleton --data " + data + " --strategy set --out " + by_env,
                      "PCSTABLE_WORKERS=3 "),
              0);
    EXPECT_EQ(load_report(by_env).at("config").at("workers"), 3);
    ASSERT_EQ(run_cli("skeleton --data " + data + " --strategy set --workers 2 --out " + by_flag,
                      "PCSTABLE_WORKERS=3 "),
              0);
    EXPECT_EQ(load_report(by_flag).at("config").at("workers"), 2);
    ASSERT_EQ(run_cli("skeleton --data " + data + " --strategy set --out " + bad_env,
                      "PCSTABLE_WORKERS=banana "),
              0);
    EXPECT_GE(load_report(bad_env).at("config").at("workers").get<int>(), 1);
}

TEST(CliOrient, BuildsTheColliderCpdag) {
    const std::string edges = temp_path("orient_edges.txt");
    const std::string sepsets = temp_path("orient_sepsets.txt");
    const std::string out = temp_path("orient_out.txt");
    std::ofstream(edges) << "0 2\n1 2\n";
    std::ofstream(sepsets) << "0 1 :\n";
    ASSERT_EQ(run_cli("orient --skeleton " + edges + " --sepsets " + sepsets + " --out " + out),
              0);
    EXPECT_EQ(read_text(out), "0 > 2\n1 > 2\n");
}

TEST(CliOrient, EndToEndPipelineRuns) {
    const std::string& data = shared_dataset();
    const std::string prefix = temp_path("pipe");
    const std::string cpdag = temp_path("pipe_cpdag.txt");
    ASSERT_EQ(run_cli("skeleton --data " + data + " --out " + prefix), 0);
    ASSERT_EQ(run_cli("orient --skeleton " + prefix + ".edges --sepsets " + prefix +
                      ".sepsets --out " + cpdag),
              0);
    const pcstable::io::EdgeListData parsed = pcstable::io::read_edge_list(cpdag);
    const std::size_t skeleton_edges = count_lines(read_text(prefix + ".edges"));
    EXPECT_EQ(parsed.directed.size() + parsed.undirected.size(), skeleton_edges);
}

TEST(CliOrient, RejectsInconsistentInputs) {
    const std::string edges = temp_path("bad_orient_edges.txt");
    const std::string sepsets = temp_path("bad_orient_sepsets.txt");
    const std::string out = temp_path("bad_orient_out.txt");
    std::ofstream(edges) << "0 > 2\n";  // directed line in a skeleton
    std::ofstream(sepsets) << "0 1 :\n";
    EXPECT_EQ(run_cli("orient --skeleton " + edges + " --sepsets " + sepsets + " --out " + out),
              2);
    std::ofstream(edges, std::ios::trunc) << "0 1\n";
    std::ofstream(sepsets, std::ios::trunc) << "0 1 :\n";  // pair is still an edge
    EXPECT_EQ(run_cli("orient --skeleton " + edges + " --sepsets " + sepsets + " --out " + out),
              2);
    std::ofstream(sepsets, std::ios::trunc) << "0 2 : 0\n";  // endpoint inside the set
    EXPECT_EQ(run_cli("orient --skeleton " + edges + " --sepsets " + sepsets + " --out " + out),
              2);
}

TEST(CliExitCodes, DataErrorsExitTwo) {
    EXPECT_EQ(run_cli("skeleton --data " + temp_path("missing.csv") + " --out " +
                      temp_path("missing_out")),
              2);
    const std::string bad = temp_path("bad.csv");
    std::ofstream(bad) << "1,2\n3,nope\n5,6\n7,8\n";
    EXPECT_EQ(run_cli("skeleton --data " + bad + " --out " + temp_path("bad_out")), 2);
}

TEST(CliExitCodes, NumericalErrorsExitThree) {
    const std::string constant = temp_path("constant.csv");
    std::ofstream(constant) << "1,5\n2,5\n3,5\n4,5\n";  // second column has zero variance
    EXPECT_EQ(run_cli("skeleton --data " + constant + " --out " + temp_path("constant_out")),
              3);
}

TEST(CliBench, WritesTheExpectedGrid) {
    const std::string out = temp_path("bench.csv");
    ASSERT_EQ(run_cli("bench --spec \"10,0.3,200;12,0.2,150\" --strategies serial,set "
                      "--repeats 2 --seed 3 --out " +
                      out),
              0);
    const std::string text = read_text(out);
    EXPECT_EQ(count_lines(text), 1u + 2u * 2u * 2u);
    std::istringstream lines(text);
    std::string header;
    ASSERT_TRUE(std::getline(lines, header));
    EXPECT_EQ(header, pcstable::bench::kBenchCsvHeader);
    EXPECT_EQ(run_cli("bench --spec nonsense --out " + out), 2);
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    if (argc > 1) {
        g_cli = argv[1];
    } else if (const char* env = std::getenv("PCSTABLE_CLI")) {
        g_cli = env;
    }
    if (g_cli.empty()) {
        std::fprintf(stderr,
                     "usage: test_cli <path-to-cli-binary> (or set PCSTABLE_CLI)\n");
        return 1;
    }
    return RUN_ALL_TESTS();
}

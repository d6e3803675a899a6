#include "pcstable/bench.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace pcstable;

namespace {

std::string temp_path(const std::string& name) { return testing::TempDir() + name; }

}  // namespace

TEST(BenchSpec, ParsesSingleAndMultipleCases) {
    const auto one = bench::parse_bench_spec("100,0.1,1000");
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].n, 100);
    EXPECT_EQ(one[0].density, 0.1);
    EXPECT_EQ(one[0].m, 1000);
    const auto three = bench::parse_bench_spec("10,0.5,50;20,0.25,60;30,0.75,70");
    ASSERT_EQ(three.size(), 3u);
    EXPECT_EQ(three[2].n, 30);
    EXPECT_EQ(three[2].m, 70);
    // Trailing separator and spaces are tolerated.
    EXPECT_EQ(bench::parse_bench_spec("10, 0.5, 50;").size(), 1u);
}

TEST(BenchSpec, RejectsMalformedSpecs) {
    for (const char* spec : {"", ";", "10,0.5", "10,0.5,50,60", "x,0.5,50", "10,0.5,x",
                             "1,0.5,50", "10,0.0,50", "10,1.0,50", "10,0.5,3"}) {
        EXPECT_THROW(bench::parse_bench_spec(spec), std::invalid_argument) << spec;
    }
}

TEST(RunBench, ProducesOneRowPerCell) {
    const auto cases = bench::parse_bench_spec("12,0.3,200;16,0.2,200");
    const std::vector<Strategy> strategies{Strategy::Serial, Strategy::SetShared};
    SkeletonConfig cfg;
    const auto rows = bench::run_bench(cases, strategies, 2, 5, cfg);
    ASSERT_EQ(rows.size(), 2u * 2u * 2u);
    // Rows come out case-major, then strategy, then repeat.
    EXPECT_EQ(rows[0].bench_case.n, 12);
    EXPECT_EQ(rows[0].strategy, Strategy::Serial);
    EXPECT_EQ(rows[0].repeat, 0);
    EXPECT_EQ(rows[1].repeat, 1);
    EXPECT_EQ(rows[2].strategy, Strategy::SetShared);
    EXPECT_EQ(rows[4].bench_case.n, 16);
    for (const auto& row : rows) {
        EXPECT_GE(row.levels.size(), 1u);
        EXPECT_GE(row.skeleton_time.count(), 0);
    }
}

TEST(RunBench, RepeatsAndStrategiesSeeIdenticalInputs) {
    const auto cases = bench::parse_bench_spec("14,0.3,300");
    const std::vector<Strategy> strategies{Strategy::Serial, Strategy::EdgeParallel,
                                           Strategy::SetShared};
    SkeletonConfig cfg;
    cfg.worker_count = 2;
    const auto rows = bench::run_bench(cases, strategies, 2, 99, cfg);
    ASSERT_EQ(rows.size(), 6u);
    for (const auto& row : rows) {
        EXPECT_EQ(row.seed, rows[0].seed);
        // Identical data, identical decisions: the skeleton summary of every
        // cell must match the serial reference cell.
        EXPECT_EQ(row.final_edges, rows[0].final_edges);
        EXPECT_EQ(row.levels.size(), rows[0].levels.size());
        EXPECT_EQ(row.total_edges_removed(), rows[0].total_edges_removed());
        EXPECT_EQ(row.stop_reason, rows[0].stop_reason);
    }
    // Single-worker repeats rerun the same work, so every count agrees
    // exactly. Multi-worker cells may shift a few tests between repeats when
    // workers race to claim a dying edge, so only decisions are compared.
    EXPECT_EQ(rows[0].total_ci_tests(), rows[1].total_ci_tests());
    EXPECT_EQ(rows[0].total_pseudo_inverses(), rows[1].total_pseudo_inverses());
    EXPECT_EQ(rows[4].total_edges_removed(), rows[5].total_edges_removed());
    EXPECT_EQ(rows[0].workers, 1);
    EXPECT_EQ(rows[2].workers, 2);
}

TEST(RunBench, CaseSeedsDependOnlyOnBaseSeedAndPosition) {
    const auto cases = bench::parse_bench_spec("12,0.3,200;12,0.3,200");
    const std::vector<Strategy> strategies{Strategy::Serial};
    SkeletonConfig cfg;
    const auto rows = bench::run_bench(cases, strategies, 1, 42, cfg);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_NE(rows[0].seed, rows[1].seed);  // same case shape, different input
    const auto again = bench::run_bench(cases, strategies, 1, 42, cfg);
    EXPECT_EQ(again[0].total_ci_tests(), rows[0].total_ci_tests());
    EXPECT_EQ(again[1].final_edges, rows[1].final_edges);
}

TEST(RunBench, RejectsBadArguments) {
    const auto cases = bench::parse_bench_spec("12,0.3,200");
    SkeletonConfig cfg;
    EXPECT_THROW(bench::run_bench(cases, {Strategy::Serial}, 0, 1, cfg),
                 std::invalid_argument);
    EXPECT_THROW(bench::run_bench(cases, {}, 1, 1, cfg), std::invalid_argument);
}

TEST(BenchCsv, HeaderAndBreakdownsMatchTotals) {
    const auto cases = bench::parse_bench_spec("12,0.3,200");
    const std::vector<Strategy> strategies{Strategy::Serial, Strategy::SetShared};
    SkeletonConfig cfg;
    const auto rows = bench::run_bench(cases, strategies, 1, 7, cfg);
    const std::string path = temp_path("bench.csv");
    bench::write_bench_csv(path, rows);

    std::ifstream in(path);
    ASSERT_TRUE(in.good());
    std::string line;
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, bench::kBenchCsvHeader);
    std::size_t data_lines = 0;
    while (std::getline(in, line)) {
        ASSERT_FALSE(line.empty());
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        ASSERT_EQ(cells.size(), 20u);
        const auto sum_column = [&](const std::string& joined) {
            std::uint64_t total = 0;
            std::stringstream parts(joined);
            std::string piece;
            while (std::getline(parts, piece, ';')) total += std::stoull(piece);
            return total;
        };
        EXPECT_EQ(sum_column(cells[16]), std::stoull(cells[13]));  // ci_tests
        EXPECT_EQ(sum_column(cells[17]), std::stoull(cells[14]));  // pseudo_inverses
        EXPECT_EQ(sum_column(cells[18]), std::stoull(cells[15]));  // edges_removed
        const auto breakdown_length = static_cast<std::uint64_t>(
            std::count(cells[16].begin(), cells[16].end(), ';') + 1);
        EXPECT_EQ(std::stoull(cells[7]), breakdown_length);  // levels_run
        ++data_lines;
    }
    EXPECT_EQ(data_lines, rows.size());
}

TEST(BenchCsv, SharedInverseStrategyReportsFewerInverses) {
    const auto cases = bench::parse_bench_spec("20,0.4,400");
    const std::vector<Strategy> strategies{Strategy::EdgeParallel, Strategy::SetShared};
    SkeletonConfig cfg;
    const auto rows = bench::run_bench(cases, strategies, 1, 3, cfg);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].strategy, Strategy::EdgeParallel);
    EXPECT_EQ(rows[1].strategy, Strategy::SetShared);
    EXPECT_LT(rows[1].total_pseudo_inverses(), rows[0].total_pseudo_inverses());
    EXPECT_LE(rows[1].total_pseudo_inverses(), rows[1].total_ci_tests());
    // Level 0 never inverts anything.
    EXPECT_EQ(rows[0].levels[0].pseudo_inverses, 0u);
    EXPECT_EQ(rows[1].levels[0].pseudo_inverses, 0u);
}

#pragma once

#include "pcstable/core.hpp"
#include "pcstable/datagen.hpp"
#include "pcstable/io.hpp"
#include "pcstable/skeleton.hpp"
#include "pcstable/stats.hpp"

#include <chrono>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcstable::bench {

struct BenchCase {
    Index n = 0;
    double density = 0.0;
    Index m = 0;
};

/// One benchmark execution: a (case, strategy, repeat) cell. Repeats of a
/// cell rerun the same seeded input, so their decisions (edges removed, final
/// edges, levels, stop reason) agree exactly; with more than one worker the
/// test counts can shift slightly between repeats when workers race to claim
/// a dying edge.
struct BenchRow {
    BenchCase bench_case;
    std::uint64_t seed = 0;
    Strategy strategy = Strategy::Serial;
    int workers = 1;
    int repeat = 0;
    std::vector<LevelStats> levels;
    StopReason stop_reason = StopReason::MaxDegreeReached;
    std::size_t final_edges = 0;
    std::chrono::nanoseconds correlation_time{0};
    std::chrono::nanoseconds skeleton_time{0};

    std::uint64_t total_ci_tests() const {
        std::uint64_t t = 0;
        for (const auto& l : levels) t += l.ci_tests;
        return t;
    }
    std::uint64_t total_pseudo_inverses() const {
        std::uint64_t t = 0;
        for (const auto& l : levels) t += l.pseudo_inverses;
        return t;
    }
    std::uint64_t total_edges_removed() const {
        std::uint64_t t = 0;
        for (const auto& l : levels) t += l.edges_removed;
        return t;
    }
};

/// Parses "n,d,m" triples separated by ';', e.g. "100,0.1,1000;200,0.1,1000".
inline std::vector<BenchCase> parse_bench_spec(const std::string& spec) {
    std::vector<BenchCase> cases;
    for (std::string_view triple : io::detail::split(spec, ';')) {
        if (triple.empty()) continue;
        const auto parts = io::detail::split(triple, ',');
        BenchCase c;
        double n_val = 0;
        double m_val = 0;
        if (parts.size() != 3 || !io::detail::parse_double(parts[0], n_val) ||
            !io::detail::parse_double(parts[1], c.density) ||
            !io::detail::parse_double(parts[2], m_val))
            throw std::invalid_argument("bench spec: expected 'n,d,m[;n,d,m...]', got '" +
                                        spec + "'");
        c.n = static_cast<Index>(n_val);
        c.m = static_cast<Index>(m_val);
        if (c.n < 2 || c.m < 4 || !(c.density > 0.0 && c.density < 1.0))
            throw std::invalid_argument("bench spec: need n >= 2, m >= 4, d in (0, 1)");
        cases.push_back(c);
    }
    if (cases.empty()) throw std::invalid_argument("bench spec: no cases given");
    return cases;
}

/// Runs every (case, strategy, repeat) cell. Each case's input is generated
/// once from a seed derived only from the base seed and the case index, so
/// every strategy and repeat of a case sees identical data.
inline std::vector<BenchRow> run_bench(const std::vector<BenchCase>& cases,
                                       const std::vector<Strategy>& strategies, int repeats,
                                       std::uint64_t base_seed, const SkeletonConfig& base_cfg) {
    if (repeats < 1) throw std::invalid_argument("run_bench: need repeats >= 1");
    if (strategies.empty()) throw std::invalid_argument("run_bench: need at least one strategy");
    std::vector<BenchRow> rows;
    rows.reserve(cases.size() * strategies.size() * static_cast<std::size_t>(repeats));
    for (std::size_t case_idx = 0; case_idx < cases.size(); ++case_idx) {
        const BenchCase& c = cases[case_idx];
        const std::uint64_t case_seed = base_seed + 7919 * case_idx;
        const WeightedDag dag = random_dag(c.n, c.density, case_seed);
        const DataMatrix data = sample_linear_gaussian(dag, c.m, case_seed + 1);
        for (Strategy strategy : strategies) {
            SkeletonConfig cfg = base_cfg;
            cfg.strategy = strategy;
            for (int repeat = 0; repeat < repeats; ++repeat) {
                BenchRow row;
                row.bench_case = c;
                row.seed = case_seed;
                row.strategy = strategy;
                row.workers = strategy == Strategy::Serial ? 1 : cfg.worker_count;
                row.repeat = repeat;
                const auto t0 = std::chrono::steady_clock::now();
                const CorrelationMatrix corr = stats::compute_correlation(data);
                const auto t1 = std::chrono::steady_clock::now();
                SkeletonResult result = run_pc_stable(corr, c.m, cfg);
                const auto t2 = std::chrono::steady_clock::now();
                row.correlation_time = t1 - t0;
                row.skeleton_time = t2 - t1;
                row.levels = std::move(result.levels);
                row.stop_reason = result.stop_reason;
                row.final_edges = result.skeleton.edge_count();
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

namespace detail {

inline std::int64_t to_ms(std::chrono::nanoseconds ns) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(ns).count();
}

template <typename Fn>
std::string joined_levels(const std::vector<LevelStats>& levels, Fn&& per_level) {
    std::string out;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (i > 0) out.push_back(';');
        out += std::to_string(per_level(levels[i]));
    }
    return out;
}

}  // namespace detail

inline constexpr const char* kBenchCsvHeader =
    "n,d,m,seed,strategy,workers,repeat,levels_run,stop_reason,final_edges,"
    "correlation_ms,skeleton_ms,total_ms,ci_tests,pseudo_inverses,edges_removed,"
    "level_ci_tests,level_pseudo_inverses,level_edges_removed,level_ms";

/// One CSV row per bench cell; the level_* columns carry per-level values
/// joined with ';' in level order, so each breakdown can be checked against
/// the row's totals.
inline void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
    std::ofstream out = io::detail::open_for_write(path);
    out << kBenchCsvHeader << '\n';
    for (const BenchRow& row : rows) {
        out << row.bench_case.n << ',' << io::detail::format_double(row.bench_case.density)
            << ',' << row.bench_case.m << ',' << row.seed << ',' << to_string(row.strategy)
            << ',' << row.workers << ',' << row.repeat << ',' << row.levels.size() << ','
            << to_string(row.stop_reason) << ',' << row.final_edges << ','
            << detail::to_ms(row.correlation_time) << ',' << detail::to_ms(row.skeleton_time)
            << ',' << detail::to_ms(row.correlation_time + row.skeleton_time) << ','
            << row.total_ci_tests() << ',' << row.total_pseudo_inverses() << ','
            << row.total_edges_removed() << ','
            << detail::joined_levels(row.levels, [](const LevelStats& l) { return l.ci_tests; })
            << ','
            << detail::joined_levels(row.levels,
                                     [](const LevelStats& l) { return l.pseudo_inverses; })
            << ','
            << detail::joined_levels(row.levels,
                                     [](const LevelStats& l) { return l.edges_removed; })
            << ','
            << detail::joined_levels(
                   row.levels, [](const LevelStats& l) { return detail::to_ms(l.elapsed); })
            << '\n';
    }
    if (!out) throw io::ParseError("failed writing: " + path);
}

}  // namespace pcstable::bench

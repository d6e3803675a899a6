#pragma once

#include "pcstable/comb.hpp"
#include "pcstable/core.hpp"
#include "pcstable/rng.hpp"
#include "pcstable/stats.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace pcstable {

enum class StopReason { MaxDegreeReached, LevelCapReached, SampleSizeExhausted };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::MaxDegreeReached: return "max-degree";
        case StopReason::LevelCapReached: return "level-cap";
        case StopReason::SampleSizeExhausted: return "sample-size";
    }
    return "?";
}

struct SkeletonResult {
    AdjacencyMatrix skeleton;
    SeparationSets sepsets;
    std::vector<LevelStats> levels;
    StopReason stop_reason;

    int levels_run() const { return static_cast<int>(levels.size()); }
};

/// One schedulable tile of a level: a row of the snapshot plus either a block
/// of edge positions (edge-parallel) or a conditioning-set group (set-shared).
struct WorkUnit {
    Index row = 0;
    Index chunk = 0;
};

/// True when a unit provably has no work at this level: the row has fewer
/// than ell + 1 neighbors (no edge in it admits a conditioning set of size
/// ell), or the chunk starts past the row's last edge (edge-parallel), or
/// past the row's last combination rank (set-shared). Units are laid out on a
/// uniform grid sized by the widest row, so narrow rows hit these early-outs.
inline bool should_skip_unit(Index row_width, int ell, Index chunk, Strategy strategy,
                             const SkeletonConfig& cfg) {
    if (ell < 0 || chunk < 0 || row_width < 0)
        throw std::invalid_argument("should_skip_unit: negative argument");
    if (row_width < ell + 1) return true;
    switch (strategy) {
        case Strategy::EdgeParallel:
            return static_cast<std::uint64_t>(chunk) * cfg.edges_per_unit >=
                   static_cast<std::uint64_t>(row_width);
        case Strategy::SetShared:
            return static_cast<std::uint64_t>(chunk) * cfg.unit_width >=
                   comb::binomial(row_width, ell);
        case Strategy::Serial:
            return false;
    }
    return false;
}

namespace detail {

/// Shared state for one level. Tests draw candidate sets from the frozen
/// snapshot; removals land in the live graph, so edges removed during this
/// level never shrink another test's candidate sets until the next level.
struct LevelContext {
    const CorrelationMatrix& c;
    const CompactedAdjacency& snapshot;
    AdjacencyMatrix& graph;
    SeparationSets& sepsets;
    double tau;
    int ell;
    const SkeletonConfig& cfg;
};

/// Runs fn(worker_id, unit) over every unit with `workers` threads pulling
/// from a shared atomic cursor. A single worker runs inline on the calling
/// thread. The first exception thrown by any worker is rethrown after join.
template <typename Fn>
void run_units(std::span<const WorkUnit> units, int workers, Fn&& fn) {
    if (workers <= 1) {
        for (const WorkUnit& unit : units) fn(0, unit);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&](int worker_id) {
        try {
            while (!failed.load(std::memory_order_relaxed)) {
                const std::size_t idx = cursor.fetch_add(1, std::memory_order_relaxed);
                if (idx >= units.size()) return;
                fn(worker_id, units[idx]);
            }
        } catch (...) {
            std::scoped_lock lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            failed.store(true, std::memory_order_relaxed);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

/// Clears the edge and records its separating set. Returns false without
/// recording anything when another worker removed the edge first, so each
/// removal is counted exactly once across workers.
inline bool claim_removal(AdjacencyMatrix& graph, SeparationSets& sepsets, Index i, Index j,
                          std::span<const Index> set, LevelStats& stats) {
    if (!graph.clear_edge(i, j)) return false;
    sepsets.store(i, j, set);
    ++stats.edges_removed;
    return true;
}

/// Tests edge (i, row[p]) against every size-ell subset of row minus
/// position p, in ascending rank order, stopping at the first separating set
/// or as soon as the edge dies. Rank 0 is unranked once; later ranks advance
/// by successor stepping. Shared by the serial and edge-parallel strategies.
inline void test_edge_over_sets(LevelContext& ctx, Index i, std::span<const Index> row, Index p,
                                stats::CiWorkspace& ws, LevelStats& tally) {
    const Index j = row[p];
    const Index width = static_cast<Index>(row.size());
    const int ell = ctx.ell;
    const std::uint64_t total = comb::binomial(width - 1, ell);
    ws.set.resize(static_cast<std::size_t>(ell));
    ws.positions.resize(static_cast<std::size_t>(ell));
    comb::unrank_positions_into(width - 1, 0, ws.positions);
    for (std::uint64_t t = 0;;) {
        if (!ctx.graph.at(i, j)) return;
        for (int k = 0; k < ell; ++k) {
            const Index pos = ws.positions[k];
            ws.set[k] = row[pos >= p ? pos + 1 : pos];
        }
        const stats::CiDecision d = stats::ci_test(ctx.c, i, j, ws.set, ctx.tau, ws);
        ++tally.ci_tests;
        ++tally.pseudo_inverses;
        if (d.independent) {
            claim_removal(ctx.graph, ctx.sepsets, i, j, ws.set, tally);
            return;
        }
        if (++t >= total) return;
        comb::next_combination(ws.positions, width - 1);
    }
}

inline void run_edge_parallel_unit(LevelContext& ctx, const WorkUnit& unit,
                                   stats::CiWorkspace& ws, LevelStats& tally) {
    const auto row = ctx.snapshot.row(unit.row);
    const Index width = static_cast<Index>(row.size());
    if (should_skip_unit(width, ctx.ell, unit.chunk, Strategy::EdgeParallel, ctx.cfg)) return;
    const Index begin = unit.chunk * ctx.cfg.edges_per_unit;
    const Index end = std::min<Index>(begin + ctx.cfg.edges_per_unit, width);
    for (Index p = begin; p < end; ++p) test_edge_over_sets(ctx, unit.row, row, p, ws, tally);
}

/// Tests every still-live edge of the row against the conditioning set held
/// in ws.positions. The set's correlation block is inverted at most once, on
/// the first live target, then reused for every other target of the set.
inline void test_set_over_row(LevelContext& ctx, Index i, std::span<const Index> row,
                              stats::CiWorkspace& ws, LevelStats& tally) {
    const Index width = static_cast<Index>(row.size());
    const int ell = ctx.ell;
    bool have_inverse = false;
    int next_member = 0;
    for (Index p = 0; p < width; ++p) {
        if (next_member < ell && ws.positions[next_member] == p) {
            ++next_member;
            continue;
        }
        const Index j = row[p];
        if (!ctx.graph.at(i, j)) continue;
        if (!have_inverse) {
            for (int k = 0; k < ell; ++k) ws.set[k] = row[ws.positions[k]];
            stats::detail::fill_m2(ctx.c, ws.set, ws.m2);
            stats::pseudo_inverse_into(ws.m2, ws.pinv, ws.m2_inv);
            ++tally.pseudo_inverses;
            have_inverse = true;
        }
        const stats::CiDecision d =
            stats::ci_test_with_inverse(ctx.c, i, j, ws.set, ws.m2_inv, ctx.tau, ws);
        ++tally.ci_tests;
        if (d.independent) claim_removal(ctx.graph, ctx.sepsets, i, j, ws.set, tally);
    }
}

inline void run_set_shared_unit(LevelContext& ctx, const WorkUnit& unit, stats::CiWorkspace& ws,
                                LevelStats& tally) {
    const auto row = ctx.snapshot.row(unit.row);
    const Index width = static_cast<Index>(row.size());
    if (should_skip_unit(width, ctx.ell, unit.chunk, Strategy::SetShared, ctx.cfg)) return;
    const std::uint64_t total = comb::binomial(width, ctx.ell);
    const std::uint64_t band = static_cast<std::uint64_t>(ctx.cfg.unit_width);
    const std::uint64_t stride = band * static_cast<std::uint64_t>(ctx.cfg.set_groups);
    ws.set.resize(static_cast<std::size_t>(ctx.ell));
    ws.positions.resize(static_cast<std::size_t>(ctx.ell));
    for (std::uint64_t band_start = static_cast<std::uint64_t>(unit.chunk) * band;
         band_start < total; band_start += stride) {
        const std::uint64_t band_end = std::min(band_start + band, total);
        comb::unrank_positions_into(width, band_start, ws.positions);
        for (std::uint64_t t = band_start;;) {
            test_set_over_row(ctx, unit.row, row, ws, tally);
            if (++t >= band_end) break;
            comb::next_combination(ws.positions, width);
        }
    }
}

inline void shuffle_units(std::vector<WorkUnit>& units, std::uint64_t seed) {
    Xoshiro256PlusPlus rng(seed);
    for (std::size_t a = units.size(); a > 1; --a)
        std::swap(units[a - 1], units[rng.next() % a]);
}

/// Builds the level's unit grid, runs it on worker threads with per-worker
/// scratch and counters, and returns the merged counters.
template <typename UnitFn>
LevelStats run_level_units(LevelContext& ctx, Index chunks_per_row, UnitFn&& unit_fn) {
    const Index n = ctx.snapshot.size();
    std::vector<WorkUnit> units;
    units.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(chunks_per_row));
    for (Index i = 0; i < n; ++i)
        for (Index chunk = 0; chunk < chunks_per_row; ++chunk) units.push_back({i, chunk});
    if (ctx.cfg.schedule_seed)
        shuffle_units(units, *ctx.cfg.schedule_seed + static_cast<std::uint64_t>(ctx.ell));
    const int workers = ctx.cfg.worker_count;
    std::vector<stats::CiWorkspace> scratch(static_cast<std::size_t>(workers));
    std::vector<LevelStats> counters(static_cast<std::size_t>(workers));
    run_units(units, workers, [&](int w, const WorkUnit& unit) {
        unit_fn(ctx, unit, scratch[static_cast<std::size_t>(w)],
                counters[static_cast<std::size_t>(w)]);
    });
    LevelStats merged;
    merged.level = ctx.ell;
    for (const LevelStats& s : counters) {
        merged.ci_tests += s.ci_tests;
        merged.pseudo_inverses += s.pseudo_inverses;
        merged.edges_removed += s.edges_removed;
    }
    return merged;
}

}  // namespace detail

/// Level 0: one unconditional test per unordered pair, exactly
/// n (n - 1) / 2 tests, removals get the empty separating set.
inline LevelStats run_level_zero(const CorrelationMatrix& c, double tau0, AdjacencyMatrix& graph,
                                 SeparationSets& sepsets, int workers) {
    const Index n = graph.size();
    if (sepsets.size() != n) throw std::invalid_argument("run_level_zero: size mismatch");
    std::vector<WorkUnit> units;
    units.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) units.push_back({i, 0});
    std::vector<stats::CiWorkspace> scratch(static_cast<std::size_t>(std::max(workers, 1)));
    std::vector<LevelStats> counters(scratch.size());
    detail::run_units(units, workers, [&](int w, const WorkUnit& unit) {
        auto& ws = scratch[static_cast<std::size_t>(w)];
        auto& tally = counters[static_cast<std::size_t>(w)];
        for (Index j = unit.row + 1; j < n; ++j) {
            const stats::CiDecision d = stats::ci_test(c, unit.row, j, {}, tau0, ws);
            ++tally.ci_tests;
            if (d.independent) detail::claim_removal(graph, sepsets, unit.row, j, {}, tally);
        }
    });
    LevelStats merged;
    merged.level = 0;
    for (const LevelStats& s : counters) {
        merged.ci_tests += s.ci_tests;
        merged.pseudo_inverses += s.pseudo_inverses;
        merged.edges_removed += s.edges_removed;
    }
    return merged;
}

/// Reference implementation of one level at ell >= 1: a plain nested loop
/// over rows, edges, and candidate sets, single threaded.
inline LevelStats run_level_serial(const CorrelationMatrix& c, const CompactedAdjacency& snapshot,
                                   AdjacencyMatrix& graph, SeparationSets& sepsets, double tau,
                                   int ell, const SkeletonConfig& cfg) {
    if (ell < 1) throw std::invalid_argument("run_level_serial: need ell >= 1");
    detail::LevelContext ctx{c, snapshot, graph, sepsets, tau, ell, cfg};
    stats::CiWorkspace ws;
    LevelStats tally;
    tally.level = ell;
    for (Index i = 0; i < snapshot.size(); ++i) {
        const auto row = snapshot.row(i);
        if (static_cast<Index>(row.size()) < ell + 1) continue;
        for (Index p = 0; p < static_cast<Index>(row.size()); ++p)
            detail::test_edge_over_sets(ctx, i, row, p, ws, tally);
    }
    return tally;
}

/// Edge-parallel level at ell >= 1: the grid is rows x edge blocks of
/// edges_per_unit edges; each edge enumerates its own candidate sets.
inline LevelStats run_level_edge_parallel(const CorrelationMatrix& c,
                                          const CompactedAdjacency& snapshot,
                                          AdjacencyMatrix& graph, SeparationSets& sepsets,
                                          double tau, int ell, const SkeletonConfig& cfg) {
    if (ell < 1) throw std::invalid_argument("run_level_edge_parallel: need ell >= 1");
    detail::LevelContext ctx{c, snapshot, graph, sepsets, tau, ell, cfg};
    const Index chunks =
        (snapshot.max_width() + cfg.edges_per_unit - 1) / cfg.edges_per_unit;
    return detail::run_level_units(ctx, chunks, detail::run_edge_parallel_unit);
}

/// Set-shared level at ell >= 1: the grid is rows x set_groups groups; each
/// group scans its share of the row's conditioning sets in unit_width bands
/// and amortizes one correlation-block inverse per set across the whole row.
inline LevelStats run_level_set_shared(const CorrelationMatrix& c,
                                       const CompactedAdjacency& snapshot, AdjacencyMatrix& graph,
                                       SeparationSets& sepsets, double tau, int ell,
                                       const SkeletonConfig& cfg) {
    if (ell < 1) throw std::invalid_argument("run_level_set_shared: need ell >= 1");
    detail::LevelContext ctx{c, snapshot, graph, sepsets, tau, ell, cfg};
    return detail::run_level_units(ctx, static_cast<Index>(cfg.set_groups),
                                   detail::run_set_shared_unit);
}

/// PC-stable skeleton over a correlation matrix with sample_count samples
/// behind it. Starts from the complete graph; level ell tests each remaining
/// edge against size-ell conditioning sets drawn from the level-start
/// snapshot. Stops at the first level that no row can serve
/// (max row width - 1 < ell), past the configured level cap, or when the
/// sample size cannot support the level's threshold.
inline SkeletonResult run_pc_stable(const CorrelationMatrix& c, Index sample_count,
                                    const SkeletonConfig& cfg) {
    cfg.validate();
    if (sample_count < 4)
        throw std::invalid_argument("run_pc_stable: need at least 4 samples");
    const Index n = c.size();
    AdjacencyMatrix graph = AdjacencyMatrix::complete(n);
    SeparationSets sepsets(n);
    std::vector<LevelStats> levels;
    StopReason reason = StopReason::MaxDegreeReached;
    const int workers = cfg.strategy == Strategy::Serial ? 1 : cfg.worker_count;
    for (int ell = 0;; ++ell) {
        if (cfg.max_level && ell > *cfg.max_level) {
            reason = StopReason::LevelCapReached;
            break;
        }
        double tau;
        try {
            tau = stats::threshold_tau(cfg.alpha, sample_count, ell);
        } catch (const LevelUnreachableError&) {
            reason = StopReason::SampleSizeExhausted;
            break;
        }
        const auto start = std::chrono::steady_clock::now();
        LevelStats level_stats;
        if (ell == 0) {
            level_stats = run_level_zero(c, tau, graph, sepsets, workers);
        } else {
            const CompactedAdjacency snapshot = compact(graph);
            if (snapshot.max_width() - 1 < ell) {
                reason = StopReason::MaxDegreeReached;
                break;
            }
            switch (cfg.strategy) {
                case Strategy::Serial:
                    level_stats = run_level_serial(c, snapshot, graph, sepsets, tau, ell, cfg);
                    break;
                case Strategy::EdgeParallel:
                    level_stats = run_level_edge_parallel(c, snapshot, graph, sepsets, tau, ell, cfg);
                    break;
                case Strategy::SetShared:
                    level_stats = run_level_set_shared(c, snapshot, graph, sepsets, tau, ell, cfg);
                    break;
            }
        }
        level_stats.level = ell;
        level_stats.elapsed = std::chrono::steady_clock::now() - start;
        levels.push_back(level_stats);
    }
    return SkeletonResult{std::move(graph), std::move(sepsets), std::move(levels), reason};
}

}  // namespace pcstable

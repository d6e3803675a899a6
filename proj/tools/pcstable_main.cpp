#include "pcstable/pcstable.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using nlohmann::json;
using namespace pcstable;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

/// Default worker count: PCSTABLE_WORKERS if set, else the hardware thread
/// count, at least 1.
int default_workers() {
    if (const char* env = std::getenv("PCSTABLE_WORKERS")) {
        try {
            const int v = std::stoi(env);
            if (v >= 1) return v;
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring invalid PCSTABLE_WORKERS='" << env << "'\n";
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

Strategy parse_strategy(const std::string& name) {
    if (name == "serial") return Strategy::Serial;
    if (name == "edge") return Strategy::EdgeParallel;
    if (name == "set") return Strategy::SetShared;
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

/// Parse-time check for the comma-separated strategy list.
const CLI::Validator kStrategyList(
    [](std::string& value) -> std::string {
        for (std::string_view name : io::detail::split(value, ','))
            if (!name.empty() && name != "serial" && name != "edge" && name != "set")
                return "unknown strategy '" + std::string(name) + "'";
        return {};
    },
    "comma list of serial|edge|set");

std::string hex_fingerprint(std::uint64_t value) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << value;
    return out.str();
}

std::int64_t to_ms(std::chrono::nanoseconds ns) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(ns).count();
}

struct GenArgs {
    Index n = 0;
    double density = 0.0;
    Index m = 0;
    std::uint64_t seed = 0;
    std::string out;
};

int run_gen(const GenArgs& args) {
    const WeightedDag dag = random_dag(args.n, args.density, args.seed);
    const DataMatrix data = sample_linear_gaussian(dag, args.m, args.seed + 1);
    io::write_data_csv(args.out, data);
    io::write_directed_edges(args.out + ".truth", dag.edges());
    std::cout << "wrote " << args.out << " (" << args.m << " samples x " << args.n
              << " variables) and " << args.out << ".truth (" << dag.edge_count()
              << " edges)\n";
    return kExitOk;
}

struct SkeletonArgs {
    std::string data_path;
    double alpha = 0.05;
    std::string strategy = "serial";
    int beta = 2;
    int gamma = 32;
    int theta = 64;
    int delta = 2;
    int workers = 1;
    std::optional<int> max_level;
    std::string out;
};

json levels_to_json(const std::vector<LevelStats>& levels) {
    json out = json::array();
    for (const LevelStats& l : levels) {
        out.push_back({{"level", l.level},
                       {"ci_tests", l.ci_tests},
                       {"pseudo_inverses", l.pseudo_inverses},
                       {"edges_removed", l.edges_removed},
                       {"elapsed_ms", to_ms(l.elapsed)}});
    }
    return out;
}

int run_skeleton(const SkeletonArgs& args) {
    SkeletonConfig cfg;
    cfg.alpha = args.alpha;
    cfg.strategy = parse_strategy(args.strategy);
    cfg.edges_per_unit = args.beta;
    cfg.workers_per_edge = args.gamma;
    cfg.unit_width = args.theta;
    cfg.set_groups = args.delta;
    cfg.worker_count = args.workers;
    cfg.max_level = args.max_level;
    cfg.validate();

    const auto t0 = std::chrono::steady_clock::now();
    const DataMatrix data = io::read_data_csv(args.data_path);
    const std::uint64_t checksum = io::fingerprint(data);
    const CorrelationMatrix corr = stats::compute_correlation(data);
    const SkeletonResult result = run_pc_stable(corr, data.sample_count(), cfg);
    const auto t1 = std::chrono::steady_clock::now();

    io::write_edge_list(args.out + ".edges", result.skeleton);
    io::write_sepsets(args.out + ".sepsets", result.sepsets);

    std::uint64_t total_tests = 0;
    std::uint64_t total_pinvs = 0;
    std::uint64_t total_removed = 0;
    std::chrono::nanoseconds total_elapsed{0};
    for (const LevelStats& l : result.levels) {
        total_tests += l.ci_tests;
        total_pinvs += l.pseudo_inverses;
        total_removed += l.edges_removed;
        total_elapsed += l.elapsed;
    }

    const json report = {
        {"command", "skeleton"},
        {"input",
         {{"path", args.data_path},
          {"n", data.variable_count()},
          {"m", data.sample_count()},
          {"fingerprint", hex_fingerprint(checksum)}}},
        {"config",
         {{"alpha", cfg.alpha},
          {"strategy", to_string(cfg.strategy)},
          {"beta", cfg.edges_per_unit},
          {"gamma", cfg.workers_per_edge},
          {"theta", cfg.unit_width},
          {"delta", cfg.set_groups},
          {"workers", cfg.worker_count},
          {"max_level", cfg.max_level ? json(*cfg.max_level) : json(nullptr)}}},
        {"levels", levels_to_json(result.levels)},
        {"totals",
         {{"ci_tests", total_tests},
          {"pseudo_inverses", total_pinvs},
          {"edges_removed", total_removed},
          {"elapsed_ms", to_ms(total_elapsed)}}},
        {"result",
         {{"edges", result.skeleton.edge_count()},
          {"levels_run", result.levels_run()},
          {"stop_reason", to_string(result.stop_reason)}}},
        {"wall_ms", to_ms(t1 - t0)}};
    std::ofstream report_out = io::detail::open_for_write(args.out + ".report.json");
    report_out << report.dump(2) << '\n';
    if (!report_out) throw io::ParseError("failed writing: " + args.out + ".report.json");

    std::cout << "skeleton: " << result.skeleton.edge_count() << " edges after "
              << result.levels_run() << " levels (stop: " << to_string(result.stop_reason)
              << ", " << total_tests << " tests)\n";
    return kExitOk;
}

struct OrientArgs {
    std::string skeleton_path;
    std::string sepsets_path;
    std::string out;
};

int run_orient(const OrientArgs& args) {
    const io::EdgeListData edges = io::read_edge_list(args.skeleton_path);
    if (!edges.directed.empty())
        throw io::ParseError(args.skeleton_path + ": skeleton edges must be undirected");
    const std::vector<io::SepsetRecord> sepset_records = io::read_sepsets(args.sepsets_path);
    Index n = edges.max_vertex + 1;
    for (const auto& rec : sepset_records) {
        n = std::max({n, rec.i + 1, rec.j + 1});
        for (Index s : rec.set) n = std::max(n, s + 1);
    }
    if (n < 2) throw io::ParseError("orient: inputs name fewer than two vertices");

    AdjacencyMatrix skeleton(n);
    for (const auto& [a, b] : edges.undirected) skeleton.set_edge(a, b);
    SeparationSets sepsets(n);
    for (const auto& rec : sepset_records) {
        if (skeleton.at(rec.i, rec.j))
            throw io::ParseError("orient: pair (" + std::to_string(rec.i) + ", " +
                                 std::to_string(rec.j) +
                                 ") has a separating set but is still an edge");
        for (Index s : rec.set)
            if (s == rec.i || s == rec.j)
                throw io::ParseError("orient: separating set of (" + std::to_string(rec.i) +
                                     ", " + std::to_string(rec.j) + ") contains an endpoint");
        sepsets.store(rec.i, rec.j, rec.set);
    }

    const MixedGraph cpdag = orient_skeleton(skeleton, sepsets);
    io::write_mixed_graph(args.out, cpdag);
    std::cout << "cpdag: " << cpdag.directed.size() << " directed, "
              << cpdag.undirected.size() << " undirected\n";
    return kExitOk;
}

struct BenchArgs {
    std::string spec;
    std::string strategies = "serial,edge,set";
    int repeats = 1;
    std::uint64_t seed = 0;
    std::string out;
    double alpha = 0.05;
    int workers = 1;
    std::optional<int> max_level;
};

int run_bench_cmd(const BenchArgs& args) {
    const std::vector<bench::BenchCase> cases = bench::parse_bench_spec(args.spec);
    std::vector<Strategy> strategies;
    for (std::string_view name : io::detail::split(args.strategies, ','))
        if (!name.empty()) strategies.push_back(parse_strategy(std::string(name)));
    SkeletonConfig cfg;
    cfg.alpha = args.alpha;
    cfg.worker_count = args.workers;
    cfg.max_level = args.max_level;
    cfg.validate();
    const std::vector<bench::BenchRow> rows =
        bench::run_bench(cases, strategies, args.repeats, args.seed, cfg);
    bench::write_bench_csv(args.out, rows);
    std::cout << "bench: " << rows.size() << " rows -> " << args.out << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "PC-stable causal skeleton discovery: data generation, skeleton search "
        "(serial, edge-parallel, or set-shared strategy), orientation, benchmarks"};
    app.require_subcommand(1);

    GenArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen", "Generate a linear-Gaussian dataset and its DAG");
    gen->add_option("--n", gen_args.n, "Variable count")->required()->check(CLI::Range(2, 1 << 20));
    gen->add_option("--d", gen_args.density, "Edge density in (0,1)")
        ->required()
        ->check(CLI::Range(1e-9, 1.0 - 1e-9));
    gen->add_option("--m", gen_args.m, "Sample count")->required()->check(CLI::Range(4, 1 << 30));
    gen->add_option("--seed", gen_args.seed, "RNG seed (default 0)");
    gen->add_option("--out", gen_args.out, "Output CSV path; truth edges go to <out>.truth")
        ->required();

    SkeletonArgs sk_args;
    sk_args.workers = default_workers();
    CLI::App* sk = app.add_subcommand("skeleton", "Discover the causal skeleton of a dataset");
    sk->add_option("--data", sk_args.data_path, "Input CSV (rows = samples)")->required();
    sk->add_option("--alpha", sk_args.alpha, "Significance level (default 0.05)")
        ->check(CLI::Range(1e-12, 1.0 - 1e-12));
    sk->add_option("--strategy", sk_args.strategy, "serial, edge, or set (default serial)")
        ->check(CLI::IsMember({"serial", "edge", "set"}));
    sk->add_option("--beta", sk_args.beta, "Edges per work unit, edge strategy (default 2)")
        ->check(CLI::PositiveNumber);
    sk->add_option("--gamma", sk_args.gamma, "Enumeration lanes per edge (default 32)")
        ->check(CLI::PositiveNumber);
    sk->add_option("--theta", sk_args.theta, "Ranks per band, set strategy (default 64)")
        ->check(CLI::PositiveNumber);
    sk->add_option("--delta", sk_args.delta, "Set groups per row, set strategy (default 2)")
        ->check(CLI::PositiveNumber);
    sk->add_option("--workers", sk_args.workers,
                   "Worker threads (default: PCSTABLE_WORKERS or hardware)")
        ->check(CLI::PositiveNumber);
    sk->add_option("--max-level", sk_args.max_level, "Highest level to run (inclusive)")
        ->check(CLI::NonNegativeNumber);
    sk->add_option("--out", sk_args.out,
                   "Output prefix; writes <out>.edges, <out>.sepsets, <out>.report.json")
        ->required();

    OrientArgs or_args;
    CLI::App* orient_cmd = app.add_subcommand("orient", "Orient a skeleton into a CPDAG");
    orient_cmd->add_option("--skeleton", or_args.skeleton_path, "Skeleton edge list")->required();
    orient_cmd->add_option("--sepsets", or_args.sepsets_path, "Separating sets file")->required();
    orient_cmd->add_option("--out", or_args.out, "Output CPDAG edge list")->required();

    BenchArgs bench_args;
    bench_args.workers = default_workers();
    CLI::App* bench_cmd = app.add_subcommand("bench", "Time the strategies on synthetic cases");
    bench_cmd->add_option("--spec", bench_args.spec, "Cases as 'n,d,m[;n,d,m...]'")->required();
    bench_cmd
        ->add_option("--strategies", bench_args.strategies,
                     "Comma list of serial,edge,set (default all)")
        ->capture_default_str()
        ->check(kStrategyList);
    bench_cmd->add_option("--repeats", bench_args.repeats, "Repeats per cell (default 1)")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--seed", bench_args.seed, "Base RNG seed (default 0)");
    bench_cmd->add_option("--out", bench_args.out, "Output CSV path")->required();
    bench_cmd->add_option("--alpha", bench_args.alpha, "Significance level (default 0.05)")
        ->check(CLI::Range(1e-12, 1.0 - 1e-12));
    bench_cmd->add_option("--workers", bench_args.workers,
                          "Worker threads for parallel strategies")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--max-level", bench_args.max_level, "Highest level to run (inclusive)")
        ->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return run_gen(gen_args);
        if (sk->parsed()) return run_skeleton(sk_args);
        if (orient_cmd->parsed()) return run_orient(or_args);
        if (bench_cmd->parsed()) return run_bench_cmd(bench_args);
        std::cerr << "no subcommand given\n";
        return kExitUsage;
    } catch (const io::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const ZeroVarianceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const DegenerateConditioningError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const LevelUnreachableError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::overflow_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

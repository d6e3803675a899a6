#pragma once

#include "pcstable/core.hpp"
#include "pcstable/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pcstable {

/// A DAG over vertices 0..n-1 whose edges all point from lower to higher
/// index: weights(i, j) != 0 means j causes i and requires j < i, so the
/// matrix is strictly lower triangular and index order is a topological
/// order.
struct WeightedDag {
    Index n = 0;
    double density = 0.0;
    std::uint64_t seed = 0;
    Eigen::MatrixXd weights;

    /// Edges as (cause, effect) pairs, ascending by effect then cause.
    std::vector<std::pair<Index, Index>> edges() const {
        std::vector<std::pair<Index, Index>> out;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < i; ++j)
                if (weights(i, j) != 0.0) out.push_back({j, i});
        return out;
    }

    std::size_t edge_count() const { return edges().size(); }
};

/// Samples a random DAG: each of the n (n - 1) / 2 lower-triangular slots
/// holds an edge independently with probability density, weighted uniformly
/// from [0.1, 1). Slots are visited row by row (effect i ascending, cause j
/// ascending within a row) with one Bernoulli draw each and one weight draw
/// per present edge, which pins the output for a given seed.
inline WeightedDag random_dag(Index n, double density, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("random_dag: need n >= 2");
    if (!(density > 0.0 && density < 1.0))
        throw std::invalid_argument("random_dag: density must lie in (0, 1)");
    WeightedDag dag;
    dag.n = n;
    dag.density = density;
    dag.seed = seed;
    dag.weights = Eigen::MatrixXd::Zero(n, n);
    Xoshiro256PlusPlus rng(seed);
    for (Index i = 1; i < n; ++i)
        for (Index j = 0; j < i; ++j)
            if (rng.bernoulli(density)) dag.weights(i, j) = rng.uniform(0.1, 1.0);
    return dag;
}

/// Draws m samples of the linear model V_i = sum_j weights(i, j) V_j + N_i
/// with independent standard normal noise. Samples are generated row by row
/// and variables in index (topological) order within a sample, one noise
/// draw per variable, which pins the output for a given seed.
inline DataMatrix sample_linear_gaussian(const WeightedDag& dag, Index m, std::uint64_t seed) {
    if (m < 4) throw std::invalid_argument("sample_linear_gaussian: need m >= 4");
    if (dag.n < 2 || dag.weights.rows() != dag.n || dag.weights.cols() != dag.n)
        throw std::invalid_argument("sample_linear_gaussian: malformed dag");
    for (Index i = 0; i < dag.n; ++i)
        for (Index j = i; j < dag.n; ++j)
            if (dag.weights(i, j) != 0.0)
                throw std::invalid_argument(
                    "sample_linear_gaussian: weights must be strictly lower triangular");
    Xoshiro256PlusPlus rng(seed);
    Eigen::MatrixXd x(m, dag.n);
    for (Index r = 0; r < m; ++r) {
        for (Index i = 0; i < dag.n; ++i) {
            double value = rng.normal();
            for (Index j = 0; j < i; ++j)
                if (dag.weights(i, j) != 0.0) value += dag.weights(i, j) * x(r, j);
            x(r, i) = value;
        }
    }
    return DataMatrix(std::move(x));
}

}  // namespace pcstable

#pragma once

#include "pcstable/core.hpp"

#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pcstable {

/// Partially directed graph produced by orientation. An edge is either in
/// directed (as an ordered (from, to) pair) or in undirected (normalized to
/// from < to), never both and never in both directions.
struct MixedGraph {
    Index n = 0;
    std::set<std::pair<Index, Index>> directed;
    std::set<std::pair<Index, Index>> undirected;

    bool has_directed(Index from, Index to) const { return directed.count({from, to}) > 0; }

    bool has_undirected(Index a, Index b) const {
        if (a > b) std::swap(a, b);
        return undirected.count({a, b}) > 0;
    }

    bool adjacent(Index a, Index b) const {
        return has_undirected(a, b) || has_directed(a, b) || has_directed(b, a);
    }

    friend bool operator==(const MixedGraph&, const MixedGraph&) = default;
};

/// Skeleton plus separating sets -> partially directed graph with the
/// unshielded colliders oriented. For every unshielded triple i - k - j the
/// triple votes i -> k and j -> k iff k is absent from the recorded
/// separating set of (i, j). Votes from all triples are collected first; an
/// edge voted in both directions is left undirected rather than oriented
/// arbitrarily, so the result does not depend on triple order.
inline MixedGraph find_v_structures(const AdjacencyMatrix& skeleton,
                                    const SeparationSets& sepsets) {
    const Index n = skeleton.size();
    if (sepsets.size() != n)
        throw std::invalid_argument("find_v_structures: skeleton and sepsets sizes differ");
    std::vector<std::vector<Index>> neighbors(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j && skeleton.at(i, j)) neighbors[static_cast<std::size_t>(i)].push_back(j);

    std::set<std::pair<Index, Index>> votes;
    for (Index k = 0; k < n; ++k) {
        const auto& around = neighbors[static_cast<std::size_t>(k)];
        for (std::size_t a = 0; a < around.size(); ++a) {
            for (std::size_t b = a + 1; b < around.size(); ++b) {
                const Index i = around[a];
                const Index j = around[b];
                if (skeleton.at(i, j)) continue;
                const std::vector<Index>* sep = sepsets.find(i, j);
                if (sep == nullptr)
                    throw std::invalid_argument(
                        "find_v_structures: pair (" + std::to_string(i) + ", " +
                        std::to_string(j) + ") is nonadjacent but has no separating set");
                bool contains_k = false;
                for (Index s : *sep) contains_k |= (s == k);
                if (!contains_k) {
                    votes.insert({i, k});
                    votes.insert({j, k});
                }
            }
        }
    }

    MixedGraph g;
    g.n = n;
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if (!skeleton.at(i, j)) continue;
            const bool fwd = votes.count({i, j}) > 0;
            const bool rev = votes.count({j, i}) > 0;
            if (fwd && !rev)
                g.directed.insert({i, j});
            else if (rev && !fwd)
                g.directed.insert({j, i});
            else
                g.undirected.insert({i, j});
        }
    }
    return g;
}

namespace detail {

/// Rule 1: c -> a, a - b, c and b nonadjacent. Orienting a - b as b -> a
/// would create a new unshielded collider at a, so orient a -> b.
inline bool meek_rule_1(const MixedGraph& g, Index a, Index b) {
    for (const auto& [c, to] : g.directed) {
        if (to != a || c == b) continue;
        if (!g.adjacent(c, b)) return true;
    }
    return false;
}

/// Rule 2: a -> c -> b with a - b. Orienting b -> a would close a directed
/// cycle, so orient a -> b.
inline bool meek_rule_2(const MixedGraph& g, Index a, Index b) {
    for (const auto& [from, c] : g.directed) {
        if (from != a) continue;
        if (g.has_directed(c, b)) return true;
    }
    return false;
}

/// Rule 3: a - c -> b and a - d -> b with c, d nonadjacent and a - b.
/// Orienting b -> a would force both c -> a and d -> a (rule 2), creating a
/// new collider at a, so orient a -> b.
inline bool meek_rule_3(const MixedGraph& g, Index a, Index b) {
    std::vector<Index> into_b;
    for (const auto& [c, to] : g.directed)
        if (to == b && g.has_undirected(a, c)) into_b.push_back(c);
    for (std::size_t x = 0; x < into_b.size(); ++x)
        for (std::size_t y = x + 1; y < into_b.size(); ++y)
            if (!g.adjacent(into_b[x], into_b[y])) return true;
    return false;
}

/// Rule 4: a - b, a adjacent to c, c -> d -> b, c and b nonadjacent.
/// Orienting b -> a would, through the chain, force a new unshielded
/// collider or a cycle, so orient a -> b.
inline bool meek_rule_4(const MixedGraph& g, Index a, Index b) {
    for (const auto& [d, to] : g.directed) {
        if (to != b || d == a) continue;
        for (const auto& [c, mid] : g.directed) {
            if (mid != d || c == a || c == b) continue;
            if (g.adjacent(a, c) && !g.adjacent(c, b)) return true;
        }
    }
    return false;
}

}  // namespace detail

/// Applies the four orientation propagation rules to a fixed point. Each
/// pass scans the undirected edges in ascending order and orients the first
/// direction whose rule premise holds; a pass that orients nothing ends the
/// loop. Orientations are only ever added, never retracted, so the fixed
/// point exists and repeated application is a no-op.
inline MixedGraph apply_meek_rules(MixedGraph g) {
    bool changed = true;
    while (changed) {
        changed = false;
        const std::vector<std::pair<Index, Index>> edges(g.undirected.begin(),
                                                         g.undirected.end());
        for (const auto& [x, y] : edges) {
            if (!g.has_undirected(x, y)) continue;
            for (const auto& [a, b] : {std::pair{x, y}, std::pair{y, x}}) {
                if (detail::meek_rule_1(g, a, b) || detail::meek_rule_2(g, a, b) ||
                    detail::meek_rule_3(g, a, b) || detail::meek_rule_4(g, a, b)) {
                    g.undirected.erase({x, y});
                    g.directed.insert({a, b});
                    changed = true;
                    break;
                }
            }
        }
    }
    return g;
}

/// Full orientation pass: v-structures then rule propagation.
inline MixedGraph orient_skeleton(const AdjacencyMatrix& skeleton,
                                  const SeparationSets& sepsets) {
    return apply_meek_rules(find_v_structures(skeleton, sepsets));
}

}  // namespace pcstable

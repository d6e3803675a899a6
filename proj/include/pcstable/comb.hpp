#pragma once

#include "pcstable/core.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace pcstable::comb {

namespace detail {

inline constexpr int kTableSize = 65;

consteval std::array<std::array<std::uint64_t, kTableSize>, kTableSize> pascal_table() {
    std::array<std::array<std::uint64_t, kTableSize>, kTableSize> c{};
    for (int n = 0; n < kTableSize; ++n) {
        c[n][0] = 1;
        for (int k = 1; k <= n; ++k)
            c[n][k] = c[n - 1][k - 1] + (k <= n - 1 ? c[n - 1][k] : 0);
    }
    return c;
}

inline constexpr auto kPascal = pascal_table();

}  // namespace detail

/// Exact C(n, k). Values for n <= 64 come from a precomputed table (they all
/// fit in 64 bits); larger n uses the multiplicative formula with 128-bit
/// intermediates and reports overflow instead of wrapping.
inline std::uint64_t binomial(int n, int k) {
    if (n < 0 || k < 0 || k > n) throw std::invalid_argument("binomial: need 0 <= k <= n");
    if (n < detail::kTableSize) return detail::kPascal[n][k];
    k = std::min(k, n - k);
    unsigned __int128 result = 1;
    for (int i = 1; i <= k; ++i) {
        result = result * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
        if (result > std::numeric_limits<std::uint64_t>::max())
            throw std::overflow_error("binomial: C(n, k) exceeds 64 bits");
    }
    return static_cast<std::uint64_t>(result);
}

/// Writes the t-th k-subset of {0, ..., width-1} in lexicographic order into
/// out (ascending). Rank t counts from 0; out.size() fixes k.
inline void unrank_positions_into(Index width, std::uint64_t t, std::span<Index> out) {
    const int ell = static_cast<int>(out.size());
    if (width < ell || ell < 0) throw std::invalid_argument("unrank: need width >= k >= 0");
    if (t >= binomial(width, ell)) throw std::invalid_argument("unrank: rank out of range");
    std::uint64_t covered = 0;
    Index value = 0;
    for (int c = 0; c < ell; ++c) {
        // Advance past every block of combinations whose c-th element is too small.
        std::uint64_t block = binomial(width - value - 1, ell - c - 1);
        while (covered + block <= t) {
            covered += block;
            ++value;
            block = binomial(width - value - 1, ell - c - 1);
        }
        out[c] = value;
        ++value;
    }
}

/// The t-th k-subset of {0, ..., width-1} in lexicographic order, ascending.
inline std::vector<Index> unrank_positions(Index width, int ell, std::uint64_t t) {
    std::vector<Index> out(static_cast<std::size_t>(ell));
    unrank_positions_into(width, t, out);
    return out;
}

/// One-based variant: the t-th k-subset of {1, ..., n}.
inline std::vector<Index> unrank(Index n, int ell, std::uint64_t t) {
    std::vector<Index> out = unrank_positions(n, ell, t);
    for (Index& v : out) ++v;
    return out;
}

/// Unranks over a row of reduced_width + 1 positions with position `skip`
/// removed: values below skip map to themselves, values at or above it shift
/// up by one. Used when the conditioning candidates are a row minus the
/// other endpoint of the edge under test.
inline void unrank_positions_excluding_into(Index reduced_width, std::uint64_t t, Index skip,
                                            std::span<Index> out) {
    if (skip < 0 || skip > reduced_width)
        throw std::invalid_argument("unrank: skip position out of range");
    unrank_positions_into(reduced_width, t, out);
    for (Index& v : out)
        if (v >= skip) ++v;
}

inline std::vector<Index> unrank_positions_excluding(Index reduced_width, int ell,
                                                     std::uint64_t t, Index skip) {
    std::vector<Index> out(static_cast<std::size_t>(ell));
    unrank_positions_excluding_into(reduced_width, t, skip, out);
    return out;
}

/// Advances an ascending k-subset of {0, ..., width-1} to its lexicographic
/// successor in place. Returns false (leaving the input unchanged) when the
/// input is already the last subset. Stepping from unrank_positions(width, k, t)
/// yields unrank_positions(width, k, t + 1); consecutive ranks are walked this
/// way instead of unranking each one.
inline bool next_combination(std::span<Index> positions, Index width) {
    const int ell = static_cast<int>(positions.size());
    for (int idx = ell - 1; idx >= 0; --idx) {
        if (positions[idx] < width - (ell - idx)) {
            ++positions[idx];
            for (int k = idx + 1; k < ell; ++k) positions[k] = positions[k - 1] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace pcstable::comb

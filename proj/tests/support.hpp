#pragma once

#include "pcstable/pcstable.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cstdint>
#include <span>
#include <vector>

namespace testsupport {

using pcstable::CorrelationMatrix;
using pcstable::DataMatrix;
using pcstable::Index;

/// Every ell-subset of {0, ..., width-1} in lexicographic order, produced by
/// plain nested iteration; the oracle the unranking code is checked against.
inline std::vector<std::vector<Index>> all_combinations(Index width, int ell) {
    std::vector<std::vector<Index>> out;
    if (ell == 0) {
        out.push_back({});
        return out;
    }
    if (width < ell) return out;
    std::vector<Index> cur(static_cast<std::size_t>(ell));
    for (int k = 0; k < ell; ++k) cur[static_cast<std::size_t>(k)] = static_cast<Index>(k);
    for (;;) {
        out.push_back(cur);
        int idx = ell - 1;
        while (idx >= 0 && cur[static_cast<std::size_t>(idx)] == width - (ell - idx)) --idx;
        if (idx < 0) break;
        ++cur[static_cast<std::size_t>(idx)];
        for (int k = idx + 1; k < ell; ++k)
            cur[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k - 1)] + 1;
    }
    return out;
}

/// Rank of a 1-based ascending combination of {1..n}: the double sum counts,
/// for each slot c, the combinations whose first c slots match and whose c-th
/// element is smaller. Recovering t from the unranked output closes the loop.
inline std::uint64_t rank_of(Index n, std::span<const Index> combo_1based) {
    const int ell = static_cast<int>(combo_1based.size());
    std::uint64_t t = 0;
    Index prev = 0;
    for (int c = 0; c < ell; ++c) {
        for (Index k = prev + 1; k <= combo_1based[c] - 1; ++k)
            t += pcstable::comb::binomial(n - k, ell - (c + 1));
        prev = combo_1based[c];
    }
    return t;
}

/// SVD pseudo-inverse, the textbook construction used as an independent
/// oracle for the Cholesky-based implementation.
inline Eigen::MatrixXd svd_pinv(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = 1e-10 * sv.maxCoeff() * std::max(a.rows(), a.cols());
    Eigen::VectorXd inv = sv;
    for (Eigen::Index k = 0; k < inv.size(); ++k) inv(k) = sv(k) > tol ? 1.0 / sv(k) : 0.0;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Partial correlation the long way around: regress columns i and j on the
/// conditioning columns (centered, least squares) and correlate the
/// residuals. Algebraically identical to the correlation-matrix route.
inline double residual_partial_correlation(const DataMatrix& data, Index i, Index j,
                                           std::span<const Index> set) {
    const Eigen::MatrixXd& x = data.values();
    const Eigen::Index m = x.rows();
    const int ell = static_cast<int>(set.size());
    Eigen::MatrixXd xs(m, ell);
    for (int k = 0; k < ell; ++k)
        xs.col(k) = x.col(set[static_cast<std::size_t>(k)]).array() -
                    x.col(set[static_cast<std::size_t>(k)]).mean();
    const Eigen::VectorXd xi = x.col(i).array() - x.col(i).mean();
    const Eigen::VectorXd xj = x.col(j).array() - x.col(j).mean();
    Eigen::VectorXd ri = xi;
    Eigen::VectorXd rj = xj;
    if (ell > 0) {
        const auto qr = xs.colPivHouseholderQr();
        ri -= xs * qr.solve(xi);
        rj -= xs * qr.solve(xj);
    }
    return ri.dot(rj) / std::sqrt(ri.squaredNorm() * rj.squaredNorm());
}

/// Correlation matrix of seeded random data; always a valid sample
/// correlation matrix (positive semidefinite, unit diagonal).
inline CorrelationMatrix random_correlation(Index n, std::uint64_t seed) {
    pcstable::Xoshiro256PlusPlus rng(seed);
    const Index m = 2 * n + 8;
    Eigen::MatrixXd x(m, n);
    for (Index r = 0; r < m; ++r)
        for (Index cidx = 0; cidx < n; ++cidx) x(r, cidx) = rng.normal();
    return pcstable::stats::compute_correlation(DataMatrix(std::move(x)));
}

/// Builds an n x n correlation matrix from explicit off-diagonal entries.
inline CorrelationMatrix make_correlation(
    Index n, const std::vector<std::tuple<Index, Index, double>>& entries) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(n, n);
    for (const auto& [i, j, v] : entries) {
        c(i, j) = v;
        c(j, i) = v;
    }
    return CorrelationMatrix(std::move(c));
}

struct AuditReport {
    std::size_t removed_edges = 0;
    std::size_t missing_sepsets = 0;   // removed edge without a stored set
    std::size_t spurious_sepsets = 0;  // surviving edge with a stored set
    std::size_t failed_retests = 0;    // stored set does not separate the pair

    bool clean() const { return missing_sepsets + spurious_sepsets + failed_retests == 0; }
};

/// Replays every removal decision: each removed edge must carry a separating
/// set that still tests independent at its level's threshold, and surviving
/// edges must carry none.
inline AuditReport audit_sepsets(const pcstable::SkeletonResult& result,
                                 const CorrelationMatrix& c, Index sample_count, double alpha) {
    AuditReport report;
    const Index n = result.skeleton.size();
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            const std::vector<Index>* set = result.sepsets.find(i, j);
            if (result.skeleton.at(i, j)) {
                report.spurious_sepsets += set != nullptr;
                continue;
            }
            ++report.removed_edges;
            if (set == nullptr) {
                ++report.missing_sepsets;
                continue;
            }
            const double tau = pcstable::stats::threshold_tau(alpha, sample_count,
                                                              static_cast<int>(set->size()));
            if (!pcstable::stats::ci_test(c, i, j, *set, tau).independent)
                ++report.failed_retests;
        }
    }
    return report;
}

/// Undirected edge set of an adjacency matrix, for readable comparisons.
inline std::vector<std::pair<Index, Index>> edge_set(const pcstable::AdjacencyMatrix& a) {
    std::vector<std::pair<Index, Index>> out;
    for (Index i = 0; i < a.size(); ++i)
        for (Index j = i + 1; j < a.size(); ++j)
            if (a.at(i, j)) out.push_back({i, j});
    return out;
}

}  // namespace testsupport

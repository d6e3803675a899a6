#pragma once

#include "pcstable/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace pcstable::stats {

/// Inverse of the standard normal CDF, Wichura's AS 241 (PPND16) rational
/// approximations; absolute error is below 1e-15 across (0, 1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) *
                        r +
                    4.5921953931549871457e4) *
                       r +
                   1.3731693765509461125e4) *
                      r +
                  1.9715909503065514427e3) *
                     r +
                 1.3314166789178437745e2) *
                    r +
                3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) *
                        r +
                    2.1213794301586595867e4) *
                       r +
                   5.3941960214247511077e3) *
                      r +
                  6.8718700749205790830e2) *
                     r +
                 4.2313330701600911252e1) *
                    r +
                1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double z;
    if (r <= 5.0) {
        r -= 1.6;
        z = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) *
                     r +
                 1.27045825245236838258e0) *
                    r +
                3.64784832476320460504e0) *
                   r +
               5.76949722146069140550e0) *
                  r +
              4.63033784615654529590e0) *
                 r +
             1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) *
                     r +
                 1.48103976427480074590e-1) *
                    r +
                6.89767334985100004550e-1) *
                   r +
               1.67638483018380384940e0) *
                  r +
              2.05319162663775882187e0) *
                 r +
             1.0);
    } else {
        r -= 5.0;
        z = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) *
                     r +
                 2.65321895265761230930e-2) *
                    r +
                2.96560571828504891230e-1) *
                   r +
               1.78482653991729133580e0) *
                  r +
              5.46378491116411436990e0) *
                 r +
             6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) *
                     r +
                 7.86869131145613259100e-4) *
                    r +
                1.48753612908506148525e-2) *
                   r +
               1.36929880922735805310e-1) *
                  r +
              5.99832206555887937690e-1) *
                 r +
             1.0);
    }
    return q < 0.0 ? -z : z;
}

/// Fisher z statistic |atanh(rho)|, written out as the log form.
inline double fisher_z(double rho) {
    if (!(rho > -1.0 && rho < 1.0))
        throw std::invalid_argument("fisher_z: rho must lie in (-1, 1)");
    return std::abs(0.5 * std::log((1.0 + rho) / (1.0 - rho)));
}

/// Rejection threshold for the Fisher z statistic at significance alpha with
/// m samples and a conditioning set of size ell. alpha = 1 is allowed and
/// yields 0 (every nonzero statistic then counts as dependent).
inline double threshold_tau(double alpha, Index m, int ell) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("threshold_tau: alpha must lie in (0, 1]");
    if (ell < 0) throw std::invalid_argument("threshold_tau: ell must be >= 0");
    const double dof = static_cast<double>(m) - ell - 3;
    if (dof < 1.0)
        throw LevelUnreachableError("threshold_tau: need m - ell - 3 >= 1, got m = " +
                                    std::to_string(m) + ", ell = " + std::to_string(ell));
    return normal_quantile(1.0 - alpha / 2.0) / std::sqrt(dof);
}

/// Pearson correlation matrix of the columns of data.
inline CorrelationMatrix compute_correlation(const DataMatrix& data) {
    const Eigen::MatrixXd& x = data.values();
    const Index n = data.variable_count();
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd gram = centered.transpose() * centered;
    Eigen::VectorXd sd(n);
    for (Index i = 0; i < n; ++i) {
        const double ss = gram(i, i);
        if (!(ss > 0.0))
            throw ZeroVarianceError(i, "compute_correlation: column " + std::to_string(i) +
                                           " has zero variance");
        sd(i) = std::sqrt(ss);
    }
    Eigen::MatrixXd c(n, n);
    for (Index i = 0; i < n; ++i) {
        c(i, i) = 1.0;
        for (Index j = i + 1; j < n; ++j) {
            const double v = std::clamp(gram(i, j) / (sd(i) * sd(j)), -1.0, 1.0);
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return CorrelationMatrix(std::move(c));
}

/// Scratch buffers for the pseudo-inverse; reused across calls to avoid
/// per-test allocation.
struct PinvWorkspace {
    Eigen::MatrixXd gram;
    Eigen::MatrixXd chol;
    Eigen::MatrixXd inv_small;
    Eigen::MatrixXd lr;
};

/// Moore-Penrose pseudo-inverse of a square matrix via full-rank Cholesky
/// factorization of a'a: factor a'a = L L' keeping only columns whose pivot
/// exceeds 1e-10 times the largest Gram diagonal, then
/// pinv(a) = L (L'L)^-1 (L'L)^-1 L' a'. Rank-deficient inputs are handled by
/// the pivot test; the zero matrix maps to the zero matrix.
inline void pseudo_inverse_into(const Eigen::Ref<const Eigen::MatrixXd>& a, PinvWorkspace& ws,
                                Eigen::MatrixXd& out) {
    const Index n = static_cast<Index>(a.rows());
    if (a.cols() != n) throw std::invalid_argument("pseudo_inverse: matrix must be square");
    if (!a.allFinite()) throw std::invalid_argument("pseudo_inverse: entries must be finite");
    ws.gram.noalias() = a.transpose() * a;
    const double tol = 1e-10 * ws.gram.diagonal().maxCoeff();
    out.resize(n, n);
    if (!(tol > 0.0)) {
        out.setZero();
        return;
    }
    ws.chol.resize(n, n);
    Index r = 0;
    for (Index k = 0; k < n; ++k) {
        ws.chol.col(r).setZero();
        ws.chol.col(r).tail(n - k).noalias() =
            ws.gram.col(k).tail(n - k) -
            ws.chol.bottomLeftCorner(n - k, r) * ws.chol.row(k).head(r).transpose();
        const double pivot = ws.chol(k, r);
        if (pivot > tol) {
            const double root = std::sqrt(pivot);
            ws.chol(k, r) = root;
            if (k + 1 < n) ws.chol.col(r).tail(n - k - 1) /= root;
            ++r;
        }
    }
    if (r == 0) {
        out.setZero();
        return;
    }
    const auto l = ws.chol.leftCols(r);
    ws.inv_small.noalias() = l.transpose() * l;
    ws.inv_small = ws.inv_small.llt().solve(Eigen::MatrixXd::Identity(r, r));
    ws.lr.noalias() = l * ws.inv_small;
    out.noalias() = ws.lr * ws.lr.transpose() * a.transpose();
}

inline Eigen::MatrixXd pseudo_inverse(const Eigen::Ref<const Eigen::MatrixXd>& a) {
    PinvWorkspace ws;
    Eigen::MatrixXd out;
    pseudo_inverse_into(a, ws, out);
    return out;
}

/// The three correlation blocks a conditional test reads: m0 is the 2x2 block
/// of the pair (i, j), m1 the 2 x ell block pairing (i, j) against the
/// conditioning set, m2 the ell x ell block of the set itself.
struct ConditioningBlocks {
    Eigen::Matrix2d m0;
    Eigen::MatrixXd m1;
    Eigen::MatrixXd m2;
};

namespace detail {

inline void validate_test_args(const CorrelationMatrix& c, Index i, Index j,
                               std::span<const Index> set) {
    const Index n = c.size();
    if (i == j || i < 0 || j < 0 || i >= n || j >= n)
        throw std::invalid_argument("ci arguments: i and j must be distinct vertices");
    for (std::size_t a = 0; a < set.size(); ++a) {
        const Index s = set[a];
        if (s < 0 || s >= n) throw std::invalid_argument("ci arguments: set member out of range");
        if (s == i || s == j)
            throw std::invalid_argument("ci arguments: set must not contain i or j");
        for (std::size_t b = a + 1; b < set.size(); ++b)
            if (set[b] == s) throw std::invalid_argument("ci arguments: set members must be distinct");
    }
}

inline void fill_m1(const CorrelationMatrix& c, Index i, Index j, std::span<const Index> set,
                    Eigen::MatrixXd& m1) {
    const int ell = static_cast<int>(set.size());
    m1.resize(2, ell);
    for (int k = 0; k < ell; ++k) {
        m1(0, k) = c(i, set[k]);
        m1(1, k) = c(j, set[k]);
    }
}

inline void fill_m2(const CorrelationMatrix& c, std::span<const Index> set, Eigen::MatrixXd& m2) {
    const int ell = static_cast<int>(set.size());
    m2.resize(ell, ell);
    for (int a = 0; a < ell; ++a)
        for (int b = 0; b < ell; ++b) m2(a, b) = c(set[a], set[b]);
}

}  // namespace detail

inline ConditioningBlocks extract_conditioning(const CorrelationMatrix& c, Index i, Index j,
                                               std::span<const Index> set) {
    detail::validate_test_args(c, i, j, set);
    ConditioningBlocks blocks;
    blocks.m0 << 1.0, c(i, j), c(i, j), 1.0;
    detail::fill_m1(c, i, j, set, blocks.m1);
    detail::fill_m2(c, set, blocks.m2);
    return blocks;
}

/// Scratch buffers for conditional independence tests. set and positions are
/// enumeration scratch for callers that walk conditioning sets.
struct CiWorkspace {
    Eigen::MatrixXd m1;
    Eigen::MatrixXd m2;
    Eigen::MatrixXd m2_inv;
    Eigen::MatrixXd p;
    PinvWorkspace pinv;
    std::vector<Index> set;
    std::vector<Index> positions;
};

inline constexpr double kRhoClamp = 1.0 - 1e-12;

namespace detail {

/// Partial correlation of (i, j) given the set, reusing a previously computed
/// pseudo-inverse of the set's correlation block. The conditioned covariance
/// H = m0 - m1 m2^+ m1' is symmetrized before use so the result is exactly
/// invariant under swapping i and j.
inline double partial_correlation_with_inverse(const CorrelationMatrix& c, Index i, Index j,
                                               std::span<const Index> set,
                                               const Eigen::MatrixXd& m2_inv, CiWorkspace& ws) {
    fill_m1(c, i, j, set, ws.m1);
    ws.p.noalias() = ws.m1 * m2_inv;
    const double h00 = 1.0 - ws.p.row(0).dot(ws.m1.row(0));
    const double h11 = 1.0 - ws.p.row(1).dot(ws.m1.row(1));
    const double h01 = c(i, j) - 0.5 * (ws.p.row(0).dot(ws.m1.row(1)) +
                                        ws.p.row(1).dot(ws.m1.row(0)));
    const double denom = h00 * h11;
    if (!(denom > 0.0))
        throw DegenerateConditioningError(
            "partial_correlation: conditioned variance vanished for pair (" + std::to_string(i) +
            ", " + std::to_string(j) + ")");
    return std::clamp(h01 / std::sqrt(denom), -kRhoClamp, kRhoClamp);
}

inline double partial_correlation_impl(const CorrelationMatrix& c, Index i, Index j,
                                       std::span<const Index> set, CiWorkspace& ws) {
    validate_test_args(c, i, j, set);
    if (set.empty()) return std::clamp(c(i, j), -kRhoClamp, kRhoClamp);
    fill_m2(c, set, ws.m2);
    pseudo_inverse_into(ws.m2, ws.pinv, ws.m2_inv);
    return partial_correlation_with_inverse(c, i, j, set, ws.m2_inv, ws);
}

inline CiWorkspace& thread_workspace() {
    static thread_local CiWorkspace ws;
    return ws;
}

}  // namespace detail

/// Partial correlation of variables i and j given the conditioning set,
/// computed from correlation entries alone. The result is clamped to
/// [-(1 - 1e-12), 1 - 1e-12] so a Fisher z statistic always exists.
inline double partial_correlation(const CorrelationMatrix& c, Index i, Index j,
                                  std::span<const Index> set) {
    return detail::partial_correlation_impl(c, i, j, set, detail::thread_workspace());
}

/// Outcome of one conditional independence test. degenerate marks tests whose
/// conditioned covariance collapsed; those are reported dependent with an
/// off-scale statistic rather than aborting the run.
struct CiDecision {
    bool independent = false;
    double z_statistic = 0.0;
    double rho_hat = 0.0;
    bool degenerate = false;
};

namespace detail {

inline CiDecision decide(double rho, double tau) {
    CiDecision d;
    d.rho_hat = rho;
    d.z_statistic = fisher_z(rho);
    d.independent = d.z_statistic <= tau;
    return d;
}

inline CiDecision degenerate_decision() {
    CiDecision d;
    d.independent = false;
    d.z_statistic = std::numeric_limits<double>::infinity();
    d.rho_hat = 0.0;
    d.degenerate = true;
    return d;
}

}  // namespace detail

/// Tests whether i and j are conditionally independent given the set at
/// threshold tau: independent iff |atanh(partial correlation)| <= tau.
inline CiDecision ci_test(const CorrelationMatrix& c, Index i, Index j,
                          std::span<const Index> set, double tau, CiWorkspace& ws) {
    try {
        return detail::decide(detail::partial_correlation_impl(c, i, j, set, ws), tau);
    } catch (const DegenerateConditioningError&) {
        return detail::degenerate_decision();
    }
}

inline CiDecision ci_test(const CorrelationMatrix& c, Index i, Index j,
                          std::span<const Index> set, double tau) {
    return ci_test(c, i, j, set, tau, detail::thread_workspace());
}

/// Same test, but reuses a pseudo-inverse of the set's correlation block that
/// the caller computed once for this set; the set-sharing strategy amortizes
/// that inverse across every pair tested against the same set.
inline CiDecision ci_test_with_inverse(const CorrelationMatrix& c, Index i, Index j,
                                       std::span<const Index> set,
                                       const Eigen::MatrixXd& m2_inv, double tau,
                                       CiWorkspace& ws) {
    detail::validate_test_args(c, i, j, set);
    if (set.empty()) throw std::invalid_argument("ci_test_with_inverse: set must be nonempty");
    try {
        return detail::decide(
            detail::partial_correlation_with_inverse(c, i, j, set, m2_inv, ws), tau);
    } catch (const DegenerateConditioningError&) {
        return detail::degenerate_decision();
    }
}

}  // namespace pcstable::stats

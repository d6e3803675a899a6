#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pcstable {

using Index = std::int32_t;

/// A variable's sample column was constant, so it cannot be standardized.
class ZeroVarianceError : public std::runtime_error {
public:
    ZeroVarianceError(Index column, std::string what)
        : std::runtime_error(std::move(what)), column_(column) {}
    Index column() const { return column_; }

private:
    Index column_;
};

/// The conditioned covariance of a variable pair collapsed (H[0,0]*H[1,1] <= 0),
/// so no partial correlation is defined for this test.
class DegenerateConditioningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The sample size is too small to run the requested level's test threshold.
class LevelUnreachableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Column-observation data matrix: m samples (rows) by n variables (columns).
/// Invariants: m >= 4, n >= 2, every entry finite.
class DataMatrix {
public:
    explicit DataMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
        if (values_.rows() < 4)
            throw std::invalid_argument("DataMatrix: need at least 4 samples, got " +
                                        std::to_string(values_.rows()));
        if (values_.cols() < 2)
            throw std::invalid_argument("DataMatrix: need at least 2 variables, got " +
                                        std::to_string(values_.cols()));
        if (!values_.allFinite())
            throw std::invalid_argument("DataMatrix: values must be finite");
    }

    Index sample_count() const { return static_cast<Index>(values_.rows()); }
    Index variable_count() const { return static_cast<Index>(values_.cols()); }
    const Eigen::MatrixXd& values() const { return values_; }

private:
    Eigen::MatrixXd values_;
};

/// Pearson correlation matrix. Construction symmetrizes and clamps inputs that
/// are within 1e-12 of valid; anything further off is rejected.
class CorrelationMatrix {
public:
    explicit CorrelationMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
        constexpr double kTol = 1e-12;
        if (values_.rows() != values_.cols() || values_.rows() < 2)
            throw std::invalid_argument("CorrelationMatrix: need a square matrix, n >= 2");
        const Index n = static_cast<Index>(values_.rows());
        for (Index i = 0; i < n; ++i) {
            if (std::abs(values_(i, i) - 1.0) > kTol)
                throw std::invalid_argument("CorrelationMatrix: diagonal must be 1");
            values_(i, i) = 1.0;
            for (Index j = i + 1; j < n; ++j) {
                const double a = values_(i, j);
                const double b = values_(j, i);
                if (!std::isfinite(a) || !std::isfinite(b) || std::abs(a - b) > kTol)
                    throw std::invalid_argument("CorrelationMatrix: matrix must be symmetric");
                double v = 0.5 * (a + b);
                if (std::abs(v) > 1.0 + kTol)
                    throw std::invalid_argument("CorrelationMatrix: entries must lie in [-1, 1]");
                v = std::clamp(v, -1.0, 1.0);
                values_(i, j) = v;
                values_(j, i) = v;
            }
        }
    }

    Index size() const { return static_cast<Index>(values_.rows()); }
    double operator()(Index i, Index j) const { return values_(i, j); }
    const Eigen::MatrixXd& values() const { return values_; }

private:
    Eigen::MatrixXd values_;
};

/// Undirected graph over n vertices as a dense cell matrix. Cells are atomic
/// so concurrent workers may clear edges while others read; clearing is
/// idempotent and never resurrects an edge, which is the only write pattern
/// the level loop performs after setup.
class AdjacencyMatrix {
public:
    explicit AdjacencyMatrix(Index n) : n_(n), cells_(alloc(n)) {
        if (n < 2) throw std::invalid_argument("AdjacencyMatrix: need n >= 2");
        for (Index i = 0; i < n * n; ++i) cells_[i].store(false, std::memory_order_relaxed);
    }

    static AdjacencyMatrix complete(Index n) {
        AdjacencyMatrix a(n);
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j) a.set_edge(i, j);
        return a;
    }

    AdjacencyMatrix(const AdjacencyMatrix& other) : n_(other.n_), cells_(alloc(other.n_)) {
        for (Index i = 0; i < n_ * n_; ++i)
            cells_[i].store(other.cells_[i].load(std::memory_order_relaxed),
                            std::memory_order_relaxed);
    }

    AdjacencyMatrix& operator=(const AdjacencyMatrix& other) {
        if (this != &other) {
            AdjacencyMatrix copy(other);
            *this = std::move(copy);
        }
        return *this;
    }

    AdjacencyMatrix(AdjacencyMatrix&&) noexcept = default;
    AdjacencyMatrix& operator=(AdjacencyMatrix&&) noexcept = default;

    Index size() const { return n_; }

    bool at(Index i, Index j) const {
        return cells_[static_cast<std::size_t>(i) * n_ + j].load(std::memory_order_relaxed);
    }

    void set_edge(Index i, Index j) {
        check_pair(i, j);
        cell(i, j).store(true, std::memory_order_relaxed);
        cell(j, i).store(true, std::memory_order_relaxed);
    }

    /// Safe to call concurrently with reads and with other clears. Returns
    /// true for exactly one of any set of concurrent clears of a live edge,
    /// so callers can treat it as claiming the removal.
    bool clear_edge(Index i, Index j) {
        check_pair(i, j);
        if (i > j) std::swap(i, j);
        const bool was_live = cell(i, j).exchange(false, std::memory_order_acq_rel);
        cell(j, i).store(false, std::memory_order_release);
        return was_live;
    }

    std::size_t edge_count() const {
        std::size_t count = 0;
        for (Index i = 0; i < n_; ++i)
            for (Index j = i + 1; j < n_; ++j) count += at(i, j);
        return count;
    }

    friend bool operator==(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
        if (a.n_ != b.n_) return false;
        for (Index i = 0; i < a.n_; ++i)
            for (Index j = 0; j < a.n_; ++j)
                if (a.at(i, j) != b.at(i, j)) return false;
        return true;
    }

private:
    static std::unique_ptr<std::atomic<bool>[]> alloc(Index n) {
        return std::make_unique<std::atomic<bool>[]>(static_cast<std::size_t>(n) * n);
    }

    void check_pair(Index i, Index j) const {
        if (i == j || i < 0 || j < 0 || i >= n_ || j >= n_)
            throw std::invalid_argument("AdjacencyMatrix: invalid vertex pair");
    }

    std::atomic<bool>& cell(Index i, Index j) {
        return cells_[static_cast<std::size_t>(i) * n_ + j];
    }

    Index n_;
    std::unique_ptr<std::atomic<bool>[]> cells_;
};

/// Read-only neighbor-list snapshot of an adjacency matrix (CSR layout).
/// Row i holds the neighbors of i in ascending order. Taken once per level so
/// every worker tests against the same frozen graph while removals land in
/// the live one.
class CompactedAdjacency {
public:
    CompactedAdjacency(std::vector<Index> offsets, std::vector<Index> indices)
        : offsets_(std::move(offsets)), indices_(std::move(indices)) {
        max_width_ = 0;
        for (std::size_t i = 0; i + 1 < offsets_.size(); ++i)
            max_width_ = std::max(max_width_, offsets_[i + 1] - offsets_[i]);
    }

    Index size() const { return static_cast<Index>(offsets_.size()) - 1; }

    std::span<const Index> row(Index i) const {
        return {indices_.data() + offsets_[i],
                static_cast<std::size_t>(offsets_[i + 1] - offsets_[i])};
    }

    Index count(Index i) const { return offsets_[i + 1] - offsets_[i]; }

    /// Largest row width; the level loop stops once max_width() - 1 < level.
    Index max_width() const { return max_width_; }

private:
    std::vector<Index> offsets_;
    std::vector<Index> indices_;
    Index max_width_;
};

inline CompactedAdjacency compact(const AdjacencyMatrix& a) {
    const Index n = a.size();
    std::vector<Index> offsets(static_cast<std::size_t>(n) + 1, 0);
    std::vector<Index> indices;
    indices.reserve(static_cast<std::size_t>(n) * 4);
    for (Index i = 0; i < n; ++i) {
        offsets[i] = static_cast<Index>(indices.size());
        for (Index j = 0; j < n; ++j)
            if (a.at(i, j)) indices.push_back(j);
    }
    offsets[n] = static_cast<Index>(indices.size());
    return CompactedAdjacency(std::move(offsets), std::move(indices));
}

/// Inverse of compact(); used to cross-check snapshots. Rejects vertex ids
/// outside [0, n) and row data that does not describe an undirected graph.
inline AdjacencyMatrix decompress(const CompactedAdjacency& c, Index n) {
    if (c.size() != n) throw std::invalid_argument("decompress: size mismatch");
    AdjacencyMatrix a(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j : c.row(i)) {
            if (j < 0 || j >= n) throw std::out_of_range("decompress: vertex id out of range");
            if (j == i) throw std::invalid_argument("decompress: self edge");
        }
    }
    for (Index i = 0; i < n; ++i)
        for (Index j : c.row(i))
            if (i < j) a.set_edge(i, j);
    for (Index i = 0; i < n; ++i) {
        auto row = c.row(i);
        std::size_t have = 0;
        for (Index j = 0; j < n; ++j) have += a.at(i, j);
        if (have != row.size()) throw std::invalid_argument("decompress: rows are not symmetric");
    }
    return a;
}

/// Separating sets recorded for removed edges, one slot per unordered pair.
/// store() may race across workers; each slot swaps atomically and the last
/// writer wins, so any stored set is one that some worker actually verified.
class SeparationSets {
public:
    explicit SeparationSets(Index n) : n_(n) {
        if (n < 2) throw std::invalid_argument("SeparationSets: need n >= 2");
        const std::size_t slots = static_cast<std::size_t>(n) * (n - 1) / 2;
        slots_ = std::make_unique<std::atomic<const std::vector<Index>*>[]>(slots);
        for (std::size_t s = 0; s < slots; ++s) slots_[s].store(nullptr, std::memory_order_relaxed);
    }

    ~SeparationSets() {
        if (!slots_) return;
        const std::size_t slots = static_cast<std::size_t>(n_) * (n_ - 1) / 2;
        for (std::size_t s = 0; s < slots; ++s) delete slots_[s].load(std::memory_order_relaxed);
    }

    SeparationSets(SeparationSets&& other) noexcept
        : n_(other.n_), slots_(std::move(other.slots_)) {
        other.n_ = 0;
    }

    SeparationSets& operator=(SeparationSets&& other) noexcept {
        if (this != &other) {
            this->~SeparationSets();
            n_ = other.n_;
            slots_ = std::move(other.slots_);
            other.n_ = 0;
        }
        return *this;
    }

    SeparationSets(const SeparationSets&) = delete;
    SeparationSets& operator=(const SeparationSets&) = delete;

    Index size() const { return n_; }

    void store(Index i, Index j, std::span<const Index> set) {
        auto* owned = new std::vector<Index>(set.begin(), set.end());
        const auto* old = slots_[slot(i, j)].exchange(owned, std::memory_order_acq_rel);
        delete old;
    }

    /// Null when no set has been recorded for the pair.
    const std::vector<Index>* find(Index i, Index j) const {
        return slots_[slot(i, j)].load(std::memory_order_acquire);
    }

    std::size_t stored_count() const {
        const std::size_t slots = static_cast<std::size_t>(n_) * (n_ - 1) / 2;
        std::size_t count = 0;
        for (std::size_t s = 0; s < slots; ++s)
            count += slots_[s].load(std::memory_order_relaxed) != nullptr;
        return count;
    }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (Index i = 0; i < n_; ++i)
            for (Index j = i + 1; j < n_; ++j)
                if (const auto* set = find(i, j)) fn(i, j, *set);
    }

private:
    std::size_t slot(Index i, Index j) const {
        if (i == j || i < 0 || j < 0 || i >= n_ || j >= n_)
            throw std::invalid_argument("SeparationSets: invalid vertex pair");
        if (i > j) std::swap(i, j);
        // Triangular index of pair (i, j), i < j, counting row by row.
        return static_cast<std::size_t>(i) * (2 * n_ - i - 1) / 2 + (j - i - 1);
    }

    Index n_;
    std::unique_ptr<std::atomic<const std::vector<Index>*>[]> slots_;
};

enum class Strategy { Serial, EdgeParallel, SetShared };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::Serial: return "serial";
        case Strategy::EdgeParallel: return "edge";
        case Strategy::SetShared: return "set";
    }
    return "?";
}

/// Parameters for a skeleton run. The per-strategy tile shape parameters
/// mirror the GPU formulation: edge-parallel units cover edges_per_unit edges
/// with workers_per_edge interleaved enumeration lanes each; set-shared units
/// split a row's conditioning sets into set_groups interleaved groups scanned
/// unit_width ranks at a time.
struct SkeletonConfig {
    double alpha = 0.05;
    std::optional<int> max_level;
    Strategy strategy = Strategy::Serial;
    int edges_per_unit = 2;
    int workers_per_edge = 32;
    int set_groups = 2;
    int unit_width = 64;
    int worker_count = 1;
    /// When set, work units within each level are processed in a seeded
    /// shuffled order. Results must not depend on it; tests exploit that.
    std::optional<std::uint64_t> schedule_seed;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("SkeletonConfig: alpha must lie in (0, 1)");
        if (max_level && *max_level < 0)
            throw std::invalid_argument("SkeletonConfig: max_level must be >= 0");
        if (edges_per_unit < 1)
            throw std::invalid_argument("SkeletonConfig: edges_per_unit must be >= 1");
        if (workers_per_edge < 1)
            throw std::invalid_argument("SkeletonConfig: workers_per_edge must be >= 1");
        if (set_groups < 1) throw std::invalid_argument("SkeletonConfig: set_groups must be >= 1");
        if (unit_width < 1) throw std::invalid_argument("SkeletonConfig: unit_width must be >= 1");
        if (worker_count < 1)
            throw std::invalid_argument("SkeletonConfig: worker_count must be >= 1");
    }
};

/// Work counters for one level of the skeleton loop.
struct LevelStats {
    int level = 0;
    std::uint64_t ci_tests = 0;
    std::uint64_t pseudo_inverses = 0;
    std::uint64_t edges_removed = 0;
    std::chrono::nanoseconds elapsed{0};
};

}  // namespace pcstable

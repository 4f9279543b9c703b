#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <utility>
#include <vector>

#include "types.hpp"

namespace erasekit {

/// Squared Euclidean distance. Four interleaved accumulators, always in the
/// same order, so every caller gets bit-identical values for the same pair.
struct EuclideanMetric {
    static double distance(const double* a, const double* b, std::size_t dim)
    {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t j = 0;
        for (; j + 4 <= dim; j += 4) {
            const double d0 = a[j] - b[j];
            const double d1 = a[j + 1] - b[j + 1];
            const double d2 = a[j + 2] - b[j + 2];
            const double d3 = a[j + 3] - b[j + 3];
            s0 += d0 * d0;
            s1 += d1 * d1;
            s2 += d2 * d2;
            s3 += d3 * d3;
        }
        for (; j < dim; ++j) {
            const double d = a[j] - b[j];
            s0 += d * d;
        }
        return (s0 + s1) + (s2 + s3);
    }
    /// Lower bound on distance() for points on the far side of a split plane.
    static double plane(double diff) { return diff * diff; }
};

/// Max-norm distance.
struct ChebyshevMetric {
    static double distance(const double* a, const double* b, std::size_t dim)
    {
        double m = 0.0;
        for (std::size_t j = 0; j < dim; ++j) m = std::max(m, std::abs(a[j] - b[j]));
        return m;
    }
    static double plane(double diff) { return std::abs(diff); }
};

struct Neighbor {
    double distance = 0.0;
    Index index = 0;

    friend bool operator<(const Neighbor& a, const Neighbor& b)
    {
        return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    }
};

/// Exact nearest-neighbor index over the rows of a matrix.
///
/// Neighbors are ordered by (distance, index), so ties go to the lower
/// point index. The query point itself is excluded from its own results.
/// Low-dimensional data is searched with a k-d tree; when the dimension is
/// high or k is a large fraction of n the tree cannot prune, and queries fall
/// back to an exhaustive scan. Both paths evaluate the same distance
/// function and return identical results.
template <typename Metric = EuclideanMetric>
class NeighborIndex {
public:
    explicit NeighborIndex(const Eigen::MatrixXd& points, std::size_t leaf_size = 16)
        : n_(points.rows()), dim_(static_cast<std::size_t>(points.cols())), leaf_size_(std::max<std::size_t>(leaf_size, 1))
    {
        data_.resize(static_cast<std::size_t>(n_) * dim_);
        for (Index i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < dim_; ++j) data_[static_cast<std::size_t>(i) * dim_ + j] = points(i, static_cast<Index>(j));
        }
        order_.resize(static_cast<std::size_t>(n_));
        for (Index i = 0; i < n_; ++i) order_[static_cast<std::size_t>(i)] = i;
        if (n_ > 0) build(0, static_cast<std::size_t>(n_));
    }

    Index size() const { return n_; }
    std::size_t dim() const { return dim_; }
    const double* point(Index i) const { return data_.data() + static_cast<std::size_t>(i) * dim_; }

    /// The min(k, n-1) nearest neighbors of stored point `i`, nearest first.
    std::vector<Neighbor> knn(Index i, Index k) const { return knn(point(i), k, i); }

    /// The k nearest stored points to `query`, skipping index `exclude`
    /// (pass -1 to keep all points).
    std::vector<Neighbor> knn(const double* query, Index k, Index exclude) const
    {
        const Index available = exclude >= 0 && exclude < n_ ? n_ - 1 : n_;
        k = std::min(k, available);
        if (k <= 0) return {};
        std::vector<Neighbor> out = use_scan(k) ? scan_knn(query, k, exclude) : tree_knn(query, k, exclude);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Exhaustive search, regardless of dimension.
    std::vector<Neighbor> brute_force_knn(Index i, Index k) const
    {
        k = std::min(k, n_ - 1);
        if (k <= 0) return {};
        auto out = scan_knn(point(i), k, i);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Number of stored points (other than `exclude`) within `radius` of the
    /// query: distance < radius when `strict`, <= radius otherwise.
    Index count_within(const double* query, double radius, bool strict, Index exclude) const
    {
        if (n_ == 0) return 0;
        Index count = 0;
        count_node(0, query, radius, strict, exclude, count);
        return count;
    }

private:
    struct Node {
        std::size_t begin = 0, end = 0; // range in order_
        std::size_t split_dim = 0;
        double split_value = 0.0;
        int left = -1, right = -1;
    };

    bool use_scan(Index k) const { return dim_ > 16 || 4 * k > n_; }

    int build(std::size_t begin, std::size_t end)
    {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({begin, end});
        if (end - begin <= leaf_size_) return id;

        std::size_t best_dim = 0;
        double best_spread = -1.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t p = begin; p < end; ++p) {
                const double v = point(order_[p])[j];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                best_dim = j;
            }
        }
        if (best_spread <= 0.0) return id; // all points identical

        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(end), [&](Index a, Index b) {
                             const double va = point(a)[best_dim], vb = point(b)[best_dim];
                             return va < vb || (va == vb && a < b);
                         });
        nodes_[static_cast<std::size_t>(id)].split_dim = best_dim;
        nodes_[static_cast<std::size_t>(id)].split_value = point(order_[mid])[best_dim];
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[static_cast<std::size_t>(id)].left = left;
        nodes_[static_cast<std::size_t>(id)].right = right;
        return id;
    }

    std::vector<Neighbor> scan_knn(const double* query, Index k, Index exclude) const
    {
        std::vector<Neighbor> all;
        all.reserve(static_cast<std::size_t>(n_));
        for (Index j = 0; j < n_; ++j) {
            if (j == exclude) continue;
            all.push_back({Metric::distance(query, point(j), dim_), j});
        }
        std::nth_element(all.begin(), all.begin() + (k - 1), all.end());
        all.resize(static_cast<std::size_t>(k));
        return all;
    }

    std::vector<Neighbor> tree_knn(const double* query, Index k, Index exclude) const
    {
        std::priority_queue<Neighbor> heap; // max-heap on (distance, index)
        search(0, query, k, exclude, heap);
        std::vector<Neighbor> out;
        out.reserve(heap.size());
        while (!heap.empty()) {
            out.push_back(heap.top());
            heap.pop();
        }
        return out;
    }

    void search(int id, const double* query, Index k, Index exclude, std::priority_queue<Neighbor>& heap) const
    {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.left < 0) {
            for (std::size_t p = node.begin; p < node.end; ++p) {
                const Index j = order_[p];
                if (j == exclude) continue;
                const Neighbor cand{Metric::distance(query, point(j), dim_), j};
                if (static_cast<Index>(heap.size()) < k) {
                    heap.push(cand);
                } else if (cand < heap.top()) {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        const double diff = query[node.split_dim] - node.split_value;
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        search(near, query, k, exclude, heap);
        // Points at exactly the current worst distance may still win on
        // index, so only a strictly larger bound prunes.
        if (static_cast<Index>(heap.size()) < k || !(Metric::plane(diff) > heap.top().distance)) {
            search(far, query, k, exclude, heap);
        }
    }

    void count_node(int id, const double* query, double radius, bool strict, Index exclude, Index& count) const
    {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.left < 0) {
            for (std::size_t p = node.begin; p < node.end; ++p) {
                const Index j = order_[p];
                if (j == exclude) continue;
                const double d = Metric::distance(query, point(j), dim_);
                if (strict ? d < radius : d <= radius) ++count;
            }
            return;
        }
        const double diff = query[node.split_dim] - node.split_value;
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        count_node(near, query, radius, strict, exclude, count);
        const double bound = Metric::plane(diff);
        if (strict ? bound < radius : bound <= radius) count_node(far, query, radius, strict, exclude, count);
    }

    Index n_;
    std::size_t dim_;
    std::size_t leaf_size_;
    std::vector<double> data_; // row-major copy
    std::vector<Index> order_;
    std::vector<Node> nodes_;
};

} // namespace erasekit

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "types.hpp"

namespace erasekit {

/// SplitMix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Portable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distribution transforms are written out here rather than
/// taken from <random>, whose distributions are implementation-defined:
///   uniform()  = (next() >> 11) * 2^-53
///   normal()   = Box-Muller on two uniforms, second value cached
///   index(n)   = rejection sampling on next() (no modulo bias)
/// Stream `s` of seed `k` is seeded with splitmix64(k ^ splitmix64(s)).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    static Rng stream(std::uint64_t seed, std::uint64_t stream_id)
    {
        Rng rng(0);
        rng.engine_.seed(splitmix64(seed ^ splitmix64(stream_id + 1)));
        return rng;
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n)
    {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t r = engine_();
        while (r >= limit) r = engine_();
        return r % n;
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& values)
    {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(index(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    std::vector<Index> permutation(Index n)
    {
        std::vector<Index> order(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        shuffle(order);
        return order;
    }

    Eigen::MatrixXd normal_matrix(Index rows, Index cols)
    {
        Eigen::MatrixXd m(rows, cols);
        for (Index i = 0; i < rows; ++i) {
            for (Index j = 0; j < cols; ++j) m(i, j) = normal();
        }
        return m;
    }

    Eigen::MatrixXd uniform_matrix(Index rows, Index cols, double lo = 0.0, double hi = 1.0)
    {
        Eigen::MatrixXd m(rows, cols);
        for (Index i = 0; i < rows; ++i) {
            for (Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
        }
        return m;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace erasekit

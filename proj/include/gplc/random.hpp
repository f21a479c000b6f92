#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "gplc/quadrature.hpp"

namespace gplc {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
} // namespace detail

/// Independent generator for sub-stream `stream` of a run seeded with `seed`.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t a = detail::splitmix64(seed);
    const std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

/// Stratified Latin hypercube sample of n points in a box: one point per
/// stratum along every axis, jittered uniformly inside its stratum.
template <class Rng>
Points latin_hypercube(Eigen::Index n, const UniformBox& box, Rng& rng) {
    const auto d = static_cast<Eigen::Index>(box.lower.size());
    Points out(n, d);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < d; ++k) {
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        // Fisher-Yates with the engine directly; std::shuffle is not portable across libraries.
        for (Eigen::Index i = n - 1; i > 0; --i) {
            std::uniform_int_distribution<Eigen::Index> pick(0, i);
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
        }
        const double lo = box.lower[static_cast<std::size_t>(k)];
        const double width = box.upper[static_cast<std::size_t>(k)] - lo;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double t = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + u(rng)) / static_cast<double>(n);
            out(i, k) = lo + width * t;
        }
    }
    return out;
}

} // namespace gplc

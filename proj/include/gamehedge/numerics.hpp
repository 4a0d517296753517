#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace gamehedge {

/// Tolerance bundle used by comparisons that are part of the public
/// contract (value recursion identities, hedge slack, duality gaps).
struct NumericPolicy {
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;

    bool close(double x, double y) const {
        const double scale = std::max(std::fabs(x), std::fabs(y));
        return std::fabs(x - y) <= abs_tol + rel_tol * scale;
    }
};

// Probability mass and martingale sums are checked against this, not the
// user-tunable policy: measures are either valid or they are not.
inline constexpr double kMeasureTol = 1e-10;

// Relative tolerance for "this log increment sits on the grid" decisions.
inline constexpr double kGridRelTol = 1e-12;

// Default enumeration budgets; callers may raise them explicitly.
inline constexpr std::uint64_t kDefaultPathCap = 10'000'000;
inline constexpr std::uint64_t kDefaultNodeCap = 1'000'000;

/// splitmix64. Used to decorrelate per-node RNG streams from one user seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform double in [0, 1) built from the top 53 bits of a 64-bit draw,
/// so results do not depend on library distribution internals.
template <class Rng>
double canonical_uniform(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace gamehedge

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gamehedge/errors.hpp"
#include "gamehedge/numerics.hpp"

namespace gamehedge {

/// Market primitives: initial price, horizon, and the band [a, b] every
/// one-step log move must fall into (in absolute value). a == 0 allows the
/// price to stand still; a == b pins the move size and only the sign is free.
struct MarketSpec {
    double s = 1.0;  // initial price
    double a = 0.0;  // smallest admissible |log move|
    double b = 0.0;  // largest admissible |log move|
    int steps = 1;   // number of trading steps

    void validate() const {
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("market.s must be a positive finite number");
        if (!(a >= 0.0) || !std::isfinite(a))
            throw std::invalid_argument("market.a must be >= 0");
        if (!(b >= a) || !std::isfinite(b))
            throw std::invalid_argument("market.b must satisfy b >= a");
        if (!(b > 0.0))
            throw std::invalid_argument("market.b must be > 0");
        if (steps < 1)
            throw std::invalid_argument("market.steps must be >= 1");
    }
};

/// One admissible lattice move: a signed magnitude. The label "+2" / "-0"
/// (sign, magnitude index) is the canonical node-key alphabet.
struct Move {
    int sign = 1;          // +1 or -1; the zero magnitude is canonically +
    int mag_index = 0;     // index into GridSpec::magnitudes()
    double log_step = 0.0; // sign * magnitude
    double factor = 1.0;   // exp(log_step)

    std::string label() const {
        return (sign > 0 ? "+" : "-") + std::to_string(mag_index);
    }
};

/// Discretisation of the move band. refine == n subdivides [a, b] into
/// n equal cells, keeping both endpoints: magnitudes a + j*(b-a)/n.
/// refine == 0 keeps just {a, b}; a == b collapses to the single point {b}.
struct GridSpec {
    MarketSpec market;
    int refine = 1;

    void validate() const {
        market.validate();
        if (refine < 0) throw std::invalid_argument("grid.refine must be >= 0");
    }

    /// Sorted distinct move magnitudes. Endpoints are exact by construction.
    std::vector<double> magnitudes() const {
        const double a = market.a, b = market.b;
        if (a == b) return {b};
        if (refine == 0) return {a, b};
        std::vector<double> g(static_cast<std::size_t>(refine) + 1);
        for (int j = 0; j < refine; ++j)
            g[static_cast<std::size_t>(j)] = a + j * (b - a) / refine;
        g[static_cast<std::size_t>(refine)] = b;
        return g;
    }

    /// All distinct one-step moves, ascending by factor. The two signed
    /// copies of a zero magnitude merge into the single unit-factor move.
    std::vector<Move> moves() const {
        std::vector<Move> out;
        const auto mags = magnitudes();
        for (int j = 0; j < static_cast<int>(mags.size()); ++j) {
            const double g = mags[static_cast<std::size_t>(j)];
            if (g == 0.0) {
                out.push_back(Move{+1, j, 0.0, 1.0});
            } else {
                out.push_back(Move{+1, j, g, std::exp(g)});
                out.push_back(Move{-1, j, -g, std::exp(-g)});
            }
        }
        std::sort(out.begin(), out.end(),
                  [](const Move& x, const Move& y) { return x.factor < y.factor; });
        return out;
    }

    int branching() const { return static_cast<int>(moves().size()); }
};

/// A price trajectory. move_indices (indices into GridSpec::moves()) are
/// present only for lattice paths; continuum paths carry prices alone.
struct Path {
    std::vector<double> prices;
    std::vector<int> move_indices;

    bool grid_tagged() const { return !move_indices.empty(); }
};

namespace detail {

inline double band_tol(const MarketSpec& m) {
    return kGridRelTol * std::max(1.0, m.b);
}

}  // namespace detail

/// Checks the band constraint: prices[0] = s and every |log move| in [a, b]
/// up to a relative tolerance. Throws std::invalid_argument on violation.
inline void validate_path(const MarketSpec& m, const Path& p) {
    m.validate();
    if (p.prices.size() != static_cast<std::size_t>(m.steps) + 1)
        throw std::invalid_argument("path must hold steps+1 prices");
    if (std::fabs(p.prices[0] - m.s) > kGridRelTol * std::max(1.0, m.s))
        throw std::invalid_argument("path must start at the initial price");
    const double tol = detail::band_tol(m);
    for (int i = 0; i < m.steps; ++i) {
        const double p0 = p.prices[static_cast<std::size_t>(i)];
        const double p1 = p.prices[static_cast<std::size_t>(i) + 1];
        if (!(p0 > 0.0) || !(p1 > 0.0))
            throw std::invalid_argument("path prices must stay positive");
        const double d = std::fabs(std::log(p1) - std::log(p0));
        if (d < m.a - tol || d > m.b + tol)
            throw std::invalid_argument("path log move " + std::to_string(i) +
                                        " leaves the [a, b] band");
    }
}

/// Additionally checks that every |log move| sits on the magnitude grid and,
/// when move indices are present, that they describe the same moves.
inline void validate_grid_path(const GridSpec& grid, const Path& p) {
    grid.validate();
    validate_path(grid.market, p);
    const auto moves = grid.moves();
    const double tol = detail::band_tol(grid.market);
    if (p.grid_tagged() && p.move_indices.size() != static_cast<std::size_t>(grid.market.steps))
        throw std::invalid_argument("grid path must carry one move index per step");
    for (int i = 0; i < grid.market.steps; ++i) {
        const double d = std::log(p.prices[static_cast<std::size_t>(i) + 1]) -
                         std::log(p.prices[static_cast<std::size_t>(i)]);
        if (p.grid_tagged()) {
            const int mi = p.move_indices[static_cast<std::size_t>(i)];
            if (mi < 0 || mi >= static_cast<int>(moves.size()))
                throw std::invalid_argument("move index out of range");
            if (std::fabs(d - moves[static_cast<std::size_t>(mi)].log_step) > tol)
                throw std::invalid_argument("move index disagrees with prices at step " +
                                            std::to_string(i));
        } else {
            const bool on_grid = std::any_of(moves.begin(), moves.end(), [&](const Move& mv) {
                return std::fabs(d - mv.log_step) <= tol;
            });
            if (!on_grid)
                throw std::invalid_argument("log move " + std::to_string(i) +
                                            " is not a grid move");
        }
    }
}

/// m^steps with an overflow-safe cap check.
inline std::uint64_t checked_path_count(std::uint64_t branching, int steps, std::uint64_t cap) {
    std::uint64_t r = 1;
    for (int i = 0; i < steps; ++i) {
        if (branching == 0 || r > cap / branching)
            throw CapExceeded("lattice path count exceeds the cap of " + std::to_string(cap));
        r *= branching;
    }
    return r;
}

/// sum_{k=0..steps} m^k with an overflow-safe cap check.
inline std::uint64_t checked_node_count(std::uint64_t branching, int steps, std::uint64_t cap) {
    std::uint64_t total = 0, level = 1;
    for (int k = 0; k <= steps; ++k) {
        if (total > cap - level)
            throw CapExceeded("lattice node count exceeds the cap of " + std::to_string(cap));
        total += level;
        if (k < steps) {
            if (branching == 0 || level > cap / branching)
                throw CapExceeded("lattice node count exceeds the cap of " + std::to_string(cap));
            level *= branching;
        }
    }
    return total;
}

/// Random access view over every lattice path, ordered lexicographically by
/// move index (first step most significant). Construction enforces the cap.
class LatticePaths {
  public:
    explicit LatticePaths(const GridSpec& grid, std::uint64_t max_paths = kDefaultPathCap)
        : grid_(grid), moves_(grid.moves()) {
        grid.validate();
        count_ = checked_path_count(moves_.size(), grid.market.steps, max_paths);
    }

    std::uint64_t size() const { return count_; }
    const std::vector<Move>& moves() const { return moves_; }

    Path at(std::uint64_t index) const {
        if (index >= count_) throw std::out_of_range("path index out of range");
        const int n_steps = grid_.market.steps;
        const std::uint64_t m = moves_.size();
        Path p;
        p.prices.resize(static_cast<std::size_t>(n_steps) + 1);
        p.move_indices.resize(static_cast<std::size_t>(n_steps));
        p.prices[0] = grid_.market.s;
        std::uint64_t rest = index;
        std::uint64_t place = count_ / m;
        for (int k = 0; k < n_steps; ++k) {
            const int digit = static_cast<int>(rest / place);
            rest %= place;
            if (k + 1 < n_steps) place /= m;
            p.move_indices[static_cast<std::size_t>(k)] = digit;
            p.prices[static_cast<std::size_t>(k) + 1] =
                p.prices[static_cast<std::size_t>(k)] *
                moves_[static_cast<std::size_t>(digit)].factor;
        }
        return p;
    }

  private:
    GridSpec grid_;
    std::vector<Move> moves_;
    std::uint64_t count_ = 0;
};

/// Streams every lattice path through fn(const Path&).
template <class Fn>
void enumerate_lattice_paths(const GridSpec& grid, Fn&& fn,
                             std::uint64_t max_paths = kDefaultPathCap) {
    const LatticePaths all(grid, max_paths);
    for (std::uint64_t i = 0; i < all.size(); ++i) fn(all.at(i));
}

/// Depth-first walk over every lattice node (path prefix), root first.
/// fn(depth, prices, move_indices) sees spans valid only during the call.
template <class Fn>
void for_each_node(const GridSpec& grid, Fn&& fn, std::uint64_t max_nodes = kDefaultNodeCap) {
    grid.validate();
    const auto moves = grid.moves();
    const int n_steps = grid.market.steps;
    checked_node_count(moves.size(), n_steps, max_nodes);

    std::vector<double> prices(static_cast<std::size_t>(n_steps) + 1);
    std::vector<int> idx(static_cast<std::size_t>(n_steps));
    prices[0] = grid.market.s;
    auto rec = [&](auto&& self, int k) -> void {
        fn(k, std::span<const double>(prices.data(), static_cast<std::size_t>(k) + 1),
           std::span<const int>(idx.data(), static_cast<std::size_t>(k)));
        if (k == n_steps) return;
        for (int c = 0; c < static_cast<int>(moves.size()); ++c) {
            idx[static_cast<std::size_t>(k)] = c;
            prices[static_cast<std::size_t>(k) + 1] =
                prices[static_cast<std::size_t>(k)] * moves[static_cast<std::size_t>(c)].factor;
            self(self, k + 1);
        }
    };
    rec(rec, 0);
}

/// Comma-joined move labels identifying a node; the root is "".
inline std::string node_key(const std::vector<Move>& moves, std::span<const int> prefix) {
    std::string key;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (i) key += ',';
        key += moves[static_cast<std::size_t>(prefix[i])].label();
    }
    return key;
}

namespace detail {

/// Largest grid index whose magnitude does not exceed x, with a small nudge
/// in index space so magnitudes already on the grid do not fall through to
/// the cell below. Magnitude ladders are uniform by construction.
inline int floor_magnitude_index(std::span<const double> mags, double x) {
    const int top = static_cast<int>(mags.size()) - 1;
    if (top == 0) return 0;
    const double quantum = mags[1] - mags[0];
    const double t = (x - mags[0]) / quantum;
    const long j = static_cast<long>(std::floor(t + 1e-9));
    return static_cast<int>(std::clamp(j, 0L, static_cast<long>(top)));
}

}  // namespace detail

/// Projects an admissible path onto the lattice: each log move keeps its
/// sign and its magnitude is floored to the grid. Grid paths map to
/// themselves; the projection is idempotent.
inline Path project_to_lattice(const GridSpec& grid, const Path& path) {
    grid.validate();
    validate_path(grid.market, path);
    const auto mags = grid.magnitudes();
    const auto moves = grid.moves();

    // (sign, magnitude index) -> move index
    std::vector<int> plus(mags.size(), -1), minus(mags.size(), -1);
    for (int i = 0; i < static_cast<int>(moves.size()); ++i) {
        const Move& mv = moves[static_cast<std::size_t>(i)];
        (mv.sign > 0 ? plus : minus)[static_cast<std::size_t>(mv.mag_index)] = i;
    }

    const int n_steps = grid.market.steps;
    Path out;
    out.prices.resize(static_cast<std::size_t>(n_steps) + 1);
    out.move_indices.resize(static_cast<std::size_t>(n_steps));
    out.prices[0] = path.prices[0];
    for (int i = 0; i < n_steps; ++i) {
        const double d = std::log(path.prices[static_cast<std::size_t>(i) + 1]) -
                         std::log(path.prices[static_cast<std::size_t>(i)]);
        const int j = detail::floor_magnitude_index(mags, std::fabs(d));
        int mi;
        if (mags[static_cast<std::size_t>(j)] == 0.0) {
            mi = plus[static_cast<std::size_t>(j)];
        } else {
            mi = d > 0.0 ? plus[static_cast<std::size_t>(j)] : minus[static_cast<std::size_t>(j)];
        }
        out.move_indices[static_cast<std::size_t>(i)] = mi;
        out.prices[static_cast<std::size_t>(i) + 1] =
            out.prices[static_cast<std::size_t>(i)] * moves[static_cast<std::size_t>(mi)].factor;
    }
    return out;
}

/// Worst-case sup-norm distance between an admissible path and its lattice
/// projection: prices stay below s*e^{b*steps} and each projected log move
/// errs by less than one grid cell.
inline double projection_error_bound(const GridSpec& grid) {
    grid.validate();
    const MarketSpec& m = grid.market;
    if (m.a == m.b) return 0.0;
    const int cells = grid.refine == 0 ? 1 : grid.refine;
    const double cell = (m.b - m.a) / cells;
    return m.s * std::exp(m.b * m.steps) * (std::exp(cell * m.steps) - 1.0);
}

}  // namespace gamehedge

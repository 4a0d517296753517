#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gamehedge/dynkin.hpp"
#include "gamehedge/errors.hpp"
#include "gamehedge/market.hpp"
#include "gamehedge/numerics.hpp"
#include "gamehedge/payoff.hpp"
#include "gamehedge/robust_step.hpp"

namespace gamehedge {

/// A self-financing trading rule on the lattice: initial capital, a share
/// position per interior node, and the writer's cancel rule. Positions are
/// zero at and below cancelled nodes; wealth is frozen from the cancel on.
struct HedgePolicy {
    GridSpec grid;
    std::vector<Move> moves;
    double initial_capital = 0.0;
    std::vector<std::vector<double>> gamma;  // [k][i], k < steps
    StoppingPolicy cancel;                   // seller rule
    double max_abs_gamma = 0.0;

    int steps() const { return grid.market.steps; }
    int branching() const { return static_cast<int>(moves.size()); }

    double gamma_at(int k, std::uint64_t i) const {
        return gamma[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    }
};

/// Reads the perfect hedge off a priced tree: capital is the root value and
/// each live node holds the cheapest one-step cover of its children's
/// values. Trading stops once the writer's cancel rule fires.
inline HedgePolicy build_hedge(const ValueTree& t, const NumericPolicy& policy = {}) {
    HedgePolicy h;
    h.grid = t.grid;
    h.moves = t.moves;
    h.initial_capital = t.root_value();
    h.cancel = extract_stopping(t, PolicyKind::seller, policy);

    const int n_steps = t.steps();
    const std::uint64_t m = t.moves.size();
    h.gamma.resize(static_cast<std::size_t>(n_steps));
    for (int k = 0; k < n_steps; ++k)
        h.gamma[static_cast<std::size_t>(k)].assign(t.value[static_cast<std::size_t>(k)].size(),
                                                    0.0);

    const FactorSet fs = FactorSet::from_grid(t.grid);
    auto walk = [&](auto&& self, int k, std::uint64_t idx, double spot) -> void {
        if (k >= n_steps) return;
        if (t.tag[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx)] ==
            RegionTag::SELLER_CANCEL)
            return;  // gamma stays zero here and below
        const std::span<const double> child(
            t.value[static_cast<std::size_t>(k) + 1].data() + idx * m, m);
        const SuperhedgeResult sh = one_step_superhedge(spot, fs, child);
        h.gamma[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx)] = sh.gamma;
        h.max_abs_gamma = std::max(h.max_abs_gamma, std::fabs(sh.gamma));
        for (std::uint64_t c = 0; c < m; ++c)
            self(self, k + 1, idx * m + c, spot * t.moves[c].factor);
    };
    walk(walk, 0, 0, t.grid.market.s);
    return h;
}

/// Wealth of the policy along one lattice path (no extra capital).
struct PortfolioTrajectory {
    double initial = 0.0;
    std::vector<double> values;  // one per time point
};

inline PortfolioTrajectory compute_trajectory(const HedgePolicy& policy, const Path& path) {
    validate_grid_path(policy.grid, path);
    if (!path.grid_tagged())
        throw std::invalid_argument("trajectory needs a move-tagged lattice path");
    const int n_steps = policy.steps();
    PortfolioTrajectory out;
    out.initial = policy.initial_capital;
    out.values.resize(static_cast<std::size_t>(n_steps) + 1);
    out.values[0] = policy.initial_capital;
    std::uint64_t idx = 0;
    for (int k = 0; k < n_steps; ++k) {
        const double g = policy.gamma_at(k, idx);
        out.values[static_cast<std::size_t>(k) + 1] =
            out.values[static_cast<std::size_t>(k)] +
            g * (path.prices[static_cast<std::size_t>(k) + 1] -
                 path.prices[static_cast<std::size_t>(k)]);
        idx = idx * static_cast<std::uint64_t>(policy.branching()) +
              static_cast<std::uint64_t>(path.move_indices[static_cast<std::size_t>(k)]);
    }
    return out;
}

/// Outcome of a hedge audit. worst_shortfall is the minimum over everything
/// audited of wealth-at-settlement minus the settlement owed; a perfect
/// hedge keeps it above -slack. exhaustive says whether every admissible
/// combination was covered or only a sample / greedy probe.
struct HedgeReport {
    double worst_shortfall = std::numeric_limits<double>::infinity();
    Path worst_path;
    int worst_exercise = -1;
    std::uint64_t paths_checked = 0;
    bool exhaustive = true;
};

/// Per-audit-row callback: node key prefix (or sampled path), exercise
/// date, margin. Used by the CLI to emit CSV rows.
using AuditSink = std::function<void(const Path&, int exercise, double margin)>;

namespace detail {

inline Path materialize_path(const GridSpec& grid, const std::vector<Move>& moves,
                             std::span<const int> prefix, int n_steps) {
    Path p;
    p.prices.resize(static_cast<std::size_t>(n_steps) + 1);
    p.move_indices.assign(static_cast<std::size_t>(n_steps), 0);
    p.prices[0] = grid.market.s;
    for (int k = 0; k < n_steps; ++k) {
        if (k < static_cast<int>(prefix.size()))
            p.move_indices[static_cast<std::size_t>(k)] = prefix[static_cast<std::size_t>(k)];
        p.prices[static_cast<std::size_t>(k) + 1] =
            p.prices[static_cast<std::size_t>(k)] *
            moves[static_cast<std::size_t>(p.move_indices[static_cast<std::size_t>(k)])].factor;
    }
    return p;
}

}  // namespace detail

/// Exhaustive audit of the policy against every lattice path and exercise
/// date. Margins are driven by path prefixes, so the walk visits each node
/// once: an exercise check at every live node, plus a cancel-settlement
/// check where the cancel rule fires; nothing below a cancel can move the
/// minimum. Complexity is O(nodes) while covering all branching^steps paths.
inline HedgeReport verify_on_lattice(const HedgePolicy& policy, const PayoffEvaluator& payoff,
                                     std::uint64_t max_paths = kDefaultPathCap,
                                     const AuditSink* sink = nullptr) {
    const int n_steps = policy.steps();
    const std::uint64_t m = policy.moves.size();
    const std::uint64_t total_paths = checked_path_count(m, n_steps, max_paths);

    // Paths through a depth-k node.
    std::vector<std::uint64_t> paths_below(static_cast<std::size_t>(n_steps) + 1);
    paths_below[static_cast<std::size_t>(n_steps)] = 1;
    for (int k = n_steps - 1; k >= 0; --k)
        paths_below[static_cast<std::size_t>(k)] = paths_below[static_cast<std::size_t>(k) + 1] * m;

    HedgeReport rep;
    std::vector<int> best_prefix;
    std::vector<double> prices(static_cast<std::size_t>(n_steps) + 1);
    std::vector<int> midx(static_cast<std::size_t>(n_steps));
    prices[0] = policy.grid.market.s;

    const auto consider = [&](double margin, int exercise, int depth) {
        if (sink) {
            (*sink)(detail::materialize_path(
                        policy.grid, policy.moves,
                        std::span<const int>(midx.data(), static_cast<std::size_t>(depth)),
                        n_steps),
                    exercise, margin);
        }
        if (margin < rep.worst_shortfall) {
            rep.worst_shortfall = margin;
            rep.worst_exercise = exercise;
            best_prefix.assign(midx.begin(), midx.begin() + depth);
        }
    };

    auto rec = [&](auto&& self, int k, std::uint64_t idx, double wealth) -> void {
        const std::span<const double> prefix(prices.data(), static_cast<std::size_t>(k) + 1);
        const std::span<const int> key(midx.data(), static_cast<std::size_t>(k));
        consider(wealth - payoff.exercise(prefix, key), k, k);
        const bool cancels =
            k < n_steps &&
            policy.cancel.stop[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx)];
        if (cancels) {
            // Settles the cancel fee for every later exercise date.
            consider(wealth - payoff.cancel(prefix, key), k + 1, k);
            rep.paths_checked += paths_below[static_cast<std::size_t>(k)];
            return;
        }
        if (k == n_steps) {
            rep.paths_checked += 1;
            return;
        }
        const double g = policy.gamma_at(k, idx);
        for (std::uint64_t c = 0; c < m; ++c) {
            midx[static_cast<std::size_t>(k)] = static_cast<int>(c);
            const double next =
                prices[static_cast<std::size_t>(k)] * policy.moves[static_cast<std::size_t>(c)].factor;
            prices[static_cast<std::size_t>(k) + 1] = next;
            self(self, k + 1, idx * m + c,
                 wealth + g * (next - prices[static_cast<std::size_t>(k)]));
        }
    };
    rec(rec, 0, 0, policy.initial_capital);

    rep.worst_path = detail::materialize_path(policy.grid, policy.moves, best_prefix, n_steps);
    rep.exhaustive = true;
    if (rep.paths_checked != total_paths)
        throw std::logic_error("lattice audit lost paths");  // invariant, not input-driven
    return rep;
}

/// Greedy adversary: walks one root-to-leaf path, always taking the child
/// that minimises the post-move exercise margin. Cheap, not exhaustive.
inline HedgeReport adversary_greedy(const HedgePolicy& policy, const PayoffEvaluator& payoff) {
    const int n_steps = policy.steps();
    const std::uint64_t m = policy.moves.size();
    HedgeReport rep;
    rep.exhaustive = false;
    rep.paths_checked = 1;

    std::vector<double> prices(static_cast<std::size_t>(n_steps) + 1);
    std::vector<int> midx(static_cast<std::size_t>(n_steps));
    prices[0] = policy.grid.market.s;
    double wealth = policy.initial_capital;
    std::uint64_t idx = 0;
    int depth_reached = 0;

    const auto consider = [&](double margin, int exercise, int depth) {
        if (margin < rep.worst_shortfall) {
            rep.worst_shortfall = margin;
            rep.worst_exercise = exercise;
        }
        depth_reached = depth;
    };

    for (int k = 0;; ++k) {
        const std::span<const double> prefix(prices.data(), static_cast<std::size_t>(k) + 1);
        const std::span<const int> key(midx.data(), static_cast<std::size_t>(k));
        consider(wealth - payoff.exercise(prefix, key), k, k);
        const bool cancels =
            k < n_steps &&
            policy.cancel.stop[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx)];
        if (cancels) {
            consider(wealth - payoff.cancel(prefix, key), k + 1, k);
            break;
        }
        if (k == n_steps) break;

        const double g = policy.gamma_at(k, idx);
        double best_margin = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (std::uint64_t c = 0; c < m; ++c) {
            midx[static_cast<std::size_t>(k)] = static_cast<int>(c);
            const double next =
                prices[static_cast<std::size_t>(k)] * policy.moves[static_cast<std::size_t>(c)].factor;
            prices[static_cast<std::size_t>(k) + 1] = next;
            const double w2 = wealth + g * (next - prices[static_cast<std::size_t>(k)]);
            const std::span<const double> p2(prices.data(), static_cast<std::size_t>(k) + 2);
            const std::span<const int> k2(midx.data(), static_cast<std::size_t>(k) + 1);
            const double margin = w2 - payoff.exercise(p2, k2);
            if (margin < best_margin) {
                best_margin = margin;
                best_c = static_cast<int>(c);
            }
        }
        midx[static_cast<std::size_t>(k)] = best_c;
        const double next = prices[static_cast<std::size_t>(k)] *
                            policy.moves[static_cast<std::size_t>(best_c)].factor;
        prices[static_cast<std::size_t>(k) + 1] = next;
        wealth += g * (next - prices[static_cast<std::size_t>(k)]);
        idx = idx * m + static_cast<std::uint64_t>(best_c);
    }

    rep.worst_path = detail::materialize_path(
        policy.grid, policy.moves,
        std::span<const int>(midx.data(), static_cast<std::size_t>(depth_reached)), n_steps);
    return rep;
}

enum class AdversaryMode { automatic, exhaustive, greedy };

/// Searches for the shortfall-maximising (path, exercise) pair. Exhaustive
/// under the path cap, greedy descent above it (flagged non-exhaustive).
inline HedgeReport adversary_search(const HedgePolicy& policy, const PayoffEvaluator& payoff,
                                    AdversaryMode mode = AdversaryMode::automatic,
                                    std::uint64_t max_paths = kDefaultPathCap) {
    if (mode == AdversaryMode::exhaustive) return verify_on_lattice(policy, payoff, max_paths);
    if (mode == AdversaryMode::greedy) return adversary_greedy(policy, payoff);
    try {
        checked_path_count(policy.moves.size(), policy.steps(), max_paths);
    } catch (const CapExceeded&) {
        return adversary_greedy(policy, payoff);
    }
    return verify_on_lattice(policy, payoff, max_paths);
}

/// Uniformly random admissible path: each log move draws an independent
/// sign and a magnitude uniform on [a, b].
inline Path sample_market_path(const MarketSpec& m, std::mt19937_64& rng) {
    Path p;
    p.prices.resize(static_cast<std::size_t>(m.steps) + 1);
    p.prices[0] = m.s;
    for (int k = 0; k < m.steps; ++k) {
        const double mag = m.a + canonical_uniform(rng) * (m.b - m.a);
        const double sign = (rng() & 1u) ? 1.0 : -1.0;
        p.prices[static_cast<std::size_t>(k) + 1] =
            p.prices[static_cast<std::size_t>(k)] * std::exp(sign * mag);
    }
    return p;
}

struct LiftedShortfall {
    double margin = std::numeric_limits<double>::infinity();
    int exercise = -1;
};

/// Runs the lattice policy on an arbitrary admissible path: decisions are
/// read at the path's lattice projection, trades settle at the real prices,
/// and the account starts with 2*epsilon of extra capital. Returns the
/// worst settlement margin over all exercise dates.
inline LiftedShortfall lifted_shortfall(const HedgePolicy& policy, const PayoffEvaluator& payoff,
                                        double epsilon, const Path& path) {
    if (payoff.spec().family == PayoffFamily::custom_table)
        throw std::invalid_argument("tabulated payoffs are lattice-only; cannot lift");
    const int n_steps = policy.steps();
    const Path proj = project_to_lattice(policy.grid, path);
    const int cancel_at = policy.cancel.stop_time(proj.move_indices);

    std::vector<double> wealth(static_cast<std::size_t>(n_steps) + 1);
    wealth[0] = policy.initial_capital + 2.0 * epsilon;
    std::uint64_t idx = 0;
    for (int k = 0; k < n_steps; ++k) {
        const double g = policy.gamma_at(k, idx);
        wealth[static_cast<std::size_t>(k) + 1] =
            wealth[static_cast<std::size_t>(k)] +
            g * (path.prices[static_cast<std::size_t>(k) + 1] -
                 path.prices[static_cast<std::size_t>(k)]);
        idx = idx * static_cast<std::uint64_t>(policy.branching()) +
              static_cast<std::uint64_t>(proj.move_indices[static_cast<std::size_t>(k)]);
    }

    LiftedShortfall out;
    for (int l = 0; l <= n_steps; ++l) {
        const int settle = std::min(cancel_at, l);
        const double margin = wealth[static_cast<std::size_t>(settle)] -
                              payoff.settlement(cancel_at, l, path);
        if (margin < out.margin) {
            out.margin = margin;
            out.exercise = l;
        }
    }
    return out;
}

/// Monte Carlo audit of the lifted policy over sampled admissible paths.
/// Report-only: a negative worst_shortfall is the failure signal.
inline HedgeReport lift_and_verify_continuum(const HedgePolicy& policy,
                                             const PayoffEvaluator& payoff, double epsilon,
                                             std::uint64_t samples, std::uint64_t seed,
                                             const AuditSink* sink = nullptr) {
    if (samples == 0) throw std::invalid_argument("need at least one sample");
    std::mt19937_64 rng(mix_seed(seed));
    HedgeReport rep;
    rep.exhaustive = false;
    for (std::uint64_t i = 0; i < samples; ++i) {
        const Path p = sample_market_path(policy.grid.market, rng);
        const LiftedShortfall ls = lifted_shortfall(policy, payoff, epsilon, p);
        if (sink) (*sink)(p, ls.exercise, ls.margin);
        if (ls.margin < rep.worst_shortfall) {
            rep.worst_shortfall = ls.margin;
            rep.worst_exercise = ls.exercise;
            rep.worst_path = p;
        }
        ++rep.paths_checked;
    }
    return rep;
}

/// Node-wise position-size audit against the no-trade capital bound A:
/// |gamma(k, S)| <= A * (1 + (e^b - 1)/(1 - e^{-b}))^k / ((1 - e^{-b}) S_k),
/// plus the n-independent constant obtained from S_k >= s e^{-bk}.
struct PositionBoundReport {
    bool node_wise_ok = true;
    double max_abs_gamma = 0.0;
    double worst_slack = std::numeric_limits<double>::infinity();
    double uniform_bound = 0.0;
};

/// The refinement-independent cap on any position the perfect hedge takes:
/// the node-wise bound evaluated at the lowest reachable price s e^{-bk}.
inline double uniform_position_bound(const MarketSpec& mkt, double payoff_bound) {
    const double shrink = 1.0 - std::exp(-mkt.b);
    const double growth = 1.0 + (std::exp(mkt.b) - 1.0) / shrink;
    return payoff_bound * std::exp(mkt.b * mkt.steps) * std::pow(growth, mkt.steps) /
           (shrink * mkt.s);
}

inline PositionBoundReport check_position_bound(const HedgePolicy& policy, double payoff_bound,
                                                const NumericPolicy& numeric = {}) {
    const MarketSpec& mkt = policy.grid.market;
    const double shrink = 1.0 - std::exp(-mkt.b);
    const double growth = 1.0 + (std::exp(mkt.b) - 1.0) / shrink;

    PositionBoundReport rep;
    rep.uniform_bound = uniform_position_bound(mkt, payoff_bound);

    const std::uint64_t m = policy.moves.size();
    auto walk = [&](auto&& self, int k, std::uint64_t idx, double spot, double growth_k) -> void {
        if (k >= policy.steps()) return;
        const double g = std::fabs(policy.gamma_at(k, idx));
        const double limit = payoff_bound * growth_k / (shrink * spot);
        rep.max_abs_gamma = std::max(rep.max_abs_gamma, g);
        rep.worst_slack = std::min(rep.worst_slack, limit - g);
        if (g > limit + numeric.abs_tol) rep.node_wise_ok = false;
        for (std::uint64_t c = 0; c < m; ++c)
            self(self, k + 1, idx * m + c,
                 spot * policy.moves[static_cast<std::size_t>(c)].factor, growth_k * growth);
    };
    walk(walk, 0, 0, mkt.s, 1.0);
    return rep;
}

/// Empirical Lipschitz constants of F and G in the sup-norm of the price
/// prefix, estimated on sampled paths against their coarse projections.
struct LipschitzEstimate {
    double lip_f = 0.0;
    double lip_g = 0.0;
};

inline LipschitzEstimate estimate_lipschitz(const PayoffEvaluator& payoff, std::uint64_t samples,
                                            std::uint64_t seed) {
    if (payoff.spec().family == PayoffFamily::custom_table)
        throw std::invalid_argument("tabulated payoffs are lattice-only; cannot probe");
    const MarketSpec& mkt = payoff.grid().market;
    std::mt19937_64 rng(mix_seed(seed));
    LipschitzEstimate est;
    const int probes[2] = {3, 7};
    for (const int probe : probes) {
        const GridSpec coarse{mkt, probe};
        for (std::uint64_t i = 0; i < samples; ++i) {
            const Path s = sample_market_path(mkt, rng);
            const Path y = project_to_lattice(coarse, s);
            double dist = 0.0;
            for (int k = 0; k <= mkt.steps; ++k) {
                dist = std::max(dist, std::fabs(s.prices[static_cast<std::size_t>(k)] -
                                                y.prices[static_cast<std::size_t>(k)]));
                if (dist <= 1e-12) continue;
                const std::span<const double> ps(s.prices.data(), static_cast<std::size_t>(k) + 1);
                const std::span<const double> py(y.prices.data(), static_cast<std::size_t>(k) + 1);
                const std::span<const int> none;
                est.lip_f = std::max(
                    est.lip_f, std::fabs(payoff.exercise(ps, none) - payoff.exercise(py, none)) /
                                   dist);
                const double gs = payoff.cancel(ps, none);
                const double gy = payoff.cancel(py, none);
                est.lip_g = std::max(est.lip_g, std::fabs(gs - gy) / dist);
            }
        }
    }
    return est;
}

/// Smallest grid refinement whose projection error fits the tracking
/// budget: (1 + L_F + L_G) * d_n < epsilon / (2 * M * steps) with
/// d_n = s * e^{b*steps} * (e^{steps*(b-a)/n} - 1).
inline int required_refinement(const MarketSpec& mkt, double lip_f, double lip_g,
                               double position_bound, double epsilon) {
    mkt.validate();
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (!(position_bound > 0.0)) throw std::invalid_argument("position bound must be > 0");
    if (mkt.a == mkt.b) return 1;
    const double steps = static_cast<double>(mkt.steps);
    const double budget = epsilon / (2.0 * position_bound * steps * (1.0 + lip_f + lip_g) *
                                     mkt.s * std::exp(mkt.b * steps));
    const double n = steps * (mkt.b - mkt.a) / std::log1p(budget);
    if (!(n >= 1.0)) return 1;
    if (n > 1e9) throw std::invalid_argument("required refinement exceeds 1e9; relax epsilon");
    return static_cast<int>(std::ceil(n));
}

}  // namespace gamehedge

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gamehedge/errors.hpp"
#include "gamehedge/market.hpp"
#include "gamehedge/numerics.hpp"
#include "gamehedge/payoff.hpp"
#include "gamehedge/robust_step.hpp"

namespace gamehedge {

/// Classification of a node in the stopping game. BUYER_STOP: exercising
/// now is optimal (V = F). SELLER_CANCEL: continuing would cost more than
/// the cancel fee (V = G). CONTINUE: V equals the continuation value.
enum class RegionTag : std::uint8_t { BUYER_STOP, SELLER_CANCEL, CONTINUE };

inline const char* to_string(RegionTag t) {
    switch (t) {
        case RegionTag::BUYER_STOP: return "BUYER_STOP";
        case RegionTag::SELLER_CANCEL: return "SELLER_CANCEL";
        case RegionTag::CONTINUE: return "CONTINUE";
    }
    return "?";
}

/// Support of a per-node optimal one-step law, recorded as factor indices;
/// up == down encodes a point mass. {-1, -1} means "not recorded" (trees
/// built under a fixed measure).
struct VertexChoice {
    std::int32_t up = -1;
    std::int32_t down = -1;
};

/// Backward-induction output on the full lattice tree. Level k holds
/// branching()^k nodes; node i at depth k has children i*m + c at k+1.
struct ValueTree {
    GridSpec grid;
    std::vector<Move> moves;
    std::vector<std::vector<double>> value;         // depth 0..steps
    std::vector<std::vector<double>> cont;          // depth 0..steps-1
    std::vector<std::vector<double>> payoff_f;      // depth 0..steps
    std::vector<std::vector<double>> payoff_g;      // depth 0..steps
    std::vector<std::vector<RegionTag>> tag;        // depth 0..steps
    std::vector<std::vector<VertexChoice>> vertex;  // depth 0..steps-1

    int steps() const { return grid.market.steps; }
    int branching() const { return static_cast<int>(moves.size()); }
    double root_value() const { return value[0][0]; }

    /// Continuation value; at maturity it degenerates to the value itself.
    double continuation(int k, std::uint64_t i) const {
        return k < steps() ? cont[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]
                           : value[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    }

    std::uint64_t node_count() const {
        std::uint64_t total = 0;
        for (const auto& lvl : value) total += lvl.size();
        return total;
    }

    OneStepMeasure measure_at(int k, std::uint64_t i) const {
        const VertexChoice& v =
            vertex[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
        if (v.up < 0) throw std::logic_error("node has no recorded measure");
        FactorSet fs = FactorSet::from_grid(grid);
        return measure_from_vertex(fs, v.up, v.down);
    }
};

namespace detail {

/// Shared backward-induction skeleton. cont_fn(depth, node_index,
/// child_values) returns the continuation value and the measure vertex to
/// record (or {-1,-1}). The two clamp orders agree whenever F <= G, which
/// payoff evaluation enforces; both are kept as written.
template <class ContFn>
ValueTree build_value_tree(const GridSpec& grid, const PayoffEvaluator& payoff,
                           std::uint64_t max_nodes, bool sup_inside, const NumericPolicy& num,
                           ContFn&& cont_fn) {
    grid.validate();
    ValueTree t;
    t.grid = grid;
    t.moves = grid.moves();
    const int n_steps = grid.market.steps;
    const std::uint64_t m = t.moves.size();
    checked_node_count(m, n_steps, max_nodes);

    t.value.resize(static_cast<std::size_t>(n_steps) + 1);
    t.payoff_f.resize(static_cast<std::size_t>(n_steps) + 1);
    t.payoff_g.resize(static_cast<std::size_t>(n_steps) + 1);
    t.tag.resize(static_cast<std::size_t>(n_steps) + 1);
    t.cont.resize(static_cast<std::size_t>(n_steps));
    t.vertex.resize(static_cast<std::size_t>(n_steps));
    std::uint64_t width = 1;
    for (int k = 0; k <= n_steps; ++k) {
        t.value[static_cast<std::size_t>(k)].resize(width);
        t.payoff_f[static_cast<std::size_t>(k)].resize(width);
        t.payoff_g[static_cast<std::size_t>(k)].resize(width);
        t.tag[static_cast<std::size_t>(k)].resize(width);
        if (k < n_steps) {
            t.cont[static_cast<std::size_t>(k)].resize(width);
            t.vertex[static_cast<std::size_t>(k)].resize(width);
            width *= m;
        }
    }

    std::vector<double> prices(static_cast<std::size_t>(n_steps) + 1);
    std::vector<int> midx(static_cast<std::size_t>(n_steps));
    std::vector<std::vector<double>> child(static_cast<std::size_t>(n_steps),
                                           std::vector<double>(m));
    prices[0] = grid.market.s;

    auto visit = [&](auto&& self, int k, std::uint64_t index) -> void {
        const std::span<const double> prefix(prices.data(), static_cast<std::size_t>(k) + 1);
        const std::span<const int> key(midx.data(), static_cast<std::size_t>(k));
        const double f = payoff.exercise(prefix, key);
        const double g = payoff.cancel(prefix, key);
        t.payoff_f[static_cast<std::size_t>(k)][index] = f;
        t.payoff_g[static_cast<std::size_t>(k)][index] = g;
        if (k == n_steps) {
            t.value[static_cast<std::size_t>(k)][index] = f;
            t.tag[static_cast<std::size_t>(k)][index] = RegionTag::BUYER_STOP;
            return;
        }
        for (std::uint64_t c = 0; c < m; ++c) {
            midx[static_cast<std::size_t>(k)] = static_cast<int>(c);
            prices[static_cast<std::size_t>(k) + 1] =
                prices[static_cast<std::size_t>(k)] * t.moves[c].factor;
            self(self, k + 1, index * m + c);
            child[static_cast<std::size_t>(k)][c] =
                t.value[static_cast<std::size_t>(k) + 1][index * m + c];
        }
        const auto [cval, vtx] = cont_fn(k, index, std::span<const double>(
                                                       child[static_cast<std::size_t>(k)]));
        t.cont[static_cast<std::size_t>(k)][index] = cval;
        t.vertex[static_cast<std::size_t>(k)][index] = vtx;

        double v;
        if (sup_inside) {
            v = std::max(f, std::min(g, cval));
        } else {
            v = std::min(g, std::max(f, cval));
        }
        // Ties go to the holder; the tolerance keeps knife-edge nodes (for
        // instance F = G = S, where C is a rounding error away from G) from
        // flipping into the cancel region.
        RegionTag tg;
        if (cval > g && !num.close(cval, g)) {
            tg = RegionTag::SELLER_CANCEL;
        } else if (f >= cval || num.close(f, cval)) {
            tg = RegionTag::BUYER_STOP;
        } else {
            tg = RegionTag::CONTINUE;
        }
        t.value[static_cast<std::size_t>(k)][index] = v;
        t.tag[static_cast<std::size_t>(k)][index] = tg;
    };
    visit(visit, 0, 0);
    return t;
}

}  // namespace detail

/// Worst-case price of the game: backward induction with the one-step
/// robust upper expectation as the continuation. V = min(G, max(F, C));
/// the optimal one-step law is recorded at every interior node.
inline ValueTree robust_price(const GridSpec& grid, const PayoffEvaluator& payoff,
                              std::uint64_t max_nodes = kDefaultNodeCap,
                              const NumericPolicy& num = {}) {
    const FactorSet fs = FactorSet::from_grid(grid);
    return detail::build_value_tree(
        grid, payoff, max_nodes, /*sup_inside=*/false, num,
        [&](int, std::uint64_t, std::span<const double> child) {
            const RobustStepResult r = robust_sup(fs, child);
            return std::pair<double, VertexChoice>(r.value,
                                                   VertexChoice{r.up_index, r.down_index});
        });
}

/// A unit-mean law at every interior node, stored as dense rows aligned
/// with the move order.
struct MeasureTree {
    GridSpec grid;
    std::vector<Move> moves;
    std::vector<std::vector<double>> probs;  // [k]: level_size(k) * branching entries

    int steps() const { return grid.market.steps; }
    int branching() const { return static_cast<int>(moves.size()); }

    std::span<const double> row(int k, std::uint64_t i) const {
        const std::size_t m = moves.size();
        return std::span<const double>(
            probs[static_cast<std::size_t>(k)].data() + static_cast<std::size_t>(i) * m, m);
    }

    std::span<double> row(int k, std::uint64_t i) {
        const std::size_t m = moves.size();
        return std::span<double>(
            probs[static_cast<std::size_t>(k)].data() + static_cast<std::size_t>(i) * m, m);
    }

    /// Sparse view of one node's law (zero weights dropped).
    OneStepMeasure node_measure(int k, std::uint64_t i) const {
        OneStepMeasure out;
        const auto r = row(k, i);
        for (std::size_t c = 0; c < r.size(); ++c)
            if (r[c] != 0.0) out.support.push_back({moves[c].factor, r[c]});
        return out;
    }

    void validate() const {
        grid.validate();
        const std::size_t m = moves.size();
        if (probs.size() != static_cast<std::size_t>(steps()))
            throw std::invalid_argument("measure tree must cover depths 0..steps-1");
        std::uint64_t width = 1;
        for (int k = 0; k < steps(); ++k) {
            if (probs[static_cast<std::size_t>(k)].size() != width * m)
                throw std::invalid_argument("measure tree level " + std::to_string(k) +
                                            " has the wrong width");
            for (std::uint64_t i = 0; i < width; ++i) {
                const auto r = row(k, i);
                double mass = 0.0, mean = 0.0;
                for (std::size_t c = 0; c < m; ++c) {
                    if (r[c] < -kMeasureTol)
                        throw std::invalid_argument("negative probability in measure tree");
                    mass += r[c];
                    mean += r[c] * moves[c].factor;
                }
                if (std::fabs(mass - 1.0) > kMeasureTol)
                    throw std::invalid_argument("measure tree row mass differs from 1");
                if (std::fabs(mean - 1.0) > kMeasureTol)
                    throw std::invalid_argument("measure tree row mean differs from 1");
            }
            width *= m;
        }
    }
};

/// Which side the clamp is applied from in the fixed-measure recursion.
/// With F <= G everywhere the two recursions produce identical values;
/// both are implemented literally so that identity can be observed.
enum class RecursionOrder { inf_then_sup, sup_then_inf };

/// Value of the stopping game under one fixed measure tree: the
/// continuation is a plain conditional expectation instead of a sup.
inline ValueTree fixed_measure_dynkin(const GridSpec& grid, const PayoffEvaluator& payoff,
                                      const MeasureTree& measures, RecursionOrder order,
                                      std::uint64_t max_nodes = kDefaultNodeCap,
                                      const NumericPolicy& num = {}) {
    measures.validate();
    if (measures.grid.market.steps != grid.market.steps ||
        measures.moves.size() != grid.moves().size())
        throw std::invalid_argument("measure tree does not match the grid");
    return detail::build_value_tree(
        grid, payoff, max_nodes, order == RecursionOrder::sup_then_inf, num,
        [&](int k, std::uint64_t i, std::span<const double> child) {
            const auto r = measures.row(k, i);
            double e = 0.0;
            for (std::size_t c = 0; c < child.size(); ++c) e += r[c] * child[c];
            return std::pair<double, VertexChoice>(e, VertexChoice{-1, -1});
        });
}

enum class PolicyKind { buyer, seller };

/// First-hit stopping rule stored as per-node flags.
struct StoppingPolicy {
    PolicyKind kind = PolicyKind::buyer;
    int steps = 0;
    int branching = 0;
    std::vector<std::vector<std::uint8_t>> stop;  // [k][i]

    /// First flagged node along the move sequence; `steps` when none fires.
    int stop_time(std::span<const int> move_indices) const {
        std::uint64_t idx = 0;
        for (int k = 0;; ++k) {
            if (stop[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx)]) return k;
            if (k == steps) return steps;
            if (static_cast<std::size_t>(k) >= move_indices.size())
                throw std::invalid_argument("move sequence too short for stop_time");
            idx = idx * static_cast<std::uint64_t>(branching) +
                  static_cast<std::uint64_t>(move_indices[static_cast<std::size_t>(k)]);
        }
    }
};

/// Reads the optimal stopping rules off a value tree. The holder exercises
/// at the first node where the value has dropped to the exercise payoff;
/// the writer cancels at the first SELLER_CANCEL node (never at maturity).
inline StoppingPolicy extract_stopping(const ValueTree& t, PolicyKind kind,
                                       const NumericPolicy& policy = {}) {
    StoppingPolicy p;
    p.kind = kind;
    p.steps = t.steps();
    p.branching = t.branching();
    p.stop.resize(static_cast<std::size_t>(p.steps) + 1);
    for (int k = 0; k <= p.steps; ++k) {
        const auto& val = t.value[static_cast<std::size_t>(k)];
        const auto& pf = t.payoff_f[static_cast<std::size_t>(k)];
        const auto& tg = t.tag[static_cast<std::size_t>(k)];
        auto& s = p.stop[static_cast<std::size_t>(k)];
        s.resize(val.size());
        for (std::size_t i = 0; i < val.size(); ++i) {
            if (kind == PolicyKind::buyer) {
                s[i] = val[i] <= pf[i] + policy.abs_tol ? 1 : 0;
            } else {
                s[i] = (k < p.steps && tg[i] == RegionTag::SELLER_CANCEL) ? 1 : 0;
            }
        }
    }
    return p;
}

/// Materialises the recorded per-node optimal laws as a measure tree.
inline MeasureTree extract_measure(const ValueTree& t) {
    MeasureTree m;
    m.grid = t.grid;
    m.moves = t.moves;
    const FactorSet fs = FactorSet::from_grid(t.grid);
    const std::size_t br = t.moves.size();
    m.probs.resize(static_cast<std::size_t>(t.steps()));
    for (int k = 0; k < t.steps(); ++k) {
        const auto& vts = t.vertex[static_cast<std::size_t>(k)];
        auto& lvl = m.probs[static_cast<std::size_t>(k)];
        lvl.assign(vts.size() * br, 0.0);
        for (std::size_t i = 0; i < vts.size(); ++i) {
            const VertexChoice& v = vts[i];
            if (v.up < 0) throw std::logic_error("tree has no recorded measures");
            if (v.up == v.down) {
                lvl[i * br + static_cast<std::size_t>(v.up)] = 1.0;
            } else {
                const double pu = detail::up_weight(fs.factors[static_cast<std::size_t>(v.up)],
                                                    fs.factors[static_cast<std::size_t>(v.down)]);
                lvl[i * br + static_cast<std::size_t>(v.up)] = pu;
                lvl[i * br + static_cast<std::size_t>(v.down)] = 1.0 - pu;
            }
        }
    }
    return m;
}

/// Count of nodes per region tag, by depth and in total.
struct RegionSummary {
    std::uint64_t buyer_stop = 0;
    std::uint64_t seller_cancel = 0;
    std::uint64_t keep_going = 0;
};

inline RegionSummary summarize_regions(const ValueTree& t) {
    RegionSummary s;
    for (const auto& lvl : t.tag)
        for (const RegionTag tg : lvl) {
            if (tg == RegionTag::BUYER_STOP) ++s.buyer_stop;
            else if (tg == RegionTag::SELLER_CANCEL) ++s.seller_cancel;
            else ++s.keep_going;
        }
    return s;
}

/// One recombined state of the price-indexed recursion. The price is
/// s * exp(sa * a + sj * quantum), both exponents integer-valued.
struct RecombiningNode {
    int sa = 0;
    int sj = 0;
    double spot = 0.0;
    double payoff_f = 0.0;
    double payoff_g = 0.0;
    double value = 0.0;
    double cont = 0.0;
    RegionTag tag = RegionTag::BUYER_STOP;
    VertexChoice vertex;
};

/// Backward induction on price levels instead of path prefixes. Valid only
/// for payoffs that read the current price alone; result matches the tree
/// recursion exactly while the state count stays polynomial in steps.
struct RecombiningSurface {
    GridSpec grid;
    std::vector<Move> moves;
    std::vector<std::vector<RecombiningNode>> level;  // ascending by (sa, sj)

    double root_value() const { return level[0][0].value; }

    std::uint64_t node_count() const {
        std::uint64_t total = 0;
        for (const auto& lvl : level) total += lvl.size();
        return total;
    }
};

inline RecombiningSurface robust_price_recombining(const GridSpec& grid,
                                                   const PayoffEvaluator& payoff,
                                                   std::uint64_t max_nodes = kDefaultNodeCap,
                                                   const NumericPolicy& num = {}) {
    grid.validate();
    if (!payoff.spec().price_only())
        throw std::invalid_argument("recombining pricer requires a price-only payoff");

    RecombiningSurface surf;
    surf.grid = grid;
    surf.moves = grid.moves();
    const int n_steps = grid.market.steps;
    const auto mags = grid.magnitudes();
    const double quantum = mags.size() >= 2 ? mags[1] - mags[0] : 0.0;
    const double a = grid.market.a;

    // Key increments per move; the zero magnitude advances nothing and the
    // `sa` component is dropped entirely when a == 0 (it would carry no
    // price information and only split recombined states).
    struct Delta {
        int sa, sj;
    };
    std::vector<Delta> deltas;
    for (const Move& mv : surf.moves) {
        if (mv.log_step == 0.0) {
            deltas.push_back({0, 0});
        } else {
            deltas.push_back({a == 0.0 ? 0 : mv.sign, mv.sign * mv.mag_index});
        }
    }

    using Key = std::pair<int, int>;
    std::vector<std::map<Key, int>> index(static_cast<std::size_t>(n_steps) + 1);
    surf.level.resize(static_cast<std::size_t>(n_steps) + 1);

    const auto spot_of = [&](const Key& key) {
        return grid.market.s * std::exp(key.first * a + key.second * quantum);
    };

    // Forward sweep: collect reachable states per depth.
    std::uint64_t total = 0;
    index[0][{0, 0}] = 0;
    for (int k = 0; k <= n_steps; ++k) {
        total += index[static_cast<std::size_t>(k)].size();
        if (total > max_nodes)
            throw CapExceeded("recombined state count exceeds the cap of " +
                              std::to_string(max_nodes));
        if (k == n_steps) break;
        for (const auto& [key, slot] : index[static_cast<std::size_t>(k)]) {
            for (const Delta& d : deltas) {
                const Key next{key.first + d.sa, key.second + d.sj};
                auto& nxt = index[static_cast<std::size_t>(k) + 1];
                nxt.emplace(next, static_cast<int>(nxt.size()));
            }
        }
    }
    // std::map fills slots in discovery order; renumber by sorted key so
    // levels are canonically ordered.
    for (int k = 0; k <= n_steps; ++k) {
        int slot = 0;
        for (auto& [key, idx] : index[static_cast<std::size_t>(k)]) idx = slot++;
        surf.level[static_cast<std::size_t>(k)].resize(
            index[static_cast<std::size_t>(k)].size());
    }

    const FactorSet fs = FactorSet::from_grid(grid);
    std::vector<double> child(surf.moves.size());
    for (int k = n_steps; k >= 0; --k) {
        for (const auto& [key, slot] : index[static_cast<std::size_t>(k)]) {
            RecombiningNode node;
            node.sa = key.first;
            node.sj = key.second;
            node.spot = spot_of(key);
            node.payoff_f = payoff.exercise_at(node.spot);
            node.payoff_g = payoff.cancel_at(node.spot, k == n_steps);
            if (k == n_steps) {
                node.value = node.payoff_f;
                node.cont = node.payoff_f;
                node.tag = RegionTag::BUYER_STOP;
            } else {
                for (std::size_t c = 0; c < deltas.size(); ++c) {
                    const Key next{key.first + deltas[c].sa, key.second + deltas[c].sj};
                    const int ci = index[static_cast<std::size_t>(k) + 1].at(next);
                    child[c] =
                        surf.level[static_cast<std::size_t>(k) + 1][static_cast<std::size_t>(ci)]
                            .value;
                }
                const RobustStepResult r = robust_sup(fs, child);
                node.cont = r.value;
                node.vertex = {r.up_index, r.down_index};
                node.value = std::min(node.payoff_g, std::max(node.payoff_f, node.cont));
                if (node.cont > node.payoff_g && !num.close(node.cont, node.payoff_g))
                    node.tag = RegionTag::SELLER_CANCEL;
                else if (node.payoff_f >= node.cont || num.close(node.payoff_f, node.cont))
                    node.tag = RegionTag::BUYER_STOP;
                else node.tag = RegionTag::CONTINUE;
            }
            surf.level[static_cast<std::size_t>(k)][static_cast<std::size_t>(slot)] = node;
        }
    }
    return surf;
}

}  // namespace gamehedge

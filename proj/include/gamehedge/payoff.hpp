#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gamehedge/errors.hpp"
#include "gamehedge/market.hpp"

namespace gamehedge {

enum class PayoffFamily {
    game_put,      // F = (strike - S)^+
    game_call,     // F = (S - strike)^+
    digital_game,  // F = 1{S >= strike}
    lookback_game, // F = running max - S
    custom_table,  // per-node values keyed by signed-index prefix strings
};

inline const char* to_string(PayoffFamily f) {
    switch (f) {
        case PayoffFamily::game_put: return "game_put";
        case PayoffFamily::game_call: return "game_call";
        case PayoffFamily::digital_game: return "digital_game";
        case PayoffFamily::lookback_game: return "lookback_game";
        case PayoffFamily::custom_table: return "custom_table";
    }
    return "?";
}

inline PayoffFamily payoff_family_from_string(const std::string& s) {
    if (s == "game_put") return PayoffFamily::game_put;
    if (s == "game_call") return PayoffFamily::game_call;
    if (s == "digital_game") return PayoffFamily::digital_game;
    if (s == "lookback_game") return PayoffFamily::lookback_game;
    if (s == "custom_table") return PayoffFamily::custom_table;
    throw std::invalid_argument("unknown payoff family '" + s + "'");
}

/// Two-sided payoff description. The holder's exercise value is F; the
/// writer's cancel cost is G = F + penalty (per-step surcharge), with the
/// surcharge waived at maturity unless configured otherwise. custom_table
/// supplies both F and G per lattice node instead.
struct PayoffSpec {
    PayoffFamily family = PayoffFamily::game_put;
    double strike = 1.0;
    double penalty = 0.0;
    bool terminal_penalty_waived = true;
    std::map<std::string, double> table_f;  // custom_table only
    std::map<std::string, double> table_g;

    void validate() const {
        if (!(std::isfinite(strike)) || strike < 0.0)
            throw std::invalid_argument("payoff.strike must be finite and >= 0");
        if (!(std::isfinite(penalty)) || penalty < 0.0)
            throw std::invalid_argument("payoff.penalty must be finite and >= 0");
        if (family == PayoffFamily::custom_table) {
            if (table_f.empty() || table_g.empty())
                throw std::invalid_argument("custom_table payoff needs both F and G tables");
            if (!table_f.count("") || !table_g.count(""))
                throw std::invalid_argument("custom_table payoff needs root entries (key \"\")");
        }
    }

    /// The exercise value depends on the current price only (no path memory).
    bool price_only() const {
        return family == PayoffFamily::game_put || family == PayoffFamily::game_call ||
               family == PayoffFamily::digital_game;
    }

    /// Lipschitz in the price path; digital and tabulated payoffs are not.
    bool continuous() const {
        return family == PayoffFamily::game_put || family == PayoffFamily::game_call ||
               family == PayoffFamily::lookback_game;
    }
};

/// Binds a payoff to a grid and evaluates F / G on path prefixes. The
/// prefix spans are all an evaluation may see, so adaptedness holds by
/// construction. Values are checked nonnegative with F <= G on every call.
class PayoffEvaluator {
  public:
    PayoffEvaluator(PayoffSpec spec, GridSpec grid)
        : spec_(std::move(spec)), grid_(std::move(grid)), moves_(grid_.moves()) {
        grid_.validate();
        spec_.validate();
    }

    const PayoffSpec& spec() const { return spec_; }
    const GridSpec& grid() const { return grid_; }

    /// Exercise value at the prefix's last time point.
    double exercise(std::span<const double> prices, std::span<const int> moves) const {
        const double f = raw_exercise(prices, moves);
        if (!(f >= 0.0))
            throw std::invalid_argument("payoff F must be >= 0 (node '" + key_of(moves) + "')");
        return f;
    }

    /// Cancel cost at the prefix's last time point.
    double cancel(std::span<const double> prices, std::span<const int> moves) const {
        double g;
        if (spec_.family == PayoffFamily::custom_table) {
            g = lookup(spec_.table_g, moves, "G");
        } else {
            const bool terminal =
                static_cast<int>(prices.size()) - 1 == grid_.market.steps;
            const double surcharge =
                terminal && spec_.terminal_penalty_waived ? 0.0 : spec_.penalty;
            g = raw_exercise(prices, moves) + surcharge;
        }
        const double f = exercise(prices, moves);
        if (f > g)
            throw PayoffOrderViolation("payoff F exceeds G at node '" + key_of(moves) + "'");
        return g;
    }

    /// Settlement when the writer cancels at step k and the holder exercises
    /// at step l: the earlier side fixes the payment. Only prices up to
    /// min(k, l) are read.
    double settlement(int cancel_k, int exercise_l, const Path& path) const {
        const int n_steps = grid_.market.steps;
        if (cancel_k < 0 || cancel_k > n_steps || exercise_l < 0 || exercise_l > n_steps)
            throw std::invalid_argument("settlement indices must lie in [0, steps]");
        const int j = std::min(cancel_k, exercise_l);
        std::span<const double> prices(path.prices.data(), static_cast<std::size_t>(j) + 1);
        std::span<const int> moves =
            path.grid_tagged()
                ? std::span<const int>(path.move_indices.data(), static_cast<std::size_t>(j))
                : std::span<const int>();
        return cancel_k < exercise_l ? cancel(prices, moves) : exercise(prices, moves);
    }

    // Fast path for price-only families (recombining pricer).
    double exercise_at(double price) const {
        switch (spec_.family) {
            case PayoffFamily::game_put: return std::max(spec_.strike - price, 0.0);
            case PayoffFamily::game_call: return std::max(price - spec_.strike, 0.0);
            case PayoffFamily::digital_game: return price >= spec_.strike ? 1.0 : 0.0;
            default:
                throw std::invalid_argument("payoff is not price-only");
        }
    }

    double cancel_at(double price, bool terminal) const {
        const double surcharge =
            terminal && spec_.terminal_penalty_waived ? 0.0 : spec_.penalty;
        return exercise_at(price) + surcharge;
    }

  private:
    double raw_exercise(std::span<const double> prices, std::span<const int> moves) const {
        if (prices.empty()) throw std::invalid_argument("empty price prefix");
        const double last = prices.back();
        switch (spec_.family) {
            case PayoffFamily::game_put: return std::max(spec_.strike - last, 0.0);
            case PayoffFamily::game_call: return std::max(last - spec_.strike, 0.0);
            case PayoffFamily::digital_game: return last >= spec_.strike ? 1.0 : 0.0;
            case PayoffFamily::lookback_game: {
                const double peak = *std::max_element(prices.begin(), prices.end());
                return peak - last;
            }
            case PayoffFamily::custom_table: return lookup(spec_.table_f, moves, "F");
        }
        throw std::logic_error("unreachable payoff family");
    }

    double lookup(const std::map<std::string, double>& table, std::span<const int> moves,
                  const char* which) const {
        const std::string key = key_of(moves);
        const auto it = table.find(key);
        if (it == table.end())
            throw std::invalid_argument(std::string("custom_table payoff missing ") + which +
                                        " entry for node '" + key + "'");
        if (!std::isfinite(it->second) || it->second < 0.0)
            throw std::invalid_argument(std::string("custom_table ") + which + " entry at '" +
                                        key + "' must be finite and >= 0");
        return it->second;
    }

    std::string key_of(std::span<const int> moves) const {
        if (spec_.family != PayoffFamily::custom_table && moves.empty()) return "";
        return node_key(moves_, moves);
    }

    PayoffSpec spec_;
    GridSpec grid_;
    std::vector<Move> moves_;
};

/// Largest cancel cost over every lattice node and time. This is the
/// capital with which the writer could skip hedging altogether.
inline double payoff_upper_bound(const PayoffEvaluator& payoff,
                                 std::uint64_t max_nodes = kDefaultNodeCap) {
    double bound = 0.0;
    for_each_node(
        payoff.grid(),
        [&](int, std::span<const double> prices, std::span<const int> moves) {
            bound = std::max(bound, payoff.cancel(prices, moves));
        },
        max_nodes);
    return bound;
}

}  // namespace gamehedge

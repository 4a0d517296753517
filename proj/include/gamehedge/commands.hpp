#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gamehedge/config.hpp"
#include "gamehedge/dynkin.hpp"
#include "gamehedge/errors.hpp"
#include "gamehedge/hedging.hpp"
#include "gamehedge/market.hpp"
#include "gamehedge/payoff.hpp"
#include "gamehedge/robust_step.hpp"
#include "gamehedge/serialize.hpp"
#include "gamehedge/version.hpp"

namespace gamehedge {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerificationFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitCapExceeded = 3;

struct CommandOutput {
    nlohmann::json doc;
    std::string csv;
    int exit_code = kExitOk;
};

namespace detail {

inline nlohmann::json envelope(const char* command, const RunConfig& cfg) {
    return nlohmann::json{
        {"artifact",
         {{"name", "gamehedge"}, {"version", kVersion}, {"schema_version", kSchemaVersion}}},
        {"command", command},
        {"seed", cfg.seed},
        {"config", run_config_to_json(cfg)}};
}

inline double tree_payoff_bound(const ValueTree& t) {
    double bound = 0.0;
    for (const auto& lvl : t.payoff_g)
        for (const double g : lvl) bound = std::max(bound, g);
    return bound;
}

struct CancelSummary {
    std::uint64_t nodes = 0;
    int earliest = -1;
};

inline CancelSummary summarize_cancels(const ValueTree& t) {
    CancelSummary s;
    for (int k = 0; k < static_cast<int>(t.tag.size()); ++k)
        for (const RegionTag tg : t.tag[static_cast<std::size_t>(k)])
            if (tg == RegionTag::SELLER_CANCEL) {
                ++s.nodes;
                if (s.earliest < 0) s.earliest = k;
            }
    return s;
}

struct PriceOutcome {
    std::string mode;
    double root = 0.0;
    std::uint64_t nodes = 0;
    RegionSummary regions;
    std::optional<ValueTree> tree;
};

inline PriceOutcome price_at(const RunConfig& cfg, int refine, bool keep_tree) {
    const GridSpec grid{cfg.market, refine};
    const PayoffEvaluator payoff(cfg.payoff, grid);

    const auto tree_fits = [&] {
        try {
            checked_node_count(grid.moves().size(), cfg.market.steps, cfg.caps.max_nodes);
            return true;
        } catch (const CapExceeded&) {
            return false;
        }
    };

    std::string mode = cfg.pricer;
    if (mode == "auto") {
        mode = "tree";
        if (!tree_fits() && cfg.payoff.price_only()) mode = "recombining";
    }

    PriceOutcome out;
    out.mode = mode;
    if (mode == "tree") {
        ValueTree t = robust_price(grid, payoff, cfg.caps.max_nodes, cfg.numeric);
        out.root = t.root_value();
        out.nodes = t.node_count();
        out.regions = summarize_regions(t);
        if (keep_tree) out.tree = std::move(t);
    } else {
        const RecombiningSurface surf =
            robust_price_recombining(grid, payoff, cfg.caps.max_nodes, cfg.numeric);
        out.root = surf.root_value();
        out.nodes = surf.node_count();
        for (const auto& lvl : surf.level)
            for (const RecombiningNode& node : lvl) {
                if (node.tag == RegionTag::BUYER_STOP) ++out.regions.buyer_stop;
                else if (node.tag == RegionTag::SELLER_CANCEL) ++out.regions.seller_cancel;
                else ++out.regions.keep_going;
            }
    }
    return out;
}

inline nlohmann::json regions_to_json(const RegionSummary& s) {
    return nlohmann::json{{"buyer_stop", s.buyer_stop},
                          {"seller_cancel", s.seller_cancel},
                          {"continue", s.keep_going}};
}

}  // namespace detail

/// Robust price per grid refinement, with region summaries and an
/// extracted-measure self check (tree mode).
inline CommandOutput cmd_price(const RunConfig& cfg) {
    CommandOutput out;
    out.doc = detail::envelope("price", cfg);
    nlohmann::json per_n = nlohmann::json::array();
    out.csv = "n,mode,root,nodes,buyer_stop,seller_cancel,continue,self_check_gap\n";

    for (const int n : cfg.n_values) {
        detail::PriceOutcome res = detail::price_at(cfg, n, /*keep_tree=*/true);
        nlohmann::json entry{{"n", n},
                             {"mode", res.mode},
                             {"root", res.root},
                             {"nodes", res.nodes},
                             {"regions", detail::regions_to_json(res.regions)}};
        std::string gap_cell = "";
        if (res.tree) {
            const GridSpec grid{cfg.market, n};
            const PayoffEvaluator payoff(cfg.payoff, grid);
            const MeasureTree extracted = extract_measure(*res.tree);
            const ValueTree fixed = fixed_measure_dynkin(grid, payoff, extracted,
                                                         RecursionOrder::inf_then_sup,
                                                         cfg.caps.max_nodes, cfg.numeric);
            const double gap = res.root - fixed.root_value();
            entry["measure_self_check"] = {{"fixed_root", fixed.root_value()}, {"gap", gap}};
            gap_cell = num_str(gap);
            if (cfg.emit_tree) entry["tree"] = value_tree_to_json(*res.tree);
        }
        per_n.push_back(std::move(entry));
        out.csv += std::to_string(n) + "," + res.mode + "," + num_str(res.root) + "," +
                   std::to_string(res.nodes) + "," + std::to_string(res.regions.buyer_stop) +
                   "," + std::to_string(res.regions.seller_cancel) + "," +
                   std::to_string(res.regions.keep_going) + "," + gap_cell + "\n";
    }
    out.doc["results"] = {{"per_n", std::move(per_n)}};
    return out;
}

namespace detail {

inline nlohmann::json hedge_summary_json(const HedgePolicy& policy,
                                         const PositionBoundReport& pos,
                                         const CancelSummary& cancels) {
    return nlohmann::json{
        {"capital", policy.initial_capital},
        {"max_abs_gamma", policy.max_abs_gamma},
        {"position_bound",
         {{"node_wise_ok", pos.node_wise_ok},
          {"worst_slack", pos.worst_slack},
          {"uniform_bound", pos.uniform_bound}}},
        {"cancel", {{"nodes", cancels.nodes}, {"earliest", cancels.earliest}}}};
}

}  // namespace detail

/// Builds the perfect hedge at n_values[0] and audits it exhaustively.
inline CommandOutput cmd_hedge(const RunConfig& cfg) {
    CommandOutput out;
    out.doc = detail::envelope("hedge", cfg);

    const int n0 = cfg.n_values.front();
    const GridSpec grid{cfg.market, n0};
    const PayoffEvaluator payoff(cfg.payoff, grid);
    const ValueTree tree = robust_price(grid, payoff, cfg.caps.max_nodes, cfg.numeric);
    const HedgePolicy policy = build_hedge(tree, cfg.numeric);
    const double bound_a = detail::tree_payoff_bound(tree);
    const PositionBoundReport pos = check_position_bound(policy, bound_a, cfg.numeric);

    WorstRows rows(static_cast<std::size_t>(cfg.csv_rows));
    const AuditSink sink = [&](const Path& p, int exercise, double margin) {
        rows.add(AuditRow{path_cell(p), exercise, margin});
    };
    const AuditSink* sink_ptr = cfg.csv_rows > 0 ? &sink : nullptr;
    const HedgeReport report = verify_on_lattice(policy, payoff, cfg.caps.max_paths, sink_ptr);

    out.doc["results"] = {{"n", n0},
                          {"hedge", detail::hedge_summary_json(policy, pos,
                                                               detail::summarize_cancels(tree))},
                          {"audit", hedge_report_to_json(report)}};
    out.csv = audit_rows_csv(rows.take());
    out.exit_code =
        report.worst_shortfall < -cfg.numeric.abs_tol ? kExitVerificationFailed : kExitOk;
    return out;
}

/// Audits the hedge with optional capital override/scale, plus an
/// off-lattice lift report when epsilon and samples are configured and the
/// payoff is continuous. Exit status follows the lattice audit.
inline CommandOutput cmd_verify(const RunConfig& cfg) {
    CommandOutput out;
    out.doc = detail::envelope("verify", cfg);

    const int n0 = cfg.n_values.front();
    const GridSpec grid{cfg.market, n0};
    const PayoffEvaluator payoff(cfg.payoff, grid);
    const ValueTree tree = robust_price(grid, payoff, cfg.caps.max_nodes, cfg.numeric);
    HedgePolicy policy = build_hedge(tree, cfg.numeric);

    const double fair_capital = policy.initial_capital;
    if (cfg.capital_override) {
        policy.initial_capital = *cfg.capital_override;
    } else if (cfg.capital_scale) {
        policy.initial_capital = fair_capital * *cfg.capital_scale;
    }

    const double bound_a = detail::tree_payoff_bound(tree);
    const PositionBoundReport pos = check_position_bound(policy, bound_a, cfg.numeric);

    WorstRows rows(static_cast<std::size_t>(cfg.csv_rows));
    const AuditSink sink = [&](const Path& p, int exercise, double margin) {
        rows.add(AuditRow{path_cell(p), exercise, margin});
    };
    const AuditSink* sink_ptr = cfg.csv_rows > 0 ? &sink : nullptr;
    const HedgeReport report = verify_on_lattice(policy, payoff, cfg.caps.max_paths, sink_ptr);

    out.doc["results"] = {{"n", n0},
                          {"fair_capital", fair_capital},
                          {"capital_used", policy.initial_capital},
                          {"hedge", detail::hedge_summary_json(policy, pos,
                                                               detail::summarize_cancels(tree))},
                          {"audit", hedge_report_to_json(report)}};

    // Table payoffs are only defined on lattice states, so they cannot be
    // scored off-lattice. Everything else runs; the guarantee flag records
    // whether the continuity assumption behind the budget actually holds.
    if (cfg.epsilon > 0.0 && cfg.samples > 0 &&
        cfg.payoff.family != PayoffFamily::custom_table) {
        const HedgeReport lift =
            lift_and_verify_continuum(policy, payoff, cfg.epsilon, cfg.samples, cfg.seed);
        out.doc["results"]["lift"] = {{"epsilon", cfg.epsilon},
                                      {"extra_capital", 2.0 * cfg.epsilon},
                                      {"guaranteed", cfg.payoff.continuous()},
                                      {"report", hedge_report_to_json(lift)}};
    }

    out.csv = audit_rows_csv(rows.take());
    out.exit_code =
        report.worst_shortfall < -cfg.numeric.abs_tol ? kExitVerificationFailed : kExitOk;
    return out;
}

/// Hunts for the worst (path, exercise) pair against the built hedge:
/// exhaustive within the path cap, greedy descent beyond it.
inline CommandOutput cmd_adversary(const RunConfig& cfg) {
    CommandOutput out;
    out.doc = detail::envelope("adversary", cfg);

    const int n0 = cfg.n_values.front();
    const GridSpec grid{cfg.market, n0};
    const PayoffEvaluator payoff(cfg.payoff, grid);
    const ValueTree tree = robust_price(grid, payoff, cfg.caps.max_nodes, cfg.numeric);
    HedgePolicy policy = build_hedge(tree, cfg.numeric);
    if (cfg.capital_override) policy.initial_capital = *cfg.capital_override;
    else if (cfg.capital_scale) policy.initial_capital = tree.root_value() * *cfg.capital_scale;

    const HedgeReport report =
        adversary_search(policy, payoff, AdversaryMode::automatic, cfg.caps.max_paths);

    out.doc["results"] = {{"n", n0},
                          {"mode", report.exhaustive ? "exhaustive" : "greedy"},
                          {"report", hedge_report_to_json(report)}};
    out.csv = "path,exercise,margin\n" + path_cell(report.worst_path) + "," +
              std::to_string(report.worst_exercise) + "," + num_str(report.worst_shortfall) +
              "\n";
    out.exit_code =
        report.worst_shortfall < -cfg.numeric.abs_tol ? kExitVerificationFailed : kExitOk;
    return out;
}

/// Cross-checks the robust price against fixed-measure valuations: an
/// exhaustive sweep over vertex measure trees when that fits the path cap,
/// a seeded sample otherwise. Also tabulates both clamp orders.
inline CommandOutput cmd_oracle(const RunConfig& cfg) {
    CommandOutput out;
    out.doc = detail::envelope("oracle", cfg);

    const int n0 = cfg.n_values.front();
    const GridSpec grid{cfg.market, n0};
    const PayoffEvaluator payoff(cfg.payoff, grid);
    const ValueTree tree = robust_price(grid, payoff, cfg.caps.max_nodes, cfg.numeric);
    const double robust_root = tree.root_value();

    const FactorSet fs = FactorSet::from_grid(grid);
    const auto vertices = martingale_vertices(fs);
    const std::uint64_t v = vertices.size();
    const std::uint64_t m = grid.moves().size();
    const int n_steps = cfg.market.steps;

    std::uint64_t interior = 0;
    {
        std::uint64_t width = 1;
        for (int k = 0; k < n_steps; ++k) {
            interior += width;
            width *= m;
        }
    }

    bool exhaustive = true;
    std::uint64_t combos = 1;
    for (std::uint64_t i = 0; i < interior && exhaustive; ++i) {
        if (combos > cfg.caps.max_paths / v) exhaustive = false;
        else combos *= v;
    }

    MeasureTree mt;
    mt.grid = grid;
    mt.moves = grid.moves();
    mt.probs.resize(static_cast<std::size_t>(n_steps));
    {
        std::uint64_t width = 1;
        for (int k = 0; k < n_steps; ++k) {
            mt.probs[static_cast<std::size_t>(k)].assign(width * m, 0.0);
            width *= m;
        }
    }

    const auto fill_vertex_row = [&](int k, std::uint64_t i, const RobustStepResult& vx) {
        auto row = mt.row(k, i);
        std::fill(row.begin(), row.end(), 0.0);
        if (vx.up_index == vx.down_index) {
            row[static_cast<std::size_t>(vx.up_index)] = 1.0;
        } else {
            const double pu = (1.0 - fs.factors[static_cast<std::size_t>(vx.down_index)]) /
                              (fs.factors[static_cast<std::size_t>(vx.up_index)] -
                               fs.factors[static_cast<std::size_t>(vx.down_index)]);
            row[static_cast<std::size_t>(vx.up_index)] = pu;
            row[static_cast<std::size_t>(vx.down_index)] = 1.0 - pu;
        }
    };

    const auto fill_measure_row = [&](int k, std::uint64_t i, const OneStepMeasure& msr) {
        auto row = mt.row(k, i);
        std::fill(row.begin(), row.end(), 0.0);
        for (const auto& w : msr.support) {
            for (std::size_t c = 0; c < fs.factors.size(); ++c) {
                if (fs.factors[c] == w.factor) {
                    row[c] += w.prob;
                    break;
                }
            }
        }
    };

    double best = -std::numeric_limits<double>::infinity();
    double order_max_diff = 0.0;
    std::uint64_t evaluated = 0;
    nlohmann::json table = nlohmann::json::array();
    out.csv = "tree,infsup,supinf,diff\n";

    const auto evaluate = [&](std::uint64_t label) {
        const ValueTree lo = fixed_measure_dynkin(grid, payoff, mt,
                                                  RecursionOrder::inf_then_sup,
                                                  cfg.caps.max_nodes, cfg.numeric);
        const ValueTree hi = fixed_measure_dynkin(grid, payoff, mt,
                                                  RecursionOrder::sup_then_inf,
                                                  cfg.caps.max_nodes, cfg.numeric);
        const double diff = std::fabs(lo.root_value() - hi.root_value());
        order_max_diff = std::max(order_max_diff, diff);
        best = std::max(best, lo.root_value());
        if (static_cast<int>(table.size()) < cfg.csv_rows) {
            table.push_back({{"tree", label},
                             {"infsup", lo.root_value()},
                             {"supinf", hi.root_value()},
                             {"diff", diff}});
            out.csv += std::to_string(label) + "," + num_str(lo.root_value()) + "," +
                       num_str(hi.root_value()) + "," + num_str(diff) + "\n";
        }
        ++evaluated;
    };

    if (exhaustive) {
        std::vector<std::uint64_t> digit(static_cast<std::size_t>(interior), 0);
        for (std::uint64_t combo = 0; combo < combos; ++combo) {
            std::uint64_t rest = combo;
            std::uint64_t node = 0;
            std::uint64_t width = 1;
            for (int k = 0; k < n_steps; ++k) {
                for (std::uint64_t i = 0; i < width; ++i, ++node) {
                    digit[static_cast<std::size_t>(node)] = rest % v;
                    rest /= v;
                    fill_vertex_row(k, i, vertices[static_cast<std::size_t>(
                                              digit[static_cast<std::size_t>(node)])]);
                }
                width *= m;
            }
            evaluate(combo);
        }
    } else {
        const std::uint64_t trees = std::max<std::uint64_t>(1, cfg.samples);
        for (std::uint64_t t = 0; t < trees; ++t) {
            std::uint64_t node = 0;
            std::uint64_t width = 1;
            for (int k = 0; k < n_steps; ++k) {
                for (std::uint64_t i = 0; i < width; ++i, ++node) {
                    const std::uint64_t node_seed =
                        mix_seed(cfg.seed + 0x9e3779b97f4a7c15ULL * (t + 1) + node);
                    fill_measure_row(k, i, sample_measure(fs, node_seed));
                }
                width *= m;
            }
            evaluate(t);
        }
    }

    const double gap = robust_root - best;
    const bool consistent = exhaustive ? std::fabs(gap) <= cfg.numeric.abs_tol
                                       : gap >= -cfg.numeric.abs_tol;

    out.doc["results"] = {{"n", n0},
                          {"mode", exhaustive ? "exhaustive" : "sampled"},
                          {"robust_root", robust_root},
                          {"best_fixed_root", best},
                          {"gap", gap},
                          {"trees_evaluated", evaluated},
                          {"order_max_abs_diff", order_max_diff},
                          {"consistent", consistent},
                          {"table", std::move(table)}};
    out.exit_code = consistent ? kExitOk : kExitVerificationFailed;
    return out;
}

/// Prices across the configured refinements, reports the monotone chain,
/// and inverts the tracking budget into required refinements for a ladder
/// of epsilon targets. Makes no claim about a limit.
inline CommandOutput cmd_converge(const RunConfig& cfg) {
    if (cfg.n_values.size() < 3)
        throw ConfigError("invalid config:\n  - converge needs at least three n_values");

    CommandOutput out;
    out.doc = detail::envelope("converge", cfg);
    out.csv = "n,root,diff_from_previous\n";

    nlohmann::json per_n = nlohmann::json::array();
    bool monotone = true;
    double prev_root = 0.0;
    int prev_n = 0;
    for (std::size_t i = 0; i < cfg.n_values.size(); ++i) {
        const int n = cfg.n_values[i];
        const detail::PriceOutcome res = detail::price_at(cfg, n, /*keep_tree=*/false);
        nlohmann::json entry{{"n", n}, {"root", res.root}, {"mode", res.mode}};
        std::string diff_cell;
        if (i > 0) {
            const double diff = res.root - prev_root;
            entry["diff_from_previous"] = diff;
            diff_cell = num_str(diff);
            if (n % prev_n == 0 && prev_root > res.root + cfg.numeric.abs_tol) monotone = false;
        }
        per_n.push_back(std::move(entry));
        out.csv += std::to_string(n) + "," + num_str(res.root) + "," + diff_cell + "\n";
        prev_root = res.root;
        prev_n = n;
    }

    out.doc["results"] = {{"per_n", std::move(per_n)}, {"monotone", monotone}};

    if (cfg.payoff.continuous() && cfg.epsilon > 0.0) {
        const int finest = *std::max_element(cfg.n_values.begin(), cfg.n_values.end());
        const GridSpec grid{cfg.market, finest};
        const PayoffEvaluator payoff(cfg.payoff, grid);
        const double bound_a = payoff_upper_bound(payoff, cfg.caps.max_nodes);
        const double position = uniform_position_bound(cfg.market, bound_a);
        const std::uint64_t lip_samples =
            cfg.samples > 0 ? std::min<std::uint64_t>(cfg.samples, 2000) : 1000;
        const LipschitzEstimate lip = estimate_lipschitz(payoff, lip_samples, cfg.seed);

        nlohmann::json budget = nlohmann::json::array();
        for (const double scale : {1.0, 0.5, 0.2, 0.1}) {
            const double eps = cfg.epsilon * scale;
            budget.push_back({{"epsilon", eps},
                              {"required_n",
                               required_refinement(cfg.market, lip.lip_f, lip.lip_g, position,
                                                   eps)},
                              {"extra_capital", 2.0 * eps}});
        }
        out.doc["results"]["lift_budget"] = {{"position_bound", position},
                                             {"payoff_bound", bound_a},
                                             {"lipschitz_f", lip.lip_f},
                                             {"lipschitz_g", lip.lip_g},
                                             {"targets", std::move(budget)}};
    } else {
        out.doc["results"]["lift_budget"] =
            "skipped (needs a continuous payoff and epsilon > 0)";
    }

    out.exit_code = monotone ? kExitOk : kExitVerificationFailed;
    return out;
}

}  // namespace gamehedge

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "test_support.hpp"

using namespace gamehedge;
using testsupport::make_rng;

namespace {

GridSpec put_grid() { return GridSpec{{1.0, std::log(2.0), std::log(2.0), 1}, 0}; }

Path two_point(double p0, double p1, int move_index) {
    Path p;
    p.prices = {p0, p1};
    p.move_indices = {move_index};
    return p;
}

}  // namespace

TEST(Settlement, CancelBeforeExercisePaysG) {
    PayoffSpec spec;
    spec.family = PayoffFamily::game_put;
    spec.strike = 1.0;
    spec.penalty = 0.1;
    const PayoffEvaluator payoff(spec, put_grid());

    // writer cancels at 0, holder exercises at 1: G_0 = (1-1)^+ + 0.1
    EXPECT_DOUBLE_EQ(payoff.settlement(0, 1, two_point(1.0, 2.0, 1)), 0.1);
    // simultaneous at 1: holder's claim F_1 = (1-0.5)^+
    EXPECT_DOUBLE_EQ(payoff.settlement(1, 1, two_point(1.0, 0.5, 0)), 0.5);
}

TEST(Settlement, ZeroPenaltyCollapsesToExerciseValue) {
    PayoffSpec spec;
    spec.family = PayoffFamily::game_put;
    spec.strike = 1.4;
    spec.penalty = 0.0;
    const GridSpec grid{{1.0, 0.1, 0.3, 2}, 1};
    const PayoffEvaluator payoff(spec, grid);
    LatticePaths all(grid);
    auto rng = make_rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const Path p = all.at(rng() % all.size());
        const int k = testsupport::pick(rng, 0, 2), l = testsupport::pick(rng, 0, 2);
        const int j = std::min(k, l);
        const std::span<const double> prefix(p.prices.data(), static_cast<std::size_t>(j) + 1);
        const std::span<const int> midx(p.move_indices.data(), static_cast<std::size_t>(j));
        EXPECT_DOUBLE_EQ(payoff.settlement(k, l, p), payoff.exercise(prefix, midx));
    }
}

TEST(Settlement, ReadsOnlyThePrefix) {
    auto rng = make_rng(4);
    for (int trial = 0; trial < 60; ++trial) {
        const MarketSpec m = testsupport::rand_market(rng, 3);
        const GridSpec grid{m, 1};
        const PayoffSpec spec = testsupport::rand_family_payoff(rng, m);
        const PayoffEvaluator payoff(spec, grid);
        LatticePaths all(grid);
        Path p = all.at(rng() % all.size());
        const int k = testsupport::pick(rng, 0, 3), l = testsupport::pick(rng, 0, 3);
        const double before = payoff.settlement(k, l, p);

        // mangle everything after the settlement date; the value must not move
        for (std::size_t i = static_cast<std::size_t>(std::min(k, l)) + 1; i < p.prices.size();
             ++i)
            p.prices[i] *= testsupport::uni(rng, 0.5, 2.0);
        EXPECT_DOUBLE_EQ(payoff.settlement(k, l, p), before);
    }
}

TEST(Families, FormulasAtAPoint) {
    const GridSpec grid = put_grid();
    const std::span<const int> none;

    PayoffSpec call;
    call.family = PayoffFamily::game_call;
    call.strike = 0.8;
    const double cp[2] = {1.0, 2.0};
    EXPECT_DOUBLE_EQ(PayoffEvaluator(call, grid).exercise(std::span(cp, 2), none), 1.2);

    PayoffSpec digital;
    digital.family = PayoffFamily::digital_game;
    digital.strike = 1.0;
    digital.penalty = 0.25;
    const PayoffEvaluator dig(digital, grid);
    const double up[2] = {1.0, 2.0}, down[2] = {1.0, 0.5};
    EXPECT_DOUBLE_EQ(dig.exercise(std::span(up, 2), none), 1.0);
    EXPECT_DOUBLE_EQ(dig.exercise(std::span(down, 2), none), 0.0);
    EXPECT_DOUBLE_EQ(dig.cancel(std::span(down, 1), none), 1.25);  // at the money at t=0

    PayoffSpec look;
    look.family = PayoffFamily::lookback_game;
    const double path3[3] = {1.0, 2.0, 1.0};
    const GridSpec grid2{{1.0, std::log(2.0), std::log(2.0), 2}, 0};
    EXPECT_DOUBLE_EQ(PayoffEvaluator(look, grid2).exercise(std::span(path3, 3), none), 1.0);
}

TEST(CancelCost, TerminalSurchargeFollowsFlag) {
    const GridSpec grid = put_grid();
    const std::span<const int> none;
    const double path[2] = {1.0, 0.5};

    PayoffSpec waived;
    waived.family = PayoffFamily::game_put;
    waived.strike = 1.0;
    waived.penalty = 0.2;
    EXPECT_DOUBLE_EQ(PayoffEvaluator(waived, grid).cancel(std::span(path, 2), none), 0.5);

    PayoffSpec kept = waived;
    kept.terminal_penalty_waived = false;
    EXPECT_DOUBLE_EQ(PayoffEvaluator(kept, grid).cancel(std::span(path, 2), none), 0.7);
    // before maturity the surcharge always applies
    EXPECT_DOUBLE_EQ(PayoffEvaluator(waived, grid).cancel(std::span(path, 1), none), 0.2);
}

TEST(CustomTable, LookupAndErrors) {
    const GridSpec grid{{1.0, 0.2, 0.2, 1}, 0};
    PayoffSpec spec;
    spec.family = PayoffFamily::custom_table;
    spec.table_f = {{"", 0.5}, {"+0", 1.0}, {"-0", 0.0}};
    spec.table_g = {{"", 0.9}, {"+0", 1.0}, {"-0", 0.25}};
    const PayoffEvaluator payoff(spec, grid);

    const double up[2] = {1.0, std::exp(0.2)};
    const int up_idx[1] = {1};  // moves ascend by factor
    EXPECT_DOUBLE_EQ(payoff.exercise(std::span(up, 2), std::span(up_idx, 1)), 1.0);
    EXPECT_DOUBLE_EQ(payoff.cancel(std::span(up, 1), std::span<const int>()), 0.9);

    PayoffSpec missing = spec;
    missing.table_f.erase("+0");
    EXPECT_THROW(PayoffEvaluator(missing, grid).exercise(std::span(up, 2), std::span(up_idx, 1)),
                 std::invalid_argument);

    PayoffSpec rootless = spec;
    rootless.table_f.erase("");
    EXPECT_THROW(PayoffEvaluator(rootless, grid), std::invalid_argument);

    PayoffSpec negative = spec;
    negative.table_f[""] = -0.1;
    EXPECT_THROW(PayoffEvaluator(negative, grid).exercise(std::span(up, 1), std::span<const int>()),
                 std::invalid_argument);
}

TEST(CustomTable, OrderViolationSurfacesAtTheNode) {
    const GridSpec grid{{1.0, 0.2, 0.2, 1}, 0};
    PayoffSpec spec;
    spec.family = PayoffFamily::custom_table;
    spec.table_f = {{"", 0.5}, {"+0", 1.0}, {"-0", 0.0}};
    spec.table_g = {{"", 0.4}, {"+0", 1.0}, {"-0", 0.0}};  // G < F at the root
    const PayoffEvaluator payoff(spec, grid);
    const double p0[1] = {1.0};
    EXPECT_THROW(payoff.cancel(std::span(p0, 1), std::span<const int>()), PayoffOrderViolation);
    EXPECT_THROW(robust_price(grid, payoff), PayoffOrderViolation);
}

TEST(PayoffBound, KnownCases) {
    const GridSpec grid{{1.0, 0.1, 0.4, 3}, 1};

    PayoffSpec flat;
    flat.family = PayoffFamily::custom_table;
    const auto moves = grid.moves();
    for_each_node(grid, [&](int, std::span<const double>, std::span<const int> idx) {
        flat.table_f[node_key(moves, idx)] = 0.7;
        flat.table_g[node_key(moves, idx)] = 0.7;
    });
    EXPECT_DOUBLE_EQ(payoff_upper_bound(PayoffEvaluator(flat, grid)), 0.7);

    PayoffSpec put;
    put.family = PayoffFamily::game_put;
    put.strike = 1.5;
    put.penalty = 0.3;
    EXPECT_LE(payoff_upper_bound(PayoffEvaluator(put, grid)), 1.5 + 0.3);

    PayoffSpec digital;
    digital.family = PayoffFamily::digital_game;
    digital.strike = 1.0;
    digital.penalty = 0.3;
    EXPECT_DOUBLE_EQ(payoff_upper_bound(PayoffEvaluator(digital, grid)), 1.3);
}

TEST(PayoffSpec, ValidateRejectsBadShapes) {
    PayoffSpec bad;
    bad.strike = -1.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);

    PayoffSpec neg;
    neg.penalty = -0.1;
    EXPECT_THROW(neg.validate(), std::invalid_argument);

    PayoffSpec table;
    table.family = PayoffFamily::custom_table;
    EXPECT_THROW(table.validate(), std::invalid_argument);  // tables missing

    EXPECT_EQ(payoff_family_from_string("game_put"), PayoffFamily::game_put);
    EXPECT_THROW(payoff_family_from_string("swaption"), std::invalid_argument);
    EXPECT_STREQ(to_string(PayoffFamily::lookback_game), "lookback_game");
}

// Acceptance gate: the release-blocking guarantees of the library, checked
// end to end and printed one line per criterion. The exit status is the
// number of failed criteria, so a clean run exits 0.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gamehedge/gamehedge.hpp"
#include "test_support.hpp"

using namespace gamehedge;
using namespace testsupport;

namespace {

// Pinned acceptance tolerances and budgets.
constexpr double kDualityTol = 1e-9;
constexpr double kHedgeTol = 1e-9;
constexpr double kCapitalShave = 1e-2;
constexpr double kBisectTol = 1e-6;
constexpr double kProbTol = 1e-12;
constexpr double kOrderTol = 1e-9;
constexpr double kMonotoneTol = 1e-9;
constexpr double kKernelTol = 1e-9;
constexpr double kLiftEpsilon = 0.02;
constexpr std::uint64_t kLiftSamples = 100000;
constexpr double kDualitySecondsBudget = 60.0;
constexpr double kLiftSecondsBudget = 120.0;

struct Outcome {
    bool ok = false;
    std::string detail;
};

int g_failures = 0;

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return std::string(buf);
}

void criterion(int index, const char* name, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out.ok = false;
        out.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d [%s] %s (%s, %.1f s)\n", index, out.ok ? "PASS" : "FAIL", name,
                out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.ok) ++g_failures;
}

double elapsed_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. The engine's root must equal the most expensive fixed-measure value
//    over every assignment of a martingale vertex to every interior node.
//    Instance sizes are chosen so the exhaustive sweep stays enumerable.
Outcome duality_against_vertex_sweep() {
    const auto t0 = std::chrono::steady_clock::now();
    struct Shape {
        int steps, refine, kind;
    };
    std::vector<Shape> shapes;
    for (int i = 0; i < 8; ++i) shapes.push_back({1, i % 2, i % 3});
    for (int i = 0; i < 6; ++i) shapes.push_back({2, 0, i % 3});
    for (int i = 0; i < 3; ++i) shapes.push_back({2, 1, 1});
    shapes.push_back({3, 0, 1});
    shapes.push_back({3, 0, 1});
    shapes.push_back({3, 1, 2});

    std::mt19937_64 g = make_rng(101);
    double max_gap = 0.0;
    std::uint64_t trees = 0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const Shape& sh = shapes[i];
        const MarketSpec m = rand_market(g, sh.steps, sh.kind);
        const GridSpec grid{m, sh.refine};
        const PayoffSpec spec =
            (i % 2 == 0) ? rand_family_payoff(g, m) : rand_table_payoff(g, grid);
        const PayoffEvaluator payoff(spec, grid);

        const double root = robust_price(grid, payoff).root_value();
        std::uint64_t combos = 0;
        const double sweep = oracle_vertex_max(grid, payoff, &combos);
        trees += combos;
        max_gap = std::max(max_gap, std::fabs(root - sweep));
    }
    const double secs = elapsed_since(t0);
    Outcome out;
    out.ok = max_gap <= kDualityTol && secs < kDualitySecondsBudget;
    out.detail = fmt("%zu instances, %llu measure trees, max |gap| %.2e",
                     shapes.size(), static_cast<unsigned long long>(trees), max_gap);
    return out;
}

// 2. Built hedges never fall short on any (path, exercise) pair, and a
//    one-cent haircut must break with a concrete witness.
Outcome hedges_are_perfect_and_minimal_in_spirit() {
    std::mt19937_64 g = make_rng(202);
    double fair_floor = std::numeric_limits<double>::infinity();
    double shaved_ceiling = -std::numeric_limits<double>::infinity();
    bool ok = true;
    const int instances = 20;
    for (int i = 0; i < instances; ++i) {
        const MarketSpec m = rand_market(g, 1 + i % 4, i % 3);
        const GridSpec grid{m, i % 2};
        const PayoffSpec spec =
            (i % 2 == 0) ? rand_family_payoff(g, m) : rand_table_payoff(g, grid);
        const PayoffEvaluator payoff(spec, grid);

        HedgePolicy h = build_hedge(robust_price(grid, payoff));
        const HedgeReport fair = verify_on_lattice(h, payoff);
        fair_floor = std::min(fair_floor, fair.worst_shortfall);
        ok = ok && fair.exhaustive && fair.worst_shortfall >= -kHedgeTol;

        h.initial_capital -= kCapitalShave;
        const HedgeReport shaved = verify_on_lattice(h, payoff);
        shaved_ceiling = std::max(shaved_ceiling, shaved.worst_shortfall);
        ok = ok && shaved.worst_shortfall < -kHedgeTol && !shaved.worst_path.prices.empty();
    }
    Outcome out;
    out.ok = ok;
    out.detail = fmt("%d instances, fair worst %.2e, shaved worst <= %.2e", instances,
                     fair_floor, shaved_ceiling);
    return out;
}

// 3. Bisecting the initial capital against the exhaustive audit must land
//    on the robust root: no cheaper perfect hedge exists.
Outcome bisection_recovers_the_root() {
    std::mt19937_64 g = make_rng(303);
    double max_err = 0.0;
    int done = 0;
    while (done < 5) {
        const MarketSpec m = rand_market(g, pick(g, 1, 3), pick(g, 0, 2));
        const GridSpec grid{m, pick(g, 0, 1)};
        const PayoffSpec spec = rand_family_payoff(g, m);
        const PayoffEvaluator payoff(spec, grid);
        const ValueTree tree = robust_price(grid, payoff);
        const double root = tree.root_value();
        if (root < 0.01) continue;  // want a threshold strictly inside the bracket
        const HedgePolicy h = build_hedge(tree);

        const auto perfect = [&](double capital) {
            HedgePolicy trial = h;
            trial.initial_capital = capital;
            return verify_on_lattice(trial, payoff).worst_shortfall >= -kHedgeTol;
        };
        double lo = 0.0, hi = payoff_upper_bound(payoff) + 0.1;
        if (perfect(lo)) {
            hi = lo;
        } else {
            while (hi - lo > 1e-9) {
                const double mid = 0.5 * (lo + hi);
                (perfect(mid) ? hi : lo) = mid;
            }
        }
        max_err = std::max(max_err, std::fabs(hi - root));
        ++done;
    }
    Outcome out;
    out.ok = max_err <= kBisectTol;
    out.detail = fmt("5 instances, max |cheapest - root| %.2e", max_err);
    return out;
}

// 4. Every position obeys the node-wise size bound, and one constant that
//    never looks at the refinement caps the hedges on n in {1, 2, 4}.
Outcome positions_stay_bounded() {
    MarketSpec m;
    m.s = 1.0;
    m.a = 0.1;
    m.b = 0.4;
    m.steps = 3;
    PayoffSpec put;
    put.family = PayoffFamily::game_put;
    put.strike = 1.1;
    put.penalty = 0.5;  // high enough that the writer trades instead of cancelling

    const double bound_a = payoff_upper_bound(PayoffEvaluator(put, GridSpec{m, 1}));
    const double uniform = uniform_position_bound(m, bound_a);
    bool node_wise = true;
    double max_gamma = 0.0;
    for (const int n : {1, 2, 4}) {
        const GridSpec grid{m, n};
        const PayoffEvaluator payoff(put, grid);
        const HedgePolicy h = build_hedge(robust_price(grid, payoff));
        node_wise = node_wise && check_position_bound(h, bound_a).node_wise_ok;
        max_gamma = std::max(max_gamma, h.max_abs_gamma);
    }
    Outcome out;
    out.ok = node_wise && max_gamma > 0.0 && max_gamma <= uniform + kHedgeTol;
    out.detail =
        fmt("n in {1,2,4}, max |gamma| %.4f, refinement-free cap %.4f", max_gamma, uniform);
    return out;
}

// 5. Degenerate band: the unique straddling pair carries the closed-form
//    weights, through the kernel and through the full pricing engine.
Outcome two_point_probabilities_match() {
    double max_err = 0.0;
    for (const double b : {std::log(2.0), 0.1, 0.35, 0.8, 1.2}) {
        FactorSet fs;
        fs.factors = {std::exp(-b), std::exp(b)};
        const double expect = (1.0 - std::exp(-b)) / (std::exp(b) - std::exp(-b));
        const OneStepMeasure msr = measure_from_vertex(fs, 1, 0);
        max_err = std::max(max_err, std::fabs(msr.support[1].prob - expect));
        max_err = std::max(max_err, std::fabs(msr.support[0].prob - (1.0 - expect)));
    }

    // b = ln 2 must put exactly one third on the up move, also when the
    // measure is read back off a priced tree.
    FactorSet half_double;
    half_double.factors = {0.5, 2.0};
    const double third = measure_from_vertex(half_double, 1, 0).support[1].prob;
    const double third_err = std::fabs(third - 1.0 / 3.0);

    MarketSpec m;
    m.s = 1.0;
    m.a = m.b = std::log(2.0);
    m.steps = 1;
    PayoffSpec put;
    put.family = PayoffFamily::game_put;
    put.strike = 1.2;
    put.penalty = 0.3;
    const GridSpec grid{m, 0};
    const MeasureTree mt = extract_measure(robust_price(grid, PayoffEvaluator(put, grid)));
    const OneStepMeasure root_law = mt.node_measure(0, 0);
    const double engine_err = std::fabs(root_law.support[1].prob - 1.0 / 3.0);

    Outcome out;
    out.ok = max_err <= kProbTol && third_err <= kProbTol && engine_err <= kProbTol;
    out.detail = fmt("closed-form err %.2e, b=ln2 up-weight err %.2e, engine err %.2e",
                     max_err, third_err, engine_err);
    return out;
}

// 6. With an ordered payoff pair the two clamp orders value every fixed
//    measure identically.
Outcome clamp_orders_agree() {
    std::mt19937_64 g = make_rng(606);
    double max_diff = 0.0;
    const int draws = 1000;
    for (int t = 0; t < draws; ++t) {
        const MarketSpec m = rand_market(g, pick(g, 1, 3));
        const GridSpec grid{m, pick(g, 0, 1)};
        const PayoffSpec spec = rand_table_payoff(g, grid);
        const PayoffEvaluator payoff(spec, grid);
        const MeasureTree mt = rand_measure_tree(grid, 60000 + static_cast<std::uint64_t>(t));
        const double lo =
            fixed_measure_dynkin(grid, payoff, mt, RecursionOrder::inf_then_sup).root_value();
        const double hi =
            fixed_measure_dynkin(grid, payoff, mt, RecursionOrder::sup_then_inf).root_value();
        max_diff = std::max(max_diff, std::fabs(lo - hi));
    }
    Outcome out;
    out.ok = max_diff <= kOrderTol;
    out.detail = fmt("%d measure draws, max |infsup - supinf| %.2e", draws, max_diff);
    return out;
}

// 7. Nested refinements can only widen the class of lattice laws, so the
//    value must not decrease from n to 2n.
Outcome refinement_is_monotone() {
    std::mt19937_64 g = make_rng(707);
    double worst_drop = 0.0;
    const int configs = 10;
    for (int t = 0; t < configs; ++t) {
        const MarketSpec m = rand_market(g, pick(g, 1, 3), t % 2);
        const PayoffSpec spec = rand_family_payoff(g, m);
        double prev = 0.0;
        for (const int n : {1, 2, 4}) {
            const GridSpec grid{m, n};
            const double root = robust_price(grid, PayoffEvaluator(spec, grid)).root_value();
            if (n > 1) worst_drop = std::max(worst_drop, prev - root);
            prev = root;
        }
    }
    Outcome out;
    out.ok = worst_drop <= kMonotoneTol;
    out.detail = fmt("%d configs, n in {1,2,4}, worst drop %.2e", configs, worst_drop);
    return out;
}

// 8. The one-step kernel against an independent support enumeration, and
//    the superhedge capital against the kernel value (duality is tight).
Outcome one_step_kernel_cross_checks() {
    std::mt19937_64 g = make_rng(808);
    double max_gap = 0.0, max_duality = 0.0;
    const int maps = 10000;
    for (int t = 0; t < maps; ++t) {
        std::vector<double> factors;
        const int n_down = pick(g, 1, 3), n_up = pick(g, 1, 3);
        for (int i = 0; i < n_down; ++i) factors.push_back(uni(g, 0.3, 0.95));
        if (pick(g, 0, 2) == 0) factors.push_back(1.0);
        for (int i = 0; i < n_up; ++i) factors.push_back(uni(g, 1.05, 3.0));
        std::sort(factors.begin(), factors.end());

        std::vector<double> values;
        values.reserve(factors.size());
        for (std::size_t i = 0; i < factors.size(); ++i) values.push_back(uni(g, -1.0, 2.0));

        FactorSet fs;
        fs.factors = factors;
        const RobustStepResult r = robust_sup(fs, values);
        max_gap = std::max(max_gap, std::fabs(r.value - oracle_one_step_sup(factors, values)));

        const SuperhedgeResult sh = one_step_superhedge(uni(g, 0.5, 2.0), fs, values);
        max_duality = std::max(max_duality, std::fabs(sh.capital - r.value));
    }
    Outcome out;
    out.ok = max_gap <= kKernelTol && max_duality <= kKernelTol;
    out.detail = fmt("%d maps, max oracle gap %.2e, max duality gap %.2e", maps, max_gap,
                     max_duality);
    return out;
}

// 9. The projection budget, inverted into a refinement, really does cover
//    off-lattice paths once the account starts 2*epsilon heavy.
Outcome budgeted_lift_covers_the_continuum() {
    const auto t0 = std::chrono::steady_clock::now();
    MarketSpec m;
    m.s = 1.0;
    m.a = 0.07;
    m.b = 0.08;
    m.steps = 2;
    PayoffSpec put;
    put.family = PayoffFamily::game_put;
    put.strike = 1.0;
    put.penalty = 0.05;

    const GridSpec probe{m, 1};
    const PayoffEvaluator probe_payoff(put, probe);
    const LipschitzEstimate lip = estimate_lipschitz(probe_payoff, 2000, 909);
    const double bound_a = payoff_upper_bound(probe_payoff);
    const double uniform = uniform_position_bound(m, bound_a);
    const int n = required_refinement(m, lip.lip_f, lip.lip_g, uniform, kLiftEpsilon);

    const GridSpec grid{m, n};
    const PayoffEvaluator payoff(put, grid);
    const HedgePolicy h = build_hedge(robust_price(grid, payoff));
    const HedgeReport rep =
        lift_and_verify_continuum(h, payoff, kLiftEpsilon, kLiftSamples, 909);

    const double secs = elapsed_since(t0);
    Outcome out;
    out.ok = rep.worst_shortfall >= -kHedgeTol && h.max_abs_gamma > 0.0 &&
             h.max_abs_gamma <= uniform + kHedgeTol && secs < kLiftSecondsBudget;
    out.detail = fmt("n=%d, capital %.6f + 2*%.2g, max |gamma| %.3f, %llu paths, worst %.2e",
                     n, h.initial_capital, kLiftEpsilon, h.max_abs_gamma,
                     static_cast<unsigned long long>(rep.paths_checked), rep.worst_shortfall);
    return out;
}

// 10. Corner contracts: free cancellation collapses to immediate exercise
//     bit for bit, constant payoffs price at the constant bit for bit, and
//     a prohibitive penalty shuts the cancel region entirely.
Outcome degenerate_contracts_are_exact() {
    std::mt19937_64 g = make_rng(1010);
    bool exact = true;
    for (int t = 0; t < 10; ++t) {
        const MarketSpec m = rand_market(g, pick(g, 1, 3), pick(g, 0, 2));
        const GridSpec grid{m, pick(g, 0, 2)};
        PayoffSpec spec;
        spec.family = (t % 2 == 0) ? PayoffFamily::game_put : PayoffFamily::game_call;
        spec.strike = m.s * uni(g, 0.7, 1.3);
        spec.penalty = 0.0;
        const double root = robust_price(grid, PayoffEvaluator(spec, grid)).root_value();
        const double immediate = spec.family == PayoffFamily::game_put
                                     ? std::max(spec.strike - m.s, 0.0)
                                     : std::max(m.s - spec.strike, 0.0);
        exact = exact && root == immediate;
    }

    const GridSpec cgrid{{1.0, 0.1, 0.45, 3}, 1};
    PayoffSpec constant;
    constant.family = PayoffFamily::custom_table;
    for_each_node(cgrid, [&](int, std::span<const double>, std::span<const int> idx) {
        const std::string key = node_key(cgrid.moves(), idx);
        constant.table_f[key] = 0.37;
        constant.table_g[key] = 0.37;
    });
    const bool constant_exact =
        robust_price(cgrid, PayoffEvaluator(constant, cgrid)).root_value() == 0.37;

    std::uint64_t cancels = 0;
    for (int t = 0; t < 5; ++t) {
        const MarketSpec m = rand_market(g, pick(g, 1, 3), pick(g, 0, 2));
        const GridSpec grid{m, pick(g, 0, 1)};
        PayoffSpec spec;
        spec.family = PayoffFamily::game_put;
        spec.strike = m.s * uni(g, 0.8, 1.2);
        spec.penalty = 1e6;
        const ValueTree tree = robust_price(grid, PayoffEvaluator(spec, grid));
        for (int k = 0; k < tree.steps(); ++k)
            for (const RegionTag tag : tree.tag[static_cast<std::size_t>(k)])
                cancels += tag == RegionTag::SELLER_CANCEL ? 1 : 0;
    }

    Outcome out;
    out.ok = exact && constant_exact && cancels == 0;
    out.detail = fmt("immediate roots %s, constant root %s, %llu cancels under 1e6 penalty",
                     exact ? "exact" : "OFF", constant_exact ? "exact" : "OFF",
                     static_cast<unsigned long long>(cancels));
    return out;
}

}  // namespace

int main() {
    std::printf("acceptance gate\n");
    criterion(1, "robust root equals the exhaustive vertex-measure maximum",
              duality_against_vertex_sweep);
    criterion(2, "built hedges verify perfectly and shaved capital fails with a witness",
              hedges_are_perfect_and_minimal_in_spirit);
    criterion(3, "bisection over capital lands on the robust root",
              bisection_recovers_the_root);
    criterion(4, "positions respect the node-wise and refinement-free bounds",
              positions_stay_bounded);
    criterion(5, "degenerate-band probabilities match the closed form",
              two_point_probabilities_match);
    criterion(6, "fixed-measure clamp orders agree on ordered payoffs", clamp_orders_agree);
    criterion(7, "refining the magnitude grid never cheapens the contract",
              refinement_is_monotone);
    criterion(8, "one-step kernel matches the cross oracle with tight duality",
              one_step_kernel_cross_checks);
    criterion(9, "budgeted lift covers sampled continuum paths",
              budgeted_lift_covers_the_continuum);
    criterion(10, "degenerate contracts price exactly and never cancel",
              degenerate_contracts_are_exact);

    std::printf("%d of 10 criteria passed\n", 10 - g_failures);
    return g_failures;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "gamehedge/errors.hpp"
#include "gamehedge/market.hpp"
#include "gamehedge/numerics.hpp"

namespace gamehedge {

/// The distinct one-step price factors a node's children can realise,
/// sorted ascending. Martingale weights on these factors are the one-step
/// uncertainty set.
struct FactorSet {
    std::vector<double> factors;

    static FactorSet from_grid(const GridSpec& grid) {
        FactorSet fs;
        for (const Move& mv : grid.moves()) fs.factors.push_back(mv.factor);
        return fs;
    }

    void validate() const {
        if (factors.empty()) throw std::invalid_argument("factor set must not be empty");
        for (std::size_t i = 0; i < factors.size(); ++i) {
            if (!(factors[i] > 0.0) || !std::isfinite(factors[i]))
                throw std::invalid_argument("factors must be positive finite");
            if (i && !(factors[i - 1] < factors[i]))
                throw std::invalid_argument("factors must be strictly ascending");
        }
    }

    /// True iff weights with unit mean exist: factors must straddle (or hit) 1.
    bool admits_martingale() const {
        return !factors.empty() && factors.front() <= 1.0 + kMeasureTol &&
               factors.back() >= 1.0 - kMeasureTol;
    }
};

struct WeightedFactor {
    double factor = 1.0;
    double prob = 0.0;
};

/// A probability on a factor set with unit mean. Support is ascending.
struct OneStepMeasure {
    std::vector<WeightedFactor> support;

    double total_mass() const {
        double t = 0.0;
        for (const auto& w : support) t += w.prob;
        return t;
    }

    double mean() const {
        double m = 0.0;
        for (const auto& w : support) m += w.prob * w.factor;
        return m;
    }

    bool valid() const {
        if (support.empty()) return false;
        for (std::size_t i = 0; i < support.size(); ++i) {
            if (!(support[i].factor > 0.0)) return false;
            if (support[i].prob < -kMeasureTol) return false;
            if (i && !(support[i - 1].factor < support[i].factor)) return false;
        }
        return std::fabs(total_mass() - 1.0) <= kMeasureTol &&
               std::fabs(mean() - 1.0) <= kMeasureTol;
    }
};

/// Outcome of the one-step optimisation. The optimiser always has support
/// on at most two factors: either a point mass at a unit factor or a pair
/// straddling 1. Indices refer to the FactorSet; up == down for point mass.
struct RobustStepResult {
    double value = 0.0;
    int up_index = -1;
    int down_index = -1;

    bool is_point_mass() const { return up_index == down_index; }
};

namespace detail {

/// Weight on the up factor for the unique unit-mean pair law on {down, up}.
inline double up_weight(double up, double down) { return (1.0 - down) / (up - down); }

}  // namespace detail

/// Materialises the measure a RobustStepResult describes.
inline OneStepMeasure measure_from_vertex(const FactorSet& fs, int up_index, int down_index) {
    OneStepMeasure m;
    if (up_index == down_index) {
        m.support = {{fs.factors[static_cast<std::size_t>(up_index)], 1.0}};
        return m;
    }
    const double u = fs.factors[static_cast<std::size_t>(up_index)];
    const double d = fs.factors[static_cast<std::size_t>(down_index)];
    const double p = detail::up_weight(u, d);
    m.support = {{d, 1.0 - p}, {u, p}};
    return m;
}

/// Largest expectation of `values` over all unit-mean laws on the factors.
/// The feasible set is a polytope whose vertices are point masses at unit
/// factors and straddling pairs, so those are enumerated directly; ties go
/// to the lexicographically smallest (up, down) pair, point mass first.
inline RobustStepResult robust_sup(const FactorSet& fs, std::span<const double> values) {
    fs.validate();
    if (values.size() != fs.factors.size())
        throw std::invalid_argument("value count must match factor count");
    if (!fs.admits_martingale())
        throw NoMartingaleMeasure("factors lie strictly on one side of 1");

    RobustStepResult best;
    bool have = false;

    const auto consider = [&](double cand, int up, int down) {
        if (!have || cand > best.value) {
            best.value = cand;
            best.up_index = up;
            best.down_index = down;
            have = true;
        }
    };

    const int m = static_cast<int>(fs.factors.size());
    for (int i = 0; i < m; ++i) {
        if (std::fabs(fs.factors[static_cast<std::size_t>(i)] - 1.0) <= kMeasureTol)
            consider(values[static_cast<std::size_t>(i)], i, i);
    }
    for (int ui = 0; ui < m; ++ui) {
        const double u = fs.factors[static_cast<std::size_t>(ui)];
        if (!(u > 1.0)) continue;
        for (int di = 0; di < m; ++di) {
            const double d = fs.factors[static_cast<std::size_t>(di)];
            if (!(d < 1.0)) continue;
            const double p = detail::up_weight(u, d);
            const double e = values[static_cast<std::size_t>(di)] +
                             p * (values[static_cast<std::size_t>(ui)] -
                                  values[static_cast<std::size_t>(di)]);
            consider(e, ui, di);
        }
    }
    if (!have) throw NoMartingaleMeasure("no unit-mean law on the factor set");
    return best;
}

struct SuperhedgeResult {
    double capital = 0.0;
    double gamma = 0.0;
};

/// Cheapest one-step cover of `values`: the least c admitting a position g
/// with c + g*spot*(f - 1) >= value(f) for every factor f. The required
/// capital, as a function of g, is the upper envelope of one line per
/// factor; the minimiser is read off the envelope, taking the middle of the
/// flat piece when the optimum is an interval.
inline SuperhedgeResult one_step_superhedge(double spot, const FactorSet& fs,
                                            std::span<const double> values) {
    fs.validate();
    if (!(spot > 0.0) || !std::isfinite(spot))
        throw std::invalid_argument("spot must be positive finite");
    if (values.size() != fs.factors.size())
        throw std::invalid_argument("value count must match factor count");
    if (!fs.admits_martingale())
        throw NoMartingaleMeasure("factors lie strictly on one side of 1");

    const std::size_t m = fs.factors.size();
    if (m == 1) return {values[0], 0.0};

    struct Line {
        double slope;
        double intercept;
    };
    // Factors descending <=> slopes -spot*(f-1) ascending; slopes are
    // distinct because factors are.
    std::vector<Line> lines(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t r = m - 1 - i;
        lines[i] = {-spot * (fs.factors[r] - 1.0), values[r]};
    }

    const auto xcross = [](const Line& p, const Line& q) {
        return (q.intercept - p.intercept) / (p.slope - q.slope);
    };

    // Upper envelope of max(lines) by the monotone-stack sweep.
    std::vector<Line> hull;
    hull.reserve(m);
    for (const Line& ln : lines) {
        while (hull.size() >= 2 &&
               xcross(hull[hull.size() - 2], ln) <= xcross(hull[hull.size() - 2], hull.back()))
            hull.pop_back();
        hull.push_back(ln);
    }

    const std::size_t h = hull.size();
    std::size_t j = 0;
    while (j < h && hull[j].slope < 0.0) ++j;
    if (j == h || (j == 0 && hull[0].slope > 0.0))
        throw NoMartingaleMeasure("cover cost is unbounded; factors are one-sided");

    double gamma;
    if (hull[j].slope == 0.0) {
        const bool has_left = j > 0;
        const bool has_right = j + 1 < h;
        const double left = has_left ? xcross(hull[j - 1], hull[j]) : 0.0;
        const double right = has_right ? xcross(hull[j], hull[j + 1]) : 0.0;
        if (has_left && has_right)
            gamma = 0.5 * (left + right);
        else if (has_left)
            gamma = left;
        else if (has_right)
            gamma = right;
        else
            gamma = 0.0;
    } else {
        gamma = xcross(hull[j - 1], hull[j]);
    }

    double capital = -std::numeric_limits<double>::infinity();
    for (const Line& ln : lines) capital = std::max(capital, ln.intercept + ln.slope * gamma);
    return {capital, gamma};
}

/// Every vertex of the unit-mean polytope, lexicographic order (point
/// masses at unit factors first, then straddling pairs).
inline std::vector<RobustStepResult> martingale_vertices(const FactorSet& fs) {
    fs.validate();
    std::vector<RobustStepResult> out;
    const int m = static_cast<int>(fs.factors.size());
    for (int i = 0; i < m; ++i) {
        if (std::fabs(fs.factors[static_cast<std::size_t>(i)] - 1.0) <= kMeasureTol)
            out.push_back({0.0, i, i});
    }
    for (int ui = 0; ui < m; ++ui) {
        if (!(fs.factors[static_cast<std::size_t>(ui)] > 1.0)) continue;
        for (int di = 0; di < m; ++di) {
            if (!(fs.factors[static_cast<std::size_t>(di)] < 1.0)) continue;
            out.push_back({0.0, ui, di});
        }
    }
    if (out.empty()) throw NoMartingaleMeasure("factors lie strictly on one side of 1");
    return out;
}

/// Deterministic pseudo-random unit-mean law: a convex combination of one
/// to three polytope vertices. Same seed, same measure.
inline OneStepMeasure sample_measure(const FactorSet& fs, std::uint64_t seed) {
    const auto verts = martingale_vertices(fs);
    std::mt19937_64 rng(mix_seed(seed));
    const int picks = 1 + static_cast<int>(rng() % 3);

    std::map<int, double> mass;  // factor index -> probability
    std::vector<double> weights(static_cast<std::size_t>(picks));
    double total = 0.0;
    for (double& w : weights) {
        w = canonical_uniform(rng) + 1e-3;
        total += w;
    }
    for (int p = 0; p < picks; ++p) {
        const auto& v = verts[static_cast<std::size_t>(rng() % verts.size())];
        const double w = weights[static_cast<std::size_t>(p)] / total;
        if (v.is_point_mass()) {
            mass[v.up_index] += w;
        } else {
            const double pu = detail::up_weight(fs.factors[static_cast<std::size_t>(v.up_index)],
                                                fs.factors[static_cast<std::size_t>(v.down_index)]);
            mass[v.up_index] += w * pu;
            mass[v.down_index] += w * (1.0 - pu);
        }
    }

    OneStepMeasure out;
    for (const auto& [idx, p] : mass)
        out.support.push_back({fs.factors[static_cast<std::size_t>(idx)], p});
    return out;
}

}  // namespace gamehedge

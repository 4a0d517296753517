#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gamehedge/dynkin.hpp"
#include "gamehedge/hedging.hpp"
#include "gamehedge/market.hpp"
#include "gamehedge/robust_step.hpp"

namespace gamehedge {

using nlohmann::json;

/// Shortest round-trip decimal text for a double (matches JSON encoding).
inline std::string num_str(double v) { return json(v).dump(); }

inline json path_to_json(const Path& p) { return json(p.prices); }

inline Path path_from_json(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("path must be an array of prices");
    Path p;
    for (const auto& v : j) {
        if (!v.is_number()) throw std::invalid_argument("path entries must be numbers");
        p.prices.push_back(v.get<double>());
    }
    return p;
}

inline json measure_to_json(const OneStepMeasure& m) {
    json arr = json::array();
    for (const auto& w : m.support) arr.push_back(json::array({w.factor, w.prob}));
    return arr;
}

inline json value_tree_to_json(const ValueTree& t) {
    json moves = json::array();
    for (const Move& mv : t.moves) moves.push_back(mv.label());

    json nodes = json::object();
    const std::uint64_t m = t.moves.size();
    std::vector<int> prefix(static_cast<std::size_t>(t.steps()));
    auto walk = [&](auto&& self, int k, std::uint64_t idx) -> void {
        const std::string key =
            node_key(t.moves, std::span<const int>(prefix.data(), static_cast<std::size_t>(k)));
        json node;
        node["value"] = t.value[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx)];
        node["continuation"] = t.continuation(k, idx);
        node["payoff_f"] = t.payoff_f[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx)];
        node["payoff_g"] = t.payoff_g[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx)];
        node["tag"] = to_string(t.tag[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx)]);
        if (k < t.steps() &&
            t.vertex[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx)].up >= 0)
            node["measure"] = measure_to_json(t.measure_at(k, idx));
        nodes[key] = std::move(node);
        if (k == t.steps()) return;
        for (std::uint64_t c = 0; c < m; ++c) {
            prefix[static_cast<std::size_t>(k)] = static_cast<int>(c);
            self(self, k + 1, idx * m + c);
        }
    };
    walk(walk, 0, 0);

    return json{{"steps", t.steps()},
                {"branching", t.branching()},
                {"moves", std::move(moves)},
                {"root", t.root_value()},
                {"nodes", std::move(nodes)}};
}

inline json measure_tree_to_json(const MeasureTree& t) {
    json moves = json::array();
    for (const Move& mv : t.moves) moves.push_back(mv.label());

    json nodes = json::object();
    const std::uint64_t m = t.moves.size();
    std::vector<int> prefix(static_cast<std::size_t>(t.steps()));
    auto walk = [&](auto&& self, int k, std::uint64_t idx) -> void {
        if (k == t.steps()) return;
        const std::string key =
            node_key(t.moves, std::span<const int>(prefix.data(), static_cast<std::size_t>(k)));
        nodes[key] = measure_to_json(t.node_measure(k, idx));
        for (std::uint64_t c = 0; c < m; ++c) {
            prefix[static_cast<std::size_t>(k)] = static_cast<int>(c);
            self(self, k + 1, idx * m + c);
        }
    };
    walk(walk, 0, 0);

    return json{{"steps", t.steps()},
                {"branching", t.branching()},
                {"moves", std::move(moves)},
                {"nodes", std::move(nodes)}};
}

inline json hedge_report_to_json(const HedgeReport& r) {
    return json{{"worst_shortfall", r.worst_shortfall},
                {"worst_exercise", r.worst_exercise},
                {"worst_path", path_to_json(r.worst_path)},
                {"paths_checked", r.paths_checked},
                {"exhaustive", r.exhaustive}};
}

/// CSV cell for a price path: prices joined by '|' (commas stay free for
/// the column separator).
inline std::string path_cell(const Path& p) {
    std::string out;
    for (std::size_t i = 0; i < p.prices.size(); ++i) {
        if (i) out += '|';
        out += num_str(p.prices[i]);
    }
    return out;
}

/// One audit row: path, exercise date, margin.
struct AuditRow {
    std::string path;
    int exercise = 0;
    double margin = 0.0;
};

inline std::string audit_rows_csv(const std::vector<AuditRow>& rows) {
    std::string out = "path,exercise,margin\n";
    for (const AuditRow& r : rows)
        out += r.path + "," + std::to_string(r.exercise) + "," + num_str(r.margin) + "\n";
    return out;
}

/// Keeps the `cap` smallest-margin rows seen. Final order: margin
/// ascending, then path text, so output is reproducible.
class WorstRows {
  public:
    explicit WorstRows(std::size_t cap) : cap_(cap) {}

    void add(AuditRow row) {
        if (cap_ == 0) return;
        rows_.push_back(std::move(row));
        if (rows_.size() > 2 * cap_ + 16) shrink();
    }

    std::vector<AuditRow> take() {
        shrink();
        return std::move(rows_);
    }

  private:
    void shrink() {
        std::sort(rows_.begin(), rows_.end(), [](const AuditRow& x, const AuditRow& y) {
            if (x.margin != y.margin) return x.margin < y.margin;
            if (x.path != y.path) return x.path < y.path;
            return x.exercise < y.exercise;
        });
        if (rows_.size() > cap_) rows_.resize(cap_);
    }

    std::size_t cap_;
    std::vector<AuditRow> rows_;
};

}  // namespace gamehedge

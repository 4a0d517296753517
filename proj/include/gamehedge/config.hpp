#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gamehedge/errors.hpp"
#include "gamehedge/market.hpp"
#include "gamehedge/numerics.hpp"
#include "gamehedge/payoff.hpp"
#include "gamehedge/version.hpp"

namespace gamehedge {

struct Caps {
    std::uint64_t max_paths = kDefaultPathCap;
    std::uint64_t max_nodes = kDefaultNodeCap;
    bool acknowledge_large = false;  // must be set to raise caps above defaults
};

/// Everything a CLI run needs. Parsed from one JSON document; validation
/// failures carry field paths and abort with exit code 2.
struct RunConfig {
    MarketSpec market;
    std::vector<int> n_values;
    PayoffSpec payoff;
    NumericPolicy numeric;
    double epsilon = 0.0;
    std::uint64_t samples = 10000;
    std::uint64_t seed = 0;
    Caps caps;
    std::optional<double> capital_override;
    std::optional<double> capital_scale;
    std::string pricer = "auto";  // auto | tree | recombining
    int csv_rows = 100;
    bool emit_tree = false;
};

namespace detail {

class FieldErrors {
  public:
    void add(const std::string& msg) { msgs_.push_back(msg); }
    bool empty() const { return msgs_.empty(); }
    [[noreturn]] void raise() const {
        std::string joined = "invalid config:";
        for (const auto& m : msgs_) joined += "\n  - " + m;
        throw ConfigError(joined);
    }
    void raise_if_any() const {
        if (!empty()) raise();
    }

  private:
    std::vector<std::string> msgs_;
};

inline const nlohmann::json* get_member(const nlohmann::json& j, const char* key) {
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline double read_number(const nlohmann::json& j, const std::string& path, double fallback,
                          bool required, FieldErrors& errs) {
    if (j.is_number()) return j.get<double>();
    errs.add(path + " must be a number");
    (void)required;
    return fallback;
}

}  // namespace detail

inline nlohmann::json caps_to_json(const Caps& c) {
    return nlohmann::json{{"max_paths", c.max_paths},
                          {"max_nodes", c.max_nodes},
                          {"acknowledge_large", c.acknowledge_large}};
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["market"] = {{"s", c.market.s}, {"a", c.market.a}, {"b", c.market.b},
                   {"steps", c.market.steps}};
    j["n_values"] = c.n_values;
    nlohmann::json p;
    p["family"] = to_string(c.payoff.family);
    if (c.payoff.family == PayoffFamily::custom_table) {
        p["tables"] = {{"F", c.payoff.table_f}, {"G", c.payoff.table_g}};
    } else {
        p["strike"] = c.payoff.strike;
        p["penalty"] = c.payoff.penalty;
        p["terminal_penalty_waived"] = c.payoff.terminal_penalty_waived;
    }
    j["payoff"] = std::move(p);
    j["numeric"] = {{"abs_tol", c.numeric.abs_tol}, {"rel_tol", c.numeric.rel_tol}};
    j["epsilon"] = c.epsilon;
    j["samples"] = c.samples;
    j["seed"] = c.seed;
    j["caps"] = caps_to_json(c.caps);
    if (c.capital_override) j["capital_override"] = *c.capital_override;
    if (c.capital_scale) j["capital_scale"] = *c.capital_scale;
    j["pricer"] = c.pricer;
    j["csv_rows"] = c.csv_rows;
    j["emit_tree"] = c.emit_tree;
    return j;
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
    using nlohmann::json;
    detail::FieldErrors errs;
    RunConfig cfg;

    if (!j.is_object()) {
        errs.add("config root must be a JSON object");
        errs.raise();
    }

    if (const json* v = detail::get_member(j, "schema_version")) {
        if (!v->is_number_integer() || v->get<int>() != kSchemaVersion)
            errs.add("schema_version must be the integer " + std::to_string(kSchemaVersion));
    } else {
        errs.add("schema_version is required");
    }

    if (const json* mk = detail::get_member(j, "market")) {
        if (!mk->is_object()) {
            errs.add("market must be an object");
        } else {
            const json* s = detail::get_member(*mk, "s");
            const json* a = detail::get_member(*mk, "a");
            const json* b = detail::get_member(*mk, "b");
            const json* steps = detail::get_member(*mk, "steps");
            if (!s) errs.add("market.s is required");
            else cfg.market.s = detail::read_number(*s, "market.s", 1.0, true, errs);
            if (!a) errs.add("market.a is required");
            else cfg.market.a = detail::read_number(*a, "market.a", 0.0, true, errs);
            if (!b) errs.add("market.b is required");
            else cfg.market.b = detail::read_number(*b, "market.b", 0.0, true, errs);
            if (!steps || !steps->is_number_integer()) errs.add("market.steps must be an integer");
            else cfg.market.steps = steps->get<int>();
        }
    } else {
        errs.add("market is required");
    }

    if (const json* nv = detail::get_member(j, "n_values")) {
        if (!nv->is_array() || nv->empty()) {
            errs.add("n_values must be a non-empty array of integers");
        } else {
            for (const auto& e : *nv) {
                if (!e.is_number_integer() || e.get<int>() < 0) {
                    errs.add("n_values entries must be integers >= 0");
                    break;
                }
                cfg.n_values.push_back(e.get<int>());
            }
        }
    } else {
        errs.add("n_values is required");
    }

    if (const json* po = detail::get_member(j, "payoff")) {
        if (!po->is_object()) {
            errs.add("payoff must be an object");
        } else {
            if (const json* fam = detail::get_member(*po, "family")) {
                if (!fam->is_string()) {
                    errs.add("payoff.family must be a string");
                } else {
                    try {
                        cfg.payoff.family = payoff_family_from_string(fam->get<std::string>());
                    } catch (const std::invalid_argument& e) {
                        errs.add(std::string("payoff.family: ") + e.what());
                    }
                }
            } else {
                errs.add("payoff.family is required");
            }
            if (const json* v = detail::get_member(*po, "strike"))
                cfg.payoff.strike = detail::read_number(*v, "payoff.strike", 1.0, false, errs);
            if (const json* v = detail::get_member(*po, "penalty"))
                cfg.payoff.penalty = detail::read_number(*v, "payoff.penalty", 0.0, false, errs);
            if (const json* v = detail::get_member(*po, "terminal_penalty_waived")) {
                if (!v->is_boolean()) errs.add("payoff.terminal_penalty_waived must be a boolean");
                else cfg.payoff.terminal_penalty_waived = v->get<bool>();
            }
            if (const json* tb = detail::get_member(*po, "tables")) {
                if (!tb->is_object()) {
                    errs.add("payoff.tables must be an object with F and G members");
                } else {
                    for (const char* which : {"F", "G"}) {
                        const json* t = detail::get_member(*tb, which);
                        if (!t || !t->is_object()) {
                            errs.add(std::string("payoff.tables.") + which +
                                     " must be an object keyed by node");
                            continue;
                        }
                        auto& dst = *which == 'F' ? cfg.payoff.table_f : cfg.payoff.table_g;
                        for (const auto& [key, val] : t->items()) {
                            if (!val.is_number()) {
                                errs.add(std::string("payoff.tables.") + which + "['" + key +
                                         "'] must be a number");
                                continue;
                            }
                            dst[key] = val.get<double>();
                        }
                    }
                }
            }
            if (cfg.payoff.family == PayoffFamily::custom_table &&
                (cfg.payoff.table_f.empty() || cfg.payoff.table_g.empty()))
                errs.add("payoff.tables with F and G are required for custom_table");
        }
    } else {
        errs.add("payoff is required");
    }

    if (const json* nm = detail::get_member(j, "numeric")) {
        if (!nm->is_object()) {
            errs.add("numeric must be an object");
        } else {
            if (const json* v = detail::get_member(*nm, "abs_tol"))
                cfg.numeric.abs_tol = detail::read_number(*v, "numeric.abs_tol", 1e-9, false, errs);
            if (const json* v = detail::get_member(*nm, "rel_tol"))
                cfg.numeric.rel_tol = detail::read_number(*v, "numeric.rel_tol", 1e-9, false, errs);
            if (cfg.numeric.abs_tol < 0 || cfg.numeric.rel_tol < 0)
                errs.add("numeric tolerances must be >= 0");
        }
    }

    if (const json* v = detail::get_member(j, "epsilon")) {
        cfg.epsilon = detail::read_number(*v, "epsilon", 0.0, false, errs);
        if (cfg.epsilon < 0) errs.add("epsilon must be >= 0");
    }
    if (const json* v = detail::get_member(j, "samples")) {
        if (!v->is_number_integer() || v->get<std::int64_t>() < 0)
            errs.add("samples must be a nonnegative integer");
        else cfg.samples = v->get<std::uint64_t>();
    }
    if (const json* v = detail::get_member(j, "seed")) {
        if (!v->is_number_integer()) errs.add("seed must be an integer");
        else cfg.seed = v->get<std::uint64_t>();
    }

    if (const json* cp = detail::get_member(j, "caps")) {
        if (!cp->is_object()) {
            errs.add("caps must be an object");
        } else {
            if (const json* v = detail::get_member(*cp, "max_paths")) {
                if (!v->is_number_integer() || v->get<std::int64_t>() < 1)
                    errs.add("caps.max_paths must be a positive integer");
                else cfg.caps.max_paths = v->get<std::uint64_t>();
            }
            if (const json* v = detail::get_member(*cp, "max_nodes")) {
                if (!v->is_number_integer() || v->get<std::int64_t>() < 1)
                    errs.add("caps.max_nodes must be a positive integer");
                else cfg.caps.max_nodes = v->get<std::uint64_t>();
            }
            if (const json* v = detail::get_member(*cp, "acknowledge_large")) {
                if (!v->is_boolean()) errs.add("caps.acknowledge_large must be a boolean");
                else cfg.caps.acknowledge_large = v->get<bool>();
            }
            if ((cfg.caps.max_paths > kDefaultPathCap || cfg.caps.max_nodes > kDefaultNodeCap) &&
                !cfg.caps.acknowledge_large)
                errs.add("caps above the defaults require caps.acknowledge_large = true");
        }
    }

    if (const json* v = detail::get_member(j, "capital_override"))
        cfg.capital_override = detail::read_number(*v, "capital_override", 0.0, false, errs);
    if (const json* v = detail::get_member(j, "capital_scale")) {
        cfg.capital_scale = detail::read_number(*v, "capital_scale", 1.0, false, errs);
        if (cfg.capital_scale && *cfg.capital_scale <= 0)
            errs.add("capital_scale must be > 0");
    }
    if (const json* v = detail::get_member(j, "pricer")) {
        if (!v->is_string()) {
            errs.add("pricer must be a string");
        } else {
            cfg.pricer = v->get<std::string>();
            if (cfg.pricer != "auto" && cfg.pricer != "tree" && cfg.pricer != "recombining")
                errs.add("pricer must be one of auto, tree, recombining");
        }
    }
    if (const json* v = detail::get_member(j, "csv_rows")) {
        if (!v->is_number_integer() || v->get<int>() < 0)
            errs.add("csv_rows must be a nonnegative integer");
        else cfg.csv_rows = v->get<int>();
    }
    if (const json* v = detail::get_member(j, "emit_tree")) {
        if (!v->is_boolean()) errs.add("emit_tree must be a boolean");
        else cfg.emit_tree = v->get<bool>();
    }

    errs.raise_if_any();

    try {
        cfg.market.validate();
        cfg.payoff.validate();
    } catch (const std::exception& e) {
        errs.add(e.what());
    }
    errs.raise_if_any();
    return cfg;
}

}  // namespace gamehedge

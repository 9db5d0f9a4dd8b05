#pragma once

#include "qlasso/experiment.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qlasso::cli {

/// Malformed or inconsistent configuration (exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat JSON configuration. Every key is optional; subcommands fill in
/// their own defaults for anything absent.
///
///   n, s, d, r, norm, R            signal and norm bound
///   ensemble                       "gaussian" | "rademacher"
///   quantizer, delta               "uniform" | "one_bit", resolution Δ
///   m_grid, trials, seed           Monte Carlo protocol
///   estimators                     subset of ["glasso", "pbp", "dm"]
///   out_dir                        output directory
///   m, deltas                      delta-sweep measurement count and Δ grid
///   widths_sparse, widths_lowrank  [[n, s], ...] and [[d, r], ...]
///   demo_points                    inputs for quantize-demo
struct RawConfig {
    std::optional<long> n, s, d, r, m, trials;
    std::optional<double> norm, R, delta;
    std::optional<std::string> ensemble, quantizer, out_dir;
    std::optional<std::vector<long>> m_grid;
    std::optional<std::vector<double>> deltas, demo_points;
    std::optional<std::vector<std::string>> estimators;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<std::pair<long, long>>> widths_sparse, widths_lowrank;
};

namespace detail {

template <class T>
void read_field(const nlohmann::json &j, const char *key, std::optional<T> &out) {
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

inline void read_pairs(const nlohmann::json &j, const char *key,
                       std::optional<std::vector<std::pair<long, long>>> &out) {
    if (!j.contains(key))
        return;
    std::vector<std::pair<long, long>> pairs;
    const auto &arr = j.at(key);
    if (!arr.is_array())
        throw ConfigError(std::string("config field '") + key + "': expected an array of pairs");
    for (const auto &p : arr) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() ||
            !p[1].is_number_integer())
            throw ConfigError(std::string("config field '") + key +
                              "': every entry must be a pair of integers");
        pairs.emplace_back(p[0].get<long>(), p[1].get<long>());
    }
    out = std::move(pairs);
}

} // namespace detail

inline RawConfig parse_config_text(const std::string &text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config: top level must be a JSON object");
    static const std::set<std::string> known{
        "n",     "s",         "d",        "r",          "m",           "trials",
        "norm",  "R",         "delta",    "ensemble",   "quantizer",   "out_dir",
        "m_grid", "deltas",   "estimators", "seed",     "widths_sparse", "widths_lowrank",
        "demo_points"};
    for (const auto &[key, _] : j.items())
        if (!known.count(key))
            throw ConfigError("config: unknown field '" + key + "'");

    RawConfig c;
    detail::read_field(j, "n", c.n);
    detail::read_field(j, "s", c.s);
    detail::read_field(j, "d", c.d);
    detail::read_field(j, "r", c.r);
    detail::read_field(j, "m", c.m);
    detail::read_field(j, "trials", c.trials);
    detail::read_field(j, "norm", c.norm);
    detail::read_field(j, "R", c.R);
    detail::read_field(j, "delta", c.delta);
    detail::read_field(j, "ensemble", c.ensemble);
    detail::read_field(j, "quantizer", c.quantizer);
    detail::read_field(j, "out_dir", c.out_dir);
    detail::read_field(j, "m_grid", c.m_grid);
    detail::read_field(j, "deltas", c.deltas);
    detail::read_field(j, "demo_points", c.demo_points);
    detail::read_field(j, "estimators", c.estimators);
    detail::read_field(j, "seed", c.seed);
    detail::read_pairs(j, "widths_sparse", c.widths_sparse);
    detail::read_pairs(j, "widths_lowrank", c.widths_lowrank);
    return c;
}

inline std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Seed precedence: flag, then config, then $QLASSO_SEED, then 0.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag,
                                  std::optional<std::uint64_t> config) {
    if (flag)
        return *flag;
    if (config)
        return *config;
    if (const char *env = std::getenv("QLASSO_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used, 0);
            if (used == std::string(env).size())
                return v;
        } catch (const std::exception &) {
        }
        throw ConfigError(std::string("QLASSO_SEED is not an unsigned integer: '") + env + "'");
    }
    return 0;
}

/// Builds an ExperimentConfig from the raw keys on top of per-command
/// defaults.
inline ExperimentConfig to_experiment(const RawConfig &raw, ExperimentConfig base) {
    if (raw.n)
        base.n = *raw.n;
    if (raw.d || raw.r) {
        const long d = raw.d.value_or(10), r = raw.r.value_or(1);
        if (raw.s)
            throw ConfigError("config: give either s or (d, r), not both");
        base.structure = LowRank{d, r};
        if (!raw.n)
            base.n = d * d;
    } else if (raw.s) {
        base.structure = Sparse{*raw.s};
    }
    if (raw.norm)
        base.norm_target = *raw.norm;
    if (raw.R)
        base.R = *raw.R;
    if (raw.ensemble) {
        try {
            base.ensemble = parse_ensemble(*raw.ensemble);
        } catch (const InvalidSpec &e) {
            throw ConfigError(std::string("config field 'ensemble': ") + e.what());
        }
    }
    if (raw.quantizer) {
        if (*raw.quantizer == "uniform")
            base.quantizer.kind = QuantizerKind::uniform;
        else if (*raw.quantizer == "one_bit" || *raw.quantizer == "one-bit")
            base.quantizer.kind = QuantizerKind::one_bit;
        else
            throw ConfigError("config field 'quantizer': expected \"uniform\" or \"one_bit\"");
    }
    if (raw.delta)
        base.quantizer.delta = *raw.delta;
    if (raw.m && raw.m_grid)
        throw ConfigError("config: give either m or m_grid, not both");
    if (raw.m_grid)
        base.m_grid = *raw.m_grid;
    else if (raw.m)
        base.m_grid = {*raw.m};
    if (raw.trials)
        base.trials = *raw.trials;
    if (raw.estimators) {
        base.estimators.clear();
        try {
            for (const auto &e : *raw.estimators)
                base.estimators.push_back(parse_estimator(e));
        } catch (const InvalidSpec &e) {
            throw ConfigError(std::string("config field 'estimators': ") + e.what());
        }
    }
    try {
        validate(base);
    } catch (const InvalidSpec &e) {
        throw ConfigError(e.what());
    }
    return base;
}

/// Resolved configuration echoed into the run manifest.
inline nlohmann::json to_json(const ExperimentConfig &cfg) {
    nlohmann::json j;
    j["n"] = cfg.n;
    if (const auto *sp = std::get_if<Sparse>(&cfg.structure))
        j["s"] = sp->s;
    else {
        j["d"] = std::get<LowRank>(cfg.structure).d;
        j["r"] = std::get<LowRank>(cfg.structure).r;
    }
    j["norm"] = cfg.norm_target;
    j["R"] = cfg.R;
    j["ensemble"] = std::string(to_string(cfg.ensemble.kind));
    j["quantizer"] = cfg.quantizer.kind == QuantizerKind::uniform ? "uniform" : "one_bit";
    if (cfg.quantizer.kind == QuantizerKind::uniform)
        j["delta"] = cfg.quantizer.delta;
    j["m_grid"] = cfg.m_grid;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.master_seed;
    std::vector<std::string> est;
    for (auto e : cfg.estimators)
        est.emplace_back(to_string(e));
    j["estimators"] = est;
    return j;
}

} // namespace qlasso::cli

#pragma once

/*
 Experiment configuration: a single JSON document with five blocks,

   market   { k, r[], sigma[], mu[], hazards[][] }
   contract { K, T }
   solver   { n_t, n_s, s_width, quad_order, v_rule, tol, max_iter, workers }
   mc       { n_paths, seed, rebalance_dt }
   output   { paths{name: file}, formats[] }

 market and contract are required; the rest default.  A hazards entry is
 null (no transition) or {"family":"constant","rate":a} or
 {"family":"weibull","scale":a,"shape":b}.  Unknown keys anywhere are
 rejected with the full key path, so typos fail loudly instead of silently
 reverting to defaults.

 Parsing enforces structure only; semantic checks (positivity, k >= 2,
 irreducibility) stay in RegimeModel::validate so a validation front end
 can report every issue at once.  The exception is hazard parameters,
 whose constructors enforce positivity; those surface as config errors
 naming the key.

 config_hash covers the canonical serialization of (market, contract,
 solver) only: it keys the surface cache, and mc/output settings do not
 affect the solve.
*/

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "smp/contract.hpp"
#include "smp/regime_model.hpp"
#include "smp/solver_config.hpp"

namespace smp {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct McConfig {
    long n_paths = 100000;
    std::uint64_t seed = 20240915;
    double rebalance_dt = 0.004;
};

struct OutputConfig {
    std::map<std::string, std::string> paths;
    std::vector<std::string> formats;
};

struct ExperimentConfig {
    RegimeModel market;
    ContractSpec contract;
    SolverConfig solver;
    McConfig mc;
    OutputConfig output;
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown key: " + path + "." + it.key());
    }
}

inline const json& member(const json& obj, const std::string& path, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("missing key: " + path + "." + key);
    return *it;
}

inline double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path + ": expected a number");
    return j.get<double>();
}

inline long as_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return j.get<long>();
}

inline std::uint64_t as_seed(const json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<long long>() >= 0)
        return static_cast<std::uint64_t>(j.get<long long>());
    throw ConfigError(path + ": expected a nonnegative integer");
}

inline HazardFn parse_hazard(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + ": expected null or an object");
    const json& fam = member(j, path, "family");
    if (!fam.is_string()) throw ConfigError(path + ".family: expected a string");
    const std::string f = fam.get<std::string>();
    try {
        if (f == "constant") {
            reject_unknown(j, path, {"family", "rate"});
            return HazardFn::constant(as_number(member(j, path, "rate"), path + ".rate"));
        }
        if (f == "weibull") {
            reject_unknown(j, path, {"family", "scale", "shape"});
            return HazardFn::weibull(as_number(member(j, path, "scale"), path + ".scale"),
                                     as_number(member(j, path, "shape"), path + ".shape"));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    throw ConfigError(path + ".family: expected \"constant\" or \"weibull\"");
}

inline json hazard_to_json(const HazardFn& h) {
    json j;
    if (h.family == HazardFn::Family::Constant) {
        j["family"] = "constant";
        j["rate"] = h.a;
    } else {
        j["family"] = "weibull";
        j["scale"] = h.a;
        j["shape"] = h.b;
    }
    return j;
}

inline json market_to_json(const RegimeModel& m) {
    json j;
    j["k"] = m.k;
    j["r"] = m.r;
    j["sigma"] = m.sigma;
    j["mu"] = m.mu;
    json rows = json::array();
    for (int i = 0; i < m.k; ++i) {
        json row = json::array();
        for (int jj = 0; jj < m.k; ++jj)
            row.push_back(m.has_hazard(i, jj) ? hazard_to_json(*m.hazards[i][jj])
                                              : json(nullptr));
        rows.push_back(std::move(row));
    }
    j["hazards"] = std::move(rows);
    return j;
}

inline json contract_to_json(const ContractSpec& c) {
    return json{{"K", c.strike}, {"T", c.maturity}};
}

inline json solver_to_json(const SolverConfig& s) {
    return json{{"n_t", s.n_t},           {"n_s", s.n_s},
                {"s_width", s.s_width},   {"quad_order", s.quad_order},
                {"v_rule", s.v_rule},     {"tol", s.tol},
                {"max_iter", s.max_iter}, {"workers", s.workers}};
}

} // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be an object");
    detail::reject_unknown(root, "config",
                           {"market", "contract", "solver", "mc", "output"});

    ExperimentConfig out;

    // market
    {
        const json& m = detail::member(root, "config", "market");
        if (!m.is_object()) throw ConfigError("config.market: expected an object");
        detail::reject_unknown(m, "config.market", {"k", "r", "sigma", "mu", "hazards"});
        const long k = detail::as_integer(detail::member(m, "config.market", "k"),
                                          "config.market.k");
        if (k < 1 || k > 64) throw ConfigError("config.market.k: expected 1 <= k <= 64");
        out.market.k = static_cast<int>(k);
        auto coeff = [&](const char* name) {
            const json& arr = detail::member(m, "config.market", name);
            const std::string path = std::string("config.market.") + name;
            if (!arr.is_array() || static_cast<long>(arr.size()) != k)
                throw ConfigError(path + ": expected an array of k numbers");
            std::vector<double> v(static_cast<std::size_t>(k));
            for (long i = 0; i < k; ++i)
                v[static_cast<std::size_t>(i)] =
                    detail::as_number(arr[static_cast<std::size_t>(i)],
                                      path + "[" + std::to_string(i) + "]");
            return v;
        };
        out.market.r = coeff("r");
        out.market.sigma = coeff("sigma");
        out.market.mu = coeff("mu");
        const json& hz = detail::member(m, "config.market", "hazards");
        if (!hz.is_array() || static_cast<long>(hz.size()) != k)
            throw ConfigError("config.market.hazards: expected an array of k rows");
        out.market.hazards.assign(static_cast<std::size_t>(k),
                                  std::vector<std::optional<HazardFn>>(
                                      static_cast<std::size_t>(k), std::nullopt));
        for (long i = 0; i < k; ++i) {
            const json& row = hz[static_cast<std::size_t>(i)];
            const std::string rpath = "config.market.hazards[" + std::to_string(i) + "]";
            if (!row.is_array() || static_cast<long>(row.size()) != k)
                throw ConfigError(rpath + ": expected an array of k entries");
            for (long jj = 0; jj < k; ++jj) {
                const json& cell = row[static_cast<std::size_t>(jj)];
                if (cell.is_null()) continue;
                out.market.hazards[static_cast<std::size_t>(i)][static_cast<std::size_t>(jj)] =
                    detail::parse_hazard(cell, rpath + "[" + std::to_string(jj) + "]");
            }
        }
    }

    // contract
    {
        const json& c = detail::member(root, "config", "contract");
        if (!c.is_object()) throw ConfigError("config.contract: expected an object");
        detail::reject_unknown(c, "config.contract", {"K", "T"});
        out.contract.strike = detail::as_number(detail::member(c, "config.contract", "K"),
                                                "config.contract.K");
        out.contract.maturity = detail::as_number(detail::member(c, "config.contract", "T"),
                                                  "config.contract.T");
    }

    // solver
    if (const auto it = root.find("solver"); it != root.end()) {
        const json& s = *it;
        if (!s.is_object()) throw ConfigError("config.solver: expected an object");
        detail::reject_unknown(s, "config.solver",
                               {"n_t", "n_s", "s_width", "quad_order", "v_rule", "tol",
                                "max_iter", "workers"});
        SolverConfig& sc = out.solver;
        auto geti = [&](const char* key, int& dst) {
            if (const auto f = s.find(key); f != s.end())
                dst = static_cast<int>(
                    detail::as_integer(*f, std::string("config.solver.") + key));
        };
        auto getd = [&](const char* key, double& dst) {
            if (const auto f = s.find(key); f != s.end())
                dst = detail::as_number(*f, std::string("config.solver.") + key);
        };
        geti("n_t", sc.n_t);
        geti("n_s", sc.n_s);
        getd("s_width", sc.s_width);
        geti("quad_order", sc.quad_order);
        getd("v_rule", sc.v_rule);
        getd("tol", sc.tol);
        geti("max_iter", sc.max_iter);
        geti("workers", sc.workers);
    }

    // mc
    if (const auto it = root.find("mc"); it != root.end()) {
        const json& mc = *it;
        if (!mc.is_object()) throw ConfigError("config.mc: expected an object");
        detail::reject_unknown(mc, "config.mc", {"n_paths", "seed", "rebalance_dt"});
        if (const auto f = mc.find("n_paths"); f != mc.end())
            out.mc.n_paths = detail::as_integer(*f, "config.mc.n_paths");
        if (const auto f = mc.find("seed"); f != mc.end())
            out.mc.seed = detail::as_seed(*f, "config.mc.seed");
        if (const auto f = mc.find("rebalance_dt"); f != mc.end())
            out.mc.rebalance_dt = detail::as_number(*f, "config.mc.rebalance_dt");
    }

    // output
    if (const auto it = root.find("output"); it != root.end()) {
        const json& o = *it;
        if (!o.is_object()) throw ConfigError("config.output: expected an object");
        detail::reject_unknown(o, "config.output", {"paths", "formats"});
        if (const auto f = o.find("paths"); f != o.end()) {
            if (!f->is_object())
                throw ConfigError("config.output.paths: expected an object of file paths");
            for (auto p = f->begin(); p != f->end(); ++p) {
                if (!p.value().is_string())
                    throw ConfigError("config.output.paths." + p.key() +
                                      ": expected a string");
                out.output.paths[p.key()] = p.value().get<std::string>();
            }
        }
        if (const auto f = o.find("formats"); f != o.end()) {
            if (!f->is_array())
                throw ConfigError("config.output.formats: expected an array of strings");
            for (std::size_t a = 0; a < f->size(); ++a) {
                const detail::json& fmt = (*f)[a];
                if (!fmt.is_string())
                    throw ConfigError("config.output.formats[" + std::to_string(a) +
                                      "]: expected a string");
                out.output.formats.push_back(fmt.get<std::string>());
            }
        }
    }

    return out;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// Full canonical serialization (alphabetical keys, round-trip floats).
inline std::string serialize_config(const ExperimentConfig& cfg) {
    detail::json root;
    root["market"] = detail::market_to_json(cfg.market);
    root["contract"] = detail::contract_to_json(cfg.contract);
    root["solver"] = detail::solver_to_json(cfg.solver);
    root["mc"] = detail::json{{"n_paths", cfg.mc.n_paths},
                              {"seed", cfg.mc.seed},
                              {"rebalance_dt", cfg.mc.rebalance_dt}};
    detail::json out;
    out["paths"] = detail::json::object();
    for (const auto& [k, v] : cfg.output.paths) out["paths"][k] = v;
    out["formats"] = cfg.output.formats;
    root["output"] = std::move(out);
    return root.dump(2) + "\n";
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Content hash of the blocks that determine the solved surface.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
    detail::json j;
    j["market"] = detail::market_to_json(cfg.market);
    j["contract"] = detail::contract_to_json(cfg.contract);
    j["solver"] = detail::solver_to_json(cfg.solver);
    return fnv1a64(j.dump());
}

} // namespace smp

// Command-line front end: validate | price | surface | check.
//
// Exit codes: 0 success, 1 validation/domain error, 2 acceptance failure.
// Solves are cached under .smpricer_cache/ keyed by a content hash of the
// (market, contract, solver) blocks; --no-cache bypasses both read and write.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "smp/acceptance.hpp"
#include "smp/config.hpp"
#include "smp/greeks.hpp"
#include "smp/io.hpp"
#include "smp/volterra.hpp"

namespace {

namespace fs = std::filesystem;

struct AtPoint {
    double t = 0, s = 0, y = 0;
    int regime = 1; // 1-based on the command line
};

AtPoint parse_at(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, ',')) parts.push_back(cur);
    if (parts.size() != 4)
        throw CLI::ValidationError("--at", "expected t,s,i,y (four comma-separated values)");
    AtPoint p;
    try {
        std::size_t pos = 0;
        p.t = std::stod(parts[0], &pos);
        p.s = std::stod(parts[1], &pos);
        p.regime = std::stoi(parts[2], &pos);
        p.y = std::stod(parts[3], &pos);
    } catch (const std::exception&) {
        throw CLI::ValidationError("--at", "could not parse t,s,i,y from '" + text + "'");
    }
    return p;
}

fs::path cache_path(const smp::ExperimentConfig& cfg) {
    char name[64];
    std::snprintf(name, sizeof name, "surf_%016llx.bin",
                  static_cast<unsigned long long>(smp::config_hash(cfg)));
    return fs::path(".smpricer_cache") / name;
}

// Cached solve: load on hash + grid match, otherwise solve and store.
smp::PriceSurface solve_cached(const smp::ExperimentConfig& cfg, bool use_cache) {
    const std::uint64_t hash = smp::config_hash(cfg);
    const fs::path path = cache_path(cfg);
    if (use_cache) {
        std::ifstream in(path, std::ios::binary);
        if (in) {
            smp::PriceSurface surf;
            surf.model = cfg.market;
            surf.contract = cfg.contract;
            surf.config = cfg.solver;
            if (smp::load_surface_binary(in, surf, hash)) return surf;
        }
    }
    smp::PriceSurface surf = smp::solve(cfg.market, cfg.contract, cfg.solver);
    if (use_cache) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (!ec) {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (out) smp::save_surface_binary(out, surf, hash);
        }
    }
    return surf;
}

int cmd_validate(const std::string& config_path) {
    const smp::ExperimentConfig cfg = smp::load_config(config_path);
    const smp::ValidationReport rep = cfg.market.validate();
    std::vector<smp::ValidationIssue> issues = rep.issues;
    try {
        cfg.contract.require_valid();
    } catch (const std::exception& e) {
        issues.push_back({"contract", e.what()});
    }
    try {
        cfg.solver.require_valid();
    } catch (const std::exception& e) {
        issues.push_back({"solver", e.what()});
    }
    if (issues.empty()) {
        std::cout << "ok: " << config_path << "\n";
        return 0;
    }
    for (const auto& is : issues) std::cout << is.key << ": " << is.message << "\n";
    return 1;
}

void require_valid_market(const smp::ExperimentConfig& cfg) {
    const smp::ValidationReport rep = cfg.market.validate();
    if (!rep.issues.empty())
        throw std::invalid_argument(rep.issues.front().key + ": " +
                                    rep.issues.front().message);
    cfg.contract.require_valid();
    cfg.solver.require_valid();
}

int cmd_price(const std::string& config_path, const std::string& at_text, bool use_cache) {
    const smp::ExperimentConfig cfg = smp::load_config(config_path);
    require_valid_market(cfg);
    const AtPoint at = parse_at(at_text);
    if (at.regime < 1 || at.regime > cfg.market.k)
        throw std::domain_error("regime index out of range (1.." +
                                std::to_string(cfg.market.k) + ")");
    const int i = at.regime - 1;
    const smp::PriceSurface surf = solve_cached(cfg, use_cache);
    const double phi = smp::price_at(surf, at.t, at.s, i, at.y);
    const double psi = smp::delta_integral(surf, at.t, at.s, i, at.y);
    std::printf("phi         = %.10g\n", phi);
    std::printf("psi         = %.10g\n", psi);
    std::printf("iterations  = %d\n", surf.iterations);
    std::printf("contraction = %.6g%s\n", surf.contraction.value,
                surf.contraction.near_unity ? " (near unity: slow convergence)" : "");
    std::printf("residual    = %.6g\n", surf.final_residual);
    return 0;
}

std::string delta_file_name(const std::string& out) {
    const std::string suffix = ".csv";
    if (out.size() > suffix.size() &&
        out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0)
        return out.substr(0, out.size() - suffix.size()) + "_delta.csv";
    return out + "_delta.csv";
}

int cmd_surface(const std::string& config_path, std::string out, bool with_delta,
                bool use_cache) {
    const smp::ExperimentConfig cfg = smp::load_config(config_path);
    require_valid_market(cfg);
    if (out.empty()) {
        const auto it = cfg.output.paths.find("surface");
        out = it != cfg.output.paths.end() ? it->second : "surface.csv";
    }
    const smp::PriceSurface surf = solve_cached(cfg, use_cache);
    {
        std::ofstream os(out, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open output file: " + out);
        smp::write_surface_csv(os, surf);
        if (!os) throw std::runtime_error("write failed: " + out);
    }
    std::cout << "wrote " << out << "\n";
    if (with_delta) {
        const smp::DeltaTable table(surf);
        const std::string dout = delta_file_name(out);
        std::ofstream os(dout, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open output file: " + dout);
        smp::write_delta_csv(os, surf, table);
        if (!os) throw std::runtime_error("write failed: " + dout);
        std::cout << "wrote " << dout << "\n";
    }
    return 0;
}

int cmd_check(const std::string& config_path, bool use_cache,
              std::optional<std::uint64_t> seed) {
    smp::ExperimentConfig cfg = smp::load_config(config_path);
    require_valid_market(cfg);
    if (seed) cfg.mc.seed = *seed;
    const smp::PriceSurface surf = solve_cached(cfg, use_cache);
    const auto results = smp::acceptance::run(cfg, std::cout, &surf);
    int failed = 0;
    for (const auto& r : results)
        if (!r.pass) ++failed;
    if (failed == 0) {
        std::cout << "all " << results.size() << " criteria passed\n";
        return 0;
    }
    std::cout << failed << " of " << results.size() << " criteria failed\n";
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regime-switching option pricing and hedging engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string at_text;
    std::string out_path;
    bool with_delta = false;
    bool no_cache = false;
    std::uint64_t seed_value = 0;

    auto* validate = app.add_subcommand("validate", "Check a configuration file");
    validate->add_option("config", config_path, "configuration file")->required();

    auto* price = app.add_subcommand("price", "Price and delta at one point");
    price->add_option("config", config_path, "configuration file")->required();
    price->add_option("--at", at_text, "evaluation point t,s,i,y (regime i is 1-based)")
        ->required();
    price->add_flag("--no-cache", no_cache, "bypass the solve cache");

    auto* surface = app.add_subcommand("surface", "Export the price surface as CSV");
    surface->add_option("config", config_path, "configuration file")->required();
    surface->add_option("--out", out_path, "output CSV path");
    surface->add_flag("--with-delta", with_delta, "also write the delta surface");
    surface->add_flag("--no-cache", no_cache, "bypass the solve cache");

    auto* check = app.add_subcommand("check", "Run the acceptance battery");
    check->add_option("config", config_path, "configuration file")->required();
    auto* seed_opt = check->add_option("--seed", seed_value, "Monte Carlo seed override");
    check->add_flag("--no-cache", no_cache, "bypass the solve cache");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (validate->parsed()) return cmd_validate(config_path);
        if (price->parsed()) return cmd_price(config_path, at_text, !no_cache);
        if (surface->parsed()) return cmd_surface(config_path, out_path, with_delta, !no_cache);
        if (check->parsed())
            return cmd_check(config_path, !no_cache,
                             seed_opt->count() ? std::optional<std::uint64_t>(seed_value)
                                               : std::nullopt);
    } catch (const smp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

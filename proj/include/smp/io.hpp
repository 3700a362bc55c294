#pragma once

/*
 Tabular and binary output for solved surfaces.

 CSV surface export: header `t,s,regime,y,phi`, one row per grid node of
 the age-zero slice (so y is always 0), ordered t outer, regime, s inner.
 The delta export is identical with a psi column.  Regime indices print
 1-based, matching the CLI convention.  Numbers print as %.17g, which
 round-trips doubles exactly and keeps files byte-stable across runs.

 Binary format "SMSF" version 1 stores grid dimensions, convergence
 metadata, and the raw slice; it exists for exact round-trips (the solve
 cache).  Host byte order is assumed: the cache is machine-local.
*/

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "smp/greeks.hpp"
#include "smp/volterra.hpp"

namespace smp {

namespace detail {

inline void append_g17(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

} // namespace detail

inline void write_surface_csv(std::ostream& os, const PriceSurface& surf) {
    std::string text = "t,s,regime,y,phi\n";
    text.reserve(64 * static_cast<std::size_t>(surf.grids.k) * surf.grids.n_t *
                 surf.grids.n_s);
    for (int m = 0; m < surf.grids.n_t; ++m)
        for (int i = 0; i < surf.grids.k; ++i)
            for (int n = 0; n < surf.grids.n_s; ++n) {
                detail::append_g17(text, surf.grids.t[m]);
                text += ',';
                detail::append_g17(text, surf.grids.s[n]);
                text += ',';
                text += std::to_string(i + 1);
                text += ",0,";
                detail::append_g17(text, surf.node(i, m, n));
                text += '\n';
            }
    os << text;
}

inline void write_delta_csv(std::ostream& os, const PriceSurface& surf,
                            const DeltaTable& table) {
    std::string text = "t,s,regime,y,psi\n";
    text.reserve(64 * static_cast<std::size_t>(surf.grids.k) * surf.grids.n_t *
                 surf.grids.n_s);
    for (int m = 0; m < surf.grids.n_t; ++m)
        for (int i = 0; i < surf.grids.k; ++i)
            for (int n = 0; n < surf.grids.n_s; ++n) {
                detail::append_g17(text, surf.grids.t[m]);
                text += ',';
                detail::append_g17(text, surf.grids.s[n]);
                text += ',';
                text += std::to_string(i + 1);
                text += ",0,";
                detail::append_g17(text, table.node(i, m, 0, n));
                text += '\n';
            }
    os << text;
}

namespace detail {

template <class T>
void put_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool get_raw(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return static_cast<bool>(is);
}

} // namespace detail

inline void save_surface_binary(std::ostream& os, const PriceSurface& surf,
                                std::uint64_t content_hash) {
    os.write("SMSF", 4);
    detail::put_raw(os, std::uint32_t{1});
    detail::put_raw(os, content_hash);
    detail::put_raw(os, std::int32_t{surf.grids.k});
    detail::put_raw(os, std::int32_t{surf.grids.n_t});
    detail::put_raw(os, std::int32_t{surf.grids.n_s});
    detail::put_raw(os, surf.grids.T);
    detail::put_raw(os, surf.grids.K);
    detail::put_raw(os, surf.grids.u0);
    detail::put_raw(os, surf.grids.du);
    detail::put_raw(os, std::int32_t{surf.iterations});
    detail::put_raw(os, surf.final_residual);
    detail::put_raw(os, surf.contraction.value);
    detail::put_raw(os, static_cast<std::uint8_t>(surf.contraction.near_unity ? 1 : 0));
    detail::put_raw(os, surf.max_ratio);
    detail::put_raw(os, static_cast<std::uint32_t>(surf.step_norms.size()));
    for (const double v : surf.step_norms) detail::put_raw(os, v);
    for (int i = 0; i < surf.grids.k; ++i)
        os.write(reinterpret_cast<const char*>(surf.G[i].data()),
                 static_cast<std::streamsize>(surf.G[i].size() * sizeof(double)));
}

// Fills G and metadata of a surface whose model/contract/config fields the
// caller has already set from the experiment config; the grid is recomputed
// and verified against the header.  Returns false on any mismatch or
// truncation, leaving `out` unusable.
inline bool load_surface_binary(std::istream& is, PriceSurface& out,
                                std::uint64_t expect_hash) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SMSF", 4) != 0) return false;
    std::uint32_t version = 0;
    std::uint64_t hash = 0;
    if (!detail::get_raw(is, version) || version != 1) return false;
    if (!detail::get_raw(is, hash) || hash != expect_hash) return false;

    detail::Grids g = detail::Grids::make(out.model, out.contract, out.config);
    std::int32_t k = 0, n_t = 0, n_s = 0;
    double T = 0, K = 0, u0 = 0, du = 0;
    if (!detail::get_raw(is, k) || !detail::get_raw(is, n_t) || !detail::get_raw(is, n_s) ||
        !detail::get_raw(is, T) || !detail::get_raw(is, K) || !detail::get_raw(is, u0) ||
        !detail::get_raw(is, du))
        return false;
    if (k != g.k || n_t != g.n_t || n_s != g.n_s || T != g.T || K != g.K || u0 != g.u0 ||
        du != g.du)
        return false;

    std::int32_t iters = 0;
    std::uint8_t warn = 0;
    std::uint32_t n_steps = 0;
    if (!detail::get_raw(is, iters) || !detail::get_raw(is, out.final_residual) ||
        !detail::get_raw(is, out.contraction.value) || !detail::get_raw(is, warn) ||
        !detail::get_raw(is, out.max_ratio) || !detail::get_raw(is, n_steps))
        return false;
    if (n_steps > 1000000) return false;
    out.iterations = iters;
    out.contraction.near_unity = warn != 0;
    out.step_norms.resize(n_steps);
    for (std::uint32_t a = 0; a < n_steps; ++a)
        if (!detail::get_raw(is, out.step_norms[a])) return false;

    out.grids = g;
    out.G.assign(static_cast<std::size_t>(g.k),
                 std::vector<double>(static_cast<std::size_t>(g.n_t) * g.n_s));
    for (int i = 0; i < g.k; ++i) {
        is.read(reinterpret_cast<char*>(out.G[i].data()),
                static_cast<std::streamsize>(out.G[i].size() * sizeof(double)));
        if (!is) return false;
    }
    out.finalize();
    return true;
}

} // namespace smp

#pragma once

/*
 Monte Carlo oracle for the regime-switching market.

 Paths are simulated exactly: the regime chain by conditional sojourn
 sampling (first sojourn conditioned on the initial age), the stock by
 closed-form lognormal bridging between regime epochs.  No time-stepping
 error enters, so disagreement against the integral-equation solver is pure
 sampling noise and 3-standard-error gates are meaningful.

 Determinism: each path owns counter-based substreams keyed by
 (seed, path index, stream), stream 0 for the chain and stream 1 for the
 stock, and reductions run pairwise over a path-indexed array in a fixed
 order.  Results are bit-identical for any worker count.

 The hedging backtest accumulates the discrete stochastic integral of the
 delta strategy against the discounted stock and reports the residual
   L = e^{-int r} (S_T - K)^+  -  phi(0, s0, i0, 0)  -  sum xi dS*,
 whose exact-continuous-time counterpart is a mean-zero martingale
 orthogonal to the hedgeable part.  The strategy observes pre-jump regime
 and age (predictability): at an instant that coincides with a jump, the
 position still reflects the regime the chain was leaving.
*/

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smp/contract.hpp"
#include "smp/greeks.hpp"
#include "smp/math/parallel.hpp"
#include "smp/math/rng.hpp"
#include "smp/regime_model.hpp"
#include "smp/volterra.hpp"

namespace smp {

enum class Measure { RiskNeutral, Physical };

// One simulated trajectory.  The chain part (jump_times, regimes) is filled
// by simulate_chain; the stock part (times, x, disc) by simulate_stock,
// where `times` is the sorted union of the requested observation times and
// the jump times, `x` the stock value and `disc` = exp(-int_0^t r) at each.
struct PathRecord {
    double horizon = 0.0;
    double y0 = 0.0;
    std::vector<double> jump_times; // strictly increasing, inside (0, horizon)
    std::vector<int> regimes;       // size jump_times.size() + 1
    std::vector<double> times;
    std::vector<double> x;
    std::vector<double> disc;

    int jumps() const { return static_cast<int>(jump_times.size()); }

    // regime holding at time t (post-jump convention at jump instants)
    int regime_at(double t) const {
        const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
        return regimes[static_cast<std::size_t>(it - jump_times.begin())];
    }

    double age_at(double t) const {
        const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
        const std::size_t n = static_cast<std::size_t>(it - jump_times.begin());
        return n == 0 ? y0 + t : t - jump_times[n - 1];
    }

    // pre-jump regime and age: what an observer sees approaching t from the
    // left; differs from the above exactly at jump instants
    std::pair<int, double> state_before(double t) const {
        const auto it = std::lower_bound(jump_times.begin(), jump_times.end(), t);
        const std::size_t n = static_cast<std::size_t>(it - jump_times.begin());
        const double age = n == 0 ? y0 + t : t - jump_times[n - 1];
        return {regimes[n], age};
    }
};

template <class Rng>
PathRecord simulate_chain(const RegimeModel& model, int x0, double y0, double horizon,
                          Rng& rng) {
    if (x0 < 0 || x0 >= model.k) throw std::out_of_range("simulate_chain: regime index");
    if (!(y0 >= 0.0)) throw std::domain_error("simulate_chain: initial age must be >= 0");
    if (!(horizon >= 0.0)) throw std::domain_error("simulate_chain: horizon must be >= 0");
    PathRecord path;
    path.horizon = horizon;
    path.y0 = y0;
    path.regimes.push_back(x0);
    double t = 0.0, age = y0;
    int i = x0;
    while (true) {
        if (path.jump_times.size() > 1000000)
            throw std::runtime_error(
                "simulate_chain: runaway jump count; model hazards look pathological");
        const double tau = model.sample_sojourn(i, age, rng.uniform());
        double tn = t + tau;
        if (!(tn < horizon)) break;
        if (tn <= t) tn = std::nextafter(t, horizon); // keep jump times strictly increasing
        if (!(tn < horizon)) break;
        const double jage = age + tau;
        const std::vector<double> probs = model.transition_prob(i, jage);
        const double u2 = rng.uniform();
        double cum = 0.0;
        int dest = -1, last_pos = -1;
        for (int j = 0; j < model.k; ++j) {
            if (probs[static_cast<std::size_t>(j)] <= 0.0) continue;
            last_pos = j;
            cum += probs[static_cast<std::size_t>(j)];
            if (u2 <= cum) {
                dest = j;
                break;
            }
        }
        if (dest < 0) dest = last_pos; // u2 beyond cum by roundoff
        path.jump_times.push_back(tn);
        path.regimes.push_back(dest);
        t = tn;
        age = 0.0;
        i = dest;
    }
    return path;
}

// Fills the stock part of `path`.  observe_at must be sorted, within
// [0, horizon].  One normal draw is consumed per positive-length segment
// between consecutive events (jumps included), none for zero-length ones.
// The discount accumulator always integrates r, whichever measure drives
// the drift.
template <class Rng>
void simulate_stock(const RegimeModel& model, PathRecord& path, double s0, Measure measure,
                    Rng& rng, const std::vector<double>& observe_at) {
    if (!(s0 > 0.0)) throw std::domain_error("simulate_stock: s0 must be positive");
    for (std::size_t a = 0; a < observe_at.size(); ++a) {
        if (observe_at[a] < 0.0 || observe_at[a] > path.horizon ||
            (a > 0 && observe_at[a] < observe_at[a - 1]))
            throw std::invalid_argument(
                "simulate_stock: observation times must be sorted within [0, horizon]");
    }
    std::vector<double> ev(observe_at.size() + path.jump_times.size());
    std::merge(observe_at.begin(), observe_at.end(), path.jump_times.begin(),
               path.jump_times.end(), ev.begin());
    path.times = std::move(ev);
    path.x.resize(path.times.size());
    path.disc.resize(path.times.size());

    double t = 0.0, x = s0, rint = 0.0;
    std::size_t jl = 0; // jumps fully processed
    for (std::size_t e = 0; e < path.times.size(); ++e) {
        const double te = path.times[e];
        const double dt = te - t;
        if (dt > 0.0) {
            const int i = path.regimes[jl];
            const double sig = model.sigma[i];
            const double drift = (measure == Measure::RiskNeutral ? model.r[i] : model.mu[i]);
            x *= std::exp((drift - 0.5 * sig * sig) * dt + sig * std::sqrt(dt) * rng.normal());
            rint += model.r[i] * dt;
            t = te;
        }
        if (jl < path.jump_times.size() && te == path.jump_times[jl]) ++jl;
        path.x[e] = x;
        path.disc[e] = std::exp(-rint);
    }
}

// Flips every stock normal; pairs of paths driven by (rng, AntitheticRng)
// share the Brownian magnitudes with opposite signs.
template <class Rng>
struct AntitheticRng {
    Rng& inner;
    double uniform() { return inner.uniform(); }
    double normal() { return -inner.normal(); }
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long n = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

struct MomentSummary {
    double mean = 0.0, se = 0.0, var = 0.0, var_se = 0.0;
};

// mean, SE, unbiased variance and the large-sample SE of the variance
// estimate; mutates vals into squared deviations as scratch.
inline MomentSummary summarize(std::vector<double>& vals) {
    const std::size_t n = vals.size();
    MomentSummary out;
    out.mean = pairwise_sum(vals.data(), n) / static_cast<double>(n);
    for (double& v : vals) {
        const double d = v - out.mean;
        v = d * d;
    }
    const double ss = pairwise_sum(vals.data(), n);
    out.var = ss / static_cast<double>(n - 1);
    out.se = std::sqrt(out.var / static_cast<double>(n));
    for (double& v : vals) v = v * v; // fourth powers of deviations
    const double m4 = pairwise_sum(vals.data(), n) / static_cast<double>(n);
    out.var_se = std::sqrt(std::max(0.0, m4 - out.var * out.var) / static_cast<double>(n));
    return out;
}

} // namespace detail

// Discounted-payoff estimate of the price at state (s, i, y), time 0.
// With `antithetic`, path pairs (2p, 2p+1) share a chain and mirror the
// stock normals; estimates stay deterministic per path index.
inline McEstimate mc_price(const RegimeModel& model, const ContractSpec& contract, double s,
                           int i, double y, long n_paths, std::uint64_t seed,
                           int workers = 1, bool antithetic = false) {
    const ValidationReport rep = model.validate();
    if (!rep.ok())
        throw std::invalid_argument("mc_price: invalid model: " + rep.issues[0].key);
    contract.require_valid();
    if (i < 0 || i >= model.k) throw std::out_of_range("mc_price: regime index");
    if (!(s > 0.0)) throw std::domain_error("mc_price: s must be positive");
    if (!(y >= 0.0)) throw std::domain_error("mc_price: age must be >= 0");
    if (n_paths < 1000) throw std::invalid_argument("mc_price: need at least 1000 paths");

    const double T = contract.maturity;
    std::vector<double> vals(static_cast<std::size_t>(n_paths));
    parallel_for_blocks(n_paths, workers, [&](int, long lo, long hi) {
        const std::vector<double> obs{T};
        for (long p = lo; p < hi; ++p) {
            const std::uint64_t base =
                antithetic ? static_cast<std::uint64_t>(p & ~1L) : static_cast<std::uint64_t>(p);
            CounterRng crng(seed, base, 0);
            CounterRng srng(seed, base, 1);
            PathRecord path = simulate_chain(model, i, y, T, crng);
            if (antithetic && (p & 1L)) {
                AntitheticRng<CounterRng> neg{srng};
                simulate_stock(model, path, s, Measure::RiskNeutral, neg, obs);
            } else {
                simulate_stock(model, path, s, Measure::RiskNeutral, srng, obs);
            }
            vals[static_cast<std::size_t>(p)] =
                path.disc.back() * contract.payoff(path.x.back());
        }
    });
    const detail::MomentSummary ms = detail::summarize(vals);
    return {ms.mean, ms.se, n_paths, seed};
}

struct BacktestReport {
    double mean = 0.0;        // mean residual L
    double std_error = 0.0;   // SE of the mean
    double variance = 0.0;    // var(L), the non-hedgeable risk
    double variance_se = 0.0; // large-sample SE of the variance estimate
    double price0 = 0.0;      // phi(0, s0, i0, 0), the hedge's initial capital
    long n = 0;
    std::uint64_t seed = 0;
};

// Delta-hedging simulation started fresh (age 0) at (s0, i0).  Rebalances
// on the dt-grid plus at every jump time, always from the pre-jump state.
inline BacktestReport hedge_backtest(const PriceSurface& surface, const DeltaTable& table,
                                     double s0, int i0, long n_paths, double rebalance_dt,
                                     std::uint64_t seed, int workers = 1) {
    const RegimeModel& model = surface.model;
    if (!(rebalance_dt > 0.0))
        throw std::invalid_argument("hedge_backtest: rebalance_dt must be positive");
    if (n_paths < 2) throw std::invalid_argument("hedge_backtest: need at least 2 paths");
    if (i0 < 0 || i0 >= model.k) throw std::out_of_range("hedge_backtest: regime index");
    if (!(s0 > 0.0)) throw std::domain_error("hedge_backtest: s0 must be positive");

    const double T = surface.contract.maturity;
    const double phi0 = price_at(surface, 0.0, s0, i0, 0.0);
    std::vector<double> grid;
    grid.push_back(0.0);
    for (long b = 1; rebalance_dt * b < T * (1.0 - 1e-12); ++b)
        grid.push_back(rebalance_dt * b);
    grid.push_back(T);

    std::vector<double> vals(static_cast<std::size_t>(n_paths));
    parallel_for_blocks(n_paths, workers, [&](int, long lo, long hi) {
        for (long p = lo; p < hi; ++p) {
            CounterRng crng(seed, static_cast<std::uint64_t>(p), 0);
            CounterRng srng(seed, static_cast<std::uint64_t>(p), 1);
            PathRecord path = simulate_chain(model, i0, 0.0, T, crng);
            simulate_stock(model, path, s0, Measure::RiskNeutral, srng, grid);
            double gains = 0.0;
            std::size_t jl = 0; // jumps strictly before the current event
            const std::size_t ne = path.times.size();
            for (std::size_t e = 0; e + 1 < ne; ++e) {
                const double te = path.times[e];
                while (jl < path.jump_times.size() && path.jump_times[jl] < te) ++jl;
                const int ipre = path.regimes[jl];
                const double age = jl == 0 ? te : te - path.jump_times[jl - 1];
                const double xi = table.delta(te, path.x[e], ipre, age);
                gains += xi * (path.disc[e + 1] * path.x[e + 1] - path.disc[e] * path.x[e]);
            }
            const double hstar = path.disc.back() * surface.contract.payoff(path.x.back());
            vals[static_cast<std::size_t>(p)] = hstar - phi0 - gains;
        }
    });
    const detail::MomentSummary ms = detail::summarize(vals);
    BacktestReport rep;
    rep.mean = ms.mean;
    rep.std_error = ms.se;
    rep.variance = ms.var;
    rep.variance_se = ms.var_se;
    rep.price0 = phi0;
    rep.n = n_paths;
    rep.seed = seed;
    return rep;
}

// Convenience overload building the delta table internally.
inline BacktestReport hedge_backtest(const PriceSurface& surface, double s0, int i0,
                                     long n_paths, double rebalance_dt, std::uint64_t seed,
                                     int workers = 1) {
    const DeltaTable table(surface);
    return hedge_backtest(surface, table, s0, i0, n_paths, rebalance_dt, seed, workers);
}

// Mean-variance tradeoff process K_t = int_0^t ((mu - r)/sigma)^2(X_u) du,
// an exact piecewise-constant integral along the regime path.
inline double mvt_process(const RegimeModel& model, const PathRecord& path, double t) {
    if (t < 0.0 || t > path.horizon * (1.0 + 1e-12) + 1e-15)
        throw std::domain_error("mvt_process: t outside [0, horizon]");
    t = std::min(t, path.horizon);
    double acc = 0.0, prev = 0.0;
    for (std::size_t n = 0; n <= path.jump_times.size(); ++n) {
        const double end = n < path.jump_times.size() ? std::min(path.jump_times[n], t) : t;
        if (end > prev) {
            const int i = path.regimes[n];
            const double lam = (model.mu[i] - model.r[i]) / model.sigma[i];
            acc += lam * lam * (end - prev);
            prev = end;
        }
        if (prev >= t) break;
    }
    return acc;
}

} // namespace smp

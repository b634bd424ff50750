#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "freewalk/boundary.hpp"
#include "freewalk/measure.hpp"
#include "freewalk/stallings.hpp"
#include "freewalk/walk.hpp"
#include "freewalk/word.hpp"

namespace freewalk {

/// A homomorphism F_k -> Z^j (j in {1, 2}), optionally reduced mod q per
/// coordinate for finite quotients.  Its kernel is the normal subgroup the
/// stopping-time machinery induces measures on.
struct AbelianProjection {
    int dim = 1;
    std::vector<std::array<long long, 2>> generator_images; // one per generator
    std::array<std::optional<long long>, 2> modulus{};

    AbelianProjection(const Alphabet& alpha, int j,
                      std::vector<std::array<long long, 2>> images)
        : dim(j), generator_images(std::move(images)) {
        if (dim != 1 && dim != 2) throw InputError("projection dimension must be 1 or 2");
        if (static_cast<int>(generator_images.size()) != alpha.rank)
            throw InputError("projection needs one image per generator");
    }

    /// Parse "a:1,b:0" (dim 1) or "a:1 0,b:0 1" (dim 2).
    static AbelianProjection parse(std::string_view spec, const Alphabet& alpha) {
        std::vector<std::array<long long, 2>> images(static_cast<std::size_t>(alpha.rank),
                                                     {0, 0});
        int dim = 1;
        std::size_t pos = 0;
        while (pos < spec.size()) {
            std::size_t end = spec.find(',', pos);
            if (end == std::string_view::npos) end = spec.size();
            std::string_view item = spec.substr(pos, end - pos);
            std::size_t colon = item.find(':');
            if (colon == std::string_view::npos || colon == 0)
                throw InputError("bad projection entry '" + std::string(item) + "'");
            Letter g = alpha.from_char(item[0]);
            if (g < 0 || colon != 1)
                throw InputError("projection entries use lowercase generators, got '" +
                                 std::string(item) + "'");
            std::string_view vals = item.substr(colon + 1);
            std::array<long long, 2> img{0, 0};
            std::size_t space = vals.find(' ');
            try {
                if (space == std::string_view::npos) {
                    img[0] = std::stoll(std::string(vals));
                } else {
                    img[0] = std::stoll(std::string(vals.substr(0, space)));
                    img[1] = std::stoll(std::string(vals.substr(space + 1)));
                    dim = 2;
                }
            } catch (const std::exception&) {
                throw InputError("bad projection value in '" + std::string(item) + "'");
            }
            images[static_cast<std::size_t>(g - 1)] = img;
            pos = end + 1;
        }
        return AbelianProjection(alpha, dim, std::move(images));
    }

    std::array<long long, 2> project(const Word& w) const {
        std::array<long long, 2> v{0, 0};
        for (Letter x : w.letters()) {
            int idx = (x > 0 ? x : -x) - 1;
            long long sign = x > 0 ? 1 : -1;
            for (int c = 0; c < dim; ++c)
                v[static_cast<std::size_t>(c)] +=
                    sign * generator_images[static_cast<std::size_t>(idx)][static_cast<std::size_t>(c)];
        }
        reduce(v);
        return v;
    }

    void reduce(std::array<long long, 2>& v) const {
        for (int c = 0; c < dim; ++c) {
            if (modulus[static_cast<std::size_t>(c)]) {
                long long q = *modulus[static_cast<std::size_t>(c)];
                v[static_cast<std::size_t>(c)] = ((v[static_cast<std::size_t>(c)] % q) + q) % q;
            }
        }
    }

    bool is_zero(const std::array<long long, 2>& v) const {
        for (int c = 0; c < dim; ++c)
            if (v[static_cast<std::size_t>(c)] != 0) return false;
        return true;
    }

    bool in_kernel(const Word& w) const { return is_zero(project(w)); }
};

/// The kernel of a surjection onto Z^j is not finitely generated, so it has
/// no Stallings graph; the projection itself is its only representation here.
inline StallingsGraph kernel_stallings(const AbelianProjection& pi) {
    bool finite = true;
    for (int c = 0; c < pi.dim; ++c) finite = finite && pi.modulus[static_cast<std::size_t>(c)];
    if (!finite)
        throw InputError(
            "the kernel of an infinite abelian quotient is infinitely generated; "
            "it is represented only through the projection");
    throw InputError("kernel graphs for finite quotients must be folded from explicit "
                     "generators; see the subgroup interface");
}

/// One stopped walk: tau is the first step at which the projection returns to
/// zero, xi the group element accumulated up to tau.  A cap turns long
/// excursions into an explicit `capped` outcome, never a silent truncation.
struct StoppingSample {
    long long tau = 0;
    bool capped = false;
    Word xi;
};

inline StoppingSample stopping_sample(const StepD& m, const AbelianProjection& pi, long long cap,
                                      std::uint64_t seed, std::uint64_t trial = 0,
                                      std::uint64_t lane = kLaneForward) {
    if (!m.is_symmetric())
        throw InputError("stopping times require a symmetric step distribution");
    if (cap < 1) throw InputError("cap must be >= 1");
    WalkStream stream(m, seed, trial, lane);
    PositionCursor cur;
    std::array<long long, 2> v{0, 0};
    for (long long n = 1; n <= cap; ++n) {
        const Word& g = stream.next();
        cur.step(g);
        auto img = pi.project(g);
        for (int c = 0; c < pi.dim; ++c)
            v[static_cast<std::size_t>(c)] += img[static_cast<std::size_t>(c)];
        pi.reduce(v);
        if (pi.is_zero(v)) return StoppingSample{n, false, cur.word()};
    }
    return StoppingSample{cap, true, Word()};
}

/// Raw material for all induced-measure statistics over one batch of trials.
struct InducedSamples {
    long long trials = 0;
    long long capped = 0;
    long long cap = 0;
    std::vector<std::int64_t> taus;       // tau, or cap for capped trials
    std::vector<std::uint8_t> was_capped; // parallel to taus
    std::vector<std::int32_t> xi_lengths; // |xi| of uncapped trials, in trial order
    std::map<Word, long long> xi_counts;  // uncapped trials only
};

inline InducedSamples induced_samples(const StepD& m, const AbelianProjection& pi,
                                      long long trials, long long cap, std::uint64_t seed,
                                      int parallel = 1) {
    InducedSamples out;
    out.trials = trials;
    out.cap = cap;
    out.taus.assign(static_cast<std::size_t>(trials), 0);
    out.was_capped.assign(static_cast<std::size_t>(trials), 0);
    std::vector<Word> xis(static_cast<std::size_t>(trials));
    detail::parallel_trials(trials, parallel, [&](long long t) {
        StoppingSample s = stopping_sample(m, pi, cap, seed, static_cast<std::uint64_t>(t));
        out.taus[static_cast<std::size_t>(t)] = s.tau;
        out.was_capped[static_cast<std::size_t>(t)] = s.capped ? 1 : 0;
        if (!s.capped) xis[static_cast<std::size_t>(t)] = s.xi;
    });
    for (long long t = 0; t < trials; ++t) {
        if (out.was_capped[static_cast<std::size_t>(t)]) {
            ++out.capped;
        } else {
            out.xi_lengths.push_back(xis[static_cast<std::size_t>(t)].size());
            ++out.xi_counts[xis[static_cast<std::size_t>(t)]];
        }
    }
    return out;
}

struct InducedMeasureReport {
    std::map<Word, double> frequencies; // empirical induced measure on the kernel
    double cap_rate = 0.0;
    // Raw plug-in TV between the empirical measure and its reflection.  For
    // heavy-tailed stopping this is dominated by words seen once or twice
    // (their mirror count fluctuates by the full count), so it decays very
    // slowly in the trial count; head_symmetry_tv restricts to pairs with at
    // least `head_count` observations and is the meaningful symmetry check.
    double symmetry_tv = 0.0;
    double head_symmetry_tv = 0.0;
    long long head_count = 20;
    bool kernel_verified = false;
};

inline InducedMeasureReport induced_measure_report(const InducedSamples& samples,
                                                   const AbelianProjection& pi,
                                                   long long head_count = 20) {
    InducedMeasureReport rep;
    rep.head_count = head_count;
    long long uncapped = samples.trials - samples.capped;
    rep.cap_rate = samples.trials > 0
                       ? static_cast<double>(samples.capped) / static_cast<double>(samples.trials)
                       : 0.0;
    rep.kernel_verified = true;
    if (uncapped == 0) return rep;
    for (auto& [w, c] : samples.xi_counts) {
        rep.frequencies[w] = static_cast<double>(c) / static_cast<double>(uncapped);
        if (!pi.in_kernel(w)) rep.kernel_verified = false;
    }
    double tv = 0.0, head_tv = 0.0;
    for (auto& [w, c] : samples.xi_counts) {
        auto it = samples.xi_counts.find(w.inverse());
        long long mirror = it == samples.xi_counts.end() ? 0 : it->second;
        tv += std::abs(static_cast<double>(c - mirror));
        if (c + mirror >= head_count) head_tv += std::abs(static_cast<double>(c - mirror));
    }
    rep.symmetry_tv = tv / (2.0 * static_cast<double>(uncapped));
    rep.head_symmetry_tv = head_tv / (2.0 * static_cast<double>(uncapped));
    return rep;
}

/// Log-log least-squares slope of the stopping-time survival function over a
/// decade window.  Capped trials still contribute lower bounds as long as
/// the cap clears the window.
struct TailFit {
    double slope = 0.0;
    double stderr_ = 0.0;
    int points = 0;
    long long window_lo = 0;
    long long window_hi = 0;
};

inline TailFit tau_tail_fit(const InducedSamples& samples, long long window_lo = 100,
                            long long window_hi = 1000, int grid_points = 11) {
    if (samples.cap < window_hi)
        throw InsufficientDataError("cap " + std::to_string(samples.cap) +
                                    " below the fit window end " + std::to_string(window_hi));
    if (samples.trials < 1000)
        throw InsufficientDataError("tail fit needs at least 1000 samples");
    long long max_tau = 0;
    for (auto t : samples.taus) max_tau = std::max<long long>(max_tau, t);
    if (max_tau <= window_lo)
        throw InsufficientDataError("no stopping times beyond the fit window start; "
                                    "the tail is degenerate");

    std::vector<double> xs, ys;
    for (int i = 0; i < grid_points; ++i) {
        double frac = static_cast<double>(i) / (grid_points - 1);
        long long n = static_cast<long long>(
            std::llround(window_lo * std::pow(static_cast<double>(window_hi) / window_lo, frac)));
        long long survivors = 0;
        for (auto t : samples.taus) survivors += t > n;
        if (survivors == 0)
            throw InsufficientDataError("no survivors at n=" + std::to_string(n) +
                                        " inside the fit window");
        xs.push_back(std::log(static_cast<double>(n)));
        ys.push_back(std::log(static_cast<double>(survivors) /
                              static_cast<double>(samples.trials)));
    }
    int k = static_cast<int>(xs.size());
    double mx = 0, my = 0;
    for (int i = 0; i < k; ++i) {
        mx += xs[static_cast<std::size_t>(i)];
        my += ys[static_cast<std::size_t>(i)];
    }
    mx /= k;
    my /= k;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < k; ++i) {
        sxx += (xs[static_cast<std::size_t>(i)] - mx) * (xs[static_cast<std::size_t>(i)] - mx);
        sxy += (xs[static_cast<std::size_t>(i)] - mx) * (ys[static_cast<std::size_t>(i)] - my);
    }
    double slope = sxy / sxx;
    double sse = 0;
    for (int i = 0; i < k; ++i) {
        double pred = my + slope * (xs[static_cast<std::size_t>(i)] - mx);
        sse += (ys[static_cast<std::size_t>(i)] - pred) * (ys[static_cast<std::size_t>(i)] - pred);
    }
    double se = k > 2 ? std::sqrt(sse / (k - 2) / sxx) : 0.0;
    return TailFit{slope, se, k, window_lo, window_hi};
}

/// Running averages of |xi|^p over the sample sequence, with a stabilization
/// flag: the relative change over the last decade of samples is below 5%.
struct MomentScanRow {
    double p = 0.0;
    double final_average = 0.0;
    double last_decade_rel_change = 0.0;
    bool stabilized = false;
};

inline std::vector<MomentScanRow> induced_moment_scan(const InducedSamples& samples,
                                                      std::span<const double> p_grid) {
    if (samples.xi_lengths.empty())
        throw InsufficientDataError("no uncapped samples for the moment scan");
    std::vector<MomentScanRow> rows;
    std::size_t n = samples.xi_lengths.size();
    for (double p : p_grid) {
        double sum = 0.0;
        double at_tenth = 0.0;
        std::size_t tenth = n / 10;
        for (std::size_t i = 0; i < n; ++i) {
            sum += std::pow(static_cast<double>(samples.xi_lengths[i]), p);
            if (i + 1 == tenth) at_tenth = sum / static_cast<double>(tenth);
        }
        double final_avg = sum / static_cast<double>(n);
        double rel = tenth > 0 && final_avg != 0.0
                         ? std::abs(final_avg - at_tenth) / std::abs(final_avg)
                         : 0.0;
        rows.push_back(MomentScanRow{p, final_avg, rel, rel < 0.05});
    }
    return rows;
}

/// Monte Carlo check of the induced stationarity identity: the boundary law
/// of the m-walk against the same law with an independent stopped excursion
/// prepended.  Returns the total-variation distance at the given cylinder
/// depth.  An optional fixed prepend replaces the stopped excursion (the
/// asymmetric control, which must break the identity).
struct InducedStationarityReport {
    double residual = 0.0;
    long long trials = 0;
    long long failures = 0; // extraction or depth failures, excluded from both measures
    double cap_rate = 0.0;
};

inline InducedStationarityReport induced_stationarity_check(
    const StepD& m, const AbelianProjection& pi, int depth, long long trials, int steps,
    long long cap, std::uint64_t seed, double horizon_fraction = 0.5, int parallel = 1,
    const std::optional<Word>& control_prepend = std::nullopt) {
    if (depth < 1) throw InputError("cylinder depth must be >= 1");

    // Lanes: forward walk supplies the boundary germ, lane 2 the independent
    // stopped excursion.
    constexpr std::uint64_t kLaneStopping = 2;
    std::mutex merge_mutex;
    std::map<Word, long long> base_counts, shifted_counts;
    long long failures = 0, capped = 0;

    int threads = std::max(1, parallel);
    long long chunk = (trials + threads - 1) / threads;
    auto run_range = [&](long long lo, long long hi) {
        std::map<Word, long long> local_base, local_shifted;
        long long local_failures = 0, local_capped = 0;
        for (long long t = lo; t < hi; ++t) {
            WalkStream stream(m, seed, static_cast<std::uint64_t>(t), kLaneForward);
            auto raw = detail::extract_raw([&] { return stream.next(); }, steps,
                                           horizon_fraction);
            Word shift;
            if (control_prepend) {
                shift = *control_prepend;
            } else {
                StoppingSample s =
                    stopping_sample(m, pi, cap, seed, static_cast<std::uint64_t>(t), kLaneStopping);
                if (s.capped) {
                    ++local_capped;
                    ++local_failures;
                    continue;
                }
                shift = s.xi;
            }
            if (raw.stable_depth < depth) {
                ++local_failures;
                continue;
            }
            Word germ = raw.snapshot.prefix(raw.stable_depth);
            Word shifted = shift * germ;
            if (shifted.size() < depth) {
                ++local_failures; // the prepend ate the whole confirmed germ
                continue;
            }
            ++local_base[germ.prefix(depth)];
            ++local_shifted[shifted.prefix(depth)];
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        failures += local_failures;
        capped += local_capped;
        for (auto& [w, c] : local_base) base_counts[w] += c;
        for (auto& [w, c] : local_shifted) shifted_counts[w] += c;
    };
    if (threads == 1) {
        run_range(0, trials);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) {
            long long lo = w * chunk, hi = std::min(trials, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    long long kept = trials - failures;
    InducedStationarityReport rep;
    rep.trials = trials;
    rep.failures = failures;
    rep.cap_rate = trials > 0 ? static_cast<double>(capped) / static_cast<double>(trials) : 0.0;
    if (kept == 0) throw InsufficientDataError("all trials failed extraction");
    double tv = 0.0;
    for (auto& [w, c] : base_counts) {
        auto it = shifted_counts.find(w);
        long long sc = it == shifted_counts.end() ? 0 : it->second;
        tv += std::abs(static_cast<double>(c - sc)) / static_cast<double>(kept);
    }
    for (auto& [w, c] : shifted_counts)
        if (!base_counts.count(w)) tv += static_cast<double>(c) / static_cast<double>(kept);
    rep.residual = tv / 2.0;
    return rep;
}

} // namespace freewalk
